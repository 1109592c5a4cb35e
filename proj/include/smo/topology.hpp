#pragma once

#include <any>
#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

namespace smo {

/// Simulated time. All latencies and durations are integer tick counts.
using Tick = std::int64_t;

enum class ComponentKind {
  NSSMF,
  NFMF,
  NFVO,
  VNFM,
  VIM,
  WIM,
  CISM,
  CIR,
  CCM,
  MdaSystem3GPP,
  MdaSystemNFV,
  NonRtRic,
  AimlFunction,
  NssmfTermination,
  NfvoTermination,
  ExternalAimlTermination,
  ExternalProvider,
  RApp,
};

std::string_view to_string(ComponentKind kind);
ComponentKind parse_component_kind(std::string_view text);

/// Management domain a component belongs to; drives where deployed models
/// serve predictions and which MDA system trains domain-level models.
enum class Domain { Nsms3gpp, NfvMano, NonRtRic, External };
Domain domain_of(ComponentKind kind);

struct ComponentId {
  ComponentKind kind = ComponentKind::NonRtRic;
  int index = 0;

  auto operator<=>(const ComponentId&) const = default;

  /// "Kind#index", e.g. "NFMF#2".
  std::string str() const;
  /// Accepts "Kind#index" or bare "Kind" (index 0).
  static ComponentId parse(std::string_view text);
};

enum class InterfaceName {
  NSSMF_NonRTRIC,
  NFVO_NonRTRIC,
  R1,
  SmoInternal,
  NonRtRicInternal,
  ExternalAiml,
};

inline constexpr std::array<InterfaceName, 6> kAllInterfaces = {
    InterfaceName::NSSMF_NonRTRIC, InterfaceName::NFVO_NonRTRIC,    InterfaceName::R1,
    InterfaceName::SmoInternal,    InterfaceName::NonRtRicInternal, InterfaceName::ExternalAiml};

std::string_view to_string(InterfaceName name);
/// Throws Error(UnknownInterface) for unrecognised names.
InterfaceName parse_interface(std::string_view text);

/// NSSMF_NonRTRIC and NFVO_NonRTRIC: the interfaces terminated inside the
/// Non-RT RIC that management domains use to reach the AI/ML Function.
bool is_termination_interface(InterfaceName name);

struct InterfaceSpec {
  Tick latency = 1;
  std::int64_t overhead_bytes = 24;

  bool operator==(const InterfaceSpec&) const = default;
};

/// Defaults used when a config does not override an interface.
InterfaceSpec default_interface_spec(InterfaceName name);

enum class PayloadKind {
  RawData,
  CleansedData,
  ModelArtifact,
  Prediction,
  Report,
  Control,
  Heartbeat,
  Checkpoint,
};

std::string_view to_string(PayloadKind kind);
PayloadKind parse_payload_kind(std::string_view text);

/// Whether `iface` may connect components of kinds `a` and `b` (either order).
bool route_allowed(InterfaceName iface, ComponentKind a, ComponentKind b);

/// Up = toward the AI/ML Function side of the interface.
enum class Direction { Up, Down };
Direction direction_of(InterfaceName iface, const ComponentId& src, const ComponentId& dst);

struct Link {
  ComponentId a;
  ComponentId b;
  InterfaceName iface = InterfaceName::SmoInternal;

  bool operator==(const Link&) const = default;
};

struct ComponentDecl {
  ComponentKind kind = ComponentKind::NonRtRic;
  int count = 1;
  /// First index; instances get index, index+1, ...
  int index = 0;
};

struct LinkDecl {
  ComponentId a;
  ComponentId b;
  InterfaceName iface = InterfaceName::SmoInternal;
};

struct TopologyConfig {
  std::vector<ComponentDecl> components;
  /// Extra links beyond the automatic wiring; validated against route_allowed.
  std::vector<LinkDecl> links;
  std::map<InterfaceName, InterfaceSpec> interfaces;
};

class Topology {
 public:
  const std::vector<ComponentId>& components() const { return components_; }
  const std::vector<Link>& links() const { return links_; }

  bool contains(const ComponentId& id) const;
  std::vector<ComponentId> of_kind(ComponentKind kind) const;
  std::optional<InterfaceName> link_between(const ComponentId& a, const ComponentId& b) const;
  std::vector<ComponentId> neighbors(const ComponentId& id) const;
  bool uses_interface(InterfaceName iface) const;
  const InterfaceSpec& interface_spec(InterfaceName iface) const;

  /// Shortest hop path from src to dst (inclusive). Ties resolve toward the
  /// smaller ComponentId. Throws Error(UndeclaredRoute) when unreachable.
  std::vector<ComponentId> route(const ComponentId& src, const ComponentId& dst) const;

  /// The NonRtRic instance a termination or AI/ML Function is hosted in.
  std::optional<ComponentId> host_ric(const ComponentId& id) const;

 private:
  friend Topology build_topology(const TopologyConfig& config);

  void add_link(const ComponentId& a, const ComponentId& b, InterfaceName iface);

  std::vector<ComponentId> components_;
  std::vector<Link> links_;
  std::map<ComponentId, std::vector<std::pair<ComponentId, InterfaceName>>> adjacency_;
  std::map<InterfaceName, InterfaceSpec> interfaces_;
  std::map<ComponentId, ComponentId> hosted_in_;
};

/// Instantiates the declared components, attaches terminations to the single
/// NonRtRic, wires the automatic links and validates explicit ones.
Topology build_topology(const TopologyConfig& config);

// ---------------------------------------------------------------------------
// Event loop

struct InterfaceMessage {
  std::uint64_t msg_id = 0;
  ComponentId src;
  ComponentId dst;
  InterfaceName iface = InterfaceName::SmoInternal;
  PayloadKind payload = PayloadKind::Control;
  std::int64_t payload_bytes = 0;
  Tick send_tick = 0;
  Tick deliver_tick = 0;
  std::any body;
  std::string detail;
};

enum class EventType {
  Send,
  Deliver,
  Drop,
  Transition,
  Fault,
  Detection,
  Mitigation,
  Timeout,
  Rejection,
  Info,
};

std::string_view to_string(EventType type);

struct LogEntry {
  Tick tick = 0;
  std::uint64_t seq = 0;
  EventType type = EventType::Info;
  std::optional<ComponentId> src;
  std::optional<ComponentId> dst;
  std::optional<InterfaceName> iface;
  std::optional<PayloadKind> payload;
  /// Metered bytes (payload + per-message overhead) for message events.
  std::int64_t bytes = 0;
  std::optional<std::uint64_t> msg_id;
  std::string detail;
};

/// One JSON object per line with a fixed field order:
/// tick, seq, event-type, src, dst, interface, payload-kind, bytes, msg-id, detail.
std::string to_jsonl(const LogEntry& entry);

struct MeterReading {
  std::int64_t bytes = 0;
  std::int64_t messages = 0;

  MeterReading& operator+=(const MeterReading& other) {
    bytes += other.bytes;
    messages += other.messages;
    return *this;
  }
  bool operator==(const MeterReading&) const = default;
};

struct InterfaceMeter {
  MeterReading up;
  MeterReading down;

  MeterReading total() const {
    MeterReading t = up;
    t += down;
    return t;
  }
};

/// Faults are applied after all regular work at their tick.
enum class Phase { Normal = 0, EndOfTick = 1 };

class Simulator {
 public:
  using DeliveryHandler = std::function<void(const InterfaceMessage&)>;

  explicit Simulator(Topology topology);

  const Topology& topology() const { return topology_; }
  Tick now() const { return now_; }

  struct SendOutcome {
    bool accepted = false;
    std::uint64_t msg_id = 0;
  };

  /// Single hop over the link between src and dst. Throws
  /// Error(UndeclaredRoute) when no such link exists. A failed destination
  /// refuses everything except heartbeats; the refusal is logged as a Drop
  /// with detail "ComponentDown".
  SendOutcome send(const ComponentId& src, const ComponentId& dst, PayloadKind payload,
                   std::int64_t payload_bytes, std::any body = {}, DeliveryHandler on_deliver = {},
                   std::string detail = {});

  /// Multi-hop delivery along topology().route(src, dst); intermediate
  /// components forward on receipt. `on_arrival` fires at the final hop.
  void transfer(const ComponentId& src, const ComponentId& dst, PayloadKind payload,
                std::int64_t payload_bytes, std::any body, DeliveryHandler on_arrival,
                std::string detail = {});

  void schedule(Tick at, std::function<void()> action, Phase phase = Phase::Normal);

  /// Processes every queued item with tick <= t in (tick, phase, seq) order
  /// and returns the log entries appended meanwhile. Clock ends at t.
  std::vector<LogEntry> run_until(Tick t);

  /// Processes until the queue drains or the next item lies beyond `limit`.
  void run_until_idle(Tick limit);

  bool idle() const { return queue_.empty(); }

  /// Cumulative metered traffic. Throws Error(UnknownInterface) when the
  /// topology has no link over `iface`.
  InterfaceMeter meter(InterfaceName iface) const;
  MeterReading meter(InterfaceName iface, PayloadKind payload) const;

  void set_failed(const ComponentId& id, bool failed);
  bool failed(const ComponentId& id) const;

  /// Appends a non-message event at the current tick.
  void record(EventType type, std::optional<ComponentId> src, std::optional<ComponentId> dst,
              std::string detail);

  const std::vector<LogEntry>& log() const { return log_; }
  std::string log_jsonl() const;

 private:
  struct Item {
    Tick tick;
    int phase;
    std::uint64_t seq;
    bool is_message;
    InterfaceMessage message;
    DeliveryHandler handler;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const;
  };

  void push(Item item);
  void process(Item& item);
  void append(LogEntry entry);
  void forward(std::vector<ComponentId> path, std::size_t hop, PayloadKind payload,
               std::int64_t payload_bytes, std::any body, DeliveryHandler on_arrival,
               std::string detail);

  Topology topology_;
  Tick now_ = 0;
  std::uint64_t next_msg_id_ = 1;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_item_seq_ = 0;
  std::priority_queue<Item, std::vector<Item>, Later> queue_;
  std::vector<LogEntry> log_;
  std::map<InterfaceName, InterfaceMeter> meters_;
  std::map<std::pair<InterfaceName, PayloadKind>, MeterReading> payload_meters_;
  std::map<ComponentId, bool> failed_;
};

}  // namespace smo
