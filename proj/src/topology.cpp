#include "smo/topology.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "smo/error.hpp"

namespace smo {

namespace {

constexpr std::array<std::pair<ComponentKind, std::string_view>, 18> kKindNames = {{
    {ComponentKind::NSSMF, "NSSMF"},
    {ComponentKind::NFMF, "NFMF"},
    {ComponentKind::NFVO, "NFVO"},
    {ComponentKind::VNFM, "VNFM"},
    {ComponentKind::VIM, "VIM"},
    {ComponentKind::WIM, "WIM"},
    {ComponentKind::CISM, "CISM"},
    {ComponentKind::CIR, "CIR"},
    {ComponentKind::CCM, "CCM"},
    {ComponentKind::MdaSystem3GPP, "MdaSystem3GPP"},
    {ComponentKind::MdaSystemNFV, "MdaSystemNFV"},
    {ComponentKind::NonRtRic, "NonRtRic"},
    {ComponentKind::AimlFunction, "AimlFunction"},
    {ComponentKind::NssmfTermination, "NssmfTermination"},
    {ComponentKind::NfvoTermination, "NfvoTermination"},
    {ComponentKind::ExternalAimlTermination, "ExternalAimlTermination"},
    {ComponentKind::ExternalProvider, "ExternalProvider"},
    {ComponentKind::RApp, "RApp"},
}};

constexpr std::array<std::pair<InterfaceName, std::string_view>, 6> kInterfaceNames = {{
    {InterfaceName::NSSMF_NonRTRIC, "NSSMF_NonRTRIC"},
    {InterfaceName::NFVO_NonRTRIC, "NFVO_NonRTRIC"},
    {InterfaceName::R1, "R1"},
    {InterfaceName::SmoInternal, "SmoInternal"},
    {InterfaceName::NonRtRicInternal, "NonRtRicInternal"},
    {InterfaceName::ExternalAiml, "ExternalAiml"},
}};

constexpr std::array<std::pair<PayloadKind, std::string_view>, 8> kPayloadNames = {{
    {PayloadKind::RawData, "RawData"},
    {PayloadKind::CleansedData, "CleansedData"},
    {PayloadKind::ModelArtifact, "ModelArtifact"},
    {PayloadKind::Prediction, "Prediction"},
    {PayloadKind::Report, "Report"},
    {PayloadKind::Control, "Control"},
    {PayloadKind::Heartbeat, "Heartbeat"},
    {PayloadKind::Checkpoint, "Checkpoint"},
}};

struct Rule {
  InterfaceName iface;
  ComponentKind down;  // far side
  ComponentKind up;    // AI/ML Function side
};

using K = ComponentKind;
using I = InterfaceName;

// Allowed (interface, kind, kind) triples. Orientation gives the meter direction.
constexpr std::array<Rule, 26> kRules = {{
    {I::NSSMF_NonRTRIC, K::NSSMF, K::NssmfTermination},
    {I::NSSMF_NonRTRIC, K::MdaSystem3GPP, K::NssmfTermination},
    {I::NFVO_NonRTRIC, K::NFVO, K::NfvoTermination},
    {I::NFVO_NonRTRIC, K::MdaSystemNFV, K::NfvoTermination},
    {I::R1, K::RApp, K::AimlFunction},
    {I::NonRtRicInternal, K::NssmfTermination, K::AimlFunction},
    {I::NonRtRicInternal, K::NfvoTermination, K::AimlFunction},
    {I::NonRtRicInternal, K::ExternalAimlTermination, K::AimlFunction},
    {I::NonRtRicInternal, K::AimlFunction, K::AimlFunction},
    {I::ExternalAiml, K::ExternalProvider, K::ExternalAimlTermination},
    {I::SmoInternal, K::NFMF, K::NSSMF},
    {I::SmoInternal, K::NFMF, K::MdaSystem3GPP},
    {I::SmoInternal, K::NSSMF, K::MdaSystem3GPP},
    {I::SmoInternal, K::VNFM, K::NFVO},
    {I::SmoInternal, K::VIM, K::NFVO},
    {I::SmoInternal, K::WIM, K::NFVO},
    {I::SmoInternal, K::CISM, K::NFVO},
    {I::SmoInternal, K::CIR, K::NFVO},
    {I::SmoInternal, K::CCM, K::NFVO},
    {I::SmoInternal, K::NFVO, K::MdaSystemNFV},
    {I::SmoInternal, K::VNFM, K::MdaSystemNFV},
    {I::SmoInternal, K::VIM, K::MdaSystemNFV},
    {I::SmoInternal, K::WIM, K::MdaSystemNFV},
    {I::SmoInternal, K::CISM, K::MdaSystemNFV},
    {I::SmoInternal, K::CIR, K::MdaSystemNFV},
    {I::SmoInternal, K::CCM, K::MdaSystemNFV},
}};

bool is_nfv_block(ComponentKind k) {
  return k == K::VNFM || k == K::VIM || k == K::WIM || k == K::CISM || k == K::CIR || k == K::CCM;
}

}  // namespace

std::string_view to_string(ComponentKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

ComponentKind parse_component_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames)
    if (name == text) return k;
  throw Error(Errc::ConfigError, "unknown component kind '" + std::string(text) + "'");
}

Domain domain_of(ComponentKind kind) {
  switch (kind) {
    case K::NSSMF:
    case K::NFMF:
    case K::MdaSystem3GPP:
      return Domain::Nsms3gpp;
    case K::NFVO:
    case K::VNFM:
    case K::VIM:
    case K::WIM:
    case K::CISM:
    case K::CIR:
    case K::CCM:
    case K::MdaSystemNFV:
      return Domain::NfvMano;
    case K::ExternalProvider:
      return Domain::External;
    default:
      return Domain::NonRtRic;
  }
}

std::string ComponentId::str() const { return std::string(to_string(kind)) + "#" + std::to_string(index); }

ComponentId ComponentId::parse(std::string_view text) {
  ComponentId id;
  const auto hash = text.find('#');
  id.kind = parse_component_kind(text.substr(0, hash));
  if (hash != std::string_view::npos) {
    const auto digits = text.substr(hash + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id.index);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || id.index < 0)
      throw Error(Errc::ConfigError, "bad component index in '" + std::string(text) + "'");
  }
  return id;
}

std::string_view to_string(InterfaceName name) {
  for (const auto& [n, text] : kInterfaceNames)
    if (n == name) return text;
  return "?";
}

InterfaceName parse_interface(std::string_view text) {
  for (const auto& [n, name] : kInterfaceNames)
    if (name == text) return n;
  throw Error(Errc::UnknownInterface, "unknown interface '" + std::string(text) + "'");
}

bool is_termination_interface(InterfaceName name) {
  return name == I::NSSMF_NonRTRIC || name == I::NFVO_NonRTRIC;
}

InterfaceSpec default_interface_spec(InterfaceName name) {
  switch (name) {
    case I::NSSMF_NonRTRIC: return {2, 24};
    case I::NFVO_NonRTRIC: return {2, 24};
    case I::R1: return {1, 24};
    case I::SmoInternal: return {1, 24};
    case I::NonRtRicInternal: return {0, 24};
    case I::ExternalAiml: return {3, 24};
  }
  return {};
}

std::string_view to_string(PayloadKind kind) {
  for (const auto& [k, name] : kPayloadNames)
    if (k == kind) return name;
  return "?";
}

PayloadKind parse_payload_kind(std::string_view text) {
  for (const auto& [k, name] : kPayloadNames)
    if (name == text) return k;
  throw Error(Errc::ConfigError, "unknown payload kind '" + std::string(text) + "'");
}

bool route_allowed(InterfaceName iface, ComponentKind a, ComponentKind b) {
  return std::any_of(kRules.begin(), kRules.end(), [&](const Rule& r) {
    return r.iface == iface && ((r.down == a && r.up == b) || (r.down == b && r.up == a));
  });
}

Direction direction_of(InterfaceName iface, const ComponentId& src, const ComponentId& dst) {
  if (src.kind == dst.kind) return src.index < dst.index ? Direction::Up : Direction::Down;
  for (const auto& r : kRules) {
    if (r.iface != iface) continue;
    if (r.down == src.kind && r.up == dst.kind) return Direction::Up;
    if (r.up == src.kind && r.down == dst.kind) return Direction::Down;
  }
  return Direction::Up;
}

// ---------------------------------------------------------------------------
// Topology

bool Topology::contains(const ComponentId& id) const {
  return std::binary_search(components_.begin(), components_.end(), id);
}

std::vector<ComponentId> Topology::of_kind(ComponentKind kind) const {
  std::vector<ComponentId> out;
  for (const auto& c : components_)
    if (c.kind == kind) out.push_back(c);
  return out;
}

std::optional<InterfaceName> Topology::link_between(const ComponentId& a, const ComponentId& b) const {
  const auto it = adjacency_.find(a);
  if (it == adjacency_.end()) return std::nullopt;
  for (const auto& [peer, iface] : it->second)
    if (peer == b) return iface;
  return std::nullopt;
}

std::vector<ComponentId> Topology::neighbors(const ComponentId& id) const {
  std::vector<ComponentId> out;
  const auto it = adjacency_.find(id);
  if (it == adjacency_.end()) return out;
  for (const auto& entry : it->second) out.push_back(entry.first);
  return out;
}

bool Topology::uses_interface(InterfaceName iface) const {
  return std::any_of(links_.begin(), links_.end(), [&](const Link& l) { return l.iface == iface; });
}

const InterfaceSpec& Topology::interface_spec(InterfaceName iface) const {
  const auto it = interfaces_.find(iface);
  if (it == interfaces_.end())
    throw Error(Errc::UnknownInterface, std::string(to_string(iface)) + " has no spec");
  return it->second;
}

std::vector<ComponentId> Topology::route(const ComponentId& src, const ComponentId& dst) const {
  if (!contains(src) || !contains(dst))
    throw Error(Errc::UndeclaredRoute, "no component " + (contains(src) ? dst.str() : src.str()));
  if (src == dst) return {src};
  std::map<ComponentId, ComponentId> parent;
  std::deque<ComponentId> frontier{src};
  parent.emplace(src, src);
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop_front();
    if (cur == dst) break;
    for (const auto& next : neighbors(cur)) {
      if (parent.count(next)) continue;
      parent.emplace(next, cur);
      frontier.push_back(next);
    }
  }
  if (!parent.count(dst))
    throw Error(Errc::UndeclaredRoute, "no route from " + src.str() + " to " + dst.str());
  std::vector<ComponentId> path{dst};
  while (path.back() != src) path.push_back(parent.at(path.back()));
  std::reverse(path.begin(), path.end());
  return path;
}

std::optional<ComponentId> Topology::host_ric(const ComponentId& id) const {
  const auto it = hosted_in_.find(id);
  if (it == hosted_in_.end()) return std::nullopt;
  return it->second;
}

void Topology::add_link(const ComponentId& a, const ComponentId& b, InterfaceName iface) {
  if (link_between(a, b)) return;
  links_.push_back({a, b, iface});
  auto insert_sorted = [](auto& list, const ComponentId& peer, InterfaceName name) {
    auto pos = std::lower_bound(list.begin(), list.end(), peer,
                                [](const auto& entry, const ComponentId& id) { return entry.first < id; });
    list.insert(pos, {peer, name});
  };
  insert_sorted(adjacency_[a], b, iface);
  insert_sorted(adjacency_[b], a, iface);
}

Topology build_topology(const TopologyConfig& config) {
  Topology topo;
  std::set<ComponentId> declared;
  for (std::size_t i = 0; i < config.components.size(); ++i) {
    const auto& decl = config.components[i];
    if (decl.count < 0 || decl.index < 0)
      throw Error(Errc::ConfigError, "negative count or index",
                  "topology.components[" + std::to_string(i) + "]");
    for (int k = 0; k < decl.count; ++k) {
      const ComponentId id{decl.kind, decl.index + k};
      if (!declared.insert(id).second)
        throw Error(Errc::DuplicateComponent, id.str() + " declared twice",
                    "topology.components[" + std::to_string(i) + "]");
    }
  }

  auto count_kind = [&](ComponentKind kind) {
    return std::count_if(declared.begin(), declared.end(), [&](const ComponentId& c) { return c.kind == kind; });
  };
  if (count_kind(K::NonRtRic) != 1)
    throw Error(Errc::ConfigError, "exactly one NonRtRic is required", "topology.components");
  const ComponentId ric = *std::find_if(declared.begin(), declared.end(),
                                        [](const ComponentId& c) { return c.kind == K::NonRtRic; });

  if (count_kind(K::AimlFunction) == 0) declared.insert({K::AimlFunction, 0});
  if ((count_kind(K::NSSMF) > 0 || count_kind(K::MdaSystem3GPP) > 0) && count_kind(K::NssmfTermination) == 0)
    declared.insert({K::NssmfTermination, 0});
  if ((count_kind(K::NFVO) > 0 || count_kind(K::MdaSystemNFV) > 0) && count_kind(K::NfvoTermination) == 0)
    declared.insert({K::NfvoTermination, 0});
  if (count_kind(K::ExternalProvider) > 0 && count_kind(K::ExternalAimlTermination) == 0)
    declared.insert({K::ExternalAimlTermination, 0});

  topo.components_.assign(declared.begin(), declared.end());
  for (const auto& [name, _] : kInterfaceNames) topo.interfaces_[name] = default_interface_spec(name);
  for (const auto& [name, spec] : config.interfaces) {
    if (spec.latency < 0 || spec.overhead_bytes < 0)
      throw Error(Errc::ConfigError, "latency and overhead must be >= 0",
                  "topology.interfaces." + std::string(to_string(name)));
    topo.interfaces_[name] = spec;
  }

  const auto aimls = topo.of_kind(K::AimlFunction);
  for (const auto& c : topo.components_) {
    switch (c.kind) {
      case K::AimlFunction:
      case K::NssmfTermination:
      case K::NfvoTermination:
      case K::ExternalAimlTermination:
        topo.hosted_in_[c] = ric;
        break;
      default:
        break;
    }
  }

  auto first_of = [&](ComponentKind kind) -> std::optional<ComponentId> {
    const auto v = topo.of_kind(kind);
    if (v.empty()) return std::nullopt;
    return v.front();
  };
  const auto nssmf_term = first_of(K::NssmfTermination);
  const auto nfvo_term = first_of(K::NfvoTermination);
  const auto ext_term = first_of(K::ExternalAimlTermination);
  const auto nssmf = first_of(K::NSSMF);
  const auto nfvo = first_of(K::NFVO);

  for (const auto& c : topo.components_) {
    switch (c.kind) {
      case K::NSSMF:
      case K::MdaSystem3GPP:
        topo.add_link(c, *nssmf_term, I::NSSMF_NonRTRIC);
        break;
      case K::NFVO:
      case K::MdaSystemNFV:
        topo.add_link(c, *nfvo_term, I::NFVO_NonRTRIC);
        break;
      case K::NssmfTermination:
      case K::NfvoTermination:
      case K::ExternalAimlTermination:
        for (const auto& a : aimls) topo.add_link(c, a, I::NonRtRicInternal);
        break;
      case K::RApp:
        for (const auto& a : aimls) topo.add_link(c, a, I::R1);
        break;
      case K::ExternalProvider:
        topo.add_link(c, *ext_term, I::ExternalAiml);
        break;
      case K::NFMF:
        if (!nssmf) throw Error(Errc::ConfigError, c.str() + " requires an NSSMF", "topology.components");
        topo.add_link(c, *nssmf, I::SmoInternal);
        break;
      default:
        if (is_nfv_block(c.kind)) {
          if (!nfvo) throw Error(Errc::ConfigError, c.str() + " requires an NFVO", "topology.components");
          topo.add_link(c, *nfvo, I::SmoInternal);
        }
        break;
    }
  }
  for (std::size_t i = 0; i < aimls.size(); ++i)
    for (std::size_t j = i + 1; j < aimls.size(); ++j) topo.add_link(aimls[i], aimls[j], I::NonRtRicInternal);
  for (const auto& mda : topo.of_kind(K::MdaSystem3GPP))
    for (const auto& n : topo.of_kind(K::NSSMF)) topo.add_link(n, mda, I::SmoInternal);
  for (const auto& mda : topo.of_kind(K::MdaSystemNFV))
    for (const auto& n : topo.of_kind(K::NFVO)) topo.add_link(n, mda, I::SmoInternal);

  for (std::size_t i = 0; i < config.links.size(); ++i) {
    const auto& l = config.links[i];
    const auto path = "topology.links[" + std::to_string(i) + "]";
    if (!topo.contains(l.a) || !topo.contains(l.b))
      throw Error(Errc::ConfigError, "link endpoint not declared", path);
    if (!route_allowed(l.iface, l.a.kind, l.b.kind))
      throw Error(Errc::UndeclaredRoute,
                  std::string(to_string(l.iface)) + " cannot connect " + l.a.str() + " and " + l.b.str(), path);
    topo.add_link(l.a, l.b, l.iface);
  }
  return topo;
}

// ---------------------------------------------------------------------------
// Event loop

std::string_view to_string(EventType type) {
  switch (type) {
    case EventType::Send: return "send";
    case EventType::Deliver: return "deliver";
    case EventType::Drop: return "drop";
    case EventType::Transition: return "transition";
    case EventType::Fault: return "fault";
    case EventType::Detection: return "detection";
    case EventType::Mitigation: return "mitigation";
    case EventType::Timeout: return "timeout";
    case EventType::Rejection: return "rejection";
    case EventType::Info: return "info";
  }
  return "?";
}

std::string to_jsonl(const LogEntry& e) {
  auto quoted_or_null = [](const std::optional<std::string>& s) {
    return s ? nlohmann::json(*s).dump() : std::string("null");
  };
  std::string out = "{\"tick\":" + std::to_string(e.tick);
  out += ",\"seq\":" + std::to_string(e.seq);
  out += ",\"event-type\":\"" + std::string(to_string(e.type)) + "\"";
  out += ",\"src\":" + quoted_or_null(e.src ? std::optional(e.src->str()) : std::nullopt);
  out += ",\"dst\":" + quoted_or_null(e.dst ? std::optional(e.dst->str()) : std::nullopt);
  out += ",\"interface\":" +
         quoted_or_null(e.iface ? std::optional(std::string(to_string(*e.iface))) : std::nullopt);
  out += ",\"payload-kind\":" +
         quoted_or_null(e.payload ? std::optional(std::string(to_string(*e.payload))) : std::nullopt);
  out += ",\"bytes\":" + std::to_string(e.bytes);
  out += ",\"msg-id\":" + (e.msg_id ? std::to_string(*e.msg_id) : std::string("null"));
  out += ",\"detail\":" + nlohmann::json(e.detail).dump();
  out += "}";
  return out;
}

bool Simulator::Later::operator()(const Item& a, const Item& b) const {
  if (a.tick != b.tick) return a.tick > b.tick;
  if (a.phase != b.phase) return a.phase > b.phase;
  return a.seq > b.seq;
}

Simulator::Simulator(Topology topology) : topology_(std::move(topology)) {}

void Simulator::push(Item item) { queue_.push(std::move(item)); }

void Simulator::append(LogEntry entry) {
  entry.seq = next_seq_++;
  log_.push_back(std::move(entry));
}

Simulator::SendOutcome Simulator::send(const ComponentId& src, const ComponentId& dst, PayloadKind payload,
                                       std::int64_t payload_bytes, std::any body, DeliveryHandler on_deliver,
                                       std::string detail) {
  const auto iface = topology_.link_between(src, dst);
  if (!iface || !route_allowed(*iface, src.kind, dst.kind))
    throw Error(Errc::UndeclaredRoute, "no link between " + src.str() + " and " + dst.str());
  if (payload_bytes < 0) throw Error(Errc::ConfigError, "negative payload size");
  const auto& spec = topology_.interface_spec(*iface);

  InterfaceMessage msg;
  msg.msg_id = next_msg_id_++;
  msg.src = src;
  msg.dst = dst;
  msg.iface = *iface;
  msg.payload = payload;
  msg.payload_bytes = payload_bytes;
  msg.send_tick = now_;
  msg.deliver_tick = now_ + spec.latency;
  msg.body = std::move(body);
  msg.detail = std::move(detail);

  LogEntry entry;
  entry.tick = now_;
  entry.src = src;
  entry.dst = dst;
  entry.iface = *iface;
  entry.payload = payload;
  entry.bytes = payload_bytes + spec.overhead_bytes;
  entry.msg_id = msg.msg_id;
  entry.detail = msg.detail;

  const bool src_down = failed(src);
  const bool dst_down = failed(dst) && payload != PayloadKind::Heartbeat;
  if (src_down || dst_down) {
    entry.type = EventType::Drop;
    entry.detail = src_down ? "SourceDown" : "ComponentDown";
    append(std::move(entry));
    return {false, msg.msg_id};
  }
  entry.type = EventType::Send;
  append(std::move(entry));

  Item item;
  item.tick = msg.deliver_tick;
  item.phase = static_cast<int>(Phase::Normal);
  item.seq = next_item_seq_++;
  item.is_message = true;
  const auto id = msg.msg_id;
  item.message = std::move(msg);
  item.handler = std::move(on_deliver);
  push(std::move(item));
  return {true, id};
}

void Simulator::forward(std::vector<ComponentId> path, std::size_t hop, PayloadKind payload,
                        std::int64_t payload_bytes, std::any body, DeliveryHandler on_arrival, std::string detail) {
  const auto src = path[hop];
  const auto dst = path[hop + 1];
  const bool last = hop + 2 == path.size();
  if (last) {
    send(src, dst, payload, payload_bytes, std::move(body), std::move(on_arrival), std::move(detail));
    return;
  }
  auto next = [this, path, hop, payload, payload_bytes, on_arrival, detail](const InterfaceMessage& m) {
    forward(path, hop + 1, payload, payload_bytes, m.body, on_arrival, detail);
  };
  send(src, dst, payload, payload_bytes, std::move(body), std::move(next), std::move(detail));
}

void Simulator::transfer(const ComponentId& src, const ComponentId& dst, PayloadKind payload,
                         std::int64_t payload_bytes, std::any body, DeliveryHandler on_arrival, std::string detail) {
  auto path = topology_.route(src, dst);
  if (path.size() == 1) {
    // Local hand-off: no interface is crossed, nothing is metered.
    InterfaceMessage local;
    local.src = src;
    local.dst = dst;
    local.payload = payload;
    local.payload_bytes = payload_bytes;
    local.send_tick = local.deliver_tick = now_;
    local.body = std::move(body);
    local.detail = std::move(detail);
    schedule(now_, [on_arrival, local] {
      if (on_arrival) on_arrival(local);
    });
    return;
  }
  forward(std::move(path), 0, payload, payload_bytes, std::move(body), std::move(on_arrival), std::move(detail));
}

void Simulator::schedule(Tick at, std::function<void()> action, Phase phase) {
  if (at < now_) at = now_;
  Item item;
  item.tick = at;
  item.phase = static_cast<int>(phase);
  item.seq = next_item_seq_++;
  item.is_message = false;
  item.action = std::move(action);
  push(std::move(item));
}

void Simulator::process(Item& item) {
  now_ = item.tick;
  if (!item.is_message) {
    if (item.action) item.action();
    return;
  }
  const auto& msg = item.message;
  const auto& spec = topology_.interface_spec(msg.iface);
  LogEntry entry;
  entry.tick = now_;
  entry.src = msg.src;
  entry.dst = msg.dst;
  entry.iface = msg.iface;
  entry.payload = msg.payload;
  entry.bytes = msg.payload_bytes + spec.overhead_bytes;
  entry.msg_id = msg.msg_id;
  entry.detail = msg.detail;
  if (failed(msg.dst) && msg.payload != PayloadKind::Heartbeat) {
    entry.type = EventType::Drop;
    entry.detail = "ComponentDown";
    append(std::move(entry));
    return;
  }
  const MeterReading reading{entry.bytes, 1};
  auto& meter = meters_[msg.iface];
  (direction_of(msg.iface, msg.src, msg.dst) == Direction::Up ? meter.up : meter.down) += reading;
  payload_meters_[{msg.iface, msg.payload}] += reading;
  entry.type = EventType::Deliver;
  append(std::move(entry));
  if (item.handler) item.handler(msg);
}

std::vector<LogEntry> Simulator::run_until(Tick t) {
  if (t < now_) throw Error(Errc::ConfigError, "run_until target lies in the past");
  const auto first = log_.size();
  while (!queue_.empty() && queue_.top().tick <= t) {
    Item item = queue_.top();
    queue_.pop();
    process(item);
  }
  now_ = t;
  return {log_.begin() + static_cast<std::ptrdiff_t>(first), log_.end()};
}

void Simulator::run_until_idle(Tick limit) {
  while (!queue_.empty() && queue_.top().tick <= limit) {
    Item item = queue_.top();
    queue_.pop();
    process(item);
  }
}

InterfaceMeter Simulator::meter(InterfaceName iface) const {
  if (!topology_.uses_interface(iface))
    throw Error(Errc::UnknownInterface, std::string(to_string(iface)) + " is not wired in this topology");
  const auto it = meters_.find(iface);
  return it == meters_.end() ? InterfaceMeter{} : it->second;
}

MeterReading Simulator::meter(InterfaceName iface, PayloadKind payload) const {
  if (!topology_.uses_interface(iface))
    throw Error(Errc::UnknownInterface, std::string(to_string(iface)) + " is not wired in this topology");
  const auto it = payload_meters_.find({iface, payload});
  return it == payload_meters_.end() ? MeterReading{} : it->second;
}

void Simulator::set_failed(const ComponentId& id, bool is_failed) { failed_[id] = is_failed; }

bool Simulator::failed(const ComponentId& id) const {
  const auto it = failed_.find(id);
  return it != failed_.end() && it->second;
}

void Simulator::record(EventType type, std::optional<ComponentId> src, std::optional<ComponentId> dst,
                       std::string detail) {
  LogEntry entry;
  entry.tick = now_;
  entry.type = type;
  entry.src = std::move(src);
  entry.dst = std::move(dst);
  entry.detail = std::move(detail);
  append(std::move(entry));
}

std::string Simulator::log_jsonl() const {
  std::string out;
  for (const auto& e : log_) {
    out += to_jsonl(e);
    out += '\n';
  }
  return out;
}

}  // namespace smo
