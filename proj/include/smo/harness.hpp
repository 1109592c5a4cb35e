#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smo/datagen.hpp"
#include "smo/pipeline.hpp"
#include "smo/topology.hpp"

namespace smo {

// ---------------------------------------------------------------------------
// Poisoning

struct PoisonSpec {
  enum class Attack { TargetOffset, TargetFlip, FeatureScale };
  double fraction = 0.0;
  Attack attack = Attack::TargetOffset;
  double delta = 10.0;  // target offset
  double gamma = 10.0;  // feature scale
  std::uint64_t seed = 0;
};

PoisonSpec::Attack parse_attack(std::string_view text);

/// Alters exactly floor(n * fraction) seeded-selected records and sets their
/// hidden flag. Offset adds delta to the target, flip maps y to 1 - y,
/// feature-scale multiplies every present numeric feature by gamma.
/// Returns the number of records altered.
std::size_t poison_inject(std::vector<ManagementRecord>& records, const PoisonSpec& spec, std::uint64_t batch = 0);

// ---------------------------------------------------------------------------
// Validation filter

struct FilterSpec {
  double k = 3.0;
  double mad_floor = 1e-9;
};

/// reject[i] iff |t_i - median| / max(MAD, floor) > k.
std::vector<bool> mad_reject(const std::vector<double>& targets, const FilterSpec& spec);

struct FilterResult {
  Table kept;
  std::vector<Row> rejected;
};

FilterResult validation_filter(Table table, const FilterSpec& spec);

struct RecordFilterResult {
  std::vector<ManagementRecord> kept;
  std::vector<ManagementRecord> rejected;
};

/// Same rule on source records; the hidden flag is carried along, never read.
RecordFilterResult validation_filter(std::vector<ManagementRecord> records, const FilterSpec& spec);

struct DetectionScore {
  std::optional<double> precision;
  std::optional<double> recall;
  std::size_t true_positives = 0;
  std::size_t rejected = 0;
  std::size_t poisoned = 0;
};

/// Reporting only: compares rejected ids against the ground-truth poisoned ids.
DetectionScore detection_score(const std::set<std::uint64_t>& rejected, const std::set<std::uint64_t>& poisoned);

// ---------------------------------------------------------------------------
// Privacy

struct PrivacySpec {
  bool enabled = false;
  std::string key;
  double inflation = 1.0;
};

/// "ps-" + 16 hex digits of a keyed BLAKE2b hash. Throws Error(MissingKey).
std::string pseudonym(const std::string& value, const std::string& key);

/// The schema as seen downstream: sensitive vocab entries pseudonymized.
std::vector<FieldSpec> pseudonymized_schema(const std::vector<FieldSpec>& schema, const PrivacySpec& spec);

/// Replaces sensitive categorical values in place and returns the metered
/// size llround(bytes * inflation). Throws Error(MissingKey).
std::int64_t privacy_transform(std::vector<ManagementRecord>& records, const std::vector<FieldSpec>& schema,
                               const PrivacySpec& spec, std::int64_t bytes);

// ---------------------------------------------------------------------------
// Failover

struct FailurePlan {
  ComponentId target;
  Tick fail_tick = 0;
  Tick heartbeat_interval = 2;
  int missed_heartbeats = 2;
  std::vector<ComponentId> replicas;
  Tick checkpoint_interval = 5;
  std::int64_t heartbeat_bytes = 0;
};

void validate_failure_plan(const FailurePlan& plan, const std::string& path = "harness.failover");

struct FailoverOutcome {
  bool failed = false;
  std::optional<Tick> detected_at;
  std::optional<ComponentId> promoted;
  std::optional<nlohmann::json> restored_checkpoint;
  /// Checkpoint contents logged at the tick they were taken.
  std::vector<std::pair<Tick, nlohmann::json>> checkpoints;
  bool single_point_failure = false;
  /// Declaration tick - fail tick.
  std::optional<Tick> downtime;
};

/// Installs heartbeats, checkpoints, the fault and the missed-heartbeat
/// detector. The target sends heartbeats at h, 2h, ... and checkpoints at
/// multiples of the checkpoint interval while alive; it fails at the end of
/// fail_tick. The first replica declares failure when m * h ticks pass after
/// its last heartbeat receipt (tick 0 counts as a receipt), then `on_promote`
/// receives the replica and the latest checkpoint it holds.
/// Without replicas the fault is logged as SinglePointFailure and `on_spof` runs.
class FailoverController {
 public:
  using Snapshot = std::function<nlohmann::json()>;
  using Promote = std::function<void(const ComponentId& replica, const std::optional<nlohmann::json>& checkpoint)>;

  FailoverController(Simulator& sim, FailurePlan plan, Snapshot snapshot, Promote on_promote,
                     std::function<void()> on_spof = {});

  const FailoverOutcome& outcome() const { return *state_; }
  const FailurePlan& plan() const { return plan_; }

 private:
  struct Shared : FailoverOutcome {
    Tick last_seen = 0;
    std::optional<nlohmann::json> held;
  };

  void heartbeat(Tick at);
  void checkpoint(Tick at);
  void arm_check(Tick receipt);

  Simulator& sim_;
  FailurePlan plan_;
  Snapshot snapshot_;
  Promote on_promote_;
  std::function<void()> on_spof_;
  std::shared_ptr<Shared> state_;
};

// ---------------------------------------------------------------------------
// Scheduler

enum class JobClass { NfWorkload, Retraining };

struct JobSpec {
  std::string name;
  JobClass job_class = JobClass::NfWorkload;
  /// Higher runs first.
  int priority = 0;
  std::int64_t demand = 1;
  std::int64_t work = 0;
  Tick arrival = 1;
};

struct SchedulerSpec {
  std::int64_t budget = 1;
  std::vector<JobSpec> jobs;
};

void validate_scheduler(const SchedulerSpec& spec, const std::string& path = "harness.scheduler");

struct JobOutcome {
  std::string name;
  JobClass job_class = JobClass::NfWorkload;
  std::optional<Tick> completion;
  Tick ideal = 0;
  std::optional<Tick> delay;
  std::int64_t allocated = 0;
};

struct ScheduleResult {
  /// allocations[t-1][j] for tick t = 1..horizon.
  std::vector<std::vector<std::int64_t>> allocations;
  std::vector<JobOutcome> jobs;
  std::int64_t peak_demand = 0;
  std::int64_t retraining_budget_ticks = 0;
  /// Nearest-rank percentiles of NfWorkload delays.
  std::optional<Tick> nf_delay_p50;
  std::optional<Tick> nf_delay_p95;
  std::optional<Tick> nf_delay_max;
};

/// Strict priority, round-robin by unit within a priority level, rotating the
/// starting job every tick. Ideal completion = arrival - 1 + ceil(work / demand).
/// Throws Error(ZeroCapacity) for a zero budget.
ScheduleResult schedule(const SchedulerSpec& spec, Tick horizon);

nlohmann::json to_json(const ScheduleResult& r);

// ---------------------------------------------------------------------------
// Signaling

struct SignalingRow {
  InterfaceName iface = InterfaceName::SmoInternal;
  MeterReading up;
  MeterReading down;
  std::map<PayloadKind, MeterReading> by_payload;

  MeterReading total() const {
    MeterReading t = up;
    t += down;
    return t;
  }
  bool operator==(const SignalingRow&) const = default;
};

struct SignalingReport {
  std::vector<SignalingRow> rows;
  std::int64_t raw_bytes = 0;
  std::int64_t model_bytes = 0;
  std::int64_t termination_bytes = 0;
  std::int64_t termination_raw_bytes = 0;
  /// raw_bytes / model_bytes; absent without model traffic.
  std::optional<double> raw_to_model_ratio;

  bool operator==(const SignalingReport&) const = default;
};

/// Rebuilt from the deliver events of the log; covers every interface the topology wires.
SignalingReport signaling_report(const std::vector<LogEntry>& log, const Topology& topology);

/// The same table read from the simulator meters.
SignalingReport signaling_from_meters(const Simulator& sim);

nlohmann::json to_json(const SignalingReport& r);

}  // namespace smo
