#include "smo/harness.hpp"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "smo/error.hpp"
#include "smo/rng.hpp"

namespace smo {

PoisonSpec::Attack parse_attack(std::string_view text) {
  if (text == "target-offset") return PoisonSpec::Attack::TargetOffset;
  if (text == "target-flip") return PoisonSpec::Attack::TargetFlip;
  if (text == "feature-scale") return PoisonSpec::Attack::FeatureScale;
  throw Error(Errc::ConfigError, "unknown attack '" + std::string(text) + "'", "harness.poison.attack");
}

std::size_t poison_inject(std::vector<ManagementRecord>& records, const PoisonSpec& spec, std::uint64_t batch) {
  const auto k = floor_count(records.size(), spec.fraction);
  if (k == 0) return 0;
  Rng rng(derive_seed(spec.seed, "poison", batch));
  for (auto i : rng.sample(records.size(), k)) {
    auto& r = records[i];
    switch (spec.attack) {
      case PoisonSpec::Attack::TargetOffset:
        r.target += spec.delta;
        break;
      case PoisonSpec::Attack::TargetFlip:
        r.target = 1.0 - r.target;
        break;
      case PoisonSpec::Attack::FeatureScale:
        for (auto& [_, v] : r.features)
          if (auto* d = std::get_if<double>(&v)) *d *= spec.gamma;
        break;
    }
    r.poisoned = true;
  }
  return k;
}

// ---------------------------------------------------------------------------

namespace {

double median_in_place(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<bool> mad_reject(const std::vector<double>& targets, const FilterSpec& spec) {
  std::vector<bool> reject(targets.size(), false);
  if (targets.empty()) return reject;
  auto sorted = targets;
  const double med = median_in_place(sorted);
  std::vector<double> dev;
  dev.reserve(targets.size());
  for (double t : targets) dev.push_back(std::abs(t - med));
  const double mad = std::max(median_in_place(dev), spec.mad_floor);
  for (std::size_t i = 0; i < targets.size(); ++i) reject[i] = std::abs(targets[i] - med) / mad > spec.k;
  return reject;
}

FilterResult validation_filter(Table table, const FilterSpec& spec) {
  std::vector<double> targets;
  for (const auto& r : table.rows) targets.push_back(r.target);
  const auto reject = mad_reject(targets, spec);
  FilterResult out;
  std::vector<Row> kept;
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    (reject[i] ? out.rejected : kept).push_back(std::move(table.rows[i]));
  table.rows = std::move(kept);
  out.kept = std::move(table);
  return out;
}

RecordFilterResult validation_filter(std::vector<ManagementRecord> records, const FilterSpec& spec) {
  std::vector<double> targets;
  for (const auto& r : records) targets.push_back(r.target);
  const auto reject = mad_reject(targets, spec);
  RecordFilterResult out;
  for (std::size_t i = 0; i < records.size(); ++i) (reject[i] ? out.rejected : out.kept).push_back(std::move(records[i]));
  return out;
}

DetectionScore detection_score(const std::set<std::uint64_t>& rejected, const std::set<std::uint64_t>& poisoned) {
  DetectionScore s;
  s.rejected = rejected.size();
  s.poisoned = poisoned.size();
  for (auto id : rejected) s.true_positives += poisoned.count(id);
  if (s.rejected > 0) s.precision = static_cast<double>(s.true_positives) / static_cast<double>(s.rejected);
  if (s.poisoned > 0) s.recall = static_cast<double>(s.true_positives) / static_cast<double>(s.poisoned);
  return s;
}

// ---------------------------------------------------------------------------

std::string pseudonym(const std::string& value, const std::string& key) {
  if (key.empty()) throw Error(Errc::MissingKey, "pseudonymization key is not configured", "harness.privacy.key");
  static const bool ready = sodium_init() >= 0;
  if (!ready) throw Error(Errc::MissingKey, "libsodium failed to initialise");
  // Keys of any length are first condensed to a fixed-size hash key.
  unsigned char k[crypto_generichash_KEYBYTES];
  crypto_generichash(k, sizeof k, reinterpret_cast<const unsigned char*>(key.data()), key.size(), nullptr, 0);
  unsigned char out[8];
  crypto_generichash(out, sizeof out, reinterpret_cast<const unsigned char*>(value.data()), value.size(), k, sizeof k);
  char hex[2 * sizeof out + 1];
  sodium_bin2hex(hex, sizeof hex, out, sizeof out);
  return "ps-" + std::string(hex);
}

std::vector<FieldSpec> pseudonymized_schema(const std::vector<FieldSpec>& schema, const PrivacySpec& spec) {
  if (!spec.enabled) return schema;
  auto out = schema;
  for (auto& f : out)
    if (f.sensitive && f.type == FieldType::Categorical)
      for (auto& word : f.vocab) word = pseudonym(word, spec.key);
  return out;
}

std::int64_t privacy_transform(std::vector<ManagementRecord>& records, const std::vector<FieldSpec>& schema,
                               const PrivacySpec& spec, std::int64_t bytes) {
  if (!spec.enabled) return bytes;
  if (spec.key.empty()) throw Error(Errc::MissingKey, "pseudonymization key is not configured", "harness.privacy.key");
  for (auto& r : records)
    for (const auto& f : schema) {
      if (!f.sensitive || f.type != FieldType::Categorical) continue;
      auto it = r.features.find(f.name);
      if (it == r.features.end()) continue;
      if (auto* s = std::get_if<std::string>(&it->second)) *s = pseudonym(*s, spec.key);
    }
  return static_cast<std::int64_t>(std::llround(static_cast<double>(bytes) * spec.inflation));
}

// ---------------------------------------------------------------------------

void validate_failure_plan(const FailurePlan& plan, const std::string& path) {
  if (plan.target.kind != ComponentKind::AimlFunction)
    throw Error(Errc::ConfigError, "failover target must be an AimlFunction", path + ".target");
  if (plan.heartbeat_interval < 1) throw Error(Errc::ConfigError, "heartbeat interval must be >= 1", path + ".heartbeat-interval");
  if (plan.missed_heartbeats < 1) throw Error(Errc::ConfigError, "missed heartbeats must be >= 1", path + ".missed-heartbeats");
  if (plan.checkpoint_interval < 1)
    throw Error(Errc::ConfigError, "checkpoint interval must be >= 1", path + ".checkpoint-interval");
  if (plan.fail_tick < 0) throw Error(Errc::ConfigError, "fail tick must be >= 0", path + ".fail-tick");
  for (const auto& r : plan.replicas)
    if (r.kind != ComponentKind::AimlFunction || r == plan.target)
      throw Error(Errc::ConfigError, "replicas must be other AimlFunction instances", path + ".replicas");
}

FailoverController::FailoverController(Simulator& sim, FailurePlan plan, Snapshot snapshot, Promote on_promote,
                                       std::function<void()> on_spof)
    : sim_(sim),
      plan_(std::move(plan)),
      snapshot_(std::move(snapshot)),
      on_promote_(std::move(on_promote)),
      on_spof_(std::move(on_spof)),
      state_(std::make_shared<Shared>()) {
  validate_failure_plan(plan_);
  const Tick start = sim_.now();
  state_->last_seen = start;
  if (!plan_.replicas.empty()) {
    heartbeat(start + plan_.heartbeat_interval);
    checkpoint(start + plan_.checkpoint_interval);
    arm_check(start);
  }
  // Faults land after all regular work of their tick.
  sim_.schedule(
      plan_.fail_tick,
      [this] {
        sim_.set_failed(plan_.target, true);
        state_->failed = true;
        if (plan_.replicas.empty()) {
          state_->single_point_failure = true;
          sim_.record(EventType::Fault, plan_.target, std::nullopt, "SinglePointFailure");
          if (on_spof_) on_spof_();
        } else {
          sim_.record(EventType::Fault, plan_.target, std::nullopt, "ComponentFailure");
        }
      },
      Phase::EndOfTick);
}

void FailoverController::heartbeat(Tick at) {
  sim_.schedule(at, [this, at] {
    if (sim_.failed(plan_.target) || state_->promoted) return;
    for (std::size_t i = 0; i < plan_.replicas.size(); ++i) {
      const bool primary_replica = i == 0;
      sim_.send(plan_.target, plan_.replicas[i], PayloadKind::Heartbeat, plan_.heartbeat_bytes, {},
                [this, primary_replica](const InterfaceMessage&) {
                  if (!primary_replica) return;
                  state_->last_seen = sim_.now();
                  arm_check(sim_.now());
                });
    }
    heartbeat(at + plan_.heartbeat_interval);
  });
}

void FailoverController::checkpoint(Tick at) {
  sim_.schedule(at, [this, at] {
    if (sim_.failed(plan_.target) || state_->promoted) return;
    auto snap = snapshot_();
    state_->checkpoints.emplace_back(sim_.now(), snap);
    const auto bytes = static_cast<std::int64_t>(snap.dump().size());
    for (const auto& r : plan_.replicas)
      sim_.transfer(plan_.target, r, PayloadKind::Checkpoint, bytes, snap,
                    [this, r](const InterfaceMessage& m) {
                      if (r == plan_.replicas.front()) state_->held = std::any_cast<nlohmann::json>(m.body);
                    },
                    "checkpoint");
    checkpoint(at + plan_.checkpoint_interval);
  });
}

void FailoverController::arm_check(Tick receipt) {
  const Tick due = receipt + static_cast<Tick>(plan_.missed_heartbeats) * plan_.heartbeat_interval;
  sim_.schedule(due, [this, receipt] {
    if (state_->promoted || state_->last_seen != receipt) return;
    const auto& replica = plan_.replicas.front();
    state_->detected_at = sim_.now();
    state_->downtime = sim_.now() - plan_.fail_tick;
    state_->promoted = replica;
    state_->restored_checkpoint = state_->held;
    sim_.record(EventType::Detection, replica, plan_.target,
                "missed " + std::to_string(plan_.missed_heartbeats) + " heartbeats");
    if (on_promote_) on_promote_(replica, state_->held);
    sim_.record(EventType::Mitigation, replica, plan_.target,
                state_->held ? "promoted replica restored checkpoint" : "promoted replica without checkpoint");
  });
}

// ---------------------------------------------------------------------------

void validate_scheduler(const SchedulerSpec& spec, const std::string& path) {
  if (spec.budget <= 0) throw Error(Errc::ZeroCapacity, "cpu budget must be >= 1", path + ".budget");
  for (std::size_t j = 0; j < spec.jobs.size(); ++j) {
    const auto& job = spec.jobs[j];
    const auto jp = path + ".jobs[" + std::to_string(j) + "]";
    if (job.demand < 1) throw Error(Errc::ConfigError, "demand must be >= 1", jp + ".demand");
    if (job.work < 0) throw Error(Errc::ConfigError, "work must be >= 0", jp + ".work");
    if (job.arrival < 1) throw Error(Errc::ConfigError, "arrival tick must be >= 1", jp + ".arrival");
  }
}

namespace {

Tick ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::optional<Tick> nearest_rank(std::vector<Tick> v, double p) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

}  // namespace

ScheduleResult schedule(const SchedulerSpec& spec, Tick horizon) {
  validate_scheduler(spec);
  const auto n = spec.jobs.size();
  ScheduleResult out;
  std::vector<std::int64_t> done(n, 0);
  out.jobs.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& job = spec.jobs[j];
    out.jobs[j].name = job.name;
    out.jobs[j].job_class = job.job_class;
    out.jobs[j].ideal = job.arrival - 1 + ceil_div(job.work, job.demand);
    if (job.work == 0) out.jobs[j].completion = job.arrival - 1;
  }
  std::vector<int> levels;
  for (const auto& job : spec.jobs) levels.push_back(job.priority);
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  for (Tick t = 1; t <= horizon; ++t) {
    std::vector<std::int64_t> alloc(n, 0);
    std::int64_t capacity = spec.budget;
    std::int64_t demand_now = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (spec.jobs[j].arrival <= t && !out.jobs[j].completion)
        demand_now += std::min(spec.jobs[j].demand, spec.jobs[j].work - done[j]);
    out.peak_demand = std::max(out.peak_demand, demand_now);

    for (int level : levels) {
      std::vector<std::size_t> group;
      for (std::size_t j = 0; j < n; ++j)
        if (spec.jobs[j].priority == level && spec.jobs[j].arrival <= t && !out.jobs[j].completion) group.push_back(j);
      if (group.empty()) continue;
      std::vector<std::int64_t> want(group.size());
      for (std::size_t g = 0; g < group.size(); ++g) {
        const auto j = group[g];
        want[g] = std::min(spec.jobs[j].demand, spec.jobs[j].work - done[j]);
      }
      // Unit-by-unit round robin starting at a position that rotates per tick.
      std::size_t pos = static_cast<std::size_t>(t - 1) % group.size();
      std::size_t idle_streak = 0;
      while (capacity > 0 && idle_streak < group.size()) {
        if (want[pos] > 0) {
          --want[pos];
          ++alloc[group[pos]];
          --capacity;
          idle_streak = 0;
        } else {
          ++idle_streak;
        }
        pos = (pos + 1) % group.size();
      }
      if (capacity == 0) break;
    }
    for (std::size_t j = 0; j < n; ++j) {
      done[j] += alloc[j];
      out.jobs[j].allocated += alloc[j];
      if (spec.jobs[j].job_class == JobClass::Retraining) out.retraining_budget_ticks += alloc[j];
      if (!out.jobs[j].completion && alloc[j] > 0 && done[j] >= spec.jobs[j].work) out.jobs[j].completion = t;
    }
    out.allocations.push_back(std::move(alloc));
  }
  std::vector<Tick> nf_delays;
  for (auto& j : out.jobs) {
    if (j.completion) j.delay = *j.completion - j.ideal;
    if (j.job_class == JobClass::NfWorkload && j.delay) nf_delays.push_back(*j.delay);
  }
  out.nf_delay_p50 = nearest_rank(nf_delays, 0.50);
  out.nf_delay_p95 = nearest_rank(nf_delays, 0.95);
  out.nf_delay_max = nearest_rank(nf_delays, 1.0);
  return out;
}

namespace {

nlohmann::json opt(const std::optional<Tick>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const ScheduleResult& r) {
  nlohmann::json jobs = nlohmann::json::array();
  for (const auto& j : r.jobs)
    jobs.push_back({{"name", j.name},
                    {"class", j.job_class == JobClass::NfWorkload ? "NfWorkload" : "Retraining"},
                    {"completion", opt(j.completion)},
                    {"ideal", j.ideal},
                    {"delay", opt(j.delay)},
                    {"allocated", j.allocated}});
  return {{"jobs", jobs},
          {"peak-demand", r.peak_demand},
          {"retraining-budget-ticks", r.retraining_budget_ticks},
          {"nf-delay-p50", opt(r.nf_delay_p50)},
          {"nf-delay-p95", opt(r.nf_delay_p95)},
          {"nf-delay-max", opt(r.nf_delay_max)}};
}

// ---------------------------------------------------------------------------

namespace {

void finish(SignalingReport& rep) {
  for (const auto& row : rep.rows) {
    const auto raw = row.by_payload.count(PayloadKind::RawData) ? row.by_payload.at(PayloadKind::RawData).bytes : 0;
    const auto model =
        row.by_payload.count(PayloadKind::ModelArtifact) ? row.by_payload.at(PayloadKind::ModelArtifact).bytes : 0;
    rep.raw_bytes += raw;
    rep.model_bytes += model;
    if (is_termination_interface(row.iface)) {
      rep.termination_bytes += row.total().bytes;
      rep.termination_raw_bytes += raw;
    }
  }
  if (rep.model_bytes > 0)
    rep.raw_to_model_ratio = static_cast<double>(rep.raw_bytes) / static_cast<double>(rep.model_bytes);
}

constexpr PayloadKind kAllPayloads[] = {PayloadKind::RawData,  PayloadKind::CleansedData, PayloadKind::ModelArtifact,
                                        PayloadKind::Prediction, PayloadKind::Report,     PayloadKind::Control,
                                        PayloadKind::Heartbeat,  PayloadKind::Checkpoint};

}  // namespace

SignalingReport signaling_report(const std::vector<LogEntry>& log, const Topology& topology) {
  SignalingReport rep;
  std::map<InterfaceName, SignalingRow> rows;
  for (auto iface : kAllInterfaces)
    if (topology.uses_interface(iface)) rows[iface].iface = iface;
  for (const auto& e : log) {
    if (e.type != EventType::Deliver || !e.iface) continue;
    auto& row = rows.at(*e.iface);
    MeterReading m{e.bytes, 1};
    (direction_of(*e.iface, *e.src, *e.dst) == Direction::Up ? row.up : row.down) += m;
    row.by_payload[*e.payload] += m;
  }
  for (auto& [_, row] : rows) rep.rows.push_back(std::move(row));
  finish(rep);
  return rep;
}

SignalingReport signaling_from_meters(const Simulator& sim) {
  SignalingReport rep;
  for (auto iface : kAllInterfaces) {
    if (!sim.topology().uses_interface(iface)) continue;
    SignalingRow row;
    row.iface = iface;
    const auto m = sim.meter(iface);
    row.up = m.up;
    row.down = m.down;
    for (auto p : kAllPayloads) {
      const auto r = sim.meter(iface, p);
      if (r.messages > 0) row.by_payload[p] = r;
    }
    rep.rows.push_back(std::move(row));
  }
  finish(rep);
  return rep;
}

nlohmann::json to_json(const SignalingReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json payloads = nlohmann::json::object();
    for (const auto& [p, m] : row.by_payload)
      payloads[std::string(to_string(p))] = {{"bytes", m.bytes}, {"messages", m.messages}};
    rows.push_back({{"interface", to_string(row.iface)},
                    {"up-bytes", row.up.bytes},
                    {"up-messages", row.up.messages},
                    {"down-bytes", row.down.bytes},
                    {"down-messages", row.down.messages},
                    {"bytes", row.total().bytes},
                    {"messages", row.total().messages},
                    {"by-payload", payloads}});
  }
  return {{"interfaces", rows},
          {"raw-bytes", r.raw_bytes},
          {"model-bytes", r.model_bytes},
          {"termination-bytes", r.termination_bytes},
          {"termination-raw-bytes", r.termination_raw_bytes},
          {"raw-to-model-ratio", r.raw_to_model_ratio ? nlohmann::json(*r.raw_to_model_ratio) : nlohmann::json(nullptr)}};
}

}  // namespace smo
