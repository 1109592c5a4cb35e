#include "smo/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <ostream>
#include <set>

#include "smo/error.hpp"
#include "smo/rng.hpp"

namespace smo {

using nlohmann::json;

ModelParameters aggregate(ModelKind kind, std::vector<DomainModel> models, Aggregation weighting) {
  if (kind == ModelKind::DecisionStump) throw Error(Errc::UnsupportedKind, "stump models cannot be aggregated");
  if (models.empty()) throw Error(Errc::InsufficientData, "no domain models to aggregate");
  std::stable_sort(models.begin(), models.end(),
                   [](const DomainModel& a, const DomainModel& b) { return a.owner < b.owner; });
  const auto& first = models.front();
  for (const auto& m : models) {
    if (m.feature_schema != first.feature_schema || m.parameters.width() != first.parameters.width())
      throw Error(Errc::SchemaMismatch, "domain model from " + m.owner.str() + " has a different feature schema");
    if (m.samples < 1) throw Error(Errc::InsufficientData, "domain model from " + m.owner.str() + " has no samples");
  }
  // Identical inputs must come back bit-for-bit; the weighted sum would round.
  bool identical = std::all_of(models.begin(), models.end(),
                               [&](const DomainModel& m) { return m.parameters == first.parameters; });
  if (identical) return first.parameters;
  std::vector<std::pair<ModelParameters, double>> members;
  for (const auto& m : models)
    members.emplace_back(m.parameters, weighting == Aggregation::Uniform ? 1.0 : static_cast<double>(m.samples));
  return weighted_average(kind, members);
}

ScenarioConfig with_seed(ScenarioConfig config, std::uint64_t seed) {
  config.seed = seed;
  config.split.seed = seed;
  if (config.search) config.search->seed = seed;
  if (config.harness.poison) config.harness.poison->seed = derive_seed(seed, "poison-spec");
  return config;
}

namespace {

const std::string kModel = "global";

std::map<std::string, FieldValue> canonical_fields(const std::map<std::string, FieldValue>& features,
                                                   const CanonicalSchema& schema) {
  std::map<std::string, FieldValue> out;
  for (const auto& [name, v] : features) {
    auto it = schema.rename.find(name);
    out[it == schema.rename.end() ? name : it->second] = v;
  }
  return out;
}

Row canonical_row(const ManagementRecord& r, const CanonicalSchema& schema) {
  Row row = to_row(r);
  row.fields = canonical_fields(r.features, schema);
  return row;
}

ComponentId mda_for(const Topology& topo, const ComponentId& owner) {
  auto kind = domain_of(owner.kind) == Domain::Nsms3gpp ? ComponentKind::MdaSystem3GPP : ComponentKind::MdaSystemNFV;
  return topo.of_kind(kind).front();
}

EvalMetrics pooled_metrics(const std::vector<EvalMetrics>& parts) {
  EvalMetrics m;
  double sq = 0.0, acc = 0.0;
  for (const auto& p : parts) {
    sq += p.mse * static_cast<double>(p.samples);
    acc += p.accuracy * static_cast<double>(p.samples);
    m.samples += p.samples;
    m.inference_ticks += p.inference_ticks;
  }
  if (m.samples > 0) {
    m.mse = sq / static_cast<double>(m.samples);
    m.accuracy = acc / static_cast<double>(m.samples);
  }
  m.rmse = std::sqrt(m.mse);
  return m;
}

struct TrainOutcome {
  ModelParameters params;
  EvalMetrics val;
  HyperParams hp;
  Tick ticks = 0;
  std::optional<SearchResult> search;
};

struct ReportBody {
  std::vector<Row> rows;  // empty when only pairs travel
  std::vector<std::pair<double, double>> pairs;
};

class Orchestrator {
 public:
  Orchestrator(const ScenarioConfig& cfg, RunResult& out)
      : cfg_(cfg), out_(out), sim_(*out.sim), reg_(out.registry), next_id_(std::make_shared<std::uint64_t>(0)) {
    const auto& topo = sim_.topology();
    active_ = topo.of_kind(ComponentKind::AimlFunction).front();
    if (cfg_.harness.failover) active_ = cfg_.harness.failover->target;

    gen_sources_ = cfg_.sources;
    for (const auto& s : gen_sources_) {
      SourceSpec wire = s;
      wire.schema = pseudonymized_schema(s.schema, cfg_.harness.privacy);
      wire_sources_.push_back(wire);
    }
    catalog_ = catalog_of(wire_sources_);
    canonical_ = cfg_.canonical;
    if (cfg_.harness.privacy.enabled) {
      for (auto& f : canonical_.fields) {
        bool sensitive = f.sensitive;
        for (const auto& s : cfg_.sources)
          for (const auto& sf : s.schema) {
            auto it = canonical_.rename.find(sf.name);
            const auto& cname = it == canonical_.rename.end() ? sf.name : it->second;
            if (cname == f.name && sf.sensitive) sensitive = true;
          }
        if (sensitive) {
          FieldSpec tmp = f;
          tmp.sensitive = true;
          f = pseudonymized_schema({tmp}, cfg_.harness.privacy).front();
          f.sensitive = sensitive;
        }
      }
    }

    targets_ = cfg_.lifecycle.targets;
    if (targets_.empty()) {
      if (cfg_.kind == ScenarioKind::C) {
        for (const auto& s : cfg_.sources) {
          auto m = mda_for(topo, s.owner);
          if (std::find(targets_.begin(), targets_.end(), m) == targets_.end()) targets_.push_back(m);
        }
      } else {
        for (auto k : {ComponentKind::MdaSystem3GPP, ComponentKind::MdaSystemNFV})
          for (const auto& m : topo.of_kind(k)) targets_.push_back(m);
      }
      std::sort(targets_.begin(), targets_.end());
    }
    if (targets_.empty())
      throw Error(Errc::ConfigError, "no deployment targets and no MDA system to default to", "lifecycle.targets");

    if (cfg_.kind == ScenarioKind::C) {
      std::map<ComponentId, std::vector<std::size_t>> by_mda;
      for (std::size_t i = 0; i < cfg_.sources.size(); ++i) by_mda[mda_for(topo, cfg_.sources[i].owner)].push_back(i);
      for (auto& [mda, idx] : by_mda) {
        DomainState d;
        d.mda = mda;
        d.sources = idx;
        domains_.push_back(std::move(d));
      }
    }

    if (cfg_.kind == ScenarioKind::A) {
      provider_ = topo.of_kind(ComponentKind::ExternalProvider).front();
      if (cfg_.mode == ScenarioMode::ImportModel) {
        try {
          imported_ = load_artifact(cfg_.a.artifact);
        } catch (const Error& e) {
          if (e.code() != Errc::InvalidArtifact) throw;
          import_error_ = e.what();
        }
      } else {
        imported_data_ = read_csv_file(cfg_.a.data);
      }
    }

    build_holdout();
  }

  void run() {
    if (cfg_.harness.failover) {
      failover_ = std::make_unique<FailoverController>(
          sim_, *cfg_.harness.failover, [this] { return snapshot(); },
          [this](const ComponentId& r, const std::optional<json>& ckpt) { promote(r, ckpt); },
          [this] {
            out_.failure = "SinglePointFailure";
            halted_ = true;
          });
    }
    begin_intake();
    for (Tick t = 0; t <= cfg_.horizon && !halted_; ++t) sim_.run_until(t);
    finish();
  }

 private:
  struct DomainState {
    ComponentId mda;
    std::vector<std::size_t> sources;
    std::optional<Table> formatted;
    std::optional<Table> cleansed;
    std::optional<SplitDataset> split;
    std::deque<Row> buffer;
  };

  // -------------------------------------------------------------------------
  // Bookkeeping

  void info(const std::string& text, std::optional<ComponentId> src = std::nullopt) {
    sim_.record(EventType::Info, src ? src : std::optional<ComponentId>(active_), std::nullopt, text);
  }

  /// Mirrors registry transitions into the event log.
  void sync() {
    if (!reg_.contains(kModel)) return;
    const auto& e = reg_.get(kModel);
    for (; logged_ < e.history.size(); ++logged_) {
      const auto& t = e.history[logged_];
      sim_.record(EventType::Transition, active_, std::nullopt,
                  kModel + " v" + std::to_string(e.version) + " " + std::string(to_string(t.from)) + "->" +
                      std::string(to_string(t.to)));
    }
  }

  RegistryProvenance provenance() const {
    RegistryProvenance p;
    p.scenario = std::string(to_string(cfg_.kind)) + "/" + std::string(to_string(cfg_.mode));
    p.dataset_hash = cfg_.digest;
    if (cfg_.search) {
      json j = json::array();
      for (const auto& hp : search_candidates(*cfg_.search, cfg_.hp))
        j.push_back({hp.learning_rate, hp.epochs, hp.batch_size, hp.l2_lambda});
      p.search_hash = fnv1a(j.dump());
    }
    return p;
  }

  void open_entry() {
    if (!reg_.contains(kModel)) reg_.open(kModel, sim_.now(), provenance());
  }

  std::int64_t model_bytes(const ModelKind kind, const ModelParameters& p) const {
    return static_cast<std::int64_t>(parameter_count(kind, p)) * cfg_.sizes.parameter_bytes;
  }

  // -------------------------------------------------------------------------
  // Holdout and serving data

  SourceSpec clean_spec(std::size_t i, bool drifted) const {
    SourceSpec s = gen_sources_[i];
    s.duplicate_rate = s.missing_rate = s.error_rate = 0.0;
    if (drifted) {
      auto it = cfg_.drift.coefficients.find(s.owner);
      if (it != cfg_.drift.coefficients.end()) s.coefficients = it->second;
    }
    return s;
  }

  void build_holdout() {
    if (cfg_.holdout_size == 0) return;
    std::uint64_t id = 1ULL << 60;
    for (std::size_t i = 0; i < gen_sources_.size(); ++i) {
      auto recs = generate_batch(clean_spec(i, false), cfg_.holdout_size, derive_seed(cfg_.seed, "holdout", i), id);
      id += recs.size();
      if (cfg_.harness.privacy.enabled) privacy_transform(recs, gen_sources_[i].schema, cfg_.harness.privacy, 0);
      for (const auto& r : recs) {
        holdout_fields_.push_back(canonical_fields(r.features, canonical_));
        holdout_targets_.push_back(r.target);
      }
    }
  }

  std::optional<double> holdout_mse(const ModelArtifact& a) const {
    if (holdout_fields_.empty() || a.scaling.empty()) return std::nullopt;
    double sq = 0.0;
    for (std::size_t i = 0; i < holdout_fields_.size(); ++i) {
      double e = infer(a, holdout_fields_[i]) - holdout_targets_[i];
      sq += e * e;
    }
    return sq / static_cast<double>(holdout_fields_.size());
  }

  // -------------------------------------------------------------------------
  // Collection

  CollectionPlan make_plan(const ComponentId& collector, const std::vector<std::size_t>& idx) {
    CollectionPlan plan;
    plan.collector = collector;
    plan.batch_rounds = cfg_.batch_rounds;
    plan.round_interval = cfg_.round_interval;
    plan.window = cfg_.window;
    plan.sizes = cfg_.sizes;
    plan.payload = PayloadKind::RawData;
    plan.next_record_id = next_id_;
    for (auto i : idx) {
      CollectionSource cs;
      cs.spec = gen_sources_[i];
      cs.seed = derive_seed(cfg_.seed, "source", i);
      cs.at_source = [this, i](std::vector<ManagementRecord>& recs, std::int64_t bytes) {
        if (cfg_.harness.poison) {
          PoisonSpec ps = *cfg_.harness.poison;
          ps.seed = derive_seed(ps.seed, "source", i);
          out_.poisoned += poison_inject(recs, ps, poison_batches_[i]++);
          for (const auto& r : recs)
            if (r.poisoned) poisoned_ids_.insert(r.record_id);
        }
        if (cfg_.harness.privacy.enabled)
          return privacy_transform(recs, gen_sources_[i].schema, cfg_.harness.privacy, bytes);
        return bytes;
      };
      plan.sources.push_back(std::move(cs));
    }
    return plan;
  }

  std::vector<std::size_t> all_sources() const {
    std::vector<std::size_t> idx(gen_sources_.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }

  void reset_poison_truth() {
    poisoned_ids_.clear();
    poison_batches_.clear();
    rejected_ids_.clear();
    out_.poisoned = 0;
  }

  void begin_intake() {
    ++intake_gen_;
    // Imported models get their entry from register_external.
    if (!(cfg_.kind == ScenarioKind::A && cfg_.mode == ScenarioMode::ImportModel)) open_entry();
    stage_ = "collecting";
    const int gen = intake_gen_;
    if (cfg_.kind == ScenarioKind::A && cfg_.mode == ScenarioMode::ImportData) {
      const auto bytes = static_cast<std::int64_t>(imported_data_.size()) * cfg_.sizes.record_bytes;
      sim_.transfer(provider_, active_, PayloadKind::CleansedData, bytes, {},
                    [this, gen](const InterfaceMessage&) {
                      if (gen != intake_gen_) return;
                      info("imported dataset: " + std::to_string(imported_data_.size()) + " rows");
                      after_transform(imported_data_, std::nullopt);
                    },
                    "import dataset");
      return;
    }
    if (cfg_.kind == ScenarioKind::A) {
      artifact_arrived_ = false;
      local_.reset();
      if (!imported_) {
        reject("artifact unreadable: " + import_error_);
        return;
      }
      sim_.transfer(provider_, active_, PayloadKind::ModelArtifact,
                    artifact_bytes(*imported_, cfg_.sizes, cfg_.lifecycle.package_inflation), *imported_,
                    [this, gen](const InterfaceMessage&) {
                      if (gen != intake_gen_) return;
                      artifact_arrived_ = true;
                      try_validate_import();
                    },
                    "import artifact");
    }
    reset_poison_truth();
    if (cfg_.kind == ScenarioKind::C) {
      begin_domain_collection();
      return;
    }
    const ComponentId collector = active_;
    collect(sim_, make_plan(collector, all_sources()), [this, gen, collector](Table t) {
      if (gen != intake_gen_ || sim_.failed(collector)) return;
      info("collection closed: " + std::to_string(t.rows.size()) + " rows" + (t.partial ? " (partial)" : ""));
      if (cfg_.kind == ScenarioKind::A) {
        local_ = prepare(std::move(t));
        try_validate_import();
      } else {
        auto formatted = prepare(std::move(t));
        auto tr = transform(formatted, canonical_, cfg_.transform);
        after_transform(std::move(tr.dataset), std::move(tr.params));
      }
    });
  }

  /// Cleanse, optional validation filter, format.
  Table prepare(Table raw) {
    return format(cleanse_and_filter(std::move(raw)), canonical_);
  }

  Table cleanse_and_filter(Table raw) {
    Table t = cleanse(std::move(raw), catalog_);
    if (cfg_.harness.filter) {
      auto fr = validation_filter(std::move(t), *cfg_.harness.filter);
      for (const auto& r : fr.rejected) rejected_ids_.insert(r.record_id);
      info("validation filter rejected " + std::to_string(fr.rejected.size()) + " rows");
      t = std::move(fr.kept);
      if (t.rows.empty()) throw Error(Errc::EmptyDataset, "validation filter rejected every row");
    }
    return t;
  }

  // -------------------------------------------------------------------------
  // Central training path (B, A import-data, C share-data)

  void after_transform(Dataset ds, std::optional<TransformParams> params) {
    out_.scaling = std::move(params);
    out_.exploration = explore(ds);
    out_.split = split(ds, cfg_.split);
    out_.dataset = std::move(ds);
    reg_.transition(kModel, LifecycleState::Preprocessed, sim_.now());
    sync();
    stage_ = "preprocessed";
    info("preprocessed: " + std::to_string(out_.dataset->size()) + " rows, " + std::to_string(out_.dataset->width()) +
         " features");
    submit_training();
  }

  TrainOutcome central_train(const SplitDataset& sp) const {
    TrainOutcome t;
    const auto seed = derive_seed(cfg_.seed, "train");
    const auto kind = cfg_.model_kind;
    if (cfg_.search) {
      auto s = search(kind, sp, *cfg_.search, cfg_.hp, seed, cfg_.cost);
      t.params = s.best_result.params;
      t.val = s.best_result.metrics;
      t.hp = s.best;
      t.ticks = s.total_train_ticks;
      t.search = std::move(s);
    } else if (cfg_.online_training && is_sgd(kind)) {
      // Online: one sample at a time in arrival order.
      ModelParameters p = zero_parameters(kind, sp.train.width());
      for (int e = 0; e < cfg_.hp.epochs; ++e) p = incremental_update(kind, p, sp.train, cfg_.hp.learning_rate, cfg_.hp.l2_lambda);
      t.params = p;
      t.val = evaluate(kind, p, sp.val, cfg_.hp.threshold, cfg_.cost);
      t.ticks = cfg_.cost.train_ticks(sp.train.size() * static_cast<std::size_t>(cfg_.hp.epochs));
      t.val.train_ticks = t.ticks;
      t.hp = cfg_.hp;
    } else {
      auto r = train(kind, sp, cfg_.hp, seed, cfg_.cost);
      t.params = r.params;
      t.val = r.metrics;
      t.ticks = r.metrics.train_ticks;
      t.hp = cfg_.hp;
    }
    return t;
  }

  Tick completion_of(std::size_t job) const {
    SchedulerSpec s = cfg_.harness.scheduler;
    Tick horizon = 1;
    for (const auto& j : retrain_jobs_) s.jobs.push_back(j);
    for (const auto& j : s.jobs) horizon += j.work + j.arrival;
    auto r = schedule(s, horizon);
    const auto& o = r.jobs[cfg_.harness.scheduler.jobs.size() + job];
    return o.completion ? *o.completion : horizon;
  }

  /// Jobs of a failed host stop at `at`: they keep only the work already granted.
  void abandon_jobs(Tick at) {
    SchedulerSpec s = cfg_.harness.scheduler;
    for (const auto& j : retrain_jobs_) s.jobs.push_back(j);
    const auto r = schedule(s, at);
    const auto base = cfg_.harness.scheduler.jobs.size();
    std::vector<JobSpec> kept;
    for (std::size_t k = 0; k < retrain_jobs_.size(); ++k) {
      if (r.jobs[base + k].completion) {
        kept.push_back(retrain_jobs_[k]);
        continue;
      }
      std::int64_t granted = 0;
      for (const auto& row : r.allocations) granted += row[base + k];
      if (granted == 0) continue;
      auto j = retrain_jobs_[k];
      j.work = granted;
      kept.push_back(j);
    }
    retrain_jobs_ = std::move(kept);
  }

  /// Queues an AI/ML job on the shared budget; `done` runs at its completion tick.
  void submit_job(const std::string& name, Tick ticks, std::function<void()> done) {
    JobSpec j;
    j.name = name + "-" + std::to_string(retrain_jobs_.size() + 1);
    j.job_class = JobClass::Retraining;
    j.priority = cfg_.harness.retraining_priority;
    j.demand = cfg_.harness.training_demand;
    j.work = ticks * j.demand;
    j.arrival = sim_.now() + 1;
    retrain_jobs_.push_back(j);
    const Tick at = std::max(sim_.now(), completion_of(retrain_jobs_.size() - 1));
    out_.training_ticks += ticks;
    info("job " + j.name + " submitted: " + std::to_string(ticks) + " ticks, completes at " + std::to_string(at));
    sim_.schedule(at, std::move(done));
  }

  void submit_training() {
    auto t = std::make_shared<TrainOutcome>(central_train(*out_.split));
    const ComponentId owner = active_;
    const int gen = ++train_gen_;
    submit_job("train", t->ticks, [this, owner, gen, t] {
      if (gen != train_gen_ || owner != active_ || sim_.failed(owner)) return;
      on_trained(*t);
    });
  }

  void on_trained(const TrainOutcome& t) {
    const auto& sp = *out_.split;
    const auto kind = cfg_.model_kind;
    ModelArtifact a;
    a.kind = kind;
    a.parameters = t.params;
    a.feature_schema = sp.train.feature_names;
    if (out_.scaling) a.scaling = *out_.scaling;
    a.metrics = t.val;
    a.origin = Origin::Internal;
    a.created_tick = sim_.now();
    a.packaged = cfg_.lifecycle.packaged;
    reg_.register_internal(kModel, a, sim_.now());
    sync();
    out_.search = t.search;
    out_.chosen = t.hp;
    out_.val_metrics = t.val;
    out_.test_metrics = evaluate(kind, t.params, sp.test, t.hp.threshold, cfg_.cost);
    out_.inference_ticks += out_.test_metrics->inference_ticks;
    const double mean = std::accumulate(sp.train.targets.begin(), sp.train.targets.end(), 0.0) /
                        static_cast<double>(sp.train.size());
    double sq = 0.0;
    for (double y : sp.test.targets) sq += (y - mean) * (y - mean);
    out_.baseline_test_mse = sq / static_cast<double>(sp.test.size());
    if (!is_classifier(kind)) {
      try {
        auto oracle = ridge_closed_form(sp.train, 1e-8);
        out_.oracle_test_mse = evaluate(ModelKind::RidgeClosedForm, oracle, sp.test).mse;
      } catch (const Error& e) {
        if (e.code() != Errc::SingularSystem) throw;
      }
    }
    baseline_ = t.val.mse;
    validate_and_deploy(t.val.mse);
  }

  void validate_and_deploy(double val_mse) {
    reg_.transition(kModel, LifecycleState::Validated, sim_.now());
    sync();
    if (val_mse > cfg_.lifecycle.validation_max_mse) {
      sim_.record(EventType::Rejection, active_, std::nullopt,
                  "validation mse " + std::to_string(val_mse) + " exceeds " +
                      std::to_string(cfg_.lifecycle.validation_max_mse));
      reg_.transition(kModel, LifecycleState::Retired, sim_.now());
      sync();
      stage_ = "retired";
      return;
    }
    start_deploy();
  }

  void start_deploy() {
    stage_ = "deploying";
    const auto& e = reg_.get(kModel);
    const auto bytes = artifact_bytes(*e.artifact, cfg_.sizes, cfg_.lifecycle.package_inflation);
    const int gen = ++deploy_gen_;
    deploy(sim_, reg_, kModel, active_, targets_, bytes, [this, gen] {
      if (gen == deploy_gen_) on_live();
    });
    sync();
  }

  void on_live() {
    sync();
    const auto& e = reg_.get(kModel);
    out_.live = e.artifact;
    stage_ = "monitoring";
    info(kModel + " v" + std::to_string(e.version) + " live on " + std::to_string(targets_.size()) + " targets");
    if (resolving_) {
      resolving_ = false;
      if (!out_.drift_resolved_at) out_.drift_resolved_at = sim_.now();
    }
    if (e.version > 1) out_.pre_shift_mse = holdout_mse(*out_.live);
    if (window_) window_->reset(baseline_);
    start_monitoring();
  }

  // -------------------------------------------------------------------------
  // Scenario A import-model

  void reject(const std::string& why) {
    out_.rejection = why;
    sim_.record(EventType::Rejection, active_, provider_, why);
    stage_ = "rejected";
  }

  void try_validate_import() {
    if (!artifact_arrived_ || !local_) return;
    const auto& a = *imported_;
    if (a.scaling.empty()) {
      reject("artifact carries no scaling parameters");
      return;
    }
    Dataset local;
    try {
      local = apply_transform(*local_, a.scaling);
    } catch (const Error& e) {
      reject(std::string("local data does not fit the artifact schema: ") + e.what());
      return;
    }
    try {
      reg_.register_external(kModel, a, local, cfg_.a.threshold, sim_.now(), provenance());
    } catch (const Error& e) {
      if (e.code() != Errc::InvalidArtifact) throw;
      reject(e.what());
      return;
    }
    logged_ = reg_.get(kModel).history.size();
    info("external artifact validated on " + std::to_string(local.size()) + " local rows");
    out_.scaling = a.scaling;
    out_.val_metrics = evaluate(a.kind, a.parameters, local, 0.5, cfg_.cost);
    out_.test_metrics = out_.val_metrics;
    out_.inference_ticks += out_.val_metrics->inference_ticks;
    baseline_ = out_.val_metrics->mse;
    start_deploy();
  }

  // -------------------------------------------------------------------------
  // Scenario C

  bool share_models() const { return cfg_.kind == ScenarioKind::C && cfg_.mode == ScenarioMode::ShareModels; }

  void begin_domain_collection() {
    const int gen = intake_gen_;
    for (std::size_t d = 0; d < domains_.size(); ++d) {
      auto& dom = domains_[d];
      if (dom.formatted) {
        // Domain data survives an AI/ML Function failover; only the upload repeats.
        domain_ready(d);
        continue;
      }
      collect(sim_, make_plan(dom.mda, dom.sources), [this, d, gen](Table t) {
        if (gen != intake_gen_) return;
        auto& dom = domains_[d];
        info("domain collection closed: " + std::to_string(t.rows.size()) + " rows", dom.mda);
        auto cleansed = cleanse_and_filter(std::move(t));
        dom.formatted = format(cleansed, canonical_);
        dom.cleansed = std::move(cleansed);
        domain_ready(d);
      });
    }
  }

  void domain_ready(std::size_t d) {
    const int gen = intake_gen_;
    auto& dom = domains_[d];
    if (!share_models()) {
      auto body = std::make_shared<const Table>(*dom.cleansed);
      sim_.transfer(dom.mda, active_, PayloadKind::CleansedData,
                    static_cast<std::int64_t>(body->rows.size()) * cfg_.sizes.record_bytes, body,
                    [this, d, gen, body](const InterfaceMessage&) {
                      if (gen != intake_gen_) return;
                      parts_[d] = *body;
                      if (parts_.size() < domains_.size()) return;
                      Table all;
                      all.stage = Stage::Cleansed;
                      for (auto& [_, p] : parts_) {
                        for (auto& r : p.rows) all.rows.push_back(r);
                        for (auto& s : p.provenance.sources) all.provenance.sources.push_back(s);
                        all.partial = all.partial || p.partial;
                      }
                      parts_.clear();
                      auto formatted = format(cleanse(std::move(all), catalog_), canonical_);
                      auto tr = transform(formatted, canonical_, cfg_.transform);
                      after_transform(std::move(tr.dataset), std::move(tr.params));
                    },
                    "cleansed dataset");
      return;
    }
    auto stats = std::make_shared<const std::vector<ColumnStats>>(column_stats(*dom.formatted, canonical_, cfg_.transform));
    const auto bytes = static_cast<std::int64_t>(stats->size()) * 5 * cfg_.sizes.parameter_bytes;
    sim_.transfer(dom.mda, active_, PayloadKind::Report, bytes, stats,
                  [this, d, gen, stats](const InterfaceMessage&) {
                    if (gen != intake_gen_) return;
                    stats_[d] = *stats;
                    if (stats_.size() == domains_.size()) agree_scaling();
                  },
                  "column statistics");
  }

  void agree_scaling() {
    std::vector<ColumnStats> merged = stats_.begin()->second;
    for (auto it = std::next(stats_.begin()); it != stats_.end(); ++it)
      for (std::size_t j = 0; j < merged.size(); ++j) merged[j].merge(it->second[j]);
    stats_.clear();
    auto params = params_from_stats(merged, canonical_, cfg_.transform);
    out_.scaling = params;
    reg_.transition(kModel, LifecycleState::Preprocessed, sim_.now());
    sync();
    stage_ = "federating";
    const int fed = ++fed_gen_;
    auto body = std::make_shared<const TransformParams>(params);
    for (std::size_t d = 0; d < domains_.size(); ++d) {
      sim_.transfer(active_, domains_[d].mda, PayloadKind::Control,
                    static_cast<std::int64_t>(2 * params.width()) * cfg_.sizes.parameter_bytes, body,
                    [this, d, fed, body](const InterfaceMessage&) {
                      if (fed != fed_gen_) return;
                      auto& dom = domains_[d];
                      auto ds = apply_transform(*dom.formatted, *body);
                      SplitSpec ss = cfg_.split;
                      ss.seed = derive_seed(cfg_.seed, "domain-split", d);
                      dom.split = split(ds, ss);
                      local_round(d, 1, std::nullopt);
                    },
                    "global scaling");
    }
  }

  void local_round(std::size_t d, int round, std::optional<ModelParameters> init) {
    const auto& dom = domains_[d];
    const auto seed = derive_seed(derive_seed(cfg_.seed, "local", static_cast<std::uint64_t>(round)), "domain", d);
    auto fr = fit(cfg_.model_kind, dom.split->train, cfg_.hp, seed, init ? &*init : nullptr);
    upload_after(d, round, fr.params, dom.split->train.size(), fr.records_processed);
  }

  void upload_after(std::size_t d, int round, ModelParameters params, std::size_t samples, std::size_t records) {
    const Tick ticks = cfg_.cost.train_ticks(records);
    out_.training_ticks += ticks;
    out_.domain_train_ticks += ticks;
    const int fed = fed_gen_;
    auto dm = std::make_shared<DomainModel>();
    dm->owner = domains_[d].mda;
    dm->parameters = std::move(params);
    dm->samples = samples;
    dm->round = round;
    dm->feature_schema = out_.scaling->names();
    sim_.schedule(sim_.now() + ticks, [this, d, fed, dm] {
      if (fed != fed_gen_) return;
      sim_.transfer(domains_[d].mda, active_, PayloadKind::ModelArtifact, model_bytes(cfg_.model_kind, dm->parameters),
                    dm,
                    [this, fed, dm](const InterfaceMessage&) {
                      if (fed != fed_gen_) return;
                      uploads_.push_back(*dm);
                      if (uploads_.size() == domains_.size()) aggregate_round(dm->round);
                    },
                    "domain model round " + std::to_string(dm->round));
    });
  }

  void aggregate_round(int round) {
    auto global = aggregate(cfg_.model_kind, uploads_, cfg_.aggregation);
    uploads_.clear();
    RoundInfo ri;
    ri.round = round;
    ri.aggregated_at = sim_.now();
    ri.global = global;
    ModelArtifact probe;
    probe.kind = cfg_.model_kind;
    probe.parameters = global;
    probe.scaling = *out_.scaling;
    ri.holdout_mse = holdout_mse(probe);
    out_.rounds.push_back(ri);
    info("aggregated round " + std::to_string(round));
    const int fed = fed_gen_;
    const bool last = refining_ || round >= cfg_.rounds;
    auto body = std::make_shared<const ModelParameters>(global);
    pending_val_.clear();
    for (std::size_t d = 0; d < domains_.size(); ++d) {
      sim_.transfer(active_, domains_[d].mda, PayloadKind::ModelArtifact, model_bytes(cfg_.model_kind, global), body,
                    [this, d, fed, body, round, last](const InterfaceMessage&) {
                      if (fed != fed_gen_) return;
                      if (!last) {
                        local_round(d, round + 1, *body);
                        return;
                      }
                      validate_at_domain(d, *body);
                    },
                    last ? "global model for validation" : "global model round " + std::to_string(round));
    }
  }

  void validate_at_domain(std::size_t d, const ModelParameters& global) {
    const int fed = fed_gen_;
    auto m = std::make_shared<EvalMetrics>(
        evaluate(cfg_.model_kind, global, domains_[d].split->val, cfg_.hp.threshold, cfg_.cost));
    out_.inference_ticks += m->inference_ticks;
    auto params = std::make_shared<const ModelParameters>(global);
    sim_.transfer(domains_[d].mda, active_, PayloadKind::Report, 3 * cfg_.sizes.parameter_bytes, m,
                  [this, d, fed, m, params](const InterfaceMessage&) {
                    if (fed != fed_gen_) return;
                    pending_val_[d] = *m;
                    if (pending_val_.size() == domains_.size()) federated_done(*params);
                  },
                  "validation report");
  }

  void federated_done(const ModelParameters& global) {
    std::vector<EvalMetrics> parts;
    for (auto& [_, m] : pending_val_) parts.push_back(m);
    pending_val_.clear();
    auto val = pooled_metrics(parts);
    ModelArtifact a;
    a.kind = cfg_.model_kind;
    a.parameters = global;
    a.feature_schema = out_.scaling->names();
    a.scaling = *out_.scaling;
    a.metrics = val;
    a.origin = Origin::Aggregated;
    a.created_tick = sim_.now();
    a.packaged = cfg_.lifecycle.packaged;
    const bool refinement = refining_;
    reg_.register_internal(kModel, a, sim_.now());
    sync();
    refining_ = false;
    if (!refinement) {
      out_.val_metrics = val;
      out_.chosen = cfg_.hp;
      std::vector<EvalMetrics> tests;
      for (const auto& dom : domains_)
        tests.push_back(evaluate(cfg_.model_kind, global, dom.split->test, cfg_.hp.threshold, cfg_.cost));
      out_.test_metrics = pooled_metrics(tests);
      out_.inference_ticks += out_.test_metrics->inference_ticks;
      baseline_ = val.mse;
    }
    validate_and_deploy(val.mse);
  }

  // -------------------------------------------------------------------------
  // Monitoring and refinement

  ComponentId serving_target(const ComponentId& owner) const {
    for (const auto& t : targets_)
      if (t == owner) return t;
    for (const auto& t : targets_)
      if (domain_of(t.kind) == domain_of(owner.kind)) return t;
    return targets_.front();
  }

  void start_monitoring() {
    if (monitor_running_) return;
    if (!out_.scaling || out_.scaling->empty()) return;
    const auto& mc = cfg_.lifecycle.monitor;
    if (mc.period > 0) {
      monitor_running_ = true;
      window_.emplace(mc.capacity, baseline_, mc.drift_factor, mc.min_samples);
      schedule_monitor(sim_.now() + mc.period, 0);
    }
    if (cfg_.lifecycle.refine.periodic > 0) {
      monitor_running_ = true;
      if (!window_) window_.emplace(mc.capacity, baseline_, mc.drift_factor, mc.min_samples);
      schedule_periodic(sim_.now() + cfg_.lifecycle.refine.periodic);
    }
  }

  void schedule_monitor(Tick at, std::uint64_t k) {
    if (at > cfg_.horizon) return;
    sim_.schedule(at, [this, k] {
      monitor_round(k);
      schedule_monitor(sim_.now() + cfg_.lifecycle.monitor.period, k + 1);
    });
  }

  void schedule_periodic(Tick at) {
    if (at > cfg_.horizon) return;
    sim_.schedule(at, [this] {
      if (reg_.contains(kModel) && reg_.get(kModel).state == LifecycleState::Monitored && !refining_ &&
          has_refinement_data())
        trigger_refinement("periodic");
      schedule_periodic(sim_.now() + cfg_.lifecycle.refine.periodic);
    });
  }

  bool has_refinement_data() const {
    if (share_models())
      return std::all_of(domains_.begin(), domains_.end(), [](const DomainState& d) { return !d.buffer.empty(); });
    return !refine_rows_.empty();
  }

  void monitor_round(std::uint64_t k) {
    if (!out_.live || !reg_.contains(kModel)) return;
    const auto state = reg_.get(kModel).state;
    if (state == LifecycleState::Retired) return;
    const bool drifted = cfg_.drift.tick && sim_.now() >= *cfg_.drift.tick;
    const auto n = cfg_.lifecycle.monitor.samples_per_period;
    for (std::size_t i = 0; i < gen_sources_.size(); ++i) {
      auto recs = generate_batch(clean_spec(i, drifted), n, derive_seed(derive_seed(cfg_.seed, "monitor", k), "source", i),
                                 *next_id_, sim_.now());
      *next_id_ += recs.size();
      if (cfg_.harness.privacy.enabled) privacy_transform(recs, gen_sources_[i].schema, cfg_.harness.privacy, 0);
      const auto owner = gen_sources_[i].owner;
      const auto target = serving_target(owner);
      auto body = std::make_shared<const std::vector<ManagementRecord>>(std::move(recs));
      sim_.transfer(owner, target, PayloadKind::RawData, static_cast<std::int64_t>(n) * cfg_.sizes.record_bytes, body,
                    [this, target, body](const InterfaceMessage&) { serve(target, *body); }, "inference input");
    }
  }

  void serve(const ComponentId& target, const std::vector<ManagementRecord>& recs) {
    if (!out_.live) return;
    const auto& a = *out_.live;
    auto body = std::make_shared<ReportBody>();
    for (const auto& r : recs) {
      Row row = canonical_row(r, canonical_);
      body->pairs.emplace_back(infer(a, row.fields), r.target);
      body->rows.push_back(std::move(row));
    }
    out_.inference_ticks += cfg_.cost.inference_ticks(recs.size());
    std::int64_t bytes = 0;
    if (share_models()) {
      // Records stay in the domain; only prediction/actual pairs travel.
      for (auto& dom : domains_)
        if (dom.mda == target)
          for (auto& row : body->rows) {
            dom.buffer.push_back(row);
            if (dom.buffer.size() > cfg_.lifecycle.monitor.capacity) dom.buffer.pop_front();
          }
      body->rows.clear();
      bytes = static_cast<std::int64_t>(recs.size()) * 2 * cfg_.sizes.prediction_bytes;
    } else {
      bytes = static_cast<std::int64_t>(recs.size()) * (cfg_.sizes.record_bytes + cfg_.sizes.prediction_bytes);
    }
    sim_.transfer(target, active_, PayloadKind::Report, bytes, body,
                  [this, body](const InterfaceMessage&) { on_report(*body); }, "monitoring report");
  }

  void on_report(const ReportBody& body) {
    if (!window_ || !reg_.contains(kModel)) return;
    for (const auto& [pred, actual] : body.pairs) window_->ingest(pred, actual, sim_.now());
    for (const auto& row : body.rows) {
      refine_rows_.push_back(row);
      if (refine_rows_.size() > cfg_.lifecycle.monitor.capacity) refine_rows_.pop_front();
    }
    if (cfg_.lifecycle.monitor.period > 0 && reg_.get(kModel).state == LifecycleState::Monitored && !refining_ &&
        window_->drift())
      trigger_refinement("drift");
  }

  void trigger_refinement(const std::string& reason) {
    if (reason == "drift") {
      if (!out_.drift_detected_at) out_.drift_detected_at = sim_.now();
      sim_.record(EventType::Detection, active_, std::nullopt,
                  "drift: window mse " + std::to_string(window_->mse()) + " exceeds baseline " +
                      std::to_string(window_->baseline()));
      resolving_ = true;
    }
    try {
      reg_.begin_refinement(kModel, cfg_.lifecycle.refine.max_iterations, sim_.now());
    } catch (const Error& e) {
      if (e.code() != Errc::RefinementBudgetExhausted) throw;
      sync();
      sim_.record(EventType::Info, active_, std::nullopt, std::string("model retired: ") + e.what());
      stage_ = "retired";
      resolving_ = false;
      return;
    }
    sync();
    refining_ = true;
    stage_ = "refining";
    out_.refinements = reg_.get(kModel).refinements;
    if (share_models()) federated_refine();
    else central_refine();
  }

  void central_refine() {
    const auto& live = *out_.live;
    Table t;
    t.stage = Stage::Formatted;
    t.rows.assign(refine_rows_.begin(), refine_rows_.end());
    for (const auto& f : canonical_.fields) t.columns.push_back(f.name);
    auto data = std::make_shared<Dataset>(apply_transform(t, live.scaling));
    const auto kind = live.kind;
    ModelParameters p = live.parameters;
    std::size_t records = 0;
    const auto& rc = cfg_.lifecycle.refine;
    const HyperParams hp = out_.chosen;
    if (rc.incremental && is_sgd(kind)) {
      for (int e = 0; e < rc.epochs; ++e) p = incremental_update(kind, p, *data, hp.learning_rate, hp.l2_lambda);
      records = data->size() * static_cast<std::size_t>(rc.epochs);
    } else {
      auto fr = fit(kind, *data, hp, derive_seed(cfg_.seed, "refine", static_cast<std::uint64_t>(out_.refinements)));
      p = fr.params;
      records = fr.records_processed;
    }
    auto metrics = std::make_shared<EvalMetrics>(evaluate(kind, p, *data, hp.threshold, cfg_.cost));
    metrics->train_ticks = cfg_.cost.train_ticks(records);
    auto params = std::make_shared<ModelParameters>(std::move(p));
    const ComponentId owner = active_;
    const int gen = ++train_gen_;
    submit_job("refine", metrics->train_ticks, [this, owner, gen, params, metrics] {
      if (gen != train_gen_ || owner != active_ || sim_.failed(owner)) return;
      ModelArtifact a = *out_.live;
      a.parameters = *params;
      a.metrics = *metrics;
      a.created_tick = sim_.now();
      reg_.register_internal(kModel, a, sim_.now());
      sync();
      refining_ = false;
      validate_and_deploy(metrics->mse);
    });
  }

  void federated_refine() {
    const int fed = ++fed_gen_;
    uploads_.clear();
    auto global = std::make_shared<const ModelParameters>(out_.live->parameters);
    for (std::size_t d = 0; d < domains_.size(); ++d) {
      sim_.transfer(active_, domains_[d].mda, PayloadKind::Control, 0, {},
                    [this, d, fed, global](const InterfaceMessage&) {
                      if (fed != fed_gen_) return;
                      auto& dom = domains_[d];
                      Table t;
                      t.stage = Stage::Formatted;
                      t.rows.assign(dom.buffer.begin(), dom.buffer.end());
                      auto data = apply_transform(t, *out_.scaling);
                      // The validation round reads the fresh data too.
                      dom.split->val = data;
                      const auto& rc = cfg_.lifecycle.refine;
                      ModelParameters p = *global;
                      std::size_t records = 0;
                      if (rc.incremental && is_sgd(cfg_.model_kind)) {
                        for (int e = 0; e < rc.epochs; ++e)
                          p = incremental_update(cfg_.model_kind, p, data, cfg_.hp.learning_rate, cfg_.hp.l2_lambda);
                        records = data.size() * static_cast<std::size_t>(rc.epochs);
                      } else {
                        auto fr = fit(cfg_.model_kind, data, cfg_.hp,
                                      derive_seed(cfg_.seed, "refine", static_cast<std::uint64_t>(out_.refinements)),
                                      &*global);
                        p = fr.params;
                        records = fr.records_processed;
                      }
                      upload_after(d, cfg_.rounds + out_.refinements, p, data.size(), records);
                    },
                    "refinement request");
    }
  }

  // -------------------------------------------------------------------------
  // Failover

  json snapshot() const { return json{{"stage", stage_}, {"registry", to_json(reg_)}, {"tick", sim_.now()}}; }

  void promote(const ComponentId& replica, const std::optional<json>& ckpt) {
    active_ = replica;
    abandon_jobs(cfg_.harness.failover->fail_tick);
    ++train_gen_;
    ++deploy_gen_;
    ++fed_gen_;
    uploads_.clear();
    stats_.clear();
    parts_.clear();
    pending_val_.clear();
    std::string stage = "collecting";
    if (ckpt) {
      reg_ = registry_from_json(ckpt->at("registry"));
      stage = ckpt->at("stage").get<std::string>();
      const auto& taken = failover_->outcome().checkpoints;
      out_.restored_equals_checkpoint = !taken.empty() && taken.back().second == *ckpt &&
                                        reg_ == registry_from_json(taken.back().second.at("registry")) &&
                                        to_json(reg_) == ckpt->at("registry");
    } else {
      reg_ = Registry{};
    }
    logged_ = reg_.contains(kModel) ? reg_.get(kModel).history.size() : 0;
    info("resuming from checkpointed stage " + stage);
    stage_ = stage;
    if (stage == "collecting" || stage == "federating" || !reg_.contains(kModel)) {
      begin_intake();
      return;
    }
    const auto state = reg_.get(kModel).state;
    if (stage == "preprocessed") {
      submit_training();
    } else if (stage == "deploying" && state == LifecycleState::Deployed) {
      // Copies already left the old primary; the replica confirms them.
      const auto& e = reg_.get(kModel);
      for (const auto& t : targets_) reg_.record_deployment(kModel, t, e.version);
      reg_.transition(kModel, LifecycleState::Monitored, sim_.now());
      on_live();
    } else if (stage == "deploying" && state == LifecycleState::Validated) {
      start_deploy();
    } else if (stage == "refining" && state == LifecycleState::Refining) {
      refining_ = true;
      if (share_models()) federated_refine();
      else central_refine();
    } else if (stage == "monitoring") {
      refining_ = false;
    }
  }

  // -------------------------------------------------------------------------

  void finish() {
    // A model stopped at the validation gate is still scored, for comparison.
    if (out_.live) out_.holdout_mse = holdout_mse(*out_.live);
    else if (reg_.contains(kModel) && reg_.get(kModel).artifact) out_.holdout_mse = holdout_mse(*reg_.get(kModel).artifact);
    if (cfg_.harness.poison || cfg_.harness.filter) out_.detection = detection_score(rejected_ids_, poisoned_ids_);
    if (failover_) out_.failover = failover_->outcome();
    if (out_.failover && out_.failover->detected_at) {
      out_.time_to_detection = *out_.failover->detected_at - cfg_.harness.failover->fail_tick;
      out_.time_to_resolution = out_.time_to_detection;
    } else if (out_.drift_detected_at && cfg_.drift.tick) {
      out_.time_to_detection = *out_.drift_detected_at - *cfg_.drift.tick;
      if (out_.drift_resolved_at) out_.time_to_resolution = *out_.drift_resolved_at - *cfg_.drift.tick;
    }
    SchedulerSpec s = cfg_.harness.scheduler;
    for (const auto& j : retrain_jobs_) s.jobs.push_back(j);
    Tick horizon = 1;
    for (const auto& j : s.jobs) horizon += j.work + j.arrival;
    out_.schedule = schedule(s, horizon);
    out_.cost = out_.schedule.retraining_budget_ticks + out_.domain_train_ticks * cfg_.harness.training_demand;
    out_.resource_requirements = out_.schedule.peak_demand;
    if (out_.domain_train_ticks > 0)
      out_.resource_requirements = std::max<std::int64_t>(out_.resource_requirements, cfg_.harness.training_demand);
    out_.signaling = signaling_from_meters(sim_);
  }

  const ScenarioConfig& cfg_;
  RunResult& out_;
  Simulator& sim_;
  Registry& reg_;

  ComponentId active_;
  ComponentId provider_;
  std::vector<SourceSpec> gen_sources_;
  std::vector<SourceSpec> wire_sources_;
  FieldCatalog catalog_;
  CanonicalSchema canonical_;
  std::vector<ComponentId> targets_;
  std::shared_ptr<std::uint64_t> next_id_;

  std::string stage_ = "collecting";
  std::size_t logged_ = 0;
  bool halted_ = false;
  int intake_gen_ = 0;
  int train_gen_ = 0;
  int deploy_gen_ = 0;
  int fed_gen_ = 0;

  std::map<std::size_t, std::uint64_t> poison_batches_;
  std::set<std::uint64_t> poisoned_ids_;
  std::set<std::uint64_t> rejected_ids_;

  std::vector<JobSpec> retrain_jobs_;
  std::unique_ptr<FailoverController> failover_;

  std::optional<ModelArtifact> imported_;
  std::string import_error_;
  Dataset imported_data_;
  bool artifact_arrived_ = false;
  std::optional<Table> local_;

  std::vector<DomainState> domains_;
  std::map<std::size_t, std::vector<ColumnStats>> stats_;
  std::map<std::size_t, Table> parts_;
  std::vector<DomainModel> uploads_;
  std::map<std::size_t, EvalMetrics> pending_val_;

  std::vector<std::map<std::string, FieldValue>> holdout_fields_;
  std::vector<double> holdout_targets_;

  double baseline_ = 0.0;
  std::optional<MonitorWindow> window_;
  bool monitor_running_ = false;
  bool refining_ = false;
  bool resolving_ = false;
  std::deque<Row> refine_rows_;
};

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json opt(const std::optional<Tick>& v) { return v ? json(*v) : json(nullptr); }

json hp_json(const HyperParams& hp) {
  return {{"learning-rate", hp.learning_rate}, {"epochs", hp.epochs},       {"batch-size", hp.batch_size},
          {"l2-lambda", hp.l2_lambda},         {"stump-depth", hp.stump_depth}, {"threshold", hp.threshold}};
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& config) {
  RunResult out;
  out.config = config;
  out.sim = std::make_unique<Simulator>(build_topology(config.topology));
  Orchestrator o(out.config, out);
  try {
    o.run();
  } catch (const Error& e) {
    // Runtime errors inside the simulation fail the run rather than the process.
    out.failure = std::string(to_string(e.code())) + ": " + e.what();
    out.sim->record(EventType::Fault, std::nullopt, std::nullopt, *out.failure);
    out.signaling = signaling_from_meters(*out.sim);
  }
  out.report = to_json(out);
  return out;
}

RunResult run_scenario_a(const ScenarioConfig& config) {
  if (config.kind != ScenarioKind::A) throw Error(Errc::ConfigError, "not a scenario A config", "scenario.kind");
  return run_scenario(config);
}

RunResult run_scenario_b(const ScenarioConfig& config) {
  if (config.kind != ScenarioKind::B) throw Error(Errc::ConfigError, "not a scenario B config", "scenario.kind");
  if (config.sources.empty()) throw Error(Errc::NoDataSources, "no data sources", "sources");
  return run_scenario(config);
}

RunResult run_scenario_c(const ScenarioConfig& config) {
  if (config.kind != ScenarioKind::C) throw Error(Errc::ConfigError, "not a scenario C config", "scenario.kind");
  return run_scenario(config);
}

json to_json(const RunResult& r) {
  const auto& c = r.config;
  json j;
  j["scenario"] = std::string(to_string(c.kind));
  j["mode"] = std::string(to_string(c.mode));
  j["seed"] = c.seed;
  j["status"] = r.failure ? "failed" : (r.rejection ? "rejected" : "ok");
  j["failure"] = r.failure ? json(*r.failure) : json(nullptr);
  j["rejection"] = r.rejection ? json(*r.rejection) : json(nullptr);

  json model = json::object();
  model["id"] = r.model_id;
  if (r.registry.contains(r.model_id)) {
    const auto& e = r.registry.get(r.model_id);
    model["version"] = e.version;
    model["state"] = std::string(to_string(e.state));
    model["refinement-count"] = e.refinements;
  } else {
    model["version"] = nullptr;
    model["state"] = nullptr;
  }
  if (r.live) {
    model["kind"] = std::string(to_string(r.live->kind));
    model["origin"] = std::string(to_string(r.live->origin));
    model["live-version"] = r.live->version;
    model["parameters"] = to_json(r.live->parameters);
  }
  model["hyperparams"] = hp_json(r.chosen);
  model["validation"] = r.val_metrics ? to_json(*r.val_metrics) : json(nullptr);
  model["test"] = r.test_metrics ? to_json(*r.test_metrics) : json(nullptr);
  model["baseline-test-mse"] = opt(r.baseline_test_mse);
  model["oracle-test-mse"] = opt(r.oracle_test_mse);
  model["holdout-mse"] = opt(r.holdout_mse);
  model["pre-shift-mse"] = opt(r.pre_shift_mse);
  if (r.live && r.split && r.live->feature_schema == r.split->test.feature_names && r.split->test.size() > 0) {
    json fi = json::array();
    for (const auto& f : feature_importance(r.live->kind, r.live->parameters, r.split->test))
      fi.push_back({{"feature", f.name}, {"importance", f.importance}});
    model["feature-importance"] = fi;
  }
  j["model"] = model;

  j["training-ticks"] = r.training_ticks;
  j["inference-ticks"] = r.inference_ticks;
  j["cost"] = r.cost;
  j["resource-requirements"] = r.resource_requirements;
  j["time-to-detection"] = opt(r.time_to_detection);
  j["time-to-resolution"] = opt(r.time_to_resolution);
  j["refinement-count"] = r.refinements;
  j["signaling"] = to_json(r.signaling);

  if (r.search) {
    std::size_t failed = 0;
    for (const auto& t : r.search->trials) failed += t.ok ? 0 : 1;
    j["search"] = {{"trials", r.search->trials.size()},
                   {"failed-trials", failed},
                   {"best-index", r.search->best_index},
                   {"total-train-ticks", r.search->total_train_ticks}};
  }
  if (r.exploration) j["exploration"] = to_json(*r.exploration);
  if (r.detection) {
    j["poisoning"] = {{"injected", r.poisoned},
                      {"rejected", r.detection->rejected},
                      {"true-positives", r.detection->true_positives},
                      {"precision", opt(r.detection->precision)},
                      {"recall", opt(r.detection->recall)}};
  }
  if (r.failover) {
    const auto& f = *r.failover;
    json cks = json::array();
    for (const auto& [t, _] : f.checkpoints) cks.push_back(t);
    j["failover"] = {{"failed", f.failed},
                     {"fail-tick", c.harness.failover ? json(c.harness.failover->fail_tick) : json(nullptr)},
                     {"detected-at", opt(f.detected_at)},
                     {"downtime", opt(f.downtime)},
                     {"promoted", f.promoted ? json(f.promoted->str()) : json(nullptr)},
                     {"checkpoint-ticks", cks},
                     {"single-point-failure", f.single_point_failure},
                     {"restored-equals-checkpoint",
                      r.restored_equals_checkpoint ? json(*r.restored_equals_checkpoint) : json(nullptr)}};
  }
  j["drift"] = {{"detected-at", opt(r.drift_detected_at)}, {"resolved-at", opt(r.drift_resolved_at)}};
  j["scheduler"] = to_json(r.schedule);
  if (!r.rounds.empty()) {
    json rounds = json::array();
    for (const auto& ri : r.rounds)
      rounds.push_back({{"round", ri.round}, {"aggregated-at", ri.aggregated_at}, {"holdout-mse", opt(ri.holdout_mse)}});
    j["rounds"] = rounds;
  }
  j["registry"] = to_json(r.registry);
  j["events"] = r.sim ? r.sim->log().size() : 0;
  return j;
}

std::vector<std::pair<std::string, std::string>> metrics_row(const RunResult& r) {
  auto num = [](const json& v) -> std::string {
    if (v.is_null()) return "";
    if (v.is_number_float()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
      return buf;
    }
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  const auto& j = r.report.is_null() ? to_json(r) : r.report;
  std::vector<std::pair<std::string, std::string>> row;
  row.emplace_back("scenario", num(j["scenario"]));
  row.emplace_back("mode", num(j["mode"]));
  row.emplace_back("seed", num(j["seed"]));
  row.emplace_back("status", num(j["status"]));
  row.emplace_back("model-version", num(j["model"]["version"]));
  row.emplace_back("model-state", num(j["model"]["state"]));
  row.emplace_back("training-time", num(j["training-ticks"]));
  row.emplace_back("inference-time", num(j["inference-ticks"]));
  row.emplace_back("cost", num(j["cost"]));
  row.emplace_back("resource-requirements", num(j["resource-requirements"]));
  row.emplace_back("time-to-detection", num(j["time-to-detection"]));
  row.emplace_back("time-to-resolution", num(j["time-to-resolution"]));
  row.emplace_back("refinement-count", num(j["refinement-count"]));
  auto metric = [&](const char* part, const char* key) {
    const auto& m = j["model"][part];
    return m.is_null() ? std::string() : num(m[key]);
  };
  row.emplace_back("val-mse", metric("validation", "mse"));
  row.emplace_back("test-mse", metric("test", "mse"));
  row.emplace_back("test-accuracy", metric("test", "accuracy"));
  row.emplace_back("holdout-mse", num(j["model"]["holdout-mse"]));
  row.emplace_back("nf-delay-p95", num(j["scheduler"]["nf-delay-p95"]));
  row.emplace_back("raw-bytes", std::to_string(r.signaling.raw_bytes));
  row.emplace_back("model-bytes", std::to_string(r.signaling.model_bytes));
  row.emplace_back("termination-bytes", std::to_string(r.signaling.termination_bytes));
  row.emplace_back("termination-raw-bytes", std::to_string(r.signaling.termination_raw_bytes));
  for (auto iface : kAllInterfaces) {
    MeterReading t;
    for (const auto& s : r.signaling.rows)
      if (s.iface == iface) t = s.total();
    row.emplace_back("bytes:" + std::string(to_string(iface)), std::to_string(t.bytes));
    row.emplace_back("messages:" + std::string(to_string(iface)), std::to_string(t.messages));
  }
  return row;
}

void write_metrics_csv(std::ostream& out, const std::vector<std::vector<std::pair<std::string, std::string>>>& rows) {
  if (rows.empty()) return;
  for (std::size_t i = 0; i < rows.front().size(); ++i) out << (i ? "," : "") << rows.front()[i].first;
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i].second;
    out << "\n";
  }
}

}  // namespace smo
