#include "smo/lifecycle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include "smo/error.hpp"

namespace smo {

namespace {

constexpr LifecycleState kAllStates[] = {LifecycleState::Collected, LifecycleState::Preprocessed,
                                         LifecycleState::Trained,   LifecycleState::Validated,
                                         LifecycleState::Deployed,  LifecycleState::Monitored,
                                         LifecycleState::Refining,  LifecycleState::Retired};

}  // namespace

std::string_view to_string(LifecycleState s) {
  switch (s) {
    case LifecycleState::Collected: return "Collected";
    case LifecycleState::Preprocessed: return "Preprocessed";
    case LifecycleState::Trained: return "Trained";
    case LifecycleState::Validated: return "Validated";
    case LifecycleState::Deployed: return "Deployed";
    case LifecycleState::Monitored: return "Monitored";
    case LifecycleState::Refining: return "Refining";
    case LifecycleState::Retired: return "Retired";
  }
  return "?";
}

LifecycleState parse_lifecycle_state(std::string_view text) {
  for (auto s : kAllStates)
    if (to_string(s) == text) return s;
  throw Error(Errc::InvalidArtifact, "unknown lifecycle state '" + std::string(text) + "'");
}

bool transition_allowed(LifecycleState from, LifecycleState to) {
  using S = LifecycleState;
  switch (from) {
    case S::Collected: return to == S::Preprocessed;
    case S::Preprocessed: return to == S::Trained;
    case S::Trained: return to == S::Validated;
    case S::Validated: return to == S::Deployed || to == S::Retired;
    case S::Deployed: return to == S::Monitored;
    case S::Monitored: return to == S::Refining || to == S::Retired;
    case S::Refining: return to == S::Trained;
    case S::Retired: return false;
  }
  return false;
}

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::Internal: return "internal";
    case Origin::External: return "external";
    case Origin::Aggregated: return "aggregated";
  }
  return "?";
}

Origin parse_origin(std::string_view text) {
  for (auto o : {Origin::Internal, Origin::External, Origin::Aggregated})
    if (to_string(o) == text) return o;
  throw Error(Errc::InvalidArtifact, "unknown origin '" + std::string(text) + "'");
}

nlohmann::json to_json(const ModelArtifact& a) {
  return {{"kind", to_string(a.kind)},
          {"parameters", to_json(a.parameters)},
          {"feature-schema", a.feature_schema},
          {"scaling-parameters", to_json(a.scaling)},
          {"metrics", to_json(a.metrics)},
          {"origin", to_string(a.origin)},
          {"version", a.version},
          {"created-tick", a.created_tick},
          {"packaged", a.packaged}};
}

ModelArtifact artifact_from_json(const nlohmann::json& j) {
  try {
    ModelArtifact a;
    try {
      a.kind = parse_model_kind(j.at("kind").get<std::string>());
    } catch (const Error& e) {
      throw Error(Errc::InvalidArtifact, e.what());
    }
    a.parameters = model_parameters_from_json(j.at("parameters"));
    a.feature_schema = j.at("feature-schema").get<std::vector<std::string>>();
    if (j.contains("scaling-parameters")) a.scaling = transform_params_from_json(j.at("scaling-parameters"));
    if (j.contains("metrics")) a.metrics = eval_metrics_from_json(j.at("metrics"));
    a.origin = parse_origin(j.value("origin", std::string("external")));
    a.version = j.value("version", 1);
    a.created_tick = j.value("created-tick", Tick{0});
    a.packaged = j.value("packaged", false);
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArtifact, std::string("malformed artifact: ") + e.what());
  }
}

ModelArtifact load_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArtifact, std::string("artifact is not JSON: ") + e.what());
  }
  return artifact_from_json(j);
}

void validate_artifact(const ModelArtifact& a) {
  const auto width = a.parameters.width();
  if (a.feature_schema.size() != width)
    throw Error(Errc::InvalidArtifact, "schema width " + std::to_string(a.feature_schema.size()) +
                                           " differs from parameter width " + std::to_string(width));
  if (!a.scaling.empty() && a.scaling.names() != a.feature_schema)
    throw Error(Errc::InvalidArtifact, "scaling parameters do not match the feature schema");
  bool finite = std::isfinite(a.parameters.bias);
  for (double w : a.parameters.weights) finite = finite && std::isfinite(w);
  if (!finite) throw Error(Errc::InvalidArtifact, "non-finite parameters");
  if (a.kind == ModelKind::DecisionStump) {
    if (!a.parameters.stump || a.parameters.stump->feature >= width)
      throw Error(Errc::InvalidArtifact, "stump feature out of range");
  }
}

std::int64_t artifact_bytes(const ModelArtifact& a, const RecordSizes& sizes, double package_inflation) {
  const double raw = static_cast<double>(parameter_count(a.kind, a.parameters) * sizes.parameter_bytes);
  return static_cast<std::int64_t>(std::llround(a.packaged ? raw * package_inflation : raw));
}

double infer(const ModelArtifact& a, const std::map<std::string, FieldValue>& fields) {
  return predict(a.kind, a.parameters, a.scaling.apply(fields));
}

bool history_is_legal(const RegistryEntry& e) {
  auto at = e.initial;
  for (const auto& t : e.history) {
    if (t.from != at || !transition_allowed(t.from, t.to)) return false;
    at = t.to;
  }
  return at == e.state;
}

RegistryEntry& Registry::open(const std::string& model_id, Tick tick, RegistryProvenance provenance) {
  (void)tick;
  if (entries_.count(model_id)) throw Error(Errc::ConfigError, "model id '" + model_id + "' already registered");
  RegistryEntry e;
  e.model_id = model_id;
  e.provenance = std::move(provenance);
  return entries_[model_id] = std::move(e);
}

RegistryEntry& Registry::mut(const std::string& model_id) {
  const auto it = entries_.find(model_id);
  if (it == entries_.end()) throw Error(Errc::ConfigError, "unknown model id '" + model_id + "'");
  return it->second;
}

const RegistryEntry& Registry::get(const std::string& model_id) const {
  const auto it = entries_.find(model_id);
  if (it == entries_.end()) throw Error(Errc::ConfigError, "unknown model id '" + model_id + "'");
  return it->second;
}

RegistryEntry& Registry::transition(const std::string& model_id, LifecycleState to, Tick tick) {
  auto& e = mut(model_id);
  if (!transition_allowed(e.state, to))
    throw Error(Errc::IllegalTransition, model_id + ": " + std::string(to_string(e.state)) + " -> " +
                                             std::string(to_string(to)));
  e.history.push_back({tick, e.state, to});
  e.state = to;
  return e;
}

RegistryEntry& Registry::register_internal(const std::string& model_id, ModelArtifact artifact, Tick tick) {
  validate_artifact(artifact);
  auto& e = mut(model_id);
  transition(model_id, LifecycleState::Trained, tick);
  if (e.artifact) {
    e.archive.push_back(std::move(*e.artifact));
    ++e.version;
  }
  artifact.version = e.version;
  e.artifact = std::move(artifact);
  return e;
}

RegistryEntry& Registry::register_external(const std::string& model_id, ModelArtifact artifact,
                                           const Dataset& local, double max_mse, Tick tick,
                                           RegistryProvenance provenance) {
  (void)tick;
  validate_artifact(artifact);
  if (entries_.count(model_id)) throw Error(Errc::ConfigError, "model id '" + model_id + "' already registered");
  if (local.feature_names != artifact.feature_schema)
    throw Error(Errc::InvalidArtifact, "artifact schema differs from the local feature schema");
  const auto m = evaluate(artifact.kind, artifact.parameters, local);
  if (!(m.mse <= max_mse))
    throw Error(Errc::InvalidArtifact,
                "local validation mse " + std::to_string(m.mse) + " exceeds " + std::to_string(max_mse));
  artifact.origin = Origin::External;
  artifact.metrics = m;
  RegistryEntry e;
  e.model_id = model_id;
  e.version = artifact.version > 0 ? artifact.version : 1;
  artifact.version = e.version;
  e.artifact = std::move(artifact);
  e.initial = e.state = LifecycleState::Validated;
  e.provenance = std::move(provenance);
  return entries_[model_id] = std::move(e);
}

RegistryEntry& Registry::begin_refinement(const std::string& model_id, int max_iterations, Tick tick) {
  auto& e = mut(model_id);
  if (e.state != LifecycleState::Monitored)
    throw Error(Errc::IllegalTransition, model_id + ": refinement needs a Monitored model");
  if (e.refinements >= max_iterations) {
    transition(model_id, LifecycleState::Retired, tick);
    for (auto it = deployments_.begin(); it != deployments_.end();)
      it = it->first.first == model_id ? deployments_.erase(it) : std::next(it);
    throw Error(Errc::RefinementBudgetExhausted,
                model_id + ": refinement budget of " + std::to_string(max_iterations) + " spent");
  }
  transition(model_id, LifecycleState::Refining, tick);
  ++e.refinements;
  return e;
}

void Registry::record_deployment(const std::string& model_id, const ComponentId& target, int version) {
  deployments_[{model_id, target}] = version;
}

std::optional<int> Registry::deployed_version(const std::string& model_id, const ComponentId& target) const {
  const auto it = deployments_.find({model_id, target});
  if (it == deployments_.end()) return std::nullopt;
  return it->second;
}

nlohmann::json to_json(const Registry& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [id, e] : r.entries()) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& t : e.history)
      history.push_back({{"tick", t.tick}, {"from", to_string(t.from)}, {"to", to_string(t.to)}});
    nlohmann::json archive = nlohmann::json::array();
    for (const auto& a : e.archive) archive.push_back(to_json(a));
    entries.push_back({{"model-id", e.model_id},
                       {"version", e.version},
                       {"artifact", e.artifact ? to_json(*e.artifact) : nlohmann::json(nullptr)},
                       {"archive", archive},
                       {"initial", to_string(e.initial)},
                       {"state", to_string(e.state)},
                       {"provenance",
                        {{"scenario", e.provenance.scenario},
                         {"dataset-hash", e.provenance.dataset_hash},
                         {"search-hash", e.provenance.search_hash}}},
                       {"history", history},
                       {"refinements", e.refinements}});
  }
  nlohmann::json deployments = nlohmann::json::array();
  for (const auto& [key, version] : r.deployments())
    deployments.push_back({{"model-id", key.first}, {"target", key.second.str()}, {"version", version}});
  return {{"entries", entries}, {"deployments", deployments}};
}

Registry registry_from_json(const nlohmann::json& j) {
  Registry r;
  try {
    for (const auto& ej : j.at("entries")) {
      RegistryEntry e;
      e.model_id = ej.at("model-id").get<std::string>();
      e.version = ej.at("version").get<int>();
      if (!ej.at("artifact").is_null()) e.artifact = artifact_from_json(ej.at("artifact"));
      for (const auto& a : ej.at("archive")) e.archive.push_back(artifact_from_json(a));
      e.initial = parse_lifecycle_state(ej.at("initial").get<std::string>());
      e.state = parse_lifecycle_state(ej.at("state").get<std::string>());
      const auto& p = ej.at("provenance");
      e.provenance = {p.at("scenario").get<std::string>(), p.at("dataset-hash").get<std::uint64_t>(),
                      p.at("search-hash").get<std::uint64_t>()};
      for (const auto& t : ej.at("history"))
        e.history.push_back({t.at("tick").get<Tick>(), parse_lifecycle_state(t.at("from").get<std::string>()),
                             parse_lifecycle_state(t.at("to").get<std::string>())});
      e.refinements = ej.at("refinements").get<int>();
      if (!history_is_legal(e)) throw Error(Errc::InvalidArtifact, "checkpoint history is not a legal path");
      if (r.entries_.count(e.model_id)) throw Error(Errc::InvalidArtifact, "duplicate model id in registry");
      const auto id = e.model_id;
      r.entries_[id] = std::move(e);
    }
    for (const auto& dj : j.at("deployments"))
      r.record_deployment(dj.at("model-id").get<std::string>(), ComponentId::parse(dj.at("target").get<std::string>()),
                          dj.at("version").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArtifact, std::string("malformed registry: ") + e.what());
  }
  return r;
}

void deploy(Simulator& sim, Registry& registry, const std::string& model_id, const ComponentId& from,
            const std::vector<ComponentId>& targets, std::int64_t bytes, std::function<void()> on_live) {
  const auto& entry = registry.get(model_id);
  if (entry.state != LifecycleState::Validated)
    throw Error(Errc::IllegalTransition,
                model_id + ": deploy needs a Validated model, state is " + std::string(to_string(entry.state)));
  if (targets.empty()) throw Error(Errc::ConfigError, "no deployment targets", "lifecycle.targets");
  for (const auto& t : targets) {
    if (!sim.topology().contains(t))
      throw Error(Errc::ConfigError, "deployment target " + t.str() + " is not in the topology", "lifecycle.targets");
    if (sim.failed(t)) throw Error(Errc::ComponentDown, "deployment target " + t.str() + " is down");
  }
  registry.transition(model_id, LifecycleState::Deployed, sim.now());
  const int version = entry.version;
  auto remaining = std::make_shared<std::size_t>(targets.size());
  for (const auto& t : targets) {
    sim.transfer(from, t, PayloadKind::ModelArtifact, bytes, entry.artifact,
                 [&sim, &registry, model_id, t, version, remaining, on_live](const InterfaceMessage&) {
                   // A restored registry may no longer expect this copy.
                   if (!registry.contains(model_id)) return;
                   const auto& e = registry.get(model_id);
                   if (e.version != version || e.state != LifecycleState::Deployed) return;
                   registry.record_deployment(model_id, t, version);
                   if (--*remaining == 0) {
                     registry.transition(model_id, LifecycleState::Monitored, sim.now());
                     if (on_live) on_live();
                   }
                 },
                 "deploy " + model_id + " v" + std::to_string(version));
  }
}

MonitorWindow::MonitorWindow(std::size_t capacity, double baseline_mse, double drift_factor, std::size_t min_samples)
    : capacity_(capacity), baseline_(baseline_mse), factor_(drift_factor), min_samples_(min_samples) {
  if (capacity_ == 0) throw Error(Errc::ConfigError, "monitor capacity must be >= 1", "lifecycle.monitor.capacity");
  if (!(factor_ > 1.0)) throw Error(Errc::ConfigError, "drift factor must exceed 1", "lifecycle.monitor.drift-factor");
}

void MonitorWindow::ingest(double prediction, double actual, Tick tick) {
  if (buffer_.size() == capacity_) {
    const auto& old = buffer_.front();
    sum_sq_ -= (old.prediction - old.actual) * (old.prediction - old.actual);
    buffer_.pop_front();
  }
  buffer_.push_back({prediction, actual, tick});
  sum_sq_ += (prediction - actual) * (prediction - actual);
  if (sum_sq_ < 0.0) sum_sq_ = 0.0;
}

double MonitorWindow::mse() const {
  return buffer_.empty() ? 0.0 : sum_sq_ / static_cast<double>(buffer_.size());
}

double MonitorWindow::recomputed_mse() const {
  if (buffer_.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : buffer_) s += (m.prediction - m.actual) * (m.prediction - m.actual);
  return s / static_cast<double>(buffer_.size());
}

bool MonitorWindow::drift() const { return buffer_.size() >= min_samples_ && mse() > baseline_ * factor_; }

void MonitorWindow::reset(double baseline_mse) {
  buffer_.clear();
  sum_sq_ = 0.0;
  baseline_ = baseline_mse;
}

}  // namespace smo
