#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "smo/learn.hpp"
#include "smo/pipeline.hpp"
#include "smo/topology.hpp"

namespace smo {

enum class LifecycleState { Collected, Preprocessed, Trained, Validated, Deployed, Monitored, Refining, Retired };

std::string_view to_string(LifecycleState s);
LifecycleState parse_lifecycle_state(std::string_view text);
bool transition_allowed(LifecycleState from, LifecycleState to);

enum class Origin { Internal, External, Aggregated };

std::string_view to_string(Origin o);
Origin parse_origin(std::string_view text);

struct ModelArtifact {
  ModelKind kind = ModelKind::LinearSgd;
  ModelParameters parameters;
  std::vector<std::string> feature_schema;
  TransformParams scaling;
  EvalMetrics metrics;
  Origin origin = Origin::Internal;
  int version = 0;
  Tick created_tick = 0;
  bool packaged = false;

  bool operator==(const ModelArtifact&) const = default;
};

nlohmann::json to_json(const ModelArtifact& a);
/// Throws Error(InvalidArtifact) on malformed documents.
ModelArtifact artifact_from_json(const nlohmann::json& j);
ModelArtifact load_artifact(const std::string& path);

/// Structural checks: parameter width = schema width = scaling width (when
/// scaling is present), finite parameters, stump feature in range.
/// Throws Error(InvalidArtifact).
void validate_artifact(const ModelArtifact& a);

/// parameter_count * parameter_bytes, inflated when packaged.
std::int64_t artifact_bytes(const ModelArtifact& a, const RecordSizes& sizes, double package_inflation);

/// Scales raw fields with the stored recipe, then predicts.
double infer(const ModelArtifact& a, const std::map<std::string, FieldValue>& fields);

struct Transition {
  Tick tick = 0;
  LifecycleState from = LifecycleState::Collected;
  LifecycleState to = LifecycleState::Collected;

  bool operator==(const Transition&) const = default;
};

struct RegistryProvenance {
  std::string scenario;
  std::uint64_t dataset_hash = 0;
  std::uint64_t search_hash = 0;

  bool operator==(const RegistryProvenance&) const = default;
};

struct RegistryEntry {
  std::string model_id;
  int version = 1;
  std::optional<ModelArtifact> artifact;
  /// Superseded versions, oldest first.
  std::vector<ModelArtifact> archive;
  LifecycleState initial = LifecycleState::Collected;
  LifecycleState state = LifecycleState::Collected;
  RegistryProvenance provenance;
  std::vector<Transition> history;
  int refinements = 0;

  bool operator==(const RegistryEntry&) const = default;
};

/// True when `history` is a walk in the legal digraph starting at `initial`
/// and ending at `state`.
bool history_is_legal(const RegistryEntry& e);

class Registry {
 public:
  /// New entry in Collected, version 1. Throws Error(ConfigError) on reuse of an id.
  RegistryEntry& open(const std::string& model_id, Tick tick, RegistryProvenance provenance = {});

  /// Throws Error(IllegalTransition) unless (state, to) is a legal edge.
  RegistryEntry& transition(const std::string& model_id, LifecycleState to, Tick tick);

  /// Attaches an internally trained artifact and moves the entry to Trained.
  /// A second artifact (after Refining) bumps the version.
  RegistryEntry& register_internal(const std::string& model_id, ModelArtifact artifact, Tick tick);

  /// Validates an external artifact structurally and on `local` data, then
  /// creates an entry directly in Validated. Throws Error(InvalidArtifact).
  RegistryEntry& register_external(const std::string& model_id, ModelArtifact artifact, const Dataset& local,
                                   double max_mse, Tick tick, RegistryProvenance provenance = {});

  /// Monitored -> Refining, or Monitored -> Retired with
  /// Error(RefinementBudgetExhausted) once `max_iterations` refinements happened.
  RegistryEntry& begin_refinement(const std::string& model_id, int max_iterations, Tick tick);

  /// Records `version` as the one live at `target`, replacing any older one.
  void record_deployment(const std::string& model_id, const ComponentId& target, int version);
  std::optional<int> deployed_version(const std::string& model_id, const ComponentId& target) const;
  const std::map<std::pair<std::string, ComponentId>, int>& deployments() const { return deployments_; }

  bool contains(const std::string& model_id) const { return entries_.count(model_id) > 0; }
  const RegistryEntry& get(const std::string& model_id) const;
  const std::map<std::string, RegistryEntry>& entries() const { return entries_; }

  bool operator==(const Registry&) const = default;

 private:
  friend Registry registry_from_json(const nlohmann::json& j);
  RegistryEntry& mut(const std::string& model_id);

  std::map<std::string, RegistryEntry> entries_;
  std::map<std::pair<std::string, ComponentId>, int> deployments_;
};

nlohmann::json to_json(const Registry& r);
/// Throws Error(InvalidArtifact) on malformed documents or illegal histories.
Registry registry_from_json(const nlohmann::json& j);

/// Sends the artifact of a Validated entry to every target (local hand-off
/// when a target is `from` itself). The entry becomes Deployed at once and
/// Monitored when the last copy arrives, at which point `on_live` fires.
/// Throws Error(IllegalTransition) unless Validated, Error(ComponentDown)
/// when a target is failed, Error(ConfigError) for targets outside the topology.
void deploy(Simulator& sim, Registry& registry, const std::string& model_id, const ComponentId& from,
            const std::vector<ComponentId>& targets, std::int64_t bytes, std::function<void()> on_live = {});

struct MonitorSample {
  double prediction = 0.0;
  double actual = 0.0;
  Tick tick = 0;
};

/// Ring buffer of recent (prediction, actual) pairs with a running squared-error sum.
class MonitorWindow {
 public:
  MonitorWindow(std::size_t capacity, double baseline_mse, double drift_factor, std::size_t min_samples);

  void ingest(double prediction, double actual, Tick tick);
  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  double mse() const;
  /// The same statistic computed from the buffer contents.
  double recomputed_mse() const;
  /// size >= min_samples and mse > baseline * factor.
  bool drift() const;
  const std::deque<MonitorSample>& samples() const { return buffer_; }
  double baseline() const { return baseline_; }
  void reset(double baseline_mse);

 private:
  std::size_t capacity_;
  double baseline_;
  double factor_;
  std::size_t min_samples_;
  std::deque<MonitorSample> buffer_;
  double sum_sq_ = 0.0;
};

}  // namespace smo
