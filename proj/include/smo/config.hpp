#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smo/datagen.hpp"
#include "smo/harness.hpp"
#include "smo/learn.hpp"
#include "smo/pipeline.hpp"
#include "smo/topology.hpp"

namespace smo {

enum class ScenarioKind { A, B, C };
enum class ScenarioMode { None, ImportModel, ImportData, ShareData, ShareModels };
enum class Aggregation { Uniform, SampleCount };

std::string_view to_string(ScenarioKind k);
std::string_view to_string(ScenarioMode m);

struct MonitorConfig {
  /// Ticks between inference rounds; 0 disables monitoring.
  Tick period = 0;
  std::size_t samples_per_period = 20;
  std::size_t capacity = 100;
  double drift_factor = 1.5;
  std::size_t min_samples = 50;
};

struct RefineConfig {
  int max_iterations = 1;
  /// SGD kinds refine with incremental passes; otherwise a full retrain.
  bool incremental = true;
  int epochs = 1;
  /// Retrain every `periodic` ticks after going live; 0 disables.
  Tick periodic = 0;
};

struct LifecycleConfig {
  std::vector<ComponentId> targets;
  double validation_max_mse = 1e300;
  bool packaged = false;
  double package_inflation = 1.0;
  MonitorConfig monitor;
  RefineConfig refine;
};

struct DriftConfig {
  std::optional<Tick> tick;
  /// Replacement coefficients per source owner.
  std::map<ComponentId, std::vector<double>> coefficients;
};

struct HarnessConfig {
  std::optional<PoisonSpec> poison;
  std::optional<FilterSpec> filter;
  std::optional<FailurePlan> failover;
  PrivacySpec privacy;
  /// NfWorkload jobs competing with training; arrival ticks are absolute.
  SchedulerSpec scheduler;
  int retraining_priority = 0;
  std::int64_t training_demand = 1;
};

struct ScenarioAConfig {
  std::string artifact;
  std::string data;
  /// Local validation gate for imported models.
  double threshold = 1e300;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::B;
  ScenarioMode mode = ScenarioMode::None;
  int rounds = 1;
  Aggregation aggregation = Aggregation::SampleCount;
  bool online_training = false;
  std::uint64_t seed = 0;
  Tick horizon = 200;

  TopologyConfig topology;
  RecordSizes sizes;
  std::vector<SourceSpec> sources;

  int batch_rounds = 1;
  Tick round_interval = 1;
  Tick window = 10;

  CanonicalSchema canonical;
  TransformSpec transform;
  SplitSpec split;

  ModelKind model_kind = ModelKind::LinearSgd;
  HyperParams hp;
  std::optional<SearchSpec> search;
  CostModel cost;

  LifecycleConfig lifecycle;
  DriftConfig drift;
  std::size_t holdout_size = 0;
  HarnessConfig harness;
  ScenarioAConfig a;

  /// Directory relative file paths resolve against.
  std::string base_dir;
  /// config_hash of the source document.
  std::uint64_t digest = 0;
};

/// Throws Error(ConfigError) naming the offending field path. Scenario-level
/// checks that need the whole document (topology wiring, source owners,
/// coefficient widths, mode/kind consistency) run here too.
ScenarioConfig parse_config(const nlohmann::json& doc, const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);

/// Deterministic hash of the canonical config document.
std::uint64_t config_hash(const nlohmann::json& doc);

}  // namespace smo
