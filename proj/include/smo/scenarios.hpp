#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smo/config.hpp"
#include "smo/harness.hpp"
#include "smo/learn.hpp"
#include "smo/lifecycle.hpp"
#include "smo/pipeline.hpp"
#include "smo/topology.hpp"

namespace smo {

/// A domain-level model as uploaded by one MDA system.
struct DomainModel {
  ComponentId owner;
  ModelParameters parameters;
  /// n_k >= 1.
  std::size_t samples = 1;
  int round = 0;
  std::vector<std::string> feature_schema;
};

/// Uniform: elementwise mean. SampleCount: sum of (n_k / sum n) * w_k.
/// Members are summed in owner order, so the result is permutation invariant.
/// Throws Error(UnsupportedKind) for stumps, Error(SchemaMismatch) when
/// schemas or widths differ, Error(InsufficientData) for an empty list.
ModelParameters aggregate(ModelKind kind, std::vector<DomainModel> models, Aggregation weighting);

struct RoundInfo {
  int round = 0;
  Tick aggregated_at = 0;
  ModelParameters global;
  std::optional<double> holdout_mse;
};

struct RunResult {
  ScenarioConfig config;
  /// For inspection only: queued closures refer to the finished run.
  std::unique_ptr<Simulator> sim;
  Registry registry;
  std::string model_id = "global";

  /// Simulation-level failure (exit code 1), e.g. "SinglePointFailure".
  std::optional<std::string> failure;
  /// Scenario A: the import was refused.
  std::optional<std::string> rejection;

  /// Latest artifact that reached every target.
  std::optional<ModelArtifact> live;
  /// Transformed dataset before splitting.
  std::optional<Dataset> dataset;
  std::optional<SplitDataset> split;
  std::optional<TransformParams> scaling;
  std::optional<ExplorationReport> exploration;
  std::optional<SearchResult> search;
  HyperParams chosen;
  std::optional<EvalMetrics> val_metrics;
  std::optional<EvalMetrics> test_metrics;
  std::optional<double> baseline_test_mse;
  /// Closed-form ridge (lambda 1e-8) on the same transformed split.
  std::optional<double> oracle_test_mse;
  std::optional<double> holdout_mse;
  std::optional<double> pre_shift_mse;

  Tick training_ticks = 0;
  Tick inference_ticks = 0;

  std::size_t poisoned = 0;
  std::optional<DetectionScore> detection;

  std::optional<FailoverOutcome> failover;
  /// Registry right after promotion equals the last checkpoint taken.
  std::optional<bool> restored_equals_checkpoint;

  std::optional<Tick> drift_detected_at;
  std::optional<Tick> drift_resolved_at;
  std::optional<Tick> time_to_detection;
  std::optional<Tick> time_to_resolution;
  int refinements = 0;

  std::vector<RoundInfo> rounds;
  ScheduleResult schedule;
  /// Domain-local training ticks (scenario C), counted into cost.
  Tick domain_train_ticks = 0;
  std::int64_t cost = 0;
  std::int64_t resource_requirements = 0;

  SignalingReport signaling;
  nlohmann::json report;
};

/// Replaces the seed and every seed derived from it.
ScenarioConfig with_seed(ScenarioConfig config, std::uint64_t seed);

/// Runs the configured scenario to the horizon. Configuration problems
/// surface as Error before any simulated work; simulated failures are
/// recorded in RunResult::failure.
RunResult run_scenario(const ScenarioConfig& config);
RunResult run_scenario_a(const ScenarioConfig& config);
RunResult run_scenario_b(const ScenarioConfig& config);
RunResult run_scenario_c(const ScenarioConfig& config);

/// RunReport document.
nlohmann::json to_json(const RunResult& r);

/// One metrics row: training-time, inference-time, cost, resource-requirements,
/// time-to-detection, time-to-resolution, model metrics and per-interface bytes.
std::vector<std::pair<std::string, std::string>> metrics_row(const RunResult& r);
void write_metrics_csv(std::ostream& out, const std::vector<std::vector<std::pair<std::string, std::string>>>& rows);

}  // namespace smo
