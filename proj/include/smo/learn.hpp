#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "smo/pipeline.hpp"

namespace smo {

enum class ModelKind { LinearSgd, RidgeClosedForm, LogisticSgd, DecisionStump };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);
bool is_classifier(ModelKind kind);
bool is_sgd(ModelKind kind);

struct HyperParams {
  double learning_rate = 0.01;
  int epochs = 10;
  int batch_size = 1;
  double l2_lambda = 0.0;
  int stump_depth = 1;
  double threshold = 0.5;

  bool operator==(const HyperParams&) const = default;
};

void validate_hyperparams(const HyperParams& hp, const std::string& path = "hyperparams");

/// Predicts `left` when x[feature] <= split.
struct Stump {
  std::size_t feature = 0;
  double split = 0.0;
  double left = 0.0;
  double right = 0.0;

  bool operator==(const Stump&) const = default;
};

struct ModelParameters {
  std::vector<double> weights;
  double bias = 0.0;
  std::optional<Stump> stump;

  std::size_t width() const { return weights.size(); }
  bool operator==(const ModelParameters&) const = default;
};

ModelParameters zero_parameters(ModelKind kind, std::size_t width);

/// Scalar count used to size model messages.
std::size_t parameter_count(ModelKind kind, const ModelParameters& p);

nlohmann::json to_json(const ModelParameters& p);
ModelParameters model_parameters_from_json(const nlohmann::json& j);

/// Linear score, logistic probability or stump output.
double predict(ModelKind kind, const ModelParameters& p, const std::vector<double>& x);

/// Per-sample objective: squared error or cross-entropy, plus lambda * |w|^2.
double sample_loss(ModelKind kind, const ModelParameters& p, const std::vector<double>& x, double y, double lambda);

struct Gradient {
  std::vector<double> weights;
  double bias = 0.0;
};

/// Analytic gradient of sample_loss.
Gradient sample_gradient(ModelKind kind, const ModelParameters& p, const std::vector<double>& x, double y,
                         double lambda);

/// One SGD step on a single sample. Throws Error(NonFiniteUpdate) when any
/// parameter leaves the finite range.
ModelParameters sgd_step(ModelKind kind, ModelParameters p, const std::vector<double>& x, double y, double eta,
                         double lambda);

/// sgd_step per sample in arrival order.
ModelParameters incremental_update(ModelKind kind, ModelParameters p, const Dataset& samples, double eta,
                                   double lambda);

/// Simulated cost: ticks = ceil(records * ticks_per_record).
struct CostModel {
  double train_ticks_per_record = 0.01;
  double inference_ticks_per_record = 0.001;

  Tick train_ticks(std::size_t records) const;
  Tick inference_ticks(std::size_t records) const;
};

struct EvalMetrics {
  double mse = 0.0;
  double rmse = 0.0;
  /// Agreement of thresholded predictions with thresholded actuals.
  double accuracy = 0.0;
  std::size_t samples = 0;
  Tick train_ticks = 0;
  Tick inference_ticks = 0;

  bool operator==(const EvalMetrics&) const = default;
};

nlohmann::json to_json(const EvalMetrics& m);
EvalMetrics eval_metrics_from_json(const nlohmann::json& j);

/// Throws Error(EmptyEvalSet) on an empty partition.
EvalMetrics evaluate(ModelKind kind, const ModelParameters& p, const Dataset& data, double threshold = 0.5,
                     const CostModel& cost = {});

struct FitResult {
  ModelParameters params;
  std::size_t records_processed = 0;
};

/// Trains on `data` alone. SGD kinds start from `init` when given (warm start).
/// Throws Error(EmptyTrainSet), Error(SingularSystem), Error(NonFiniteUpdate).
FitResult fit(ModelKind kind, const Dataset& data, const HyperParams& hp, std::uint64_t seed,
              const ModelParameters* init = nullptr);

struct TrainResult {
  ModelParameters params;
  /// Measured on the validation partition.
  EvalMetrics metrics;
  std::size_t records_processed = 0;
};

TrainResult train(ModelKind kind, const SplitDataset& split, const HyperParams& hp, std::uint64_t seed,
                  const CostModel& cost = {});

/// Solves (X'X + lambda I) w = X'y with an unregularized bias column.
/// Throws Error(SingularSystem) when a pivot falls below 1e-10.
ModelParameters ridge_closed_form(const Dataset& data, double lambda);

struct SearchSpec {
  enum class Mode { Grid, Random };
  Mode mode = Mode::Grid;
  std::vector<double> learning_rates{0.01};
  std::vector<int> epochs{10};
  std::vector<int> batch_sizes{1};
  std::vector<double> l2_lambdas{0.0};
  /// Random mode: learning rate is log-uniform, the rest uniform.
  std::pair<double, double> learning_rate_range{1e-3, 1e-1};
  std::pair<int, int> epochs_range{1, 50};
  std::pair<int, int> batch_size_range{1, 32};
  std::pair<double, double> l2_lambda_range{0.0, 0.0};
  int budget = 1;
  std::uint64_t seed = 0;
};

/// Candidate combinations in trial order. Grid order is learning rate, then
/// epochs, batch size and lambda, the last varying fastest.
/// Throws Error(EmptySearchSpace).
std::vector<HyperParams> search_candidates(const SearchSpec& spec, const HyperParams& base);

struct Trial {
  std::size_t index = 0;
  HyperParams hp;
  bool ok = false;
  std::string failure;
  TrainResult result;
};

struct SearchResult {
  std::size_t best_index = 0;
  HyperParams best;
  TrainResult best_result;
  std::vector<Trial> trials;
  /// Ticks spent over all trials.
  Tick total_train_ticks = 0;
};

/// Every candidate trained with `seed`; best = minimal val MSE (regression) or
/// maximal val accuracy (classification), earliest trial on ties. Failed
/// trials are kept in the list. Throws Error(NonFiniteUpdate) if all fail.
SearchResult search(ModelKind kind, const SplitDataset& split, const SearchSpec& spec, const HyperParams& base,
                    std::uint64_t seed, const CostModel& cost = {});

void write_trials_csv(std::ostream& out, const SearchResult& result);

struct FeatureImportance {
  std::size_t index = 0;
  std::string name;
  double importance = 0.0;
};

/// |w_j| * population sd of column j over `data`; stumps give their feature 1.
/// Sorted descending, ties by index. Throws Error(SchemaMismatch) on width mismatch.
std::vector<FeatureImportance> feature_importance(ModelKind kind, const ModelParameters& p, const Dataset& data);

/// Weighted parameter average; weights need not be normalized.
/// Throws Error(UnsupportedKind) for stumps.
ModelParameters weighted_average(ModelKind kind, const std::vector<std::pair<ModelParameters, double>>& members);

}  // namespace smo
