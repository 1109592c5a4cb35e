#include "smo/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "smo/error.hpp"
#include "smo/rng.hpp"

namespace smo {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LinearSgd: return "LinearSgd";
    case ModelKind::RidgeClosedForm: return "RidgeClosedForm";
    case ModelKind::LogisticSgd: return "LogisticSgd";
    case ModelKind::DecisionStump: return "DecisionStump";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::LinearSgd, ModelKind::RidgeClosedForm, ModelKind::LogisticSgd, ModelKind::DecisionStump})
    if (to_string(k) == text) return k;
  throw Error(Errc::ConfigError, "unknown model kind '" + std::string(text) + "'");
}

bool is_classifier(ModelKind kind) { return kind == ModelKind::LogisticSgd || kind == ModelKind::DecisionStump; }

bool is_sgd(ModelKind kind) { return kind == ModelKind::LinearSgd || kind == ModelKind::LogisticSgd; }

void validate_hyperparams(const HyperParams& hp, const std::string& path) {
  if (!(hp.learning_rate > 0.0) || !std::isfinite(hp.learning_rate))
    throw Error(Errc::ConfigError, "learning rate must be > 0", path + ".learning-rate");
  if (hp.epochs < 1) throw Error(Errc::ConfigError, "epochs must be >= 1", path + ".epochs");
  if (hp.batch_size < 1) throw Error(Errc::ConfigError, "batch size must be >= 1", path + ".batch-size");
  if (!(hp.l2_lambda >= 0.0)) throw Error(Errc::ConfigError, "l2 lambda must be >= 0", path + ".l2-lambda");
  if (hp.stump_depth != 1) throw Error(Errc::ConfigError, "only depth-1 stumps are supported", path + ".stump-depth");
  if (!(hp.threshold > 0.0 && hp.threshold < 1.0))
    throw Error(Errc::ConfigError, "threshold must lie in (0,1)", path + ".threshold");
}

ModelParameters zero_parameters(ModelKind kind, std::size_t width) {
  ModelParameters p;
  p.weights.assign(width, 0.0);
  if (kind == ModelKind::DecisionStump) p.stump = Stump{};
  return p;
}

std::size_t parameter_count(ModelKind kind, const ModelParameters& p) {
  return kind == ModelKind::DecisionStump ? 4 : p.width() + 1;
}

nlohmann::json to_json(const ModelParameters& p) {
  nlohmann::json j{{"weights", p.weights}, {"bias", p.bias}};
  if (p.stump)
    j["stump"] = {{"feature", p.stump->feature},
                  {"split", p.stump->split},
                  {"left", p.stump->left},
                  {"right", p.stump->right}};
  return j;
}

ModelParameters model_parameters_from_json(const nlohmann::json& j) {
  ModelParameters p;
  p.weights = j.at("weights").get<std::vector<double>>();
  p.bias = j.at("bias").get<double>();
  if (j.contains("stump")) {
    const auto& s = j.at("stump");
    p.stump = Stump{s.at("feature").get<std::size_t>(), s.at("split").get<double>(), s.at("left").get<double>(),
                    s.at("right").get<double>()};
  }
  return p;
}

namespace {

double dot(const std::vector<double>& w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_width(const ModelParameters& p, const std::vector<double>& x) {
  if (x.size() != p.width())
    throw Error(Errc::SchemaMismatch,
                "sample width " + std::to_string(x.size()) + " differs from model width " + std::to_string(p.width()));
}

void require_finite(const ModelParameters& p) {
  bool ok = std::isfinite(p.bias);
  for (double w : p.weights) ok = ok && std::isfinite(w);
  if (!ok) throw Error(Errc::NonFiniteUpdate, "parameters diverged; learning rate too large?");
}

}  // namespace

double predict(ModelKind kind, const ModelParameters& p, const std::vector<double>& x) {
  check_width(p, x);
  switch (kind) {
    case ModelKind::LinearSgd:
    case ModelKind::RidgeClosedForm:
      return dot(p.weights, x) + p.bias;
    case ModelKind::LogisticSgd:
      return sigmoid(dot(p.weights, x) + p.bias);
    case ModelKind::DecisionStump: {
      if (!p.stump) throw Error(Errc::InvalidArtifact, "stump parameters missing");
      return x.at(p.stump->feature) <= p.stump->split ? p.stump->left : p.stump->right;
    }
  }
  return 0.0;
}

double sample_loss(ModelKind kind, const ModelParameters& p, const std::vector<double>& x, double y, double lambda) {
  check_width(p, x);
  const double reg = lambda * dot(p.weights, p.weights);
  const double z = dot(p.weights, x) + p.bias;
  if (kind == ModelKind::LogisticSgd) {
    // -y log s(z) - (1-y) log(1-s(z)) in overflow-free form.
    return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z))) + reg;
  }
  if (kind == ModelKind::DecisionStump) throw Error(Errc::UnsupportedKind, "stumps have no gradient");
  const double r = z - y;
  return r * r + reg;
}

Gradient sample_gradient(ModelKind kind, const ModelParameters& p, const std::vector<double>& x, double y,
                         double lambda) {
  check_width(p, x);
  if (!is_sgd(kind) && kind != ModelKind::RidgeClosedForm)
    throw Error(Errc::UnsupportedKind, std::string(to_string(kind)) + " has no gradient");
  const double z = dot(p.weights, x) + p.bias;
  const double dz = kind == ModelKind::LogisticSgd ? sigmoid(z) - y : 2.0 * (z - y);
  Gradient g;
  g.weights.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) g.weights[j] = dz * x[j] + 2.0 * lambda * p.weights[j];
  g.bias = dz;
  return g;
}

ModelParameters sgd_step(ModelKind kind, ModelParameters p, const std::vector<double>& x, double y, double eta,
                         double lambda) {
  const auto g = sample_gradient(kind, p, x, y, lambda);
  for (std::size_t j = 0; j < p.weights.size(); ++j) p.weights[j] -= eta * g.weights[j];
  p.bias -= eta * g.bias;
  require_finite(p);
  return p;
}

ModelParameters incremental_update(ModelKind kind, ModelParameters p, const Dataset& samples, double eta,
                                   double lambda) {
  if (!is_sgd(kind)) throw Error(Errc::UnsupportedKind, "incremental updates need an SGD kind");
  for (std::size_t i = 0; i < samples.size(); ++i) p = sgd_step(kind, std::move(p), samples.rows[i], samples.targets[i], eta, lambda);
  return p;
}

namespace {

Tick ceil_ticks(std::size_t records, double per_record) {
  const double t = static_cast<double>(records) * per_record;
  return static_cast<Tick>(std::ceil(t - 1e-9));
}

}  // namespace

Tick CostModel::train_ticks(std::size_t records) const { return ceil_ticks(records, train_ticks_per_record); }

Tick CostModel::inference_ticks(std::size_t records) const { return ceil_ticks(records, inference_ticks_per_record); }

nlohmann::json to_json(const EvalMetrics& m) {
  return {{"mse", m.mse},
          {"rmse", m.rmse},
          {"accuracy", m.accuracy},
          {"samples", m.samples},
          {"train-ticks", m.train_ticks},
          {"inference-ticks", m.inference_ticks}};
}

EvalMetrics eval_metrics_from_json(const nlohmann::json& j) {
  EvalMetrics m;
  m.mse = j.at("mse").get<double>();
  m.rmse = j.at("rmse").get<double>();
  m.accuracy = j.value("accuracy", 0.0);
  m.samples = j.value("samples", std::size_t{0});
  m.train_ticks = j.value("train-ticks", Tick{0});
  m.inference_ticks = j.value("inference-ticks", Tick{0});
  return m;
}

EvalMetrics evaluate(ModelKind kind, const ModelParameters& p, const Dataset& data, double threshold,
                     const CostModel& cost) {
  if (data.size() == 0) throw Error(Errc::EmptyEvalSet, "evaluation partition is empty");
  double se = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double yhat = predict(kind, p, data.rows[i]);
    const double y = data.targets[i];
    se += (yhat - y) * (yhat - y);
    if ((yhat > threshold) == (y > threshold)) ++hits;
  }
  EvalMetrics m;
  m.samples = data.size();
  m.mse = se / static_cast<double>(data.size());
  m.rmse = std::sqrt(m.mse);
  m.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  m.inference_ticks = cost.inference_ticks(data.size());
  return m;
}

ModelParameters ridge_closed_form(const Dataset& data, double lambda) {
  if (data.size() == 0) throw Error(Errc::EmptyTrainSet, "training partition is empty");
  const std::size_t d = data.width();
  const std::size_t m = d + 1;  // last unknown is the bias
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& x = data.rows[i];
    const double y = data.targets[i];
    for (std::size_t r = 0; r < m; ++r) {
      const double xr = r < d ? x[r] : 1.0;
      for (std::size_t c = r; c < m; ++c) a[r][c] += xr * (c < d ? x[c] : 1.0);
      a[r][m] += xr * y;
    }
  }
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < r; ++c) a[r][c] = a[c][r];
  for (std::size_t j = 0; j < d; ++j) a[j][j] += lambda;

  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-10) throw Error(Errc::SingularSystem, "normal equations are singular");
    std::swap(a[pivot], a[col]);
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> sol(m);
  for (std::size_t r = m; r-- > 0;) {
    double s = a[r][m];
    for (std::size_t c = r + 1; c < m; ++c) s -= a[r][c] * sol[c];
    sol[r] = s / a[r][r];
  }
  ModelParameters p;
  p.bias = sol[d];
  sol.pop_back();
  p.weights = std::move(sol);
  require_finite(p);
  return p;
}

namespace {

ModelParameters fit_stump(const Dataset& data, bool classify, double threshold) {
  const std::size_t n = data.size();
  const std::size_t d = data.width();
  auto leaf = [&](double sum, double count) {
    const double mean = count > 0 ? sum / count : 0.0;
    return classify ? (mean > 0.5 ? 1.0 : 0.0) : mean;
  };
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = classify ? (data.targets[i] > threshold ? 1.0 : 0.0) : data.targets[i];
  const double total = std::accumulate(y.begin(), y.end(), 0.0);
  const double total_sq = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);

  auto cost = [&](double ls, double lsq, double lc) {
    const double rs = total - ls, rsq = total_sq - lsq, rc = static_cast<double>(n) - lc;
    if (classify) {
      // Misclassifications when each side predicts its majority label.
      const double lw = leaf(ls, lc) == 1.0 ? lc - ls : ls;
      const double rw = leaf(rs, rc) == 1.0 ? rc - rs : rs;
      return lw + rw;
    }
    double sse = 0.0;
    if (lc > 0) sse += lsq - ls * ls / lc;
    if (rc > 0) sse += rsq - rs * rs / rc;
    return sse;
  };

  ModelParameters best;
  best.weights.assign(d, 0.0);
  Stump s;
  s.split = d > 0 ? data.rows[0][0] : 0.0;
  s.left = s.right = leaf(total, static_cast<double>(n));
  double best_cost = cost(total, total_sq, static_cast<double>(n));
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.rows[a][j] < data.rows[b][j]; });
    double ls = 0.0, lsq = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const auto i = order[k];
      ls += y[i];
      lsq += y[i] * y[i];
      const double here = data.rows[i][j];
      const double next = data.rows[order[k + 1]][j];
      if (here == next) continue;
      const double lc = static_cast<double>(k + 1);
      const double c = cost(ls, lsq, lc);
      if (c < best_cost - 1e-12 * std::max(1.0, std::abs(best_cost))) {
        best_cost = c;
        s.feature = j;
        s.split = 0.5 * (here + next);
        s.left = leaf(ls, lc);
        s.right = leaf(total - ls, static_cast<double>(n) - lc);
      }
    }
  }
  best.stump = s;
  return best;
}

}  // namespace

FitResult fit(ModelKind kind, const Dataset& data, const HyperParams& hp, std::uint64_t seed,
              const ModelParameters* init) {
  if (data.size() == 0) throw Error(Errc::EmptyTrainSet, "training partition is empty");
  validate_hyperparams(hp);
  const auto n = data.size();
  FitResult out;
  switch (kind) {
    case ModelKind::RidgeClosedForm:
      out.params = ridge_closed_form(data, hp.l2_lambda);
      out.records_processed = n;
      return out;
    case ModelKind::DecisionStump:
      out.params = fit_stump(data, true, hp.threshold);
      out.records_processed = n;
      return out;
    case ModelKind::LinearSgd:
    case ModelKind::LogisticSgd:
      break;
  }
  auto p = init ? *init : zero_parameters(kind, data.width());
  if (p.width() != data.width()) throw Error(Errc::SchemaMismatch, "warm-start width differs from data width");
  const auto bs = static_cast<std::size_t>(hp.batch_size);
  std::vector<std::size_t> order(n);
  for (int e = 0; e < hp.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    Rng(derive_seed(seed, "epoch", static_cast<std::uint64_t>(e))).shuffle(order);
    for (std::size_t start = 0; start < n; start += bs) {
      const auto end = std::min(n, start + bs);
      if (end - start == 1) {
        p = sgd_step(kind, std::move(p), data.rows[order[start]], data.targets[order[start]], hp.learning_rate,
                     hp.l2_lambda);
        continue;
      }
      Gradient acc;
      acc.weights.assign(p.width(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto g = sample_gradient(kind, p, data.rows[order[k]], data.targets[order[k]], 0.0);
        for (std::size_t j = 0; j < p.width(); ++j) acc.weights[j] += g.weights[j];
        acc.bias += g.bias;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t j = 0; j < p.width(); ++j)
        p.weights[j] -= hp.learning_rate * (acc.weights[j] * inv + 2.0 * hp.l2_lambda * p.weights[j]);
      p.bias -= hp.learning_rate * acc.bias * inv;
      require_finite(p);
    }
  }
  out.params = std::move(p);
  out.records_processed = n * static_cast<std::size_t>(hp.epochs);
  return out;
}

TrainResult train(ModelKind kind, const SplitDataset& split, const HyperParams& hp, std::uint64_t seed,
                  const CostModel& cost) {
  auto f = fit(kind, split.train, hp, seed);
  TrainResult r;
  r.metrics = evaluate(kind, f.params, split.val, hp.threshold, cost);
  r.metrics.train_ticks = cost.train_ticks(f.records_processed);
  r.params = std::move(f.params);
  r.records_processed = f.records_processed;
  return r;
}

std::vector<HyperParams> search_candidates(const SearchSpec& spec, const HyperParams& base) {
  std::vector<HyperParams> out;
  if (spec.mode == SearchSpec::Mode::Grid) {
    if (spec.learning_rates.empty() || spec.epochs.empty() || spec.batch_sizes.empty() || spec.l2_lambdas.empty())
      throw Error(Errc::EmptySearchSpace, "every grid axis needs at least one value");
    for (double lr : spec.learning_rates)
      for (int ep : spec.epochs)
        for (int bs : spec.batch_sizes)
          for (double lam : spec.l2_lambdas) {
            HyperParams hp = base;
            hp.learning_rate = lr;
            hp.epochs = ep;
            hp.batch_size = bs;
            hp.l2_lambda = lam;
            out.push_back(hp);
          }
    return out;
  }
  if (spec.budget < 1) throw Error(Errc::EmptySearchSpace, "random search budget must be >= 1");
  const auto [lr_lo, lr_hi] = spec.learning_rate_range;
  if (!(lr_lo > 0.0 && lr_lo <= lr_hi) || spec.epochs_range.first > spec.epochs_range.second ||
      spec.batch_size_range.first > spec.batch_size_range.second ||
      spec.l2_lambda_range.first > spec.l2_lambda_range.second)
    throw Error(Errc::EmptySearchSpace, "random search ranges are empty");
  Rng rng(derive_seed(spec.seed, "search"));
  auto int_in = [&](std::pair<int, int> r) {
    return r.first + static_cast<int>(rng.below(static_cast<std::uint64_t>(r.second - r.first) + 1));
  };
  for (int t = 0; t < spec.budget; ++t) {
    HyperParams hp = base;
    hp.learning_rate = std::exp(rng.uniform(std::log(lr_lo), std::log(lr_hi)));
    hp.epochs = int_in(spec.epochs_range);
    hp.batch_size = int_in(spec.batch_size_range);
    hp.l2_lambda = rng.uniform(spec.l2_lambda_range.first, spec.l2_lambda_range.second);
    out.push_back(hp);
  }
  return out;
}

SearchResult search(ModelKind kind, const SplitDataset& split, const SearchSpec& spec, const HyperParams& base,
                    std::uint64_t seed, const CostModel& cost) {
  const auto candidates = search_candidates(spec, base);
  SearchResult out;
  std::optional<std::size_t> best;
  for (std::size_t t = 0; t < candidates.size(); ++t) {
    Trial trial;
    trial.index = t;
    trial.hp = candidates[t];
    try {
      trial.result = train(kind, split, trial.hp, seed, cost);
      trial.ok = true;
      out.total_train_ticks += trial.result.metrics.train_ticks;
    } catch (const Error& e) {
      if (e.code() != Errc::NonFiniteUpdate && e.code() != Errc::SingularSystem) throw;
      trial.failure = std::string(to_string(e.code()));
    }
    if (trial.ok) {
      const auto& m = trial.result.metrics;
      const bool better = !best || (is_classifier(kind) ? m.accuracy > out.trials[*best].result.metrics.accuracy
                                                        : m.mse < out.trials[*best].result.metrics.mse);
      if (better) best = t;
    }
    out.trials.push_back(std::move(trial));
  }
  if (!best) throw Error(Errc::NonFiniteUpdate, "every search trial failed");
  out.best_index = *best;
  out.best = out.trials[*best].hp;
  out.best_result = out.trials[*best].result;
  return out;
}

void write_trials_csv(std::ostream& out, const SearchResult& result) {
  out << "trial,learning_rate,epochs,batch_size,l2_lambda,status,val_mse,val_accuracy,train_ticks\n";
  char buf[256];
  for (const auto& t : result.trials) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%d,%d,%.17g,%s,%.17g,%.17g,%lld\n", t.index, t.hp.learning_rate,
                  t.hp.epochs, t.hp.batch_size, t.hp.l2_lambda, t.ok ? "ok" : t.failure.c_str(),
                  t.ok ? t.result.metrics.mse : NAN, t.ok ? t.result.metrics.accuracy : NAN,
                  static_cast<long long>(t.ok ? t.result.metrics.train_ticks : 0));
    out << buf;
  }
}

std::vector<FeatureImportance> feature_importance(ModelKind kind, const ModelParameters& p, const Dataset& data) {
  if (p.width() != data.width())
    throw Error(Errc::SchemaMismatch, "model width " + std::to_string(p.width()) + " differs from dataset width " +
                                          std::to_string(data.width()));
  std::vector<FeatureImportance> out(data.width());
  for (std::size_t j = 0; j < data.width(); ++j) {
    out[j].index = j;
    out[j].name = data.feature_names[j];
    if (kind == ModelKind::DecisionStump) {
      out[j].importance = p.stump && p.stump->feature == j ? 1.0 : 0.0;
    } else {
      ColumnStats s;
      for (const auto& row : data.rows) s.add(row[j]);
      out[j].importance = std::abs(p.weights[j]) * s.population_sd();
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) { return a.importance > b.importance; });
  return out;
}

ModelParameters weighted_average(ModelKind kind, const std::vector<std::pair<ModelParameters, double>>& members) {
  if (kind == ModelKind::DecisionStump) throw Error(Errc::UnsupportedKind, "stumps cannot be averaged");
  if (members.empty()) throw Error(Errc::InsufficientData, "nothing to aggregate");
  const auto width = members.front().first.width();
  double total = 0.0;
  for (const auto& [p, w] : members) {
    if (p.width() != width) throw Error(Errc::SchemaMismatch, "aggregated models differ in width");
    if (!(w >= 0.0)) throw Error(Errc::ConfigError, "aggregation weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw Error(Errc::InsufficientData, "aggregation weights sum to zero");
  ModelParameters out = zero_parameters(kind, width);
  for (const auto& [p, w] : members) {
    const double f = w / total;
    for (std::size_t j = 0; j < width; ++j) out.weights[j] += f * p.weights[j];
    out.bias += f * p.bias;
  }
  return out;
}

}  // namespace smo
