#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "smo/error.hpp"
#include "smo/learn.hpp"
#include "smo/rng.hpp"

using namespace smo;

namespace {

Errc code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an smo::Error");
  return Errc::ConfigError;
}

Dataset make_dataset(std::vector<std::vector<double>> rows, std::vector<double> targets) {
  Dataset d;
  const auto w = rows.empty() ? 0 : rows.front().size();
  for (std::size_t j = 0; j < w; ++j) d.feature_names.push_back("f" + std::to_string(j));
  d.rows = std::move(rows);
  d.targets = std::move(targets);
  return d;
}

// y = <w, x> + b + sigma * N(0,1) with x uniform in [-1, 1].
Dataset linear_data(Rng& rng, std::size_t n, const std::vector<double>& w, double b, double sigma) {
  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(w.size());
    double y = b;
    for (std::size_t j = 0; j < w.size(); ++j) {
      x[j] = rng.uniform(-1, 1);
      y += w[j] * x[j];
    }
    rows.push_back(x);
    ys.push_back(y + sigma * rng.normal());
  }
  return make_dataset(rows, ys);
}

SplitDataset three_way(const Dataset& d, std::uint64_t seed = 1) { return split(d, {0.6, 0.2, 0.2, seed}); }

// Independent ridge solution via Eigen's LDLT on the augmented normal equations.
std::pair<Eigen::VectorXd, double> eigen_ridge(const Dataset& d, double lambda) {
  const auto n = static_cast<Eigen::Index>(d.size());
  const auto w = static_cast<Eigen::Index>(d.width());
  Eigen::MatrixXd x(n, w + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) x(i, j) = d.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    x(i, w) = 1.0;
    y(i) = d.targets[static_cast<std::size_t>(i)];
  }
  Eigen::MatrixXd a = x.transpose() * x;
  for (Eigen::Index j = 0; j < w; ++j) a(j, j) += lambda;
  const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(x.transpose() * y);
  return {sol.head(w), sol(w)};
}

double objective(const Dataset& d, const ModelParameters& p, double lambda) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = predict(ModelKind::LinearSgd, p, d.rows[i]) - d.targets[i];
    s += r * r;
  }
  for (double w : p.weights) s += lambda * w * w;
  return s;
}

}  // namespace

TEST_CASE("sgd_step hand examples") {
  ModelParameters p = zero_parameters(ModelKind::LinearSgd, 1);
  auto q = sgd_step(ModelKind::LinearSgd, p, {1.0}, 1.0, 0.1, 0.0);
  CHECK(q.weights[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(q.bias == doctest::Approx(0.2).epsilon(1e-15));

  p.weights = {2.0};
  p.bias = 1.0;
  CHECK(sgd_step(ModelKind::LinearSgd, p, {1.5}, 4.0, 0.1, 0.0) == p);

  p.weights = {1.0};
  p.bias = 0.0;
  q = sgd_step(ModelKind::LinearSgd, p, {1.0}, 1.0, 0.1, 1.0);
  CHECK(q.weights[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(q.bias == 0.0);

  p.weights = {1e300};
  CHECK(code_of([&] { sgd_step(ModelKind::LinearSgd, p, {1e10}, 0.0, 10.0, 0.0); }) == Errc::NonFiniteUpdate);
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(31337);
  const double h = 1e-6;
  int draws = 0;
  double worst = 0.0;
  for (auto kind : {ModelKind::LinearSgd, ModelKind::LogisticSgd}) {
    for (int trial = 0; trial < 150; ++trial) {
      const auto w = 1 + rng.below(6);
      ModelParameters p = zero_parameters(kind, w);
      std::vector<double> x(w);
      for (std::size_t j = 0; j < w; ++j) {
        p.weights[j] = rng.uniform(-2, 2);
        x[j] = rng.uniform(-2, 2);
      }
      p.bias = rng.uniform(-1, 1);
      const double y = kind == ModelKind::LogisticSgd ? static_cast<double>(rng.below(2)) : rng.uniform(-3, 3);
      const double lambda = rng.below(2) ? rng.uniform(0, 1) : 0.0;
      const auto g = sample_gradient(kind, p, x, y, lambda);
      auto numeric = [&](double* slot) {
        const double keep = *slot;
        *slot = keep + h;
        const double up = sample_loss(kind, p, x, y, lambda);
        *slot = keep - h;
        const double down = sample_loss(kind, p, x, y, lambda);
        *slot = keep;
        return (up - down) / (2 * h);
      };
      auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); };
      for (std::size_t j = 0; j < w; ++j) worst = std::max(worst, rel(g.weights[j], numeric(&p.weights[j])));
      worst = std::max(worst, rel(g.bias, numeric(&p.bias)));
      ++draws;
    }
  }
  CHECK(draws >= 100);
  CHECK(worst <= 1e-5);
}

TEST_CASE("ridge recovers noiseless coefficients and matches an independent solver") {
  Rng rng(4);
  const std::vector<double> truth{1.5, -2.0, 0.25, 3.0};
  const auto d = linear_data(rng, 200, truth, 0.7, 0.0);
  const auto p = ridge_closed_form(d, 0.0);
  for (std::size_t j = 0; j < truth.size(); ++j) CHECK(std::abs(p.weights[j] - truth[j]) < 1e-6);
  CHECK(std::abs(p.bias - 0.7) < 1e-6);

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(1 + rng.below(8));
    for (auto& v : w) v = rng.uniform(-3, 3);
    const auto noisy = linear_data(rng, 20 + rng.below(200), w, rng.uniform(-1, 1), 0.5);
    const double lambda = rng.uniform(0, 5);
    const auto mine = ridge_closed_form(noisy, lambda);
    const auto [ew, eb] = eigen_ridge(noisy, lambda);
    for (std::size_t j = 0; j < w.size(); ++j)
      CHECK(mine.weights[j] == doctest::Approx(ew(static_cast<Eigen::Index>(j))).epsilon(1e-9));
    CHECK(mine.bias == doctest::Approx(eb).epsilon(1e-9));
  }
}

TEST_CASE("collinear columns are singular without regularization") {
  const auto d = make_dataset({{1, 2}, {2, 4}, {3, 6}}, {1, 2, 3});
  CHECK(code_of([&] { ridge_closed_form(d, 0.0); }) == Errc::SingularSystem);
  CHECK_NOTHROW(ridge_closed_form(d, 0.1));
}

TEST_CASE("ridge objective bounds every SGD iterate") {
  Rng rng(12);
  const auto d = linear_data(rng, 80, {1.0, -1.0, 0.5}, 0.2, 0.3);
  for (double lambda : {0.0, 0.5, 3.0}) {
    const double best = objective(d, ridge_closed_form(d, lambda), lambda);
    // SGD on the summed objective: per-sample regularizer lambda / n.
    ModelParameters p = zero_parameters(ModelKind::LinearSgd, 3);
    for (int e = 0; e < 20; ++e) {
      p = incremental_update(ModelKind::LinearSgd, p, d, 0.01, lambda / static_cast<double>(d.size()));
      CHECK(best <= objective(d, p, lambda) + 1e-9);
    }
  }
}

TEST_CASE("SGD converges to the closed form on noiseless data") {
  Rng rng(99);
  const auto d = linear_data(rng, 400, {0.8, -0.4, 1.2}, 0.1, 0.0);
  const auto s = three_way(d);
  const auto closed = train(ModelKind::RidgeClosedForm, s, {0.01, 1, 1, 0.0}, 1);
  const auto sgd = train(ModelKind::LinearSgd, s, {0.02, 200, 1, 0.0}, 1);
  CHECK(std::abs(sgd.metrics.mse - closed.metrics.mse) <= 1e-3);
  CHECK(closed.metrics.mse < 1e-20);
}

TEST_CASE("empty train and eval partitions") {
  SplitDataset s;
  s.train.feature_names = {"a"};
  CHECK(code_of([&] { train(ModelKind::LinearSgd, s, {}, 1); }) == Errc::EmptyTrainSet);
  CHECK(code_of([&] { evaluate(ModelKind::LinearSgd, zero_parameters(ModelKind::LinearSgd, 1), s.val); }) ==
        Errc::EmptyEvalSet);
}

TEST_CASE("incremental updates equal an ordered batch epoch") {
  Rng rng(3);
  const auto d = linear_data(rng, 50, {1, 2}, 0.0, 0.1);
  const auto p0 = zero_parameters(ModelKind::LinearSgd, 2);
  CHECK(incremental_update(ModelKind::LinearSgd, p0, d.subset({}), 0.1, 0.0) == p0);
  CHECK(incremental_update(ModelKind::LinearSgd, p0, d.subset({7}), 0.1, 0.2) ==
        sgd_step(ModelKind::LinearSgd, p0, d.rows[7], d.targets[7], 0.1, 0.2));

  for (auto kind : {ModelKind::LinearSgd, ModelKind::LogisticSgd}) {
    auto labelled = d;
    if (kind == ModelKind::LogisticSgd)
      for (auto& y : labelled.targets) y = y > 1.5 ? 1.0 : 0.0;
    const std::uint64_t seed = 77;
    const auto batch = fit(kind, labelled, {0.05, 1, 1, 0.01}, seed).params;
    std::vector<std::size_t> order(labelled.size());
    std::iota(order.begin(), order.end(), 0);
    Rng(derive_seed(seed, "epoch", 0)).shuffle(order);
    const auto streamed = incremental_update(kind, p0, labelled.subset(order), 0.05, 0.01);
    CHECK(streamed == batch);
  }
}

TEST_CASE("evaluate hand examples") {
  ModelParameters p = zero_parameters(ModelKind::LinearSgd, 1);
  p.weights = {1.0};
  const auto d = make_dataset({{0.0}, {1.0}}, {1.0, 1.0});
  const auto m = evaluate(ModelKind::LinearSgd, p, d, 0.5);
  CHECK(m.mse == 0.5);
  CHECK(m.rmse == std::sqrt(0.5));
  CHECK(m.accuracy == 0.5);
  const auto perfect = evaluate(ModelKind::LinearSgd, p, make_dataset({{0.0}, {1.0}}, {0.0, 1.0}));
  CHECK(perfect.mse == 0.0);
  CHECK(perfect.accuracy == 1.0);
}

TEST_CASE("grid search equals brute force") {
  Rng rng(21);
  const auto d = linear_data(rng, 120, {0.5, -1.5}, 0.3, 0.2);
  const auto s = three_way(d, 9);
  SearchSpec spec;
  spec.learning_rates = {0.01, 0.1};
  spec.epochs = {10, 100};
  const auto result = search(ModelKind::LinearSgd, s, spec, {}, 5);
  REQUIRE(result.trials.size() == 4);
  double best = INFINITY;
  HyperParams best_hp;
  for (double lr : {0.01, 0.1})
    for (int ep : {10, 100}) {
      HyperParams hp;
      hp.learning_rate = lr;
      hp.epochs = ep;
      const auto r = train(ModelKind::LinearSgd, s, hp, 5);
      if (r.metrics.mse < best) {
        best = r.metrics.mse;
        best_hp = hp;
      }
    }
  CHECK(result.best == best_hp);
  CHECK(result.best_result.metrics.mse == best);

  spec.learning_rates = {0.05};
  spec.epochs = {3};
  CHECK(search(ModelKind::LinearSgd, s, spec, {}, 5).best.learning_rate == 0.05);
  spec.learning_rates.clear();
  CHECK(code_of([&] { search(ModelKind::LinearSgd, s, spec, {}, 5); }) == Errc::EmptySearchSpace);
}

TEST_CASE("random grids agree with brute force and record divergence") {
  Rng rng(8);
  const auto d = linear_data(rng, 90, {2.0, 1.0, -1.0}, 0.0, 0.3);
  const auto s = three_way(d, 2);
  for (int trial = 0; trial < 5; ++trial) {
    SearchSpec spec;
    spec.learning_rates.clear();
    for (std::size_t k = 0; k < 1 + rng.below(3); ++k) spec.learning_rates.push_back(rng.uniform(0.001, 0.2));
    spec.epochs = {1 + static_cast<int>(rng.below(20))};
    spec.batch_sizes = {1, 8};
    spec.l2_lambdas = {0.0, 0.01};
    const auto r = search(ModelKind::LinearSgd, s, spec, {}, 3);
    std::size_t best = 0;
    for (std::size_t t = 0; t < r.trials.size(); ++t)
      if (r.trials[t].result.metrics.mse < r.trials[best].result.metrics.mse) best = t;
    CHECK(r.best_index == best);
  }

  SearchSpec wild;
  wild.learning_rates = {1e6, 0.05};
  wild.epochs = {5};
  const auto r = search(ModelKind::LinearSgd, s, wild, {}, 3);
  CHECK_FALSE(r.trials[0].ok);
  CHECK(r.trials[0].failure == "NonFiniteUpdate");
  CHECK(r.best_index == 1);
  std::ostringstream csv;
  write_trials_csv(csv, r);
  CHECK(csv.str().find("0,1000000,5,1,0,NonFiniteUpdate") != std::string::npos);

  SearchSpec random;
  random.mode = SearchSpec::Mode::Random;
  random.budget = 6;
  random.epochs_range = {1, 5};
  random.seed = 4;
  const auto a = search_candidates(random, {});
  CHECK(a.size() == 6);
  CHECK(a == search_candidates(random, {}));
  for (const auto& hp : a) {
    CHECK(hp.learning_rate >= 1e-3);
    CHECK(hp.learning_rate <= 1e-1);
    CHECK(hp.epochs >= 1);
    CHECK(hp.epochs <= 5);
  }
  random.budget = 0;
  CHECK(code_of([&] { search_candidates(random, {}); }) == Errc::EmptySearchSpace);
}

TEST_CASE("classifiers") {
  Rng rng(17);
  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  for (int i = 0; i < 300; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    rows.push_back({a, b});
    ys.push_back(b > 0.2 ? 1.0 : 0.0);
  }
  const auto s = three_way(make_dataset(rows, ys), 4);
  const auto stump = train(ModelKind::DecisionStump, s, {}, 1);
  REQUIRE(stump.params.stump);
  CHECK(stump.params.stump->feature == 1);
  CHECK(std::abs(stump.params.stump->split - 0.2) < 0.05);
  CHECK(stump.metrics.accuracy >= 0.97);
  const auto logit = train(ModelKind::LogisticSgd, s, {0.5, 50, 1, 0.0}, 1);
  CHECK(logit.metrics.accuracy >= 0.95);
  const auto fi = feature_importance(ModelKind::DecisionStump, stump.params, s.train);
  CHECK(fi[0].index == 1);
  CHECK(fi[0].importance == 1.0);
  CHECK(fi[1].importance == 0.0);
}

TEST_CASE("feature importance ranking") {
  // Columns with population sd 1 and 3.
  const auto d = make_dataset({{-1, -3}, {1, 3}}, {0, 0});
  ModelParameters p = zero_parameters(ModelKind::LinearSgd, 2);
  p.weights = {2, 1};
  auto fi = feature_importance(ModelKind::LinearSgd, p, d);
  CHECK(fi[0].index == 1);
  CHECK(fi[0].importance == 3.0);
  CHECK(fi[1].importance == 2.0);

  const auto equal = make_dataset({{-1, -1}, {1, 1}}, {0, 0});
  p.weights = {0, 5};
  CHECK(feature_importance(ModelKind::LinearSgd, p, equal)[0].index == 1);
  p.weights = {0, 0};
  fi = feature_importance(ModelKind::LinearSgd, p, equal);
  CHECK(fi[0].index == 0);
  CHECK(fi[1].index == 1);
  CHECK(fi[0].importance == 0.0);
  p.weights = {0};
  CHECK(code_of([&] { feature_importance(ModelKind::LinearSgd, p, equal); }) == Errc::SchemaMismatch);
}

TEST_CASE("training is deterministic and costs follow the record count") {
  Rng rng(6);
  const auto s = three_way(linear_data(rng, 100, {1.0}, 0.0, 0.1));
  const HyperParams hp{0.05, 7, 4, 0.0};
  CostModel cost;
  const auto a = train(ModelKind::LinearSgd, s, hp, 11, cost);
  const auto b = train(ModelKind::LinearSgd, s, hp, 11, cost);
  CHECK(a.params == b.params);
  CHECK(a.records_processed == 60 * 7);
  CHECK(a.metrics.train_ticks == 5);   // ceil(420 * 0.01)
  CHECK(a.metrics.inference_ticks == 1);
  CHECK(model_parameters_from_json(to_json(a.params)) == a.params);
}

TEST_CASE("weighted averaging") {
  ModelParameters a = zero_parameters(ModelKind::LinearSgd, 2), b = a;
  a.weights = {1, 2};
  a.bias = 1;
  b.weights = {3, 6};
  b.bias = 3;
  const auto avg = weighted_average(ModelKind::LinearSgd, {{a, 1.0}, {b, 3.0}});
  CHECK(avg.weights == std::vector<double>{2.5, 5.0});
  CHECK(avg.bias == 2.5);
  CHECK(code_of([&] { weighted_average(ModelKind::DecisionStump, {{a, 1.0}}); }) == Errc::UnsupportedKind);
}
