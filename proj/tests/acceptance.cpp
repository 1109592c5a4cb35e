// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Oracles here are written independently of the library code they check.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "smo/config.hpp"
#include "smo/error.hpp"
#include "smo/harness.hpp"
#include "smo/learn.hpp"
#include "smo/lifecycle.hpp"
#include "smo/rng.hpp"
#include "smo/scenarios.hpp"

using namespace smo;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = std::string(SMO_SOURCE_DIR) + "/configs";

ScenarioConfig config(const std::string& name) { return load_config(kConfigs + "/" + name + ".json"); }

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int n, const char* name, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << " [exception: " << e.what() << "]";
  }
  if (!v.pass) ++failures;
  std::printf("%s criterion %d: %s |%s\n", v.pass ? "PASS" : "FAIL", n, name, v.detail.str().c_str());
  std::fflush(stdout);
}

double mse_of(const Eigen::VectorXd& w, double b, const Dataset& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double p = b;
    for (std::size_t j = 0; j < d.width(); ++j) p += w(static_cast<Eigen::Index>(j)) * d.rows[i][j];
    s += (p - d.targets[i]) * (p - d.targets[i]);
  }
  return s / static_cast<double>(d.size());
}

// Ridge on [X 1] with the bias unpenalized, solved by QR.
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

std::int64_t termination_delivered_bytes(const RunResult& r, std::optional<PayloadKind> payload = std::nullopt) {
  std::int64_t bytes = 0;
  for (const auto& e : r.sim->log()) {
    if (e.type != EventType::Deliver || !e.iface || !is_termination_interface(*e.iface)) continue;
    if (payload && e.payload != *payload) continue;
    bytes += e.bytes;
  }
  return bytes;
}

// Termination interface a component of this kind reaches the RIC over.
InterfaceName termination_for(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::NSSMF:
    case ComponentKind::NFMF:
    case ComponentKind::MdaSystem3GPP:
      return InterfaceName::NSSMF_NonRTRIC;
    default:
      return InterfaceName::NFVO_NonRTRIC;
  }
}

std::int64_t overhead(const Topology& topo, ComponentKind kind) {
  return topo.interface_spec(termination_for(kind)).overhead_bytes;
}

std::size_t encoded_width_of(const CanonicalSchema& schema) {
  std::size_t w = 0;
  for (const auto& f : schema.fields) w += f.type == FieldType::Numeric ? 1 : f.vocab.size();
  return w;
}

std::size_t numeric_columns(const CanonicalSchema& schema) {
  return static_cast<std::size_t>(std::count_if(schema.fields.begin(), schema.fields.end(),
                                                [](const FieldSpec& f) { return f.type == FieldType::Numeric; }));
}

std::vector<ComponentId> mda_targets(const Topology& topo) {
  auto t = topo.of_kind(ComponentKind::MdaSystem3GPP);
  for (const auto& c : topo.of_kind(ComponentKind::MdaSystemNFV)) t.push_back(c);
  return t;
}

// Linear model deployment to every MDA target.
std::int64_t deploy_bytes(const ScenarioConfig& cfg, const Topology& topo) {
  const auto params = static_cast<std::int64_t>(encoded_width_of(cfg.canonical) + 1);
  std::int64_t bytes = 0;
  for (const auto& t : mda_targets(topo)) bytes += params * cfg.sizes.parameter_bytes + overhead(topo, t.kind);
  return bytes;
}

// Per batch round and source: an empty request down, the raw batch (duplicates included) up.
std::int64_t analytic_b_bytes(const ScenarioConfig& cfg) {
  const auto topo = build_topology(cfg.topology);
  std::int64_t bytes = 0;
  for (const auto& s : cfg.sources) {
    const auto n = static_cast<std::int64_t>(s.emission.size);
    const auto out = n + static_cast<std::int64_t>(std::floor(static_cast<double>(n) * s.duplicate_rate));
    const auto ov = overhead(topo, s.owner.kind);
    bytes += cfg.batch_rounds * ((0 + ov) + (out * cfg.sizes.record_bytes + ov));
  }
  return bytes + deploy_bytes(cfg, topo);
}

// Per domain: column statistics (count, mean, M2, min, max per numeric column) up, scaling
// (2 values per encoded column) down, one upload and one download per round,
// a 3-value validation report up; then deployment.
std::int64_t analytic_c_bytes(const ScenarioConfig& cfg) {
  const auto topo = build_topology(cfg.topology);
  const auto pb = cfg.sizes.parameter_bytes;
  const auto width = static_cast<std::int64_t>(encoded_width_of(cfg.canonical));
  const auto cols = static_cast<std::int64_t>(numeric_columns(cfg.canonical));
  std::set<ComponentKind> domains;
  for (const auto& s : cfg.sources) domains.insert(domain_of(s.owner.kind) == Domain::Nsms3gpp ? ComponentKind::MdaSystem3GPP
                                                                                                : ComponentKind::MdaSystemNFV);
  std::int64_t bytes = 0;
  for (auto mda : domains) {
    const auto ov = overhead(topo, mda);
    bytes += cols * 5 * pb + ov;
    bytes += 2 * width * pb + ov;
    bytes += cfg.rounds * 2 * ((width + 1) * pb + ov);
    bytes += 3 * pb + ov;
  }
  return bytes + deploy_bytes(cfg, topo);
}

ModelParameters linear(std::vector<double> w, double b) {
  ModelParameters p;
  p.weights = std::move(w);
  p.bias = b;
  return p;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");

  criterion(1, "scenario B learns to the noise floor", [](Verdict& v) {
    const auto cfg = config("b_centralized");
    const auto start = std::chrono::steady_clock::now();
    const auto r = run_scenario(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.require(!r.failure, "run failed");
    v.require(r.live.has_value(), "model deployed");
    const double sigma = cfg.sources.front().noise_sigma;
    const auto [w, b] = eigen_ridge(r.split->train, 1e-8);
    const double oracle = mse_of(w, b, r.split->test);
    const double mse = r.test_metrics->mse;
    v.detail << " n=" << r.dataset->size() << " test-mse=" << mse << " ridge-oracle=" << oracle
             << " bound=" << 1.5 * sigma * sigma << " run=" << secs << "s";
    v.require(cfg.sources.size() == 2, "2 sources");
    v.require(r.dataset->size() == 2000, "n=2000 after cleansing");
    v.require(numeric_columns(cfg.canonical) == 8 && cfg.canonical.fields.size() == 9, "8 numeric + 1 categorical");
    v.require(sigma == 0.1, "sigma 0.1");
    v.require(mse <= 1.5 * sigma * sigma, "model mse <= 1.5 sigma^2");
    v.require(oracle <= 1.5 * sigma * sigma, "oracle mse <= 1.5 sigma^2");
    v.require(secs < 10.0, "run < 10 s");
  });

  criterion(2, "scenario C federated model matches pooled training", [](Verdict& v) {
    const auto cfg = config("c_share_models");
    const auto c = run_scenario(cfg);
    const auto b = run_scenario(config("b_centralized"));
    v.require(!c.failure && !b.failure, "runs complete");
    v.require(cfg.rounds == 3 && cfg.aggregation == Aggregation::SampleCount, "3 rounds, sample-count");
    const auto raw = termination_delivered_bytes(c, PayloadKind::RawData);
    v.detail << " C-holdout-mse=" << *c.holdout_mse << " B-holdout-mse=" << *b.holdout_mse
             << " termination-raw-bytes=" << raw;
    v.require(*c.holdout_mse <= 2.0 * *b.holdout_mse, "C <= 2x B on the shared held-out set");
    v.require(raw == 0, "zero RawData bytes on terminations");
  });

  criterion(3, "poisoning resilience", [](Verdict& v) {
    const auto clean = run_scenario(config("b_centralized"));
    const auto off = run_scenario(config("b_poisoning"));
    const auto on = run_scenario(config("b_poisoning_filtered"));
    const auto& spec = *config("b_poisoning").harness.poison;
    v.require(spec.fraction == 0.2 && spec.delta == 10.0 && spec.attack == PoisonSpec::Attack::TargetOffset,
              "p=0.2 offset 10");
    v.require(config("b_poisoning_filtered").harness.filter->k == 3.0, "filter k=3");
    const double c = *clean.holdout_mse, f_off = *off.holdout_mse, f_on = *on.holdout_mse;
    v.detail << " clean=" << c << " filter-off=" << f_off << " (" << f_off / c << "x) filter-on=" << f_on << " ("
             << f_on / c << "x) precision=" << on.detection->precision.value_or(NAN)
             << " recall=" << on.detection->recall.value_or(NAN) << " poisoned=" << on.poisoned;
    v.require(f_off >= 5.0 * c, "filter off >= 5x clean");
    v.require(f_on <= 1.5 * c, "filter on <= 1.5x clean");
    v.require(on.detection->precision.has_value() && on.detection->recall.has_value(), "precision/recall reported");
  });

  criterion(4, "failover restores the last checkpoint on schedule", [](Verdict& v) {
    const auto cfg = config("b_failover");
    const auto r = run_scenario(cfg);
    const auto& plan = *cfg.harness.failover;
    v.require(!r.failure && r.live.has_value(), "run completes with a deployed model");
    v.require(plan.replicas.size() == 1 && plan.heartbeat_interval == 2 && plan.missed_heartbeats == 2,
              "one replica, h=2, m=2");
    // Hand schedule: the last heartbeat leaves at the largest multiple of h
    // not after the failure, arrives one link latency later, and the replica
    // waits m*h ticks past that receipt.
    const auto topo = build_topology(cfg.topology);
    const Tick last_sent = (plan.fail_tick / plan.heartbeat_interval) * plan.heartbeat_interval;
    const Tick receipt = last_sent + topo.interface_spec(InterfaceName::NonRtRicInternal).latency;
    const Tick expected = receipt + plan.missed_heartbeats * plan.heartbeat_interval;
    const auto& fo = *r.failover;
    v.detail << " fail=" << plan.fail_tick << " expected-promotion=" << expected
             << " detected=" << fo.detected_at.value_or(-1) << " downtime=" << fo.downtime.value_or(-1);
    v.require(fo.detected_at == expected, "promotion tick");
    v.require(fo.downtime == expected - plan.fail_tick, "downtime");
    v.require(!fo.checkpoints.empty() && fo.restored_checkpoint.has_value(), "checkpoint restored");
    if (!fo.checkpoints.empty() && fo.restored_checkpoint) {
      v.require(fo.checkpoints.back().first <= plan.fail_tick, "last checkpoint precedes the failure");
      v.require(*fo.restored_checkpoint == fo.checkpoints.back().second, "restored == last checkpoint");
      // Field-for-field: the registry rebuilt from the checkpoint reserializes identically.
      const auto& doc = (*fo.restored_checkpoint)["registry"];
      v.require(to_json(registry_from_json(doc)) == doc, "registry round trip");
    }
    v.require(r.restored_equals_checkpoint == true, "live registry equals checkpoint at promotion");
  });

  criterion(5, "termination signaling matches the analytic byte formula", [](Verdict& v) {
    const auto bcfg = config("b_centralized");
    const auto ccfg = config("c_share_models");
    v.require(bcfg.lifecycle.monitor.period == 0 && ccfg.lifecycle.monitor.period == 0, "monitoring off");
    const auto b = run_scenario(bcfg);
    const auto c = run_scenario(ccfg);
    const auto b_log = termination_delivered_bytes(b), c_log = termination_delivered_bytes(c);
    const auto b_formula = analytic_b_bytes(bcfg), c_formula = analytic_c_bytes(ccfg);
    v.detail << " B=" << b_log << " (formula " << b_formula << ") C=" << c_log << " (formula " << c_formula
             << ") ratio=" << static_cast<double>(b_log) / static_cast<double>(c_log);
    v.require(b_log == b_formula, "B equals formula");
    v.require(c_log == c_formula, "C equals formula");
    v.require(b.signaling.termination_bytes == b_log && c.signaling.termination_bytes == c_log, "report agrees");
    v.require(b_log > c_log, "B exceeds C");
  });

  criterion(6, "bundled configs are deterministic", [](Verdict& v) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(kConfigs))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto cfg = load_config(f.string());
      const auto a = run_scenario(cfg).sim->log_jsonl();
      const auto b = run_scenario(cfg).sim->log_jsonl();
      v.require(a == b && !a.empty(), f.filename().string());
    }
    v.detail << " configs=" << files.size();
    v.require(files.size() >= 8, "bundled configs found");
  });

  criterion(7, "analytic gradients match finite differences", [](Verdict& v) {
    Rng rng(7007);
    const double h = 1e-6;
    int cases = 0;
    double worst = 0.0;
    for (auto kind : {ModelKind::LinearSgd, ModelKind::LogisticSgd}) {
      for (bool with_lambda : {false, true}) {
        for (int t = 0; t < 60; ++t) {
          const auto w = 1 + rng.below(8);
          ModelParameters p = zero_parameters(kind, w);
          std::vector<double> x(w);
          for (std::size_t j = 0; j < w; ++j) {
            p.weights[j] = rng.uniform(-2, 2);
            x[j] = rng.uniform(-2, 2);
          }
          p.bias = rng.uniform(-1, 1);
          const double y = kind == ModelKind::LogisticSgd ? static_cast<double>(rng.below(2)) : rng.uniform(-3, 3);
          const double lambda = with_lambda ? rng.uniform(0.01, 1) : 0.0;
          const auto g = sample_gradient(kind, p, x, y, lambda);
          auto central = [&](double* slot) {
            const double keep = *slot;
            *slot = keep + h;
            const double up = sample_loss(kind, p, x, y, lambda);
            *slot = keep - h;
            const double down = sample_loss(kind, p, x, y, lambda);
            *slot = keep;
            return (up - down) / (2 * h);
          };
          auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); };
          for (std::size_t j = 0; j < w; ++j) worst = std::max(worst, rel(g.weights[j], central(&p.weights[j])));
          worst = std::max(worst, rel(g.bias, central(&p.bias)));
          ++cases;
        }
      }
    }
    v.detail << " cases=" << cases << " worst-relative-error=" << worst;
    v.require(cases >= 100, ">= 100 cases");
    v.require(worst <= 1e-5, "relative error <= 1e-5");
  });

  criterion(8, "search, incremental and aggregation oracles", [](Verdict& v) {
    // Grid search equals brute-force enumeration on every bundled grid.
    int grids = 0;
    for (const auto& e : fs::directory_iterator(kConfigs)) {
      if (e.path().extension() != ".json") continue;
      const auto cfg = load_config(e.path().string());
      if (!cfg.search || cfg.search->mode != SearchSpec::Mode::Grid) continue;
      const auto r = run_scenario(cfg);
      if (!r.search || !r.split) continue;
      const auto seed = derive_seed(cfg.seed, "train");
      double best = INFINITY;
      HyperParams best_hp;
      std::size_t count = 0;
      for (double lr : cfg.search->learning_rates)
        for (int ep : cfg.search->epochs)
          for (int bs : cfg.search->batch_sizes)
            for (double l2 : cfg.search->l2_lambdas) {
              HyperParams hp = cfg.hp;
              hp.learning_rate = lr;
              hp.epochs = ep;
              hp.batch_size = bs;
              hp.l2_lambda = l2;
              const auto t = train(cfg.model_kind, *r.split, hp, seed, cfg.cost);
              ++count;
              if (t.metrics.mse < best) {
                best = t.metrics.mse;
                best_hp = hp;
              }
            }
      v.require(r.search->trials.size() == count, e.path().filename().string() + " trial count");
      v.require(r.search->best == best_hp && r.search->best_result.metrics.mse == best,
                e.path().filename().string() + " best");
      ++grids;
    }
    v.require(grids > 0, "bundled grids found");

    // One incremental pass equals one batch epoch in the same sample order.
    const auto split = *run_scenario(config("b_centralized")).split;
    int pairs = 0;
    for (auto kind : {ModelKind::LinearSgd, ModelKind::LogisticSgd}) {
      for (double lambda : {0.0, 0.01}) {
        auto data = split.train;
        if (kind == ModelKind::LogisticSgd)
          for (auto& y : data.targets) y = y > 1.0 ? 1.0 : 0.0;
        const std::uint64_t seed = 99;
        HyperParams hp;
        hp.learning_rate = 0.01;
        hp.epochs = 1;
        hp.batch_size = 1;
        hp.l2_lambda = lambda;
        const auto batch = fit(kind, data, hp, seed).params;
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), 0);
        Rng(derive_seed(seed, "epoch", 0)).shuffle(order);
        const auto streamed =
            incremental_update(kind, zero_parameters(kind, data.width()), data.subset(order), 0.01, lambda);
        v.require(streamed == batch, "incremental == epoch");
        ++pairs;
      }
    }

    // Aggregation against hand-computed weighted means.
    auto m = [](const char* owner, ModelParameters p, std::size_t n) {
      return DomainModel{ComponentId::parse(owner), std::move(p), n, 1, {"a", "b"}};
    };
    auto near = [](const ModelParameters& p, std::vector<double> w, double b) {
      bool ok = std::abs(p.bias - b) < 1e-12 && p.weights.size() == w.size();
      for (std::size_t j = 0; ok && j < w.size(); ++j) ok = std::abs(p.weights[j] - w[j]) < 1e-12;
      return ok;
    };
    // Set 1: uniform over two members.
    v.require(near(aggregate(ModelKind::LinearSgd,
                             {m("MdaSystem3GPP#0", linear({1, 2}, 0), 10), m("MdaSystemNFV#0", linear({3, 6}, 2), 30)},
                             Aggregation::Uniform),
                   {2, 4}, 1),
              "fixture 1");
    // Set 2: sample counts 10 and 30 give weights 0.25 and 0.75.
    v.require(near(aggregate(ModelKind::LinearSgd,
                             {m("MdaSystem3GPP#0", linear({1, 2}, 0), 10), m("MdaSystemNFV#0", linear({3, 6}, 2), 30)},
                             Aggregation::SampleCount),
                   {2.5, 5.0}, 1.5),
              "fixture 2");
    // Set 3: counts 1, 2, 3 give weights 1/6, 2/6, 3/6.
    v.require(near(aggregate(ModelKind::LinearSgd,
                             {m("MdaSystem3GPP#0", linear({6, 0}, 6), 1), m("MdaSystem3GPP#1", linear({0, 6}, 0), 2),
                              m("MdaSystemNFV#0", linear({0, 0}, -6), 3)},
                             Aggregation::SampleCount),
                   {1, 2}, -2),
              "fixture 3");
    v.detail << " grids=" << grids << " incremental-pairs=" << pairs << " aggregation-fixtures=3";
  });

  criterion(9, "elastic scheduling follows the hand allocation tables", [](Verdict& v) {
    auto fixture = [](int nf_priority, int retrain_priority) {
      SchedulerSpec s;
      s.budget = 4;
      s.jobs = {{"nf", JobClass::NfWorkload, nf_priority, 3, 36, 1},
                {"retrain", JobClass::Retraining, retrain_priority, 3, 12, 1}};
      return s;
    };
    // NF first: every tick grants nf 3, retraining the remaining 1, so 12 units take 12 ticks.
    const auto nf_first = schedule(fixture(2, 1), 20);
    for (Tick t = 1; t <= 12; ++t)
      v.require(nf_first.allocations[t - 1][0] == 3 && nf_first.allocations[t - 1][1] == 1, "table row " + std::to_string(t));
    v.require(nf_first.jobs[1].completion == 12, "retraining completes at 12");
    v.require(nf_first.nf_delay_max == 0, "NF delay 0");
    // Swapped: retraining takes 3 for 4 ticks leaving nf 1; nf then needs 32 more units at 3 per tick.
    const auto swapped = schedule(fixture(1, 2), 20);
    for (Tick t = 1; t <= 4; ++t)
      v.require(swapped.allocations[t - 1][1] == 3 && swapped.allocations[t - 1][0] == 1, "swapped row " + std::to_string(t));
    const Tick nf_done = 4 + (36 - 4 + 2) / 3;
    v.require(swapped.jobs[0].completion == nf_done, "swapped NF completion");
    v.require(swapped.nf_delay_max.value_or(0) > 0, "swapped NF delay > 0");
    v.detail << " retraining-completion=" << nf_first.jobs[1].completion.value_or(-1)
             << " nf-delay=" << nf_first.nf_delay_max.value_or(-1)
             << " swapped-nf-delay=" << swapped.nf_delay_max.value_or(-1);
  });

  criterion(10, "lifecycle histories stay on the legal digraph", [](Verdict& v) {
    constexpr LifecycleState all[] = {LifecycleState::Collected, LifecycleState::Preprocessed, LifecycleState::Trained,
                                      LifecycleState::Validated, LifecycleState::Deployed,     LifecycleState::Monitored,
                                      LifecycleState::Refining,  LifecycleState::Retired};
    using S = LifecycleState;
    const std::set<std::pair<S, S>> legal{{S::Collected, S::Preprocessed}, {S::Preprocessed, S::Trained},
                                          {S::Trained, S::Validated},      {S::Validated, S::Deployed},
                                          {S::Validated, S::Retired},      {S::Deployed, S::Monitored},
                                          {S::Monitored, S::Refining},     {S::Monitored, S::Retired},
                                          {S::Refining, S::Trained}};
    const ComponentId targets[] = {ComponentId::parse("MdaSystem3GPP#0"), ComponentId::parse("MdaSystemNFV#0")};
    Rng rng(10010);
    std::size_t accepted = 0, rejected = 0;
    for (int run = 0; run < 500; ++run) {
      Registry reg;
      reg.open("m", 0);
      std::vector<std::pair<S, S>> path;
      for (Tick t = 1; t <= 80; ++t) {
        const auto from = reg.get("m").state;
        const auto to = all[rng.below(8)];
        const bool ok = legal.count({from, to}) > 0;
        try {
          if (to == S::Trained) {
            ModelArtifact a;
            a.parameters = linear({rng.normal()}, 0);
            a.feature_schema = {"f0"};
            reg.register_internal("m", a, t);
          } else {
            reg.transition("m", to, t);
          }
          if (!ok) v.require(false, "illegal transition accepted");
          path.emplace_back(from, to);
          ++accepted;
          if (to == S::Monitored)
            for (const auto& tg : targets) reg.record_deployment("m", tg, reg.get("m").version);
        } catch (const Error& e) {
          if (ok) v.require(false, "legal transition rejected");
          if (e.code() != Errc::IllegalTransition) v.require(false, "wrong error code");
          if (reg.get("m").state != from) v.require(false, "state changed on rejection");
          ++rejected;
        }
        // Accepted history is exactly the walk taken, and every step is an edge.
        const auto& h = reg.get("m").history;
        bool walk = h.size() == path.size();
        for (std::size_t k = 0; walk && k < h.size(); ++k)
          walk = h[k].from == path[k].first && h[k].to == path[k].second && legal.count(path[k]) > 0;
        if (!walk) v.require(false, "history is not the legal walk");
        // One deployed version per (model, target).
        std::map<ComponentId, int> seen;
        for (const auto& [key, ver] : reg.deployments())
          if (!seen.emplace(key.second, ver).second) v.require(false, "two deployed versions at one target");
      }
    }
    v.detail << " accepted=" << accepted << " rejected=" << rejected;
    v.require(accepted > 1000 && rejected > 1000, "both outcomes exercised");
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
