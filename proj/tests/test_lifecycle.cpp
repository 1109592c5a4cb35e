#include <cmath>
#include <set>

#include "doctest.h"
#include "smo/error.hpp"
#include "smo/lifecycle.hpp"
#include "smo/rng.hpp"

using namespace smo;

namespace {

ComponentId id(const char* text) { return ComponentId::parse(text); }

Errc code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an smo::Error");
  return Errc::ConfigError;
}

ModelArtifact artifact(std::vector<double> w, double b = 0.0) {
  ModelArtifact a;
  a.parameters.weights = std::move(w);
  a.parameters.bias = b;
  for (std::size_t j = 0; j < a.parameters.width(); ++j) a.feature_schema.push_back("f" + std::to_string(j));
  return a;
}

Dataset local(std::vector<std::vector<double>> rows, std::vector<double> y) {
  Dataset d;
  for (std::size_t j = 0; j < rows.front().size(); ++j) d.feature_names.push_back("f" + std::to_string(j));
  d.rows = std::move(rows);
  d.targets = std::move(y);
  return d;
}

void walk_to_monitored(Registry& r, const std::string& m) {
  r.open(m, 0);
  r.transition(m, LifecycleState::Preprocessed, 1);
  r.register_internal(m, artifact({1.0}), 2);
  r.transition(m, LifecycleState::Validated, 3);
  r.transition(m, LifecycleState::Deployed, 4);
  r.transition(m, LifecycleState::Monitored, 5);
}

TopologyConfig mda_topology() {
  TopologyConfig cfg;
  cfg.components = {{ComponentKind::NSSMF}, {ComponentKind::NFVO},          {ComponentKind::MdaSystem3GPP},
                    {ComponentKind::NFMF, 2}, {ComponentKind::NonRtRic}};
  return cfg;
}

}  // namespace

TEST_CASE("transition table") {
  Registry r;
  r.open("m", 0);
  CHECK(code_of([&] { r.transition("m", LifecycleState::Deployed, 1); }) == Errc::IllegalTransition);
  walk_to_monitored(r, "n");
  r.transition("n", LifecycleState::Refining, 6);
  r.register_internal("n", artifact({2.0}), 7);
  r.transition("n", LifecycleState::Validated, 8);
  const auto& e = r.get("n");
  CHECK(e.version == 2);
  CHECK(e.archive.size() == 1);
  CHECK(e.artifact->version == 2);
  CHECK(e.history.size() == 8);
  CHECK(history_is_legal(e));
  // Monitored -> Refining -> Trained -> Validated.
  CHECK(e.history[5].from == LifecycleState::Monitored);
  CHECK(e.history[7].to == LifecycleState::Validated);
}

TEST_CASE("internal registration lands in Trained") {
  Registry r;
  r.open("m", 0);
  r.transition("m", LifecycleState::Preprocessed, 0);
  const auto& e = r.register_internal("m", artifact({1, 2}), 3);
  CHECK(e.version == 1);
  CHECK(e.state == LifecycleState::Trained);
}

TEST_CASE("external artifacts validate before registration") {
  Registry r;
  const auto data = local({{1.0}, {2.0}}, {2.0, 4.0});
  const auto& e = r.register_external("x", artifact({2.0}), data, 0.01, 0);
  CHECK(e.state == LifecycleState::Validated);
  CHECK(e.artifact->origin == Origin::External);
  CHECK(history_is_legal(e));
  CHECK(code_of([&] { r.register_external("y", artifact({2.0, 1.0}), data, 0.01, 0); }) == Errc::InvalidArtifact);
  CHECK(code_of([&] { r.register_external("z", artifact({1.0}), data, 0.01, 0); }) == Errc::InvalidArtifact);
  auto broken = artifact({1.0});
  broken.feature_schema.push_back("extra");
  CHECK(code_of([&] { validate_artifact(broken); }) == Errc::InvalidArtifact);
  CHECK_FALSE(r.contains("z"));
}

TEST_CASE("artifact and registry json round trip") {
  auto a = artifact({0.1, 1.0 / 3.0}, -2.5);
  a.metrics.mse = 0.123456789012345;
  a.packaged = true;
  a.created_tick = 17;
  CHECK(artifact_from_json(to_json(a)) == a);
  CHECK(code_of([] { artifact_from_json(nlohmann::json{{"kind", "Svm"}}); }) == Errc::InvalidArtifact);
  CHECK(code_of([] { artifact_from_json(nlohmann::json::object()); }) == Errc::InvalidArtifact);

  Registry r;
  walk_to_monitored(r, "m");
  r.record_deployment("m", id("MdaSystem3GPP#0"), 1);
  CHECK(registry_from_json(to_json(r)) == r);
}

TEST_CASE("refinement budget") {
  Registry r;
  walk_to_monitored(r, "m");
  r.begin_refinement("m", 1, 6);
  r.register_internal("m", artifact({1.5}), 7);
  r.transition("m", LifecycleState::Validated, 8);
  r.transition("m", LifecycleState::Deployed, 9);
  r.transition("m", LifecycleState::Monitored, 10);
  r.record_deployment("m", id("NFMF#0"), 2);
  CHECK(code_of([&] { r.begin_refinement("m", 1, 11); }) == Errc::RefinementBudgetExhausted);
  CHECK(r.get("m").state == LifecycleState::Retired);
  CHECK_FALSE(r.deployed_version("m", id("NFMF#0")));
}

TEST_CASE("deploy meters one artifact on the 3GPP termination interface") {
  Simulator sim(build_topology(mda_topology()));
  Registry r;
  r.open("m", 0);
  r.transition("m", LifecycleState::Preprocessed, 0);
  r.register_internal("m", artifact({1.0, 2.0}), 0);
  CHECK(code_of([&] { deploy(sim, r, "m", id("AimlFunction#0"), {id("MdaSystem3GPP#0")}, 24); }) ==
        Errc::IllegalTransition);
  r.transition("m", LifecycleState::Validated, 0);
  bool live = false;
  deploy(sim, r, "m", id("AimlFunction#0"), {id("MdaSystem3GPP#0")}, 24, [&] { live = true; });
  CHECK(r.get("m").state == LifecycleState::Deployed);
  sim.run_until_idle(100);
  CHECK(live);
  CHECK(r.get("m").state == LifecycleState::Monitored);
  CHECK(r.deployed_version("m", id("MdaSystem3GPP#0")) == 1);
  CHECK(sim.meter(InterfaceName::NSSMF_NonRTRIC, PayloadKind::ModelArtifact).messages == 1);
  CHECK(sim.meter(InterfaceName::NSSMF_NonRTRIC).down.bytes == 24 + 24);
}

TEST_CASE("deploy refuses failed or unknown targets") {
  Simulator sim(build_topology(mda_topology()));
  Registry r;
  r.register_external("x", artifact({1.0}), local({{1.0}}, {1.0}), 1.0, 0);
  sim.set_failed(id("NFMF#1"), true);
  CHECK(code_of([&] { deploy(sim, r, "x", id("AimlFunction#0"), {id("NFMF#1")}, 8); }) == Errc::ComponentDown);
  CHECK(code_of([&] { deploy(sim, r, "x", id("AimlFunction#0"), {id("VIM#0")}, 8); }) == Errc::ConfigError);
  CHECK(r.get("x").state == LifecycleState::Validated);
}

TEST_CASE("artifact bytes and inference") {
  auto a = artifact({1.0, 2.0, 3.0});
  RecordSizes sizes;
  CHECK(artifact_bytes(a, sizes, 1.5) == 32);
  a.packaged = true;
  CHECK(artifact_bytes(a, sizes, 1.5) == 48);

  ModelArtifact s;
  s.kind = ModelKind::LinearSgd;
  s.parameters.weights = {2.0};
  s.parameters.bias = 1.0;
  s.feature_schema = {"x"};
  s.scaling.columns = {{ColumnTransform::Source::Numeric, "x", "x", {}, {}, 10.0, 5.0}};
  CHECK(infer(s, {{"x", 20.0}}) == 5.0);
}

TEST_CASE("monitor window") {
  MonitorWindow w(3, 1.0, 1.5, 3);
  for (int i = 0; i < 4; ++i) w.ingest(i, 0.0, i);
  CHECK(w.size() == 3);
  CHECK(w.samples().front().prediction == 1.0);
  CHECK(w.mse() == doctest::Approx((1.0 + 4.0 + 9.0) / 3.0));

  MonitorWindow zero(4, 1.0, 1.5, 1);
  zero.ingest(1.0, 1.0, 0);
  CHECK(zero.mse() == 0.0);

  MonitorWindow drift(2, 1.0, 1.5, 2);
  drift.ingest(0.0, std::sqrt(2.0), 0);
  CHECK_FALSE(drift.drift());
  drift.ingest(std::sqrt(2.0), 0.0, 1);
  CHECK(drift.drift());

  MonitorWindow edge(1, 1.0, 1.5, 1);
  edge.ingest(1.0, 0.0, 0);
  CHECK_FALSE(edge.drift());

  Rng rng(3);
  MonitorWindow running(17, 0.5, 2.0, 5);
  for (int i = 0; i < 500; ++i) {
    running.ingest(rng.normal(), rng.normal() * 3, i);
    CHECK(running.mse() == doctest::Approx(running.recomputed_mse()).epsilon(1e-12));
  }
}

TEST_CASE("fuzzed lifecycle sequences stay on the legal digraph") {
  constexpr LifecycleState all[] = {LifecycleState::Collected, LifecycleState::Preprocessed, LifecycleState::Trained,
                                    LifecycleState::Validated, LifecycleState::Deployed,     LifecycleState::Monitored,
                                    LifecycleState::Refining,  LifecycleState::Retired};
  const std::set<std::pair<int, int>> legal{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {3, 7}, {4, 5}, {5, 6}, {5, 7}, {6, 2}};
  const ComponentId targets[] = {id("NFMF#0"), id("NFMF#1"), id("MdaSystem3GPP#0")};
  Rng rng(2026);
  std::size_t accepted = 0, rejected = 0;
  for (int run = 0; run < 300; ++run) {
    Registry r;
    r.open("m", 0);
    for (Tick t = 1; t < 60; ++t) {
      const auto from = r.get("m").state;
      const auto to = all[rng.below(8)];
      const bool ok = legal.count({static_cast<int>(from), static_cast<int>(to)}) > 0;
      try {
        if (to == LifecycleState::Trained)
          r.register_internal("m", artifact({rng.normal()}), t);
        else
          r.transition("m", to, t);
        CHECK(ok);
        ++accepted;
        if (to == LifecycleState::Monitored) r.record_deployment("m", targets[rng.below(3)], r.get("m").version);
      } catch (const Error& e) {
        CHECK_FALSE(ok);
        CHECK(e.code() == Errc::IllegalTransition);
        CHECK(r.get("m").state == from);
        ++rejected;
      }
      CHECK(history_is_legal(r.get("m")));
      std::set<std::pair<std::string, ComponentId>> keys;
      for (const auto& [key, v] : r.deployments()) {
        CHECK(keys.insert(key).second);
        CHECK(v <= r.get("m").version);
      }
    }
    const auto& e = r.get("m");
    for (std::size_t k = 1; k < e.archive.size(); ++k) CHECK(e.archive[k].version > e.archive[k - 1].version);
  }
  CHECK(accepted > 100);
  CHECK(rejected > 100);
}
