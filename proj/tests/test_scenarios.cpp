#include <algorithm>
#include <fstream>
#include <set>

#include "doctest.h"
#include "smo/config.hpp"
#include "smo/error.hpp"
#include "smo/rng.hpp"
#include "smo/scenarios.hpp"

using namespace smo;
using nlohmann::json;

namespace {

const std::string kConfigs = std::string(SMO_SOURCE_DIR) + "/configs";

json doc(const std::string& name) {
  std::ifstream in(kConfigs + "/" + name + ".json");
  REQUIRE(in);
  return json::parse(in);
}

RunResult run_doc(const json& d) { return run_scenario(parse_config(d, kConfigs)); }
RunResult run(const std::string& name) { return run_doc(doc(name)); }

Error error_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an smo::Error");
  return Error(Errc::ConfigError, "");
}

ModelParameters linear(std::vector<double> w, double b) {
  ModelParameters p;
  p.weights = std::move(w);
  p.bias = b;
  return p;
}

DomainModel member(const char* owner, ModelParameters p, std::size_t n) {
  return {ComponentId::parse(owner), std::move(p), n, 1, {"x", "y"}};
}

// Deliveries of `payload` over either termination interface.
std::size_t termination_deliveries(const RunResult& r, PayloadKind payload, std::int64_t* bytes = nullptr) {
  std::size_t n = 0;
  for (const auto& e : r.sim->log()) {
    if (e.type != EventType::Deliver || !e.iface || !is_termination_interface(*e.iface)) continue;
    if (e.payload != payload) continue;
    ++n;
    if (bytes) *bytes += e.bytes;
  }
  return n;
}

}  // namespace

TEST_CASE("aggregation hand fixtures") {
  // Uniform mean of two members.
  auto u = aggregate(ModelKind::LinearSgd,
                     {member("MdaSystem3GPP#0", linear({1, 2}, 0), 10), member("MdaSystemNFV#0", linear({3, 6}, 2), 30)},
                     Aggregation::Uniform);
  CHECK(u.weights == std::vector<double>{2, 4});
  CHECK(u.bias == 1);

  // Sample-count weights 1/4 and 3/4.
  auto s = aggregate(ModelKind::LinearSgd,
                     {member("MdaSystem3GPP#0", linear({1, 2}, 0), 10), member("MdaSystemNFV#0", linear({3, 6}, 2), 30)},
                     Aggregation::SampleCount);
  CHECK(s.weights[0] == doctest::Approx(2.5));
  CHECK(s.weights[1] == doctest::Approx(5.0));
  CHECK(s.bias == doctest::Approx(1.5));

  // Three members, weights 1/6, 2/6, 3/6.
  auto t = aggregate(ModelKind::LinearSgd,
                     {member("MdaSystem3GPP#0", linear({6, 0}, 6), 1), member("MdaSystem3GPP#1", linear({0, 6}, 0), 2),
                      member("MdaSystemNFV#0", linear({0, 0}, -6), 3)},
                     Aggregation::SampleCount);
  CHECK(t.weights[0] == doctest::Approx(1.0));
  CHECK(t.weights[1] == doctest::Approx(2.0));
  CHECK(t.bias == doctest::Approx(-2.0));
}

TEST_CASE("aggregation is permutation invariant and idempotent") {
  Rng gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DomainModel> ms;
    const auto k = 2 + gen.below(4);
    for (std::size_t i = 0; i < k; ++i) {
      auto owner = "MdaSystem3GPP#" + std::to_string(i);
      ms.push_back({ComponentId::parse(owner),
                    linear({gen.uniform(-5, 5), gen.uniform(-5, 5), gen.uniform(-5, 5)}, gen.uniform(-1, 1)),
                    1 + gen.below(500), 1, {"a", "b", "c"}});
    }
    for (auto mode : {Aggregation::Uniform, Aggregation::SampleCount}) {
      const auto ref = aggregate(ModelKind::LinearSgd, ms, mode);
      auto shuffled = ms;
      for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[gen.below(i)]);
      CHECK(aggregate(ModelKind::LinearSgd, shuffled, mode) == ref);
    }
    auto same = ms;
    for (auto& m : same) m.parameters = ms.front().parameters;
    CHECK(aggregate(ModelKind::LinearSgd, same, Aggregation::SampleCount) == ms.front().parameters);
  }
}

TEST_CASE("aggregation errors") {
  CHECK(error_of([] { aggregate(ModelKind::LinearSgd, {}, Aggregation::Uniform); }).code() == Errc::InsufficientData);
  auto a = member("MdaSystem3GPP#0", linear({1, 2}, 0), 1);
  auto b = member("MdaSystemNFV#0", linear({1, 2, 3}, 0), 1);
  CHECK(error_of([&] { aggregate(ModelKind::LinearSgd, {a, b}, Aggregation::Uniform); }).code() == Errc::SchemaMismatch);
  b = member("MdaSystemNFV#0", linear({1, 2}, 0), 1);
  b.feature_schema = {"y", "x"};
  CHECK(error_of([&] { aggregate(ModelKind::LinearSgd, {a, b}, Aggregation::Uniform); }).code() == Errc::SchemaMismatch);
  CHECK(error_of([&] { aggregate(ModelKind::DecisionStump, {a}, Aggregation::Uniform); }).code() ==
        Errc::UnsupportedKind);
}

TEST_CASE("config errors name the offending field") {
  auto d = doc("b_centralized");
  d["pipeline"]["split"] = {{"train", 0.9}, {"val", 0.3}, {"test", 0.3}};
  auto e = error_of([&] { parse_config(d, kConfigs); });
  CHECK(e.code() == Errc::ConfigError);
  CHECK(e.field().find("pipeline.split") == 0);

  d = doc("b_centralized");
  d["scenario"]["kind"] = "D";
  CHECK(error_of([&] { parse_config(d, kConfigs); }).field() == "scenario.kind");

  d = doc("b_centralized");
  d["scenario"]["mode"] = "share-models";
  CHECK(error_of([&] { parse_config(d, kConfigs); }).field() == "scenario.mode");

  d = doc("b_centralized");
  d["pipeline"]["bogus"] = 1;
  CHECK(error_of([&] { parse_config(d, kConfigs); }).field() == "pipeline.bogus");

  d = doc("b_centralized");
  d["topology"]["links"] = {{{"a", "NSSMF#0"}, {"b", "MdaSystemNFV#0"}, {"interface", "NFVO_NonRTRIC"}}};
  CHECK(error_of([&] { parse_config(d, kConfigs); }).code() == Errc::UndeclaredRoute);

  d = doc("b_centralized");
  d["sources"] = json::array();
  CHECK(error_of([&] { parse_config(d, kConfigs); }).code() == Errc::NoDataSources);

  d = doc("b_drift_privacy");
  d["harness"]["privacy"].erase("key");
  CHECK(error_of([&] { parse_config(d, kConfigs); }).code() == Errc::MissingKey);

  d = doc("a_import_model");
  d["scenario-a"]["artifact"] = "fixtures/missing.json";
  CHECK(error_of([&] { parse_config(d, kConfigs); }).code() == Errc::FileNotFound);

  d = doc("c_share_models");
  d["learn"] = {{"kind", "DecisionStump"}};
  CHECK(error_of([&] { parse_config(d, kConfigs); }).code() == Errc::UnsupportedKind);
}

TEST_CASE("scenario C needs two domains") {
  auto d = doc("c_share_models");
  d["sources"][1]["owner"] = "NSSMF#0";
  CHECK(error_of([&] { parse_config(d, kConfigs); }).code() == Errc::InsufficientDomains);
}

TEST_CASE("scenario B collects raw data over the terminations and learns") {
  const auto cfg = parse_config(doc("b_centralized"), kConfigs);
  const auto r = run_scenario(cfg);
  REQUIRE_FALSE(r.failure);
  CHECK(termination_deliveries(r, PayloadKind::RawData) == cfg.sources.size() * cfg.batch_rounds);
  REQUIRE(r.test_metrics);
  REQUIRE(r.baseline_test_mse);
  CHECK(r.test_metrics->mse < *r.baseline_test_mse);
  CHECK(r.registry.get(r.model_id).state == LifecycleState::Monitored);
  CHECK(history_is_legal(r.registry.get(r.model_id)));

  CHECK(r.signaling == signaling_from_meters(*r.sim));
  CHECK(r.signaling == signaling_report(r.sim->log(), r.sim->topology()));
  CHECK(r.report["signaling"] == to_json(r.signaling));
}

TEST_CASE("scenario C share-models keeps raw data local") {
  const auto r = run("c_share_models");
  REQUIRE_FALSE(r.failure);
  CHECK(termination_deliveries(r, PayloadKind::RawData) == 0);
  CHECK(termination_deliveries(r, PayloadKind::CleansedData) == 0);
  CHECK(r.signaling.termination_raw_bytes == 0);
  CHECK(r.rounds.size() == 3);
  CHECK(r.registry.get(r.model_id).artifact->origin == Origin::Aggregated);
  CHECK(r.signaling == signaling_report(r.sim->log(), r.sim->topology()));
}

TEST_CASE("scenario C share-data moves cleansed data only") {
  const auto r = run("c_share_data");
  REQUIRE_FALSE(r.failure);
  CHECK(termination_deliveries(r, PayloadKind::RawData) == 0);
  CHECK(termination_deliveries(r, PayloadKind::CleansedData) == 2);
}

TEST_CASE("scenario A imports and validates") {
  const auto ok = run("a_import_model");
  REQUIRE_FALSE(ok.failure);
  CHECK_FALSE(ok.rejection);
  CHECK(ok.registry.get(ok.model_id).artifact->origin == Origin::External);
  REQUIRE(ok.live);

  const auto rejected = run("a_import_model_rejected");
  CHECK_FALSE(rejected.failure);
  REQUIRE(rejected.rejection);
  CHECK_FALSE(rejected.live);
  CHECK(std::any_of(rejected.sim->log().begin(), rejected.sim->log().end(),
                    [](const LogEntry& e) { return e.type == EventType::Rejection; }));

  // The fixture dataset is the transformed B dataset for the same seed.
  const auto imported = run("a_import_data");
  const auto b = run("b_centralized");
  REQUIRE(imported.live);
  REQUIRE(b.live);
  CHECK(imported.live->parameters == b.live->parameters);
}

TEST_CASE("runs are deterministic and seed-sensitive") {
  for (const auto* name : {"b_centralized", "c_share_models", "b_failover"}) {
    const auto cfg = parse_config(doc(name), kConfigs);
    CHECK(run_scenario(cfg).sim->log_jsonl() == run_scenario(cfg).sim->log_jsonl());
    // The log carries sizes, not values, so a new seed shows in the model.
    CHECK(run_scenario(with_seed(cfg, 8)).live->parameters != run_scenario(cfg).live->parameters);
  }
}

TEST_CASE("failover resumes training on the replica") {
  const auto r = run("b_failover");
  REQUIRE_FALSE(r.failure);
  REQUIRE(r.failover);
  CHECK(r.failover->detected_at == 14);
  CHECK(r.failover->downtime == 4);
  CHECK(r.failover->promoted == ComponentId::parse("AimlFunction#1"));
  CHECK(r.restored_equals_checkpoint == true);
  REQUIRE(r.live);
  // Work granted before the failure is lost; the replica retrains from tick 15.
  const auto& jobs = r.schedule.jobs;
  REQUIRE(jobs.size() == 2);
  CHECK(jobs[0].completion == 10);
  CHECK(jobs[1].completion == jobs[1].ideal);

  const auto spof = run("b_failover_spof");
  CHECK(spof.failure == "SinglePointFailure");
}

TEST_CASE("poisoning and filtering") {
  const auto clean = run("b_centralized");
  const auto off = run("b_poisoning");
  const auto on = run("b_poisoning_filtered");
  CHECK(off.poisoned > 0);
  CHECK(on.poisoned == off.poisoned);
  REQUIRE(on.detection);
  CHECK(on.detection->precision > 0.9);
  CHECK(on.detection->recall > 0.9);
  CHECK(*off.holdout_mse > *clean.holdout_mse);
  CHECK(*on.holdout_mse < *off.holdout_mse);
}

TEST_CASE("drift is detected and refined") {
  const auto r = run("b_drift_privacy");
  REQUIRE_FALSE(r.failure);
  REQUIRE(r.drift_detected_at);
  CHECK(*r.drift_detected_at > 120);
  CHECK(r.time_to_detection == *r.drift_detected_at - 120);
  CHECK(r.refinements >= 1);
  CHECK(r.registry.get(r.model_id).version == 1 + r.refinements);
  CHECK(history_is_legal(r.registry.get(r.model_id)));
  REQUIRE(r.dataset);
  for (const auto& name : r.dataset->feature_names) CHECK(name.find("embb") == std::string::npos);
}

TEST_CASE("node contention delays retraining behind NF jobs") {
  const auto r = run("b_contention");
  REQUIRE_FALSE(r.failure);
  const auto& jobs = r.schedule.jobs;
  auto train = std::find_if(jobs.begin(), jobs.end(), [](const JobOutcome& j) { return j.job_class == JobClass::Retraining; });
  REQUIRE(train != jobs.end());
  CHECK(train->delay > 0);
  CHECK(r.schedule.nf_delay_max == 0);
}
