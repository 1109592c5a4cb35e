#include <set>

#include "doctest.h"
#include "smo/datagen.hpp"
#include "smo/error.hpp"
#include "smo/rng.hpp"

using namespace smo;

namespace {

SourceSpec one_numeric() {
  SourceSpec s;
  s.owner = ComponentId::parse("NSSMF#0");
  s.schema = {{"x", FieldType::Numeric, {}, 0.0, 10.0}};
  s.coefficients = {2.0};
  s.emission = {Emission::Mode::Batch, 10, 0};
  return s;
}

SourceSpec mixed(double dup, double miss, double err) {
  SourceSpec s;
  s.owner = ComponentId::parse("NFVO#0");
  s.schema = {{"a", FieldType::Numeric, {}, 0.0, 1.0},
              {"b", FieldType::Numeric, {}, -2.0, 2.0},
              {"c", FieldType::Categorical, {"p", "q", "r"}}};
  s.coefficients = {1.0, -0.5, 0.1, 0.2, 0.3};
  s.bias = 0.7;
  s.noise_sigma = 0.1;
  s.duplicate_rate = dup;
  s.missing_rate = miss;
  s.error_rate = err;
  return s;
}

std::size_t count_missing(const std::vector<ManagementRecord>& recs, std::size_t upto) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < upto; ++i)
    for (const auto& [_, v] : recs[i].features)
      if (is_missing(v)) {
        ++c;
        break;
      }
  return c;
}

std::size_t count_out_of_range(const SourceSpec& spec, const std::vector<ManagementRecord>& recs, std::size_t upto) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < upto; ++i)
    for (const auto& f : spec.schema) {
      const auto* v = std::get_if<double>(&recs[i].features.at(f.name));
      if (v && (*v < f.lo || *v > f.hi)) {
        ++c;
        break;
      }
    }
  return c;
}

}  // namespace

TEST_CASE("noiseless linear target") {
  auto s = one_numeric();
  std::map<std::string, FieldValue> x{{"x", 3.0}};
  CHECK(true_score(s, x) == 6.0);
  for (const auto& r : generate_batch(s, 20, 5))
    CHECK(r.target == 2.0 * std::get<double>(r.features.at("x")));
}

TEST_CASE("empty batch") { CHECK(generate_batch(one_numeric(), 0, 1).empty()); }

TEST_CASE("missing count follows the floor rule") {
  auto s = mixed(0.0, 0.2, 0.0);
  const auto recs = generate_batch(s, 50, 11);
  REQUIRE(recs.size() == 50);
  CHECK(count_missing(recs, 50) == 10);
}

TEST_CASE("coefficient width mismatch") {
  auto s = mixed(0, 0, 0);
  s.coefficients.pop_back();
  CHECK_THROWS_AS(generate_batch(s, 3, 1), Error);
  try {
    validate_source(s);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SchemaMismatch);
  }
}

TEST_CASE("streaming emission ticks") {
  Emission e{Emission::Mode::Streaming, 4, 5};
  CHECK(emission_ticks(e, 0, 20) == std::vector<Tick>{5, 10, 15, 20});
  auto s = one_numeric();
  s.emission = {Emission::Mode::Streaming, 4, 0};
  try {
    validate_source(s);
    FAIL("interval 0 accepted");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::ConfigError);
    CHECK(err.field() == "source.emission.interval");
  }
}

TEST_CASE("three batch requests of ten give thirty records") {
  auto s = one_numeric();
  std::size_t total = 0;
  for (int round = 0; round < 3; ++round) total += generate_batch(s, 10, derive_seed(1, "batch", round)).size();
  CHECK(total == 30);
}

TEST_CASE("imperfection counts and determinism hold for random specs") {
  Rng gen(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const double dup = gen.below(5) == 0 ? 0.0 : gen.uniform();
    const double miss = gen.uniform() * 0.5;
    const double err = gen.uniform() * 0.5;
    auto s = mixed(dup, miss, err);
    s.noise_sigma = gen.below(3) == 0 ? 0.0 : gen.uniform();
    const auto n = static_cast<std::size_t>(gen.below(120));
    const auto seed = gen.next();
    const auto recs = generate_batch(s, n, seed, 1000);
    REQUIRE(recs.size() == n + floor_count(n, dup));
    CHECK(recs.size() == batch_output_size(s, n));
    CHECK(count_missing(recs, n) == floor_count(n, miss));
    // Missing and error selections are disjoint while enough records remain.
    if (floor_count(n, miss) + floor_count(n, err) <= n)
      CHECK(count_out_of_range(s, recs, n) == floor_count(n, err));
    std::set<std::uint64_t> ids;
    for (const auto& r : recs) ids.insert(r.record_id);
    CHECK(ids.size() == recs.size());
    for (std::size_t k = n; k < recs.size(); ++k) {
      bool found = false;
      for (std::size_t i = 0; i < n && !found; ++i)
        found = recs[i].features == recs[k].features && recs[i].target == recs[k].target;
      CHECK(found);
    }
    CHECK(generate_batch(s, n, seed, 1000) == recs);
  }
}

TEST_CASE("clean noiseless records are exactly linear") {
  auto s = mixed(0, 0, 0);
  s.noise_sigma = 0.0;
  for (const auto& r : generate_batch(s, 100, 3)) {
    const auto x = encode_features(s.schema, r.features);
    double y = s.bias;
    for (std::size_t j = 0; j < x.size(); ++j) y += s.coefficients[j] * x[j];
    CHECK(r.target == y);
    CHECK_FALSE(r.poisoned);
  }
}

TEST_CASE("error values land at the configured factor") {
  auto s = one_numeric();
  s.error_rate = 1.0;
  for (const auto& r : generate_batch(s, 5, 9)) CHECK(std::get<double>(r.features.at("x")) == 100.0);
}

TEST_CASE("categorical one-hot encoding") {
  auto s = mixed(0, 0, 0);
  std::map<std::string, FieldValue> f{{"a", 0.5}, {"b", 1.0}, {"c", std::string("q")}};
  CHECK(encode_features(s.schema, f) == std::vector<double>{0.5, 1.0, 0.0, 1.0, 0.0});
  f["c"] = std::string("z");
  CHECK_THROWS_AS(encode_features(s.schema, f), Error);
}
