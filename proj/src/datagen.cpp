#include "smo/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "smo/error.hpp"
#include "smo/rng.hpp"

namespace smo {

std::size_t floor_count(std::size_t n, double rate) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * rate + 1e-9));
}

std::size_t encoded_width(const std::vector<FieldSpec>& schema) {
  std::size_t width = 0;
  for (const auto& f : schema) width += f.type == FieldType::Numeric ? 1 : f.vocab.size();
  return width;
}

std::vector<double> encode_features(const std::vector<FieldSpec>& schema,
                                    const std::map<std::string, FieldValue>& features) {
  std::vector<double> out;
  out.reserve(encoded_width(schema));
  for (const auto& f : schema) {
    const auto it = features.find(f.name);
    if (it == features.end() || is_missing(it->second))
      throw Error(Errc::SchemaMismatch, "field '" + f.name + "' is absent or missing");
    if (f.type == FieldType::Numeric) {
      const auto* v = std::get_if<double>(&it->second);
      if (!v) throw Error(Errc::SchemaMismatch, "field '" + f.name + "' is not numeric");
      out.push_back(*v);
    } else {
      const auto* v = std::get_if<std::string>(&it->second);
      if (!v) throw Error(Errc::SchemaMismatch, "field '" + f.name + "' is not categorical");
      const auto pos = std::find(f.vocab.begin(), f.vocab.end(), *v);
      if (pos == f.vocab.end()) throw Error(Errc::SchemaMismatch, "'" + *v + "' not in vocab of " + f.name);
      for (const auto& word : f.vocab) out.push_back(word == *v ? 1.0 : 0.0);
    }
  }
  return out;
}

void validate_source(const SourceSpec& spec, const std::string& path) {
  auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(spec.duplicate_rate)) throw Error(Errc::ConfigError, "rate outside [0,1]", path + ".duplicate_rate");
  if (!in_unit(spec.missing_rate)) throw Error(Errc::ConfigError, "rate outside [0,1]", path + ".missing_rate");
  if (!in_unit(spec.error_rate)) throw Error(Errc::ConfigError, "rate outside [0,1]", path + ".error_rate");
  if (!(spec.noise_sigma >= 0.0)) throw Error(Errc::ConfigError, "noise sigma must be >= 0", path + ".noise_sigma");
  if (!(spec.error_factor > 1.0)) throw Error(Errc::ConfigError, "error factor must exceed 1", path + ".error_factor");
  if (spec.schema.empty()) throw Error(Errc::ConfigError, "schema is empty", path + ".schema");
  std::set<std::string> names;
  bool any_numeric = false;
  for (std::size_t i = 0; i < spec.schema.size(); ++i) {
    const auto& f = spec.schema[i];
    const auto fpath = path + ".schema[" + std::to_string(i) + "]";
    if (f.name.empty() || !names.insert(f.name).second)
      throw Error(Errc::ConfigError, "field names must be unique and non-empty", fpath);
    if (f.type == FieldType::Categorical && f.vocab.empty())
      throw Error(Errc::ConfigError, "categorical field needs a vocab", fpath);
    if (f.type == FieldType::Numeric) {
      any_numeric = true;
      if (!(f.lo < f.hi)) throw Error(Errc::ConfigError, "range must satisfy lo < hi", fpath);
    }
  }
  if (spec.error_rate > 0.0 && !any_numeric)
    throw Error(Errc::ConfigError, "out-of-range errors need a numeric field", path + ".error_rate");
  if (spec.coefficients.size() != encoded_width(spec.schema))
    throw Error(Errc::SchemaMismatch,
                "expected " + std::to_string(encoded_width(spec.schema)) + " coefficients, got " +
                    std::to_string(spec.coefficients.size()),
                path + ".coefficients");
  if (spec.emission.mode == Emission::Mode::Streaming && spec.emission.interval <= 0)
    throw Error(Errc::ConfigError, "streaming interval must be >= 1", path + ".emission.interval");
}

double true_score(const SourceSpec& spec, const std::map<std::string, FieldValue>& features) {
  const auto x = encode_features(spec.schema, features);
  double score = spec.bias;
  for (std::size_t j = 0; j < x.size(); ++j) score += spec.coefficients[j] * x[j];
  return score;
}

std::size_t batch_output_size(const SourceSpec& spec, std::size_t n) {
  return n + floor_count(n, spec.duplicate_rate);
}

std::vector<ManagementRecord> generate_batch(const SourceSpec& spec, std::size_t n, std::uint64_t seed,
                                             std::uint64_t first_id, Tick tick) {
  if (spec.coefficients.size() != encoded_width(spec.schema))
    throw Error(Errc::SchemaMismatch, "coefficient width does not match encoded schema width");

  Rng values(derive_seed(seed, "values"));
  std::vector<ManagementRecord> out;
  out.reserve(batch_output_size(spec, n));
  for (std::size_t i = 0; i < n; ++i) {
    ManagementRecord r;
    r.record_id = first_id + i;
    r.source = spec.owner;
    r.tick = tick;
    for (const auto& f : spec.schema) {
      if (f.type == FieldType::Numeric)
        r.features[f.name] = values.uniform(f.lo, f.hi);
      else
        r.features[f.name] = f.vocab[values.below(f.vocab.size())];
    }
    const double noisy = true_score(spec, r.features) + spec.noise_sigma * values.normal();
    r.target = spec.label_threshold ? (noisy > *spec.label_threshold ? 1.0 : 0.0) : noisy;
    out.push_back(std::move(r));
  }

  std::vector<std::size_t> numeric_fields;
  for (std::size_t j = 0; j < spec.schema.size(); ++j)
    if (spec.schema[j].type == FieldType::Numeric) numeric_fields.push_back(j);

  Rng missing_rng(derive_seed(seed, "missing"));
  const auto missing_idx = missing_rng.sample(n, floor_count(n, spec.missing_rate));
  std::map<std::size_t, std::size_t> missing_field;
  for (auto i : missing_idx) missing_field[i] = missing_rng.below(spec.schema.size());

  Rng error_rng(derive_seed(seed, "error"));
  const auto n_errors = floor_count(n, spec.error_rate);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i)
    if (!missing_field.count(i)) candidates.push_back(i);
  std::vector<std::size_t> error_idx;
  if (candidates.size() >= n_errors) {
    for (auto k : error_rng.sample(candidates.size(), n_errors)) error_idx.push_back(candidates[k]);
  } else {
    error_idx = error_rng.sample(n, n_errors);
  }
  for (auto i : error_idx) {
    auto choice = numeric_fields[error_rng.below(numeric_fields.size())];
    if (const auto m = missing_field.find(i); m != missing_field.end() && choice == m->second) {
      for (auto alt : numeric_fields)
        if (alt != m->second) choice = alt;
    }
    const auto& f = spec.schema[choice];
    out[i].features[f.name] = f.lo + (f.hi - f.lo) * spec.error_factor;
  }
  for (const auto& [i, field] : missing_field) out[i].features[spec.schema[field].name] = std::monostate{};

  Rng dup_rng(derive_seed(seed, "duplicate"));
  const auto dup_idx = dup_rng.sample(n, floor_count(n, spec.duplicate_rate));
  for (std::size_t k = 0; k < dup_idx.size(); ++k) {
    ManagementRecord copy = out[dup_idx[k]];
    copy.record_id = first_id + n + k;
    out.push_back(std::move(copy));
  }
  return out;
}

std::vector<Tick> emission_ticks(const Emission& emission, Tick from, Tick to) {
  if (emission.mode != Emission::Mode::Streaming) return {};
  if (emission.interval <= 0) throw Error(Errc::ConfigError, "streaming interval must be >= 1");
  std::vector<Tick> ticks;
  Tick first = (from / emission.interval + 1) * emission.interval;
  for (Tick t = first; t <= to; t += emission.interval) ticks.push_back(t);
  return ticks;
}

}  // namespace smo
