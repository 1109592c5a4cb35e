#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "smo/topology.hpp"

namespace smo {

enum class FieldType { Numeric, Categorical };

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::Numeric;
  std::vector<std::string> vocab;  // categorical only
  double lo = 0.0;                 // numeric valid range
  double hi = 1.0;
  /// Identifier-like fields that must be pseudonymized before leaving the source.
  bool sensitive = false;

  bool operator==(const FieldSpec&) const = default;
};

/// A field value as held by a managed function. std::monostate is MISSING.
using FieldValue = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const FieldValue& v) { return std::holds_alternative<std::monostate>(v); }

struct Emission {
  enum class Mode { Batch, Streaming };
  Mode mode = Mode::Batch;
  std::size_t size = 0;
  Tick interval = 0;  // streaming only
};

struct SourceSpec {
  ComponentId owner;
  std::vector<FieldSpec> schema;
  /// One per encoded column: numeric fields one column, categorical one per vocab entry.
  std::vector<double> coefficients;
  double bias = 0.0;
  double noise_sigma = 0.0;
  double duplicate_rate = 0.0;
  double missing_rate = 0.0;
  double error_rate = 0.0;
  /// Out-of-range errors land at lo + (hi - lo) * error_factor.
  double error_factor = 10.0;
  Emission emission;
  /// When set, targets become labels: 1 if the noisy linear score exceeds it.
  std::optional<double> label_threshold;
};

struct ManagementRecord {
  std::uint64_t record_id = 0;
  ComponentId source;
  Tick tick = 0;
  std::map<std::string, FieldValue> features;
  double target = 0.0;
  /// Ground truth for poisoning experiments. Never crosses into pipeline or learn.
  bool poisoned = false;

  bool operator==(const ManagementRecord&) const = default;
};

/// floor(n * rate), robust to the representation error of decimal rates.
std::size_t floor_count(std::size_t n, double rate);

/// Width of the encoded feature vector for `schema`.
std::size_t encoded_width(const std::vector<FieldSpec>& schema);

/// Numeric values as-is, categorical values one-hot in vocab order.
/// Throws Error(SchemaMismatch) on missing or unknown values.
std::vector<double> encode_features(const std::vector<FieldSpec>& schema,
                                    const std::map<std::string, FieldValue>& features);

/// Throws Error(ConfigError) for rates outside [0,1], sigma < 0, empty vocab,
/// inverted ranges or a zero streaming interval; Error(SchemaMismatch) when the
/// coefficient count differs from the encoded width.
void validate_source(const SourceSpec& spec, const std::string& path = "source");

/// n base records, then floor(n*missing_rate) records get one feature MISSING
/// and floor(n*error_rate) records get one numeric feature out of range, then
/// floor(n*duplicate_rate) copies of base records are appended with fresh ids.
/// Ids run from first_id upward.
std::vector<ManagementRecord> generate_batch(const SourceSpec& spec, std::size_t n, std::uint64_t seed,
                                             std::uint64_t first_id = 0, Tick tick = 0);

/// Number of records generate_batch(spec, n, ...) returns.
std::size_t batch_output_size(const SourceSpec& spec, std::size_t n);

/// Streaming emission ticks in (from, to]: the multiples of the interval.
std::vector<Tick> emission_ticks(const Emission& emission, Tick from, Tick to);

/// Ground-truth linear score (before noise) of a clean record.
double true_score(const SourceSpec& spec, const std::map<std::string, FieldValue>& features);

}  // namespace smo
