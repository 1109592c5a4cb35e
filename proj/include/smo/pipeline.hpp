#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smo/datagen.hpp"
#include "smo/topology.hpp"

namespace smo {

enum class Stage { Raw, Cleansed, Formatted, Transformed, Split };

std::string_view to_string(Stage stage);

struct Provenance {
  std::vector<ComponentId> sources;
  Tick window_start = 0;
  Tick window_end = 0;
  std::uint64_t config_hash = 0;

  bool operator==(const Provenance&) const = default;
};

/// A record as seen by the AI/ML Function: no ground-truth flags.
struct Row {
  std::uint64_t record_id = 0;
  ComponentId source;
  Tick tick = 0;
  std::map<std::string, FieldValue> fields;
  double target = 0.0;

  bool operator==(const Row&) const = default;
};

Row to_row(const ManagementRecord& record);

/// Heterogeneous rows for the Raw, Cleansed and Formatted stages.
struct Table {
  Stage stage = Stage::Raw;
  std::vector<Row> rows;
  /// Canonical column order; filled by format().
  std::vector<std::string> columns;
  Provenance provenance;
  /// Set when a source stayed silent for the whole collection window.
  bool partial = false;

  bool operator==(const Table&) const = default;
};

/// Field specs keyed by source-side field name.
using FieldCatalog = std::map<std::string, FieldSpec>;

FieldCatalog catalog_of(const std::vector<SourceSpec>& sources);

struct CanonicalSchema {
  /// Canonical fields in output column order.
  std::vector<FieldSpec> fields;
  /// Source field name -> canonical name. Canonical names map to themselves implicitly.
  std::map<std::string, std::string> rename;
};

// ---------------------------------------------------------------------------
// Collection

struct RecordSizes {
  std::int64_t record_bytes = 64;
  std::int64_t parameter_bytes = 8;
  std::int64_t prediction_bytes = 8;
};

struct CollectionSource {
  SourceSpec spec;
  std::uint64_t seed = 0;
  /// Source-side hook run on every emitted batch before transfer (poisoning,
  /// pseudonymization). Receives the nominal payload size, returns the metered one.
  std::function<std::int64_t(std::vector<ManagementRecord>&, std::int64_t)> at_source;
};

struct CollectionPlan {
  ComponentId collector;
  std::vector<CollectionSource> sources;
  /// Batch sources answer one request per batch round.
  int batch_rounds = 1;
  Tick round_interval = 1;
  /// Collection closes at start + window.
  Tick window = 10;
  RecordSizes sizes;
  PayloadKind payload = PayloadKind::RawData;
  std::shared_ptr<std::uint64_t> next_record_id = std::make_shared<std::uint64_t>(0);
};

/// Drives collection through the simulator: the collector sends a Control
/// request to every batch source each round, sources answer with their batch,
/// streaming sources push on their own schedule. When the window closes,
/// `done` receives the aggregated Raw table; silent sources are logged as
/// CollectionTimeout events and flag the table partial.
void collect(Simulator& sim, const CollectionPlan& plan, std::function<void(Table)> done);

// ---------------------------------------------------------------------------
// Preprocessing

/// Deduplicates (same record id or identical field tuple), imputes MISSING
/// numerics with the column median and categoricals with the column mode,
/// clamps numerics into their valid range. Accepts Raw or Cleansed input and
/// is idempotent. Throws Error(EmptyDataset) when nothing is left.
Table cleanse(Table table, const FieldCatalog& catalog);

/// Renames fields onto the canonical schema. Throws Error(UnmappableField) for
/// fields with no mapping or canonical fields a row does not provide.
Table format(Table table, const CanonicalSchema& schema);

enum class Scaling { ZScore, MinMax };

struct DerivedFeature {
  enum class Op { Product, Ratio };
  Op op = Op::Product;
  std::string a;
  std::string b;
};

struct TransformSpec {
  Scaling scaling = Scaling::ZScore;
  std::vector<DerivedFeature> derived;
};

struct ColumnTransform {
  enum class Source { Numeric, OneHot, Product, Ratio };
  Source source = Source::Numeric;
  std::string name;
  std::string input_a;
  std::string input_b;
  std::string category;  // one-hot only
  /// Scaled output is (v - center) / scale; scale 0 marks a constant column (output 0).
  double center = 0.0;
  double scale = 1.0;

  bool operator==(const ColumnTransform&) const = default;
};

/// Stored scaling/encoding recipe, reused at inference time.
struct TransformParams {
  Scaling scaling = Scaling::ZScore;
  std::vector<ColumnTransform> columns;

  std::vector<std::string> names() const;
  std::size_t width() const { return columns.size(); }
  bool empty() const { return columns.empty(); }
  std::vector<double> apply(const std::map<std::string, FieldValue>& fields) const;

  bool operator==(const TransformParams&) const = default;
};

nlohmann::json to_json(const TransformParams& params);
TransformParams transform_params_from_json(const nlohmann::json& j);

struct Dataset {
  Stage stage = Stage::Transformed;
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<std::uint64_t> record_ids;
  Provenance provenance;

  std::size_t size() const { return rows.size(); }
  std::size_t width() const { return feature_names.size(); }
  Dataset subset(const std::vector<std::size_t>& indices) const;

  bool operator==(const Dataset&) const = default;
};

/// Per-column sufficient statistics; lets separate domains agree on scaling
/// without exchanging records.
struct ColumnStats {
  std::string name;
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations
  double min = 0.0;
  double max = 0.0;

  void add(double v);
  void merge(const ColumnStats& other);
  double population_sd() const;
};

/// Raw (pre-scaling) values of every numeric and derived column of a Formatted table.
std::vector<ColumnStats> column_stats(const Table& formatted, const CanonicalSchema& schema,
                                      const TransformSpec& spec);

/// Builds the recipe from (possibly pooled) statistics.
TransformParams params_from_stats(const std::vector<ColumnStats>& stats, const CanonicalSchema& schema,
                                  const TransformSpec& spec);

struct TransformResult {
  Dataset dataset;
  TransformParams params;
};

/// Fits scaling on `formatted`, one-hot encodes categoricals and appends the
/// configured derived features. Derived features are computed from unscaled
/// inputs and then scaled like any numeric column.
TransformResult transform(const Table& formatted, const CanonicalSchema& schema, const TransformSpec& spec);

/// Applies stored parameters to a Formatted table.
Dataset apply_transform(const Table& formatted, const TransformParams& params);

// ---------------------------------------------------------------------------
// Exploration

struct FeatureSummary {
  std::string name;
  double mean = 0.0;
  double variance = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct ExplorationReport {
  std::vector<FeatureSummary> features;
  std::vector<std::vector<double>> correlation;
  std::vector<double> target_correlation;
  /// Feature indices by |target correlation| descending, ties by index.
  std::vector<std::size_t> ranking;
};

/// Pearson correlation; 0 when either side has zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Throws Error(InsufficientData) below two records.
ExplorationReport explore(const Dataset& dataset);

nlohmann::json to_json(const ExplorationReport& report);
void write_exploration_csv(std::ostream& out, const ExplorationReport& report);

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
};

struct SplitDataset {
  Dataset train;
  Dataset val;
  Dataset test;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
};

/// Throws Error(ConfigError) unless each ratio lies in [0,1] and they sum to 1 within 1e-9.
void validate_split(const SplitSpec& spec, const std::string& path = "split");

/// Seeded shuffle, then val and test get floor(n*ratio) records and train the rest.
SplitDataset split(const Dataset& dataset, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// CSV

/// Header row = feature names + "target"; values written round-trip exact.
void write_csv(std::ostream& out, const Dataset& dataset);
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);

}  // namespace smo
