#include "smo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "smo/error.hpp"
#include "smo/rng.hpp"

namespace smo {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Raw: return "Raw";
    case Stage::Cleansed: return "Cleansed";
    case Stage::Formatted: return "Formatted";
    case Stage::Transformed: return "Transformed";
    case Stage::Split: return "Split";
  }
  return "?";
}

Row to_row(const ManagementRecord& record) {
  return Row{record.record_id, record.source, record.tick, record.features, record.target};
}

FieldCatalog catalog_of(const std::vector<SourceSpec>& sources) {
  FieldCatalog catalog;
  for (const auto& s : sources) {
    for (const auto& f : s.schema) {
      const auto [it, inserted] = catalog.emplace(f.name, f);
      if (!inserted && !(it->second == f))
        throw Error(Errc::SchemaMismatch, "field '" + f.name + "' declared differently by two sources");
    }
  }
  return catalog;
}

// ---------------------------------------------------------------------------
// Collection

namespace {

using RecordBatch = std::shared_ptr<const std::vector<ManagementRecord>>;

struct CollectionState {
  Table table;
  std::vector<std::size_t> delivered;
  Tick closes_at = 0;
};

}  // namespace

void collect(Simulator& sim, const CollectionPlan& plan, std::function<void(Table)> done) {
  auto state = std::make_shared<CollectionState>();
  const Tick start = sim.now();
  state->closes_at = start + plan.window;
  state->delivered.assign(plan.sources.size(), 0);
  state->table.provenance.window_start = start;
  state->table.provenance.window_end = state->closes_at;

  auto ship = [&sim, plan, state](std::size_t i, std::vector<ManagementRecord> batch) {
    const auto& src = plan.sources[i];
    std::int64_t bytes = static_cast<std::int64_t>(batch.size()) * plan.sizes.record_bytes;
    if (src.at_source) bytes = src.at_source(batch, bytes);
    auto body = std::make_shared<const std::vector<ManagementRecord>>(std::move(batch));
    sim.transfer(src.spec.owner, plan.collector, plan.payload, bytes, RecordBatch(body),
                 [&sim, state, i](const InterfaceMessage& m) {
                   if (sim.now() > state->closes_at) return;
                   const auto& records = *std::any_cast<RecordBatch>(m.body);
                   for (const auto& r : records) state->table.rows.push_back(to_row(r));
                   state->delivered[i] += records.size();
                 },
                 "collect");
  };

  for (std::size_t i = 0; i < plan.sources.size(); ++i) {
    const auto& src = plan.sources[i];
    if (src.spec.emission.mode == Emission::Mode::Batch) {
      for (int round = 0; round < plan.batch_rounds; ++round) {
        const Tick at = start + round * plan.round_interval;
        if (at > state->closes_at) break;
        sim.schedule(at, [&sim, plan, i, round, ship] {
          const auto& s = plan.sources[i];
          sim.transfer(plan.collector, s.spec.owner, PayloadKind::Control, 0, {},
                       [&sim, plan, i, round, ship](const InterfaceMessage&) {
                         const auto& s2 = plan.sources[i];
                         const auto n = s2.spec.emission.size;
                         const auto first = *plan.next_record_id;
                         *plan.next_record_id += batch_output_size(s2.spec, n);
                         ship(i, generate_batch(s2.spec, n, derive_seed(s2.seed, "batch", round), first, sim.now()));
                       },
                       "collection-request");
        });
      }
    } else {
      const auto ticks = emission_ticks(src.spec.emission, start, state->closes_at);
      for (std::size_t k = 0; k < ticks.size(); ++k) {
        sim.schedule(ticks[k], [&sim, plan, i, k, ship] {
          const auto& s = plan.sources[i];
          const auto n = s.spec.emission.size;
          const auto first = *plan.next_record_id;
          *plan.next_record_id += batch_output_size(s.spec, n);
          ship(i, generate_batch(s.spec, n, derive_seed(s.seed, "stream", k), first, sim.now()));
        });
      }
    }
  }

  sim.schedule(
      state->closes_at,
      [&sim, plan, state, done] {
        for (std::size_t i = 0; i < plan.sources.size(); ++i) {
          const auto& owner = plan.sources[i].spec.owner;
          if (state->delivered[i] == 0) {
            sim.record(EventType::Timeout, owner, plan.collector, "CollectionTimeout");
            state->table.partial = true;
          } else if (std::find(state->table.provenance.sources.begin(), state->table.provenance.sources.end(),
                               owner) == state->table.provenance.sources.end()) {
            state->table.provenance.sources.push_back(owner);
          }
        }
        state->table.stage = Stage::Raw;
        done(std::move(state->table));
      },
      Phase::EndOfTick);
}

// ---------------------------------------------------------------------------
// Cleansing

namespace {

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<Row> dedup(std::vector<Row> rows) {
  std::set<std::uint64_t> ids;
  std::set<std::pair<std::map<std::string, FieldValue>, double>> tuples;
  std::vector<Row> kept;
  kept.reserve(rows.size());
  for (auto& r : rows) {
    if (!ids.insert(r.record_id).second) continue;
    if (!tuples.insert({r.fields, r.target}).second) continue;
    kept.push_back(std::move(r));
  }
  return kept;
}

}  // namespace

Table cleanse(Table table, const FieldCatalog& catalog) {
  if (table.stage != Stage::Raw && table.stage != Stage::Cleansed)
    throw Error(Errc::ConfigError, "cleanse expects a Raw table, got " + std::string(to_string(table.stage)));
  table.rows = dedup(std::move(table.rows));
  if (table.rows.empty()) throw Error(Errc::EmptyDataset, "no records left after deduplication");

  std::set<std::string> names;
  for (const auto& r : table.rows)
    for (const auto& [name, _] : r.fields) names.insert(name);

  for (const auto& name : names) {
    const auto spec_it = catalog.find(name);
    if (spec_it == catalog.end()) throw Error(Errc::SchemaMismatch, "field '" + name + "' not in catalog");
    const auto& spec = spec_it->second;
    if (spec.type == FieldType::Numeric) {
      std::vector<double> present;
      for (auto& r : table.rows) {
        auto it = r.fields.find(name);
        if (it == r.fields.end() || is_missing(it->second)) continue;
        auto* v = std::get_if<double>(&it->second);
        if (!v) throw Error(Errc::SchemaMismatch, "field '" + name + "' holds a non-numeric value");
        *v = std::clamp(*v, spec.lo, spec.hi);
        present.push_back(*v);
      }
      const double fill = present.empty() ? 0.5 * (spec.lo + spec.hi) : median_of(present);
      for (auto& r : table.rows)
        if (auto it = r.fields.find(name); it != r.fields.end() && is_missing(it->second)) it->second = fill;
    } else {
      std::map<std::string, std::size_t> counts;
      for (const auto& r : table.rows) {
        auto it = r.fields.find(name);
        if (it == r.fields.end() || is_missing(it->second)) continue;
        const auto* v = std::get_if<std::string>(&it->second);
        if (!v) throw Error(Errc::SchemaMismatch, "field '" + name + "' holds a non-categorical value");
        ++counts[*v];
      }
      std::string mode = spec.vocab.empty() ? std::string{} : spec.vocab.front();
      std::size_t best = 0;
      // Vocab order breaks ties; values outside the vocab come after it.
      for (const auto& word : spec.vocab)
        if (counts[word] > best) {
          best = counts[word];
          mode = word;
        }
      for (const auto& [word, c] : counts)
        if (c > best) {
          best = c;
          mode = word;
        }
      for (auto& r : table.rows)
        if (auto it = r.fields.find(name); it != r.fields.end() && is_missing(it->second)) it->second = mode;
    }
  }
  table.rows = dedup(std::move(table.rows));
  table.stage = Stage::Cleansed;
  return table;
}

// ---------------------------------------------------------------------------
// Formatting

Table format(Table table, const CanonicalSchema& schema) {
  if (table.stage != Stage::Cleansed)
    throw Error(Errc::ConfigError, "format expects a Cleansed table, got " + std::string(to_string(table.stage)));
  std::map<std::string, const FieldSpec*> canonical;
  for (const auto& f : schema.fields) canonical[f.name] = &f;

  for (auto& r : table.rows) {
    std::map<std::string, FieldValue> renamed;
    for (auto& [name, value] : r.fields) {
      std::string target;
      if (const auto it = schema.rename.find(name); it != schema.rename.end())
        target = it->second;
      else if (canonical.count(name))
        target = name;
      else
        throw Error(Errc::UnmappableField, "field '" + name + "' has no canonical mapping");
      if (!canonical.count(target))
        throw Error(Errc::UnmappableField, "mapping target '" + target + "' is not a canonical field");
      const auto* spec = canonical[target];
      const bool numeric = std::holds_alternative<double>(value);
      if (numeric != (spec->type == FieldType::Numeric))
        throw Error(Errc::SchemaMismatch, "field '" + name + "' does not match canonical type of " + target);
      if (!renamed.emplace(target, std::move(value)).second)
        throw Error(Errc::UnmappableField, "two fields map onto '" + target + "'");
    }
    for (const auto& f : schema.fields)
      if (!renamed.count(f.name))
        throw Error(Errc::UnmappableField, "record " + std::to_string(r.record_id) + " lacks '" + f.name + "'");
    r.fields = std::move(renamed);
  }
  table.columns.clear();
  for (const auto& f : schema.fields) table.columns.push_back(f.name);
  table.stage = Stage::Formatted;
  return table;
}

// ---------------------------------------------------------------------------
// Transformation

std::vector<std::string> TransformParams::names() const {
  std::vector<std::string> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

namespace {

double numeric_field(const std::map<std::string, FieldValue>& fields, const std::string& name) {
  const auto it = fields.find(name);
  if (it == fields.end()) throw Error(Errc::SchemaMismatch, "field '" + name + "' absent");
  const auto* v = std::get_if<double>(&it->second);
  if (!v) throw Error(Errc::SchemaMismatch, "field '" + name + "' is missing or not numeric");
  return *v;
}

double raw_value(const ColumnTransform& c, const std::map<std::string, FieldValue>& fields) {
  switch (c.source) {
    case ColumnTransform::Source::Numeric:
      return numeric_field(fields, c.input_a);
    case ColumnTransform::Source::Product:
      return numeric_field(fields, c.input_a) * numeric_field(fields, c.input_b);
    case ColumnTransform::Source::Ratio: {
      const double den = numeric_field(fields, c.input_b);
      return den == 0.0 ? 0.0 : numeric_field(fields, c.input_a) / den;
    }
    case ColumnTransform::Source::OneHot: {
      const auto it = fields.find(c.input_a);
      if (it == fields.end()) throw Error(Errc::SchemaMismatch, "field '" + c.input_a + "' absent");
      const auto* v = std::get_if<std::string>(&it->second);
      if (!v) throw Error(Errc::SchemaMismatch, "field '" + c.input_a + "' is missing or not categorical");
      return *v == c.category ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

std::string derived_name(const DerivedFeature& d) {
  return d.a + (d.op == DerivedFeature::Op::Product ? "*" : "/") + d.b;
}

// Numeric and derived columns (the scaled ones), in output order.
std::vector<ColumnTransform> scaled_columns(const CanonicalSchema& schema, const TransformSpec& spec) {
  std::vector<ColumnTransform> out;
  for (const auto& f : schema.fields)
    if (f.type == FieldType::Numeric) out.push_back({ColumnTransform::Source::Numeric, f.name, f.name, {}, {}});
  for (const auto& d : spec.derived) {
    auto is_numeric = [&](const std::string& n) {
      return std::any_of(schema.fields.begin(), schema.fields.end(),
                         [&](const FieldSpec& f) { return f.name == n && f.type == FieldType::Numeric; });
    };
    if (!is_numeric(d.a) || !is_numeric(d.b))
      throw Error(Errc::ConfigError, "derived feature " + derived_name(d) + " needs numeric canonical inputs",
                  "pipeline.derived");
    out.push_back({d.op == DerivedFeature::Op::Product ? ColumnTransform::Source::Product
                                                        : ColumnTransform::Source::Ratio,
                   derived_name(d), d.a, d.b, {}});
  }
  return out;
}

}  // namespace

std::vector<double> TransformParams::apply(const std::map<std::string, FieldValue>& fields) const {
  std::vector<double> out;
  out.reserve(columns.size());
  for (const auto& c : columns) {
    const double v = raw_value(c, fields);
    out.push_back(c.scale == 0.0 ? 0.0 : (v - c.center) / c.scale);
  }
  return out;
}

void ColumnStats::add(double v) {
  if (count == 0) {
    min = max = v;
  } else {
    min = std::min(min, v);
    max = std::max(max, v);
  }
  ++count;
  const double delta = v - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (v - mean);
}

void ColumnStats::merge(const ColumnStats& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double n_a = static_cast<double>(count);
  const double n_b = static_cast<double>(other.count);
  const double delta = other.mean - mean;
  const double n = n_a + n_b;
  mean += delta * n_b / n;
  m2 += other.m2 + delta * delta * n_a * n_b / n;
  count += other.count;
  min = std::min(min, other.min);
  max = std::max(max, other.max);
}

double ColumnStats::population_sd() const {
  if (count == 0) return 0.0;
  const double var = m2 / static_cast<double>(count);
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

std::vector<ColumnStats> column_stats(const Table& formatted, const CanonicalSchema& schema,
                                      const TransformSpec& spec) {
  auto cols = scaled_columns(schema, spec);
  std::vector<ColumnStats> stats(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) stats[j].name = cols[j].name;
  for (const auto& r : formatted.rows)
    for (std::size_t j = 0; j < cols.size(); ++j) stats[j].add(raw_value(cols[j], r.fields));
  return stats;
}

TransformParams params_from_stats(const std::vector<ColumnStats>& stats, const CanonicalSchema& schema,
                                  const TransformSpec& spec) {
  auto scaled = scaled_columns(schema, spec);
  if (stats.size() != scaled.size()) throw Error(Errc::SchemaMismatch, "statistics do not cover the scaled columns");
  for (std::size_t j = 0; j < scaled.size(); ++j) {
    if (stats[j].name != scaled[j].name) throw Error(Errc::SchemaMismatch, "statistics column order differs");
    auto& c = scaled[j];
    if (spec.scaling == Scaling::ZScore) {
      c.center = stats[j].mean;
      c.scale = stats[j].population_sd();
    } else {
      c.center = stats[j].min;
      c.scale = stats[j].max - stats[j].min;
    }
    // Constant columns map to zeros.
    if (!(c.scale > 0.0)) c.scale = 0.0;
  }

  TransformParams params;
  params.scaling = spec.scaling;
  std::size_t next_scaled = 0;
  for (const auto& f : schema.fields) {
    if (f.type == FieldType::Numeric) {
      params.columns.push_back(scaled[next_scaled++]);
    } else {
      for (const auto& word : f.vocab) {
        ColumnTransform c;
        c.source = ColumnTransform::Source::OneHot;
        c.name = f.name + "=" + word;
        c.input_a = f.name;
        c.category = word;
        params.columns.push_back(std::move(c));
      }
    }
  }
  for (; next_scaled < scaled.size(); ++next_scaled) params.columns.push_back(scaled[next_scaled]);
  return params;
}

Dataset apply_transform(const Table& formatted, const TransformParams& params) {
  if (formatted.stage != Stage::Formatted)
    throw Error(Errc::ConfigError, "transform expects a Formatted table, got " + std::string(to_string(formatted.stage)));
  Dataset d;
  d.stage = Stage::Transformed;
  d.feature_names = params.names();
  d.provenance = formatted.provenance;
  d.rows.reserve(formatted.rows.size());
  for (const auto& r : formatted.rows) {
    auto x = params.apply(r.fields);
    for (double v : x)
      if (!std::isfinite(v)) throw Error(Errc::SchemaMismatch, "non-finite transformed value");
    d.rows.push_back(std::move(x));
    d.targets.push_back(r.target);
    d.record_ids.push_back(r.record_id);
  }
  return d;
}

TransformResult transform(const Table& formatted, const CanonicalSchema& schema, const TransformSpec& spec) {
  if (formatted.stage != Stage::Formatted)
    throw Error(Errc::ConfigError, "transform expects a Formatted table, got " + std::string(to_string(formatted.stage)));
  auto params = params_from_stats(column_stats(formatted, schema, spec), schema, spec);
  auto dataset = apply_transform(formatted, params);
  return {std::move(dataset), std::move(params)};
}

nlohmann::json to_json(const TransformParams& params) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : params.columns) {
    static constexpr const char* kSources[] = {"numeric", "onehot", "product", "ratio"};
    cols.push_back({{"name", c.name},
                    {"source", kSources[static_cast<int>(c.source)]},
                    {"input-a", c.input_a},
                    {"input-b", c.input_b},
                    {"category", c.category},
                    {"center", c.center},
                    {"scale", c.scale}});
  }
  return {{"scaling", params.scaling == Scaling::ZScore ? "zscore" : "minmax"}, {"columns", cols}};
}

TransformParams transform_params_from_json(const nlohmann::json& j) {
  TransformParams p;
  const auto scaling = j.at("scaling").get<std::string>();
  if (scaling != "zscore" && scaling != "minmax") throw Error(Errc::InvalidArtifact, "unknown scaling " + scaling);
  p.scaling = scaling == "zscore" ? Scaling::ZScore : Scaling::MinMax;
  for (const auto& c : j.at("columns")) {
    ColumnTransform t;
    const auto source = c.at("source").get<std::string>();
    if (source == "numeric")
      t.source = ColumnTransform::Source::Numeric;
    else if (source == "onehot")
      t.source = ColumnTransform::Source::OneHot;
    else if (source == "product")
      t.source = ColumnTransform::Source::Product;
    else if (source == "ratio")
      t.source = ColumnTransform::Source::Ratio;
    else
      throw Error(Errc::InvalidArtifact, "unknown column source " + source);
    t.name = c.at("name").get<std::string>();
    t.input_a = c.value("input-a", std::string{});
    t.input_b = c.value("input-b", std::string{});
    t.category = c.value("category", std::string{});
    t.center = c.at("center").get<double>();
    t.scale = c.at("scale").get<double>();
    p.columns.push_back(std::move(t));
  }
  return p;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.stage = Stage::Split;
  out.feature_names = feature_names;
  out.provenance = provenance;
  out.rows.reserve(indices.size());
  for (auto i : indices) {
    out.rows.push_back(rows.at(i));
    out.targets.push_back(targets.at(i));
    if (!record_ids.empty()) out.record_ids.push_back(record_ids.at(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exploration

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = x.size();
  if (n == 0 || y.size() != n) return 0.0;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ExplorationReport explore(const Dataset& dataset) {
  if (dataset.size() < 2) throw Error(Errc::InsufficientData, "exploration needs at least two records");
  const auto w = dataset.width();
  const auto n = dataset.size();
  std::vector<std::vector<double>> columns(w, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) columns[j][i] = dataset.rows[i][j];

  ExplorationReport report;
  for (std::size_t j = 0; j < w; ++j) {
    const auto& c = columns[j];
    FeatureSummary s;
    s.name = dataset.feature_names[j];
    s.mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(n);
    for (double v : c) s.variance += (v - s.mean) * (v - s.mean);
    s.variance /= static_cast<double>(n);
    s.min = *std::min_element(c.begin(), c.end());
    s.max = *std::max_element(c.begin(), c.end());
    report.features.push_back(std::move(s));
  }
  report.correlation.assign(w, std::vector<double>(w, 0.0));
  for (std::size_t a = 0; a < w; ++a) {
    report.correlation[a][a] = 1.0;
    for (std::size_t b = a + 1; b < w; ++b) {
      const double r = pearson(columns[a], columns[b]);
      report.correlation[a][b] = report.correlation[b][a] = r;
    }
  }
  for (std::size_t j = 0; j < w; ++j) report.target_correlation.push_back(pearson(columns[j], dataset.targets));
  report.ranking.resize(w);
  std::iota(report.ranking.begin(), report.ranking.end(), 0);
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(report.target_correlation[a]) > std::abs(report.target_correlation[b]);
  });
  return report;
}

nlohmann::json to_json(const ExplorationReport& report) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : report.features)
    features.push_back({{"name", f.name}, {"mean", f.mean}, {"variance", f.variance}, {"min", f.min}, {"max", f.max}});
  return {{"features", features},
          {"correlation", report.correlation},
          {"target-correlation", report.target_correlation},
          {"ranking", report.ranking}};
}

void write_exploration_csv(std::ostream& out, const ExplorationReport& report) {
  out << "feature,mean,variance,min,max,target_correlation\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t j = 0; j < report.features.size(); ++j) {
    const auto& f = report.features[j];
    out << f.name << ',' << num(f.mean) << ',' << num(f.variance) << ',' << num(f.min) << ',' << num(f.max) << ','
        << num(report.target_correlation[j]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splitting

void validate_split(const SplitSpec& spec, const std::string& path) {
  for (double r : {spec.train, spec.val, spec.test})
    if (!(r >= 0.0 && r <= 1.0)) throw Error(Errc::ConfigError, "split ratios must lie in [0,1]", path);
  const double sum = spec.train + spec.val + spec.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(Errc::ConfigError, "split ratios sum to " + std::to_string(sum) + ", expected 1", path);
}

SplitDataset split(const Dataset& dataset, const SplitSpec& spec) {
  validate_split(spec);
  const auto n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(spec.seed, "split"));
  rng.shuffle(order);

  const auto n_val = floor_count(n, spec.val);
  const auto n_test = floor_count(n, spec.test);
  const auto n_train = n - n_val - n_test;

  SplitDataset out;
  out.train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                     order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  out.train = dataset.subset(out.train_idx);
  out.val = dataset.subset(out.val_idx);
  out.test = dataset.subset(out.test_idx);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

void write_csv(std::ostream& out, const Dataset& dataset) {
  for (const auto& name : dataset.feature_names) out << name << ',';
  out << "target\n";
  char buf[64];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (double v : dataset.rows[i]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", dataset.targets[i]);
    out << buf << '\n';
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::SchemaMismatch, "CSV has no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_line(line);
  if (header.empty() || header.back() != "target")
    throw Error(Errc::SchemaMismatch, "CSV header must end with 'target'");
  Dataset d;
  d.stage = Stage::Transformed;
  d.feature_names.assign(header.begin(), header.end() - 1);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw Error(Errc::SchemaMismatch, "CSV line " + std::to_string(line_no) + " has the wrong number of cells");
    std::vector<double> row;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      char* end = nullptr;
      const double v = std::strtod(cells[j].c_str(), &end);
      if (cells[j].empty() || *end != '\0' || !std::isfinite(v))
        throw Error(Errc::SchemaMismatch, "CSV line " + std::to_string(line_no) + " has a non-numeric cell");
      row.push_back(v);
    }
    d.targets.push_back(row.back());
    row.pop_back();
    d.record_ids.push_back(d.rows.size());
    d.rows.push_back(std::move(row));
  }
  return d;
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "cannot open " + path);
  return read_csv(in);
}

}  // namespace smo
