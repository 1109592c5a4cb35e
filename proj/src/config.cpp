#include "smo/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <sodium.h>

#include "smo/error.hpp"
#include "smo/rng.hpp"

namespace smo {

using nlohmann::json;

std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::A: return "A";
    case ScenarioKind::B: return "B";
    case ScenarioKind::C: return "C";
  }
  return "?";
}

std::string_view to_string(ScenarioMode m) {
  switch (m) {
    case ScenarioMode::None: return "none";
    case ScenarioMode::ImportModel: return "import-model";
    case ScenarioMode::ImportData: return "import-data";
    case ScenarioMode::ShareData: return "share-data";
    case ScenarioMode::ShareModels: return "share-models";
  }
  return "?";
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(Errc::ConfigError, path + ": " + what, path);
}

/// A JSON node plus the dotted path it was reached by.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return *j_; }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  /// Rejects keys outside `allowed` so typos surface instead of silently defaulting.
  const Node& object(std::initializer_list<std::string_view> allowed) const {
    if (!j_->is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      bool ok = false;
      for (auto a : allowed) ok = ok || a == it.key();
      if (!ok) fail(child_path(it.key()), "unknown field");
    }
    return *this;
  }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key) && !(*j_)[key].is_null(); }

  Node at(const std::string& key) const {
    if (!has(key)) fail(child_path(key), "required field missing");
    return Node((*j_)[key], child_path(key));
  }

  std::optional<Node> get(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return Node((*j_)[key], child_path(key));
  }

  std::vector<Node> items() const {
    if (!j_->is_array()) fail(path_, "expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < j_->size(); ++i) out.emplace_back((*j_)[i], path_ + "[" + std::to_string(i) + "]");
    return out;
  }

  double number() const {
    if (!j_->is_number()) fail(path_, "expected a number");
    return j_->get<double>();
  }
  std::int64_t integer() const {
    if (!j_->is_number_integer() && !j_->is_number_unsigned()) fail(path_, "expected an integer");
    return j_->get<std::int64_t>();
  }
  std::uint64_t unsigned_integer() const {
    if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
    if (j_->is_number_integer() && j_->get<std::int64_t>() >= 0) return j_->get<std::uint64_t>();
    fail(path_, "expected a non-negative integer");
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail(path_, "expected a boolean");
    return j_->get<bool>();
  }
  std::string string() const {
    if (!j_->is_string()) fail(path_, "expected a string");
    return j_->get<std::string>();
  }

  double number_or(const std::string& key, double d) const { return has(key) ? at(key).number() : d; }
  std::int64_t integer_or(const std::string& key, std::int64_t d) const { return has(key) ? at(key).integer() : d; }
  bool boolean_or(const std::string& key, bool d) const { return has(key) ? at(key).boolean() : d; }
  std::string string_or(const std::string& key, std::string d) const { return has(key) ? at(key).string() : d; }

 private:
  const json* j_;
  std::string path_;
};

/// Wraps library parsers so their errors carry the field path.
template <class F>
auto at_path(const Node& n, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.field().empty()) throw;
    throw Error(e.code(), n.path() + ": " + e.what(), n.path());
  }
}

ComponentId parse_component(const Node& n) {
  auto s = n.string();
  return at_path(n, [&] { return ComponentId::parse(s); });
}

std::size_t size_value(const Node& n) {
  auto v = n.integer();
  if (v < 0) fail(n.path(), "must be non-negative");
  return static_cast<std::size_t>(v);
}

TopologyConfig parse_topology(const Node& n) {
  n.object({"components", "links", "interfaces"});
  TopologyConfig t;
  for (const auto& c : n.at("components").items()) {
    c.object({"kind", "count", "index"});
    ComponentDecl d;
    auto kind = c.at("kind");
    d.kind = at_path(kind, [&] { return parse_component_kind(kind.string()); });
    d.count = static_cast<int>(c.integer_or("count", 1));
    d.index = static_cast<int>(c.integer_or("index", 0));
    if (d.count < 1) fail(c.child_path("count"), "must be >= 1");
    if (d.index < 0) fail(c.child_path("index"), "must be >= 0");
    t.components.push_back(d);
  }
  if (auto links = n.get("links")) {
    for (const auto& l : links->items()) {
      l.object({"a", "b", "interface"});
      LinkDecl d;
      d.a = parse_component(l.at("a"));
      d.b = parse_component(l.at("b"));
      auto iface = l.at("interface");
      d.iface = at_path(iface, [&] { return parse_interface(iface.string()); });
      t.links.push_back(d);
    }
  }
  if (auto ifaces = n.get("interfaces")) {
    if (!ifaces->raw().is_object()) fail(ifaces->path(), "expected an object");
    for (auto it = ifaces->raw().begin(); it != ifaces->raw().end(); ++it) {
      Node e(it.value(), ifaces->child_path(it.key()));
      auto name = at_path(e, [&] { return parse_interface(it.key()); });
      e.object({"latency", "overhead-bytes"});
      InterfaceSpec s = default_interface_spec(name);
      s.latency = e.integer_or("latency", s.latency);
      s.overhead_bytes = e.integer_or("overhead-bytes", s.overhead_bytes);
      if (s.latency < 1) fail(e.child_path("latency"), "must be >= 1");
      if (s.overhead_bytes < 0) fail(e.child_path("overhead-bytes"), "must be >= 0");
      t.interfaces[name] = s;
    }
  }
  return t;
}

FieldSpec parse_field(const Node& n) {
  n.object({"name", "type", "vocab", "range", "sensitive"});
  FieldSpec f;
  f.name = n.at("name").string();
  if (f.name.empty()) fail(n.child_path("name"), "must be non-empty");
  auto type = n.string_or("type", "numeric");
  if (type == "numeric") {
    f.type = FieldType::Numeric;
    if (auto r = n.get("range")) {
      auto items = r->items();
      if (items.size() != 2) fail(r->path(), "expected [lo, hi]");
      f.lo = items[0].number();
      f.hi = items[1].number();
    }
  } else if (type == "categorical") {
    f.type = FieldType::Categorical;
    for (const auto& v : n.at("vocab").items()) f.vocab.push_back(v.string());
  } else {
    fail(n.child_path("type"), "expected numeric or categorical");
  }
  f.sensitive = n.boolean_or("sensitive", false);
  return f;
}

SourceSpec parse_source(const Node& n) {
  n.object({"owner", "schema", "coefficients", "bias", "noise-sigma", "duplicate-rate", "missing-rate", "error-rate",
            "error-factor", "emission", "label-threshold"});
  SourceSpec s;
  s.owner = parse_component(n.at("owner"));
  for (const auto& f : n.at("schema").items()) s.schema.push_back(parse_field(f));
  for (const auto& c : n.at("coefficients").items()) s.coefficients.push_back(c.number());
  s.bias = n.number_or("bias", 0.0);
  s.noise_sigma = n.number_or("noise-sigma", 0.0);
  s.duplicate_rate = n.number_or("duplicate-rate", 0.0);
  s.missing_rate = n.number_or("missing-rate", 0.0);
  s.error_rate = n.number_or("error-rate", 0.0);
  s.error_factor = n.number_or("error-factor", 10.0);
  auto e = n.at("emission");
  e.object({"mode", "size", "interval"});
  auto mode = e.string_or("mode", "batch");
  if (mode == "batch") {
    s.emission.mode = Emission::Mode::Batch;
  } else if (mode == "streaming") {
    s.emission.mode = Emission::Mode::Streaming;
    s.emission.interval = e.at("interval").integer();
  } else {
    fail(e.child_path("mode"), "expected batch or streaming");
  }
  s.emission.size = size_value(e.at("size"));
  if (auto t = n.get("label-threshold")) s.label_threshold = t->number();
  validate_source(s, n.path());
  return s;
}

void parse_pipeline(const Node& n, ScenarioConfig& c) {
  n.object({"canonical", "rename", "scaling", "derived", "split"});
  if (auto can = n.get("canonical")) {
    for (const auto& f : can->items()) c.canonical.fields.push_back(parse_field(f));
  }
  if (auto r = n.get("rename")) {
    if (!r->raw().is_object()) fail(r->path(), "expected an object");
    for (auto it = r->raw().begin(); it != r->raw().end(); ++it)
      c.canonical.rename[it.key()] = Node(it.value(), r->child_path(it.key())).string();
  }
  auto scaling = n.string_or("scaling", "zscore");
  if (scaling == "zscore") c.transform.scaling = Scaling::ZScore;
  else if (scaling == "minmax") c.transform.scaling = Scaling::MinMax;
  else fail(n.child_path("scaling"), "expected zscore or minmax");
  if (auto d = n.get("derived")) {
    for (const auto& item : d->items()) {
      item.object({"op", "a", "b"});
      DerivedFeature f;
      auto op = item.at("op").string();
      if (op == "product") f.op = DerivedFeature::Op::Product;
      else if (op == "ratio") f.op = DerivedFeature::Op::Ratio;
      else fail(item.child_path("op"), "expected product or ratio");
      f.a = item.at("a").string();
      f.b = item.at("b").string();
      c.transform.derived.push_back(f);
    }
  }
  if (auto s = n.get("split")) {
    s->object({"train", "val", "test"});
    c.split.train = s->number_or("train", c.split.train);
    c.split.val = s->number_or("val", c.split.val);
    c.split.test = s->number_or("test", c.split.test);
  }
  validate_split(c.split, n.child_path("split"));
}

HyperParams parse_hp(const Node& n) {
  n.object({"learning-rate", "epochs", "batch-size", "l2-lambda", "stump-depth", "threshold"});
  HyperParams hp;
  hp.learning_rate = n.number_or("learning-rate", hp.learning_rate);
  hp.epochs = static_cast<int>(n.integer_or("epochs", hp.epochs));
  hp.batch_size = static_cast<int>(n.integer_or("batch-size", hp.batch_size));
  hp.l2_lambda = n.number_or("l2-lambda", hp.l2_lambda);
  hp.stump_depth = static_cast<int>(n.integer_or("stump-depth", hp.stump_depth));
  hp.threshold = n.number_or("threshold", hp.threshold);
  validate_hyperparams(hp, n.path());
  return hp;
}

template <class T, class F>
std::vector<T> list_of(const Node& n, F&& f) {
  std::vector<T> out;
  for (const auto& i : n.items()) out.push_back(f(i));
  return out;
}

SearchSpec parse_search(const Node& n) {
  n.object({"mode", "learning-rate", "epochs", "batch-size", "l2-lambda", "budget", "learning-rate-range",
            "epochs-range", "batch-size-range", "l2-lambda-range"});
  SearchSpec s;
  auto mode = n.string_or("mode", "grid");
  if (mode == "grid") s.mode = SearchSpec::Mode::Grid;
  else if (mode == "random") s.mode = SearchSpec::Mode::Random;
  else fail(n.child_path("mode"), "expected grid or random");
  auto num = [](const Node& i) { return i.number(); };
  auto intg = [](const Node& i) { return static_cast<int>(i.integer()); };
  if (auto v = n.get("learning-rate")) s.learning_rates = list_of<double>(*v, num);
  if (auto v = n.get("epochs")) s.epochs = list_of<int>(*v, intg);
  if (auto v = n.get("batch-size")) s.batch_sizes = list_of<int>(*v, intg);
  if (auto v = n.get("l2-lambda")) s.l2_lambdas = list_of<double>(*v, num);
  auto pair_of = [&](const std::string& key, auto& target, auto conv) {
    if (auto v = n.get(key)) {
      auto items = v->items();
      if (items.size() != 2) fail(v->path(), "expected [lo, hi]");
      target = {conv(items[0]), conv(items[1])};
      if (target.first > target.second) fail(v->path(), "lo exceeds hi");
    }
  };
  pair_of("learning-rate-range", s.learning_rate_range, num);
  pair_of("epochs-range", s.epochs_range, intg);
  pair_of("batch-size-range", s.batch_size_range, intg);
  pair_of("l2-lambda-range", s.l2_lambda_range, num);
  s.budget = static_cast<int>(n.integer_or("budget", s.budget));
  if (s.mode == SearchSpec::Mode::Random && s.budget < 1) fail(n.child_path("budget"), "must be >= 1");
  if (s.mode == SearchSpec::Mode::Random && s.learning_rate_range.first <= 0)
    fail(n.child_path("learning-rate-range"), "must be positive");
  return s;
}

void parse_lifecycle(const Node& n, LifecycleConfig& l) {
  n.object({"targets", "validation-max-mse", "packaged", "package-inflation", "monitor", "refine"});
  if (auto t = n.get("targets")) l.targets = list_of<ComponentId>(*t, parse_component);
  l.validation_max_mse = n.number_or("validation-max-mse", l.validation_max_mse);
  l.packaged = n.boolean_or("packaged", l.packaged);
  l.package_inflation = n.number_or("package-inflation", l.package_inflation);
  if (l.package_inflation < 1.0) fail(n.child_path("package-inflation"), "must be >= 1");
  if (auto m = n.get("monitor")) {
    m->object({"period", "samples-per-period", "capacity", "drift-factor", "min-samples"});
    auto& mc = l.monitor;
    mc.period = m->integer_or("period", mc.period);
    if (mc.period < 0) fail(m->child_path("period"), "must be >= 0");
    if (auto v = m->get("samples-per-period")) mc.samples_per_period = size_value(*v);
    if (auto v = m->get("capacity")) mc.capacity = size_value(*v);
    if (auto v = m->get("min-samples")) mc.min_samples = size_value(*v);
    mc.drift_factor = m->number_or("drift-factor", mc.drift_factor);
    if (mc.capacity == 0) fail(m->child_path("capacity"), "must be >= 1");
    if (mc.drift_factor <= 1.0) fail(m->child_path("drift-factor"), "must exceed 1");
    if (mc.period > 0 && mc.samples_per_period == 0) fail(m->child_path("samples-per-period"), "must be >= 1");
  }
  if (auto r = n.get("refine")) {
    r->object({"max-iterations", "incremental", "epochs", "periodic"});
    auto& rc = l.refine;
    rc.max_iterations = static_cast<int>(r->integer_or("max-iterations", rc.max_iterations));
    rc.incremental = r->boolean_or("incremental", rc.incremental);
    rc.epochs = static_cast<int>(r->integer_or("epochs", rc.epochs));
    rc.periodic = r->integer_or("periodic", rc.periodic);
    if (rc.max_iterations < 0) fail(r->child_path("max-iterations"), "must be >= 0");
    if (rc.epochs < 1) fail(r->child_path("epochs"), "must be >= 1");
    if (rc.periodic < 0) fail(r->child_path("periodic"), "must be >= 0");
  }
}

void parse_harness(const Node& n, ScenarioConfig& c) {
  n.object({"poison", "filter", "failover", "privacy", "scheduler", "retraining-priority", "training-demand"});
  auto& h = c.harness;
  if (auto p = n.get("poison")) {
    p->object({"fraction", "attack", "delta", "gamma"});
    PoisonSpec s;
    s.fraction = p->number_or("fraction", 0.0);
    if (s.fraction < 0.0 || s.fraction > 1.0) fail(p->child_path("fraction"), "must lie in [0,1]");
    if (auto a = p->get("attack")) s.attack = at_path(*a, [&] { return parse_attack(a->string()); });
    s.delta = p->number_or("delta", s.delta);
    s.gamma = p->number_or("gamma", s.gamma);
    s.seed = derive_seed(c.seed, "poison-spec");
    h.poison = s;
  }
  if (auto f = n.get("filter")) {
    f->object({"k", "mad-floor"});
    FilterSpec s;
    s.k = f->number_or("k", s.k);
    s.mad_floor = f->number_or("mad-floor", s.mad_floor);
    if (s.k <= 0) fail(f->child_path("k"), "must be positive");
    if (s.mad_floor <= 0) fail(f->child_path("mad-floor"), "must be positive");
    h.filter = s;
  }
  if (auto f = n.get("failover")) {
    f->object({"target", "fail-tick", "heartbeat-interval", "missed-heartbeats", "replicas", "checkpoint-interval",
               "heartbeat-bytes"});
    FailurePlan p;
    p.target = f->has("target") ? parse_component(f->at("target")) : ComponentId{ComponentKind::AimlFunction, 0};
    p.fail_tick = f->at("fail-tick").integer();
    p.heartbeat_interval = f->integer_or("heartbeat-interval", p.heartbeat_interval);
    p.missed_heartbeats = static_cast<int>(f->integer_or("missed-heartbeats", p.missed_heartbeats));
    if (auto r = f->get("replicas")) p.replicas = list_of<ComponentId>(*r, parse_component);
    p.checkpoint_interval = f->integer_or("checkpoint-interval", p.checkpoint_interval);
    p.heartbeat_bytes = f->integer_or("heartbeat-bytes", p.heartbeat_bytes);
    validate_failure_plan(p, f->path());
    h.failover = p;
  }
  if (auto p = n.get("privacy")) {
    p->object({"enabled", "key", "inflation"});
    h.privacy.enabled = p->boolean_or("enabled", true);
    h.privacy.key = p->string_or("key", "");
    h.privacy.inflation = p->number_or("inflation", 1.0);
    if (h.privacy.inflation < 1.0) fail(p->child_path("inflation"), "must be >= 1");
    if (h.privacy.enabled && h.privacy.key.empty())
      throw Error(Errc::MissingKey, p->child_path("key") + ": pseudonymization key required", p->child_path("key"));
  }
  h.retraining_priority = static_cast<int>(n.integer_or("retraining-priority", 0));
  h.training_demand = n.integer_or("training-demand", 1);
  if (h.training_demand < 1) fail(n.child_path("training-demand"), "must be >= 1");
  h.scheduler.budget = h.training_demand;
  if (auto s = n.get("scheduler")) {
    s->object({"budget", "jobs"});
    h.scheduler.budget = s->integer_or("budget", h.training_demand);
    if (auto jobs = s->get("jobs")) {
      for (const auto& j : jobs->items()) {
        j.object({"name", "priority", "demand", "work", "arrival"});
        JobSpec spec;
        spec.name = j.at("name").string();
        spec.job_class = JobClass::NfWorkload;
        spec.priority = static_cast<int>(j.integer_or("priority", 0));
        spec.demand = j.integer_or("demand", 1);
        spec.work = j.at("work").integer();
        spec.arrival = j.integer_or("arrival", 1);
        h.scheduler.jobs.push_back(spec);
      }
    }
    validate_scheduler(h.scheduler, s->path());
    if (h.training_demand > h.scheduler.budget)
      fail(n.child_path("training-demand"), "exceeds the scheduler budget");
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base) / path).lexically_normal().string();
}

bool is_mda(const ComponentId& id) {
  return id.kind == ComponentKind::MdaSystem3GPP || id.kind == ComponentKind::MdaSystemNFV;
}

void cross_check(ScenarioConfig& c, const Node& root) {
  Topology topo = at_path(root.at("topology"), [&] { return build_topology(c.topology); });
  for (std::size_t i = 0; i < c.sources.size(); ++i) {
    if (!topo.contains(c.sources[i].owner))
      fail("sources[" + std::to_string(i) + "].owner", "component not in topology: " + c.sources[i].owner.str());
  }
  if (topo.of_kind(ComponentKind::AimlFunction).empty()) fail("topology.components", "no AimlFunction declared");
  for (std::size_t i = 0; i < c.lifecycle.targets.size(); ++i) {
    if (!topo.contains(c.lifecycle.targets[i]))
      fail("lifecycle.targets[" + std::to_string(i) + "]", "component not in topology");
  }
  if (c.harness.failover) {
    const auto& p = *c.harness.failover;
    if (!topo.contains(p.target)) fail("harness.failover.target", "component not in topology");
    if (p.target.kind != ComponentKind::AimlFunction) fail("harness.failover.target", "must be an AimlFunction");
    for (std::size_t i = 0; i < p.replicas.size(); ++i) {
      if (!topo.contains(p.replicas[i]) || p.replicas[i].kind != ComponentKind::AimlFunction || p.replicas[i] == p.target)
        fail("harness.failover.replicas[" + std::to_string(i) + "]", "must be another AimlFunction in the topology");
    }
  }
  for (const auto& [owner, coeffs] : c.drift.coefficients) {
    auto it = std::find_if(c.sources.begin(), c.sources.end(), [&](const SourceSpec& s) { return s.owner == owner; });
    std::string path = "drift.coefficients." + owner.str();
    if (it == c.sources.end()) fail(path, "no source with this owner");
    if (coeffs.size() != it->coefficients.size()) fail(path, "width differs from the source coefficients");
  }
  // Sources share one field catalog; conflicting specs under one name are rejected.
  std::map<std::string, FieldSpec> seen;
  for (std::size_t i = 0; i < c.sources.size(); ++i) {
    for (const auto& f : c.sources[i].schema) {
      auto [it, fresh] = seen.emplace(f.name, f);
      if (!fresh && !(it->second == f))
        throw Error(Errc::SchemaMismatch, "field '" + f.name + "' declared differently across sources",
                    "sources[" + std::to_string(i) + "].schema");
    }
  }
  if (c.canonical.fields.empty()) {
    std::set<std::string> added;
    for (const auto& s : c.sources)
      for (const auto& f : s.schema)
        if (added.insert(f.name).second) c.canonical.fields.push_back(f);
  } else {
    // Renames are source->canonical; a renamed source field must keep the canonical type.
    for (const auto& [from, to] : c.canonical.rename) {
      if (!seen.count(from)) fail("pipeline.rename." + from, "no source declares this field");
      bool found = false;
      for (const auto& f : c.canonical.fields) found = found || f.name == to;
      if (!found) fail("pipeline.rename." + from, "maps onto an unknown canonical field '" + to + "'");
    }
  }
  if (c.kind == ScenarioKind::C && c.mode == ScenarioMode::ShareModels &&
      c.model_kind == ModelKind::DecisionStump)
    throw Error(Errc::UnsupportedKind, "stumps cannot be aggregated", "learn.kind");
  if (c.kind == ScenarioKind::A && topo.of_kind(ComponentKind::ExternalProvider).empty())
    fail("topology.components", "scenario A needs an ExternalProvider");
  if (c.kind == ScenarioKind::C) {
    std::set<ComponentId> domains;
    for (std::size_t i = 0; i < c.sources.size(); ++i) {
      auto kind = domain_of(c.sources[i].owner.kind) == Domain::Nsms3gpp ? ComponentKind::MdaSystem3GPP
                                                                       : ComponentKind::MdaSystemNFV;
      auto mdas = topo.of_kind(kind);
      if (domain_of(c.sources[i].owner.kind) != Domain::Nsms3gpp && domain_of(c.sources[i].owner.kind) != Domain::NfvMano)
        fail("sources[" + std::to_string(i) + "].owner", "collaborative sources must live in a management domain");
      if (mdas.empty())
        fail("sources[" + std::to_string(i) + "].owner", "no MDA system serves the domain of " + c.sources[i].owner.str());
      domains.insert(mdas.front());
    }
    if (domains.size() < 2)
      throw Error(Errc::InsufficientDomains, "collaborative scenarios need at least two MDA-system domains with data",
                  "sources");
    for (std::size_t i = 0; i < c.lifecycle.targets.size(); ++i)
      if (!is_mda(c.lifecycle.targets[i]))
        fail("lifecycle.targets[" + std::to_string(i) + "]", "collaborative scenarios deploy to MDA systems");
  }
}

}  // namespace

ScenarioConfig parse_config(const json& doc, const std::string& base_dir) {
  Node root(doc, "");
  root.object({"scenario", "seed", "horizon", "topology", "sizes", "sources", "collection", "pipeline", "learn", "cost",
               "lifecycle", "drift", "holdout", "harness", "scenario-a"});
  ScenarioConfig c;
  c.base_dir = base_dir;
  c.digest = config_hash(doc);

  auto sc = root.at("scenario");
  sc.object({"kind", "mode", "rounds", "aggregation", "online-training"});
  auto kind = sc.at("kind").string();
  if (kind == "A") c.kind = ScenarioKind::A;
  else if (kind == "B") c.kind = ScenarioKind::B;
  else if (kind == "C") c.kind = ScenarioKind::C;
  else fail("scenario.kind", "unknown scenario kind '" + kind + "' (expected A, B or C)");
  auto mode = sc.string_or("mode", "none");
  if (mode == "none") c.mode = ScenarioMode::None;
  else if (mode == "import-model") c.mode = ScenarioMode::ImportModel;
  else if (mode == "import-data") c.mode = ScenarioMode::ImportData;
  else if (mode == "share-data") c.mode = ScenarioMode::ShareData;
  else if (mode == "share-models") c.mode = ScenarioMode::ShareModels;
  else fail("scenario.mode", "unknown mode '" + mode + "'");
  bool mode_ok = (c.kind == ScenarioKind::A && (c.mode == ScenarioMode::ImportModel || c.mode == ScenarioMode::ImportData)) ||
                 (c.kind == ScenarioKind::B && c.mode == ScenarioMode::None) ||
                 (c.kind == ScenarioKind::C && (c.mode == ScenarioMode::ShareData || c.mode == ScenarioMode::ShareModels));
  if (!mode_ok) fail("scenario.mode", "mode '" + mode + "' is inconsistent with kind " + kind);
  c.rounds = static_cast<int>(sc.integer_or("rounds", 1));
  if (c.rounds < 1) fail("scenario.rounds", "must be >= 1");
  if (c.kind != ScenarioKind::C && c.rounds != 1) fail("scenario.rounds", "must be 1 outside scenario C");
  auto agg = sc.string_or("aggregation", "sample-count");
  if (agg == "sample-count") c.aggregation = Aggregation::SampleCount;
  else if (agg == "uniform") c.aggregation = Aggregation::Uniform;
  else fail("scenario.aggregation", "expected uniform or sample-count");
  c.online_training = sc.boolean_or("online-training", false);

  c.seed = root.has("seed") ? root.at("seed").unsigned_integer() : 0;
  c.horizon = root.integer_or("horizon", c.horizon);
  if (c.horizon < 1) fail("horizon", "must be >= 1");

  c.topology = parse_topology(root.at("topology"));

  if (auto s = root.get("sizes")) {
    s->object({"record-bytes", "parameter-bytes", "prediction-bytes"});
    c.sizes.record_bytes = s->integer_or("record-bytes", c.sizes.record_bytes);
    c.sizes.parameter_bytes = s->integer_or("parameter-bytes", c.sizes.parameter_bytes);
    c.sizes.prediction_bytes = s->integer_or("prediction-bytes", c.sizes.prediction_bytes);
    if (c.sizes.record_bytes < 0 || c.sizes.parameter_bytes < 0 || c.sizes.prediction_bytes < 0)
      fail(s->path(), "sizes must be non-negative");
  }

  if (auto s = root.get("sources")) {
    for (const auto& item : s->items()) c.sources.push_back(parse_source(item));
  }
  if (c.sources.empty() && !(c.kind == ScenarioKind::A && c.mode == ScenarioMode::ImportData))
    throw Error(Errc::NoDataSources, "sources: at least one data source is required", "sources");

  if (auto col = root.get("collection")) {
    col->object({"batch-rounds", "round-interval", "window"});
    c.batch_rounds = static_cast<int>(col->integer_or("batch-rounds", c.batch_rounds));
    c.round_interval = col->integer_or("round-interval", c.round_interval);
    c.window = col->integer_or("window", c.window);
    if (c.batch_rounds < 1) fail(col->child_path("batch-rounds"), "must be >= 1");
    if (c.round_interval < 1) fail(col->child_path("round-interval"), "must be >= 1");
    if (c.window < 1) fail(col->child_path("window"), "must be >= 1");
  }

  if (auto p = root.get("pipeline")) parse_pipeline(*p, c);
  c.split.seed = c.seed;

  if (auto l = root.get("learn")) {
    l->object({"kind", "hyperparams", "search"});
    if (auto k = l->get("kind")) c.model_kind = at_path(*k, [&] { return parse_model_kind(k->string()); });
    if (auto hp = l->get("hyperparams")) c.hp = parse_hp(*hp);
    if (auto s = l->get("search")) {
      c.search = parse_search(*s);
      c.search->seed = c.seed;
      at_path(*s, [&] { return search_candidates(*c.search, c.hp); });
    }
  }

  if (auto cost = root.get("cost")) {
    cost->object({"train-ticks-per-record", "inference-ticks-per-record"});
    c.cost.train_ticks_per_record = cost->number_or("train-ticks-per-record", c.cost.train_ticks_per_record);
    c.cost.inference_ticks_per_record = cost->number_or("inference-ticks-per-record", c.cost.inference_ticks_per_record);
    if (c.cost.train_ticks_per_record < 0) fail(cost->child_path("train-ticks-per-record"), "must be >= 0");
    if (c.cost.inference_ticks_per_record < 0) fail(cost->child_path("inference-ticks-per-record"), "must be >= 0");
  }

  if (auto l = root.get("lifecycle")) parse_lifecycle(*l, c.lifecycle);

  if (auto d = root.get("drift")) {
    d->object({"tick", "coefficients"});
    c.drift.tick = d->at("tick").integer();
    if (*c.drift.tick < 0) fail(d->child_path("tick"), "must be >= 0");
    if (auto co = d->get("coefficients")) {
      if (!co->raw().is_object()) fail(co->path(), "expected an object keyed by source owner");
      for (auto it = co->raw().begin(); it != co->raw().end(); ++it) {
        Node e(it.value(), co->child_path(it.key()));
        auto owner = at_path(e, [&] { return ComponentId::parse(it.key()); });
        c.drift.coefficients[owner] = list_of<double>(e, [](const Node& i) { return i.number(); });
      }
    }
  }

  if (auto h = root.get("holdout")) {
    h->object({"size"});
    c.holdout_size = size_value(h->at("size"));
  }

  if (auto h = root.get("harness")) parse_harness(*h, c);

  if (auto a = root.get("scenario-a")) {
    a->object({"artifact", "data", "threshold"});
    c.a.artifact = resolve(base_dir, a->string_or("artifact", ""));
    c.a.data = resolve(base_dir, a->string_or("data", ""));
    c.a.threshold = a->number_or("threshold", c.a.threshold);
  }
  if (c.kind == ScenarioKind::A) {
    const auto& file = c.mode == ScenarioMode::ImportModel ? c.a.artifact : c.a.data;
    std::string key = c.mode == ScenarioMode::ImportModel ? "scenario-a.artifact" : "scenario-a.data";
    if (file.empty()) fail(key, "required for this mode");
    if (!std::filesystem::exists(file)) throw Error(Errc::FileNotFound, key + ": no such file: " + file, key);
  }

  cross_check(c, root);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "cannot open config: " + path, "config");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ConfigError, std::string("config is not valid JSON: ") + e.what(), "config");
  }
  auto base = std::filesystem::path(path).parent_path().string();
  return parse_config(doc, base.empty() ? "." : base);
}

std::uint64_t config_hash(const json& doc) {
  if (sodium_init() < 0) throw Error(Errc::ConfigError, "libsodium initialisation failed");
  auto text = doc.dump();
  unsigned char out[crypto_generichash_BYTES_MIN];
  crypto_generichash(out, sizeof out, reinterpret_cast<const unsigned char*>(text.data()), text.size(), nullptr, 0);
  std::uint64_t h = 0;
  for (int i = 0; i < 8; ++i) h = (h << 8) | out[i];
  return h;
}

}  // namespace smo
