#include "run_config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "ldfactor/errors.hpp"

namespace ldfactor::cli {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ValidationError(field + ": " + what);
}

void check_keys(const YAML::Node& node, const std::string& field,
                std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) fail(field, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(field + "." + key, "unknown key");
  }
}

template <class T>
T get(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(field, "malformed value '" + YAML::Dump(node) + "'");
  }
}

template <class T>
T get_or(const YAML::Node& parent, const char* key, const std::string& field,
         T fallback) {
  const auto node = parent[key];
  if (!node) return fallback;
  return get<T>(node, field + "." + key);
}

template <class T>
T require(const YAML::Node& parent, const char* key, const std::string& field) {
  const auto node = parent[key];
  if (!node) fail(field + "." + key, "missing");
  return get<T>(node, field + "." + key);
}

// Runs a constructor and prefixes its validation message with the field.
template <class F>
auto build(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    fail(field, e.what());
  }
}

SlowlyVaryingSpec parse_sv(const YAML::Node& node, const std::string& field) {
  if (!node) return SlowlyVaryingSpec{};
  check_keys(node, field, {"type", "c", "a", "b"});
  const auto type = require<std::string>(node, "type", field);
  if (type == "constant")
    return build(field, [&] {
      return SlowlyVaryingSpec::constant(get_or(node, "c", field, 1.0));
    });
  if (type == "log")
    return build(field, [&] {
      return SlowlyVaryingSpec::log(require<double>(node, "a", field),
                                    get_or(node, "b", field, 0.0));
    });
  fail(field + ".type", "expected constant or log, got '" + type + "'");
}

RegVarDist parse_dist(const YAML::Node& node, const std::string& field) {
  if (!node) fail(field, "missing");
  check_keys(node, field, {"alpha", "p", "sv"});
  const auto alpha = require<double>(node, "alpha", field);
  const auto p = get_or(node, "p", field, 1.0);
  const auto sv = parse_sv(node["sv"], field + ".sv");
  return build(field, [&] { return RegVarDist(alpha, p, sv); });
}

LoadingSpec parse_loadings(const YAML::Node& node, const std::string& field) {
  if (!node) fail(field, "missing");
  check_keys(node, field, {"type", "values", "ranges"});
  const auto type = require<std::string>(node, "type", field);
  if (type == "deterministic") {
    const auto values = require<std::vector<double>>(node, "values", field);
    return build(field, [&] { return LoadingSpec::deterministic(values); });
  }
  if (type == "bounded_iid") {
    const auto raw = require<std::vector<std::vector<double>>>(node, "ranges", field);
    std::vector<Interval> ranges;
    for (const auto& r : raw) {
      if (r.size() != 2) fail(field + ".ranges", "each range is [lo, hi]");
      ranges.push_back({r[0], r[1]});
    }
    return build(field, [&] { return LoadingSpec::bounded_iid(ranges); });
  }
  fail(field + ".type", "expected deterministic or bounded_iid, got '" + type + "'");
}

std::variant<FactorModelSpec, LevyFactorSpec> parse_model(const YAML::Node& node) {
  const std::string field = "model";
  if (!node) fail(field, "missing");
  const auto type = get_or<std::string>(node, "type", field, "static");
  if (type == "static") {
    check_keys(node, field, {"type", "factor", "idio", "loadings"});
    auto factor = parse_dist(node["factor"], "model.factor");
    auto idio = parse_dist(node["idio"], "model.idio");
    auto loadings = parse_loadings(node["loadings"], "model.loadings");
    return build(field, [&] {
      return FactorModelSpec(std::move(factor), std::move(idio), std::move(loadings));
    });
  }
  if (type == "levy") {
    check_keys(node, field,
               {"type", "lambda_factor", "lambda_eps", "factor", "idio", "loading_mean"});
    const auto lf = require<double>(node, "lambda_factor", field);
    const auto le = require<double>(node, "lambda_eps", field);
    auto factor = parse_dist(node["factor"], "model.factor");
    auto idio = parse_dist(node["idio"], "model.idio");
    const auto el = require<std::vector<double>>(node, "loading_mean", field);
    return build(field, [&] {
      return LevyFactorSpec(lf, le, std::move(factor), std::move(idio), el);
    });
  }
  fail(field + ".type", "expected static or levy, got '" + type + "'");
}

std::optional<MuFunctional> parse_mu(const YAML::Node& node) {
  const std::string field = "mu";
  if (!node) return std::nullopt;
  check_keys(node, field, {"type", "value", "mean_loadings", "alpha", "p"});
  const auto type = require<std::string>(node, "type", field);
  if (type == "user") {
    const auto v = require<double>(node, "value", field);
    if (!(v >= 0.0) || !std::isfinite(v)) fail("mu.value", "must be finite and >= 0");
    return UserScalar{v};
  }
  if (type == "axis_iid") {
    AxisIid a;
    a.mean_loadings = require<std::vector<double>>(node, "mean_loadings", field);
    a.alpha_factor = require<double>(node, "alpha", field);
    a.p = get_or(node, "p", field, 1.0);
    if (!(a.alpha_factor > 0.0)) fail("mu.alpha", "must be > 0");
    if (!(a.p >= 0.0 && a.p <= 1.0)) fail("mu.p", "must lie in [0, 1]");
    return a;
  }
  fail("mu.type", "expected user or axis_iid, got '" + type + "'");
}

void emit_dist(YAML::Emitter& out, const RegVarDist& d) {
  out << YAML::BeginMap << YAML::Key << "alpha" << YAML::Value << d.alpha()
      << YAML::Key << "p" << YAML::Value << d.p();
  out << YAML::Key << "sv" << YAML::Value << YAML::BeginMap;
  const auto& v = d.sv().variant();
  if (const auto* c = std::get_if<ConstantSv>(&v)) {
    out << YAML::Key << "type" << YAML::Value << "constant" << YAML::Key << "c"
        << YAML::Value << c->c;
  } else if (const auto* l = std::get_if<LogSv>(&v)) {
    out << YAML::Key << "type" << YAML::Value << "log" << YAML::Key << "a"
        << YAML::Value << l->a << YAML::Key << "b" << YAML::Value << l->b;
  } else {
    throw ValidationError("convergent slowly varying specs cannot be serialized");
  }
  out << YAML::EndMap << YAML::EndMap;
}

void emit_doubles(YAML::Emitter& out, const std::vector<double>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << x;
  out << YAML::EndSeq;
}

}  // namespace

const FactorModelSpec& RunConfig::factor_model() const {
  if (const auto* m = std::get_if<FactorModelSpec>(&model)) return *m;
  throw ValidationError("model.type: this command needs a static factor model");
}

const LevyFactorSpec& RunConfig::levy_model() const {
  if (const auto* m = std::get_if<LevyFactorSpec>(&model)) return *m;
  throw ValidationError("model.type: this command needs a levy model");
}

MuFunctional RunConfig::effective_mu() const {
  if (mu) return *mu;
  return axis_mu(factor_model());
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!root || !root.IsMap()) throw ValidationError("config: expected a mapping");
  check_keys(root, "config", {"model", "mu", "grid", "sampling", "output", "levy"});

  RunConfig cfg(parse_model(root["model"]));
  cfg.mu = parse_mu(root["mu"]);

  const auto grid = root["grid"];
  if (grid) {
    check_keys(grid, "grid", {"n", "x", "lambda_exponent"});
    if (grid["n"]) {
      for (const auto& v : get<std::vector<double>>(grid["n"], "grid.n")) {
        if (!(v >= 1.0) || v != std::floor(v) ||
            v > static_cast<double>(std::numeric_limits<std::uint32_t>::max()))
          fail("grid.n", "entries must be positive integers");
        cfg.n_list.push_back(static_cast<std::size_t>(v));
      }
    }
    if (grid["x"]) cfg.x_list = get<std::vector<double>>(grid["x"], "grid.x");
    cfg.lambda_exponent = get_or(grid, "lambda_exponent", "grid", 2.0);
  }
  for (double x : cfg.x_list)
    if (!(x > 0.0) || !std::isfinite(x)) fail("grid.x", "entries must be finite and > 0");

  const auto sampling = root["sampling"];
  if (sampling) {
    check_keys(sampling, "sampling", {"iters", "seed", "workers"});
    const auto iters = get_or<long long>(sampling, "iters", "sampling", 10000);
    if (iters < 1) fail("sampling.iters", "must be >= 1");
    cfg.iters = static_cast<std::uint64_t>(iters);
    cfg.seed = get_or<std::uint64_t>(sampling, "seed", "sampling", 0);
    const auto workers = get_or<long long>(sampling, "workers", "sampling", 1);
    if (workers < 0) fail("sampling.workers", "must be >= 0");
    cfg.workers = static_cast<unsigned>(workers);
  }

  const auto output = root["output"];
  if (output) {
    check_keys(output, "output", {"path", "format"});
    cfg.output = get_or<std::string>(output, "path", "output", "-");
    const auto fmt = get_or<std::string>(output, "format", "output", "csv");
    if (fmt == "csv") {
      cfg.format = OutputFormat::csv;
    } else if (fmt == "table") {
      cfg.format = OutputFormat::table;
    } else {
      fail("output.format", "expected csv or table, got '" + fmt + "'");
    }
  }

  const auto levy = root["levy"];
  if (levy) {
    check_keys(levy, "levy",
               {"t", "paths", "threshold_scale", "threshold", "concentration",
                "stratify", "big_level", "events_output", "events_paths"});
    auto& l = cfg.levy;
    if (levy["t"]) l.t_list = get<std::vector<double>>(levy["t"], "levy.t");
    for (double t : l.t_list)
      if (!(t >= 0.0 && t <= 1.0)) fail("levy.t", "entries must lie in [0, 1]");
    const auto paths = get_or<long long>(levy, "paths", "levy", 100000);
    if (paths < 1) fail("levy.paths", "must be >= 1");
    l.paths = static_cast<std::uint64_t>(paths);
    l.threshold_scale = get_or(levy, "threshold_scale", "levy", 1.0);
    if (levy["threshold"]) l.threshold = get<double>(levy["threshold"], "levy.threshold");
    l.concentration = get_or(levy, "concentration", "levy", 0.9);
    if (!(l.concentration > 0.0 && l.concentration <= 1.0))
      fail("levy.concentration", "must lie in (0, 1]");
    l.stratify = get_or(levy, "stratify", "levy", true);
    l.big_level = get_or(levy, "big_level", "levy", 0.5);
    if (!(l.big_level > 0.0 && l.big_level <= 1.0))
      fail("levy.big_level", "must lie in (0, 1]");
    l.events_output = get_or<std::string>(levy, "events_output", "levy", "");
    l.events_paths = get_or<std::uint64_t>(levy, "events_paths", "levy", 0);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot read '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string dump_config(const RunConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(std::numeric_limits<double>::max_digits10);
  out << YAML::BeginMap;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  if (const auto* m = std::get_if<FactorModelSpec>(&cfg.model)) {
    out << YAML::Key << "type" << YAML::Value << "static";
    out << YAML::Key << "factor" << YAML::Value;
    emit_dist(out, m->factor_dist());
    out << YAML::Key << "idio" << YAML::Value;
    emit_dist(out, m->idio_dist());
    out << YAML::Key << "loadings" << YAML::Value << YAML::BeginMap;
    const auto& v = m->loading_spec().variant();
    if (const auto* det = std::get_if<DeterministicLoadings>(&v)) {
      out << YAML::Key << "type" << YAML::Value << "deterministic";
      out << YAML::Key << "values" << YAML::Value;
      emit_doubles(out, det->values);
    } else {
      out << YAML::Key << "type" << YAML::Value << "bounded_iid";
      out << YAML::Key << "ranges" << YAML::Value << YAML::BeginSeq;
      for (const auto& r : std::get<BoundedIidLoadings>(v).ranges)
        emit_doubles(out, {r.lo, r.hi});
      out << YAML::EndSeq;
    }
    out << YAML::EndMap;
  } else {
    const auto& l = std::get<LevyFactorSpec>(cfg.model);
    out << YAML::Key << "type" << YAML::Value << "levy";
    out << YAML::Key << "lambda_factor" << YAML::Value << l.lambda_factor();
    out << YAML::Key << "lambda_eps" << YAML::Value << l.lambda_eps();
    out << YAML::Key << "factor" << YAML::Value;
    emit_dist(out, l.jump_factor());
    out << YAML::Key << "idio" << YAML::Value;
    emit_dist(out, l.jump_eps());
    out << YAML::Key << "loading_mean" << YAML::Value;
    emit_doubles(out, l.loading_mean());
  }
  out << YAML::EndMap;

  if (cfg.mu) {
    out << YAML::Key << "mu" << YAML::Value << YAML::BeginMap;
    if (const auto* u = std::get_if<UserScalar>(&*cfg.mu)) {
      out << YAML::Key << "type" << YAML::Value << "user" << YAML::Key << "value"
          << YAML::Value << u->value;
    } else {
      const auto& a = std::get<AxisIid>(*cfg.mu);
      out << YAML::Key << "type" << YAML::Value << "axis_iid";
      out << YAML::Key << "mean_loadings" << YAML::Value;
      emit_doubles(out, a.mean_loadings);
      out << YAML::Key << "alpha" << YAML::Value << a.alpha_factor;
      out << YAML::Key << "p" << YAML::Value << a.p;
    }
    out << YAML::EndMap;
  }

  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto n : cfg.n_list) out << static_cast<unsigned long long>(n);
  out << YAML::EndSeq;
  out << YAML::Key << "x" << YAML::Value;
  emit_doubles(out, cfg.x_list);
  out << YAML::Key << "lambda_exponent" << YAML::Value << cfg.lambda_exponent;
  out << YAML::EndMap;

  out << YAML::Key << "sampling" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "iters" << YAML::Value << static_cast<unsigned long long>(cfg.iters);
  out << YAML::Key << "seed" << YAML::Value << static_cast<unsigned long long>(cfg.seed);
  out << YAML::Key << "workers" << YAML::Value << cfg.workers;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "path" << YAML::Value << YAML::DoubleQuoted << cfg.output;
  out << YAML::Key << "format" << YAML::Value
      << (cfg.format == OutputFormat::csv ? "csv" : "table");
  out << YAML::EndMap;

  const auto& l = cfg.levy;
  out << YAML::Key << "levy" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "t" << YAML::Value;
  emit_doubles(out, l.t_list);
  out << YAML::Key << "paths" << YAML::Value << static_cast<unsigned long long>(l.paths);
  out << YAML::Key << "threshold_scale" << YAML::Value << l.threshold_scale;
  if (l.threshold) out << YAML::Key << "threshold" << YAML::Value << *l.threshold;
  out << YAML::Key << "concentration" << YAML::Value << l.concentration;
  out << YAML::Key << "stratify" << YAML::Value << l.stratify;
  out << YAML::Key << "big_level" << YAML::Value << l.big_level;
  out << YAML::Key << "events_output" << YAML::Value << YAML::DoubleQuoted
      << l.events_output;
  out << YAML::Key << "events_paths" << YAML::Value
      << static_cast<unsigned long long>(l.events_paths);
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace ldfactor::cli
