#ifndef FINSLER_CONFIG_HPP
#define FINSLER_CONFIG_HPP

// JSON experiment configuration: parsing with path-qualified diagnostics,
// defaults, and the resolved form embedded in every report.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "finsler/errors.hpp"
#include "finsler/geom.hpp"
#include "finsler/metric.hpp"
#include "finsler/orbit_search.hpp"

namespace finsler {

using json = nlohmann::json;

struct MetricSpec {
  std::string kind = "euclidean";
  std::vector<std::vector<double>> tensor;  // riemannian
  std::vector<double> alpha;                // minkowski
  double field = 0.0;                       // magnetic
};

struct TraceSpec {
  std::vector<double> x;
  std::vector<double> v;
  int steps = 50;
  std::string format = "csv";
};

struct ExperimentConfig {
  std::string mode = "search";
  int r = 3;
  TableSpec table{{1.0, 1.0}, 0.0, {}};
  MetricSpec metric;
  SearchConfig search;
  std::string bound = "generic";  // generic | general
  TraceSpec trace;
  int d = 3;  // betti / verify
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::InvalidConfig, (path_.empty() ? std::string("/") : path_) + ": " + msg);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  ConfigReader child(const std::string& key) {
    seen_.insert(key);
    return ConfigReader(node_.at(key), path_ + "/" + key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number()) field_fail(key, "expected a number");
    return v.get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) field_fail(key, "expected an integer");
    return v.get<std::int64_t>();
  }

  std::string string(const std::string& key, const std::string& fallback,
                     std::initializer_list<const char*> allowed) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_string()) field_fail(key, "expected a string");
    const std::string s = v.get<std::string>();
    std::string choices;
    for (const char* a : allowed) {
      if (s == a) return s;
      choices += choices.empty() ? a : std::string(", ") + a;
    }
    field_fail(key, "unknown value \"" + s + "\" (expected one of: " + choices + ")");
  }

  std::vector<double> numbers(const std::string& key) {
    if (!has(key)) field_fail(key, "missing");
    return numbers_of(node_.at(key), path_ + "/" + key);
  }

  std::vector<std::vector<double>> matrix(const std::string& key) {
    if (!has(key)) field_fail(key, "missing");
    const json& v = node_.at(key);
    if (!v.is_array()) field_fail(key, "expected an array of rows");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(numbers_of(v[i], path_ + "/" + key + "/" + std::to_string(i)));
    return out;
  }

  /// Rejects keys that were never looked up, which catches typos.
  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (!seen_.count(it.key())) fail("unknown key \"" + it.key() + "\"");
  }

  [[noreturn]] void field_fail(const std::string& key, const std::string& msg) const {
    throw Error(ErrorCode::InvalidConfig, path_ + "/" + key + ": " + msg);
  }

 private:
  static std::vector<double> numbers_of(const json& v, const std::string& path) {
    if (!v.is_array()) throw Error(ErrorCode::InvalidConfig, path + ": expected an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) throw Error(ErrorCode::InvalidConfig, path + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

inline int checked_int(ConfigReader& rd, const std::string& key, int fallback, int lo) {
  const std::int64_t v = rd.integer(key, fallback);
  if (v < lo || v > 1'000'000'000) rd.field_fail(key, "must be >= " + std::to_string(lo));
  return static_cast<int>(v);
}

inline double positive(ConfigReader& rd, const std::string& key, double fallback) {
  const double v = rd.number(key, fallback);
  if (!(v > 0.0)) rd.field_fail(key, "must be positive");
  return v;
}

}  // namespace detail

inline TableSpec parse_table(const json& j, const std::string& path = "/table") {
  detail::ConfigReader rd(j, path);
  const std::string kind = rd.string("kind", "ellipsoid", {"ellipsoid", "sphere"});
  TableSpec spec;
  if (kind == "sphere") {
    const int dim = detail::checked_int(rd, "dim", 3, 2);
    const double radius = detail::positive(rd, "radius", 1.0);
    spec.semi_axes.assign(static_cast<std::size_t>(dim), radius);
  } else {
    spec.semi_axes = rd.numbers("semi_axes");
    if (spec.semi_axes.size() < 2) rd.field_fail("semi_axes", "need at least two axes");
    for (double a : spec.semi_axes)
      if (!(a > 0.0)) rd.field_fail("semi_axes", "axes must be positive");
  }
  if (rd.has("perturbation")) {
    auto p = rd.child("perturbation");
    spec.eps = p.number("eps", 0.0);
    if (p.has("coeffs")) {
      spec.coeffs = p.numbers("coeffs");
      if (spec.coeffs.size() != spec.semi_axes.size())
        p.field_fail("coeffs", "length must match the table dimension");
    }
    p.finish();
  }
  rd.finish();
  return spec;
}

inline MetricSpec parse_metric(const json& j, const std::string& path = "/metric") {
  detail::ConfigReader rd(j, path);
  MetricSpec spec;
  spec.kind = rd.string("kind", "euclidean", {"euclidean", "riemannian", "minkowski", "magnetic"});
  if (spec.kind == "riemannian") spec.tensor = rd.matrix("tensor");
  if (spec.kind == "minkowski") spec.alpha = rd.numbers("alpha");
  if (spec.kind == "magnetic") {
    if (!rd.has("B")) rd.field_fail("B", "missing");
    spec.field = rd.number("B", 0.0);
  }
  rd.finish();
  return spec;
}

inline ConvexTable make_table(const TableSpec& spec) { return ConvexTable::ellipsoid(spec); }

inline FinslerMetric make_metric(const MetricSpec& spec, int dim) {
  if (spec.kind == "euclidean") return FinslerMetric::euclidean(dim);
  if (spec.kind == "riemannian") {
    const auto n = static_cast<Eigen::Index>(spec.tensor.size());
    if (n != dim) throw Error(ErrorCode::InvalidConfig, "/metric/tensor: size must match the table dimension");
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(spec.tensor[static_cast<std::size_t>(i)].size()) != n)
        throw Error(ErrorCode::InvalidConfig, "/metric/tensor: matrix must be square");
      for (Eigen::Index k = 0; k < n; ++k) g(i, k) = spec.tensor[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    return FinslerMetric::riemannian(g);
  }
  if (spec.kind == "minkowski") {
    if (static_cast<int>(spec.alpha.size()) != dim)
      throw Error(ErrorCode::InvalidConfig, "/metric/alpha: length must match the table dimension");
    return FinslerMetric::minkowski(Covector(Eigen::Map<const Eigen::VectorXd>(
        spec.alpha.data(), static_cast<Eigen::Index>(spec.alpha.size()))));
  }
  if (dim != 2) throw Error(ErrorCode::InvalidConfig, "/metric: magnetic metrics need a planar table");
  return FinslerMetric::magnetic(spec.field);
}

/// Parses a config document. `overrides` are applied by the caller afterwards.
inline ExperimentConfig parse_config(const json& j) {
  detail::ConfigReader rd(j, "");
  ExperimentConfig cfg;
  cfg.mode = rd.string("mode", cfg.mode, {"search", "trace", "betti", "verify"});
  cfg.r = detail::checked_int(rd, "r", cfg.r, 2);
  cfg.d = detail::checked_int(rd, "d", cfg.d, 1);
  if (rd.has("table")) cfg.table = parse_table(j.at("table"));
  if (rd.has("metric")) cfg.metric = parse_metric(j.at("metric"));
  if (rd.has("search")) {
    auto s = rd.child("search");
    SearchConfig& sc = cfg.search;
    sc.seeds = detail::checked_int(s, "seeds", sc.seeds, 1);
    const std::int64_t seed = s.integer("rng_seed", static_cast<std::int64_t>(sc.rng_seed));
    if (seed < 0) s.field_fail("rng_seed", "must be nonnegative");
    sc.rng_seed = static_cast<std::uint64_t>(seed);
    sc.grad_tol = detail::positive(s, "grad_tol", sc.grad_tol);
    sc.epsilon = s.number("epsilon", sc.epsilon);
    sc.cluster_tol = detail::positive(s, "cluster_tol", sc.cluster_tol);
    sc.continuum_tol = detail::positive(s, "continuum_tol", sc.continuum_tol);
    sc.min_edge = detail::positive(s, "min_edge", sc.min_edge);
    sc.eig_tol = detail::positive(s, "eig_tol", sc.eig_tol);
    sc.hessian_step = detail::positive(s, "hessian_step", sc.hessian_step);
    sc.max_iterations = detail::checked_int(s, "max_iterations", sc.max_iterations, 1);
    sc.trace_trials = detail::checked_int(s, "trace_trials", sc.trace_trials, 1);
    cfg.bound = s.string("bound", cfg.bound, {"generic", "general"});
    if (sc.continuum_tol < sc.cluster_tol) s.field_fail("continuum_tol", "must be >= cluster_tol");
    s.finish();
  }
  if (rd.has("trace")) {
    auto t = rd.child("trace");
    if (t.has("x")) cfg.trace.x = t.numbers("x");
    if (t.has("v")) cfg.trace.v = t.numbers("v");
    cfg.trace.steps = detail::checked_int(t, "steps", cfg.trace.steps, 1);
    cfg.trace.format = t.string("format", cfg.trace.format, {"csv", "json"});
    t.finish();
  }
  rd.finish();
  return cfg;
}

/// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "config") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    std::string msg = e.what();
    if (const auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw Error(ErrorCode::InvalidConfig,
                source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
  try {
    return parse_config(j);
  } catch (const Error& e) {
    throw Error(e.code(), source + ": " + e.detail());
  }
}

inline json to_json(const TableSpec& spec) {
  json t = {{"kind", "ellipsoid"}, {"semi_axes", spec.semi_axes}};
  if (spec.eps != 0.0 || !spec.coeffs.empty()) {
    std::vector<double> coeffs = spec.coeffs;
    if (coeffs.empty()) coeffs.assign(spec.semi_axes.size(), 1.0);
    t["perturbation"] = {{"eps", spec.eps}, {"coeffs", coeffs}};
  }
  return t;
}

inline json to_json(const MetricSpec& spec) {
  json m = {{"kind", spec.kind}};
  if (spec.kind == "riemannian") m["tensor"] = spec.tensor;
  if (spec.kind == "minkowski") m["alpha"] = spec.alpha;
  if (spec.kind == "magnetic") m["B"] = spec.field;
  return m;
}

/// The fully resolved configuration, defaults included.
inline json to_json(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = cfg.mode;
  if (cfg.mode == "betti" || cfg.mode == "verify") {
    j["d"] = cfg.d;
    j["r"] = cfg.r;
    return j;
  }
  j["r"] = cfg.r;
  j["table"] = to_json(cfg.table);
  j["metric"] = to_json(cfg.metric);
  if (cfg.mode == "search") {
    const SearchConfig& s = cfg.search;
    j["search"] = {{"seeds", s.seeds},
                   {"rng_seed", s.rng_seed},
                   {"grad_tol", s.grad_tol},
                   {"epsilon", s.epsilon},
                   {"cluster_tol", s.cluster_tol},
                   {"continuum_tol", s.continuum_tol},
                   {"min_edge", s.min_edge},
                   {"eig_tol", s.eig_tol},
                   {"hessian_step", s.hessian_step},
                   {"max_iterations", s.max_iterations},
                   {"trace_trials", s.trace_trials},
                   {"bound", cfg.bound}};
  } else {
    j["trace"] = {{"x", cfg.trace.x}, {"v", cfg.trace.v}, {"steps", cfg.trace.steps},
                  {"format", cfg.trace.format}};
  }
  return j;
}

}  // namespace finsler

#endif
