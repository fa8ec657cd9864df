#ifndef FINSLER_ORBIT_SEARCH_HPP
#define FINSLER_ORBIT_SEARCH_HPP

// Periodic billiard orbits as critical points of the cyclic length function
//   Lambda(x_1, ..., x_r) = f(x_1, x_2) + ... + f(x_r, x_1)
// on r-tuples of boundary points with consecutive points distinct.
//
// Search: every vertex gets a graph chart over its tangent plane; the chart
// gradient of Lambda is driven to zero by Levenberg-Marquardt on |grad|^2, so
// minima, maxima and saddles are all reachable. Converged runs are merged
// into Z_r classes (cyclic relabeling) in seed order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "finsler/billiard.hpp"
#include "finsler/errors.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/geom.hpp"
#include "finsler/metric.hpp"

namespace finsler {

struct CyclicPolygon {
  std::vector<BoundaryPoint> vertices;
  double lambda_value = 0.0;
  double min_edge = 0.0;      // smallest Finsler edge length
  double edge_product = 0.0;  // product of Finsler edge lengths

  int r() const { return static_cast<int>(vertices.size()); }
};

inline std::vector<GeodesicSegment> polygon_edges(const FinslerMetric& metric,
                                                  const std::vector<BoundaryPoint>& vertices) {
  const std::size_t r = vertices.size();
  std::vector<GeodesicSegment> edges;
  edges.reserve(r);
  for (std::size_t i = 0; i < r; ++i)
    edges.push_back(connect(metric, vertices[i].position, vertices[(i + 1) % r].position));
  return edges;
}

/// Validates consecutive distinctness and fills the derived fields.
inline CyclicPolygon make_polygon(const FinslerMetric& metric, const ConvexTable& table,
                                  std::vector<BoundaryPoint> vertices) {
  const std::size_t r = vertices.size();
  if (r < 2) throw Error(ErrorCode::InvalidParameters, "a cyclic polygon needs r >= 2");
  for (std::size_t i = 0; i < r; ++i) {
    if (!(distance(vertices[i].position, vertices[(i + 1) % r].position) > 1e-8 * table.scale()))
      throw Error(ErrorCode::InvalidParameters,
                  "consecutive vertices " + std::to_string(i) + " coincide");
  }
  CyclicPolygon poly;
  poly.vertices = std::move(vertices);
  poly.min_edge = std::numeric_limits<double>::infinity();
  poly.edge_product = 1.0;
  for (const GeodesicSegment& e : polygon_edges(metric, poly.vertices)) {
    poly.lambda_value += e.length;
    poly.min_edge = std::min(poly.min_edge, e.length);
    poly.edge_product *= e.length;
  }
  return poly;
}

inline CyclicPolygon make_polygon(const FinslerMetric& metric, const ConvexTable& table,
                                  const std::vector<Vector>& positions) {
  std::vector<BoundaryPoint> vertices;
  for (const Vector& x : positions) vertices.push_back(boundary_point(table, x));
  return make_polygon(metric, table, std::move(vertices));
}

inline double length_function(const FinslerMetric& metric, const CyclicPolygon& polygon) {
  double sum = 0.0;
  for (const GeodesicSegment& e : polygon_edges(metric, polygon.vertices)) sum += e.length;
  return sum;
}

/// dLambda at one vertex: the covector D_u - D_v and its components on the
/// tangent_basis of T_xM.
struct VertexGradient {
  Covector covector;
  Eigen::VectorXd components;
};

inline std::vector<Covector> vertex_differentials(const FinslerMetric& metric,
                                                  const std::vector<BoundaryPoint>& vertices,
                                                  const std::vector<GeodesicSegment>& edges) {
  const std::size_t r = vertices.size();
  std::vector<Covector> out;
  out.reserve(r);
  for (std::size_t i = 0; i < r; ++i) {
    const Vector& x = vertices[i].position;
    const GeodesicSegment& in = edges[(i + r - 1) % r];
    const GeodesicSegment& outgoing = edges[i];
    out.push_back(legendre(metric, x, in.end_tangent) - legendre(metric, x, outgoing.start_tangent));
  }
  return out;
}

inline std::vector<VertexGradient> grad_length(const FinslerMetric& metric, const ConvexTable& table,
                                               const CyclicPolygon& polygon) {
  (void)table;
  const auto edges = polygon_edges(metric, polygon.vertices);
  const auto diffs = vertex_differentials(metric, polygon.vertices, edges);
  std::vector<VertexGradient> out;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    const auto basis = tangent_basis(polygon.vertices[i]);
    Eigen::VectorXd comp(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j)
      comp[static_cast<Eigen::Index>(j)] = diffs[i](basis[j]);
    out.push_back({diffs[i], comp});
  }
  return out;
}

inline double gradient_norm(const std::vector<VertexGradient>& grad) {
  double s = 0.0;
  for (const auto& g : grad) s += g.components.squaredNorm();
  return std::sqrt(s);
}

/// Membership in G_eps: product of consecutive Finsler edge lengths >= eps.
inline bool in_g_epsilon(const CyclicPolygon& polygon, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidParameters, "epsilon must be positive");
  return polygon.edge_product >= epsilon;
}

// -- charts ------------------------------------------------------------------

/// Product of per-vertex graph charts: vertex k is lifted from
/// base_k + sum_j xi_{k,j} e_{k,j} along the base normal.
class PolygonChart {
 public:
  PolygonChart(const ConvexTable& table, std::vector<BoundaryPoint> base)
      : table_(&table), base_(std::move(base)) {
    for (const auto& b : base_) bases_.push_back(tangent_basis(b));
    tdim_ = table.dim() - 1;
  }

  int dimension() const { return static_cast<int>(base_.size()) * tdim_; }
  const std::vector<BoundaryPoint>& base() const { return base_; }

  std::vector<BoundaryPoint> lift(const Eigen::VectorXd& xi) const {
    std::vector<BoundaryPoint> out;
    out.reserve(base_.size());
    for (std::size_t k = 0; k < base_.size(); ++k) {
      Vector offset = Vector::zero(table_->dim());
      bool moved = false;
      for (int j = 0; j < tdim_; ++j) {
        const double c = xi[static_cast<Eigen::Index>(k) * tdim_ + j];
        if (c != 0.0) moved = true;
        offset += c * bases_[k][static_cast<std::size_t>(j)];
      }
      if (!moved) {
        out.push_back(base_[k]);
        continue;
      }
      const Vector x = lift_along_normal(*table_, base_[k], offset);
      out.push_back(BoundaryPoint{x, unit_normal(*table_, x)});
    }
    return out;
  }

  /// Partial derivative of the lifted vertex k along chart coordinate j, at z.
  Vector partial(std::size_t k, int j, const Vector& z) const {
    const Vector& e = bases_[k][static_cast<std::size_t>(j)];
    const Vector& n = base_[k].outward_normal;
    const Covector g = table_->gradient(z);
    return e - (g(e) / g(n)) * n;
  }

  /// Exact gradient of Lambda composed with the chart, at xi.
  Eigen::VectorXd gradient(const FinslerMetric& metric, const Eigen::VectorXd& xi) const {
    const auto verts = lift(xi);
    const auto edges = polygon_edges(metric, verts);
    const auto diffs = vertex_differentials(metric, verts, edges);
    Eigen::VectorXd g(dimension());
    for (std::size_t k = 0; k < verts.size(); ++k)
      for (int j = 0; j < tdim_; ++j)
        g[static_cast<Eigen::Index>(k) * tdim_ + j] = diffs[k](partial(k, j, verts[k].position));
    return g;
  }

  double lambda(const FinslerMetric& metric, const Eigen::VectorXd& xi) const {
    double sum = 0.0;
    for (const auto& e : polygon_edges(metric, lift(xi))) sum += e.length;
    return sum;
  }

 private:
  const ConvexTable* table_;
  std::vector<BoundaryPoint> base_;
  std::vector<std::vector<Vector>> bases_;
  int tdim_ = 1;
};

// -- canonical forms ---------------------------------------------------------

inline std::vector<BoundaryPoint> rotate_vertices(const std::vector<BoundaryPoint>& v, std::size_t k) {
  std::vector<BoundaryPoint> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(v[(i + k) % v.size()]);
  return out;
}

inline std::vector<BoundaryPoint> reverse_vertices(const std::vector<BoundaryPoint>& v) {
  return std::vector<BoundaryPoint>(v.rbegin(), v.rend());
}

inline std::vector<double> flatten(const std::vector<BoundaryPoint>& v) {
  std::vector<double> out;
  for (const auto& p : v)
    for (int i = 0; i < p.position.dim(); ++i) out.push_back(p.position[i]);
  return out;
}

/// Distance modulo Z_r: min over cyclic relabelings of the largest vertex displacement.
inline double cyclic_distance(const std::vector<BoundaryPoint>& a, const std::vector<BoundaryPoint>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  const std::size_t r = a.size();
  for (std::size_t k = 0; k < r; ++k) {
    double worst = 0.0;
    for (std::size_t i = 0; i < r && worst < best; ++i)
      worst = std::max(worst, distance(a[i].position, b[(i + k) % r].position));
    best = std::min(best, worst);
  }
  return best;
}

/// Coordinates of the cyclic rotation whose rounded coordinate sequence is
/// lexicographically smallest.
inline std::vector<double> canonicalize(const std::vector<BoundaryPoint>& vertices, double cluster_tol) {
  if (!(cluster_tol > 0.0)) throw Error(ErrorCode::InvalidParameters, "cluster_tol must be positive");
  const std::size_t r = vertices.size();
  std::vector<std::vector<double>> rotations;
  for (std::size_t k = 0; k < r; ++k) rotations.push_back(flatten(rotate_vertices(vertices, k)));

  auto pick = [&](double tol) -> std::optional<std::size_t> {
    auto rounded = [&](std::size_t k) {
      std::vector<long long> out;
      for (double c : rotations[k]) out.push_back(std::llround(c / tol));
      return out;
    };
    std::size_t best = 0;
    auto best_key = rounded(0);
    bool ambiguous = false;
    for (std::size_t k = 1; k < r; ++k) {
      auto key = rounded(k);
      if (key < best_key) {
        best = k;
        best_key = std::move(key);
        ambiguous = false;
      } else if (key == best_key) {
        double diff = 0.0;
        for (std::size_t i = 0; i < key.size(); ++i)
          diff = std::max(diff, std::abs(rotations[k][i] - rotations[best][i]));
        if (diff > tol) ambiguous = true;
      }
    }
    if (ambiguous) return std::nullopt;
    return best;
  };

  auto choice = pick(cluster_tol);
  if (!choice) choice = pick(cluster_tol * 1e-3);
  if (!choice)
    throw Error(ErrorCode::AmbiguousCanonicalization, "cyclic rotations tie under rounding");
  return rotations[*choice];
}

/// True if relabeling by a proper divisor k of r maps the polygon to itself,
/// i.e. it traverses an r/k-gon several times.
inline bool is_multiple_cover(const std::vector<BoundaryPoint>& v, double tol) {
  const std::size_t r = v.size();
  for (std::size_t k = 1; k < r; ++k) {
    if (r % k != 0) continue;
    double worst = 0.0;
    for (std::size_t i = 0; i < r; ++i)
      worst = std::max(worst, distance(v[i].position, v[(i + k) % r].position));
    if (worst <= tol) return true;
  }
  return false;
}

inline bool same_class(const std::vector<BoundaryPoint>& a, const std::vector<BoundaryPoint>& b,
                       double cluster_tol) {
  return cyclic_distance(a, b) <= cluster_tol;
}

/// Winding number of a planar polygon about `center`, in [1, r-1].
inline int rotation_number(const CyclicPolygon& polygon, const Vector& center) {
  if (polygon.vertices.empty() || polygon.vertices.front().position.dim() != 2)
    throw Error(ErrorCode::InvalidParameters, "rotation number is defined for planar tables only");
  const int r = polygon.r();
  double total = 0.0;
  for (int i = 0; i < r; ++i) {
    const Vector a = polygon.vertices[static_cast<std::size_t>(i)].position - center;
    const Vector b = polygon.vertices[static_cast<std::size_t>((i + 1) % r)].position - center;
    double inc = std::atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]);
    if (std::abs(inc) < 1e-12) throw Error(ErrorCode::ZeroWinding, "degenerate polygon edge");
    if (inc < 0.0) inc += 2.0 * std::numbers::pi;
    total += inc;
  }
  const long k = std::lround(total / (2.0 * std::numbers::pi));
  if (k < 1 || k > r - 1) throw Error(ErrorCode::ZeroWinding, "winding number out of range");
  return static_cast<int>(k);
}

inline int rotation_number(const CyclicPolygon& polygon) {
  return rotation_number(polygon, Vector::zero(2));
}

// -- Morse index -------------------------------------------------------------

struct MorseInfo {
  int index = 0;
  int degeneracy = 0;
  std::vector<double> eigenvalues;
};

/// Chart Hessian of Lambda by central second differences (step h), split
/// into negative, near-zero (|lambda| <= eig_tol) and positive eigenvalues.
inline MorseInfo morse_index(const FinslerMetric& metric, const ConvexTable& table,
                             const CyclicPolygon& polygon, double h, double eig_tol) {
  const PolygonChart chart(table, polygon.vertices);
  const int n = chart.dimension();
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const double f0 = chart.lambda(metric, zero);
  Eigen::MatrixXd hess(n, n);
  auto at = [&](int i, double si, int j, double sj) {
    Eigen::VectorXd xi = zero;
    xi[i] += si * h;
    xi[j] += sj * h;
    return chart.lambda(metric, xi);
  };
  for (int i = 0; i < n; ++i) {
    hess(i, i) = (at(i, 1, i, 0) - 2.0 * f0 + at(i, -1, i, 0)) / (h * h);
    for (int j = i + 1; j < n; ++j) {
      const double v = (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) /
                       (4.0 * h * h);
      hess(i, j) = hess(j, i) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess, Eigen::EigenvaluesOnly);
  MorseInfo info;
  for (int i = 0; i < n; ++i) {
    const double lam = eig.eigenvalues()[i];
    info.eigenvalues.push_back(lam);
    if (lam < -eig_tol) ++info.index;
    else if (std::abs(lam) <= eig_tol) ++info.degeneracy;
  }
  return info;
}

inline MorseInfo morse_index(const FinslerMetric& metric, const ConvexTable& table,
                             const CyclicPolygon& polygon) {
  return morse_index(metric, table, polygon, 1e-4 * table.scale(), 1e-6 * table.scale());
}

// -- billiard closure ----------------------------------------------------------

/// Distance from vertex 1 after r billiard steps launched along edge 1.
inline double closing_error(const FinslerMetric& metric, const ConvexTable& table,
                            const CyclicPolygon& polygon) {
  const auto first = connect(metric, polygon.vertices[0].position, polygon.vertices[1].position);
  BoundaryState s{polygon.vertices[0], first.start_tangent};
  const auto states = trace(metric, table, s, polygon.r());
  return distance(states.back().point.position, polygon.vertices[0].position);
}

// -- search ------------------------------------------------------------------

struct SearchConfig {
  int seeds = 500;
  std::uint64_t rng_seed = 1;
  double grad_tol = 1e-9;       // x scale
  double epsilon = 0.0;         // G_eps threshold; <= 0 selects 1e-9 * scale^r
  double cluster_tol = 1e-5;    // x scale
  double continuum_tol = 1e-4;  // x scale
  double min_edge = 1e-4;       // x scale
  double eig_tol = 1e-6;        // x scale
  double hessian_step = 1e-4;   // x scale
  int max_iterations = 100;
  int trace_trials = 32;
  int jobs = 0;  // 0: hardware concurrency
};

struct OrbitRecord {
  CyclicPolygon polygon;
  double residual = 0.0;
  std::optional<int> morse_index;
  int degeneracy = 0;
  std::optional<int> rotation_number;
  std::vector<double> canonical_key;
  std::vector<std::string> flags;
  int seed_index = -1;
  int hits = 1;

  bool has_flag(const std::string& f) const {
    return std::find(flags.begin(), flags.end(), f) != flags.end();
  }
  void add_flag(const std::string& f) {
    if (!has_flag(f)) flags.push_back(f);
  }
};

struct SearchResult {
  std::vector<OrbitRecord> orbits;  // one representative per Z_r class, seed order
  int seeds = 0;
  int converged = 0;  // runs that reached grad_tol and passed the guards
  double epsilon = 0.0;

  int classes() const { return static_cast<int>(orbits.size()); }
  bool continuum_suspect() const {
    return std::any_of(orbits.begin(), orbits.end(),
                       [](const OrbitRecord& o) { return o.has_flag("continuum-suspect"); });
  }
  /// Classes not flagged continuum-suspect.
  int isolated_classes() const {
    return static_cast<int>(std::count_if(orbits.begin(), orbits.end(), [](const OrbitRecord& o) {
      return !o.has_flag("continuum-suspect");
    }));
  }
};

struct RefineResult {
  std::vector<BoundaryPoint> vertices;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

/// Levenberg-Marquardt on |chart gradient|^2 with a chart recentred after
/// every accepted step. The Jacobian is the chart Hessian, obtained by
/// central differences of the exact chart gradient.
inline RefineResult refine_critical(const FinslerMetric& metric, const ConvexTable& table,
                                    std::vector<BoundaryPoint> start, const SearchConfig& cfg) {
  const double scale = table.scale();
  const double target = 1e-4 * cfg.grad_tol * scale;
  const double max_vertex_step = 0.2 * scale;
  const double fd = 1e-6 * scale;
  const int tdim = table.dim() - 1;

  RefineResult res;
  res.vertices = std::move(start);
  PolygonChart chart(table, res.vertices);
  const int n = chart.dimension();
  Eigen::VectorXd g = chart.gradient(metric, Eigen::VectorXd::Zero(n));
  double gnorm = g.norm();
  double mu = 1e-3;
  int stalls = 0;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    res.iterations = it;
    if (gnorm <= target) break;
    Eigen::MatrixXd jac(n, n);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[j] = fd;
      jac.col(j) = (chart.gradient(metric, e) - chart.gradient(metric, -e)) / (2.0 * fd);
    }
    jac = 0.5 * (jac + jac.transpose()).eval();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double smax = std::max(sv[0], 1e-300);
    const Eigen::VectorXd ug = svd.matrixU().transpose() * g;

    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      Eigen::VectorXd coef(n);
      for (int i = 0; i < n; ++i) coef[i] = sv[i] / (sv[i] * sv[i] + mu * smax * smax) * ug[i];
      Eigen::VectorXd step = -(svd.matrixV() * coef);
      double worst = 0.0;
      for (int k = 0; k < n / tdim; ++k) worst = std::max(worst, step.segment(k * tdim, tdim).norm());
      if (worst > max_vertex_step) step *= max_vertex_step / worst;
      try {
        auto verts = chart.lift(step);
        for (std::size_t k = 0; k < verts.size(); ++k)
          if (!(distance(verts[k].position, verts[(k + 1) % verts.size()].position) >
                1e-8 * scale))
            throw Error(ErrorCode::InvalidParameters, "collapsed edge");
        PolygonChart next(table, verts);
        Eigen::VectorXd g_next = next.gradient(metric, Eigen::VectorXd::Zero(n));
        const double next_norm = g_next.norm();
        if (std::isfinite(next_norm) && next_norm < gnorm) {
          stalls = next_norm > 0.5 * gnorm ? stalls + 1 : 0;
          res.vertices = std::move(verts);
          chart = std::move(next);
          g = std::move(g_next);
          gnorm = next_norm;
          mu = std::max(mu * 0.1, 1e-16);
          accepted = true;
        }
      } catch (const Error&) {
      }
      if (!accepted) mu *= 10.0;
      if (mu > 1e10) break;
    }
    if (!accepted || stalls > 25) break;
  }
  res.residual = gnorm;
  return res;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class Rng>
std::optional<std::vector<BoundaryPoint>> random_seed_polygon(const ConvexTable& table, int r,
                                                              Rng& rng) {
  const double spacing = 0.1 * table.scale();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<BoundaryPoint> pts;
    for (int i = 0; i < r; ++i) pts.push_back(random_boundary_point(table, rng));
    bool ok = true;
    for (int i = 0; i < r && ok; ++i)
      for (int j = i + 1; j < r && ok; ++j)
        ok = distance(pts[static_cast<std::size_t>(i)].position,
                      pts[static_cast<std::size_t>(j)].position) >= spacing;
    if (ok) return pts;
  }
  return std::nullopt;
}

/// Best of `trials` random billiard traces by closing distance after r steps.
template <class Rng>
std::optional<std::vector<BoundaryPoint>> trace_seed_polygon(const FinslerMetric& metric,
                                                             const ConvexTable& table, int r,
                                                             int trials, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::optional<std::vector<BoundaryPoint>> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const BoundaryPoint y = random_boundary_point(table, rng);
    Vector w = Vector::zero(table.dim());
    for (int i = 0; i < table.dim(); ++i) w[i] = normal(rng);
    w -= dot(w, y.outward_normal) * y.outward_normal;
    if (w.norm() < 1e-8) continue;
    w /= w.norm();
    // Inward direction at a random angle to the tangent plane.
    std::uniform_real_distribution<double> angle(0.05, std::numbers::pi / 2.0);
    const double a = angle(rng);
    const Vector dir = std::cos(a) * w - std::sin(a) * y.outward_normal;
    try {
      BoundaryState s{y, unit_vector(metric, y.position, dir)};
      const auto states = trace(metric, table, s, r);
      const double gap = distance(states.back().point.position, y.position);
      if (gap < best_gap) {
        best_gap = gap;
        std::vector<BoundaryPoint> pts{y};
        for (int i = 0; i + 1 < r; ++i) pts.push_back(states[static_cast<std::size_t>(i)].point);
        best = std::move(pts);
      }
    } catch (const Error&) {
    }
  }
  return best;
}

struct Candidate {
  CyclicPolygon polygon;
  double residual;
};

inline std::optional<Candidate> run_seed(const FinslerMetric& metric, const ConvexTable& table, int r,
                                         const SearchConfig& cfg, double epsilon, int index) {
  std::mt19937_64 rng(splitmix64(cfg.rng_seed ^ splitmix64(static_cast<std::uint64_t>(index))));
  try {
    auto seed = (index % 2 == 0) ? random_seed_polygon(table, r, rng)
                                 : trace_seed_polygon(metric, table, r, cfg.trace_trials, rng);
    if (!seed) return std::nullopt;
    RefineResult res = refine_critical(metric, table, std::move(*seed), cfg);
    if (!(res.residual <= cfg.grad_tol * table.scale())) return std::nullopt;
    CyclicPolygon poly = make_polygon(metric, table, std::move(res.vertices));
    if (!in_g_epsilon(poly, epsilon)) return std::nullopt;
    if (!(poly.min_edge > cfg.min_edge * table.scale())) return std::nullopt;
    return Candidate{std::move(poly), res.residual};
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Multistart critical-point search for Lambda on G(M, r). Deterministic for
/// a fixed config: runs are independent and merged in seed order.
inline SearchResult find_critical(const FinslerMetric& metric, const ConvexTable& table, int r,
                                  const SearchConfig& cfg) {
  if (r < 2) throw Error(ErrorCode::InvalidParameters, "r must be >= 2");
  if (cfg.seeds < 1) throw Error(ErrorCode::InvalidParameters, "seeds must be >= 1");
  if (metric.dim() != table.dim()) throw Error(ErrorCode::InvalidParameters, "dimension mismatch");
  if (!(metric.flat_geodesics() || metric.kind() == FinslerMetric::Kind::magnetic))
    throw Error(ErrorCode::Unsupported, "orbit search needs flat or planar magnetic geodesics");

  const double scale = table.scale();
  SearchResult result;
  result.seeds = cfg.seeds;
  result.epsilon = cfg.epsilon > 0.0 ? cfg.epsilon : 1e-9 * std::pow(scale, r);

  std::vector<std::optional<detail::Candidate>> runs(static_cast<std::size_t>(cfg.seeds));
  unsigned jobs = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs) : std::thread::hardware_concurrency();
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cfg.seeds)));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < cfg.seeds; i = next++)
      runs[static_cast<std::size_t>(i)] = detail::run_seed(metric, table, r, cfg, result.epsilon, i);
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }

  const double cluster_tol = cfg.cluster_tol * scale;
  const double continuum_tol = cfg.continuum_tol * scale;
  for (int i = 0; i < cfg.seeds; ++i) {
    auto& run = runs[static_cast<std::size_t>(i)];
    if (!run) continue;
    ++result.converged;
    bool merged = false;
    for (OrbitRecord& rec : result.orbits) {
      const double dist = cyclic_distance(rec.polygon.vertices, run->polygon.vertices);
      if (dist <= cluster_tol) {
        ++rec.hits;
        merged = true;
        break;
      }
      if (dist <= continuum_tol) {
        ++rec.hits;
        rec.add_flag("continuum-suspect");
        merged = true;
        break;
      }
    }
    if (merged) continue;
    OrbitRecord rec;
    rec.polygon = std::move(run->polygon);
    rec.residual = run->residual;
    rec.seed_index = i;
    result.orbits.push_back(std::move(rec));
  }

  for (OrbitRecord& rec : result.orbits) {
    try {
      rec.canonical_key = canonicalize(rec.polygon.vertices, cluster_tol);
    } catch (const Error&) {
      rec.canonical_key = flatten(rec.polygon.vertices);
      rec.add_flag("ambiguous-canonicalization");
    }
    const MorseInfo info = morse_index(metric, table, rec.polygon, cfg.hessian_step * scale,
                                       cfg.eig_tol * scale);
    rec.morse_index = info.index;
    rec.degeneracy = info.degeneracy;
    if (info.degeneracy > 0) {
      rec.add_flag("degenerate-hessian");
      rec.add_flag("continuum-suspect");
    }
    if (table.dim() == 2) {
      try {
        rec.rotation_number = rotation_number(rec.polygon, table.center());
      } catch (const Error&) {
        rec.add_flag("zero-winding");
      }
    }
    if (is_multiple_cover(rec.polygon.vertices, cluster_tol)) rec.add_flag("multiple-cover");
  }
  for (OrbitRecord& rec : result.orbits) {
    const auto reversed = reverse_vertices(rec.polygon.vertices);
    const bool found = std::any_of(result.orbits.begin(), result.orbits.end(), [&](const OrbitRecord& o) {
      return cyclic_distance(o.polygon.vertices, reversed) <= cluster_tol;
    });
    if (found) rec.add_flag("reversal-found");
  }
  return result;
}

}  // namespace finsler

#endif
