#ifndef FINSLER_GEODESIC_HPP
#define FINSLER_GEODESIC_HPP

// Geodesics and the oriented Finsler distance f(x, y).
//
// Three geodesic kinds are supported:
//   chord       straight segments (flat_geodesics metrics)
//   arc         Larmor circles of the planar constant magnetic metric
//   integrated  RK4 integration of the Euler-Lagrange equations
//
// Two-point distances exist for chord and arc only; integrated geodesics are
// available as initial-value rays (tracing), not as boundary-value problems.

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/errors.hpp"
#include "finsler/geom.hpp"
#include "finsler/metric.hpp"

namespace finsler {

enum class GeodesicKind { chord, arc, integrated };

struct GeodesicSegment {
  Vector start;
  Vector end;
  Vector start_tangent;  // indicatrix point at start
  Vector end_tangent;    // indicatrix point at end
  double length = 0.0;   // f(start, end)
  GeodesicKind kind = GeodesicKind::chord;
};

namespace detail {

struct GaussLegendre32 {
  std::array<double, 32> nodes{};
  std::array<double, 32> weights{};

  GaussLegendre32() {
    constexpr int n = 32;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

inline const GaussLegendre32& gauss_legendre32() {
  static const GaussLegendre32 rule;
  return rule;
}

/// Integral of fn over [0, len] with the 32-node rule.
template <class Fn>
double integrate_gl32(Fn&& fn, double len) {
  const auto& rule = gauss_legendre32();
  double sum = 0.0;
  for (int i = 0; i < 32; ++i) sum += rule.weights[i] * fn(0.5 * len * (rule.nodes[i] + 1.0));
  return 0.5 * len * sum;
}

}  // namespace detail

/// Larmor circle through `start` with Euclidean direction angle `theta0`,
/// parametrized by Euclidean arclength. The heading turns at rate -B.
struct LarmorArc {
  Vector start;
  double theta0;
  double field;

  double omega() const { return -field; }
  double heading(double s) const { return theta0 + omega() * s; }
  Vector position(double s) const {
    const double w = omega();
    const double th = heading(s);
    return start + Vector{(std::sin(th) - std::sin(theta0)) / w, (std::cos(theta0) - std::cos(th)) / w};
  }
  Vector direction(double s) const {
    const double th = heading(s);
    return Vector{std::cos(th), std::sin(th)};
  }
  Vector center() const {
    const double w = omega();
    return start + Vector{-std::sin(theta0) / w, std::cos(theta0) / w};
  }
  double radius() const { return 1.0 / std::abs(field); }
};

/// Finsler length of the arc between Euclidean arclengths 0 and s_total.
inline double arc_finsler_length(const FinslerMetric& metric, const LarmorArc& arc, double s_total) {
  const double flux = detail::integrate_gl32(
      [&](double s) { return metric.alpha(arc.position(s))(arc.direction(s)); }, s_total);
  return s_total + flux;
}

/// Shortest oriented geodesic from x to y.
inline GeodesicSegment connect(const FinslerMetric& metric, const Vector& x, const Vector& y) {
  if (x.dim() != metric.dim() || y.dim() != metric.dim())
    throw Error(ErrorCode::InvalidParameters, "dimension mismatch");
  const Vector chord = y - x;
  const double len = chord.norm();
  if (!(len > 1e-15 * std::max({1.0, x.norm(), y.norm()})))
    throw Error(ErrorCode::CoincidentPoints, "connect needs distinct points");

  if (metric.flat_geodesics()) {
    GeodesicSegment seg{x, y, unit_vector(metric, x, chord), unit_vector(metric, y, chord), 0.0,
                        GeodesicKind::chord};
    if (metric.kind() == FinslerMetric::Kind::custom) {
      seg.length = detail::integrate_gl32(
          [&](double s) { return metric.lagrangian(x + (s / len) * chord, chord / len); }, len);
    } else {
      seg.length = metric.lagrangian(x, chord);
    }
    return seg;
  }

  if (metric.kind() == FinslerMetric::Kind::magnetic) {
    const double b = metric.field();
    const double radius = 1.0 / std::abs(b);
    if (!(len < 2.0 * radius))
      throw Error(ErrorCode::ChordTooLongForField, "chord " + std::to_string(len) +
                                                       " >= Larmor diameter " +
                                                       std::to_string(2.0 * radius));
    const double half_angle = std::asin(len / (2.0 * radius));
    const double s_total = 2.0 * half_angle * radius;
    const double chord_angle = std::atan2(chord[1], chord[0]);
    // The chord heading is the mean of the start and end headings.
    const LarmorArc arc{x, chord_angle + b * s_total / 2.0, b};
    GeodesicSegment seg;
    seg.start = x;
    seg.end = y;
    seg.start_tangent = unit_vector(metric, x, arc.direction(0.0));
    seg.end_tangent = unit_vector(metric, y, arc.direction(s_total));
    seg.length = arc_finsler_length(metric, arc, s_total);
    seg.kind = GeodesicKind::arc;
    return seg;
  }

  throw Error(ErrorCode::Unsupported,
              "two-point geodesics are only available for flat and planar magnetic metrics");
}

/// Finsler distance f(x, y).
inline double finsler_distance(const FinslerMetric& metric, const Vector& x, const Vector& y) {
  return connect(metric, x, y).length;
}

struct PhaseState {
  Vector position;
  Vector velocity;
};

namespace detail {

/// Euler-Lagrange acceleration at unit Finsler speed. L_vv is singular along
/// v, so the system is solved on ker D_v and the v-component is fixed by
/// d/dt L(gamma, gamma') = 0.
inline Vector geodesic_acceleration(const FinslerMetric& metric, const Vector& x, const Vector& v) {
  const int dim = metric.dim();
  const double vn = v.norm();
  const double hx = 1e-5 * std::max(1.0, x.norm());
  const double hv = 1e-5 * vn;

  const Covector d = metric.fiber_derivative(x, v);
  Covector lx = Covector::zero(dim);
  Eigen::MatrixXd lvv(dim, dim);
  for (int j = 0; j < dim; ++j) {
    const Vector ex = Vector::axis(dim, j) * hx;
    lx[j] = (metric.lagrangian(x + ex, v) - metric.lagrangian(x - ex, v)) / (2.0 * hx);
    const Vector ev = Vector::axis(dim, j) * hv;
    lvv.col(j) =
        (metric.fiber_derivative(x, v + ev).coeffs() - metric.fiber_derivative(x, v - ev).coeffs()) /
        (2.0 * hv);
  }
  lvv = 0.5 * (lvv + lvv.transpose()).eval();
  // (L_vx) v: derivative of the fiber derivative along v in the base.
  const double hs = hx / std::max(vn, 1e-300);
  const Covector lvx_v =
      (metric.fiber_derivative(x + hs * v, v) - metric.fiber_derivative(x - hs * v, v)) / (2.0 * hs);
  const Eigen::VectorXd rhs = lx.coeffs() - lvx_v.coeffs();

  const std::vector<Vector> kernel = tangent_basis(BoundaryPoint{x, sharp(d) / d.norm()});
  Eigen::MatrixXd w(dim, dim - 1);
  for (int k = 0; k < dim - 1; ++k) w.col(k) = kernel[k].coeffs();
  const Eigen::MatrixXd mass = w.transpose() * lvv * w;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(mass);
  const double scale = mass.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().cwiseAbs().minCoeff() > 1e-12 * scale) ||
      !(scale > 0.0))
    throw Error(ErrorCode::SingularMass, "restricted L_vv is not invertible");
  const Eigen::VectorXd omega = ldlt.solve(w.transpose() * rhs);
  return Vector(w * omega) - lx(v) * v;
}

inline PhaseState rk4_step(const FinslerMetric& metric, const PhaseState& s, double dt) {
  auto f = [&](const Vector& x, const Vector& v) { return geodesic_acceleration(metric, x, v); };
  const Vector k1x = s.velocity;
  const Vector k1v = f(s.position, s.velocity);
  const Vector k2x = s.velocity + 0.5 * dt * k1v;
  const Vector k2v = f(s.position + 0.5 * dt * k1x, k2x);
  const Vector k3x = s.velocity + 0.5 * dt * k2v;
  const Vector k3v = f(s.position + 0.5 * dt * k2x, k3x);
  const Vector k4x = s.velocity + dt * k3v;
  const Vector k4v = f(s.position + dt * k3x, k4x);
  PhaseState out;
  out.position = s.position + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  Vector v = s.velocity + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  out.velocity = v / metric.lagrangian(out.position, v);
  return out;
}

}  // namespace detail

/// RK4 integration of the geodesic with unit Finsler speed. Returns the
/// states at t = 0, dt, 2 dt, ..., t_max (last step shortened).
inline std::vector<PhaseState> integrate_geodesic(const FinslerMetric& metric, const Vector& x,
                                                  const Vector& v, double t_max, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidParameters, "dt must be positive");
  if (!(t_max >= 0.0)) throw Error(ErrorCode::InvalidParameters, "t_max must be >= 0");
  const double len = metric.lagrangian(x, v);
  if (!(std::abs(len - 1.0) <= 1e-9))
    throw Error(ErrorCode::NotOnIndicatrix, "initial velocity must have unit Finsler length");

  std::vector<PhaseState> path{{x, v}};
  double t = 0.0;
  while (t < t_max - 1e-15 * t_max) {
    const double h = std::min(dt, t_max - t);
    path.push_back(detail::rk4_step(metric, path.back(), h));
    t += h;
  }
  return path;
}

/// Geodesic ray from a point with a given initial indicatrix direction.
/// `state(t)` is exact for chords and arcs and RK4-accurate otherwise.
class GeodesicRay {
 public:
  GeodesicRay(const FinslerMetric& metric, Vector origin, const Vector& direction)
      : metric_(&metric), origin_(std::move(origin)) {
    direction_ = unit_vector(metric, origin_, direction);
    if (metric.flat_geodesics()) {
      kind_ = GeodesicKind::chord;
    } else if (metric.kind() == FinslerMetric::Kind::magnetic) {
      kind_ = GeodesicKind::arc;
      arc_ = LarmorArc{origin_, std::atan2(direction_[1], direction_[0]), metric.field()};
    } else {
      kind_ = GeodesicKind::integrated;
      nodes_.push_back({origin_, direction_});
    }
  }

  GeodesicKind kind() const { return kind_; }

  /// Position and indicatrix velocity at ray parameter t: Finsler length for
  /// chords and integrated rays, Euclidean arclength for arcs.
  PhaseState state(double t) {
    switch (kind_) {
      case GeodesicKind::chord: {
        Vector x = origin_ + t * direction_;
        return {x, unit_vector(*metric_, x, direction_)};
      }
      case GeodesicKind::arc: {
        Vector x = arc_.position(t);
        return {x, unit_vector(*metric_, x, arc_.direction(t))};
      }
      case GeodesicKind::integrated: {
        extend_to(t);
        const auto k = static_cast<std::size_t>(std::floor(t / node_dt_));
        const std::size_t idx = std::min(k, nodes_.size() - 1);
        const double rest = t - static_cast<double>(idx) * node_dt_;
        if (rest <= 0.0) return nodes_[idx];
        return detail::rk4_step(*metric_, nodes_[idx], rest);
      }
    }
    return {origin_, direction_};
  }

  /// Finsler length between parameters 0 and t.
  double length(double t) {
    switch (kind_) {
      case GeodesicKind::arc: return arc_finsler_length(*metric_, arc_, t);
      case GeodesicKind::chord:
        if (metric_->kind() == FinslerMetric::Kind::custom) {
          return detail::integrate_gl32(
              [&](double s) { return metric_->lagrangian(origin_ + s * direction_, direction_); }, t);
        }
        return t;
      case GeodesicKind::integrated: return t;
    }
    return t;
  }

  void set_node_spacing(double dt) { node_dt_ = dt; }

 private:
  void extend_to(double t) {
    while (static_cast<double>(nodes_.size() - 1) * node_dt_ < t)
      nodes_.push_back(detail::rk4_step(*metric_, nodes_.back(), node_dt_));
  }

  const FinslerMetric* metric_;
  Vector origin_;
  Vector direction_;
  GeodesicKind kind_ = GeodesicKind::chord;
  LarmorArc arc_{};
  std::vector<PhaseState> nodes_;
  double node_dt_ = 1e-3;
};

/// Boundary hit of a geodesic ray, with the arrival direction and the length
/// of the traversed segment.
struct BoundaryHit {
  BoundaryPoint point;
  GeodesicSegment segment;
};

/// Follows the geodesic leaving boundary point y with inward indicatrix
/// direction v to its next boundary crossing.
inline BoundaryHit advance_to_boundary(const FinslerMetric& metric, const ConvexTable& table,
                                       const BoundaryPoint& y, const Vector& v) {
  const Covector p = conormal(table, y, metric);
  const double pairing = p(v);
  if (!(std::abs(pairing) >= 1e-8))
    throw Error(ErrorCode::GrazingDeparture, "departure direction is tangent to the boundary");
  if (!(pairing < 0.0))
    throw Error(ErrorCode::InvalidParameters, "departure direction points outward");

  GeodesicRay ray(metric, y.position, v);
  const double scale = table.scale();
  const double step = table.bounding_radius() / 64.0;
  const double t_min = 1e-6 * scale;
  const double t_max = 8.0 * table.bounding_radius();
  ray.set_node_spacing(step / 4.0);

  auto phi_at = [&](double t) { return table.phi(ray.state(t).position); };

  double lo = t_min;
  if (!(phi_at(lo) < 0.0))
    throw Error(ErrorCode::GrazingDeparture, "ray does not enter the table");
  double hi = lo;
  bool crossed = false;
  while (hi < t_max) {
    hi = std::min(lo + step, t_max);
    if (phi_at(hi) >= 0.0) {
      crossed = true;
      break;
    }
    lo = hi;
  }
  if (!crossed) throw Error(ErrorCode::NoExit, "no boundary crossing within 8 bounding radii");

  for (int it = 0; it < 200 && hi - lo > 1e-13 * scale; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi_at(mid) < 0.0 ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  PhaseState s = ray.state(t);
  double value = table.phi(s.position);
  for (int it = 0; it < 8 && std::abs(value) > 1e-15 * std::max(1.0, scale); ++it) {
    const double rate = table.gradient(s.position)(s.velocity) *
                        (ray.kind() == GeodesicKind::arc ? 1.0 / s.velocity.norm() : 1.0);
    if (!(std::abs(rate) > 0.0)) break;
    const double next_t = t - value / rate;
    if (!(next_t > t_min)) break;
    const PhaseState next = ray.state(next_t);
    const double next_value = table.phi(next.position);
    if (std::abs(next_value) >= std::abs(value)) break;
    t = next_t;
    s = next;
    value = next_value;
  }
  // RK4 states carry finite-difference jitter near 1e-11, so integrated rays
  // settle for the boundary-point tolerance.
  const double polish_tol = ray.kind() == GeodesicKind::integrated ? table.boundary_tolerance() : 1e-12 * scale;
  if (!(std::abs(value) <= polish_tol))
    throw Error(ErrorCode::NoConvergence, "boundary intersection polish failed");

  BoundaryHit hit;
  hit.point = BoundaryPoint{s.position, unit_normal(table, s.position)};
  hit.segment.start = y.position;
  hit.segment.end = s.position;
  hit.segment.start_tangent = ray.state(0.0).velocity;
  hit.segment.end_tangent = s.velocity;
  hit.segment.length = ray.length(t);
  hit.segment.kind = ray.kind();
  return hit;
}

/// First boundary point reached by the geodesic leaving y in direction v.
inline BoundaryPoint intersect_forward(const FinslerMetric& metric, const ConvexTable& table,
                                       const BoundaryPoint& y, const Vector& v) {
  return advance_to_boundary(metric, table, y, v).point;
}

}  // namespace finsler

#endif
