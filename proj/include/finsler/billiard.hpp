#ifndef FINSLER_BILLIARD_HPP
#define FINSLER_BILLIARD_HPP

#include <cmath>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/geom.hpp"
#include "finsler/metric.hpp"

namespace finsler {

struct BoundaryState {
  BoundaryPoint point;
  Vector direction;  // indicatrix point at point.position
};

struct Reflection {
  Vector outgoing;
  double t = 0.0;  // D_u - D_v = t p
};

/// Finsler reflection at y of the incoming indicatrix direction u: the
/// outgoing v satisfies D_u - D_v = t p with t > 0 and p the conormal.
/// t is the positive root of dual_norm(D_u - t p) - 1, which is convex in t
/// and vanishes at t = 0.
inline Reflection reflect_detail(const FinslerMetric& metric, const ConvexTable& table,
                                 const BoundaryPoint& y, const Vector& u) {
  const Vector& x = y.position;
  const Covector p = conormal(table, y, metric);
  const double pu = p(u);
  if (!(pu > 1e-8)) throw Error(ErrorCode::GrazingRay, "incoming direction is not inbound");
  const Covector du = legendre(metric, x, u);

  auto excess = [&](double t) { return dual_norm(metric, x, du - t * p) - 1.0; };

  double lo = 0.0;
  double hi = std::min(1e-6, 1e-3 * pu);
  const double cap = 1e3;
  while (!(excess(hi) > 0.0)) {
    lo = hi;
    hi *= 2.0;
    if (hi > cap) throw Error(ErrorCode::NoConvergence, "reflection root not bracketed");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? hi : lo) = mid;
  }
  double t = 0.5 * (lo + hi);
  double value = excess(t);
  // Newton polish; d/dt dual_norm(q - t p) = -p(argmax).
  for (int it = 0; it < 4 && std::abs(value) > 1e-16; ++it) {
    const Covector q = du - t * p;
    const Vector v = legendre_dual(metric, x, q / (1.0 + value));
    const double slope = -p(v);
    if (!(slope > 0.0)) break;
    const double next_t = t - value / slope;
    const double next_value = excess(next_t);
    if (std::abs(next_value) >= std::abs(value)) break;
    t = next_t;
    value = next_value;
  }
  if (!(std::abs(value) <= 1e-10))
    throw Error(ErrorCode::NoConvergence, "reflection root residual too large");

  Reflection out;
  out.t = t;
  out.outgoing = legendre_dual(metric, x, du - t * p);
  if (!(p(out.outgoing) < 0.0))
    throw Error(ErrorCode::NoConvergence, "reflected direction is not inward");
  return out;
}

inline Vector reflect(const FinslerMetric& metric, const ConvexTable& table, const BoundaryPoint& y,
                      const Vector& u) {
  return reflect_detail(metric, table, y, u).outgoing;
}

struct BilliardStep {
  BoundaryState state;
  GeodesicSegment segment;
};

/// Follow the geodesic to the next boundary point and reflect there.
inline BilliardStep billiard_step_detail(const FinslerMetric& metric, const ConvexTable& table,
                                         const BoundaryState& s) {
  BoundaryHit hit = advance_to_boundary(metric, table, s.point, s.direction);
  Vector out = reflect(metric, table, hit.point, hit.segment.end_tangent);
  return {BoundaryState{std::move(hit.point), std::move(out)}, std::move(hit.segment)};
}

inline BoundaryState billiard_step(const FinslerMetric& metric, const ConvexTable& table,
                                   const BoundaryState& s) {
  return billiard_step_detail(metric, table, s).state;
}

inline std::vector<BilliardStep> trace_detail(const FinslerMetric& metric, const ConvexTable& table,
                                              const BoundaryState& s0, int n_steps) {
  if (n_steps < 1) throw Error(ErrorCode::InvalidParameters, "n_steps must be >= 1");
  std::vector<BilliardStep> out;
  out.reserve(static_cast<std::size_t>(n_steps));
  BoundaryState current = s0;
  for (int i = 0; i < n_steps; ++i) {
    try {
      out.push_back(billiard_step_detail(metric, table, current));
    } catch (const Error& e) {
      throw Error(e.code(), "trace step " + std::to_string(i) + ": " + e.detail());
    }
    current = out.back().state;
  }
  return out;
}

/// n_steps consecutive billiard_step results (the start state excluded).
inline std::vector<BoundaryState> trace(const FinslerMetric& metric, const ConvexTable& table,
                                        const BoundaryState& s0, int n_steps) {
  std::vector<BoundaryState> states;
  for (auto& step : trace_detail(metric, table, s0, n_steps)) states.push_back(std::move(step.state));
  return states;
}

}  // namespace finsler

#endif
