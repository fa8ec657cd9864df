#ifndef FINSLER_GEOM_HPP
#define FINSLER_GEOM_HPP

// Dimension-generic tangent/cotangent coordinates and implicitly defined
// convex billiard tables.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <initializer_list>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/errors.hpp"

namespace finsler {

struct TangentTag {};
struct CotangentTag {};

/// Coordinate array tagged with the space it lives in. Vectors and covectors
/// share the layout but never mix: the only bridge is the pairing
/// Covector(Vector) and the explicit Euclidean index maps below.
template <class Tag>
class Tensor1 {
 public:
  Tensor1() = default;
  explicit Tensor1(Eigen::VectorXd c) : c_(std::move(c)) {}
  Tensor1(std::initializer_list<double> values) : c_(static_cast<Eigen::Index>(values.size())) {
    Eigen::Index i = 0;
    for (double v : values) c_[i++] = v;
  }

  static Tensor1 zero(int dim) { return Tensor1(Eigen::VectorXd::Zero(dim)); }
  static Tensor1 axis(int dim, int i) {
    Tensor1 e = zero(dim);
    e.c_[i] = 1.0;
    return e;
  }

  int dim() const { return static_cast<int>(c_.size()); }
  double operator[](int i) const { return c_[i]; }
  double& operator[](int i) { return c_[i]; }
  const Eigen::VectorXd& coeffs() const { return c_; }
  Eigen::VectorXd& coeffs() { return c_; }

  /// Euclidean coordinate norm (metric-free).
  double norm() const { return c_.norm(); }
  bool finite() const { return c_.allFinite(); }

  /// Pairing of a covector with a tangent vector.
  double operator()(const Tensor1<TangentTag>& v) const
    requires std::same_as<Tag, CotangentTag>
  {
    return c_.dot(v.coeffs());
  }

  Tensor1& operator+=(const Tensor1& o) { c_ += o.c_; return *this; }
  Tensor1& operator-=(const Tensor1& o) { c_ -= o.c_; return *this; }
  Tensor1& operator*=(double s) { c_ *= s; return *this; }
  Tensor1& operator/=(double s) { c_ /= s; return *this; }

  friend Tensor1 operator+(Tensor1 a, const Tensor1& b) { return a += b; }
  friend Tensor1 operator-(Tensor1 a, const Tensor1& b) { return a -= b; }
  friend Tensor1 operator-(Tensor1 a) { a.c_ = -a.c_; return a; }
  friend Tensor1 operator*(double s, Tensor1 a) { return a *= s; }
  friend Tensor1 operator*(Tensor1 a, double s) { return a *= s; }
  friend Tensor1 operator/(Tensor1 a, double s) { return a /= s; }

 private:
  Eigen::VectorXd c_;
};

using Vector = Tensor1<TangentTag>;
using Covector = Tensor1<CotangentTag>;

inline double dot(const Vector& a, const Vector& b) { return a.coeffs().dot(b.coeffs()); }
inline double distance(const Vector& a, const Vector& b) { return (a.coeffs() - b.coeffs()).norm(); }

/// Index lowering/raising with the flat coordinate inner product.
inline Covector flat(const Vector& v) { return Covector(v.coeffs()); }
inline Vector sharp(const Covector& p) { return Vector(p.coeffs()); }

/// Parameters of the built-in ellipsoid family
///   sum_i x_i^2 / a_i^2 - 1 + eps * sum_i c_i x_i^3 / (1 + |x|^2).
struct TableSpec {
  std::vector<double> semi_axes;
  double eps = 0.0;
  std::vector<double> coeffs;
};

/// Smooth strictly convex hypersurface {phi = 0} with interior {phi < 0}.
class ConvexTable {
 public:
  using ScalarField = std::function<double(const Vector&)>;
  using GradientField = std::function<Covector(const Vector&)>;

  ConvexTable(int dim, ScalarField phi, GradientField gradient, double bounding_radius,
              Vector center = {})
      : dim_(dim),
        phi_(std::move(phi)),
        gradient_(std::move(gradient)),
        bounding_radius_(bounding_radius),
        center_(center.dim() == 0 ? Vector::zero(dim) : std::move(center)) {
    if (dim_ < 2) throw Error(ErrorCode::InvalidParameters, "table dimension must be >= 2");
    if (!(bounding_radius_ > 0.0) || !std::isfinite(bounding_radius_))
      throw Error(ErrorCode::InvalidParameters, "bounding radius must be positive");
  }

  static ConvexTable ellipsoid(TableSpec spec) {
    const int dim = static_cast<int>(spec.semi_axes.size());
    if (dim < 2) throw Error(ErrorCode::InvalidParameters, "ellipsoid needs at least 2 semi-axes");
    for (double a : spec.semi_axes)
      if (!(a > 0.0) || !std::isfinite(a))
        throw Error(ErrorCode::InvalidParameters, "semi-axes must be positive");
    if (spec.coeffs.empty()) spec.coeffs.assign(dim, spec.eps != 0.0 ? 1.0 : 0.0);
    if (static_cast<int>(spec.coeffs.size()) != dim)
      throw Error(ErrorCode::InvalidParameters, "perturbation coeffs must match dimension");
    if (!std::isfinite(spec.eps)) throw Error(ErrorCode::InvalidParameters, "eps must be finite");

    Eigen::VectorXd inv_a2(dim), c(dim);
    for (int i = 0; i < dim; ++i) {
      inv_a2[i] = 1.0 / (spec.semi_axes[i] * spec.semi_axes[i]);
      c[i] = spec.coeffs[i];
    }
    const double eps = spec.eps;

    auto phi = [inv_a2, c, eps](const Vector& x) {
      const Eigen::VectorXd& v = x.coeffs();
      double value = (v.array().square() * inv_a2.array()).sum() - 1.0;
      if (eps != 0.0) value += eps * (c.array() * v.array().cube()).sum() / (1.0 + v.squaredNorm());
      return value;
    };
    auto grad = [inv_a2, c, eps](const Vector& x) {
      const Eigen::VectorXd& v = x.coeffs();
      Eigen::VectorXd g = 2.0 * v.cwiseProduct(inv_a2);
      if (eps != 0.0) {
        const double den = 1.0 + v.squaredNorm();
        const double cubic = (c.array() * v.array().cube()).sum();
        Eigen::VectorXd dcubic = 3.0 * c.cwiseProduct(v.cwiseProduct(v));
        g += eps * (dcubic / den - 2.0 * cubic / (den * den) * v);
      }
      return Covector(g);
    };

    // On |x| = R: phi >= R^2/a_max^2 - 1 - eps*sum|c|*R, positive past the root below.
    const double a_max = *std::max_element(spec.semi_axes.begin(), spec.semi_axes.end());
    const double pert = std::abs(eps) * c.cwiseAbs().sum();
    const double radius =
        a_max * a_max * (pert + std::sqrt(pert * pert + 4.0 / (a_max * a_max))) / 2.0;

    ConvexTable table(dim, std::move(phi), std::move(grad), radius);
    table.spec_ = std::move(spec);
    return table;
  }

  static ConvexTable sphere(int dim, double radius = 1.0) {
    return ellipsoid(TableSpec{std::vector<double>(dim, radius), 0.0, {}});
  }

  int dim() const { return dim_; }
  double phi(const Vector& x) const { return phi_(x); }
  Covector gradient(const Vector& x) const { return gradient_(x); }
  double bounding_radius() const { return bounding_radius_; }
  /// Length scale for all absolute tolerances.
  double scale() const { return bounding_radius_; }
  /// Interior reference point (origin for the built-in family).
  const Vector& center() const { return center_; }
  bool inside(const Vector& x) const { return phi(x) < 0.0; }
  /// Built-in parameters, empty semi_axes for user-defined tables.
  const TableSpec& spec() const { return spec_; }

  double boundary_tolerance() const { return 1e-10 * scale(); }

 private:
  int dim_;
  ScalarField phi_;
  GradientField gradient_;
  double bounding_radius_;
  Vector center_;
  TableSpec spec_;
};

struct BoundaryPoint {
  Vector position;
  /// Euclidean-unit outward normal.
  Vector outward_normal;
};

inline Vector unit_normal(const ConvexTable& table, const Vector& x) {
  Vector n = sharp(table.gradient(x));
  const double len = n.norm();
  if (!(len > 0.0) || !std::isfinite(len))
    throw Error(ErrorCode::NoConvergence, "vanishing table gradient");
  return n / len;
}

/// Wraps a position already on the boundary; throws if it is not.
inline BoundaryPoint boundary_point(const ConvexTable& table, const Vector& x) {
  if (x.dim() != table.dim()) throw Error(ErrorCode::InvalidParameters, "dimension mismatch");
  if (!(std::abs(table.phi(x)) <= table.boundary_tolerance()))
    throw Error(ErrorCode::InvalidParameters, "point is not on the table boundary");
  return BoundaryPoint{x, unit_normal(table, x)};
}

/// Newton iteration x <- x - phi(x) grad/|grad|^2 with the step length capped.
inline BoundaryPoint project_to_boundary(const ConvexTable& table, const Vector& x0) {
  if (x0.dim() != table.dim()) throw Error(ErrorCode::InvalidParameters, "dimension mismatch");
  if (!x0.finite()) throw Error(ErrorCode::InvalidParameters, "non-finite point");
  if (distance(x0, table.center()) > 2.0 * table.bounding_radius())
    throw Error(ErrorCode::InvalidParameters, "point too far from the table");

  const double max_step = 0.5 * table.scale();
  Vector x = x0;
  double value = table.phi(x);
  for (int it = 0; it < 100; ++it) {
    if (std::abs(value) <= 1e-15 * std::max(1.0, table.scale())) break;
    const Vector g = sharp(table.gradient(x));
    const double g2 = dot(g, g);
    if (!(g2 > 0.0)) throw Error(ErrorCode::NoConvergence, "vanishing gradient in projection");
    Vector step = (value / g2) * g;
    const double len = step.norm();
    if (len > max_step) step *= max_step / len;
    Vector next = x - step;
    const double next_value = table.phi(next);
    if (std::abs(next_value) >= std::abs(value) && len < 1e-15 * table.scale()) break;
    x = std::move(next);
    value = next_value;
  }
  if (!(std::abs(value) <= table.boundary_tolerance()))
    throw Error(ErrorCode::NoConvergence, "projection did not reach the boundary");
  return BoundaryPoint{x, unit_normal(table, x)};
}

/// Euclidean-orthonormal basis of T_yM. Gram-Schmidt over the coordinate axes,
/// skipping the axis of the largest normal component.
inline std::vector<Vector> tangent_basis(const BoundaryPoint& y) {
  const Vector& n = y.outward_normal;
  const int dim = n.dim();
  int pivot = 0;
  for (int i = 1; i < dim; ++i)
    if (std::abs(n[i]) > std::abs(n[pivot])) pivot = i;

  std::vector<Vector> basis;
  basis.reserve(dim - 1);
  for (int i = 0; i < dim; ++i) {
    if (i == pivot) continue;
    Vector e = Vector::axis(dim, i);
    e -= dot(e, n) * n;
    for (const Vector& b : basis) e -= dot(e, b) * b;
    // Second pass keeps orthogonality at round-off level.
    e -= dot(e, n) * n;
    for (const Vector& b : basis) e -= dot(e, b) * b;
    basis.push_back(e / e.norm());
  }
  return basis;
}

/// Boundary point base + offset + s*n with n the base normal, s solved by a
/// damped 1-D Newton iteration. Graph chart over the tangent plane at base.
inline Vector lift_along_normal(const ConvexTable& table, const BoundaryPoint& base,
                                const Vector& offset) {
  const Vector& n = base.outward_normal;
  const Vector start = base.position + offset;
  const double max_step = 0.25 * table.scale();
  double s = 0.0;
  Vector x = start;
  double value = table.phi(x);
  for (int it = 0; it < 60; ++it) {
    if (std::abs(value) <= 1e-15 * std::max(1.0, table.scale())) break;
    const double slope = table.gradient(x)(n);
    if (!(slope > 1e-12)) throw Error(ErrorCode::NoConvergence, "chart lift left the graph region");
    double ds = -value / slope;
    if (std::abs(ds) > max_step) ds = std::copysign(max_step, ds);
    s += ds;
    Vector next = start + s * n;
    const double next_value = table.phi(next);
    if (std::abs(next_value) >= std::abs(value) && std::abs(ds) < 1e-15 * table.scale()) break;
    x = std::move(next);
    value = next_value;
  }
  if (!(std::abs(value) <= table.boundary_tolerance()) || std::abs(s) > table.scale())
    throw Error(ErrorCode::NoConvergence, "chart lift did not converge");
  return x;
}

/// Boundary crossing of the ray origin + s*dir, origin strictly inside.
inline BoundaryPoint boundary_along_ray(const ConvexTable& table, const Vector& origin,
                                        const Vector& dir) {
  const Vector u = dir / dir.norm();
  double lo = 0.0;
  double hi = 2.0 * table.bounding_radius() + distance(origin, table.center());
  if (!(table.phi(origin) < 0.0)) throw Error(ErrorCode::InvalidParameters, "ray origin not inside");
  for (int it = 0; it < 200 && hi - lo > 1e-15 * table.scale(); ++it) {
    const double mid = 0.5 * (lo + hi);
    (table.phi(origin + mid * u) < 0.0 ? lo : hi) = mid;
  }
  return project_to_boundary(table, origin + (0.5 * (lo + hi)) * u);
}

template <class Rng>
BoundaryPoint random_boundary_point(const ConvexTable& table, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector dir = Vector::zero(table.dim());
  do {
    for (int i = 0; i < table.dim(); ++i) dir[i] = normal(rng);
  } while (dir.norm() < 1e-8);
  return boundary_along_ray(table, table.center(), dir);
}

/// Largest phi over midpoints of random boundary-point pairs; <= 0 for convex tables.
template <class Rng>
double convexity_violation(const ConvexTable& table, int samples, Rng& rng) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const Vector a = random_boundary_point(table, rng).position;
    const Vector b = random_boundary_point(table, rng).position;
    worst = std::max(worst, table.phi(0.5 * (a + b)));
  }
  return worst;
}

}  // namespace finsler

#endif
