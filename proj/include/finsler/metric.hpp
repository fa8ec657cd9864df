#ifndef FINSLER_METRIC_HPP
#define FINSLER_METRIC_HPP

// Finsler metrics on flat R^d: Lagrangian, fiber derivative, indicatrix
// normalization, Legendre transform and its inverse.

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "finsler/errors.hpp"
#include "finsler/geom.hpp"

namespace finsler {

/// Point-dependent, positively 1-homogeneous Lagrangian L(x, v).
///
/// Built-ins:
///   euclidean   L = |v|
///   riemannian  L = sqrt(v^T G v), G constant positive definite
///   minkowski   L = |v| + alpha(v), alpha a constant covector, |alpha| < 1
///   magnetic    L = |v| + alpha(x)(v) in the plane, alpha = (B/2)(x dy - y dx)
///   custom      user Lagrangian, fiber derivative optional
///
/// minkowski and magnetic share the Randers form |v| + alpha(x)(v), for which
/// the dual norm and its maximizer have closed forms.
class FinslerMetric {
 public:
  enum class Kind { euclidean, riemannian, minkowski, magnetic, custom };

  using LagrangianFn = std::function<double(const Vector&, const Vector&)>;
  using FiberFn = std::function<Covector(const Vector&, const Vector&)>;

  static FinslerMetric euclidean(int dim) {
    check_dim(dim);
    FinslerMetric m(Kind::euclidean, dim);
    return m;
  }

  static FinslerMetric riemannian(const Eigen::MatrixXd& tensor) {
    const int dim = static_cast<int>(tensor.rows());
    check_dim(dim);
    if (tensor.cols() != dim || !tensor.allFinite())
      throw Error(ErrorCode::InvalidParameters, "metric tensor must be square and finite");
    if ((tensor - tensor.transpose()).cwiseAbs().maxCoeff() > 1e-12 * tensor.cwiseAbs().maxCoeff())
      throw Error(ErrorCode::InvalidParameters, "metric tensor must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(tensor);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorCode::InvalidParameters, "metric tensor must be positive definite");
    FinslerMetric m(Kind::riemannian, dim);
    m.tensor_ = tensor;
    m.inverse_ = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
    return m;
  }

  static FinslerMetric minkowski(const Covector& alpha) {
    check_dim(alpha.dim());
    if (!alpha.finite()) throw Error(ErrorCode::InvalidParameters, "alpha must be finite");
    if (!(alpha.norm() < 1.0))
      throw Error(ErrorCode::FieldTooStrong, "constant one-form must satisfy |alpha| < 1");
    FinslerMetric m(Kind::minkowski, alpha.dim());
    m.alpha_ = alpha;
    return m;
  }

  /// Planar constant magnetic field of strength `field`; Larmor radius 1/|field|.
  static FinslerMetric magnetic(double field) {
    if (!std::isfinite(field)) throw Error(ErrorCode::InvalidParameters, "field must be finite");
    FinslerMetric m(Kind::magnetic, 2);
    m.field_ = field;
    return m;
  }

  static FinslerMetric custom(int dim, LagrangianFn lagrangian, std::optional<FiberFn> fiber,
                              bool flat_geodesics, bool reversible) {
    check_dim(dim);
    if (!lagrangian) throw Error(ErrorCode::InvalidParameters, "custom metric needs a Lagrangian");
    FinslerMetric m(Kind::custom, dim);
    m.lagrangian_ = std::move(lagrangian);
    if (fiber && *fiber) m.fiber_ = std::move(*fiber);
    m.flat_ = flat_geodesics;
    m.reversible_ = reversible;
    return m;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Eigen::MatrixXd& tensor() const { return tensor_; }
  const Eigen::MatrixXd& inverse_tensor() const { return inverse_; }
  double field() const { return field_; }
  const Covector& constant_alpha() const { return alpha_; }

  bool is_randers() const { return kind_ == Kind::minkowski || kind_ == Kind::magnetic; }

  /// Geodesics are straight lines.
  bool flat_geodesics() const {
    switch (kind_) {
      case Kind::magnetic: return field_ == 0.0;
      case Kind::custom: return flat_;
      default: return true;
    }
  }

  /// L(x, -v) = L(x, v) everywhere.
  bool reversible() const {
    switch (kind_) {
      case Kind::minkowski: return alpha_.norm() == 0.0;
      case Kind::magnetic: return field_ == 0.0;
      case Kind::custom: return reversible_;
      default: return true;
    }
  }

  /// One-form of the Randers form |v| + alpha(x)(v).
  Covector alpha(const Vector& x) const {
    if (kind_ == Kind::minkowski) return alpha_;
    if (kind_ == Kind::magnetic) return Covector{-0.5 * field_ * x[1], 0.5 * field_ * x[0]};
    return Covector::zero(dim_);
  }

  double lagrangian(const Vector& x, const Vector& v) const {
    switch (kind_) {
      case Kind::euclidean: return v.norm();
      case Kind::riemannian: return std::sqrt(v.coeffs().dot(tensor_ * v.coeffs()));
      case Kind::minkowski:
      case Kind::magnetic: return v.norm() + alpha(x)(v);
      case Kind::custom: return lagrangian_(x, v);
    }
    return 0.0;
  }

  /// dL/dv at (x, v), v != 0.
  Covector fiber_derivative(const Vector& x, const Vector& v) const {
    switch (kind_) {
      case Kind::euclidean: return flat(v / v.norm());
      case Kind::riemannian: {
        Eigen::VectorXd gv = tensor_ * v.coeffs();
        return Covector(gv / std::sqrt(v.coeffs().dot(gv)));
      }
      case Kind::minkowski:
      case Kind::magnetic: return flat(v / v.norm()) + alpha(x);
      case Kind::custom:
        if (fiber_) return fiber_(x, v);
        return fiber_derivative_fd(x, v);
    }
    return Covector::zero(dim_);
  }

  /// Central differences of L in v, step 1e-6 |v|.
  Covector fiber_derivative_fd(const Vector& x, const Vector& v) const {
    const double h = 1e-6 * v.norm();
    Covector out = Covector::zero(dim_);
    for (int i = 0; i < dim_; ++i) {
      Vector e = Vector::axis(dim_, i) * h;
      out[i] = (lagrangian(x, v + e) - lagrangian(x, v - e)) / (2.0 * h);
    }
    return out;
  }

 private:
  FinslerMetric(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  static void check_dim(int dim) {
    if (dim < 2) throw Error(ErrorCode::InvalidParameters, "metric dimension must be >= 2");
  }

  Kind kind_;
  int dim_;
  Eigen::MatrixXd tensor_;
  Eigen::MatrixXd inverse_;
  Covector alpha_;
  double field_ = 0.0;
  LagrangianFn lagrangian_;
  FiberFn fiber_;
  bool flat_ = true;
  bool reversible_ = true;
};

inline std::string_view to_string(FinslerMetric::Kind kind) {
  switch (kind) {
    case FinslerMetric::Kind::euclidean: return "euclidean";
    case FinslerMetric::Kind::riemannian: return "riemannian";
    case FinslerMetric::Kind::minkowski: return "minkowski";
    case FinslerMetric::Kind::magnetic: return "magnetic";
    case FinslerMetric::Kind::custom: return "custom";
  }
  return "unknown";
}

/// v / L(x, v): the indicatrix point in the direction of v.
inline Vector unit_vector(const FinslerMetric& metric, const Vector& x, const Vector& v) {
  if (!(v.norm() > 0.0)) throw Error(ErrorCode::ZeroVector, "cannot normalize the zero vector");
  Vector u = v / metric.lagrangian(x, v);
  return u / metric.lagrangian(x, u);
}

/// Legendre transform of an indicatrix point: the covector D_u with
/// D_u(u) = 1 whose kernel is tangent to the indicatrix at u.
inline Covector legendre(const FinslerMetric& metric, const Vector& x, const Vector& u) {
  const double len = metric.lagrangian(x, u);
  if (!(std::abs(len - 1.0) <= 1e-9))
    throw Error(ErrorCode::NotOnIndicatrix, "L(x,u) = " + std::to_string(len));
  return metric.fiber_derivative(x, u);
}

struct IndicatrixSup {
  double value;
  Vector argmax;  // on the indicatrix
};

/// sup{ q(v) : L(x,v) = 1 } by maximizing q(w)/L(x,w) over the Euclidean unit
/// sphere: Newton in a tangent chart with gradient-ascent fallback, 8
/// deterministic starts. Works for any metric; built-ins use closed forms.
inline IndicatrixSup indicatrix_sup_numeric(const FinslerMetric& metric, const Vector& x,
                                            const Covector& q) {
  const int dim = metric.dim();
  const double qn = q.norm();
  if (!q.finite()) throw Error(ErrorCode::InvalidParameters, "covector must be finite");
  if (qn == 0.0) return {0.0, Vector::zero(dim)};

  auto ratio = [&](const Vector& w) { return q(w) / metric.lagrangian(x, w); };
  // Euclidean gradient of q(w)/L(w) is (q - h D_w) / L(w).
  auto chart_gradient = [&](const Vector& w, const std::vector<Vector>& basis) {
    const double len = metric.lagrangian(x, w);
    const Covector g = (q - (q(w) / len) * metric.fiber_derivative(x, w)) / len;
    Eigen::VectorXd out(dim - 1);
    for (int k = 0; k < dim - 1; ++k) out[k] = g(basis[k]);
    return out;
  };
  auto retract = [](const Vector& w, const std::vector<Vector>& basis, const Eigen::VectorXd& xi) {
    Vector p = w;
    for (std::size_t k = 0; k < basis.size(); ++k) p += xi[static_cast<Eigen::Index>(k)] * basis[k];
    return p / p.norm();
  };

  std::vector<Vector> starts;
  starts.push_back(sharp(q) / qn);
  starts.push_back(-sharp(q) / qn);
  for (int i = 0; i < dim && starts.size() < 6; ++i) {
    starts.push_back(Vector::axis(dim, i));
    starts.push_back(-Vector::axis(dim, i));
  }
  Vector diag = Vector::zero(dim), alt = Vector::zero(dim);
  for (int i = 0; i < dim; ++i) {
    diag[i] = 1.0;
    alt[i] = (i % 2 == 0) ? 1.0 : -1.0;
  }
  starts.push_back(diag / diag.norm());
  starts.push_back(alt / alt.norm());
  starts.resize(8, diag / diag.norm());

  // The gradient of a finite-difference fiber derivative bottoms out near
  // 1e-10 |q|; the sup value error is quadratic in it, so a loose final
  // acceptance is enough once Newton stagnates.
  const double gtol = 1e-13 * qn;
  const double accept_tol = 1e-7 * qn;
  std::optional<IndicatrixSup> best;
  for (const Vector& start : starts) {
    Vector w = start;
    double value = ratio(w);
    for (int it = 0; it < 100; ++it) {
      const std::vector<Vector> basis = tangent_basis(BoundaryPoint{w, w});
      const Eigen::VectorXd g = chart_gradient(w, basis);
      if (g.norm() <= gtol) break;
      // Chart Hessian by central differences of the chart gradient.
      const double h = 1e-6;
      Eigen::MatrixXd hess(dim - 1, dim - 1);
      for (int j = 0; j < dim - 1; ++j) {
        Eigen::VectorXd xi = Eigen::VectorXd::Zero(dim - 1);
        xi[j] = h;
        const Vector wp = retract(w, basis, xi), wm = retract(w, basis, -xi);
        // Transport: evaluate both gradients against the base chart directions.
        const double lp = metric.lagrangian(x, wp), lm = metric.lagrangian(x, wm);
        const Covector gp = (q - (q(wp) / lp) * metric.fiber_derivative(x, wp)) / lp;
        const Covector gm = (q - (q(wm) / lm) * metric.fiber_derivative(x, wm)) / lm;
        for (int k = 0; k < dim - 1; ++k) {
          // derivative of the normalization map contributes -(w . e_k) terms
          const Vector dp = basis[k] - dot(basis[k], wp) * wp;
          const Vector dm = basis[k] - dot(basis[k], wm) * wm;
          hess(k, j) = (gp(dp) - gm(dm)) / (2.0 * h);
        }
      }
      hess = 0.5 * (hess + hess.transpose()).eval();

      Eigen::VectorXd step;
      Eigen::LLT<Eigen::MatrixXd> llt(-hess);
      if (llt.info() == Eigen::Success) step = llt.solve(g);
      else step = g / std::max(1.0, qn);
      if (step.norm() > 0.5) step *= 0.5 / step.norm();

      bool improved = false;
      for (int bt = 0; bt < 40; ++bt) {
        const Vector trial = retract(w, basis, step);
        const double trial_value = ratio(trial);
        if (trial_value >= value - 1e-15 * qn) {
          w = trial;
          value = trial_value;
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved || step.norm() < 1e-15) break;
    }
    if (!(chart_gradient(w, tangent_basis(BoundaryPoint{w, w})).norm() <= accept_tol)) continue;
    if (!best || value > best->value) best = IndicatrixSup{value, w / metric.lagrangian(x, w)};
  }
  if (!best) throw Error(ErrorCode::NoConvergence, "indicatrix maximization failed");
  return *best;
}

/// sup of q over the indicatrix at x. dual_norm(q) = 1 characterizes the figuratrix.
inline double dual_norm(const FinslerMetric& metric, const Vector& x, const Covector& q) {
  if (!q.finite()) throw Error(ErrorCode::InvalidParameters, "covector must be finite");
  switch (metric.kind()) {
    case FinslerMetric::Kind::euclidean: return q.norm();
    case FinslerMetric::Kind::riemannian:
      return std::sqrt(q.coeffs().dot(metric.inverse_tensor() * q.coeffs()));
    case FinslerMetric::Kind::minkowski:
    case FinslerMetric::Kind::magnetic: {
      // Figuratrix is alpha + unit sphere: solve |q/s - alpha| = 1 for s > 0.
      const Covector a = metric.alpha(x);
      const double qa = q.coeffs().dot(a.coeffs());
      const double a2 = a.coeffs().squaredNorm();
      const double q2 = q.coeffs().squaredNorm();
      const double disc = std::sqrt(qa * qa + (1.0 - a2) * q2);
      // Rationalized root avoids cancellation when qa > 0.
      if (qa > 0.0) return q2 / (qa + disc);
      return (disc - qa) / (1.0 - a2);
    }
    case FinslerMetric::Kind::custom: return indicatrix_sup_numeric(metric, x, q).value;
  }
  return 0.0;
}

/// Inverse Legendre transform: the indicatrix point maximizing q, for q on the figuratrix.
inline Vector legendre_dual(const FinslerMetric& metric, const Vector& x, const Covector& q) {
  const double norm = dual_norm(metric, x, q);
  if (!(std::abs(norm - 1.0) <= 1e-9))
    throw Error(ErrorCode::NotOnFiguratrix, "dual norm = " + std::to_string(norm));
  const Covector qn = q / norm;
  switch (metric.kind()) {
    case FinslerMetric::Kind::euclidean: return sharp(qn) / qn.norm();
    case FinslerMetric::Kind::riemannian: return Vector(metric.inverse_tensor() * qn.coeffs());
    case FinslerMetric::Kind::minkowski:
    case FinslerMetric::Kind::magnetic: {
      Vector w = sharp(qn - metric.alpha(x));
      w /= w.norm();
      return w / metric.lagrangian(x, w);
    }
    case FinslerMetric::Kind::custom: return indicatrix_sup_numeric(metric, x, qn).argmax;
  }
  return Vector::zero(metric.dim());
}

/// Indicatrix of |v| + t v_1 = 1: ellipse ((v_1 + c)/a)^2 + (v_2/b)^2 = 1
/// (revolved about the v_1 axis in higher dimension), focus at the origin.
struct IndicatrixEllipse {
  double a;  // semi-major
  double b;  // semi-minor
  double c;  // center offset along -e_1
};

inline IndicatrixEllipse magnetic_indicatrix_params(double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidParameters, "field strength must be >= 0");
  if (!(t < 1.0)) throw Error(ErrorCode::FieldTooStrong, "need |alpha| < 1");
  const double s = 1.0 - t * t;
  return {1.0 / s, 1.0 / std::sqrt(s), t / s};
}

/// Sup of the Euclidean norm of alpha over `samples` uniform points in the table.
template <class Rng>
double field_strength_bound(const FinslerMetric& metric, const ConvexTable& table, int samples,
                            Rng& rng) {
  if (!metric.is_randers()) return 0.0;
  const double radius = table.bounding_radius();
  std::uniform_real_distribution<double> coord(-radius, radius);
  double sup = 0.0;
  int accepted = 0;
  Vector x = Vector::zero(table.dim());
  while (accepted < samples) {
    for (int i = 0; i < table.dim(); ++i) x[i] = table.center()[i] + coord(rng);
    if (!table.inside(x)) continue;
    ++accepted;
    sup = std::max(sup, metric.alpha(x).norm());
  }
  return sup;
}

/// Throws FieldTooStrong unless |alpha| < 1 on 10^4 sampled table points.
inline double validate_field_strength(const FinslerMetric& metric, const ConvexTable& table) {
  std::mt19937_64 rng(0x5eedULL);
  const double sup = field_strength_bound(metric, table, 10000, rng);
  if (!(sup < 1.0))
    throw Error(ErrorCode::FieldTooStrong, "sup |alpha| = " + std::to_string(sup) + " >= 1");
  return sup;
}

/// Unit covector (dual norm 1) annihilating T_yM, positive on outward vectors.
inline Covector conormal(const ConvexTable& table, const BoundaryPoint& y,
                         const FinslerMetric& metric) {
  (void)table;
  const Covector n = flat(y.outward_normal);
  return n / dual_norm(metric, y.position, n);
}

}  // namespace finsler

#endif
