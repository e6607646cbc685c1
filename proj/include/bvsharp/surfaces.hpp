#pragma once

/**
 * @file surfaces.hpp
 * @brief Closed analytic surfaces: curvature, geodesic balls, curvature
 *        thresholds and the achievability classifier.
 *
 * Scalar curvature follows the convention S = 2K (K Gaussian curvature), so
 * that Gauss-Bonnet reads  ∫_M S dmu = 4 pi chi(M).
 *
 * Geodesic balls on the spheroid are computed in geodesic polar coordinates:
 * for each initial direction psi the unit-speed geodesic is integrated in the
 * embedding together with the Jacobi equation J'' + K J = 0, J(0) = 0,
 * J'(0) = 1. Then |B(a, eps)| = ∫_0^{2pi} ∫_0^eps J d rho d psi and the
 * geodesic circle has length ∫_0^{2pi} J(eps, psi) d psi.
 */

#include <bvsharp/constants.hpp>
#include <bvsharp/error.hpp>
#include <bvsharp/test_functions.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace bvsharp {

enum class SurfaceKind { RoundSphere, Spheroid, FlatTorus };

[[nodiscard]] inline std::string to_string(SurfaceKind kind) {
  switch (kind) {
    case SurfaceKind::RoundSphere: return "sphere";
    case SurfaceKind::Spheroid: return "spheroid";
    case SurfaceKind::FlatTorus: return "torus";
  }
  return "unknown";
}

/// Parametric coordinates. Sphere and spheroid: (polar angle from the north
/// pole, azimuth). Flat torus: Cartesian coordinates in the fundamental cell.
struct SurfacePoint {
  double u = 0.0;
  double v = 0.0;
};

/// A closed 2-dimensional Riemannian model.
class SurfaceModel {
public:
  static SurfaceModel round_sphere(double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConstructionError("sphere radius must be > 0");
    SurfaceModel m;
    m.kind_ = SurfaceKind::RoundSphere;
    m.a_ = m.c_ = r;
    return m;
  }
  /// Spheroid with equatorial radius a and polar semi-axis c.
  static SurfaceModel spheroid(double a, double c) {
    if (!(a > 0.0) || !(c > 0.0) || !std::isfinite(a) || !std::isfinite(c))
      throw ConstructionError("spheroid semi-axes must be > 0");
    SurfaceModel m;
    m.kind_ = SurfaceKind::Spheroid;
    m.a_ = a;
    m.c_ = c;
    return m;
  }
  static SurfaceModel flat_torus(double l1, double l2) {
    if (!(l1 > 0.0) || !(l2 > 0.0) || !std::isfinite(l1) || !std::isfinite(l2))
      throw ConstructionError("torus side lengths must be > 0");
    SurfaceModel m;
    m.kind_ = SurfaceKind::FlatTorus;
    m.a_ = l1;
    m.c_ = l2;
    return m;
  }

  [[nodiscard]] SurfaceKind kind() const noexcept { return kind_; }
  [[nodiscard]] int dimension() const noexcept { return 2; }
  /// Sphere radius, spheroid equatorial radius, or first torus side.
  [[nodiscard]] double a() const noexcept { return a_; }
  /// Sphere radius, spheroid polar semi-axis, or second torus side.
  [[nodiscard]] double c() const noexcept { return c_; }

  [[nodiscard]] bool is_round_sphere() const noexcept {
    return kind_ == SurfaceKind::RoundSphere || (kind_ == SurfaceKind::Spheroid && a_ == c_);
  }
  [[nodiscard]] bool has_constant_curvature() const noexcept {
    return kind_ != SurfaceKind::Spheroid || a_ == c_;
  }
  [[nodiscard]] int euler_characteristic() const noexcept {
    return kind_ == SurfaceKind::FlatTorus ? 0 : 2;
  }

  /// Total area, closed form.
  [[nodiscard]] double area() const {
    constexpr double pi = std::numbers::pi;
    switch (kind_) {
      case SurfaceKind::RoundSphere: return 4.0 * pi * a_ * a_;
      case SurfaceKind::FlatTorus: return a_ * c_;
      case SurfaceKind::Spheroid: {
        if (a_ == c_) return 4.0 * pi * a_ * a_;
        if (c_ > a_) {
          const double e = std::sqrt(1.0 - (a_ * a_) / (c_ * c_));
          return 2.0 * pi * a_ * a_ * (1.0 + c_ / (a_ * e) * std::asin(e));
        }
        const double e = std::sqrt(1.0 - (c_ * c_) / (a_ * a_));
        return 2.0 * pi * a_ * a_ * (1.0 + (1.0 - e * e) / e * std::atanh(e));
      }
    }
    return 0.0;
  }

  [[nodiscard]] double gaussian_curvature(SurfacePoint p) const {
    switch (kind_) {
      case SurfaceKind::RoundSphere: return 1.0 / (a_ * a_);
      case SurfaceKind::FlatTorus: return 0.0;
      case SurfaceKind::Spheroid: {
        const double s = std::sin(p.u), c = std::cos(p.u);
        const double w = s * s / (a_ * a_) + c * c / (c_ * c_);
        return 1.0 / (a_ * a_ * a_ * a_ * c_ * c_ * w * w);
      }
    }
    return 0.0;
  }

  /// Area density in parametric coordinates.
  [[nodiscard]] double area_element(SurfacePoint p) const {
    switch (kind_) {
      case SurfaceKind::FlatTorus: return 1.0;
      default: {
        const double s = std::sin(p.u), c = std::cos(p.u);
        return a_ * s * std::sqrt(a_ * a_ * c * c + c_ * c_ * s * s);
      }
    }
  }

  /// Conservative lower bound for the injectivity radius.
  [[nodiscard]] double injectivity_radius() const noexcept {
    switch (kind_) {
      case SurfaceKind::RoundSphere: return std::numbers::pi * a_;
      case SurfaceKind::Spheroid: return 0.5 * std::numbers::pi * std::min(a_, c_);
      case SurfaceKind::FlatTorus: return 0.5 * std::min(a_, c_);
    }
    return 0.0;
  }

  /// Point of maximal scalar curvature; the north pole (or the origin) on ties.
  [[nodiscard]] SurfacePoint max_curvature_point() const noexcept {
    if (kind_ == SurfaceKind::Spheroid && c_ < a_) return {0.5 * std::numbers::pi, 0.0};
    return {0.0, 0.0};
  }

  /// Embedding of a sphere or spheroid point in R^3.
  [[nodiscard]] std::array<double, 3> embed(SurfacePoint p) const {
    return {a_ * std::sin(p.u) * std::cos(p.v), a_ * std::sin(p.u) * std::sin(p.v), c_ * std::cos(p.u)};
  }

private:
  SurfaceModel() = default;

  SurfaceKind kind_ = SurfaceKind::RoundSphere;
  double a_ = 1.0;
  double c_ = 1.0;
};

/// Scalar curvature S = 2K.
[[nodiscard]] inline double scalar_curvature(const SurfaceModel& surface, SurfacePoint p) {
  return 2.0 * surface.gaussian_curvature(p);
}

namespace detail {

struct GeodesicDisk {
  double area = 0.0;
  double perimeter = 0.0;
};

// Geodesic polar quadrature on the spheroid (a, c) centered at p.
inline GeodesicDisk spheroid_geodesic_disk(const SurfaceModel& s, SurfacePoint p, double eps) {
  using State = std::array<double, 9>;  // x(3), v(3), J, J', area
  const double a2 = s.a() * s.a(), c2 = s.c() * s.c();
  const auto rhs = [a2, c2](const State& y, State& dy, double /*rho*/) {
    const double gx = 2.0 * y[0] / a2, gy = 2.0 * y[1] / a2, gz = 2.0 * y[2] / c2;
    const double g2 = gx * gx + gy * gy + gz * gz;
    const double vhv = 2.0 * (y[3] * y[3] + y[4] * y[4]) / a2 + 2.0 * y[5] * y[5] / c2;
    const double lam = vhv / g2;
    const double w = (y[0] * y[0] + y[1] * y[1]) / (a2 * a2) + y[2] * y[2] / (c2 * c2);
    const double K = 1.0 / (a2 * a2 * c2 * w * w);
    dy[0] = y[3];
    dy[1] = y[4];
    dy[2] = y[5];
    dy[3] = -lam * gx;
    dy[4] = -lam * gy;
    dy[5] = -lam * gz;
    dy[6] = y[7];
    dy[7] = -K * y[6];
    dy[8] = y[6];
  };

  const auto x0 = s.embed(p);
  // Unit normal and an orthonormal tangent frame at the center.
  std::array<double, 3> n{2.0 * x0[0] / a2, 2.0 * x0[1] / a2, 2.0 * x0[2] / c2};
  const double nn = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  for (double& v : n) v /= nn;
  std::array<double, 3> e1 = std::abs(n[2]) < 0.9 ? std::array<double, 3>{0.0, 0.0, 1.0}
                                                  : std::array<double, 3>{1.0, 0.0, 0.0};
  const double proj = e1[0] * n[0] + e1[1] * n[1] + e1[2] * n[2];
  for (int i = 0; i < 3; ++i) e1[i] -= proj * n[i];
  const double n1 = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
  for (double& v : e1) v /= n1;
  const std::array<double, 3> e2{n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2],
                                 n[0] * e1[1] - n[1] * e1[0]};

  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<State>());
  constexpr int kDirections = 64;
  GeodesicDisk out;
  for (int k = 0; k < kDirections; ++k) {
    const double psi = std::numbers::pi * 2.0 * k / kDirections;
    const double cp = std::cos(psi), sp = std::sin(psi);
    State y{x0[0], x0[1], x0[2],
            cp * e1[0] + sp * e2[0], cp * e1[1] + sp * e2[1], cp * e1[2] + sp * e2[2],
            0.0, 1.0, 0.0};
    ode::integrate_adaptive(stepper, rhs, y, 0.0, eps, eps / 64.0);
    out.area += y[8];
    out.perimeter += y[6];
  }
  // Periodic trapezoid rule in psi.
  const double w = 2.0 * std::numbers::pi / kDirections;
  out.area *= w;
  out.perimeter *= w;
  return out;
}

inline void check_geodesic_radius(const SurfaceModel& s, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("geodesic radius must be > 0");
  if (!(eps < s.injectivity_radius()))
    throw DomainError("geodesic radius exceeds the injectivity radius bound");
}

inline GeodesicDisk geodesic_disk(const SurfaceModel& s, SurfacePoint center, double eps) {
  check_geodesic_radius(s, eps);
  constexpr double pi = std::numbers::pi;
  switch (s.kind()) {
    case SurfaceKind::RoundSphere: {
      const double r = s.a();
      const double half = std::sin(0.5 * eps / r);
      return {4.0 * pi * r * r * half * half, 2.0 * pi * r * std::sin(eps / r)};
    }
    case SurfaceKind::FlatTorus: return {pi * eps * eps, 2.0 * pi * eps};
    case SurfaceKind::Spheroid: return spheroid_geodesic_disk(s, center, eps);
  }
  return {};
}

}  // namespace detail

/// Area of the geodesic ball B(center, eps).
[[nodiscard]] inline double geodesic_ball_area(const SurfaceModel& surface, SurfacePoint center,
                                               double eps) {
  return detail::geodesic_disk(surface, center, eps).area;
}

/// Length of the geodesic circle of radius eps.
[[nodiscard]] inline double geodesic_circle_length(const SurfaceModel& surface,
                                                   SurfacePoint center, double eps) {
  return detail::geodesic_disk(surface, center, eps).perimeter;
}

/// Two-term small-ball volume expansion omega_n eps^n (1 - S eps^2 / (6(n+2))).
[[nodiscard]] inline double gray_expansion(double S, double eps, int n) {
  if (!(eps > 0.0)) throw DomainError("gray_expansion: eps must be > 0");
  return unit_ball_volume(n) * std::pow(eps, n) * (1.0 - S * eps * eps / (6.0 * (n + 2)));
}

/// Two-term expansion of the geodesic sphere area n omega_n eps^(n-1) (1 - S eps^2 / (6n)).
[[nodiscard]] inline double geodesic_sphere_expansion(double S, double eps, int n) {
  if (!(eps > 0.0)) throw DomainError("geodesic_sphere_expansion: eps must be > 0");
  return n * unit_ball_volume(n) * std::pow(eps, n - 1) * (1.0 - S * eps * eps / (6.0 * n));
}

/// Two-valued profile on a geodesic ball.
[[nodiscard]] inline TwoValuedProfile surface_profile(const SurfaceModel& surface,
                                                      SurfacePoint center, double eps, double q) {
  const auto disk = detail::geodesic_disk(surface, center, eps);
  return make_two_valued_profile(Vec2{center.u, center.v}, eps, q, surface.dimension(),
                                 ProfileContext::Surface, disk.area, surface.area(), disk.perimeter);
}

[[nodiscard]] inline QuotientValue surface_two_valued_quotient(const SurfaceModel& surface,
                                                               SurfacePoint center, double eps,
                                                               double q) {
  return surface_profile(surface, center, eps, q).quotient();
}

/// Curvature level above which the critical-exponent profile beats c*_n:
/// 2(n+2)/(n-1) (pi^(n/2) Gamma(n/2+1) / |M|)^(2/n); equals 8 pi / |M| for n = 2.
[[nodiscard]] inline double critical_curvature_threshold(int n, double area) {
  if (n < 2) throw DomainError("critical_curvature_threshold: n must be >= 2");
  if (!(area > 0.0)) throw DomainError("critical_curvature_threshold: area must be > 0");
  const double ratio = std::pow(std::numbers::pi, 0.5 * n) * gamma_half_integer(0.5 * n + 1.0) / area;
  return 2.0 * (n + 2) / (n - 1) * std::pow(ratio, 2.0 / n);
}

struct GaussBonnet {
  double integral = 0.0;
  double target = 0.0;
};

/// Numerically integrated total scalar curvature against 4 pi chi(M).
[[nodiscard]] inline GaussBonnet gauss_bonnet_check(const SurfaceModel& surface) {
  GaussBonnet out;
  out.target = 4.0 * std::numbers::pi * surface.euler_characteristic();
  if (surface.kind() == SurfaceKind::FlatTorus) {
    // S vanishes identically; integrate over the cell anyway.
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    out.integral = GK::integrate(
        [&](double x) {
          return GK::integrate([&](double y) { return scalar_curvature(surface, {x, y}); }, 0.0,
                               surface.c());
        },
        0.0, surface.a());
    return out;
  }
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  // Integrand is independent of the azimuth.
  const double polar = GK::integrate(
      [&](double u) {
        const SurfacePoint p{u, 0.0};
        return scalar_curvature(surface, p) * surface.area_element(p);
      },
      0.0, std::numbers::pi, 15, 1e-14);
  out.integral = 2.0 * std::numbers::pi * polar;
  return out;
}

/// The antipodal hemisphere function on the unit sphere and its quotient.
struct HemisphereCertificate {
  double q = 1.0;
  QuotientValue quotient;
  double constraint_residual = 0.0;
};

/// u = chi_{B(a, pi/2)} - chi_{complement} on the unit sphere: jump 2 across an
/// equator of length 2 pi, |u| = 1 on a total area of 4 pi.
[[nodiscard]] inline HemisphereCertificate hemisphere_certificate(double q) {
  if (!(q > 0.0) || !(q < 2.0)) throw DomainError("hemisphere_certificate: q must lie in (0, 2)");
  constexpr double pi = std::numbers::pi;
  const std::array<LevelMass, 2> levels{LevelMass{1.0, 2.0 * pi}, LevelMass{-1.0, 2.0 * pi}};
  HemisphereCertificate out;
  out.q = q;
  out.constraint_residual = constraint_residual(levels, q);
  const double tv = 2.0 * (2.0 * pi);
  out.quotient = make_quotient(tv, std::sqrt(4.0 * pi), sharp_sobolev_constant(2));
  return out;
}

/// Which achievability criterion fired. Serialized names follow the
/// theorem numbering used in reports.
enum class Justification {
  None,
  PositiveCurvatureHighDimension,   // "Thm4"
  PositiveCurvatureSubcritical,     // "Thm5"
  CurvatureAboveCriticalThreshold,  // "Thm6"
  EulerCharacteristicTwo,           // "Thm7"
  RoundSphere,                      // "Thm8"
};

[[nodiscard]] inline std::string to_string(Justification j) {
  switch (j) {
    case Justification::None: return "none";
    case Justification::PositiveCurvatureHighDimension: return "Thm4";
    case Justification::PositiveCurvatureSubcritical: return "Thm5";
    case Justification::CurvatureAboveCriticalThreshold: return "Thm6";
    case Justification::EulerCharacteristicTwo: return "Thm7";
    case Justification::RoundSphere: return "Thm8";
  }
  return "none";
}

enum class Verdict { Achieved, Inconclusive };

[[nodiscard]] inline std::string to_string(Verdict v) {
  return v == Verdict::Achieved ? "achieved" : "inconclusive";
}

/// Curvature data a verdict depends on. Lets the decision logic run for
/// dimensions without quadrature support.
struct ManifoldSummary {
  int dimension = 2;
  bool round_sphere = false;
  bool constant_curvature = true;
  int euler_characteristic = 0;
  double area = 0.0;
  SurfacePoint max_point{};
  double max_scalar_curvature = 0.0;
};

[[nodiscard]] inline ManifoldSummary summarize(const SurfaceModel& surface) {
  ManifoldSummary m;
  m.dimension = surface.dimension();
  m.round_sphere = surface.is_round_sphere();
  m.constant_curvature = surface.has_constant_curvature();
  m.euler_characteristic = surface.euler_characteristic();
  m.area = surface.area();
  m.max_point = surface.max_curvature_point();
  m.max_scalar_curvature = scalar_curvature(surface, m.max_point);
  return m;
}

struct AchievabilityWitness {
  SurfacePoint point{};
  double scalar_curvature = 0.0;
  /// The curvature level the witness must exceed (0 when positivity suffices;
  /// for the sphere, the constant c*_2 matched by the hemisphere function).
  double threshold = 0.0;
};

struct AchievabilityVerdict {
  Verdict verdict = Verdict::Inconclusive;
  Justification justification = Justification::None;
  AchievabilityWitness witness;
};

/// Re-evaluates the hypothesis a verdict relies on.
[[nodiscard]] inline bool witness_holds(const ManifoldSummary& m, double q,
                                        const AchievabilityVerdict& v) {
  const auto& w = v.witness;
  switch (v.justification) {
    case Justification::None: return v.verdict == Verdict::Inconclusive;
    case Justification::RoundSphere:
      return m.round_sphere && m.dimension == 2 && q > 0.0 && q < 2.0 &&
             std::abs(hemisphere_certificate(q).quotient.value - w.threshold) <= 1e-12 * w.threshold;
    case Justification::PositiveCurvatureHighDimension:
      return m.dimension >= 3 && w.scalar_curvature > 0.0;
    case Justification::EulerCharacteristicTwo:
      return m.dimension == 2 && m.euler_characteristic == 2 && !m.constant_curvature &&
             w.scalar_curvature > 8.0 * std::numbers::pi / m.area;
    case Justification::CurvatureAboveCriticalThreshold:
      return m.dimension == 2 && w.scalar_curvature > critical_curvature_threshold(2, m.area);
    case Justification::PositiveCurvatureSubcritical:
      return m.dimension == 2 && q < 1.0 && w.scalar_curvature > 0.0;
  }
  return false;
}

/// Decision tree over the achievability criteria, in priority order.
[[nodiscard]] inline AchievabilityVerdict classify_achievability(const ManifoldSummary& m,
                                                                 double q) {
  const int n = m.dimension;
  if (n < 2) throw DomainError("classify_achievability: dimension must be >= 2");
  if (!(q > 0.0) || !(q < critical_exponent(n)))
    throw DomainError("classify_achievability: q must lie in (0, n/(n-1))");

  AchievabilityVerdict v;
  const auto achieved = [&](Justification j, double threshold) {
    v.verdict = Verdict::Achieved;
    v.justification = j;
    v.witness = {m.max_point, m.max_scalar_curvature, threshold};
    return v;
  };
  const double S = m.max_scalar_curvature;
  if (n == 2 && m.round_sphere) return achieved(Justification::RoundSphere, sharp_sobolev_constant(2));
  if (n >= 3 && S > 0.0) return achieved(Justification::PositiveCurvatureHighDimension, 0.0);
  if (n == 2 && m.euler_characteristic == 2 && !m.constant_curvature) {
    return achieved(Justification::EulerCharacteristicTwo, 8.0 * std::numbers::pi / m.area);
  }
  if (n == 2) {
    const double critical = critical_curvature_threshold(2, m.area);
    if (S > critical) return achieved(Justification::CurvatureAboveCriticalThreshold, critical);
    if (q < 1.0 && S > 0.0) return achieved(Justification::PositiveCurvatureSubcritical, 0.0);
  }
  return v;
}

[[nodiscard]] inline AchievabilityVerdict classify_achievability(const SurfaceModel& surface,
                                                                 double q, int n) {
  if (n != surface.dimension())
    throw DomainError("classify_achievability: n does not match the surface dimension");
  return classify_achievability(summarize(surface), q);
}

}  // namespace bvsharp
