#pragma once

/**
 * @file test_functions.hpp
 * @brief Two-valued test profiles and their Rayleigh-type quotients.
 *
 * The profile u = chi_{B(a,eps) ∩ Omega} - beta chi_{Omega \ B(a,eps)} with
 *
 *     beta = (|Omega| / |Omega ∩ B(a,eps)| - 1)^(-1/q)
 *
 * satisfies the constraint  ∫ |u|^(q-1) u = 0  exactly. Its quotient
 *
 *     Q = ∫|Du| / (∫|u|^(n/(n-1)))^(1-1/n)
 *       = (1 + beta) P / (V + beta^(n/(n-1)) (|Omega| - V))^(1-1/n)
 *
 * needs only the cap volume V and the relative perimeter P, both of which
 * come from exact geometric quadrature.
 */

#include <bvsharp/constants.hpp>
#include <bvsharp/error.hpp>
#include <bvsharp/geometry.hpp>

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace bvsharp {

/// sgn(t) |t|^q, extended by 0 at t = 0.
[[nodiscard]] inline double sign_power(double t, double q) {
  if (!(q > 0.0)) throw DomainError("sign_power: q must be > 0");
  if (t == 0.0) return 0.0;
  if (q == 1.0) return t;
  const double m = std::abs(t);
  double p;
  if (q == 0.5) {
    p = std::sqrt(m);
  } else if (q == 0.25) {
    p = std::sqrt(std::sqrt(m));
  } else if (q == 1.5) {
    p = m * std::sqrt(m);
  } else if (q == 2.0) {
    p = m * m;
  } else {
    p = std::pow(m, q);
  }
  return t > 0.0 ? p : -p;
}

/// Plateau value making the two-valued profile satisfy the q-constraint.
[[nodiscard]] inline double beta_eps(double total_measure, double cap, double q) {
  if (!(q > 0.0)) throw DomainError("beta_eps: q must be > 0");
  if (!(cap > 0.0) || !(cap < total_measure))
    throw DomainError("beta_eps: cap must lie strictly between 0 and the total measure");
  return std::pow(total_measure / cap - 1.0, -1.0 / q);
}

/// A level of a finitely-valued function and the measure of its level set.
struct LevelMass {
  double level = 0.0;
  double measure = 0.0;
};

/// ∫ sgn(u)|u|^q for a finitely-valued u.
[[nodiscard]] inline double constraint_residual(std::span<const LevelMass> values, double q) {
  double sum = 0.0;
  for (const auto& v : values) sum += v.measure * sign_power(v.level, q);
  return sum;
}

namespace detail {

// Root of a strictly increasing residual on [lo, hi] with r(lo) <= 0 <= r(hi).
// TOMS 748 keeps a bracket throughout, so convergence is unconditional.
template <typename F>
double solve_monotone(F&& residual, double lo, double hi, double tol) {
  double flo = residual(lo), fhi = residual(hi);
  if (std::abs(flo) <= tol) return lo;
  if (std::abs(fhi) <= tol) return hi;
  const auto stop = [&](double a, double b) {
    return std::abs(b - a) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b));
  };
  double best = lo, best_abs = std::abs(flo);
  const auto tracked = [&](double x) {
    const double r = residual(x);
    if (std::abs(r) < best_abs) {
      best_abs = std::abs(r);
      best = x;
    }
    // Report an exact zero once the tolerance is met so the solver stops.
    return std::abs(r) <= tol ? 0.0 : r;
  };
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(tracked, lo, hi, flo, fhi, stop, iters);
  if (best_abs > tol) {
    while (std::nextafter(a, b) < b) {
      const double mid = a + 0.5 * (b - a);
      if (mid <= a || mid >= b) break;
      const double r = tracked(mid);
      if (r == 0.0) break;
      (r < 0.0 ? a : b) = mid;
    }
    tracked(a);
    tracked(b);
  }
  if (std::abs(fhi) < best_abs) best = hi;
  return best;
}

}  // namespace detail

/// The unique lambda with  sum measure * sign_power(level - lambda, q) = 0.
[[nodiscard]] inline double shift_to_constraint(std::span<const LevelMass> values, double q) {
  if (!(q > 0.0)) throw DomainError("shift_to_constraint: q must be > 0");
  if (values.empty()) throw DegenerateInputError("shift_to_constraint: no levels");
  double lo = values.front().level, hi = lo, total = 0.0;
  for (const auto& v : values) {
    if (v.measure < 0.0) throw DomainError("shift_to_constraint: negative measure");
    if (v.measure > 0.0) {
      lo = std::min(lo, v.level);
      hi = std::max(hi, v.level);
    }
    total += v.measure;
  }
  if (!(hi > lo)) throw DegenerateInputError("shift_to_constraint: all levels are equal");
  // residual(lambda) = -sum m sign_power(level - lambda); increasing in lambda.
  const auto residual = [&](double lambda) {
    double s = 0.0;
    for (const auto& v : values) s += v.measure * sign_power(v.level - lambda, q);
    return -s;
  };
  return detail::solve_monotone(residual, lo, hi, 1e-12 * total);
}

/// Shift for equally weighted samples (grid cells of equal measure).
[[nodiscard]] inline double shift_equal_weights(std::span<const double> values, double q) {
  if (!(q > 0.0)) throw DomainError("shift: q must be > 0");
  if (values.empty()) throw DegenerateInputError("shift: no values");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn, hi = *mx;
  if (!(hi > lo)) throw DegenerateInputError("shift: all values are equal");
  const double n = static_cast<double>(values.size());
  if (q == 1.0) {
    double s = 0.0;
    for (double v : values) s += v;
    return s / n;
  }
  const auto residual = [&](double lambda) {
    double s = 0.0;
    for (double v : values) s += sign_power(v - lambda, q);
    return -s;
  };
  return detail::solve_monotone(residual, lo, hi, 1e-12 * n);
}

/// Where a profile lives; the threshold it is compared against differs.
enum class ProfileContext { EuclideanDomain, Surface };

/// Numerator, denominator and gap of a Rayleigh-type quotient.
struct QuotientValue {
  double numerator = 0.0;
  double denominator = 0.0;
  double value = 0.0;
  /// c*_n / 2^(1/n) on domains, c*_n on surfaces.
  double threshold = 0.0;
  /// value - threshold; negative values are strict-inequality certificates.
  double gap = 0.0;
};

[[nodiscard]] inline QuotientValue make_quotient(double numerator, double denominator,
                                                 double threshold) {
  if (!(denominator > 0.0)) throw DegenerateInputError("quotient: zero denominator");
  const double value = numerator / denominator;
  return QuotientValue{numerator, denominator, value, threshold, value - threshold};
}

/// The test function chi_{B(a,eps)} - beta chi_{complement}, with its geometry.
struct TwoValuedProfile {
  Vec2 center{};
  double eps = 0.0;
  double q = 1.0;
  double beta = 0.0;
  int dimension = 2;
  ProfileContext context = ProfileContext::EuclideanDomain;
  /// Measure of the ball part.
  double inner_measure = 0.0;
  /// Total measure of Omega or M.
  double total_measure = 0.0;
  /// Perimeter of the ball part relative to Omega or M.
  double interface_length = 0.0;

  [[nodiscard]] double threshold() const {
    return context == ProfileContext::EuclideanDomain ? half_space_constant(dimension)
                                                      : sharp_sobolev_constant(dimension);
  }

  [[nodiscard]] std::array<LevelMass, 2> levels() const {
    return {LevelMass{1.0, inner_measure}, LevelMass{-beta, total_measure - inner_measure}};
  }

  [[nodiscard]] QuotientValue quotient() const {
    const double p = critical_exponent(dimension);
    const double numerator = (1.0 + beta) * interface_length;
    const double mass = inner_measure + std::pow(beta, p) * (total_measure - inner_measure);
    return make_quotient(numerator, std::pow(mass, 1.0 - 1.0 / dimension), threshold());
  }
};

/// Builds the two-valued profile from cap data; checks the cap is proper.
[[nodiscard]] inline TwoValuedProfile make_two_valued_profile(Vec2 center, double eps, double q,
                                                              int n, ProfileContext context,
                                                              double inner, double total,
                                                              double interface_length) {
  if (!(q > 0.0) || !(q < critical_exponent(n)))
    throw DomainError("two-valued profile: q must lie in (0, n/(n-1))");
  TwoValuedProfile prof;
  prof.center = center;
  prof.eps = eps;
  prof.q = q;
  prof.dimension = n;
  prof.context = context;
  prof.inner_measure = inner;
  prof.total_measure = total;
  prof.interface_length = interface_length;
  prof.beta = beta_eps(total, inner, q);
  return prof;
}

/// Two-valued profile centered at a boundary point of a planar domain.
[[nodiscard]] inline TwoValuedProfile domain_profile(const GridDomain& domain, Vec2 a, double eps,
                                                     double q) {
  if (!(eps > 0.0)) throw DomainError("domain_profile: eps must be > 0");
  const CapGeometry cap = cap_geometry(domain.curve(), a, eps);
  return make_two_valued_profile(a, eps, q, 2, ProfileContext::EuclideanDomain, cap.area,
                                 domain.exact_measure(), cap.arc);
}

/// Quotient of the boundary-cap profile from exact quadrature.
[[nodiscard]] inline QuotientValue two_valued_quotient_exact(const GridDomain& domain, Vec2 a,
                                                             double eps, double q) {
  return domain_profile(domain, a, eps, q).quotient();
}

/// Quotient of the two-level function {1 on the cap, -beta elsewhere} after
/// re-shifting it to satisfy the constraint for exponent q. The shift
/// preserves total variation and, when the profile was balanced for
/// q = 1/(n-1), can only increase the L^(n/(n-1)) norm.
[[nodiscard]] inline QuotientValue shifted_profile_quotient(const TwoValuedProfile& prof, double q) {
  const auto lv = prof.levels();
  const double lambda = shift_to_constraint(lv, q);
  const double p = critical_exponent(prof.dimension);
  double mass = 0.0;
  for (const auto& l : lv) mass += l.measure * std::pow(std::abs(l.level - lambda), p);
  const double numerator = (1.0 + prof.beta) * prof.interface_length;
  return make_quotient(numerator, std::pow(mass, 1.0 - 1.0 / prof.dimension), prof.threshold());
}

/// c*_n/2^(1/n) (1 - 2 H eps / ((n+1) B(1/2, (n-1)/2))).
[[nodiscard]] inline double domain_quotient_expansion(double H, double eps, int n) {
  if (!(eps > 0.0)) throw DomainError("domain_quotient_expansion: eps must be > 0");
  return half_space_constant(n) * (1.0 - 2.0 * H * eps / ((n + 1) * euler_beta(0.5, 0.5 * (n - 1))));
}

/// c*_n (1 - S eps^2 / (2n(n+2))), valid below the critical exponent.
[[nodiscard]] inline double surface_quotient_expansion(double S, double eps, int n) {
  if (!(eps > 0.0)) throw DomainError("surface_quotient_expansion: eps must be > 0");
  return sharp_sobolev_constant(n) * (1.0 - S * eps * eps / (2.0 * n * (n + 2)));
}

/// Exponent q = n^2/(n^2 + n - 2) at which beta's back-reaction enters at order eps^2.
[[nodiscard]] inline double critical_surface_exponent(int n) {
  return static_cast<double>(n * n) / static_cast<double>(n * n + n - 2);
}

/// Expansion at the critical exponent, including the beta back-reaction:
/// c*_n (1 + ((n-1)/n) (omega_n / |M|)^(2/n) eps^2 - S eps^2 / (2n(n+2))).
/// For n = 2 the eps^2 coefficient vanishes exactly at S = 8 pi / |M|.
[[nodiscard]] inline double critical_quotient_expansion(double S, double area, double eps, int n) {
  if (!(eps > 0.0)) throw DomainError("critical_quotient_expansion: eps must be > 0");
  if (!(area > 0.0)) throw DomainError("critical_quotient_expansion: area must be > 0");
  const double back = (static_cast<double>(n - 1) / n) * std::pow(unit_ball_volume(n) / area, 2.0 / n);
  return sharp_sobolev_constant(n) * (1.0 + back * eps * eps - S * eps * eps / (2.0 * n * (n + 2)));
}

struct EpsilonSearch {
  double eps = 0.0;
  QuotientValue quotient;
  /// Best value seen on the coarse log-spaced sweep.
  double coarse_value = 0.0;
  double coarse_eps = 0.0;
};

struct EpsRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Default sweep interval [8h, diam/4].
[[nodiscard]] inline EpsRange default_eps_range(const GridDomain& domain) {
  return {8.0 * domain.h(), 0.25 * domain.diameter()};
}

/// Coarse log-spaced sweep (16 points) followed by 40 golden-section steps on
/// the bracket around the best coarse point. Ties go to the smaller eps.
template <typename Eval>
[[nodiscard]] EpsilonSearch minimize_over_eps(Eval&& eval, EpsRange range) {
  if (!(range.lo > 0.0) || !(range.hi > range.lo))
    throw DomainError("optimal_epsilon: empty eps range");
  constexpr int kCoarse = 16;
  std::array<double, kCoarse> grid{};
  std::array<double, kCoarse> values{};
  const double ratio = std::log(range.hi / range.lo);
  int best = 0;
  for (int k = 0; k < kCoarse; ++k) {
    grid[k] = range.lo * std::exp(ratio * k / (kCoarse - 1));
    values[k] = eval(grid[k]).value;
    if (values[k] < values[best]) best = k;
  }
  EpsilonSearch out;
  out.coarse_eps = grid[best];
  out.coarse_value = values[best];

  double a = grid[std::max(0, best - 1)], b = grid[std::min(kCoarse - 1, best + 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = eval(x1).value, f2 = eval(x2).value;
  for (int it = 0; it < 40; ++it) {
    if (f1 <= f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = eval(x1).value;
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = eval(x2).value;
    }
  }
  const double refined = (f1 <= f2) ? x1 : x2;
  const QuotientValue qref = eval(refined);
  if (qref.value < out.coarse_value) {
    out.eps = refined;
    out.quotient = qref;
  } else {
    out.eps = out.coarse_eps;
    out.quotient = eval(out.coarse_eps);
  }
  return out;
}

/// Best boundary-cap radius for the two-valued profile at `a`.
[[nodiscard]] inline EpsilonSearch optimal_epsilon(const GridDomain& domain, Vec2 a, double q,
                                                   EpsRange range) {
  if (!(range.lo > 0.0) || !(range.hi > range.lo) || range.hi > domain.diameter())
    throw DomainError("optimal_epsilon: eps range must be a nonempty subinterval of (0, diam)");
  return minimize_over_eps([&](double eps) { return two_valued_quotient_exact(domain, a, eps, q); },
                           range);
}

[[nodiscard]] inline EpsilonSearch optimal_epsilon(const GridDomain& domain, Vec2 a, double q) {
  return optimal_epsilon(domain, a, q, default_eps_range(domain));
}

}  // namespace bvsharp
