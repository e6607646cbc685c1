#pragma once

/**
 * @file constants.hpp
 * @brief Special-function constants of the BV Sobolev inequality.
 *
 * The sharp Sobolev constant on R^n for p = 1 is
 *
 *     c*_n = sqrt(pi) n / Gamma(n/2 + 1)^(1/n) = n omega_n^(1/n),
 *
 * and the half-space constant is c*_n / 2^(1/n). Every Gamma value needed
 * here sits at a positive half-integer, so Gamma is evaluated exactly by
 * the recurrence Gamma(x + 1) = x Gamma(x) from Gamma(1/2) and Gamma(1).
 */

#include <bvsharp/error.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace bvsharp {

namespace detail {

// Returns 2x if x is a positive half-integer, otherwise -1.
inline long twice_half_integer(double x) {
  if (!std::isfinite(x) || x <= 0.0) return -1;
  const double twice = 2.0 * x;
  const double rounded = std::round(twice);
  if (std::abs(twice - rounded) > 1e-12 * std::max(1.0, twice)) return -1;
  return static_cast<long>(rounded);
}

}  // namespace detail

/// Gamma at a positive half-integer, computed by exact recurrence.
[[nodiscard]] inline double gamma_half_integer(double x) {
  const long k = detail::twice_half_integer(x);
  if (k < 1) {
    throw DomainError("gamma_half_integer: argument must be a positive half-integer, got " +
                      std::to_string(x));
  }
  // Walk up from the base case with the same parity as 2x.
  double value = (k % 2 == 1) ? std::sqrt(std::numbers::pi) : 1.0;
  for (long twice_arg = (k % 2 == 1) ? 1 : 2; twice_arg < k; twice_arg += 2) {
    value *= 0.5 * static_cast<double>(twice_arg);
  }
  return value;
}

/// Euler beta function B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y) at half-integers.
[[nodiscard]] inline double euler_beta(double x, double y) {
  return gamma_half_integer(x) * gamma_half_integer(y) / gamma_half_integer(x + y);
}

/// Volume of the unit ball in R^n.
[[nodiscard]] inline double unit_ball_volume(int n) {
  if (n < 1) throw DomainError("unit_ball_volume: n must be >= 1");
  return std::pow(std::numbers::pi, 0.5 * n) / gamma_half_integer(0.5 * n + 1.0);
}

/// Sharp BV Sobolev constant c*_n on R^n (isoperimetric constant).
[[nodiscard]] inline double sharp_sobolev_constant(int n) {
  if (n < 2) throw DomainError("sharp_sobolev_constant: n must be >= 2");
  return std::sqrt(std::numbers::pi) * n / std::pow(gamma_half_integer(0.5 * n + 1.0), 1.0 / n);
}

/// Sharp constant on the half-space, c*_n / 2^(1/n).
[[nodiscard]] inline double half_space_constant(int n) {
  if (n < 2) throw DomainError("half_space_constant: n must be >= 2");
  return sharp_sobolev_constant(n) * std::pow(2.0, -1.0 / n);
}

/// The constants for one dimension, bundled.
struct SharpConstants {
  int dimension = 2;
  double c_star = 0.0;
  double c_half = 0.0;
  double omega_n = 0.0;
};

[[nodiscard]] inline SharpConstants sharp_constants(int n) {
  return SharpConstants{n, sharp_sobolev_constant(n), half_space_constant(n), unit_ball_volume(n)};
}

/// Hoelder conjugate exponent n/(n-1) of the BV embedding.
[[nodiscard]] inline double critical_exponent(int n) {
  return static_cast<double>(n) / static_cast<double>(n - 1);
}

}  // namespace bvsharp
