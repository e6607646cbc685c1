#pragma once

/**
 * @file tv_solver.hpp
 * @brief Discrete total-variation quotient on grid domains, an upper-bound
 *        search for the sharp constant, and a concentration diagnostic.
 *
 * Every iterate is kept exactly feasible: the constraint ∫ sgn(u)|u|^q = 0
 * is enforced by subtracting the unique shift lambda_q(v), and the
 * L^(n/(n-1)) norm is renormalized to one. Hence every recorded quotient is
 * the value of an admissible discrete function, i.e. an upper bound for the
 * discrete problem.
 */

#include <bvsharp/constants.hpp>
#include <bvsharp/error.hpp>
#include <bvsharp/geometry.hpp>
#include <bvsharp/test_functions.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace bvsharp {

/// Cell values on the interior cells of a GridDomain (compact ordering).
/// The domain must outlive the function.
class GridFunction {
public:
  explicit GridFunction(const GridDomain& domain)
      : domain_(&domain), values_(domain.interior_count(), 0.0) {}
  GridFunction(const GridDomain& domain, std::vector<double> values)
      : domain_(&domain), values_(std::move(values)) {
    if (values_.size() != domain.interior_count())
      throw DomainError("GridFunction: value count does not match interior cell count");
    for (double v : values_)
      if (!std::isfinite(v)) throw DomainError("GridFunction: values must be finite");
  }

  /// Point values at interior cell centers.
  template <typename F>
  static GridFunction sample(const GridDomain& domain, F&& f) {
    std::vector<double> v;
    v.reserve(domain.interior_count());
    for (std::size_t dense : domain.interior_cells()) {
      const int i = static_cast<int>(dense % static_cast<std::size_t>(domain.nx()));
      const int j = static_cast<int>(dense / static_cast<std::size_t>(domain.nx()));
      v.push_back(f(domain.cell_center(i, j)));
    }
    return GridFunction(domain, std::move(v));
  }

  [[nodiscard]] const GridDomain& domain() const noexcept { return *domain_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] double operator[](std::size_t k) const noexcept { return values_[k]; }

  void set(std::size_t k, double v) {
    values_[k] = v;
    invalidate();
  }
  /// Mutable access; cached integrals are dropped.
  [[nodiscard]] std::span<double> mutable_values() {
    invalidate();
    return values_;
  }

  [[nodiscard]] double cached_total_variation() const;
  [[nodiscard]] double cached_lp_norm_power(int n) const;

private:
  void invalidate() noexcept {
    tv_.reset();
    lp_.reset();
  }

  const GridDomain* domain_;
  std::vector<double> values_;
  mutable std::optional<double> tv_;
  mutable std::optional<std::pair<int, double>> lp_;
};

namespace detail {

// Isotropic TV from one-sided differences between interior pairs only.
inline double total_variation(const GridDomain& d, std::span<const double> w) {
  const auto& right = d.right_neighbor();
  const auto& up = d.up_neighbor();
  double sum = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double dx = right[k] >= 0 ? w[static_cast<std::size_t>(right[k])] - w[k] : 0.0;
    const double dy = up[k] >= 0 ? w[static_cast<std::size_t>(up[k])] - w[k] : 0.0;
    sum += std::sqrt(dx * dx + dy * dy);
  }
  return d.h() * sum;
}

inline double lp_norm_power(const GridDomain& d, std::span<const double> w, int n) {
  const double p = critical_exponent(n);
  double sum = 0.0;
  if (n == 2) {
    for (double v : w) sum += v * v;
  } else {
    for (double v : w) sum += std::pow(std::abs(v), p);
  }
  return std::pow(std::pow(d.h(), n) * sum, 1.0 - 1.0 / n);
}

}  // namespace detail

/// Isotropic discrete total variation; no jump is charged across ∂Omega.
[[nodiscard]] inline double total_variation(const GridFunction& u) {
  return u.cached_total_variation();
}

/// (sum h^n |u|^(n/(n-1)))^(1-1/n).
[[nodiscard]] inline double lp_norm_power(const GridFunction& u, int n = 2) {
  if (n < 2) throw DomainError("lp_norm_power: n must be >= 2");
  return u.cached_lp_norm_power(n);
}

inline double GridFunction::cached_total_variation() const {
  if (!tv_) tv_ = detail::total_variation(*domain_, values_);
  return *tv_;
}

inline double GridFunction::cached_lp_norm_power(int n) const {
  if (!lp_ || lp_->first != n) lp_ = std::make_pair(n, detail::lp_norm_power(*domain_, values_, n));
  return lp_->second;
}

/// Constraint shift lambda_q of the cell-value distribution.
[[nodiscard]] inline double constraint_shift(const GridFunction& u, double q) {
  return shift_equal_weights(u.values(), q);
}

/// ∫ sgn(u)|u|^q over the grid.
[[nodiscard]] inline double grid_constraint_residual(const GridFunction& u, double q) {
  double sum = 0.0;
  for (double v : u.values()) sum += sign_power(v, q);
  const double h = u.domain().h();
  return h * h * sum;
}

/// TV(u) / ||u - lambda_q(u)||; TV is shift invariant.
[[nodiscard]] inline double grid_quotient(const GridFunction& u, double q) {
  const double lambda = constraint_shift(u, q);
  std::vector<double> shifted(u.values().begin(), u.values().end());
  for (double& v : shifted) v -= lambda;
  const double denom = detail::lp_norm_power(u.domain(), shifted, 2);
  if (!(denom > 0.0)) throw DegenerateInputError("grid_quotient: function is constant");
  return total_variation(u) / denom;
}

/// Scaled copy with lp_norm_power = 1.
[[nodiscard]] inline GridFunction normalized(const GridFunction& u, int n = 2) {
  const double norm_value = lp_norm_power(u, n);
  if (!(norm_value > 0.0)) throw DegenerateInputError("normalized: zero function");
  std::vector<double> v(u.values().begin(), u.values().end());
  for (double& x : v) x /= norm_value;
  return GridFunction(u.domain(), std::move(v));
}

/// Default interface width, in cells, of sampled indicators.
inline constexpr double kDefaultTransitionCells = 3.0;

/// Indicator of B(center, radius) sampled with a linear ramp of
/// `transition_cells` cells across the sphere. A one-cell ramp is close to the
/// cell average; wider ramps reduce the anisotropy of the forward-difference
/// TV, whose relative perimeter error is roughly 0.07 / transition_cells.
[[nodiscard]] inline GridFunction ball_indicator(const GridDomain& domain, Vec2 center,
                                                 double radius,
                                                 double transition_cells = kDefaultTransitionCells) {
  if (!(radius > 0.0)) throw DomainError("ball_indicator: radius must be > 0");
  if (!(transition_cells > 0.0)) throw DomainError("ball_indicator: transition must be > 0");
  const double width = transition_cells * domain.h();
  return GridFunction::sample(domain, [&](Vec2 c) {
    return std::clamp(0.5 - (norm(c - center) - radius) / width, 0.0, 1.0);
  });
}

/// The two-valued profile on the grid: chi - beta (1 - chi) with chi = ball_indicator.
[[nodiscard]] inline GridFunction grid_two_valued_profile(
    const GridDomain& domain, const TwoValuedProfile& prof,
    double transition_cells = kDefaultTransitionCells) {
  GridFunction u = ball_indicator(domain, prof.center, prof.eps, transition_cells);
  for (double& v : u.mutable_values()) v = v - prof.beta * (1.0 - v);
  return u;
}

/// Descent parameters. A fixed seed makes a run fully deterministic.
struct SolverConfig {
  int iterations = 120;
  double initial_step = 0.05;
  /// step_k = initial_step / (1 + k)^step_decay
  double step_decay = 0.5;
  int restarts = 2;
  std::uint64_t seed = 20240601;
  /// Huber width of the smoothed TV used for descent directions, in cells.
  double smoothing_width = 1.0;
  /// Stop when the best quotient improved by less than this (relative) over
  /// the last `stall_window` iterations.
  double tolerance = 1e-7;
  int stall_window = 20;
  int backtracking = 6;
  /// Amplitude of the smooth random perturbation used by restarts.
  double perturbation = 0.1;

  void validate() const {
    if (iterations < 1) throw DomainError("SolverConfig: iterations must be >= 1");
    if (!(initial_step > 0.0)) throw DomainError("SolverConfig: initial_step must be > 0");
    if (!(step_decay >= 0.0)) throw DomainError("SolverConfig: step_decay must be >= 0");
    if (restarts < 0) throw DomainError("SolverConfig: restarts must be >= 0");
    if (!(smoothing_width > 0.0)) throw DomainError("SolverConfig: smoothing_width must be > 0");
    if (!(tolerance >= 0.0)) throw DomainError("SolverConfig: tolerance must be >= 0");
    if (stall_window < 1) throw DomainError("SolverConfig: stall_window must be >= 1");
    if (backtracking < 0) throw DomainError("SolverConfig: backtracking must be >= 0");
    if (!(perturbation >= 0.0)) throw DomainError("SolverConfig: perturbation must be >= 0");
  }
};

struct IterationRecord {
  int iter = 0;
  double quotient = 0.0;
  double residual = 0.0;
  double tv = 0.0;
  double norm = 0.0;
};

struct ConstantEstimate {
  double value = 0.0;
  GridFunction snapshot;
  double residual = 0.0;
  std::vector<IterationRecord> history;
  double threshold = 0.0;
  /// threshold - value; positive means the discrete value sits below c*_n / 2^(1/n).
  double certificate_gap = 0.0;
  bool below_threshold = false;
  /// Index of the winning start (0 = two-valued seed, then restarts, then warm starts).
  int best_start = 0;
  double seed_value = 0.0;
  double seed_eps = 0.0;
};

namespace detail {

struct DescentResult {
  std::vector<double> best;
  std::vector<IterationRecord> history;
  double value = std::numeric_limits<double>::infinity();
};

// Shift to the constraint and scale to unit norm, in place. Returns false for
// a constant input.
inline bool make_feasible(const GridDomain& d, std::vector<double>& w, double q) {
  const auto [mn, mx] = std::minmax_element(w.begin(), w.end());
  if (!(*mx > *mn)) return false;
  const double lambda = shift_equal_weights(w, q);
  for (double& v : w) v -= lambda;
  const double nv = lp_norm_power(d, w, 2);
  if (!(nv > 0.0)) return false;
  for (double& v : w) v /= nv;
  return true;
}

inline IterationRecord evaluate(const GridDomain& d, std::span<const double> w, double q, int iter) {
  IterationRecord r;
  r.iter = iter;
  r.tv = total_variation(d, w);
  r.norm = lp_norm_power(d, w, 2);
  r.quotient = r.tv / r.norm;
  double s = 0.0;
  for (double v : w) s += sign_power(v, q);
  r.residual = d.h() * d.h() * s;
  return r;
}

// Huber-smoothed TV with threshold eta; fills its gradient.
inline double smoothed_tv(const GridDomain& d, std::span<const double> w, double eta,
                          std::vector<double>& grad) {
  const auto& right = d.right_neighbor();
  const auto& up = d.up_neighbor();
  const double h = d.h();
  std::fill(grad.begin(), grad.end(), 0.0);
  double tv_s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const std::ptrdiff_t r = right[k], t = up[k];
    const double dx = r >= 0 ? w[static_cast<std::size_t>(r)] - w[k] : 0.0;
    const double dy = t >= 0 ? w[static_cast<std::size_t>(t)] - w[k] : 0.0;
    const double m = std::sqrt(dx * dx + dy * dy);
    double c;
    if (m >= eta) {
      tv_s += m - 0.5 * eta;
      c = h / m;
    } else {
      tv_s += 0.5 * m * m / eta;
      c = h / eta;
    }
    grad[k] -= c * (dx + dy);
    if (r >= 0) grad[static_cast<std::size_t>(r)] += c * dx;
    if (t >= 0) grad[static_cast<std::size_t>(t)] += c * dy;
  }
  return h * tv_s;
}

inline double smoothed_tv(const GridDomain& d, std::span<const double> w, double eta) {
  const auto& right = d.right_neighbor();
  const auto& up = d.up_neighbor();
  double tv_s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const std::ptrdiff_t r = right[k], t = up[k];
    const double dx = r >= 0 ? w[static_cast<std::size_t>(r)] - w[k] : 0.0;
    const double dy = t >= 0 ? w[static_cast<std::size_t>(t)] - w[k] : 0.0;
    const double m = std::sqrt(dx * dx + dy * dy);
    tv_s += m >= eta ? m - 0.5 * eta : 0.5 * m * m / eta;
  }
  return d.h() * tv_s;
}

// Descent state: iterates follow the smoothed quotient, the record keeps the
// best unsmoothed quotient seen.
inline DescentResult descend(const GridDomain& d, std::vector<double> start, double q,
                             const SolverConfig& cfg) {
  DescentResult out;
  if (!make_feasible(d, start, q)) throw DegenerateInputError("minimize_quotient: constant start");
  std::vector<double> w = std::move(start);
  IterationRecord best = evaluate(d, w, q, 0);
  out.best = w;
  out.history.push_back(best);

  const auto [mn, mx] = std::minmax_element(w.begin(), w.end());
  const double eta = std::max(cfg.smoothing_width * (*mx - *mn) * d.h() / d.diameter(), 1e-300);
  const double h2 = d.h() * d.h();

  std::vector<double> grad(w.size()), trial(w.size());
  double qs = smoothed_tv(d, w, eta, grad);
  for (int k = 1; k <= cfg.iterations; ++k) {
    // Gradient of TV_s / ||w|| at ||w|| = 1 (n = 2): grad TV_s - TV_s h^2 w.
    double gmax = 0.0, wmax = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      grad[i] -= qs * h2 * w[i];
      gmax = std::max(gmax, std::abs(grad[i]));
      wmax = std::max(wmax, std::abs(w[i]));
    }
    if (!(gmax > 0.0)) break;
    double step = cfg.initial_step / std::pow(static_cast<double>(k), cfg.step_decay) * wmax / gmax;
    bool moved = false;
    for (int bt = 0; bt <= cfg.backtracking; ++bt, step *= 0.5) {
      for (std::size_t i = 0; i < w.size(); ++i) trial[i] = w[i] - step * grad[i];
      if (!make_feasible(d, trial, q)) continue;
      const double qs_trial = smoothed_tv(d, trial, eta);
      if (qs_trial < qs) {
        w.swap(trial);
        moved = true;
        break;
      }
    }
    if (moved) {
      const IterationRecord cand = evaluate(d, w, q, k);
      if (cand.quotient < best.quotient) {
        best = cand;
        out.best = w;
      }
    }
    best.iter = k;
    out.history.push_back(best);
    if (!moved) break;
    const int window = cfg.stall_window;
    if (k >= window) {
      const double before = out.history[static_cast<std::size_t>(k - window)].quotient;
      if (before - best.quotient <= cfg.tolerance * best.quotient) break;
    }
    qs = smoothed_tv(d, w, eta, grad);
  }
  out.value = best.quotient;
  return out;
}

// Smooth random field: a few low-frequency plane waves.
inline std::vector<double> perturbation_field(const GridDomain& d, std::uint64_t seed, int restart,
                                              double amplitude) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(restart)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> freq(-2, 2);
  struct Wave {
    double amp, kx, ky, phase;
  };
  std::vector<Wave> waves;
  const double base = 2.0 * std::numbers::pi / d.diameter();
  for (int m = 0; m < 4; ++m) {
    Wave wv{};
    wv.amp = amplitude * unit(rng);
    wv.kx = base * freq(rng);
    wv.ky = base * freq(rng);
    wv.phase = std::numbers::pi * unit(rng);
    waves.push_back(wv);
  }
  std::vector<double> field;
  field.reserve(d.interior_count());
  for (std::size_t dense : d.interior_cells()) {
    const int i = static_cast<int>(dense % static_cast<std::size_t>(d.nx()));
    const int j = static_cast<int>(dense / static_cast<std::size_t>(d.nx()));
    const Vec2 c = d.cell_center(i, j);
    double v = 0.0;
    for (const Wave& wv : waves) v += wv.amp * std::cos(wv.kx * c.x + wv.ky * c.y + wv.phase);
    field.push_back(v);
  }
  return field;
}

/// Worker count: BV_SHARP_THREADS if set, else the hardware concurrency.
inline unsigned worker_count(std::size_t jobs) {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BV_SHARP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(cap, std::max<std::size_t>(jobs, 1)));
}

/// Runs fn(i) for i in [0, jobs) on up to worker_count threads; results by index.
template <typename Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
  const unsigned workers = worker_count(jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < jobs; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Best boundary-cap seed for exponent q: the cap radius minimizing the exact
/// quotient, considering both the profile balanced for q and the one balanced
/// for q = 1/(n-1) and then re-shifted.
struct CapSeed {
  Vec2 center{};
  double eps = 0.0;
  /// Exponent the plateau beta was balanced for.
  double balanced_for = 1.0;
  QuotientValue quotient;
};

[[nodiscard]] inline CapSeed best_cap_seed(const GridDomain& domain, double q) {
  const Vec2 a = max_curvature_seed(domain).point;
  const auto direct = optimal_epsilon(domain, a, q);
  CapSeed seed{a, direct.eps, q, direct.quotient};
  const double q_min = 1.0;  // 1/(n-1) for n = 2
  if (q != q_min) {
    const auto balanced = optimal_epsilon(domain, a, q_min);
    const QuotientValue shifted =
        shifted_profile_quotient(domain_profile(domain, a, balanced.eps, q_min), q);
    if (shifted.value < seed.quotient.value) seed = CapSeed{a, balanced.eps, q_min, shifted};
  }
  return seed;
}

/// Upper-bound search for the discrete sharp constant with exponent q.
///
/// Starts: the best two-valued cap profile, `restarts` smooth random
/// perturbations of it, and any caller-supplied warm starts. Each start is
/// improved by backtracking descent along the smoothed-TV quotient gradient,
/// re-shifting and renormalizing after every step. The smallest quotient
/// wins; ties go to the lower start index.
[[nodiscard]] inline ConstantEstimate minimize_quotient(const GridDomain& domain, double q,
                                                        const SolverConfig& config,
                                                        std::span<const GridFunction> warm_starts = {}) {
  config.validate();
  if (!(q > 0.0) || !(q < 2.0)) throw DomainError("minimize_quotient: q must lie in (0, 2)");
  for (const auto& w : warm_starts)
    if (&w.domain() != &domain) throw DomainError("minimize_quotient: warm start on another domain");

  const CapSeed cap = best_cap_seed(domain, q);
  const GridFunction seed_fn = ball_indicator(domain, cap.center, cap.eps);
  const std::vector<double> seed(seed_fn.values().begin(), seed_fn.values().end());

  std::vector<std::vector<double>> starts;
  starts.push_back(seed);
  for (int r = 1; r <= config.restarts; ++r) {
    auto field = detail::perturbation_field(domain, config.seed, r, config.perturbation);
    for (std::size_t k = 0; k < field.size(); ++k) field[k] += seed[k];
    starts.push_back(std::move(field));
  }
  for (const auto& w : warm_starts) starts.emplace_back(w.values().begin(), w.values().end());

  std::vector<detail::DescentResult> runs(starts.size());
  detail::parallel_for(starts.size(), [&](std::size_t i) {
    runs[i] = detail::descend(domain, starts[i], q, config);
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].value < runs[best].value) best = i;

  const double threshold = half_space_constant(2);
  const double seed_value = runs[0].history.front().quotient;
  GridFunction snapshot(domain, std::move(runs[best].best));
  ConstantEstimate est{runs[best].value, std::move(snapshot), 0.0, std::move(runs[best].history),
                       threshold, 0.0, false, static_cast<int>(best), 0.0, cap.eps};
  est.residual = grid_constraint_residual(est.snapshot, q);
  est.certificate_gap = threshold - est.value;
  est.below_threshold = est.certificate_gap > 0.0;
  est.seed_value = seed_value;
  return est;
}

/// A point mass of the limiting |u|^(n/(n-1)) measure.
struct Atom {
  /// Mass centroid of the last-radius ball around the detected peak.
  Vec2 location{};
  double mass = 0.0;
};

struct ConcentrationOptions {
  double atom_threshold = 0.05;
  /// Maximal relative drop of ball mass between the last two radii.
  double stability = 0.10;
  int max_atoms = 64;
};

struct ConcentrationReport {
  std::vector<Atom> atoms;
  double diffuse_mass = 0.0;
  /// Sum of atom masses and diffuse mass.
  double total_mass = 0.0;
  bool mass_audit_ok = false;
};

namespace detail {

// Mass of rho (dense, zero outside) in the discrete ball of radius r about every cell.
inline std::vector<double> ball_masses(const GridDomain& d, const std::vector<double>& rho, double r) {
  const int nx = d.nx(), ny = d.ny();
  const double rc = r / d.h();
  const int reach = static_cast<int>(std::floor(rc));
  std::vector<double> prefix(static_cast<std::size_t>(nx + 1) * static_cast<std::size_t>(ny), 0.0);
  for (int j = 0; j < ny; ++j) {
    const std::size_t row = static_cast<std::size_t>(j) * static_cast<std::size_t>(nx + 1);
    for (int i = 0; i < nx; ++i) prefix[row + i + 1] = prefix[row + i] + rho[d.index(i, j)];
  }
  std::vector<int> half(static_cast<std::size_t>(2 * reach + 1));
  for (int dj = -reach; dj <= reach; ++dj)
    half[static_cast<std::size_t>(dj + reach)] = static_cast<int>(std::floor(std::sqrt(rc * rc - dj * dj)));
  std::vector<double> out(rho.size(), 0.0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      for (int dj = -reach; dj <= reach; ++dj) {
        const int jj = j + dj;
        if (jj < 0 || jj >= ny) continue;
        const int w = half[static_cast<std::size_t>(dj + reach)];
        const int lo = std::max(0, i - w), hi = std::min(nx - 1, i + w);
        const std::size_t row = static_cast<std::size_t>(jj) * static_cast<std::size_t>(nx + 1);
        s += prefix[row + hi + 1] - prefix[row + lo];
      }
      out[d.index(i, j)] = s;
    }
  }
  return out;
}

}  // namespace detail

/// Detects atoms of the limiting mass measure of a normalized family.
///
/// The last member is examined at the last two radii: a cell center x is an
/// atom when the |u|^(n/(n-1)) mass of B(x, r_last) exceeds the threshold and
/// dropped by less than `stability` (relative) from B(x, r_prev). Atoms are
/// picked greedily by mass and keep a 2 r_prev separation. All remaining mass
/// is diffuse.
[[nodiscard]] inline ConcentrationReport concentration_report(std::span<const GridFunction> family,
                                                              std::span<const double> radii,
                                                              ConcentrationOptions opts = {}) {
  if (family.empty()) throw DomainError("concentration_report: empty family");
  if (radii.size() < 2) throw DomainError("concentration_report: need at least two radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw DomainError("concentration_report: radii must be positive");
    if (i > 0 && !(radii[i] < radii[i - 1]))
      throw DomainError("concentration_report: radii must be strictly decreasing");
  }
  const GridFunction& u = family.back();
  const GridDomain& d = u.domain();
  if (std::abs(lp_norm_power(u, 2) - 1.0) > 1e-6)
    throw DomainError("concentration_report: members must be normalized");

  const double h2 = d.h() * d.h();
  std::vector<double> rho(d.cell_count(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double m = h2 * u[k] * u[k];
    rho[d.interior_cells()[k]] = m;
    total += m;
  }
  const double r_prev = radii[radii.size() - 2], r_last = radii.back();
  const auto m_prev = detail::ball_masses(d, rho, r_prev);
  const auto m_last = detail::ball_masses(d, rho, r_last);

  ConcentrationReport rep;
  std::vector<std::uint8_t> excluded(d.cell_count(), 0);
  while (static_cast<int>(rep.atoms.size()) < opts.max_atoms) {
    std::size_t pick = d.cell_count();
    for (std::size_t dense : d.interior_cells()) {
      if (excluded[dense]) continue;
      if (pick == d.cell_count() || m_last[dense] > m_last[pick]) pick = dense;
    }
    if (pick == d.cell_count()) break;
    const double mass = m_last[pick];
    if (!(mass > opts.atom_threshold * total)) break;
    const int pi = static_cast<int>(pick % static_cast<std::size_t>(d.nx()));
    const int pj = static_cast<int>(pick / static_cast<std::size_t>(d.nx()));
    const bool stable = (m_prev[pick] - mass) < opts.stability * m_prev[pick];
    Vec2 where = d.cell_center(pi, pj);
    if (stable) {
      const Vec2 ball_center = where;
      const int r_cells = static_cast<int>(std::ceil(r_last / d.h()));
      Vec2 moment{0.0, 0.0};
      double weight = 0.0;
      for (int j = std::max(0, pj - r_cells); j <= std::min(d.ny() - 1, pj + r_cells); ++j)
        for (int i = std::max(0, pi - r_cells); i <= std::min(d.nx() - 1, pi + r_cells); ++i) {
          const Vec2 c = d.cell_center(i, j);
          if (norm(c - ball_center) > r_last) continue;
          const double w = rho[d.index(i, j)];
          moment = moment + w * c;
          weight += w;
        }
      if (weight > 0.0) where = (1.0 / weight) * moment;
      rep.atoms.push_back(Atom{where, mass});
    }
    // Exclude the neighbourhood either way so the scan moves on.
    const double excl = 2.0 * r_prev;
    const int reach = static_cast<int>(std::ceil(excl / d.h()));
    for (int j = std::max(0, pj - reach); j <= std::min(d.ny() - 1, pj + reach); ++j)
      for (int i = std::max(0, pi - reach); i <= std::min(d.nx() - 1, pi + reach); ++i)
        if (norm(d.cell_center(i, j) - where) <= excl) excluded[d.index(i, j)] = 1;
  }
  double atom_mass = 0.0;
  for (const auto& a : rep.atoms) atom_mass += a.mass;
  rep.diffuse_mass = total - atom_mass;
  rep.total_mass = atom_mass + rep.diffuse_mass;
  rep.mass_audit_ok = std::abs(rep.total_mass - 1.0) <= 1e-6;
  return rep;
}

/// Exact-quadrature witness for a strict inequality below c*_n / 2^(1/n).
struct CapWitness {
  Vec2 center{};
  double eps = 0.0;
  double q = 1.0;
  double balanced_for = 1.0;
  QuotientValue quotient;
};

struct DomainCertificate {
  double threshold = 0.0;
  double best_two_valued = 0.0;
  std::optional<double> solver_estimate;
  /// threshold - min(two-valued value, solver estimate).
  double gap = 0.0;
  /// Decided by the exact two-valued value alone.
  bool achieved = false;
  CapWitness witness;
};

/// Recomputes a witness's quotient through the exact-quadrature path.
[[nodiscard]] inline QuotientValue revalidate(const GridDomain& domain, const CapWitness& w) {
  if (w.balanced_for == w.q) return two_valued_quotient_exact(domain, w.center, w.eps, w.q);
  return shifted_profile_quotient(domain_profile(domain, w.center, w.eps, w.balanced_for), w.q);
}

[[nodiscard]] inline DomainCertificate achievability_certificate(
    const GridDomain& domain, double q, const std::optional<SolverConfig>& config = std::nullopt) {
  if (!(q > 0.0) || !(q < 2.0)) throw DomainError("achievability_certificate: q must lie in (0, 2)");
  const CapSeed cap = best_cap_seed(domain, q);
  DomainCertificate cert;
  cert.threshold = half_space_constant(2);
  cert.best_two_valued = cap.quotient.value;
  cert.witness = CapWitness{cap.center, cap.eps, q, cap.balanced_for, cap.quotient};
  double best = cap.quotient.value;
  if (config) {
    const auto est = minimize_quotient(domain, q, *config);
    cert.solver_estimate = est.value;
    best = std::min(best, est.value);
  }
  cert.gap = cert.threshold - best;
  cert.achieved = cert.threshold - cert.best_two_valued > 0.0;
  return cert;
}

}  // namespace bvsharp
