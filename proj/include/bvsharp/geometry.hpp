#pragma once

/**
 * @file geometry.hpp
 * @brief Planar domains with C^2 boundary, sampled on a uniform grid.
 *
 * A domain is described analytically by a closed counter-clockwise curve
 * (disk, ellipse, or a star-shaped curve with a Fourier radius function).
 * The grid carries a signed-distance field and a cell-fraction measure for
 * the discrete solver; everything that feeds a certificate (curvature, cap
 * areas, relative perimeters) is computed from the analytic curve instead.
 *
 * Cap quantities use Green's theorem on the piecewise-smooth boundary of
 * Omega ∩ B(a, eps): the arcs of ∂Omega inside the ball plus the arcs of the
 * circle inside Omega. Crossing parameters are bracketed on a dense sample
 * and polished with TOMS 748; the line integrals use Gauss-Kronrod.
 */

#include <bvsharp/constants.hpp>
#include <bvsharp/error.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace bvsharp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

[[nodiscard]] constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
[[nodiscard]] constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
[[nodiscard]] inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class ShapeKind { Disk, Ellipse, Fourier, Rectangle };

[[nodiscard]] inline std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Disk: return "disk";
    case ShapeKind::Ellipse: return "ellipse";
    case ShapeKind::Fourier: return "fourier";
    case ShapeKind::Rectangle: return "rectangle";
  }
  return "unknown";
}

/// Analytic description of a bounded planar domain.
///
/// Fourier shapes are star-shaped about `center` with boundary radius
/// r(t) = r0 + sum_k (cos_coeffs[k-1] cos kt + sin_coeffs[k-1] sin kt).
/// Rectangles are expressible so that callers get a clear rejection: their
/// corners violate the C^2 requirement.
struct DomainSpec {
  ShapeKind kind = ShapeKind::Disk;
  Vec2 center{};
  double radius = 1.0;
  double semi_a = 1.0;
  double semi_b = 1.0;
  double r0 = 1.0;
  std::vector<double> cos_coeffs;
  std::vector<double> sin_coeffs;
  double width = 1.0;
  double height = 1.0;

  static DomainSpec disk(double r, Vec2 c = {}) {
    DomainSpec s;
    s.kind = ShapeKind::Disk;
    s.radius = r;
    s.center = c;
    return s;
  }
  static DomainSpec ellipse(double a, double b, Vec2 c = {}) {
    DomainSpec s;
    s.kind = ShapeKind::Ellipse;
    s.semi_a = a;
    s.semi_b = b;
    s.center = c;
    return s;
  }
  static DomainSpec fourier(double r0, std::vector<double> cos_k, std::vector<double> sin_k,
                            Vec2 c = {}) {
    DomainSpec s;
    s.kind = ShapeKind::Fourier;
    s.r0 = r0;
    s.cos_coeffs = std::move(cos_k);
    s.sin_coeffs = std::move(sin_k);
    s.center = c;
    return s;
  }
  /// Axis-aligned rectangle with lower-left corner `c`.
  static DomainSpec rectangle(double w, double h, Vec2 c = {}) {
    DomainSpec s;
    s.kind = ShapeKind::Rectangle;
    s.width = w;
    s.height = h;
    s.center = c;
    return s;
  }
};

/// Closed counter-clockwise C^2 curve t -> gamma(t), t in [0, 2pi).
class BoundaryCurve {
public:
  explicit BoundaryCurve(DomainSpec spec) : spec_(std::move(spec)) {
    if (spec_.kind == ShapeKind::Rectangle) {
      throw ConstructionError("rectangle boundary has corners: curvature undefined (not C^2)");
    }
    validate();
  }

  [[nodiscard]] const DomainSpec& spec() const noexcept { return spec_; }

  [[nodiscard]] Vec2 point(double t) const {
    switch (spec_.kind) {
      case ShapeKind::Disk:
        return spec_.center + Vec2{spec_.radius * std::cos(t), spec_.radius * std::sin(t)};
      case ShapeKind::Ellipse:
        return spec_.center + Vec2{spec_.semi_a * std::cos(t), spec_.semi_b * std::sin(t)};
      default: {
        const auto [r, dr, ddr] = radius_jet(t);
        (void)dr;
        (void)ddr;
        return spec_.center + Vec2{r * std::cos(t), r * std::sin(t)};
      }
    }
  }

  [[nodiscard]] Vec2 d1(double t) const {
    const double c = std::cos(t), s = std::sin(t);
    switch (spec_.kind) {
      case ShapeKind::Disk: return {-spec_.radius * s, spec_.radius * c};
      case ShapeKind::Ellipse: return {-spec_.semi_a * s, spec_.semi_b * c};
      default: {
        const auto [r, dr, ddr] = radius_jet(t);
        (void)ddr;
        return {dr * c - r * s, dr * s + r * c};
      }
    }
  }

  [[nodiscard]] Vec2 d2(double t) const {
    const double c = std::cos(t), s = std::sin(t);
    switch (spec_.kind) {
      case ShapeKind::Disk: return {-spec_.radius * c, -spec_.radius * s};
      case ShapeKind::Ellipse: return {-spec_.semi_a * c, -spec_.semi_b * s};
      default: {
        const auto [r, dr, ddr] = radius_jet(t);
        return {(ddr - r) * c - 2.0 * dr * s, (ddr - r) * s + 2.0 * dr * c};
      }
    }
  }

  /// Signed curvature; positive where the boundary bends towards the interior.
  [[nodiscard]] double curvature(double t) const {
    const Vec2 v = d1(t);
    const double speed = norm(v);
    return cross(v, d2(t)) / (speed * speed * speed);
  }

  /// Strict interior test from the implicit description.
  [[nodiscard]] bool contains(Vec2 p) const {
    const Vec2 d = p - spec_.center;
    switch (spec_.kind) {
      case ShapeKind::Disk: return d.x * d.x + d.y * d.y < spec_.radius * spec_.radius;
      case ShapeKind::Ellipse: {
        const double u = d.x / spec_.semi_a, v = d.y / spec_.semi_b;
        return u * u + v * v < 1.0;
      }
      default: {
        const double rho = norm(d);
        if (rho == 0.0) return true;
        return rho < std::get<0>(radius_jet(std::atan2(d.y, d.x)));
      }
    }
  }

  /// Parameter of the closest boundary point to p.
  [[nodiscard]] double nearest_parameter(Vec2 p) const {
    constexpr int kSamples = 1024;
    double best_t = 0.0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kSamples; ++k) {
      const double t = kTwoPi * k / kSamples;
      const Vec2 d = point(t) - p;
      const double d2 = dot(d, d);
      if (d2 < best_d2) {
        best_d2 = d2;
        best_t = t;
      }
    }
    return polish_nearest(p, best_t, kTwoPi / kSamples);
  }

  /// Newton refinement of a nearest-point parameter, confined to [t0 - window, t0 + window].
  [[nodiscard]] double polish_nearest(Vec2 p, double t0, double window) const {
    double t = t0;
    for (int it = 0; it < 12; ++it) {
      const Vec2 diff = point(t) - p;
      const Vec2 v = d1(t);
      const double g = dot(diff, v);
      const double dg = dot(v, v) + dot(diff, d2(t));
      if (dg <= 0.0) break;
      double next = t - g / dg;
      next = std::clamp(next, t0 - window, t0 + window);
      if (std::abs(next - t) < 1e-15) {
        t = next;
        break;
      }
      t = next;
    }
    const Vec2 a = point(t) - p, b = point(t0) - p;
    if (dot(a, a) > dot(b, b)) t = t0;
    return wrap(t);
  }

  [[nodiscard]] double distance(Vec2 p) const { return norm(point(nearest_parameter(p)) - p); }

  /// Enclosed area by Green's theorem.
  [[nodiscard]] double area() const {
    return 0.5 * integrate([this](double t) { return cross(point(t) - spec_.center, d1(t)); },
                           0.0, kTwoPi);
  }

  [[nodiscard]] double perimeter() const {
    return integrate([this](double t) { return norm(d1(t)); }, 0.0, kTwoPi);
  }

  /// Dense boundary samples at uniform parameter spacing.
  [[nodiscard]] std::vector<Vec2> sample(int count) const {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) out.push_back(point(kTwoPi * k / count));
    return out;
  }

  [[nodiscard]] double diameter() const {
    const auto pts = sample(1024);
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, norm(pts[i] - pts[j]));
    return best;
  }

  template <typename F>
  static double integrate(F&& f, double a, double b) {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
  }

  static double wrap(double t) {
    t = std::fmod(t, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    return t;
  }

private:
  std::tuple<double, double, double> radius_jet(double t) const {
    double r = spec_.r0, dr = 0.0, ddr = 0.0;
    for (std::size_t i = 0; i < spec_.cos_coeffs.size(); ++i) {
      const double k = static_cast<double>(i + 1);
      const double c = spec_.cos_coeffs[i];
      r += c * std::cos(k * t);
      dr -= c * k * std::sin(k * t);
      ddr -= c * k * k * std::cos(k * t);
    }
    for (std::size_t i = 0; i < spec_.sin_coeffs.size(); ++i) {
      const double k = static_cast<double>(i + 1);
      const double s = spec_.sin_coeffs[i];
      r += s * std::sin(k * t);
      dr += s * k * std::cos(k * t);
      ddr -= s * k * k * std::sin(k * t);
    }
    return {r, dr, ddr};
  }

  void validate() const {
    const auto finite_positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!std::isfinite(spec_.center.x) || !std::isfinite(spec_.center.y))
      throw ConstructionError("domain center must be finite");
    switch (spec_.kind) {
      case ShapeKind::Disk:
        if (!finite_positive(spec_.radius)) throw ConstructionError("disk radius must be > 0");
        return;
      case ShapeKind::Ellipse:
        if (!finite_positive(spec_.semi_a) || !finite_positive(spec_.semi_b))
          throw ConstructionError("ellipse semi-axes must be > 0");
        return;
      default: break;
    }
    constexpr int kChecks = 2048;
    for (int k = 0; k < kChecks; ++k) {
      const double t = kTwoPi * k / kChecks;
      if (!(std::get<0>(radius_jet(t)) > 0.0))
        throw ConstructionError("fourier boundary radius must stay positive");
      if (!std::isfinite(curvature(t)))
        throw ConstructionError("fourier boundary has unbounded curvature");
    }
    // A positive polar radius already makes the curve simple; the polyline
    // check guards against coefficient sets that fold back at sample scale.
    const auto pts = sample(512);
    const std::size_t m = pts.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec2 a0 = pts[i], a1 = pts[(i + 1) % m];
      for (std::size_t j = i + 2; j < m; ++j) {
        if (i == 0 && j == m - 1) continue;
        const Vec2 b0 = pts[j], b1 = pts[(j + 1) % m];
        const double d1v = cross(a1 - a0, b0 - a0), d2v = cross(a1 - a0, b1 - a0);
        const double d3v = cross(b1 - b0, a0 - b0), d4v = cross(b1 - b0, a1 - b0);
        if (d1v * d2v < 0.0 && d3v * d4v < 0.0)
          throw ConstructionError("fourier boundary self-intersects");
      }
    }
  }

  DomainSpec spec_;
};

/// Area and relative perimeter of Omega ∩ B(a, eps).
struct CapGeometry {
  double area = 0.0;
  /// Length of ∂B(a, eps) lying inside Omega.
  double arc = 0.0;
};

/// Exact cap quantities for a ball of radius eps about `a` against the curve.
[[nodiscard]] inline CapGeometry cap_geometry(const BoundaryCurve& curve, Vec2 a, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("cap: eps must be > 0");
  const double e2 = eps * eps;
  const auto f = [&](double t) {
    const Vec2 d = curve.point(t) - a;
    return dot(d, d) - e2;
  };
  const double per = curve.perimeter();
  const int samples = static_cast<int>(
      std::clamp(std::ceil(16.0 * per / eps), 2048.0, static_cast<double>(1 << 20)));
  const double dt = kTwoPi / samples;

  std::vector<double> roots;
  double t_prev = 0.0, f_prev = f(0.0);
  for (int k = 1; k <= samples; ++k) {
    const double t = (k == samples) ? kTwoPi : k * dt;
    const double ft = f(t);
    if (f_prev == 0.0) {
      roots.push_back(t_prev);
    } else if ((f_prev < 0.0) != (ft < 0.0) && ft != 0.0) {
      std::uintmax_t iters = 200;
      const auto [lo, hi] = boost::math::tools::toms748_solve(
          f, t_prev, t, f_prev, ft, boost::math::tools::eps_tolerance<double>(52), iters);
      roots.push_back(0.5 * (lo + hi));
    }
    t_prev = t;
    f_prev = ft;
  }
  for (double& r : roots) r = BoundaryCurve::wrap(r);
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double x, double y) { return std::abs(x - y) < 1e-14; }),
              roots.end());

  const auto boundary_piece = [&](double t0, double t1) {
    return 0.5 * BoundaryCurve::integrate(
                     [&](double t) { return cross(curve.point(t) - a, curve.d1(t)); }, t0, t1);
  };

  CapGeometry out;
  if (roots.size() < 2) {
    if (f(0.0) < 0.0) {
      out.area = boundary_piece(0.0, kTwoPi);  // Omega lies inside the ball.
    } else if (curve.contains(a + Vec2{eps, 0.0})) {
      out.area = std::numbers::pi * e2;
      out.arc = kTwoPi * eps;
    }
    return out;
  }

  const std::size_t m = roots.size();
  std::vector<double> angles;
  angles.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double t0 = roots[i];
    const double t1 = (i + 1 < m) ? roots[i + 1] : roots[0] + kTwoPi;
    if (f(0.5 * (t0 + t1)) < 0.0) out.area += boundary_piece(t0, t1);
    const Vec2 d = curve.point(t0) - a;
    angles.push_back(BoundaryCurve::wrap(std::atan2(d.y, d.x)));
  }
  std::sort(angles.begin(), angles.end());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double p0 = angles[i];
    const double p1 = (i + 1 < angles.size()) ? angles[i + 1] : angles[0] + kTwoPi;
    const double mid = 0.5 * (p0 + p1);
    if (curve.contains(a + Vec2{eps * std::cos(mid), eps * std::sin(mid)})) {
      out.area += 0.5 * e2 * (p1 - p0);
      out.arc += eps * (p1 - p0);
    }
  }
  return out;
}

/// A domain sampled on a uniform grid of square cells.
///
/// Cell (i, j) has center origin + ((i + 1/2) h, (j + 1/2) h). A cell is
/// interior when its center lies in Omega. Immutable after construction.
class GridDomain {
public:
  [[nodiscard]] const DomainSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] bool has_curve() const noexcept { return curve_.has_value(); }
  [[nodiscard]] const BoundaryCurve& curve() const {
    if (!curve_) throw DomainError("domain has no C^2 boundary description");
    return *curve_;
  }
  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] int nx() const noexcept { return nx_; }
  [[nodiscard]] int ny() const noexcept { return ny_; }
  [[nodiscard]] Vec2 origin() const noexcept { return origin_; }
  [[nodiscard]] std::size_t cell_count() const noexcept { return sdf_.size(); }
  [[nodiscard]] std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
  }
  [[nodiscard]] Vec2 cell_center(int i, int j) const noexcept {
    return origin_ + Vec2{(i + 0.5) * h_, (j + 0.5) * h_};
  }
  [[nodiscard]] bool interior(int i, int j) const noexcept {
    return i >= 0 && j >= 0 && i < nx_ && j < ny_ && inside_[index(i, j)] != 0;
  }
  [[nodiscard]] bool interior(std::size_t k) const noexcept { return inside_[k] != 0; }
  [[nodiscard]] std::size_t interior_count() const noexcept { return interior_count_; }
  /// Dense ids of interior cells, in raster order; position = compact index.
  [[nodiscard]] const std::vector<std::size_t>& interior_cells() const noexcept { return cells_; }
  /// Compact index of a dense cell id, or -1 outside Omega.
  [[nodiscard]] std::ptrdiff_t compact_index(std::size_t dense) const noexcept { return compact_[dense]; }
  /// Compact index of the interior neighbour at (i+1, j), or -1.
  [[nodiscard]] const std::vector<std::ptrdiff_t>& right_neighbor() const noexcept { return right_; }
  /// Compact index of the interior neighbour at (i, j+1), or -1.
  [[nodiscard]] const std::vector<std::ptrdiff_t>& up_neighbor() const noexcept { return up_; }
  /// Signed distance at cell centers (negative inside).
  [[nodiscard]] const std::vector<double>& signed_distance() const noexcept { return sdf_; }
  /// Lebesgue measure by cell-fraction quadrature.
  [[nodiscard]] double measure() const noexcept { return measure_; }
  /// Lebesgue measure from the analytic boundary (Green's theorem); equals
  /// measure() for boxes.
  [[nodiscard]] double exact_measure() const { return curve_ ? curve_->area() : measure_; }
  [[nodiscard]] double diameter() const noexcept { return diameter_; }

  /// Signed distance to the boundary at an arbitrary point.
  [[nodiscard]] double signed_distance_at(Vec2 p) const {
    if (curve_) {
      const double d = curve_->distance(p);
      return curve_->contains(p) ? -d : d;
    }
    const Vec2 lo = spec_.center, hi = spec_.center + Vec2{spec_.width, spec_.height};
    const double inside_gap = std::min({p.x - lo.x, hi.x - p.x, p.y - lo.y, hi.y - p.y});
    if (inside_gap >= 0.0) return -inside_gap;
    const double dx = std::max({lo.x - p.x, 0.0, p.x - hi.x});
    const double dy = std::max({lo.y - p.y, 0.0, p.y - hi.y});
    return std::hypot(dx, dy);
  }

  friend GridDomain build_domain(const DomainSpec& spec, double h);
  friend GridDomain build_box_domain(double width, double height, double h, Vec2 corner);

private:
  GridDomain() = default;

  void compute_signed_distance();
  void compute_measure();
  void index_interior();

  DomainSpec spec_;
  std::optional<BoundaryCurve> curve_;
  double h_ = 0.0;
  Vec2 origin_{};
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> sdf_;
  std::vector<std::uint8_t> inside_;
  std::size_t interior_count_ = 0;
  double measure_ = 0.0;
  double diameter_ = 0.0;
  std::vector<std::size_t> cells_;
  std::vector<std::ptrdiff_t> compact_;
  std::vector<std::ptrdiff_t> right_;
  std::vector<std::ptrdiff_t> up_;
};

inline void GridDomain::index_interior() {
  compact_.assign(inside_.size(), -1);
  cells_.clear();
  for (std::size_t id = 0; id < inside_.size(); ++id) {
    if (inside_[id] == 0) continue;
    compact_[id] = static_cast<std::ptrdiff_t>(cells_.size());
    cells_.push_back(id);
  }
  right_.assign(cells_.size(), -1);
  up_.assign(cells_.size(), -1);
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const int i = static_cast<int>(cells_[k] % static_cast<std::size_t>(nx_));
    const int j = static_cast<int>(cells_[k] / static_cast<std::size_t>(nx_));
    if (interior(i + 1, j)) right_[k] = compact_[index(i + 1, j)];
    if (interior(i, j + 1)) up_[k] = compact_[index(i, j + 1)];
  }
}

// Vector distance transform: exact closest points stamped in a band around
// the boundary, then propagated by two raster sweeps.
inline void GridDomain::compute_signed_distance() {
  const BoundaryCurve& c = *curve_;
  const std::size_t cells = static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<Vec2> closest(cells, Vec2{kInf, kInf});
  std::vector<double> dist(cells, kInf);
  std::vector<double> param(cells, -1.0);

  const double per = c.perimeter();
  const int samples = std::max(1024, static_cast<int>(std::ceil(4.0 * per / h_)));
  const double dt = kTwoPi / samples;
  constexpr int kBand = 3;
  for (int k = 0; k < samples; ++k) {
    const double t = k * dt;
    const Vec2 p = c.point(t);
    const int ci = static_cast<int>(std::floor((p.x - origin_.x) / h_));
    const int cj = static_cast<int>(std::floor((p.y - origin_.y) / h_));
    for (int j = std::max(0, cj - kBand); j <= std::min(ny_ - 1, cj + kBand); ++j) {
      for (int i = std::max(0, ci - kBand); i <= std::min(nx_ - 1, ci + kBand); ++i) {
        const std::size_t id = index(i, j);
        const double d = norm(cell_center(i, j) - p);
        if (d < dist[id]) {
          dist[id] = d;
          closest[id] = p;
          param[id] = t;
        }
      }
    }
  }
  for (std::size_t id = 0; id < cells; ++id) {
    if (param[id] < 0.0) continue;
    const int i = static_cast<int>(id % static_cast<std::size_t>(nx_));
    const int j = static_cast<int>(id / static_cast<std::size_t>(nx_));
    const Vec2 center = cell_center(i, j);
    const double t = c.polish_nearest(center, param[id], 2.0 * dt);
    const Vec2 p = c.point(t);
    const double d = norm(center - p);
    if (d < dist[id]) {
      dist[id] = d;
      closest[id] = p;
    }
  }

  const auto relax = [&](int i, int j, int ni, int nj) {
    if (ni < 0 || nj < 0 || ni >= nx_ || nj >= ny_) return;
    const std::size_t nb = index(ni, nj);
    if (!std::isfinite(dist[nb])) return;
    const std::size_t id = index(i, j);
    const double d = norm(cell_center(i, j) - closest[nb]);
    if (d < dist[id]) {
      dist[id] = d;
      closest[id] = closest[nb];
    }
  };
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < ny_; ++j) {
      for (int i = 0; i < nx_; ++i) {
        relax(i, j, i - 1, j);
        relax(i, j, i, j - 1);
        relax(i, j, i - 1, j - 1);
        relax(i, j, i + 1, j - 1);
      }
      for (int i = nx_ - 1; i >= 0; --i) relax(i, j, i + 1, j);
    }
    for (int j = ny_ - 1; j >= 0; --j) {
      for (int i = nx_ - 1; i >= 0; --i) {
        relax(i, j, i + 1, j);
        relax(i, j, i, j + 1);
        relax(i, j, i + 1, j + 1);
        relax(i, j, i - 1, j + 1);
      }
      for (int i = 0; i < nx_; ++i) relax(i, j, i - 1, j);
    }
  }

  sdf_.resize(cells);
  inside_.assign(cells, 0);
  interior_count_ = 0;
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const std::size_t id = index(i, j);
      const bool in = c.contains(cell_center(i, j));
      sdf_[id] = in ? -dist[id] : dist[id];
      inside_[id] = in ? 1 : 0;
      interior_count_ += in ? 1 : 0;
    }
  }
}

inline void GridDomain::compute_measure() {
  constexpr int kSub = 16;
  const double cell = h_ * h_;
  const double reach = 0.75 * h_;  // > half the cell diagonal
  double total = 0.0;
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const double d = sdf_[index(i, j)];
      if (d <= -reach) {
        total += cell;
      } else if (d < reach) {
        const Vec2 lo = origin_ + Vec2{i * h_, j * h_};
        int hits = 0;
        for (int b = 0; b < kSub; ++b)
          for (int a = 0; a < kSub; ++a)
            hits += curve_->contains(lo + Vec2{(a + 0.5) * h_ / kSub, (b + 0.5) * h_ / kSub}) ? 1 : 0;
        total += cell * hits / (kSub * kSub);
      }
    }
  }
  measure_ = total;
}

/// Samples a C^2 domain on a grid of spacing h.
[[nodiscard]] inline GridDomain build_domain(const DomainSpec& spec, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConstructionError("grid spacing h must be > 0");
  GridDomain g;
  g.spec_ = spec;
  g.curve_.emplace(spec);
  g.h_ = h;
  g.diameter_ = g.curve_->diameter();

  const auto pts = g.curve_->sample(4096);
  double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
  for (const Vec2 p : pts) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  // Minimum feature size: the smallest radius of curvature.
  double max_kappa = 0.0;
  for (int k = 0; k < 4096; ++k) max_kappa = std::max(max_kappa, std::abs(g.curve_->curvature(kTwoPi * k / 4096)));
  if (max_kappa > 0.0 && h > 1.0 / (8.0 * max_kappa)) {
    throw ConstructionError("grid spacing does not resolve the boundary (need h < min radius of curvature / 8)");
  }
  const double margin = 3.0 * h;
  g.origin_ = {xmin - margin, ymin - margin};
  g.nx_ = static_cast<int>(std::ceil((xmax - xmin + 2.0 * margin) / h));
  g.ny_ = static_cast<int>(std::ceil((ymax - ymin + 2.0 * margin) / h));
  g.compute_signed_distance();
  g.compute_measure();
  g.index_interior();
  if (!(g.measure_ > 0.0)) throw ConstructionError("domain has zero measure at this resolution");
  return g;
}

/// Axis-aligned box grid for discrete total-variation work. A box is not a
/// C^2 domain, so curvature and cap queries are unavailable on it.
[[nodiscard]] inline GridDomain build_box_domain(double width, double height, double h,
                                                Vec2 corner = {}) {
  if (!(h > 0.0) || !(width > 0.0) || !(height > 0.0))
    throw ConstructionError("box dimensions and h must be > 0");
  GridDomain g;
  g.spec_ = DomainSpec::rectangle(width, height, corner);
  g.h_ = h;
  g.origin_ = corner;
  g.nx_ = static_cast<int>(std::lround(width / h));
  g.ny_ = static_cast<int>(std::lround(height / h));
  if (g.nx_ < 1 || g.ny_ < 1) throw ConstructionError("box smaller than one cell");
  const std::size_t cells = static_cast<std::size_t>(g.nx_) * static_cast<std::size_t>(g.ny_);
  g.sdf_.resize(cells);
  g.inside_.assign(cells, 1);
  g.interior_count_ = cells;
  for (int j = 0; j < g.ny_; ++j)
    for (int i = 0; i < g.nx_; ++i) g.sdf_[g.index(i, j)] = g.signed_distance_at(g.cell_center(i, j));
  g.measure_ = static_cast<double>(cells) * h * h;
  g.diameter_ = std::hypot(g.nx_ * h, g.ny_ * h);
  g.index_interior();
  return g;
}

/// Curvature of ∂Omega at the analytic boundary point nearest to `point`.
[[nodiscard]] inline double boundary_mean_curvature(const GridDomain& domain, Vec2 point) {
  const BoundaryCurve& c = domain.curve();
  const double t = c.nearest_parameter(point);
  if (norm(c.point(t) - point) >= domain.h()) {
    throw DomainError("boundary_mean_curvature: point is not on the boundary");
  }
  return c.curvature(t);
}

struct CurvatureSeed {
  Vec2 point{};
  double parameter = 0.0;
  double curvature = 0.0;
  /// 1/diam(Omega): the curvature at a diameter endpoint is at least this.
  double diameter_bound = 0.0;
};

/// Boundary point of maximal curvature; ties go to the smallest parameter.
[[nodiscard]] inline CurvatureSeed max_curvature_seed(const GridDomain& domain) {
  const BoundaryCurve& c = domain.curve();
  constexpr int kSamples = 4096;
  const double dt = kTwoPi / kSamples;
  std::vector<double> kappa(kSamples);
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kSamples; ++k) {
    kappa[static_cast<std::size_t>(k)] = c.curvature(k * dt);
    best = std::max(best, kappa[static_cast<std::size_t>(k)]);
  }
  const double tie = 1e-12 * std::max(1.0, std::abs(best));
  int pick = 0;
  while (kappa[static_cast<std::size_t>(pick)] < best - tie) ++pick;

  double t = pick * dt;
  double value = kappa[static_cast<std::size_t>(pick)];
  // Polish between the neighbouring samples; keep only genuine improvements.
  const double lo = t - dt, hi = t + dt;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = c.curvature(x1), f2 = c.curvature(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 > f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = c.curvature(x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = c.curvature(x2);
    }
  }
  const double t_ref = 0.5 * (a + b);
  const double v_ref = c.curvature(t_ref);
  if (v_ref > value + tie) {
    t = BoundaryCurve::wrap(t_ref);
    value = v_ref;
  }
  return CurvatureSeed{c.point(t), t, value, 1.0 / domain.diameter()};
}

/// Lebesgue measure of Omega ∩ B(a, eps).
[[nodiscard]] inline double cap_measure(const GridDomain& domain, Vec2 a, double eps) {
  return cap_geometry(domain.curve(), a, eps).area;
}

/// Relative perimeter of Omega ∩ B(a, eps) in Omega: the part of the sphere
/// ∂B(a, eps) inside Omega.
[[nodiscard]] inline double boundary_arc_inside(const GridDomain& domain, Vec2 a, double eps) {
  return cap_geometry(domain.curve(), a, eps).arc;
}

/// Two-term expansion of |Omega ∩ B(a, eps)| for a boundary point of mean curvature H.
[[nodiscard]] inline double cap_measure_expansion(double H, double eps, int n) {
  if (!(eps > 0.0)) throw DomainError("cap_measure_expansion: eps must be > 0");
  if (n < 2) throw DomainError("cap_measure_expansion: n must be >= 2");
  const double half_ball = 0.5 * unit_ball_volume(n) * std::pow(eps, n);
  return half_ball * (1.0 - n * H * eps / ((n + 1) * euler_beta(0.5, 0.5 * (n - 1))));
}

/// Two-term expansion of the relative perimeter of a boundary cap.
[[nodiscard]] inline double boundary_arc_expansion(double H, double eps, int n) {
  if (!(eps > 0.0)) throw DomainError("boundary_arc_expansion: eps must be > 0");
  if (n < 2) throw DomainError("boundary_arc_expansion: n must be >= 2");
  const double half_sphere = 0.5 * n * unit_ball_volume(n) * std::pow(eps, n - 1);
  return half_sphere * (1.0 - H * eps / euler_beta(0.5, 0.5 * (n - 1)));
}

}  // namespace bvsharp
