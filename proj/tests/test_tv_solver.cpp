#include <bvsharp/tv_solver.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <vector>

using namespace bvsharp;

namespace {

constexpr double kPi = std::numbers::pi;

GridFunction random_function(const GridDomain& d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(d.interior_count());
  for (double& x : v) x = g(rng);
  return GridFunction(d, std::move(v));
}

SolverConfig quick_config() {
  SolverConfig c;
  c.iterations = 40;
  c.restarts = 2;
  return c;
}

}  // namespace

TEST(TotalVariation, ConstantAndShiftInvariance) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 64);
  const auto one = GridFunction::sample(d, [](Vec2) { return 3.0; });
  EXPECT_EQ(total_variation(one), 0.0);
  std::mt19937_64 rng(1);
  const auto u = random_function(d, rng);
  std::vector<double> shifted(u.values().begin(), u.values().end());
  for (double& x : shifted) x += 0.75;
  EXPECT_NEAR(total_variation(GridFunction(d, shifted)), total_variation(u), 1e-9 * total_variation(u));
  EXPECT_GT(total_variation(u), 0.0);
}

TEST(TotalVariation, RampOnUnitSquare) {
  const auto d = build_box_domain(1.0, 1.0, 1.0 / 256, {0.0, 0.0});
  const double a = -2.5;
  const auto u = GridFunction::sample(d, [&](Vec2 p) { return a * p.x; });
  EXPECT_NEAR(total_variation(u), std::abs(a), 0.01 * std::abs(a));
}

TEST(TotalVariation, DiskIndicatorPerimeter) {
  const auto d = build_box_domain(1.0, 1.0, 1.0 / 512, {0.0, 0.0});
  const auto u = ball_indicator(d, {0.5, 0.5}, 0.25);
  EXPECT_NEAR(total_variation(u), 2.0 * kPi * 0.25, 0.03 * 2.0 * kPi * 0.25);
}

TEST(TotalVariation, SmoothFieldConvergesAtFirstOrder) {
  // TV of x^2 + y^2 on the unit square: 2 * (sqrt(2) + asinh(1)) / 3.
  const double exact = 2.0 * (std::sqrt(2.0) + std::asinh(1.0)) / 3.0;
  std::vector<double> err;
  for (double n : {128.0, 256.0, 512.0}) {
    const auto d = build_box_domain(1.0, 1.0, 1.0 / n, {0.0, 0.0});
    const auto u = GridFunction::sample(d, [](Vec2 p) { return p.x * p.x + p.y * p.y; });
    err.push_back(std::abs(total_variation(u) - exact));
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 0.9);
  EXPECT_GE(std::log2(err[1] / err[2]), 0.9);
}

TEST(TotalVariation, CachedValueInvalidatedOnMutation) {
  const auto d = build_box_domain(1.0, 1.0, 1.0 / 32, {0.0, 0.0});
  GridFunction u(d);
  EXPECT_EQ(total_variation(u), 0.0);
  EXPECT_EQ(lp_norm_power(u), 0.0);
  u.set(0, 1.0);
  EXPECT_GT(total_variation(u), 0.0);
  EXPECT_GT(lp_norm_power(u), 0.0);
  for (double& v : u.mutable_values()) v = 0.0;
  EXPECT_EQ(total_variation(u), 0.0);
}

TEST(GridFunction, RejectsBadValues) {
  const auto d = build_box_domain(1.0, 1.0, 1.0 / 8, {0.0, 0.0});
  EXPECT_THROW(GridFunction(d, std::vector<double>(3, 0.0)), DomainError);
  std::vector<double> v(d.interior_count(), 0.0);
  v[2] = std::nan("");
  EXPECT_THROW(GridFunction(d, v), DomainError);
}

TEST(LpNorm, IndicatorAndHomogeneity) {
  const auto d = build_box_domain(1.0, 1.0, 1.0 / 64, {0.0, 0.0});
  const auto half = GridFunction::sample(d, [](Vec2 p) { return p.x < 0.5 ? 1.0 : 0.0; });
  EXPECT_NEAR(lp_norm_power(half, 2), std::sqrt(0.5), 1e-14);
  std::vector<double> scaled(half.values().begin(), half.values().end());
  for (double& x : scaled) x *= -3.0;
  EXPECT_NEAR(lp_norm_power(GridFunction(d, scaled), 2), 3.0 * std::sqrt(0.5), 1e-13);
  // n = 3: (sum h^3 |u|^(3/2))^(2/3) with the 2-D cell area as h^2 times h.
  EXPECT_NEAR(lp_norm_power(half, 3), std::pow(0.5 / 64.0, 2.0 / 3.0), 1e-14);
  EXPECT_THROW((void)lp_norm_power(half, 1), DomainError);
}

TEST(GridQuotient, SymmetryAndScaleInvariance) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 64);
  const auto halves = GridFunction::sample(d, [](Vec2 p) { return p.x < 0.0 ? 1.0 : -1.0; });
  const auto flipped = GridFunction::sample(d, [](Vec2 p) { return p.x < 0.0 ? -1.0 : 1.0; });
  for (double q : {0.5, 1.0, 1.5}) {
    const double v = grid_quotient(halves, q);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(grid_quotient(flipped, q), v, 1e-12 * v);
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(-5.0, 5.0), expo(0.1, 1.9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = random_function(d, rng);
    double s = scale(rng);
    if (std::abs(s) < 0.1) s = 0.5;
    const double q = expo(rng);
    std::vector<double> su(u.values().begin(), u.values().end());
    for (double& x : su) x *= s;
    const double a = grid_quotient(u, q), b = grid_quotient(GridFunction(d, su), q);
    EXPECT_NEAR(a, b, 1e-10 * a) << trial;
  }
  EXPECT_THROW((void)grid_quotient(GridFunction::sample(d, [](Vec2) { return 1.0; }), 1.0),
               DegenerateInputError);
}

TEST(GridQuotient, TwoValuedProfileMatchesExactQuadrature) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 512);
  const auto prof = domain_profile(d, {1.0, 0.0}, 0.2, 1.0);
  const auto u = grid_two_valued_profile(d, prof);
  const double exact = prof.quotient().value;
  EXPECT_NEAR(grid_quotient(u, 1.0), exact, 0.05 * exact);
  // Norm of the sampled profile matches the closed form to O(h).
  EXPECT_NEAR(lp_norm_power(u), prof.quotient().denominator, 4.0 * d.h());
}

TEST(GridQuotient, ProfileErrorShrinksWithWiderInterfaces) {
  // The forward-difference stencil overestimates a sharp interface by a
  // fixed fraction; that fraction falls with the ramp width in cells.
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 256);
  const auto prof = domain_profile(d, {1.0, 0.0}, 0.2, 1.0);
  const double exact = prof.quotient().value;
  double last = std::numeric_limits<double>::infinity();
  for (double cells : {1.0, 2.0, 4.0}) {
    const double err = grid_quotient(grid_two_valued_profile(d, prof, cells), 1.0) - exact;
    EXPECT_GT(err, 0.0);
    EXPECT_LT(err, last);
    last = err;
  }
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.iterations = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.initial_step = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.restarts = -1;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.smoothing_width = -1.0;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(MinimizeQuotient, ContractOnCoarseDisk) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 64);
  const auto est = minimize_quotient(d, 1.0, quick_config());
  ASSERT_FALSE(est.history.empty());
  for (std::size_t k = 1; k < est.history.size(); ++k) {
    EXPECT_LE(est.history[k].quotient, est.history[k - 1].quotient);
    EXPECT_EQ(est.history[k].iter, static_cast<int>(k));
  }
  EXPECT_NEAR(grid_quotient(est.snapshot, 1.0), est.value, 1e-10);
  EXPECT_NEAR(lp_norm_power(est.snapshot), 1.0, 1e-12);
  EXPECT_LE(std::abs(est.residual), 1e-10);
  EXPECT_LE(est.value, est.seed_value);
  EXPECT_DOUBLE_EQ(est.threshold, half_space_constant(2));
  EXPECT_DOUBLE_EQ(est.certificate_gap, est.threshold - est.value);
}

TEST(MinimizeQuotient, DeterministicAcrossRunsAndThreadCounts) {
  const auto d = build_domain(DomainSpec::ellipse(2.0, 1.0), 1.0 / 32);
  setenv("BV_SHARP_THREADS", "1", 1);
  const auto a = minimize_quotient(d, 0.5, quick_config());
  const auto b = minimize_quotient(d, 0.5, quick_config());
  setenv("BV_SHARP_THREADS", "3", 1);
  const auto c = minimize_quotient(d, 0.5, quick_config());
  unsetenv("BV_SHARP_THREADS");
  for (const auto* other : {&b, &c}) {
    ASSERT_EQ(a.history.size(), other->history.size());
    for (std::size_t k = 0; k < a.history.size(); ++k) {
      EXPECT_EQ(a.history[k].quotient, other->history[k].quotient);
      EXPECT_EQ(a.history[k].tv, other->history[k].tv);
      EXPECT_EQ(a.history[k].residual, other->history[k].residual);
    }
    EXPECT_EQ(a.best_start, other->best_start);
  }
}

TEST(MinimizeQuotient, DifferentSeedsGiveDifferentRestarts) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 32);
  const auto f1 = detail::perturbation_field(d, 1, 1, 0.1);
  const auto f2 = detail::perturbation_field(d, 2, 1, 0.1);
  EXPECT_NE(f1, f2);
}

TEST(MinimizeQuotient, WarmStartGivesMonotonicity) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 64);
  const auto base = minimize_quotient(d, 1.0, quick_config());
  const std::vector<GridFunction> warm{base.snapshot};
  for (double q : {0.25, 0.5, 1.5}) {
    const auto est = minimize_quotient(d, q, quick_config(), warm);
    EXPECT_LE(est.value, base.value + 1e-12) << q;
  }
}

TEST(MinimizeQuotient, Preconditions) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 32);
  EXPECT_THROW((void)minimize_quotient(d, 2.0, quick_config()), DomainError);
  EXPECT_THROW((void)minimize_quotient(d, 0.0, quick_config()), DomainError);
  SolverConfig bad;
  bad.iterations = 0;
  EXPECT_THROW((void)minimize_quotient(d, 1.0, bad), DomainError);
  const auto other = build_domain(DomainSpec::disk(1.0), 1.0 / 32);
  const std::vector<GridFunction> warm{GridFunction::sample(other, [](Vec2 p) { return p.x; })};
  EXPECT_THROW((void)minimize_quotient(d, 1.0, quick_config(), warm), DomainError);
}

TEST(MinimizeQuotient, UnitDiskDefaultConfig) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 256);
  const auto est = minimize_quotient(d, 1.0, SolverConfig{});
  const double two_valued = two_valued_quotient_exact(d, {1.0, 0.0}, 0.2, 1.0).value;
  EXPECT_LE(est.value, two_valued * 1.05);
  EXPECT_LT(est.value, half_space_constant(2));
  EXPECT_TRUE(est.below_threshold);
}

TEST(Concentration, ShrinkingBallsGiveOneAtom) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 256);
  const Vec2 x0{0.3, -0.2};
  std::vector<GridFunction> family;
  for (double r : {0.2, 0.1, 0.04, 0.02}) family.push_back(normalized(ball_indicator(d, x0, r)));
  const std::vector<double> radii{0.2, 0.1, 0.05};
  const auto rep = concentration_report(family, radii);
  ASSERT_EQ(rep.atoms.size(), 1u);
  EXPECT_NEAR(rep.atoms[0].mass, 1.0, 1e-9);
  EXPECT_LE(norm(rep.atoms[0].location - x0), 2.0 * d.h());
  EXPECT_NEAR(rep.diffuse_mass, 0.0, 1e-9);
  EXPECT_TRUE(rep.mass_audit_ok);
}

TEST(Concentration, SmoothBumpIsDiffuse) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 128);
  const auto bump = normalized(GridFunction::sample(d, [](Vec2 p) { return std::exp(-dot(p, p)); }));
  const std::vector<GridFunction> family{bump, bump, bump};
  const std::vector<double> radii{0.2, 0.1, 0.05};
  const auto rep = concentration_report(family, radii);
  EXPECT_TRUE(rep.atoms.empty());
  EXPECT_NEAR(rep.diffuse_mass, 1.0, 1e-9);
  EXPECT_TRUE(rep.mass_audit_ok);
}

TEST(Concentration, HalfConcentratingFamily) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 256);
  const Vec2 x0{-0.4, 0.1};
  const auto smooth = normalized(GridFunction::sample(d, [](Vec2 p) { return 1.0 + 0.2 * p.x; }));
  std::vector<GridFunction> family;
  for (double r : {0.1, 0.05, 0.02}) {
    const auto spike = normalized(ball_indicator(d, x0, r));
    // Disjoint-ish supports: squared norms add, so each part carries mass 1/2.
    std::vector<double> v(d.interior_count());
    for (std::size_t k = 0; k < v.size(); ++k)
      v[k] = std::sqrt(0.5) * (smooth[k] * (spike[k] > 0.0 ? 0.0 : 1.0) + spike[k]);
    family.push_back(normalized(GridFunction(d, v)));
  }
  const std::vector<double> radii{0.2, 0.1, 0.05};
  const auto rep = concentration_report(family, radii);
  ASSERT_EQ(rep.atoms.size(), 1u);
  EXPECT_NEAR(rep.atoms[0].mass, 0.5, 0.05);
  EXPECT_NEAR(rep.atoms[0].mass + rep.diffuse_mass, 1.0, 1e-6);
  EXPECT_TRUE(rep.mass_audit_ok);
}

TEST(Concentration, Preconditions) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 32);
  const std::vector<double> radii{0.2, 0.1};
  EXPECT_THROW((void)concentration_report(std::vector<GridFunction>{}, radii), DomainError);
  const auto u = GridFunction::sample(d, [](Vec2 p) { return 2.0 + p.x; });
  const std::vector<GridFunction> fam{u};
  EXPECT_THROW((void)concentration_report(fam, radii), DomainError);
  const std::vector<GridFunction> ok{normalized(u)};
  EXPECT_THROW((void)concentration_report(ok, std::vector<double>{0.1, 0.2}), DomainError);
  EXPECT_THROW((void)concentration_report(ok, std::vector<double>{0.1}), DomainError);
}

TEST(Certificate, UnitDisk) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 128);
  const auto cert = achievability_certificate(d, 1.0);
  EXPECT_TRUE(cert.achieved);
  EXPECT_GE(cert.gap, 0.07);
  EXPECT_FALSE(cert.solver_estimate.has_value());
  const auto again = revalidate(d, cert.witness);
  EXPECT_NEAR(again.value, cert.witness.quotient.value, 1e-14);
  EXPECT_NEAR(cert.best_two_valued, cert.witness.quotient.value, 0.0);
}

TEST(Certificate, EllipseWitnessAtVertex) {
  const auto d = build_domain(DomainSpec::ellipse(2.0, 1.0), 1.0 / 128);
  const auto cert = achievability_certificate(d, 1.0);
  EXPECT_TRUE(cert.achieved);
  EXPECT_GT(cert.gap, 0.0);
  EXPECT_NEAR(std::abs(cert.witness.center.x), 2.0, 1e-12);
  EXPECT_NEAR(cert.witness.center.y, 0.0, 1e-12);
}

TEST(Certificate, CatalogAndExponents) {
  const std::vector<DomainSpec> catalog{DomainSpec::disk(1.0), DomainSpec::disk(0.5, {1.0, 2.0}),
                                        DomainSpec::ellipse(2.0, 1.0), DomainSpec::ellipse(1.0, 3.0),
                                        DomainSpec::fourier(1.0, {0.0, 0.0, 0.15}, {0.0, 0.0, 0.0, 0.05})};
  for (const auto& spec : catalog) {
    const auto d = build_domain(spec, 1.0 / 64);
    for (double q : {0.1, 0.25, 0.5, 1.0, 1.5, 1.9}) {
      const auto cert = achievability_certificate(d, q);
      EXPECT_GT(cert.gap, 0.0) << to_string(spec.kind) << " q=" << q;
      EXPECT_TRUE(cert.achieved);
      EXPECT_NEAR(revalidate(d, cert.witness).value, cert.best_two_valued, 1e-13);
    }
  }
}

TEST(Certificate, SolverEstimateIsAdvisory) {
  const auto d = build_domain(DomainSpec::disk(1.0), 1.0 / 64);
  const auto cert = achievability_certificate(d, 1.0, quick_config());
  ASSERT_TRUE(cert.solver_estimate.has_value());
  EXPECT_NEAR(cert.gap, cert.threshold - std::min(cert.best_two_valued, *cert.solver_estimate), 1e-15);
}
