#include "oracles.hpp"

#include <roadfield/eigensolve.hpp>

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace roadfield;

namespace {

ModelParams params(double D = 1.0, double d = 1.0, double nu = 1.0, double mu = 1.0, double c = 0.0) {
    ModelParams p;
    p.D = D;
    p.d = d;
    p.nu = nu;
    p.mu = mu;
    p.c = c;
    return p;
}

double dense_min(const DiscreteOperator& op) {
    const auto ev = dense_oracle(op);
    return *std::min_element(ev.begin(), ev.end());
}

}  // namespace

TEST(PrincipalEigenpair, PeriodicCellHomogeneousExact) {
    const auto e = periodic_cell_eigen(params(), ReactionSpec::homogeneous(1.0), 32);
    EXPECT_NEAR(e.lambda, -1.0, 1e-12);
    for (double v : e.vec_field) EXPECT_NEAR(v, 1.0, 1e-12);
    EXPECT_TRUE(e.vec_road.empty());
    EXPECT_THROW(periodic_cell_eigen(params(), ReactionSpec::homogeneous(1.0), 4), ParameterDomainError);
}

TEST(PrincipalEigenpair, StripQuarterPiSquared) {
    // 8 x 63 grid on (-1, 1): exact discrete value and 2% of pi^2/4
    const auto e = strip_eigen(1.0, params(), ReactionSpec::homogeneous(0.0), {8, 63});
    const double hy = 2.0 / 64;
    EXPECT_NEAR(e.lambda, oracle::dirichlet_1d(1.0, hy, 2.0), 1e-9);
    EXPECT_NEAR(e.lambda, oracle::pi * oracle::pi / 4.0, 0.02 * oracle::pi * oracle::pi / 4.0);
    EXPECT_LE(e.residual, 1e-10);
    EXPECT_GT(e.min_entry(), 0.0);
}

TEST(PrincipalEigenpair, DirichletRectangle) {
    const auto g = Geometry::dirichlet_rect(1.0, 1.0, 63, 31);
    const auto op = assemble_field_operator(g, params(), ReactionSpec::homogeneous(0.0));
    const auto e = principal_eigenpair(op);
    const double exact = 1.25 * oracle::pi * oracle::pi;
    EXPECT_NEAR(e.lambda, oracle::dirichlet_rect(1, 0, 1, 1, g.hx, g.hy), 1e-9);
    EXPECT_NEAR(e.lambda, exact, 0.01 * exact);
    EXPECT_NEAR(e.lambda, dense_min(op), 1e-8);
}

TEST(PrincipalEigenpair, IterationBudgetExhausted) {
    const auto op = assemble_field_operator(Geometry::dirichlet_rect(1.0, 1.0, 15, 7), params(),
                                            ReactionSpec::homogeneous(0.0));
    try {
        principal_eigenpair(op, 1e-14, 1);
        FAIL() << "expected IterativeFailure";
    } catch (const IterativeFailure& e) {
        EXPECT_GT(e.last_residual(), 0.0);
    }
    EXPECT_THROW(principal_eigenpair(op, 0.0, 10), ParameterDomainError);
}

TEST(PrincipalEigenpair, DenseOracleOnRandomConfigurations) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.3, 2.5), amp(-1.0, 1.0), speed(0.0, 0.8);
    for (int trial = 0; trial < 12; ++trial) {
        const ModelParams p = params(u(rng), u(rng), u(rng), u(rng), trial % 3 == 0 ? speed(rng) : 0.0);
        const auto r = ReactionSpec::logistic_periodic(amp(rng), amp(rng));
        const Geometry g = (trial % 2 == 0) ? Geometry::truncated_road_field(1.0, 1.0, 15, 8)
                                            : Geometry::periodic_half_strip(1.5, 1.0, 12, 12);
        const auto op = assemble_coupled_operator(g, p, r);
        const auto e = principal_eigenpair(op);
        EXPECT_NEAR(e.lambda, dense_min(op), 1e-8) << "trial " << trial;
        EXPECT_GT(e.min_entry(), 0.0);
        const auto ev = dense_oracle(op);
        EXPECT_GT(ev[1] - ev[0], 1e-6) << "principal eigenvalue should be simple";
    }
}

TEST(PrincipalEigenpair, CosineCellBelowMean) {
    // constant test function gives lambda <= -mean(a) = 0, strict for nonconstant a
    const auto r = ReactionSpec::logistic_periodic(0.0, 1.0);
    const auto g = Geometry::periodic_cell(1.0, 64);
    const auto op = assemble_field_operator(g, params(), r);
    const auto e = principal_eigenpair(op);
    EXPECT_LT(e.lambda, -1e-3);
    EXPECT_NEAR(e.lambda, dense_min(op), 1e-8);
}

TEST(PrincipalEigenpair, CoupledHomogeneousPersistenceSign) {
    const auto e = eigen_on_geometry(geometry_with_spacing(GeometryKind::TruncatedRoadField, 8.0, 0.125, 0.125, 1.0),
                                     params(2.0), ReactionSpec::homogeneous(1.0), true);
    EXPECT_LT(e.lambda, 0.0);
    EXPECT_LE(e.lambda, 1.0);
    EXPECT_GT(e.min_entry(), 0.0);
}

TEST(PrincipalEigenpair, HalfStripMatchesDiscreteHalfPlane) {
    // localized road mode for a0 < 0: the far-field truncation is exponentially
    // small (decay rate s = sqrt((-a0 - lambda)/d) >= 0.2 here, so e^(-2 s r) < 1e-11)
    for (auto p : {params(1, 1, 1, 1), params(2.0, 0.5, 1.5, 0.7), params(1.0, 2.0, 0.5, 2.0)}) {
        const double a0 = -1.0;
        const double hy = 0.125;
        const auto e = periodic_roadfield_eigen(64.0, p, ReactionSpec::homogeneous(a0), {8, 512});
        EXPECT_NEAR(e.lambda, oracle::halfplane_discrete(p.d, p.nu, p.mu, a0, hy), 1e-9);
        EXPECT_NEAR(e.lambda, oracle::halfplane_continuous(p.d, p.nu, p.mu, a0), 5e-3);
    }
}

TEST(PrincipalEigenpair, HalfStripSecondOrderInHy) {
    const ModelParams p = params();
    const double exact = oracle::halfplane_continuous(1, 1, 1, -1);
    const double e1 = periodic_roadfield_eigen(24.0, p, ReactionSpec::homogeneous(-1), {8, 96}).lambda - exact;
    const double e2 = periodic_roadfield_eigen(24.0, p, ReactionSpec::homogeneous(-1), {8, 192}).lambda - exact;
    const double ratio = e1 / e2;
    EXPECT_GE(ratio, 3.4);
    EXPECT_LE(ratio, 4.6);
}

TEST(PrincipalEigenpair, NearlyDecoupledHalfStrip) {
    // the road mode sits near mu, the field block at the quarter-wave value
    const double eps = 1e-6;
    const auto g = Geometry::periodic_half_strip(1.0, 1.0, 8, 16);
    const auto op = assemble_coupled_operator(g, params(1, 1, eps, eps), ReactionSpec::homogeneous(0.0));
    const auto ev = dense_oracle(op);
    EXPECT_LE(ev[0], eps + 1e-9);
    const double qw = oracle::quarter_wave(1.0, g.hy, 1.0);
    double best = 1e300;
    for (double v : ev) best = std::min(best, std::abs(v - qw));
    EXPECT_LE(best, 1e-4);
    EXPECT_NEAR(qw, oracle::pi * oracle::pi / 4.0, 0.01);
}

TEST(Strip, LargeHeightApproachesMinusA0) {
    const double a0 = 0.8;
    double prev = 1e300;
    for (double r : {2.0, 4.0, 8.0}) {
        const int ny = static_cast<int>(2 * r * 8) - 1;
        const auto e = strip_eigen(r, params(), ReactionSpec::homogeneous(a0), {8, ny});
        EXPECT_NEAR(e.lambda, -a0 + oracle::dirichlet_1d(1.0, 0.125, 2 * r), 1e-9);
        EXPECT_GT(e.lambda, -a0);
        EXPECT_LT(e.lambda, prev);
        prev = e.lambda;
    }
}

TEST(Strip, SandwichCellStripRect) {
    const ModelParams p = params();
    const auto r = ReactionSpec::logistic_periodic(0.2, 0.9);
    const double cell = periodic_cell_eigen(p, r, 8).lambda;
    const auto strip = eigen_on_geometry(
        geometry_with_spacing(GeometryKind::PeriodicStrip, 2.0, 0.125, 0.125, 1.0, 1.0, 4), p, r, false);
    const auto rect = eigen_on_geometry(geometry_with_spacing(GeometryKind::DirichletRect, 2.0, 0.125, 0.125, 1.0), p,
                                        r, false);
    EXPECT_LE(cell, strip.lambda + 1e-9);
    EXPECT_LE(strip.lambda, rect.lambda + 1e-9);
}

TEST(Rayleigh, EqualsEigenvalueAndBoundsRandomPairs) {
    const auto g = Geometry::truncated_road_field(1.0, 1.0, 15, 8);
    const auto op = assemble_coupled_operator(g, params(2.0, 0.7, 1.2, 0.9), ReactionSpec::logistic_periodic(0.3, 1));
    const auto e = principal_eigenpair(op);
    EXPECT_NEAR(rayleigh_quotient(e.vec_road, e.vec_field, op), e.lambda, 1e-8);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> road(static_cast<std::size_t>(op.dim_road)), field(static_cast<std::size_t>(op.dim_field));
        for (auto& x : road) x = u(rng);
        for (auto& x : field) x = u(rng);
        const double q = rayleigh_quotient(road, field, op);
        EXPECT_GE(q, e.lambda - 1e-8);
        EXPECT_NEAR(q, weighted_matrix_quotient(road, field, op), 1e-9 * (1 + std::abs(q)));
    }
}

TEST(Rayleigh, FieldOnlyOperators) {
    const auto op = assemble_field_operator(Geometry::dirichlet_rect(1.0, 1.0, 15, 7), params(),
                                            ReactionSpec::logistic_periodic(0.1, 0.5));
    const auto e = principal_eigenpair(op);
    EXPECT_NEAR(rayleigh_quotient({}, e.vec_field, op), e.lambda, 1e-8);
}

TEST(Rayleigh, RejectsSpeedAndZero) {
    const auto g = Geometry::truncated_road_field(1.0, 1.0, 7, 4);
    const auto op = assemble_coupled_operator(g, params(1, 1, 1, 1, 0.2), ReactionSpec::homogeneous(1.0));
    std::vector<double> road(7, 1.0), field(28, 1.0);
    EXPECT_THROW(rayleigh_quotient(road, field, op), ParameterDomainError);
    const auto op0 = assemble_coupled_operator(g, params(), ReactionSpec::homogeneous(1.0));
    EXPECT_THROW(rayleigh_quotient(std::vector<double>(7, 0.0), std::vector<double>(28, 0.0), op0),
                 ParameterDomainError);
    EXPECT_THROW(rayleigh_quotient(road, std::vector<double>(3, 1.0), op0), DimensionError);
}

TEST(Rayleigh, ConstantPairQuotientShrinksWithR) {
    // only the outer Dirichlet boundary contributes, so Q decays like 1/R
    const ModelParams p = params(1.0, 1.0, 1.0, 2.0);
    double prev = 1e300;
    for (double R : {2.0, 4.0, 8.0, 16.0}) {
        const auto g = geometry_with_spacing(GeometryKind::TruncatedRoadField, R, 0.25, 0.25, 1.0);
        const auto op = assemble_coupled_operator(g, p, ReactionSpec::homogeneous(0.0));
        const std::vector<double> road(static_cast<std::size_t>(op.dim_road), p.nu / p.mu);
        const std::vector<double> field(static_cast<std::size_t>(op.dim_field), 1.0);
        const double q = rayleigh_quotient(road, field, op);
        EXPECT_GT(q, 0.0);
        EXPECT_LT(q, prev);
        if (prev < 1e300) {
            EXPECT_NEAR(prev / q, 2.0, 0.25);
        }
        prev = q;
    }
}

TEST(Sweep, FieldDirichletFamilyExactScaling) {
    const double a0 = 0.5;
    const std::vector<double> sizes{1, 2, 4, 8};
    SweepFamily fam{GeometryKind::DirichletRect, 0.125, 0.125, 1.0, 1, false};
    const auto s = truncation_sweep(fam, sizes, params(), ReactionSpec::homogeneous(a0));
    EXPECT_TRUE(s.monotone);
    for (const auto& pt : s.points)
        EXPECT_NEAR(pt.lambda, oracle::dirichlet_rect(1, a0, pt.size, pt.size, 0.125, 0.125), 1e-9);
    EXPECT_GT(s.limit_estimate, -a0 - 1e-3);
    EXPECT_LT(s.limit_estimate, s.last_value());
}

TEST(Sweep, CoupledHomogeneousMonotoneNegativeLimit) {
    const std::vector<double> sizes{2, 4, 8};
    SweepFamily fam{GeometryKind::TruncatedRoadField, 0.125, 0.125, 1.0, 1, true};
    const auto s = truncation_sweep(fam, sizes, params(2.0), ReactionSpec::homogeneous(1.0));
    EXPECT_TRUE(s.monotone) << s.diagnostic;
    EXPECT_LT(s.limit_estimate, 0.0);
    std::ostringstream os;
    write_sweep_csv(os, s);
    EXPECT_EQ(os.str().substr(0, 26), "size,lambda,residual,iters");
}

TEST(Sweep, HalfStripMonotoneAndBelowMu) {
    const std::vector<double> sizes{2, 4, 8, 16};
    SweepFamily fam{GeometryKind::PeriodicHalfStrip, 0.125, 0.125, 1.0, 1, true};
    const ModelParams p = params(1.0, 1.0, 1.0, 0.6);
    const auto s = truncation_sweep(fam, sizes, p, ReactionSpec::homogeneous(-2.0));
    EXPECT_TRUE(s.monotone);
    EXPECT_LE(s.limit_estimate, p.mu + 1e-6);
}

TEST(Sweep, RejectsBadSizes) {
    SweepFamily fam;
    EXPECT_THROW(truncation_sweep(fam, std::vector<double>{1, 2}, params(), ReactionSpec::homogeneous(1)),
                 ParameterDomainError);
    EXPECT_THROW(truncation_sweep(fam, std::vector<double>{1, 4, 2}, params(), ReactionSpec::homogeneous(1)),
                 ParameterDomainError);
}

TEST(Sweep, ExtrapolationExactForDoublingInverseSquares) {
    std::vector<SweepPoint> pts;
    for (double R : {2.0, 4.0, 8.0, 16.0}) pts.push_back({R, -1.0 + 3.0 / (R * R), 0, 0});
    double lim = 0;
    ASSERT_TRUE(extrapolate_limit(pts, lim));
    EXPECT_NEAR(lim, -1.0, 1e-12);
    std::vector<SweepPoint> flat{{1, 1.0, 0, 0}, {2, 1.0, 0, 0}, {3, 1.0, 0, 0}};
    EXPECT_FALSE(extrapolate_limit(flat, lim));
    EXPECT_EQ(lim, 1.0);
}

TEST(Convergence, SecondOrderAgainstAnalyticValues) {
    // strip (-1, 1): pi^2 / 4
    const double strip_exact = oracle::pi * oracle::pi / 4.0;
    const double s1 = strip_eigen(1.0, params(), ReactionSpec::homogeneous(0), {8, 31}).lambda - strip_exact;
    const double s2 = strip_eigen(1.0, params(), ReactionSpec::homogeneous(0), {8, 63}).lambda - strip_exact;
    EXPECT_GE(s1 / s2, 3.4);
    EXPECT_LE(s1 / s2, 4.6);
    // rectangle (-1, 1) x (0, 1): 5 pi^2 / 4
    const double rect_exact = 1.25 * oracle::pi * oracle::pi;
    auto rect = [&](int nx, int ny) {
        return principal_eigenpair(assemble_field_operator(Geometry::dirichlet_rect(1, 1, nx, ny), params(),
                                                           ReactionSpec::homogeneous(0)))
                   .lambda -
               rect_exact;
    };
    const double r1 = rect(31, 15), r2 = rect(63, 31);
    EXPECT_GE(r1 / r2, 3.4);
    EXPECT_LE(r1 / r2, 4.6);
}
