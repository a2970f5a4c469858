#include "oracles.hpp"

#include <roadfield/eigensolve.hpp>
#include <roadfield/operators.hpp>

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

Eigen::MatrixXd dense(const DiscreteOperator& op) { return Eigen::MatrixXd(op.matrix); }

}  // namespace

TEST(Geometry, SpacingConventions) {
    const auto t = Geometry::truncated_road_field(2.0, 2.0, 15, 8);
    EXPECT_DOUBLE_EQ(t.hx, 0.25);
    EXPECT_DOUBLE_EQ(t.hy, 0.25);
    EXPECT_DOUBLE_EQ(t.x(0), -1.75);
    EXPECT_DOUBLE_EQ(t.y(0), 0.0);
    const auto d = Geometry::dirichlet_rect(1.0, 1.0, 7, 3);
    EXPECT_DOUBLE_EQ(d.hx, 0.25);
    EXPECT_DOUBLE_EQ(d.hy, 0.25);
    EXPECT_DOUBLE_EQ(d.y(0), 0.25);
    const auto c = Geometry::periodic_cell(1.0, 8);
    EXPECT_EQ(c.ny, 0);
    EXPECT_DOUBLE_EQ(c.hx, 0.125);
    const auto s = Geometry::periodic_strip(1.0, 1.0, 8, 15);
    EXPECT_DOUBLE_EQ(s.hy, 0.125);
    EXPECT_DOUBLE_EQ(s.y(0), -0.875);
    EXPECT_THROW(Geometry::periodic_cell(1.0, 2), GeometryError);
}

TEST(Geometry, FixedSpacingFactory) {
    const auto g = geometry_with_spacing(GeometryKind::TruncatedRoadField, 4.0, 0.125, 0.25, 1.0);
    EXPECT_EQ(g.nx, 63);
    EXPECT_EQ(g.ny, 16);
    EXPECT_DOUBLE_EQ(g.hx, 0.125);
    EXPECT_THROW(geometry_with_spacing(GeometryKind::DirichletRect, 1.0, 0.3, 0.25, 1.0), GeometryError);
}

TEST(FieldOperator, PeriodicCellConstantIsEigenvector) {
    const auto op = assemble_field_operator(Geometry::periodic_cell(1.0, 16), params(),
                                            ReactionSpec::homogeneous(0.7));
    const std::vector<double> ones(16, 1.0);
    for (double v : roadfield::apply(op, ones)) EXPECT_NEAR(v, -0.7, 1e-13);
}

TEST(FieldOperator, RowSumsVanishWithoutRate) {
    // interior rows of -d Lap - c d_x annihilate constants
    const auto g = Geometry::dirichlet_rect(1.0, 1.0, 9, 9);
    const auto op = assemble_field_operator(g, params(1, 1, 1, 1, 0.4), ReactionSpec::homogeneous(0.0));
    const std::vector<double> ones(static_cast<std::size_t>(op.order()), 1.0);
    const auto y = roadfield::apply(op, ones);
    for (int j = 1; j + 1 < g.ny; ++j)
        for (int i = 1; i + 1 < g.nx; ++i) EXPECT_EQ(y[g.field_index(i, j)], 0.0);
}

TEST(FieldOperator, MatchesIndependentDenseBuild) {
    const int nx = 7, ny = 5;
    const auto g = Geometry::dirichlet_rect(1.0, 0.75, nx, ny);
    const auto op = assemble_field_operator(g, params(1, 1.3), ReactionSpec::homogeneous(0.4));
    const Eigen::MatrixXd ref = oracle::dense_dirichlet_rect(1.3, 0.4, nx, ny, g.hx, g.hy);
    EXPECT_LE((dense(op) - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FieldOperator, DirichletRectSineProductSpectrum) {
    const int nx = 7, ny = 5;
    const auto g = Geometry::dirichlet_rect(1.0, 1.0, nx, ny);
    const auto op = assemble_field_operator(g, params(), ReactionSpec::homogeneous(0.0));
    std::vector<double> ref;
    for (int kx = 1; kx <= nx; ++kx)
        for (int ky = 1; ky <= ny; ++ky) ref.push_back(oracle::dirichlet_rect(1.0, 0.0, 1.0, 1.0, g.hx, g.hy, kx, ky));
    std::sort(ref.begin(), ref.end());
    const auto ev = dense_oracle(op);
    ASSERT_EQ(ev.size(), ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(ev[k], ref[k], 1e-10);
}

TEST(FieldOperator, CirculantSpectrum) {
    const int n = 8;
    const auto g = Geometry::periodic_cell(1.0, n);
    const auto op = assemble_field_operator(g, params(), ReactionSpec::homogeneous(0.0));
    std::vector<double> ref;
    for (int k = 0; k < n; ++k) ref.push_back(oracle::circulant_eigenvalue(1.0, g.hx, n, k));
    std::sort(ref.begin(), ref.end());
    const auto ev = dense_oracle(op);
    for (int k = 0; k < n; ++k) EXPECT_NEAR(ev[k], ref[k], 1e-10);
    EXPECT_NEAR(ev[0], 0.0, 1e-12);
}

TEST(FieldOperator, NeumannBottomQuarterWave) {
    // roadless half-strip: mirrored ghost at y = 0, zero at y = r
    const auto g = Geometry::periodic_half_strip(2.0, 1.0, 8, 16);
    const auto op = assemble_field_operator(g, params(), ReactionSpec::homogeneous(0.0));
    EXPECT_NEAR(principal_eigenpair(op).lambda, oracle::quarter_wave(1.0, g.hy, 2.0), 1e-10);
}

TEST(FieldOperator, PecletGuard) {
    const auto g = Geometry::periodic_cell(1.0, 8);  // hx = 1/8
    EXPECT_THROW(assemble_field_operator(g, params(1, 1, 1, 1, 16.0), ReactionSpec::homogeneous(0.0)),
                 StabilityError);
    EXPECT_NO_THROW(assemble_field_operator(g, params(1, 1, 1, 1, 15.9), ReactionSpec::homogeneous(0.0)));
    try {
        assemble_field_operator(g, params(1, 1, 1, 1, 20.0), ReactionSpec::homogeneous(0.0));
    } catch (const StabilityError& e) {
        EXPECT_NE(std::string(e.what()).find("Peclet"), std::string::npos);
    }
}

TEST(FieldOperator, RejectsRoadGeometry) {
    EXPECT_THROW(assemble_field_operator(Geometry::truncated_road_field(1, 1, 7, 4), params(),
                                         ReactionSpec::homogeneous(1.0)),
                 GeometryError);
    EXPECT_THROW(assemble_coupled_operator(Geometry::dirichlet_rect(1, 1, 7, 4), params(),
                                           ReactionSpec::homogeneous(1.0)),
                 GeometryError);
}

TEST(FieldOperator, TranslationByPeriodLeavesMatrixUnchanged) {
    // a cell of two periods sampled from x or x + ell gives the same entries
    auto shifted = ReactionSpec::custom({0.2, 1.0, -0.4, 0.3}, 1.0, 2.0);
    const auto g = Geometry::periodic_strip(1.0, 1.0, 16, 7, 2);
    const auto a = assemble_field_operator(g, params(), shifted);
    std::vector<double> samples = shifted.a_samples;
    for (std::size_t k = 0; k < a.rate.size(); ++k)
        EXPECT_NEAR(a.rate[k], linearization(shifted, g.x(static_cast<int>(k)) + 1.0), 1e-14);
    // both halves of the doubled cell see identical rates
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(a.rate[i], a.rate[i + 8], 1e-14);
}

TEST(CoupledOperator, WeightedSymmetryAtZeroSpeed) {
    const auto g = Geometry::truncated_road_field(2.0, 2.0, 15, 16);
    for (auto p : {params(), params(2.0, 0.5, 1.5, 0.7), params(0.3, 3.0, 0.2, 4.0)}) {
        const auto op = assemble_coupled_operator(g, p, ReactionSpec::logistic_periodic(0.3, 0.9));
        EXPECT_LE(weighted_symmetry_defect(op), 1e-12);
    }
    const auto hs = Geometry::periodic_half_strip(2.0, 1.0, 16, 16);
    EXPECT_LE(weighted_symmetry_defect(
                  assemble_coupled_operator(hs, params(2.0, 0.5, 1.5, 0.7), ReactionSpec::logistic_periodic(0.3, 0.9))),
              1e-12);
}

TEST(CoupledOperator, NonSymmetricWithSpeed) {
    const auto g = Geometry::truncated_road_field(2.0, 2.0, 15, 16);
    const auto op = assemble_coupled_operator(g, params(1, 1, 1, 1, 0.5), ReactionSpec::homogeneous(1.0));
    EXPECT_GT(weighted_symmetry_defect(op), 1e-3);
}

TEST(CoupledOperator, OffDiagonalsNonpositive) {
    const auto g = Geometry::truncated_road_field(2.0, 2.0, 15, 16);
    const auto op = assemble_coupled_operator(g, params(2, 1, 1, 1, 1.5), ReactionSpec::logistic_periodic(-0.5, 1));
    for (int r = 0; r < op.matrix.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(op.matrix, r); it; ++it)
            if (it.col() != r) {
                EXPECT_LE(it.value(), 0.0);
            }
}

TEST(CoupledOperator, ZeroExchangeDecouplesToNeumannField) {
    // with nu = mu = 0 the y = 0 field row keeps only the mirrored ghost
    const auto g = Geometry::truncated_road_field(1.0, 1.0, 15, 8);
    const auto coupled = assemble_coupled_operator(g, params(1, 1, 0, 0), ReactionSpec::homogeneous(0.5));
    const auto field = assemble_field_operator(Geometry::neumann_rect(1.0, 1.0, 15, 8), params(1, 1, 0, 0),
                                               ReactionSpec::homogeneous(0.5));
    const Eigen::MatrixXd a = dense(coupled);
    const Eigen::MatrixXd block = a.bottomRightCorner(field.order(), field.order());
    EXPECT_LE((block - dense(field)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(a.topRightCorner(coupled.dim_road, field.order()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE(a.bottomLeftCorner(field.order(), coupled.dim_road).cwiseAbs().maxCoeff(), 0.0);
    const auto ev = dense_oracle(coupled);
    const auto fv = dense_oracle(field);
    // the field spectrum is contained in the decoupled spectrum
    for (double lam : fv) {
        double best = 1e300;
        for (double e : ev) best = std::min(best, std::abs(e - lam));
        EXPECT_LE(best, 1e-9);
    }
    EXPECT_NEAR(principal_eigenpair(field).lambda,
                *std::min_element(fv.begin(), fv.end()), 1e-12);
}

TEST(CoupledOperator, ConstantPairSatisfiesExchange) {
    const auto g = Geometry::periodic_half_strip(2.0, 1.0, 8, 16);
    const ModelParams p = params(1.0, 1.0, 1.5, 0.5);
    const auto op = assemble_coupled_operator(g, p, ReactionSpec::homogeneous(1.0));
    const std::vector<double> road(8, p.nu / p.mu);
    const std::vector<double> field(static_cast<std::size_t>(op.dim_field), 1.0);
    for (double r : exchange_flux_residual(op, road, field)) EXPECT_EQ(r, 0.0);
    // the coupled rows at y = 0 see no exchange contribution for this pair
    std::vector<double> stacked(road);
    stacked.insert(stacked.end(), field.begin(), field.end());
    const auto y = roadfield::apply(op, stacked);
    for (int i = 0; i < 8; ++i) {
        EXPECT_NEAR(y[i], 0.0, 1e-13);
        EXPECT_NEAR(y[op.field_index(i, 0)], -1.0, 1e-12);
    }
}

TEST(Apply, MatchesDenseProduct) {
    const auto g = Geometry::truncated_road_field(1.0, 1.0, 15, 8);
    const auto op = assemble_coupled_operator(g, params(2.0, 1.0, 0.7, 1.3), ReactionSpec::logistic_periodic(0.2, 1));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    Eigen::VectorXd v(op.order());
    for (int k = 0; k < v.size(); ++k) v[k] = nd(rng);
    const std::vector<double> vs(v.data(), v.data() + v.size());
    const auto y = roadfield::apply(op, vs);
    const Eigen::VectorXd ref = dense(op) * v;
    for (int k = 0; k < v.size(); ++k) EXPECT_NEAR(y[k], ref[k], 1e-14 * (1 + std::abs(ref[k])) * 64);
}

TEST(Apply, ZeroAndBasisVectors) {
    const auto op = assemble_field_operator(Geometry::dirichlet_rect(1, 1, 5, 4), params(), ReactionSpec::homogeneous(1));
    const std::vector<double> zero(static_cast<std::size_t>(op.order()), 0.0);
    for (double v : roadfield::apply(op, zero)) EXPECT_EQ(v, 0.0);
    const Eigen::MatrixXd a = dense(op);
    for (int k = 0; k < op.order(); ++k) {
        std::vector<double> e(static_cast<std::size_t>(op.order()), 0.0);
        e[k] = 1.0;
        const auto col = roadfield::apply(op, e);
        for (int r = 0; r < op.order(); ++r) EXPECT_EQ(col[r], a(r, k));
    }
    EXPECT_THROW(roadfield::apply(op, std::vector<double>(3, 1.0)), DimensionError);
}

TEST(DumpMatrix, CoordinateFormat) {
    const auto op = assemble_field_operator(Geometry::periodic_cell(1.0, 8), params(), ReactionSpec::homogeneous(0.0));
    std::ostringstream os;
    dump_matrix(op, os);
    std::istringstream is(os.str());
    int r, c, lines = 0;
    double v;
    while (is >> r >> c >> v) {
        EXPECT_EQ(v, op.matrix.coeff(r, c));
        ++lines;
    }
    EXPECT_EQ(lines, 24);
}
