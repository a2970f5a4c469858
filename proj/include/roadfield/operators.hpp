#pragma once

#include "core_model.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "grid.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace roadfield {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Assembled discrete operator A approximating -(R, L) with B = 0 eliminated.
///
/// Unknowns are stacked road first (index i), then field (index dim_road + j*nx + i).
/// `weights` is the diagonal of the quadrature matrix W of the mu/nu-weighted
/// inner product: mu*hx on road nodes, nu*hx*hy on field nodes, halved on a
/// y = 0 row closed by a ghost node. At c = 0, W*A is symmetric.
struct DiscreteOperator {
    Geometry geom;
    ModelParams params;
    std::uint64_t params_hash = 0;
    int dim_road = 0;
    int dim_field = 0;
    SparseMatrix matrix;
    Eigen::VectorXd weights;
    double weight_road = 0.0;
    double weight_field = 0.0;
    /// a(x) sampled at the x nodes (amplitude included).
    std::vector<double> rate;

    int order() const { return dim_road + dim_field; }
    bool coupled() const { return dim_road > 0; }
    int road_index(int i) const { return i; }
    int field_index(int i, int j) const { return dim_road + geom.field_index(i, j); }
};

inline void check_peclet(double c, double h, double diffusivity, const char* which) {
    const double pe = std::abs(c) * h / (2.0 * diffusivity);
    if (pe >= 1.0)
        throw StabilityError(std::string("grid Peclet number |c|*hx/(2*") + which + ") = " + format_double(pe) +
                             " must be < 1; refine the grid (hx < 2*" + which + "/|c|)");
}

namespace detail {

inline void check_periods(const ModelParams& params, const ReactionSpec& reaction) {
    if (std::abs(params.ell - reaction.ell) > 1e-12 * params.ell)
        throw ParameterDomainError("reaction period differs from model period ell");
}

/// Shared stencil assembly. `rate(x)` is the zeroth-order coefficient a(x)
/// entering the field rows as -a(x).
inline DiscreteOperator assemble(const Geometry& geom, const ModelParams& params,
                                 const std::function<double(double)>& rate, bool with_road) {
    // zero exchange rates are admitted here: they decouple road and field
    ModelParams strict = params;
    if (strict.nu == 0.0 && strict.mu == 0.0) strict.nu = strict.mu = 1.0;
    strict.validate();
    geom.check();
    check_peclet(params.c, geom.hx, params.d, "d");
    if (with_road) check_peclet(params.c, geom.hx, params.D, "D");

    DiscreteOperator op;
    op.geom = geom;
    op.params = params;
    op.params_hash = hash_value(params);
    op.dim_road = with_road ? geom.nx : 0;
    op.dim_field = geom.field_nodes();
    op.rate.resize(static_cast<std::size_t>(geom.nx));
    for (int i = 0; i < geom.nx; ++i) op.rate[i] = rate(geom.x(i));

    const int nx = geom.nx;
    const int rows = geom.field_rows();
    const bool two_d = !geom.one_dimensional();
    const double hx2 = geom.hx * geom.hx;
    const double hy2 = two_d ? geom.hy * geom.hy : 1.0;
    const double d = params.d;
    const double c = params.c;
    // -d psi'' - c psi' with central differences
    const double west = -d / hx2 + c / (2.0 * geom.hx);
    const double east = -d / hx2 - c / (2.0 * geom.hx);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(op.order()) * 6);

    auto neighbour_x = [&](int i, int di) -> int {
        int k = i + di;
        if (geom.periodic_x()) return (k % nx + nx) % nx;
        return (k < 0 || k >= nx) ? -1 : k;
    };

    for (int j = 0; j < rows; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int row = op.field_index(i, j);
            double diag = 2.0 * d / hx2 - op.rate[i];
            if (int w = neighbour_x(i, -1); w >= 0) trip.emplace_back(row, op.field_index(w, j), west);
            if (int e = neighbour_x(i, +1); e >= 0) trip.emplace_back(row, op.field_index(e, j), east);
            if (two_d) {
                diag += 2.0 * d / hy2;
                double up = -d / hy2;
                if (j == 0 && geom.ghost_bottom()) {
                    // ghost psi(-hy) mirrors psi(hy); for the road exchange it
                    // also carries -(2 hy/d)(nu psi0 - mu phi)
                    up *= 2.0;
                    if (with_road) {
                        diag += 2.0 * params.nu / geom.hy;
                        trip.emplace_back(row, op.road_index(i), -2.0 * params.mu / geom.hy);
                    }
                } else if (j > 0) {
                    trip.emplace_back(row, op.field_index(i, j - 1), -d / hy2);
                }
                if (j + 1 < rows) trip.emplace_back(row, op.field_index(i, j + 1), up);
            }
            trip.emplace_back(row, row, diag);
        }
    }

    if (with_road) {
        const double D = params.D;
        const double rw = -D / hx2 + c / (2.0 * geom.hx);
        const double re = -D / hx2 - c / (2.0 * geom.hx);
        for (int i = 0; i < nx; ++i) {
            const int row = op.road_index(i);
            trip.emplace_back(row, row, 2.0 * D / hx2 + params.mu);
            if (int w = neighbour_x(i, -1); w >= 0) trip.emplace_back(row, op.road_index(w), rw);
            if (int e = neighbour_x(i, +1); e >= 0) trip.emplace_back(row, op.road_index(e), re);
            trip.emplace_back(row, op.field_index(i, 0), -params.nu);
        }
    }

    op.matrix.resize(op.order(), op.order());
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.matrix.makeCompressed();

    const double cell = two_d ? geom.hx * geom.hy : geom.hx;
    op.weight_road = params.mu * geom.hx;
    op.weight_field = params.nu * cell;
    op.weights.resize(op.order());
    for (int i = 0; i < op.dim_road; ++i) op.weights[i] = op.weight_road;
    for (int j = 0; j < rows; ++j)
        for (int i = 0; i < nx; ++i)
            op.weights[op.field_index(i, j)] =
                (two_d && j == 0 && geom.ghost_bottom()) ? 0.5 * op.weight_field : op.weight_field;
    return op;
}

}  // namespace detail

/// Discretizes -L = -d Lap - c d_x - a(x) on a field-only geometry.
///
/// PeriodicHalfStrip is read as the roadless half-strip: Neumann at y = 0.
inline DiscreteOperator assemble_field_operator(const Geometry& geom, const ModelParams& params,
                                                const ReactionSpec& reaction) {
    switch (geom.kind) {
        case GeometryKind::DirichletRect:
        case GeometryKind::NeumannRect:
        case GeometryKind::PeriodicCell1D:
        case GeometryKind::PeriodicStrip:
        case GeometryKind::PeriodicHalfStrip: break;
        default:
            throw GeometryError(std::string("assemble_field_operator does not accept ") + to_string(geom.kind));
    }
    reaction.validate();
    detail::check_periods(params, reaction);
    return detail::assemble(
        geom, params, [&](double x) { return linearization(reaction, x); }, false);
}

/// Discretizes the coupled road-field operator with the exchange condition
/// eliminated through the ghost value psi(x, -hy).
inline DiscreteOperator assemble_coupled_operator(const Geometry& geom, const ModelParams& params,
                                                  const ReactionSpec& reaction) {
    if (!geom.supports_road())
        throw GeometryError(std::string("assemble_coupled_operator does not accept ") + to_string(geom.kind));
    reaction.validate();
    detail::check_periods(params, reaction);
    return detail::assemble(
        geom, params, [&](double x) { return linearization(reaction, x); }, true);
}

/// Linear transport part only (a = 0); the dynamics add the reaction explicitly.
inline DiscreteOperator assemble_transport_operator(const Geometry& geom, const ModelParams& params,
                                                    bool with_road) {
    if (with_road && !geom.supports_road())
        throw GeometryError(std::string("no road on ") + to_string(geom.kind));
    return detail::assemble(
        geom, params, [](double) { return 0.0; }, with_road);
}

/// y = A x, rows summed left to right.
inline std::vector<double> apply(const DiscreteOperator& op, std::span<const double> vec) {
    if (static_cast<int>(vec.size()) != op.order())
        throw DimensionError("apply: vector length " + std::to_string(vec.size()) + " != operator order " +
                             std::to_string(op.order()));
    std::vector<double> out(vec.size(), 0.0);
    for (int row = 0; row < op.matrix.outerSize(); ++row) {
        double acc = 0.0;
        for (SparseMatrix::InnerIterator it(op.matrix, row); it; ++it) acc += it.value() * vec[it.col()];
        out[row] = acc;
    }
    return out;
}

/// max |W A - A^T W| relative to max |W A|.
inline double weighted_symmetry_defect(const DiscreteOperator& op) {
    const Eigen::MatrixXd dense = Eigen::MatrixXd(op.matrix);
    const Eigen::MatrixXd wa = op.weights.asDiagonal() * dense;
    const double scale = wa.cwiseAbs().maxCoeff();
    return (wa - wa.transpose()).cwiseAbs().maxCoeff() / (scale > 0 ? scale : 1.0);
}

/// Gershgorin lower bound of the real parts of the spectrum.
inline double gershgorin_lower_bound(const SparseMatrix& a) {
    double lower = std::numeric_limits<double>::infinity();
    for (int row = 0; row < a.outerSize(); ++row) {
        double diag = 0.0, off = 0.0;
        for (SparseMatrix::InnerIterator it(a, row); it; ++it) {
            if (it.col() == row)
                diag += it.value();
            else
                off += std::abs(it.value());
        }
        lower = std::min(lower, diag - off);
    }
    return lower;
}

/// Exchange condition -d psi_y + nu psi - mu phi at each road node, with the
/// normal derivative taken by the one-sided three-point formula.
inline std::vector<double> exchange_flux_residual(const DiscreteOperator& op, std::span<const double> road,
                                                  std::span<const double> field) {
    if (!op.coupled()) throw GeometryError("exchange_flux_residual needs a coupled operator");
    if (static_cast<int>(road.size()) != op.dim_road || static_cast<int>(field.size()) != op.dim_field)
        throw DimensionError("exchange_flux_residual: vector sizes do not conform");
    const Geometry& g = op.geom;
    if (g.ny < 3) throw GeometryError("exchange_flux_residual needs ny >= 3");
    std::vector<double> res(static_cast<std::size_t>(g.nx));
    for (int i = 0; i < g.nx; ++i) {
        const double p0 = field[g.field_index(i, 0)];
        const double p1 = field[g.field_index(i, 1)];
        const double p2 = field[g.field_index(i, 2)];
        const double dy = (-3.0 * p0 + 4.0 * p1 - p2) / (2.0 * g.hy);
        res[i] = -op.params.d * dy + op.params.nu * p0 - op.params.mu * road[i];
    }
    return res;
}

/// Coordinate-format dump: one "row col value" line per stored entry (0-based).
inline void dump_matrix(const DiscreteOperator& op, std::ostream& os) {
    for (int row = 0; row < op.matrix.outerSize(); ++row)
        for (SparseMatrix::InnerIterator it(op.matrix, row); it; ++it)
            os << row << ' ' << it.col() << ' ' << format_double(it.value()) << '\n';
}

}  // namespace roadfield
