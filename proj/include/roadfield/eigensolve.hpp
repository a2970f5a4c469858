#pragma once

#include "core_model.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "grid.hpp"
#include "operators.hpp"
#include "parallel.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace roadfield {

/// Principal eigenpair of a discrete operator.
///
/// The stacked vector (road, field) is normalized to sup-norm 1 and is
/// positive. `residual` is |A v - lambda v|_inf / |v|_inf.
struct EigenResult {
    double lambda = 0.0;
    std::vector<double> vec_road;
    std::vector<double> vec_field;
    double residual = 0.0;
    int iters = 0;
    double shift = 0.0;
    int refactorizations = 0;

    double min_entry() const {
        double m = std::numeric_limits<double>::infinity();
        for (double v : vec_road) m = std::min(m, v);
        for (double v : vec_field) m = std::min(m, v);
        return m;
    }
};

struct EigenOptions {
    double tol = 1e-10;
    int maxiter = 20000;
};

namespace detail {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using SparseLUSolver = Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>>;

inline std::unique_ptr<SparseLUSolver> factor_shifted(const ColMatrix& a, double sigma) {
    ColMatrix shifted = a;
    for (int k = 0; k < shifted.outerSize(); ++k) shifted.coeffRef(k, k) -= sigma;
    auto lu = std::make_unique<SparseLUSolver>();
    lu->compute(shifted);
    if (lu->info() != Eigen::Success) return nullptr;
    return lu;
}

inline double infinity_norm(const SparseMatrix& a) {
    double n = 0.0;
    for (int row = 0; row < a.outerSize(); ++row) {
        double s = 0.0;
        for (SparseMatrix::InnerIterator it(a, row); it; ++it) s += std::abs(it.value());
        n = std::max(n, s);
    }
    return n;
}

inline EigenResult inverse_iteration(const DiscreteOperator& op, const EigenOptions& opt, bool reshift) {
    const int n = op.order();
    const ColMatrix a = op.matrix;
    const double anorm = infinity_norm(op.matrix);
    // zero exchange rates leave no usable weights; fall back to the plain quotient
    const Eigen::VectorXd w =
        (op.weights.size() == n && (op.weights.array() > 0.0).all()) ? op.weights : Eigen::VectorXd::Ones(n);
    // absolute residual target, floored at the roundoff level of A
    const double residual_target = std::max(opt.tol, 64.0 * std::numeric_limits<double>::epsilon() * anorm);

    double sigma = gershgorin_lower_bound(op.matrix) - 1.0;
    auto lu = factor_shifted(a, sigma);
    if (!lu) {
        sigma -= 1.0;
        lu = factor_shifted(a, sigma);
        if (!lu) throw FactorizationError("shifted operator is singular at sigma = " + format_double(sigma));
    }

    EigenResult res;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    double lambda = std::numeric_limits<double>::infinity();
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
    int it = 0;
    for (it = 1; it <= opt.maxiter; ++it) {
        Eigen::VectorXd next = lu->solve(v);
        Eigen::Index imax = 0;
        next.cwiseAbs().maxCoeff(&imax);
        const double scale = next[imax];
        if (!(std::abs(scale) > 0.0) || !std::isfinite(scale))
            throw IterativeFailure("inverse iteration produced a degenerate iterate", residual);
        v = next / scale;

        const Eigen::VectorXd av = op.matrix * v;
        const Eigen::VectorXd wv = w.cwiseProduct(v);
        const double new_lambda = wv.dot(av) / wv.dot(v);
        residual = (av - new_lambda * v).lpNorm<Eigen::Infinity>();
        const bool settled = std::abs(new_lambda - lambda) <= opt.tol * std::max(1.0, std::abs(new_lambda));
        lambda = new_lambda;
        if (settled && residual <= residual_target) {
            converged = true;
            break;
        }

        // Collatz-Wielandt: for a positive iterate, min (Av)_i / v_i is a lower
        // bound of the Perron eigenvalue of the Z-matrix A. Moving the shift up
        // to just below it keeps (A - sigma I)^{-1} positive and speeds up the
        // iteration when the Gershgorin shift is far from the spectrum.
        if (reshift && it % 3 == 0 && res.refactorizations < 12 && v.minCoeff() > 0.0) {
            const double lower = av.cwiseQuotient(v).minCoeff();
            const double margin = std::max(0.1 * (lambda - lower), 1e-9 * (1.0 + std::abs(lower)));
            const double candidate = lower - margin;
            if (candidate > sigma + 0.25 * (lambda - sigma)) {
                if (auto refined = factor_shifted(a, candidate)) {
                    lu = std::move(refined);
                    sigma = candidate;
                    ++res.refactorizations;
                }
            }
        }
    }
    if (!converged)
        throw IterativeFailure("inverse iteration did not converge in " + std::to_string(opt.maxiter) +
                                   " iterations (last residual " + format_double(residual) + ")",
                               residual);

    res.lambda = lambda;
    res.residual = residual;
    res.iters = it;
    res.shift = sigma;
    res.vec_road.assign(v.data(), v.data() + op.dim_road);
    res.vec_field.assign(v.data() + op.dim_road, v.data() + n);
    return res;
}

}  // namespace detail

/// Principal eigenpair (smallest real part, positive eigenvector) by shifted
/// inverse iteration on a sparse LU factorization.
///
/// The first shift is the Gershgorin lower bound minus one. The shift is then
/// raised towards the eigenvalue using Collatz-Wielandt lower bounds of the
/// positive iterates, refactorizing a bounded number of times. Convergence
/// requires the eigenvalue change to fall below tol*max(1,|lambda|) and the
/// residual below tol, or below 64 eps |A|_inf when that is larger.
inline EigenResult principal_eigenpair(const DiscreteOperator& op, double tol = 1e-10, int maxiter = 20000) {
    if (!(tol > 0.0)) throw ParameterDomainError("principal_eigenpair: tol must be > 0");
    if (maxiter < 1) throw ParameterDomainError("principal_eigenpair: maxiter must be >= 1");
    const EigenOptions opt{tol, maxiter};
    EigenResult res = detail::inverse_iteration(op, opt, true);
    const double floor = -1e-12;
    if (res.min_entry() < floor) {
        // re-shifting overshot the Perron value; fall back to the fixed shift
        res = detail::inverse_iteration(op, opt, false);
        if (res.min_entry() < floor)
            throw IterativeFailure("principal eigenvector is not positive", res.residual);
    }
    return res;
}

inline EigenResult principal_eigenpair(const DiscreteOperator& op, const EigenOptions& opt) {
    return principal_eigenpair(op, opt.tol, opt.maxiter);
}

inline constexpr int kDenseOracleMaxOrder = 4096;

/// Real parts of all eigenvalues by a dense method unrelated to inverse
/// iteration, sorted ascending. At c = 0 the operator is symmetrized with W
/// and handed to a tridiagonal QR solver; otherwise Hessenberg reduction and
/// shifted QR on the nonsymmetric matrix.
inline std::vector<double> dense_oracle(const DiscreteOperator& op) {
    if (op.order() > kDenseOracleMaxOrder)
        throw DimensionError("dense_oracle: order " + std::to_string(op.order()) + " exceeds " +
                             std::to_string(kDenseOracleMaxOrder));
    const Eigen::MatrixXd dense = Eigen::MatrixXd(op.matrix);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(op.order()));
    const bool symmetric_route = op.params.c == 0.0 && (op.weights.array() > 0.0).all();
    if (symmetric_route) {
        const Eigen::VectorXd s = op.weights.cwiseSqrt();
        Eigen::MatrixXd sym = s.asDiagonal() * dense * s.cwiseInverse().asDiagonal();
        sym = 0.5 * (sym + sym.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
        if (solver.info() != Eigen::Success) throw IterativeFailure("dense symmetric eigensolver failed", 0.0);
        for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) out.push_back(solver.eigenvalues()[k]);
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> solver(dense, false);
        if (solver.info() != Eigen::Success) throw IterativeFailure("dense eigensolver failed", 0.0);
        for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k)
            out.push_back(solver.eigenvalues()[k].real());
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Discrete Q_R: the mu/nu-weighted energy written with explicit edge
/// differences, road exchange cross term and trapezoidal weights.
///
/// Defined for self-adjoint operators only (c = 0). It agrees with the
/// weighted matrix quotient <v, W A v> / <v, W v> up to roundoff.
inline double rayleigh_quotient(std::span<const double> vec_road, std::span<const double> vec_field,
                                const DiscreteOperator& op) {
    if (op.params.c != 0.0)
        throw ParameterDomainError("rayleigh_quotient requires c = 0 (self-adjoint operator)");
    if (static_cast<int>(vec_road.size()) != op.dim_road || static_cast<int>(vec_field.size()) != op.dim_field)
        throw DimensionError("rayleigh_quotient: vector sizes do not conform to the operator");

    const Geometry& g = op.geom;
    const ModelParams& p = op.params;
    const int nx = g.nx;
    const bool two_d = !g.one_dimensional();
    const int rows = g.field_rows();
    const double hx = g.hx;
    const double hy = two_d ? g.hy : 1.0;

    auto row_weight = [&](int j) { return (two_d && j == 0 && g.ghost_bottom()) ? 0.5 : 1.0; };
    // sum of squared differences along a line of nx values, with zero
    // Dirichlet ends or periodic wrap
    auto line_energy = [&](auto&& value) {
        double e = 0.0;
        if (g.periodic_x()) {
            for (int i = 0; i < nx; ++i) {
                const double diff = value((i + 1) % nx) - value(i);
                e += diff * diff;
            }
        } else {
            double prev = 0.0;
            for (int i = 0; i < nx; ++i) {
                const double cur = value(i);
                e += (cur - prev) * (cur - prev);
                prev = cur;
            }
            e += prev * prev;
        }
        return e;
    };

    double numer = 0.0;
    double denom = 0.0;

    if (op.coupled()) {
        numer += p.mu * p.D * line_energy([&](int i) { return vec_road[i]; }) / hx;
        for (int i = 0; i < nx; ++i) {
            const double cross = p.mu * vec_road[i] - p.nu * vec_field[g.field_index(i, 0)];
            numer += cross * cross * hx;
            denom += p.mu * vec_road[i] * vec_road[i] * hx;
        }
    }

    double grad = 0.0;
    double potential = 0.0;
    double mass = 0.0;
    for (int j = 0; j < rows; ++j) {
        const double wy = row_weight(j);
        grad += wy * line_energy([&](int i) { return vec_field[g.field_index(i, j)]; }) * hy / hx;
        for (int i = 0; i < nx; ++i) {
            const double v = vec_field[g.field_index(i, j)];
            potential += wy * op.rate[i] * v * v * hx * hy;
            mass += wy * v * v * hx * hy;
        }
    }
    if (two_d) {
        for (int i = 0; i < nx; ++i) {
            double e = 0.0;
            if (!g.ghost_bottom()) {
                const double v0 = vec_field[g.field_index(i, 0)];
                e += v0 * v0;
            }
            for (int j = 0; j + 1 < rows; ++j) {
                const double diff = vec_field[g.field_index(i, j + 1)] - vec_field[g.field_index(i, j)];
                e += diff * diff;
            }
            const double top = vec_field[g.field_index(i, rows - 1)];
            e += top * top;
            grad += e * hx / hy;
        }
    }
    numer += p.nu * (p.d * grad - potential);
    denom += p.nu * mass;
    if (!(denom > 0.0)) throw ParameterDomainError("rayleigh_quotient: zero vector");
    return numer / denom;
}

/// <v, W A v> / <v, W v> on the stacked vector.
inline double weighted_matrix_quotient(std::span<const double> vec_road, std::span<const double> vec_field,
                                       const DiscreteOperator& op) {
    Eigen::VectorXd v(op.order());
    for (int k = 0; k < op.dim_road; ++k) v[k] = vec_road[k];
    for (int k = 0; k < op.dim_field; ++k) v[op.dim_road + k] = vec_field[k];
    const Eigen::VectorXd av = op.matrix * v;
    const Eigen::VectorXd wv = op.weights.cwiseProduct(v);
    return wv.dot(av) / wv.dot(v);
}

/// Assembles the operator matching `geom` (coupled when `road` and the
/// geometry carries a road) and returns its principal eigenpair.
inline EigenResult eigen_on_geometry(const Geometry& geom, const ModelParams& params, const ReactionSpec& reaction,
                                     bool road, const EigenOptions& opt = {}) {
    const DiscreteOperator op = (road && geom.supports_road()) ? assemble_coupled_operator(geom, params, reaction)
                                                               : assemble_field_operator(geom, params, reaction);
    return principal_eigenpair(op, opt);
}

/// Principal eigenpair of the 1D periodic cell operator -d psi'' - c psi' - a(x)psi,
/// which also gives the planar periodic eigenvalue (the operator has no y dependence).
inline EigenResult periodic_cell_eigen(const ModelParams& params, const ReactionSpec& reaction, int n,
                                       const EigenOptions& opt = {}) {
    if (n < 8) throw ParameterDomainError("periodic_cell_eigen needs n >= 8");
    return eigen_on_geometry(Geometry::periodic_cell(params.ell, n), params, reaction, false, opt);
}

struct GridCounts {
    int nx = 16;
    int ny = 16;
};

/// Periodic-in-x strip (-r, r) with Dirichlet rows at y = +-r.
inline EigenResult strip_eigen(double r, const ModelParams& params, const ReactionSpec& reaction,
                               GridCounts grid, const EigenOptions& opt = {}) {
    if (!(r > 0.0)) throw ParameterDomainError("strip_eigen needs r > 0");
    return eigen_on_geometry(Geometry::periodic_strip(r, params.ell, grid.nx, grid.ny), params, reaction, false,
                             opt);
}

/// Coupled road-field eigenpair on the periodic half-strip [0, r) with psi(., r) = 0.
inline EigenResult periodic_roadfield_eigen(double r, const ModelParams& params, const ReactionSpec& reaction,
                                            GridCounts grid, const EigenOptions& opt = {}) {
    if (!(r > 0.0)) throw ParameterDomainError("periodic_roadfield_eigen needs r > 0");
    return eigen_on_geometry(Geometry::periodic_half_strip(r, params.ell, grid.nx, grid.ny), params, reaction,
                             true, opt);
}

// --- truncation sweeps ---------------------------------------------------

/// Family of nested domains sharing one node lattice.
struct SweepFamily {
    GeometryKind kind = GeometryKind::TruncatedRoadField;
    double hx = 0.125;
    double hy = 0.125;
    double aspect = 1.0;  ///< H = aspect * R for rectangles
    int periods = 1;      ///< cells in x for periodic kinds
    bool road = true;     ///< couple the road when the geometry supports one
};

struct SweepPoint {
    double size = 0.0;
    double lambda = 0.0;
    double residual = 0.0;
    int iters = 0;
};

struct TruncationSweep {
    std::vector<SweepPoint> points;
    double limit_estimate = 0.0;
    bool extrapolated = false;
    bool monotone = true;
    std::string diagnostic;

    double last_value() const { return points.empty() ? 0.0 : points.back().lambda; }
    /// |lambda(size_{n-1}) - lambda(size_n)|.
    double last_increment() const {
        return points.size() < 2 ? 0.0 : std::abs(points[points.size() - 2].lambda - points.back().lambda);
    }
};

/// Geometric-decay extrapolation on the last three sweep values. The
/// increments are treated as a geometric sequence in the sweep index, which
/// also removes algebraic R^-2 tails exactly when the sizes double.
inline bool extrapolate_limit(const std::vector<SweepPoint>& pts, double& limit) {
    limit = pts.empty() ? 0.0 : pts.back().lambda;
    if (pts.size() < 3) return false;
    const double l1 = pts[pts.size() - 3].lambda;
    const double l2 = pts[pts.size() - 2].lambda;
    const double l3 = pts[pts.size() - 1].lambda;
    const double inc1 = l1 - l2;
    const double inc2 = l2 - l3;
    if (inc1 == 0.0 || inc2 == 0.0 || (inc1 > 0.0) != (inc2 > 0.0) || std::abs(inc2) >= std::abs(inc1))
        return false;
    const double q = inc2 / inc1;
    limit = l3 - inc2 * q / (1.0 - q);
    return true;
}

inline TruncationSweep truncation_sweep(const SweepFamily& family, std::span<const double> sizes,
                                        const ModelParams& params, const ReactionSpec& reaction,
                                        const EigenOptions& opt = {}) {
    if (sizes.size() < 3) throw ParameterDomainError("truncation_sweep needs at least 3 sizes");
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (!(sizes[k] > 0.0)) throw ParameterDomainError("truncation_sweep sizes must be positive");
        if (k > 0 && !(sizes[k] > sizes[k - 1]))
            throw ParameterDomainError("truncation_sweep sizes must be strictly increasing");
    }
    std::vector<double> owned(sizes.begin(), sizes.end());
    auto results = parallel_map(owned.size(), [&](std::size_t k) {
        const Geometry g = geometry_with_spacing(family.kind, owned[k], family.hx, family.hy, params.ell,
                                                 family.aspect, family.periods);
        const EigenResult e = eigen_on_geometry(g, params, reaction, family.road, opt);
        return SweepPoint{owned[k], e.lambda, e.residual, e.iters};
    });

    TruncationSweep sweep;
    sweep.points = std::move(results);
    for (std::size_t k = 1; k < sweep.points.size(); ++k) {
        const double rise = sweep.points[k].lambda - sweep.points[k - 1].lambda;
        if (rise > 1e-9) {
            sweep.monotone = false;
            sweep.diagnostic += "lambda increases by " + format_double(rise) + " from size " +
                                format_double(sweep.points[k - 1].size) + " to " +
                                format_double(sweep.points[k].size) + "; ";
        }
    }
    sweep.extrapolated = extrapolate_limit(sweep.points, sweep.limit_estimate);
    if (!sweep.extrapolated) sweep.diagnostic += "extrapolation not applicable, limit is the last value; ";
    return sweep;
}

/// CSV: size,lambda,residual,iters.
inline void write_sweep_csv(std::ostream& os, const TruncationSweep& sweep) {
    os << "size,lambda,residual,iters\n";
    for (const auto& p : sweep.points)
        os << format_double(p.size) << ',' << format_double(p.lambda) << ',' << format_double(p.residual) << ','
           << p.iters << '\n';
}

}  // namespace roadfield
