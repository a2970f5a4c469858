#pragma once

#include "core_model.hpp"
#include "dynamics.hpp"
#include "eigensolve.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "operators.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace roadfield {

/// Discretization and run-length knobs shared by the drivers. Sizes are in
/// units of the period ell.
struct NumericsConfig {
    double hx = 0.125;
    double hy = 0.125;
    double dt = 1e-2;
    double tol = 1e-10;
    int maxiter = 20000;
    std::vector<double> sizes{2, 4, 8, 16};                   ///< truncated road-field sweep
    std::vector<double> limit_sizes{16, 32, 64, 128, 256, 512};  ///< periodic half-strip sweep
    std::vector<double> audit_sizes{1, 2, 4};                 ///< ordering audit rectangles
    std::vector<double> alphas{0.1, 1, 10, 100};
    double t_max = 1000.0;
    double delta_sign = 1e-3;
    double dyn_height = 8.0;  ///< dynamics domain height, units of ell
    int periods_k = 1;
    double steady_tol_rel = 1e-8;  ///< per unit time, relative to V
    double decay_tol_rel = 1e-6;   ///< relative to V
    double aspect = 1.0;           ///< H / R for rectangles
    int log_stride = 10;

    EigenOptions eigen() const { return {tol, maxiter}; }
    bool operator==(const NumericsConfig&) const = default;
};

enum class Sign { Negative, NonNegative, Indeterminate };
enum class Prediction { Persistence, Extinction, Unknown };

inline const char* to_string(Sign s) {
    switch (s) {
        case Sign::Negative: return "Negative";
        case Sign::NonNegative: return "NonNegative";
        case Sign::Indeterminate: return "Indeterminate";
    }
    return "?";
}

inline const char* to_string(Prediction p) {
    switch (p) {
        case Prediction::Persistence: return "Persistence";
        case Prediction::Extinction: return "Extinction";
        case Prediction::Unknown: return "Unknown";
    }
    return "?";
}

inline Sign classify_sign(double lambda, double delta) {
    if (lambda <= -delta) return Sign::Negative;
    if (lambda >= delta) return Sign::NonNegative;
    return Sign::Indeterminate;
}

inline Prediction predict(Sign s) {
    switch (s) {
        case Sign::Negative: return Prediction::Persistence;
        case Sign::NonNegative: return Prediction::Extinction;
        case Sign::Indeterminate: return Prediction::Unknown;
    }
    return Prediction::Unknown;
}

/// lambda_1(Omega) from coupled sweeps.
///
/// At c = 0 the value is the limit of the periodic half-strip sweep (the
/// generalized and periodic eigenvalues coincide there); the truncated
/// road-field sweep is always run as the monotone cross-check. For c != 0 the
/// truncated sweep limit is the estimate.
struct Lambda1Estimate {
    double value = 0.0;
    TruncationSweep truncated;
    TruncationSweep half_strip;  ///< empty when c != 0
    std::string method;
};

inline std::vector<double> scaled_sizes(const std::vector<double>& sizes, double ell) {
    std::vector<double> out;
    out.reserve(sizes.size());
    for (double s : sizes) out.push_back(s * ell);
    return out;
}

inline Lambda1Estimate estimate_lambda1(const ModelParams& params, const ReactionSpec& reaction,
                                        const NumericsConfig& num) {
    Lambda1Estimate est;
    const auto sizes = scaled_sizes(num.sizes, params.ell);
    SweepFamily box{GeometryKind::TruncatedRoadField, num.hx, num.hy, num.aspect, 1, true};
    est.truncated = truncation_sweep(box, sizes, params, reaction, num.eigen());
    if (params.c == 0.0) {
        const auto heights = scaled_sizes(num.limit_sizes, params.ell);
        SweepFamily strip{GeometryKind::PeriodicHalfStrip, num.hx, num.hy, 1.0, 1, true};
        est.half_strip = truncation_sweep(strip, heights, params, reaction, num.eigen());
        est.value = est.half_strip.limit_estimate;
        est.method = "periodic half-strip sweep";
    } else {
        est.value = est.truncated.limit_estimate;
        est.method = "truncated road-field sweep";
    }
    return est;
}

/// Periodic cell eigenvalue on the x lattice of `num` (lambda_p without road).
inline EigenResult cell_eigen(const ModelParams& params, const ReactionSpec& reaction, const NumericsConfig& num) {
    const Geometry g = geometry_with_spacing(GeometryKind::PeriodicCell1D, params.ell, num.hx, num.hy, params.ell);
    if (g.nx < 8) throw ParameterDomainError("cell eigenproblem needs hx <= ell / 8");
    return eigen_on_geometry(g, params, reaction, false, num.eigen());
}

// --- dichotomy ---------------------------------------------------------------

struct DichotomyVerdict {
    Lambda1Estimate lambda1;
    double lambda1_estimate = 0.0;
    Sign sign = Sign::Indeterminate;
    Prediction predicted = Prediction::Unknown;
    bool dynamics_run = false;
    OutcomeKind dynamics_outcome = OutcomeKind::Undecided;
    double dynamics_time = 0.0;
    double final_sup = 0.0;
    double dynamics_height = 0.0;        ///< field height of the dynamics domain
    double domain_lambda = 0.0;          ///< principal eigenvalue of the dynamics domain
    double domain_lambda_doubled = 0.0;  ///< same at twice the height
    bool agreement = false;     ///< determinate prediction matched by a decided outcome
    bool contradicted = false;  ///< determinate prediction and the opposite outcome
    /// "confirmed", "not contradicted", "contradicted" or "not asserted".
    std::string status;
};

inline bool outcome_matches(Prediction p, OutcomeKind k) {
    return (p == Prediction::Persistence && k == OutcomeKind::ConvergedPositive) ||
           (p == Prediction::Extinction && k == OutcomeKind::DecayedToZero);
}

/// Generic positive datum run used by classify, on a domain of field height `height`.
inline SteadyOutcome dichotomy_run(const ModelParams& params, const ReactionSpec& reaction,
                                   const NumericsConfig& num, double height) {
    const Geometry dyn = dynamics_geometry(params, num.hx, num.hy, height, num.periods_k);
    const State s0 = bump_datum(dyn, reaction, true);
    const double V = build_supersolution(params, reaction, s0).sup_v();
    EvolveOptions opt;
    opt.dt = num.dt;
    opt.t_max = num.t_max;
    opt.steady_tol = num.steady_tol_rel * V;
    opt.decay_tol = num.decay_tol_rel * V;
    opt.log_stride = num.log_stride;
    return evolve(s0, params, reaction, opt);
}

inline SteadyOutcome dichotomy_run(const ModelParams& params, const ReactionSpec& reaction,
                                   const NumericsConfig& num) {
    return dichotomy_run(params, reaction, num, num.dyn_height * params.ell);
}

/// Principal eigenvalue of the linearization on a dynamics domain of field height `height`.
inline double dynamics_domain_lambda(const ModelParams& params, const ReactionSpec& reaction,
                                     const NumericsConfig& num, double height) {
    const Geometry g = dynamics_geometry(params, num.hx, num.hy, height, 1);
    return periodic_roadfield_eigen(height, params, reaction, {g.nx, g.ny}, num.eigen()).lambda;
}

inline DichotomyVerdict classify(const ModelParams& params, const ReactionSpec& reaction, const NumericsConfig& num,
                                 bool run_dynamics = true, SteadyOutcome* outcome = nullptr) {
    params.validate();
    if (params.c != 0.0) throw ParameterDomainError("classify needs c = 0");
    DichotomyVerdict v;
    v.lambda1 = estimate_lambda1(params, reaction, num);
    v.lambda1_estimate = v.lambda1.value;
    v.sign = classify_sign(v.lambda1_estimate, num.delta_sign);
    v.predicted = predict(v.sign);
    if (run_dynamics) {
        // a persistence prediction is only testable on a domain whose own
        // eigenvalue is negative; double the height until it is
        const double cap = num.limit_sizes.empty() ? num.dyn_height * params.ell
                                                   : std::max(num.dyn_height, num.limit_sizes.back()) * params.ell;
        double h = num.dyn_height * params.ell;
        double lam_h = dynamics_domain_lambda(params, reaction, num, h);
        while (v.predicted == Prediction::Persistence && lam_h >= 0.0 && 2.0 * h <= cap) {
            h *= 2.0;
            lam_h = dynamics_domain_lambda(params, reaction, num, h);
        }
        v.dynamics_height = h;
        v.domain_lambda = lam_h;
        v.domain_lambda_doubled = dynamics_domain_lambda(params, reaction, num, 2.0 * h);
        SteadyOutcome out = dichotomy_run(params, reaction, num, h);
        v.dynamics_run = true;
        v.dynamics_outcome = out.kind;
        v.dynamics_time = out.state.t;
        v.final_sup = out.state.sup();
        if (outcome) *outcome = std::move(out);
    }
    if (v.predicted == Prediction::Unknown || !v.dynamics_run) {
        v.status = "not asserted";
    } else if (v.dynamics_outcome == OutcomeKind::Undecided) {
        v.status = "not contradicted";
    } else if (outcome_matches(v.predicted, v.dynamics_outcome)) {
        v.agreement = true;
        v.status = "confirmed";
    } else {
        v.contradicted = true;
        v.status = "contradicted";
    }
    return v;
}

// --- road effect -------------------------------------------------------------

struct RoadEffectReport {
    double lambda_with_road = 0.0;
    double lambda_without_road = 0.0;
    Sign sign_with = Sign::Indeterminate;
    Sign sign_without = Sign::Indeterminate;
    bool determinate = false;  ///< both signs outside the margin
    bool signs_agree = true;   ///< only meaningful when determinate
    bool ordering_holds = true;
    bool road_bound_holds = true;  ///< lambda_with <= mu + 1e-6
    Lambda1Estimate lambda1;
};

inline RoadEffectReport road_effect(const ModelParams& params, const ReactionSpec& reaction,
                                    const NumericsConfig& num) {
    params.validate();
    if (params.c != 0.0) throw ParameterDomainError("road_effect needs c = 0");
    RoadEffectReport r;
    r.lambda1 = estimate_lambda1(params, reaction, num);
    r.lambda_with_road = r.lambda1.value;
    r.lambda_without_road = cell_eigen(params, reaction, num).lambda;
    r.sign_with = classify_sign(r.lambda_with_road, num.delta_sign);
    r.sign_without = classify_sign(r.lambda_without_road, num.delta_sign);
    r.determinate = r.sign_with != Sign::Indeterminate && r.sign_without != Sign::Indeterminate;
    r.signs_agree = !r.determinate || r.sign_with == r.sign_without;
    r.ordering_holds = r.lambda_without_road - r.lambda_with_road >= -1e-6;
    r.road_bound_holds = r.lambda_with_road <= params.mu + 1e-6;
    return r;
}

// --- amplitude sweep ---------------------------------------------------------

struct AmplitudePoint {
    double alpha = 0.0;
    double lambda1 = 0.0;
    Sign sign = Sign::Indeterminate;
};

struct AmplitudeReport {
    std::vector<AmplitudePoint> points;
    double mean_rate = 0.0;  ///< cell mean of a at alpha = 1
    double max_rate = 0.0;   ///< cell max of a at alpha = 1
    int sign_changes = 0;    ///< among determinate points
    bool transition_observed = false;  ///< first point positive, last negative
    std::string pattern;               ///< e.g. "++--"
};

/// Per-alpha classification of lambda_1(Omega, alpha). Only the endpoint signs
/// are interpreted; monotonicity in alpha is not claimed.
inline AmplitudeReport amplitude_sweep(const ModelParams& params, const ReactionSpec& base,
                                       const std::vector<double>& alphas, const NumericsConfig& num) {
    params.validate();
    if (alphas.empty()) throw ParameterDomainError("amplitude_sweep needs at least one alpha");
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        if (!(alphas[k] > 0.0)) throw ParameterDomainError("amplitude_sweep alphas must be > 0");
        if (k > 0 && !(alphas[k] > alphas[k - 1]))
            throw ParameterDomainError("amplitude_sweep alphas must be strictly increasing");
    }
    const ReactionSpec unit = base.with_alpha(1.0);
    AmplitudeReport rep;
    // trapezoidal quadrature on a fine periodic lattice
    constexpr int n = 4096;
    double sum = 0.0, mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double a = linearization(unit, unit.ell * i / n);
        sum += a;
        mx = std::max(mx, a);
    }
    rep.mean_rate = sum / n;
    rep.max_rate = mx;
    if (!(rep.mean_rate < 0.0))
        throw ParameterDomainError("amplitude_sweep needs a base rate with negative cell mean (got " +
                                   format_double(rep.mean_rate) + ")");

    // sweeps are already parallel inside; run alphas sequentially
    for (double alpha : alphas) {
        const double lam = estimate_lambda1(params, base.with_alpha(alpha), num).value;
        rep.points.push_back({alpha, lam, classify_sign(lam, num.delta_sign)});
    }
    Sign prev = Sign::Indeterminate;
    for (const auto& p : rep.points) {
        rep.pattern += p.sign == Sign::Negative ? '-' : p.sign == Sign::NonNegative ? '+' : '0';
        if (p.sign == Sign::Indeterminate) continue;
        if (prev != Sign::Indeterminate && p.sign != prev) ++rep.sign_changes;
        prev = p.sign;
    }
    rep.transition_observed =
        rep.points.front().sign == Sign::NonNegative && rep.points.back().sign == Sign::Negative;
    return rep;
}

// --- ordering audit ----------------------------------------------------------

struct OrderingCheck {
    std::string name;
    double lhs = 0.0;  ///< asserted lhs >= rhs - tolerance
    double rhs = 0.0;
    double tolerance = 0.0;
    bool passed = true;
};

struct OrderingReport {
    std::vector<OrderingCheck> checks;
    double cell_lambda = 0.0;
    TruncationSweep strip_sweep;  ///< c = 0 only
    TruncationSweep rect_sweep;   ///< c = 0 only
    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
    std::string failures() const {
        std::string s;
        for (const auto& c : checks)
            if (!c.passed)
                s += c.name + ": " + format_double(c.lhs) + " vs " + format_double(c.rhs) + "; ";
        return s;
    }
};

namespace detail {

inline OrderingCheck ge_check(std::string name, double lhs, double rhs, double tol) {
    return {std::move(name), lhs, rhs, tol, lhs >= rhs - tol};
}

inline OrderingCheck near_check(std::string name, double value, double target, double tol) {
    return {std::move(name), value, target, tol, std::abs(value - target) <= tol};
}

}  // namespace detail

/// Audits, on one node lattice:
///   (i)   lambda(Dirichlet rect R) >= lambda(coupled box 3R) - 1e-6,
///   (ii)  lambda_p(cell) <= lambda_p(strip r = max(R, H)) <= lambda(rect R),
///   (iii) at c = 0, agreement of the cell value with the strip and rect limits
///         within max(1e-3, 2 * last sweep increment).
/// `sizes` and `num.sizes` are in units of ell.
inline OrderingReport ordering_audit(const ModelParams& params, const ReactionSpec& reaction,
                                     const std::vector<double>& sizes, const NumericsConfig& num) {
    params.validate();
    if (sizes.empty()) throw ParameterDomainError("ordering_audit needs at least one size");
    const double ell = params.ell;
    const EigenOptions eo = num.eigen();
    OrderingReport rep;
    rep.cell_lambda = cell_eigen(params, reaction, num).lambda;

    struct Row {
        double rect, box, strip;
    };
    auto rows = parallel_map(sizes.size(), [&](std::size_t k) {
        const double R = sizes[k] * ell;
        const double H = num.aspect * R;
        const Geometry rect =
            geometry_with_spacing(GeometryKind::DirichletRect, R, num.hx, num.hy, ell, num.aspect);
        const Geometry box =
            geometry_with_spacing(GeometryKind::TruncatedRoadField, 3.0 * R, num.hx, num.hy, ell, num.aspect);
        // enough periods that the rectangle fits inside one strip window
        const int periods = std::max(1, static_cast<int>(std::ceil(2.0 * R / ell - 1e-9)));
        const Geometry strip =
            geometry_with_spacing(GeometryKind::PeriodicStrip, std::max(R, H), num.hx, num.hy, ell, 1.0, periods);
        return Row{eigen_on_geometry(rect, params, reaction, false, eo).lambda,
                   eigen_on_geometry(box, params, reaction, true, eo).lambda,
                   eigen_on_geometry(strip, params, reaction, false, eo).lambda};
    });
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        const std::string tag = "R=" + format_double(sizes[k] * ell);
        rep.checks.push_back(detail::ge_check("rect(R) >= coupled(3R), " + tag, rows[k].rect, rows[k].box, 1e-6));
        rep.checks.push_back(detail::ge_check("strip >= cell, " + tag, rows[k].strip, rep.cell_lambda, 1e-9));
        rep.checks.push_back(detail::ge_check("rect >= strip, " + tag, rows[k].rect, rows[k].strip, 1e-9));
    }

    if (params.c == 0.0) {
        const auto lim_sizes = scaled_sizes(num.sizes, ell);
        SweepFamily strip{GeometryKind::PeriodicStrip, num.hx, num.hy, 1.0, 1, false};
        SweepFamily rect{GeometryKind::DirichletRect, num.hx, num.hy, num.aspect, 1, false};
        rep.strip_sweep = truncation_sweep(strip, lim_sizes, params, reaction, eo);
        rep.rect_sweep = truncation_sweep(rect, lim_sizes, params, reaction, eo);
        const double tol_s = std::max(1e-3, 2.0 * rep.strip_sweep.last_increment());
        const double tol_r = std::max(1e-3, 2.0 * rep.rect_sweep.last_increment());
        rep.checks.push_back(
            detail::near_check("strip limit = cell", rep.strip_sweep.limit_estimate, rep.cell_lambda, tol_s));
        rep.checks.push_back(
            detail::near_check("rect limit = cell", rep.rect_sweep.limit_estimate, rep.cell_lambda, tol_r));
        rep.checks.push_back(detail::near_check("rect limit = strip limit", rep.rect_sweep.limit_estimate,
                                                rep.strip_sweep.limit_estimate, std::max(tol_s, tol_r)));
    }
    return rep;
}

}  // namespace roadfield
