#pragma once

#include "core_model.hpp"
#include "eigensolve.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "grid.hpp"
#include "operators.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace roadfield {

/// Road and field densities at time t on a dynamics grid.
struct State {
    double t = 0.0;
    std::vector<double> u;  ///< road, length nx (empty without road)
    std::vector<double> v;  ///< field, index j*nx + i
    Geometry geom;

    bool has_road() const { return !u.empty(); }
    double sup_u() const { return u.empty() ? 0.0 : *std::max_element(u.begin(), u.end()); }
    double sup_v() const { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }
    double min_u() const { return u.empty() ? 0.0 : *std::min_element(u.begin(), u.end()); }
    double min_v() const { return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end()); }
    double sup() const { return std::max(sup_u(), sup_v()); }
};

/// Dynamics domain: periodic in x over `periods` cells, [0, height) in y with
/// a Dirichlet far field at y = height.
inline Geometry dynamics_geometry(const ModelParams& params, double hx, double hy, double height, int periods) {
    return geometry_with_spacing(GeometryKind::PeriodicHalfStrip, height, hx, hy, params.ell, 1.0, periods);
}

inline State zero_state(const Geometry& g, bool road) {
    State s;
    s.geom = g;
    if (road) s.u.assign(static_cast<std::size_t>(g.nx), 0.0);
    s.v.assign(static_cast<std::size_t>(g.field_nodes()), 0.0);
    return s;
}

/// Generic positive datum: a bump of height M/2 over the first period cell,
/// supported in y < ell. The road starts empty.
inline State bump_datum(const Geometry& g, const ReactionSpec& reaction, bool road) {
    State s = zero_state(g, road);
    const double ell = g.ell;
    for (int j = 0; j < g.ny; ++j) {
        const double y = g.y(j);
        if (y >= ell) break;
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x(i);
            if (x > ell) break;
            const double sx = std::sin(std::numbers::pi * x / ell);
            s.v[g.field_index(i, j)] = 0.5 * reaction.M * sx * sx * (1.0 - y / ell);
        }
    }
    return s;
}

namespace detail {

inline Eigen::VectorXd stack(const State& s) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(s.u.size() + s.v.size()));
    for (std::size_t k = 0; k < s.u.size(); ++k) x[static_cast<Eigen::Index>(k)] = s.u[k];
    for (std::size_t k = 0; k < s.v.size(); ++k) x[static_cast<Eigen::Index>(s.u.size() + k)] = s.v[k];
    return x;
}

inline void unstack(const Eigen::VectorXd& x, State& s) {
    for (std::size_t k = 0; k < s.u.size(); ++k) s.u[k] = x[static_cast<Eigen::Index>(k)];
    for (std::size_t k = 0; k < s.v.size(); ++k) s.v[k] = x[static_cast<Eigen::Index>(s.u.size() + k)];
}

/// Stacked reaction vector: zero on the road, f(x, v) on the field.
inline Eigen::VectorXd reaction_vector(const State& s, const ReactionSpec& reaction) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.u.size() + s.v.size()));
    const Geometry& g = s.geom;
    const auto off = static_cast<Eigen::Index>(s.u.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int k = g.field_index(i, j);
            f[off + k] = reaction(g.x(i), s.v[k]);
        }
    return f;
}

}  // namespace detail

/// Backward Euler on the linear transport/exchange operator with the reaction
/// taken explicitly at the old state. Factorizations of I + dt A are cached
/// per step size.
class ImexStepper {
public:
    ImexStepper(const Geometry& geom, const ModelParams& params, const ReactionSpec& reaction, bool road)
        : params_(params),
          reaction_(reaction),
          transport_(assemble_transport_operator(geom, params, road)) {
        reaction_.validate();
        detail::check_periods(params, reaction);
    }

    const DiscreteOperator& transport() const { return transport_; }
    /// Number of entries clipped from [-1e-12, 0) to 0 so far.
    long projection_events() const { return projections_; }

    /// Advances by dt, retrying with 2, 4, 8, 16 substeps if negative entries appear.
    State step(const State& s, double dt) {
        if (!(dt > 0.0)) throw ParameterDomainError("step_imex: dt must be > 0");
        check_conforming(s);
        const double lip = reaction_.lipschitz_bound(std::max(reaction_.M, s.sup()));
        if (dt * lip > 0.5)
            throw ParameterDomainError("step_imex: dt * Lip(f) = " + format_double(dt * lip) +
                                       " exceeds 1/2; reduce dt below " + format_double(0.5 / lip));
        for (int halvings = 0; halvings <= 4; ++halvings) {
            const int substeps = 1 << halvings;
            const double h = dt / substeps;
            State cur = s;
            bool ok = true;
            for (int k = 0; k < substeps && ok; ++k) ok = try_step(cur, h);
            if (ok) {
                cur.t = s.t + dt;
                return cur;
            }
        }
        throw StepRejected("step_imex: negative densities persist after 4 dt halvings at t = " +
                           format_double(s.t));
    }

    /// Stacked residual A x - F(x) of the stationary problem.
    Eigen::VectorXd stationary_residual(const State& s) const {
        check_conforming(s);
        const Eigen::VectorXd x = detail::stack(s);
        return transport_.matrix * x - detail::reaction_vector(s, reaction_);
    }

private:
    void check_conforming(const State& s) const {
        if (!(s.geom == transport_.geom)) throw GeometryError("state grid differs from the stepper grid");
        if (static_cast<int>(s.u.size()) != transport_.dim_road ||
            static_cast<int>(s.v.size()) != transport_.dim_field)
            throw DimensionError("state vectors do not conform to the stepper grid");
    }

    detail::SparseLUSolver& factor(double dt) {
        auto it = factors_.find(dt);
        if (it != factors_.end()) return *it->second;
        detail::ColMatrix m = transport_.matrix;
        m *= dt;
        for (int k = 0; k < m.outerSize(); ++k) m.coeffRef(k, k) += 1.0;
        auto lu = std::make_unique<detail::SparseLUSolver>();
        lu->compute(m);
        if (lu->info() != Eigen::Success) throw FactorizationError("I + dt A factorization failed");
        return *factors_.emplace(dt, std::move(lu)).first->second;
    }

    bool try_step(State& s, double h) {
        const Eigen::VectorXd x = detail::stack(s);
        const Eigen::VectorXd rhs = x + h * detail::reaction_vector(s, reaction_);
        Eigen::VectorXd next = factor(h).solve(rhs);
        long clipped = 0;
        for (Eigen::Index k = 0; k < next.size(); ++k) {
            if (next[k] < -1e-12) return false;
            if (next[k] < 0.0) {
                next[k] = 0.0;
                ++clipped;
            }
        }
        projections_ += clipped;
        detail::unstack(next, s);
        s.t += h;
        return true;
    }

    ModelParams params_;
    ReactionSpec reaction_;
    DiscreteOperator transport_;
    std::map<double, std::unique_ptr<detail::SparseLUSolver>> factors_;
    long projections_ = 0;
};

/// One IMEX step (factorizes on every call; use ImexStepper for runs).
inline State step_imex(const State& state, double dt, const ModelParams& params, const ReactionSpec& reaction) {
    ImexStepper stepper(state.geom, params, reaction, state.has_road());
    return stepper.step(state, dt);
}

/// Constant supersolution (nu/mu V, V) with V = max(M, sup v0, (mu/nu) sup u0).
inline State build_supersolution(const ModelParams& params, const ReactionSpec& reaction, const State& initial) {
    params.validate();
    reaction.validate();
    double sup_v0 = initial.v.empty() ? 0.0 : *std::max_element(initial.v.begin(), initial.v.end());
    double sup_u0 = initial.u.empty() ? 0.0 : *std::max_element(initial.u.begin(), initial.u.end());
    const double V = std::max({reaction.M, sup_v0, params.mu / params.nu * sup_u0});
    const double U = params.nu / params.mu * V;

    State s = initial;
    std::fill(s.v.begin(), s.v.end(), V);
    std::fill(s.u.begin(), s.u.end(), U);

    ImexStepper stepper(s.geom, params, reaction, s.has_road());
    const Eigen::VectorXd res = stepper.stationary_residual(s);
    const double tol = 1e-12 * std::max(1.0, V) * std::max(1.0, detail::infinity_norm(stepper.transport().matrix));
    if (res.minCoeff() < -tol)
        throw ParameterDomainError("constant state at V = " + format_double(V) +
                                   " is not a supersolution; check the saturation bound M");
    return s;
}

/// Overload taking the two initial profiles directly on `geom`.
inline State build_supersolution(const ModelParams& params, const ReactionSpec& reaction, const Geometry& geom,
                                 const std::vector<double>& u0, const std::vector<double>& v0) {
    State s;
    s.geom = geom;
    s.u = u0;
    s.v = v0;
    return build_supersolution(params, reaction, s);
}

struct SubsolutionInfo {
    double lambda = 0.0;  ///< truncated eigenvalue on the box
    double epsilon = 0.0;
    double max_residual = 0.0;
};

/// epsilon * (u_R, v_R): the principal eigenpair of the truncated road-field
/// box (-R, R) x [0, R) on the dynamics lattice, extended by zero, with epsilon
/// the largest power of 1/2 keeping A z - F(z) <= 0 and epsilon <= M/2.
inline State build_subsolution(const ModelParams& params, const ReactionSpec& reaction, double R,
                               const Geometry& dyn, SubsolutionInfo* info = nullptr) {
    if (dyn.kind != GeometryKind::PeriodicHalfStrip) throw GeometryError("subsolution needs a dynamics grid");
    const Geometry box = geometry_with_spacing(GeometryKind::TruncatedRoadField, R, dyn.hx, dyn.hy, params.ell);
    if (box.nx > dyn.nx) throw GeometryError("subsolution box is wider than the dynamics domain");
    if (box.ny > dyn.ny) throw GeometryError("subsolution box is taller than the dynamics domain");
    const DiscreteOperator op = assemble_coupled_operator(box, params, reaction);
    const EigenResult eig = principal_eigenpair(op, 1e-12, 20000);
    if (!(eig.lambda < 0.0))
        throw NoSubsolutionError("truncated eigenvalue " + format_double(eig.lambda) + " at R = " +
                                 format_double(R) + " is not negative; no eigenfunction subsolution");

    // box node i sits at x = (i + 1 - R/hx) hx, wrapped onto the periodic lattice
    const int offset = static_cast<int>(std::lround(R / dyn.hx));
    auto column = [&](int i) { return ((i + 1 - offset) % dyn.nx + dyn.nx) % dyn.nx; };
    State shape = zero_state(dyn, true);
    for (int i = 0; i < box.nx; ++i) {
        shape.u[column(i)] = eig.vec_road[i];
        for (int j = 0; j < box.ny; ++j) shape.v[dyn.field_index(column(i), j)] = eig.vec_field[box.field_index(i, j)];
    }

    ImexStepper stepper(dyn, params, reaction, true);
    double eps = 1.0;
    for (int k = 0; k < 80; ++k, eps *= 0.5) {
        if (eps > 0.5 * reaction.M) continue;
        State z = shape;
        for (double& x : z.u) x *= eps;
        for (double& x : z.v) x *= eps;
        const double worst = stepper.stationary_residual(z).maxCoeff();
        if (worst <= 1e-9 * eps) {
            if (info) *info = {eig.lambda, eps, worst};
            return z;
        }
    }
    throw NoSubsolutionError("no power of 1/2 makes the eigenfunction a subsolution");
}

enum class OutcomeKind { ConvergedPositive, DecayedToZero, Undecided };

inline const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::ConvergedPositive: return "ConvergedPositive";
        case OutcomeKind::DecayedToZero: return "DecayedToZero";
        case OutcomeKind::Undecided: return "Undecided";
    }
    return "?";
}

struct TrajectoryRow {
    double t = 0.0;
    double sup_u = 0.0;
    double sup_v = 0.0;
    double min_u = 0.0;
    double min_v = 0.0;
    double deriv_residual = 0.0;
};

struct EvolveOptions {
    double dt = 1e-2;
    double t_max = 1000.0;
    double steady_tol = 1e-8;  ///< absolute, per unit time
    double decay_tol = 1e-6;   ///< absolute
    int log_stride = 10;       ///< steps between history rows
    bool keep_states = false;  ///< store the state at every logged time
    bool stop_on_outcome = true;
    std::vector<double> snapshot_times;
};

struct SteadyOutcome {
    OutcomeKind kind = OutcomeKind::Undecided;
    State state;                  ///< steady state, or final state
    double t_at_threshold = 0.0;  ///< time the outcome criterion was first met
    std::vector<TrajectoryRow> sup_history;
    std::vector<State> logged_states;
    std::vector<State> snapshots;
    long projection_events = 0;
    double final_deriv_residual = 0.0;
};

namespace detail {

/// sup |x_new - x_old| / dt, skipping the field row next to the far-field boundary.
inline double deriv_residual(const State& a, const State& b, double dt) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.u.size(); ++k) m = std::max(m, std::abs(b.u[k] - a.u[k]));
    const Geometry& g = a.geom;
    const int rows = g.ny > 1 ? g.ny - 1 : g.ny;
    for (int j = 0; j < rows; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int k = g.field_index(i, j);
            m = std::max(m, std::abs(b.v[k] - a.v[k]));
        }
    return m / dt;
}

inline double interior_min(const State& s) {
    double m = s.u.empty() ? std::numeric_limits<double>::infinity() : s.min_u();
    const Geometry& g = s.geom;
    const int rows = g.ny > 1 ? g.ny - 1 : g.ny;
    for (int j = 0; j < rows; ++j)
        for (int i = 0; i < g.nx; ++i) m = std::min(m, s.v[g.field_index(i, j)]);
    return m;
}

inline TrajectoryRow history_row(const State& s, double deriv) {
    return {s.t, s.sup_u(), s.sup_v(), s.min_u(), s.min_v(), deriv};
}

inline SteadyOutcome run(const State& state0, const ModelParams& params, const ReactionSpec& reaction,
                         const EvolveOptions& opt, bool road) {
    if (!(opt.dt > 0.0) || !(opt.t_max > 0.0) || !(opt.steady_tol > 0.0) || !(opt.decay_tol > 0.0))
        throw ParameterDomainError("evolve: dt, t_max and tolerances must be > 0");
    if (opt.log_stride < 1) throw ParameterDomainError("evolve: log_stride must be >= 1");
    if (road != state0.has_road()) throw GeometryError("evolve: initial state road component mismatch");
    if (state0.min_u() < 0.0 || state0.min_v() < 0.0) throw ParameterDomainError("evolve: initial state must be >= 0");

    ImexStepper stepper(state0.geom, params, reaction, road);
    SteadyOutcome out;
    State cur = state0;
    const long steps = std::lround(std::ceil(opt.t_max / opt.dt - 1e-9));
    std::vector<double> pending = opt.snapshot_times;
    std::sort(pending.begin(), pending.end());
    std::size_t next_snapshot = 0;

    out.sup_history.push_back(history_row(cur, 0.0));
    if (opt.keep_states) out.logged_states.push_back(cur);
    bool decided = false;
    double deriv = 0.0;
    for (long n = 1; n <= steps; ++n) {
        State next = stepper.step(cur, opt.dt);
        deriv = deriv_residual(cur, next, opt.dt);
        cur = std::move(next);
        while (next_snapshot < pending.size() && pending[next_snapshot] <= cur.t + 1e-12) {
            out.snapshots.push_back(cur);
            ++next_snapshot;
        }

        OutcomeKind now = OutcomeKind::Undecided;
        if (cur.sup() < opt.decay_tol)
            now = OutcomeKind::DecayedToZero;
        else if (deriv < opt.steady_tol && interior_min(cur) > opt.decay_tol)
            now = OutcomeKind::ConvergedPositive;
        if (now != OutcomeKind::Undecided && !decided) {
            decided = true;
            out.t_at_threshold = cur.t;
        }
        if (now == OutcomeKind::Undecided) decided = false;
        const bool last = n == steps || (now != OutcomeKind::Undecided && opt.stop_on_outcome);
        if (n % opt.log_stride == 0 || last) {
            out.sup_history.push_back(history_row(cur, deriv));
            if (opt.keep_states) out.logged_states.push_back(cur);
        }
        if (last) {
            out.kind = now;
            break;
        }
    }
    out.state = cur;
    out.projection_events = stepper.projection_events();
    out.final_deriv_residual = deriv;
    return out;
}

}  // namespace detail

/// Integrates the road-field system until steady, decayed, or t_max.
inline SteadyOutcome evolve(const State& state0, const ModelParams& params, const ReactionSpec& reaction,
                            const EvolveOptions& opt) {
    if (!state0.geom.supports_road() || !state0.has_road())
        throw GeometryError("evolve needs a road-field state");
    return detail::run(state0, params, reaction, opt, true);
}

/// Integrates the roadless system (Neumann at y = 0).
inline SteadyOutcome evolve_roadless(const State& state0, const ModelParams& params, const ReactionSpec& reaction,
                                     const EvolveOptions& opt) {
    if (state0.has_road()) throw GeometryError("evolve_roadless takes a field-only state");
    return detail::run(state0, params, reaction, opt, false);
}

struct ComparisonReport {
    double max_violation = 0.0;  ///< max over time of max(0, low - high)
    double scale = 1.0;
    double worst_time = 0.0;
    bool pass = true;
};

/// Checks that a sub-seeded trajectory stays below a super-seeded one.
inline ComparisonReport monitor_comparison(const std::vector<State>& low, const std::vector<State>& high) {
    if (low.size() != high.size()) throw DimensionError("monitor_comparison: trajectories differ in length");
    ComparisonReport rep;
    double scale = 1.0;
    for (std::size_t n = 0; n < low.size(); ++n) {
        const State& a = low[n];
        const State& b = high[n];
        if (!(a.geom == b.geom) || a.u.size() != b.u.size() || a.v.size() != b.v.size())
            throw GeometryError("monitor_comparison: grids differ");
        if (std::abs(a.t - b.t) > 1e-9 * std::max(1.0, std::abs(a.t)))
            throw GeometryError("monitor_comparison: logged times differ");
        scale = std::max({scale, a.sup(), b.sup()});
        auto check = [&](double lo, double hi) {
            const double gap = lo - hi;
            if (gap > rep.max_violation) {
                rep.max_violation = gap;
                rep.worst_time = a.t;
            }
        };
        for (std::size_t k = 0; k < a.u.size(); ++k) check(a.u[k], b.u[k]);
        for (std::size_t k = 0; k < a.v.size(); ++k) check(a.v[k], b.v[k]);
    }
    rep.scale = scale;
    rep.pass = rep.max_violation <= 1e-10 * scale;
    return rep;
}

/// Exchange condition at a state of the discrete dynamics: the ghost value is
/// recovered from the y = 0 field row with zero time derivative, then
/// -d psi_y + nu psi - mu u is evaluated with the central difference.
inline std::vector<double> steady_exchange_residual(const State& s, const ModelParams& params,
                                                    const ReactionSpec& reaction) {
    if (!s.has_road()) throw GeometryError("steady_exchange_residual needs a road");
    const Geometry& g = s.geom;
    if (g.ny < 2) throw GeometryError("steady_exchange_residual needs ny >= 2");
    const double hx2 = g.hx * g.hx, hy2 = g.hy * g.hy;
    std::vector<double> res(static_cast<std::size_t>(g.nx));
    for (int i = 0; i < g.nx; ++i) {
        const int w = (i - 1 + g.nx) % g.nx, e = (i + 1) % g.nx;
        const double v0 = s.v[g.field_index(i, 0)];
        const double v1 = s.v[g.field_index(i, 1)];
        const double vw = s.v[g.field_index(w, 0)], ve = s.v[g.field_index(e, 0)];
        const double lap_x = (ve - 2.0 * v0 + vw) / hx2;
        const double adv = (ve - vw) / (2.0 * g.hx);
        // d (lap_x + (v1 - 2 v0 + ghost)/hy^2) + c adv + f = 0
        const double ghost = -hy2 / params.d * (params.d * lap_x + params.c * adv + reaction(g.x(i), v0)) - v1 + 2.0 * v0;
        const double dy = (v1 - ghost) / (2.0 * g.hy);
        res[i] = -params.d * dy + params.nu * v0 - params.mu * s.u[i];
    }
    return res;
}

/// CSV: t,sup_u,sup_v,min_u,min_v,deriv_residual.
inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
    os << "t,sup_u,sup_v,min_u,min_v,deriv_residual\n";
    for (const auto& r : rows) write_csv_row(os, std::vector<double>{r.t, r.sup_u, r.sup_v, r.min_u, r.min_v, r.deriv_residual});
}

/// Flat CSV grid: component,x,y,value (road rows use y = 0).
inline void write_state_csv(std::ostream& os, const State& s) {
    os << "component,x,y,value\n";
    const Geometry& g = s.geom;
    for (int i = 0; i < static_cast<int>(s.u.size()); ++i)
        os << "road," << format_double(g.x(i)) << ",0," << format_double(s.u[i]) << '\n';
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            os << "field," << format_double(g.x(i)) << ',' << format_double(g.y(j)) << ','
               << format_double(s.v[g.field_index(i, j)]) << '\n';
}

}  // namespace roadfield
