#pragma once

#include "errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace roadfield {

/// Physical constants of the road-field system.
///
/// D is the diffusivity on the road, d in the field, nu the rate at which
/// field individuals at y = 0 jump onto the road, mu the rate at which road
/// individuals leave it, c the advection speed along x and ell the spatial
/// period of the environment.
struct ModelParams {
    double D = 1.0;
    double d = 1.0;
    double nu = 1.0;
    double mu = 1.0;
    double c = 0.0;
    double ell = 1.0;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!std::isfinite(v) || !(v > 0.0))
                throw ParameterDomainError(std::string("model parameter ") + name +
                                           " must be finite and > 0");
        };
        positive(D, "D");
        positive(d, "d");
        positive(nu, "nu");
        positive(mu, "mu");
        positive(ell, "ell");
        if (!std::isfinite(c) || c < 0.0)
            throw ParameterDomainError("model parameter c must be finite and >= 0");
    }

    bool operator==(const ModelParams&) const = default;
};

inline std::uint64_t hash_combine(std::uint64_t seed, double value) {
    // FNV-1a over the bit pattern
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    for (int k = 0; k < 8; ++k) {
        seed ^= (bits >> (8 * k)) & 0xffu;
        seed *= 0x100000001b3ull;
    }
    return seed;
}

inline std::uint64_t hash_value(const ModelParams& p) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (double v : {p.D, p.d, p.nu, p.mu, p.c, p.ell}) h = hash_combine(h, v);
    return h;
}

enum class ReactionKind { LogisticPeriodic, Homogeneous, Custom };

inline const char* to_string(ReactionKind k) {
    switch (k) {
        case ReactionKind::LogisticPeriodic: return "LogisticPeriodic";
        case ReactionKind::Homogeneous: return "Homogeneous";
        case ReactionKind::Custom: return "Custom";
    }
    return "?";
}

/// The nonlinearity f(x, v) of the field equation.
///
/// Built-in families:
///   LogisticPeriodic  f = alpha * v * (a0 + a1 cos(2 pi x / ell) - v)
///   Homogeneous       f = alpha * v * (a0 - v)
///   Custom            f = alpha * (a(x) v - b v^p), a(x) tabulated on a uniform
///                     periodic lattice of the cell and linearly interpolated.
///
/// The amplitude alpha is folded into `linearization`, so every consumer sees
/// a single function a_alpha(x) = f_v(x, 0).
struct ReactionSpec {
    ReactionKind kind = ReactionKind::Homogeneous;
    double a0 = 1.0;
    double a1 = 0.0;
    std::vector<double> a_samples;  // Custom only
    double b = 1.0;                 // Custom only
    double p = 2.0;                 // Custom only
    double alpha = 1.0;
    double M = 1.0;
    double ell = 1.0;

    static ReactionSpec homogeneous(double a0, double M = 1.0, double alpha = 1.0) {
        ReactionSpec r;
        r.kind = ReactionKind::Homogeneous;
        r.a0 = a0;
        r.M = M;
        r.alpha = alpha;
        return r;
    }

    static ReactionSpec logistic_periodic(double a0, double a1, double ell = 1.0, double M = 1.0,
                                          double alpha = 1.0) {
        ReactionSpec r;
        r.kind = ReactionKind::LogisticPeriodic;
        r.a0 = a0;
        r.a1 = a1;
        r.ell = ell;
        r.M = M;
        r.alpha = alpha;
        return r;
    }

    static ReactionSpec custom(std::vector<double> a_samples, double b, double p, double ell = 1.0,
                               double M = 1.0, double alpha = 1.0) {
        ReactionSpec r;
        r.kind = ReactionKind::Custom;
        r.a_samples = std::move(a_samples);
        r.b = b;
        r.p = p;
        r.ell = ell;
        r.M = M;
        r.alpha = alpha;
        return r;
    }

    /// Same reaction with a different amplitude multiplier.
    ReactionSpec with_alpha(double new_alpha) const {
        ReactionSpec r = *this;
        r.alpha = new_alpha;
        return r;
    }

    void validate() const {
        if (!std::isfinite(M) || !(M > 0.0))
            throw ParameterDomainError("reaction saturation bound M must be > 0");
        if (!std::isfinite(alpha) || !(alpha > 0.0))
            throw ParameterDomainError("reaction amplitude alpha must be > 0");
        if (!std::isfinite(ell) || !(ell > 0.0))
            throw ParameterDomainError("reaction period ell must be > 0");
        if (!std::isfinite(a0) || !std::isfinite(a1))
            throw ParameterDomainError("reaction coefficients must be finite");
        if (kind == ReactionKind::Custom) {
            if (a_samples.empty())
                throw ParameterDomainError("Custom reaction needs at least one a(x) sample");
            for (double s : a_samples)
                if (!std::isfinite(s)) throw ParameterDomainError("Custom a(x) samples must be finite");
            if (!std::isfinite(b) || !std::isfinite(p) || !(p > 1.0))
                throw ParameterDomainError("Custom reaction needs finite b and exponent p > 1");
        }
    }

    /// a(x) before the amplitude multiplier.
    double base_rate(double x) const {
        switch (kind) {
            case ReactionKind::Homogeneous: return a0;
            case ReactionKind::LogisticPeriodic:
                return a0 + a1 * std::cos(2.0 * std::numbers::pi * x / ell);
            case ReactionKind::Custom: {
                const auto n = static_cast<double>(a_samples.size());
                double s = x / ell;
                s -= std::floor(s);
                double pos = s * n;
                auto k = static_cast<std::size_t>(pos);
                if (k >= a_samples.size()) k = a_samples.size() - 1;
                double frac = pos - static_cast<double>(k);
                double left = a_samples[k];
                double right = a_samples[(k + 1) % a_samples.size()];
                return left + frac * (right - left);
            }
        }
        return 0.0;
    }

    /// f(x, v).
    double operator()(double x, double v) const {
        if (kind == ReactionKind::Custom)
            return alpha * (base_rate(x) * v - b * std::pow(std::max(v, 0.0), p) *
                                                   (v < 0.0 ? -1.0 : 1.0));
        return alpha * v * (base_rate(x) - v);
    }

    /// Upper bound of |f_v| on [0, vmax].
    double lipschitz_bound(double vmax) const {
        vmax = std::max(vmax, 0.0);
        const double amax = max_abs_rate();
        if (kind == ReactionKind::Custom)
            return alpha * (amax + std::abs(b) * p * std::pow(vmax, p - 1.0));
        return alpha * (amax + 2.0 * vmax);
    }

    double max_abs_rate() const {
        switch (kind) {
            case ReactionKind::Homogeneous: return std::abs(a0);
            case ReactionKind::LogisticPeriodic: return std::abs(a0) + std::abs(a1);
            case ReactionKind::Custom: {
                double m = 0.0;
                for (double s : a_samples) m = std::max(m, std::abs(s));
                return m;
            }
        }
        return 0.0;
    }

    /// Cell mean of the linearization (exact for every built-in family).
    double mean_linearization() const {
        switch (kind) {
            case ReactionKind::Homogeneous:
            case ReactionKind::LogisticPeriodic: return alpha * a0;
            case ReactionKind::Custom: {
                double s = 0.0;
                for (double v : a_samples) s += v;
                return alpha * s / static_cast<double>(a_samples.size());
            }
        }
        return 0.0;
    }

    /// Maximum of the linearization over the cell.
    double max_linearization() const {
        switch (kind) {
            case ReactionKind::Homogeneous: return alpha * a0;
            case ReactionKind::LogisticPeriodic: return alpha * (a0 + std::abs(a1));
            case ReactionKind::Custom:
                return alpha * *std::max_element(a_samples.begin(), a_samples.end());
        }
        return 0.0;
    }

    bool operator==(const ReactionSpec&) const = default;
};

/// f_v(x, 0), amplitude included.
inline double linearization(const ReactionSpec& reaction, double x) {
    return reaction.alpha * reaction.base_rate(x);
}

struct HypothesisCheck {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<HypothesisCheck> checks;
    /// Sign convention adopted for the linearized field operator.
    std::string convention =
        "linearized field operator L(psi) = d Lap psi + c d_x psi + f_v(x,0) psi "
        "(the minus sign on f_v in the operator triple is read as a typo)";

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
    const HypothesisCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

/// Samples the standing hypotheses on f on the lattice
/// x_i = i ell / samples (i < samples), v_j = 2 M j / samples (1 <= j <= samples).
inline ValidationReport validate_hypotheses(const ReactionSpec& reaction, int samples) {
    if (!std::isfinite(reaction.M) || !(reaction.M > 0.0))
        throw ParameterDomainError("reaction saturation bound M must be > 0");
    if (!std::isfinite(reaction.alpha) || !(reaction.alpha > 0.0))
        throw ParameterDomainError("reaction amplitude alpha must be > 0");
    if (samples < 16) throw ParameterDomainError("validate_hypotheses needs samples >= 16");
    reaction.validate();

    const double ell = reaction.ell;
    const double M = reaction.M;
    std::vector<double> xs(static_cast<std::size_t>(samples)), vs(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) xs[i] = ell * i / samples;
    for (int j = 1; j <= samples; ++j) vs[j - 1] = 2.0 * M * j / samples;

    ValidationReport report;
    HypothesisCheck zero{"zero_equilibrium", true, "f(x,0) = 0"};
    HypothesisCheck bound{"saturation_bound", true, "f(x,v) < 0 for v > M"};
    HypothesisCheck kpp{"kpp", true, "f(x,s)/s strictly decreasing in s"};
    HypothesisCheck per{"periodicity", true, "f(x+ell,v) = f(x,v)"};

    auto fail = [](HypothesisCheck& chk, double x, double v) {
        if (!chk.passed) return;
        chk.passed = false;
        chk.detail += " violated at x=" + std::to_string(x) + ", v=" + std::to_string(v);
    };

    for (double x : xs) {
        if (reaction(x, 0.0) != 0.0) fail(zero, x, 0.0);
        double prev_ratio = 0.0;
        for (std::size_t j = 0; j < vs.size(); ++j) {
            const double v = vs[j];
            const double f = reaction(x, v);
            if (v > M && !(f < 0.0)) fail(bound, x, v);
            const double ratio = f / v;
            if (j > 0 && !(ratio < prev_ratio)) fail(kpp, x, v);
            prev_ratio = ratio;
            const double shifted = reaction(x + ell, v);
            if (std::abs(shifted - f) > 1e-12 * (1.0 + std::abs(f))) fail(per, x, v);
        }
    }
    report.checks = {zero, bound, kpp, per};
    return report;
}

}  // namespace roadfield
