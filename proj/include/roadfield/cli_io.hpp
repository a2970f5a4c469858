#pragma once

#include "analysis.hpp"
#include "core_model.hpp"
#include "dynamics.hpp"
#include "eigensolve.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "grid.hpp"
#include "operators.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#ifndef ROADFIELD_VERSION_STRING
#define ROADFIELD_VERSION_STRING "0.1.0"
#endif

namespace roadfield {

using json = nlohmann::json;

/// Single eigenproblem for the `eigen` subcommand. `size` is in units of ell.
struct EigenTarget {
    GeometryKind geometry = GeometryKind::TruncatedRoadField;
    double size = 2.0;
    int periods = 1;
    bool road = true;
    bool operator==(const EigenTarget&) const = default;
};

struct OutputConfig {
    std::string directory = "out";
    bool emit_snapshots = false;
    bool emit_matrices = false;
    std::vector<double> snapshot_times;
    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    ModelParams model;
    ReactionSpec reaction;
    NumericsConfig numerics;
    EigenTarget eigen;
    OutputConfig outputs;
    bool operator==(const RunConfig&) const = default;
};

inline const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names{"eigen",       "sweep",     "evolve", "classify",
                                                "road-effect", "amplitude", "audit",  "validate"};
    return names;
}

namespace detail {

inline std::string child(const std::string& ptr, std::string_view key) { return ptr + "/" + std::string(key); }

inline void require_object(const json& j, const std::string& ptr) {
    if (!j.is_object()) throw ConfigError("expected an object", ptr.empty() ? "/" : ptr);
}

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& ptr) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key", child(ptr, key));
    }
}

inline const json& required(const json& j, const char* key, const std::string& ptr) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError("required field is missing", child(ptr, key));
    return *it;
}

inline double number(const json& v, const std::string& ptr) {
    if (!v.is_number()) throw ConfigError("expected a number", ptr);
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError("expected a finite number", ptr);
    return x;
}

inline void read_number(const json& j, const char* key, const std::string& ptr, double& out) {
    if (auto it = j.find(key); it != j.end()) out = number(*it, child(ptr, key));
}

inline void read_positive(const json& j, const char* key, const std::string& ptr, double& out) {
    read_number(j, key, ptr, out);
    if (!(out > 0.0)) throw ConfigError("must be > 0", child(ptr, key));
}

inline void read_int(const json& j, const char* key, const std::string& ptr, int& out, int min_value) {
    if (auto it = j.find(key); it != j.end()) {
        if (!it->is_number_integer()) throw ConfigError("expected an integer", child(ptr, key));
        const auto v = it->get<long long>();
        if (v < min_value) throw ConfigError("must be >= " + std::to_string(min_value), child(ptr, key));
        if (v > 1'000'000'000) throw ConfigError("too large", child(ptr, key));
        out = static_cast<int>(v);
    }
}

inline void read_bool(const json& j, const char* key, const std::string& ptr, bool& out) {
    if (auto it = j.find(key); it != j.end()) {
        if (!it->is_boolean()) throw ConfigError("expected a boolean", child(ptr, key));
        out = it->get<bool>();
    }
}

inline std::vector<double> number_list(const json& v, const std::string& ptr) {
    if (!v.is_array()) throw ConfigError("expected an array of numbers", ptr);
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], ptr + "/" + std::to_string(k)));
    return out;
}

/// Positive, strictly increasing list with at least `min_len` entries.
inline void read_sizes(const json& j, const char* key, const std::string& ptr, std::vector<double>& out,
                       std::size_t min_len) {
    auto it = j.find(key);
    if (it == j.end()) return;
    const std::string p = child(ptr, key);
    auto v = number_list(*it, p);
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!(v[k] > 0.0)) throw ConfigError("entries must be > 0", p + "/" + std::to_string(k));
        if (k > 0 && !(v[k] > v[k - 1])) throw ConfigError(std::string(key) + " strictly increasing", p);
    }
    if (v.size() < min_len) throw ConfigError("needs at least " + std::to_string(min_len) + " entries", p);
    out = std::move(v);
}

inline GeometryKind geometry_from_string(const std::string& s, const std::string& ptr) {
    for (auto k : {GeometryKind::TruncatedRoadField, GeometryKind::DirichletRect, GeometryKind::NeumannRect,
                   GeometryKind::PeriodicCell1D, GeometryKind::PeriodicStrip, GeometryKind::PeriodicHalfStrip})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown geometry '" + s + "'", ptr);
}

inline ModelParams parse_model(const json& j) {
    const std::string ptr = "/model";
    require_object(j, ptr);
    reject_unknown(j, {"D", "d", "nu", "mu", "c", "ell"}, ptr);
    ModelParams m;
    m.D = number(required(j, "D", ptr), ptr + "/D");
    m.d = number(required(j, "d", ptr), ptr + "/d");
    m.nu = number(required(j, "nu", ptr), ptr + "/nu");
    m.mu = number(required(j, "mu", ptr), ptr + "/mu");
    m.ell = number(required(j, "ell", ptr), ptr + "/ell");
    read_number(j, "c", ptr, m.c);
    for (auto [key, val] : std::initializer_list<std::pair<const char*, double>>{
             {"D", m.D}, {"d", m.d}, {"nu", m.nu}, {"mu", m.mu}, {"ell", m.ell}})
        if (!(val > 0.0)) throw ConfigError("must be > 0", child(ptr, key));
    if (m.c < 0.0) throw ConfigError("must be >= 0", ptr + "/c");
    return m;
}

inline ReactionSpec parse_reaction(const json& j, double ell) {
    const std::string ptr = "/reaction";
    require_object(j, ptr);
    const json& kind = required(j, "kind", ptr);
    if (!kind.is_string()) throw ConfigError("expected a string", ptr + "/kind");
    const std::string k = kind.get<std::string>();
    ReactionSpec r;
    r.ell = ell;
    if (k == "Homogeneous" || k == "LogisticPeriodic") {
        r.kind = k == "Homogeneous" ? ReactionKind::Homogeneous : ReactionKind::LogisticPeriodic;
        if (r.kind == ReactionKind::Homogeneous)
            reject_unknown(j, {"kind", "a0", "M", "alpha"}, ptr);
        else
            reject_unknown(j, {"kind", "a0", "a1", "M", "alpha"}, ptr);
        r.a0 = number(required(j, "a0", ptr), ptr + "/a0");
        read_number(j, "a1", ptr, r.a1);
    } else if (k == "Custom") {
        r.kind = ReactionKind::Custom;
        reject_unknown(j, {"kind", "a", "b", "p", "M", "alpha"}, ptr);
        r.a0 = 0.0;
        r.a_samples = number_list(required(j, "a", ptr), ptr + "/a");
        if (r.a_samples.empty()) throw ConfigError("needs at least one sample", ptr + "/a");
        read_number(j, "b", ptr, r.b);
        read_number(j, "p", ptr, r.p);
        if (!(r.p > 1.0)) throw ConfigError("must be > 1", ptr + "/p");
    } else {
        throw ConfigError("unknown reaction kind '" + k + "'", ptr + "/kind");
    }
    r.M = number(required(j, "M", ptr), ptr + "/M");
    if (!(r.M > 0.0)) throw ConfigError("must be > 0", ptr + "/M");
    read_positive(j, "alpha", ptr, r.alpha);
    return r;
}

inline NumericsConfig parse_numerics(const json& j) {
    const std::string ptr = "/numerics";
    require_object(j, ptr);
    reject_unknown(j,
                   {"hx", "hy", "dt", "tol", "maxiter", "sizes", "limit_sizes", "audit_sizes", "alphas", "t_max",
                    "delta_sign", "dyn_height", "periods_k", "steady_tol_rel", "decay_tol_rel", "aspect",
                    "log_stride"},
                   ptr);
    NumericsConfig n;
    read_positive(j, "hx", ptr, n.hx);
    read_positive(j, "hy", ptr, n.hy);
    read_positive(j, "dt", ptr, n.dt);
    read_positive(j, "tol", ptr, n.tol);
    read_int(j, "maxiter", ptr, n.maxiter, 1);
    read_sizes(j, "sizes", ptr, n.sizes, 3);
    read_sizes(j, "limit_sizes", ptr, n.limit_sizes, 3);
    read_sizes(j, "audit_sizes", ptr, n.audit_sizes, 1);
    read_sizes(j, "alphas", ptr, n.alphas, 1);
    read_positive(j, "t_max", ptr, n.t_max);
    read_positive(j, "delta_sign", ptr, n.delta_sign);
    read_positive(j, "dyn_height", ptr, n.dyn_height);
    read_int(j, "periods_k", ptr, n.periods_k, 1);
    read_positive(j, "steady_tol_rel", ptr, n.steady_tol_rel);
    read_positive(j, "decay_tol_rel", ptr, n.decay_tol_rel);
    read_positive(j, "aspect", ptr, n.aspect);
    read_int(j, "log_stride", ptr, n.log_stride, 1);
    return n;
}

inline EigenTarget parse_eigen(const json& j) {
    const std::string ptr = "/eigen";
    require_object(j, ptr);
    reject_unknown(j, {"geometry", "size", "periods", "road"}, ptr);
    EigenTarget e;
    if (auto it = j.find("geometry"); it != j.end()) {
        if (!it->is_string()) throw ConfigError("expected a string", ptr + "/geometry");
        e.geometry = geometry_from_string(it->get<std::string>(), ptr + "/geometry");
    }
    read_positive(j, "size", ptr, e.size);
    read_int(j, "periods", ptr, e.periods, 1);
    read_bool(j, "road", ptr, e.road);
    return e;
}

inline OutputConfig parse_outputs(const json& j) {
    const std::string ptr = "/outputs";
    require_object(j, ptr);
    reject_unknown(j, {"directory", "emit_snapshots", "emit_matrices", "snapshot_times"}, ptr);
    OutputConfig o;
    if (auto it = j.find("directory"); it != j.end()) {
        if (!it->is_string() || it->get<std::string>().empty())
            throw ConfigError("expected a nonempty string", ptr + "/directory");
        o.directory = it->get<std::string>();
    }
    read_bool(j, "emit_snapshots", ptr, o.emit_snapshots);
    read_bool(j, "emit_matrices", ptr, o.emit_matrices);
    read_sizes(j, "snapshot_times", ptr, o.snapshot_times, 0);
    return o;
}

}  // namespace detail

/// Parses and validates a JSON config. Absent optional fields take the
/// documented defaults; unknown keys are rejected.
inline RunConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    detail::require_object(doc, "");
    detail::reject_unknown(doc, {"model", "reaction", "numerics", "eigen", "outputs"}, "");
    RunConfig cfg;
    cfg.model = detail::parse_model(detail::required(doc, "model", ""));
    cfg.reaction = detail::parse_reaction(detail::required(doc, "reaction", ""), cfg.model.ell);
    if (auto it = doc.find("numerics"); it != doc.end()) cfg.numerics = detail::parse_numerics(*it);
    if (auto it = doc.find("eigen"); it != doc.end()) cfg.eigen = detail::parse_eigen(*it);
    if (auto it = doc.find("outputs"); it != doc.end()) cfg.outputs = detail::parse_outputs(*it);
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Full JSON form of a config with every default written out.
inline json serialize(const RunConfig& c) {
    json j;
    j["model"] = {{"D", c.model.D},   {"d", c.model.d}, {"nu", c.model.nu},
                  {"mu", c.model.mu}, {"c", c.model.c}, {"ell", c.model.ell}};
    json r;
    r["kind"] = to_string(c.reaction.kind);
    switch (c.reaction.kind) {
        case ReactionKind::LogisticPeriodic: r["a1"] = c.reaction.a1; [[fallthrough]];
        case ReactionKind::Homogeneous: r["a0"] = c.reaction.a0; break;
        case ReactionKind::Custom:
            r["a"] = c.reaction.a_samples;
            r["b"] = c.reaction.b;
            r["p"] = c.reaction.p;
            break;
    }
    r["M"] = c.reaction.M;
    r["alpha"] = c.reaction.alpha;
    j["reaction"] = r;
    const NumericsConfig& n = c.numerics;
    j["numerics"] = {{"hx", n.hx},
                     {"hy", n.hy},
                     {"dt", n.dt},
                     {"tol", n.tol},
                     {"maxiter", n.maxiter},
                     {"sizes", n.sizes},
                     {"limit_sizes", n.limit_sizes},
                     {"audit_sizes", n.audit_sizes},
                     {"alphas", n.alphas},
                     {"t_max", n.t_max},
                     {"delta_sign", n.delta_sign},
                     {"dyn_height", n.dyn_height},
                     {"periods_k", n.periods_k},
                     {"steady_tol_rel", n.steady_tol_rel},
                     {"decay_tol_rel", n.decay_tol_rel},
                     {"aspect", n.aspect},
                     {"log_stride", n.log_stride}};
    j["eigen"] = {{"geometry", to_string(c.eigen.geometry)},
                  {"size", c.eigen.size},
                  {"periods", c.eigen.periods},
                  {"road", c.eigen.road}};
    j["outputs"] = {{"directory", c.outputs.directory},
                    {"emit_snapshots", c.outputs.emit_snapshots},
                    {"emit_matrices", c.outputs.emit_matrices},
                    {"snapshot_times", c.outputs.snapshot_times}};
    return j;
}

/// FNV-1a of the canonical (sorted-key, compact) serialization.
inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a(serialize(c).dump())); }

/// Named (model, reaction) pair from a fixture file.
struct Fixture {
    std::string name;
    ModelParams model;
    ReactionSpec reaction;
    std::optional<double> expected_lambda1;  ///< recorded lambda_1(Omega)
    std::optional<double> expected_cell;     ///< recorded periodic cell value
};

/// Reads {"fixtures": [{"name", "model", "reaction", "expected"?}, ...]} with
/// the same schema rules as a run config. "expected" holds optional
/// "lambda1" and "cell" values.
inline std::vector<Fixture> load_fixtures(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read fixture file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    const json& list = detail::required(doc, "fixtures", "");
    if (!list.is_array()) throw ConfigError("expected an array", "/fixtures");
    std::vector<Fixture> out;
    for (std::size_t k = 0; k < list.size(); ++k) {
        const std::string ptr = "/fixtures/" + std::to_string(k);
        const json& f = list[k];
        detail::require_object(f, ptr);
        detail::reject_unknown(f, {"name", "model", "reaction", "expected"}, ptr);
        const json& name = detail::required(f, "name", ptr);
        if (!name.is_string()) throw ConfigError("expected a string", ptr + "/name");
        RunConfig cfg;
        try {
            cfg = parse_config(json{{"model", f.at("model")}, {"reaction", f.at("reaction")}}.dump());
        } catch (const ConfigError& e) {
            throw ConfigError(e.message(), ptr + e.pointer());
        } catch (const json::out_of_range&) {
            throw ConfigError("fixture needs model and reaction", ptr);
        }
        Fixture fx{name.get<std::string>(), cfg.model, cfg.reaction, std::nullopt, std::nullopt};
        if (f.contains("expected")) {
            const std::string eptr = ptr + "/expected";
            const json& e = f.at("expected");
            detail::require_object(e, eptr);
            detail::reject_unknown(e, {"lambda1", "cell"}, eptr);
            if (e.contains("lambda1")) fx.expected_lambda1 = detail::number(e.at("lambda1"), eptr + "/lambda1");
            if (e.contains("cell")) fx.expected_cell = detail::number(e.at("cell"), eptr + "/cell");
        }
        out.push_back(std::move(fx));
    }
    return out;
}

// --- reports -----------------------------------------------------------------

inline json to_json(const TruncationSweep& s) {
    json pts = json::array();
    for (const auto& p : s.points)
        pts.push_back({{"size", p.size}, {"lambda", p.lambda}, {"residual", p.residual}, {"iters", p.iters}});
    return {{"points", pts},
            {"limit_estimate", s.limit_estimate},
            {"last_value", s.last_value()},
            {"extrapolated", s.extrapolated},
            {"monotone", s.monotone},
            {"diagnostic", s.diagnostic}};
}

inline json to_json(const Lambda1Estimate& e) {
    json j{{"value", e.value}, {"method", e.method}, {"truncated_sweep", to_json(e.truncated)}};
    if (!e.half_strip.points.empty()) j["half_strip_sweep"] = to_json(e.half_strip);
    return j;
}

inline json to_json(const DichotomyVerdict& v) {
    json j{{"lambda1_estimate", v.lambda1_estimate},
           {"sign", to_string(v.sign)},
           {"predicted", to_string(v.predicted)},
           {"agreement", v.agreement},
           {"contradicted", v.contradicted},
           {"status", v.status},
           {"lambda1", to_json(v.lambda1)}};
    if (v.dynamics_run) {
        j["dynamics_outcome"] = to_string(v.dynamics_outcome);
        j["dynamics_time"] = v.dynamics_time;
        j["final_sup"] = v.final_sup;
        j["dynamics_height"] = v.dynamics_height;
        j["domain_lambda"] = v.domain_lambda;
        j["domain_lambda_doubled_height"] = v.domain_lambda_doubled;
    } else {
        j["dynamics_outcome"] = nullptr;
    }
    return j;
}

inline json to_json(const RoadEffectReport& r) {
    return {{"lambda_with_road", r.lambda_with_road},
            {"lambda_without_road", r.lambda_without_road},
            {"sign_with_road", to_string(r.sign_with)},
            {"sign_without_road", to_string(r.sign_without)},
            {"determinate", r.determinate},
            {"signs_agree", r.signs_agree},
            {"ordering_holds", r.ordering_holds},
            {"road_bound_holds", r.road_bound_holds},
            {"lambda1", to_json(r.lambda1)}};
}

inline json to_json(const AmplitudeReport& r) {
    json pts = json::array();
    for (const auto& p : r.points) pts.push_back({{"alpha", p.alpha}, {"lambda1", p.lambda1}, {"sign", to_string(p.sign)}});
    return {{"points", pts},
            {"mean_rate", r.mean_rate},
            {"max_rate", r.max_rate},
            {"sign_changes", r.sign_changes},
            {"transition_observed", r.transition_observed},
            {"pattern", r.pattern}};
}

inline json to_json(const OrderingReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"tolerance", c.tolerance}, {"passed", c.passed}});
    json j{{"checks", checks}, {"cell_lambda", r.cell_lambda}, {"all_passed", r.all_passed()}};
    if (!r.strip_sweep.points.empty()) j["strip_sweep"] = to_json(r.strip_sweep);
    if (!r.rect_sweep.points.empty()) j["rect_sweep"] = to_json(r.rect_sweep);
    return j;
}

inline json to_json(const ValidationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    return {{"checks", checks}, {"all_passed", r.all_passed()}, {"convention", r.convention}};
}

// --- subcommand runner -------------------------------------------------------

struct RunOptions {
    std::string out_dir;  ///< overrides outputs.directory when nonempty
    bool quiet = false;
};

/// Files written by one run. On failure every file written so far is removed.
class ArtifactSet {
public:
    explicit ArtifactSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const { return dir_; }
    const std::vector<std::string>& names() const { return names_; }

    /// Writes `name` (relative to the output directory) with `fill(stream)`.
    template <typename F>
    void write(const std::string& name, F&& fill) {
        const auto path = dir_ / name;
        std::filesystem::create_directories(path.parent_path());
        names_.push_back(name);
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error("cannot write " + path.string());
        fill(os);
        if (!os) throw Error("write failed for " + path.string());
    }

    void write_json(const std::string& name, const json& j) {
        write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    }

    void rollback() noexcept {
        std::error_code ec;
        for (const auto& n : names_) std::filesystem::remove(dir_ / n, ec);
        std::filesystem::remove(dir_ / "snapshots", ec);  // only if empty
        names_.clear();
    }

private:
    std::filesystem::path dir_;
    std::vector<std::string> names_;
};

namespace detail {

inline void ensure_writable(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("output directory " + dir.string() + " cannot be created: " + ec.message(),
                              "/outputs/directory");
    const auto probe = dir / ".roadfield_write_probe";
    {
        std::ofstream os(probe);
        if (!os) throw ConfigError("output directory " + dir.string() + " is not writable", "/outputs/directory");
    }
    std::filesystem::remove(probe, ec);
}

inline void write_eigenvector_csv(std::ostream& os, const DiscreteOperator& op, const EigenResult& e) {
    State s;
    s.geom = op.geom;
    s.u = e.vec_road;
    s.v = e.vec_field;
    write_state_csv(os, s);
}

inline std::string snapshot_name(double t) { return "snapshots/t_" + format_double(t) + ".csv"; }

inline int run_eigen(const RunConfig& c, ArtifactSet& out, std::ostream& log) {
    const Geometry g = geometry_with_spacing(c.eigen.geometry, c.eigen.size * c.model.ell, c.numerics.hx,
                                             c.numerics.hy, c.model.ell, c.numerics.aspect, c.eigen.periods);
    const bool coupled = c.eigen.road && g.supports_road();
    const DiscreteOperator op = coupled ? assemble_coupled_operator(g, c.model, c.reaction)
                                        : assemble_field_operator(g, c.model, c.reaction);
    const EigenResult e = principal_eigenpair(op, c.numerics.eigen());
    json j{{"geometry", to_string(g.kind)},
           {"coupled", coupled},
           {"nx", g.nx},
           {"ny", g.ny},
           {"hx", g.hx},
           {"hy", g.hy},
           {"order", op.order()},
           {"lambda", e.lambda},
           {"residual", e.residual},
           {"iters", e.iters},
           {"min_entry", e.min_entry()}};
    if (c.model.c == 0.0) j["rayleigh_quotient"] = rayleigh_quotient(e.vec_road, e.vec_field, op);
    out.write_json("report.json", j);
    out.write("eigenvector.csv", [&](std::ostream& os) { write_eigenvector_csv(os, op, e); });
    if (c.outputs.emit_matrices) out.write("matrix.txt", [&](std::ostream& os) { dump_matrix(op, os); });
    log << "lambda = " << format_double(e.lambda) << " (" << to_string(g.kind) << ", order " << op.order()
        << ", residual " << format_double(e.residual) << ")\n";
    return 0;
}

inline int run_sweep(const RunConfig& c, ArtifactSet& out, std::ostream& log) {
    const Lambda1Estimate est = estimate_lambda1(c.model, c.reaction, c.numerics);
    out.write("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, est.truncated); });
    if (!est.half_strip.points.empty())
        out.write("sweep_half_strip.csv", [&](std::ostream& os) { write_sweep_csv(os, est.half_strip); });
    out.write_json("report.json", to_json(est));
    if (c.outputs.emit_matrices) {
        const Geometry g = geometry_with_spacing(GeometryKind::TruncatedRoadField,
                                                 c.numerics.sizes.front() * c.model.ell, c.numerics.hx,
                                                 c.numerics.hy, c.model.ell, c.numerics.aspect);
        const DiscreteOperator op = assemble_coupled_operator(g, c.model, c.reaction);
        out.write("matrix.txt", [&](std::ostream& os) { dump_matrix(op, os); });
    }
    log << "truncated sweep: last " << format_double(est.truncated.last_value()) << ", limit "
        << format_double(est.truncated.limit_estimate) << (est.truncated.monotone ? " (monotone)" : " (NOT monotone)")
        << "\nlambda1 estimate = " << format_double(est.value) << " via " << est.method << '\n';
    return 0;
}

inline void write_outcome_artifacts(const RunConfig& c, const SteadyOutcome& o, ArtifactSet& out) {
    out.write("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, o.sup_history); });
    if (c.outputs.emit_snapshots) {
        for (const auto& s : o.snapshots)
            out.write(snapshot_name(s.t), [&](std::ostream& os) { write_state_csv(os, s); });
        out.write("final_state.csv", [&](std::ostream& os) { write_state_csv(os, o.state); });
    }
}

inline int run_evolve(const RunConfig& c, ArtifactSet& out, std::ostream& log) {
    const NumericsConfig& n = c.numerics;
    const Geometry dyn = dynamics_geometry(c.model, n.hx, n.hy, n.dyn_height * c.model.ell, n.periods_k);
    const State s0 = bump_datum(dyn, c.reaction, true);
    const double V = build_supersolution(c.model, c.reaction, s0).sup_v();
    EvolveOptions opt;
    opt.dt = n.dt;
    opt.t_max = n.t_max;
    opt.steady_tol = n.steady_tol_rel * V;
    opt.decay_tol = n.decay_tol_rel * V;
    opt.log_stride = n.log_stride;
    if (c.outputs.emit_snapshots) opt.snapshot_times = c.outputs.snapshot_times;
    const SteadyOutcome o = evolve(s0, c.model, c.reaction, opt);
    write_outcome_artifacts(c, o, out);
    json j{{"outcome", to_string(o.kind)},
           {"t_final", o.state.t},
           {"t_at_threshold", o.t_at_threshold},
           {"sup_u", o.state.sup_u()},
           {"sup_v", o.state.sup_v()},
           {"min_u", o.state.min_u()},
           {"min_v", o.state.min_v()},
           {"final_deriv_residual", o.final_deriv_residual},
           {"projection_events", o.projection_events},
           {"V", V}};
    if (o.kind == OutcomeKind::ConvergedPositive) {
        double flux = 0.0;
        for (double r : steady_exchange_residual(o.state, c.model, c.reaction)) flux = std::max(flux, std::abs(r));
        j["exchange_residual"] = flux;
    }
    out.write_json("report.json", j);
    log << "outcome " << to_string(o.kind) << " at t = " << format_double(o.state.t) << ", sup = "
        << format_double(o.state.sup()) << '\n';
    return 0;
}

inline int run_classify(const RunConfig& c, ArtifactSet& out, std::ostream& log) {
    SteadyOutcome o;
    const DichotomyVerdict v = classify(c.model, c.reaction, c.numerics, true, &o);
    write_outcome_artifacts(c, o, out);
    out.write_json("verdict.json", to_json(v));
    log << "lambda1 = " << format_double(v.lambda1_estimate) << " -> " << to_string(v.sign) << ", predicted "
        << to_string(v.predicted) << "; dynamics " << to_string(v.dynamics_outcome) << " (" << v.status << ")\n";
    return v.contradicted ? 1 : 0;
}

inline int run_road_effect(const RunConfig& c, ArtifactSet& out, std::ostream& log) {
    const RoadEffectReport r = road_effect(c.model, c.reaction, c.numerics);
    out.write_json("report.json", to_json(r));
    log << "with road " << format_double(r.lambda_with_road) << ", without road "
        << format_double(r.lambda_without_road) << "; signs agree: " << (r.signs_agree ? "yes" : "NO")
        << ", ordering: " << (r.ordering_holds ? "holds" : "VIOLATED") << '\n';
    return 0;
}

inline int run_amplitude(const RunConfig& c, ArtifactSet& out, std::ostream& log) {
    const AmplitudeReport r = amplitude_sweep(c.model, c.reaction, c.numerics.alphas, c.numerics);
    out.write("amplitude.csv", [&](std::ostream& os) {
        os << "alpha,lambda1,sign\n";
        for (const auto& p : r.points) {
            const double s = p.sign == Sign::Negative ? -1.0 : p.sign == Sign::NonNegative ? 1.0 : 0.0;
            write_csv_row(os, std::vector<double>{p.alpha, p.lambda1, s});
        }
    });
    out.write_json("report.json", to_json(r));
    log << "sign pattern " << r.pattern << " over " << r.points.size() << " amplitudes"
        << (r.transition_observed ? " (+ to - transition)" : "") << '\n';
    return 0;
}

inline int run_audit(const RunConfig& c, ArtifactSet& out, std::ostream& log) {
    const OrderingReport r = ordering_audit(c.model, c.reaction, c.numerics.audit_sizes, c.numerics);
    out.write_json("report.json", to_json(r));
    if (!r.all_passed()) {
        log << "audit failed: " << r.failures() << '\n';
        return 1;
    }
    log << "audit passed (" << r.checks.size() << " checks)\n";
    return 0;
}

inline int run_validate(const RunConfig& c, ArtifactSet& out, std::ostream& log) {
    const ValidationReport r = validate_hypotheses(c.reaction, 64);
    out.write_json("report.json", to_json(r));
    for (const auto& chk : r.checks)
        log << (chk.passed ? "pass " : "FAIL ") << chk.name << ": " << chk.detail << '\n';
    return r.all_passed() ? 0 : 1;
}

}  // namespace detail

/// Runs one subcommand and writes its artifacts plus manifest.json.
/// Returns 0 on success, 1 on numerical failure, 2 on configuration error.
inline int run_subcommand(const std::string& name, const RunConfig& config, const RunOptions& opts = {},
                          std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    std::ostringstream sink;
    std::ostream& out_log = opts.quiet ? static_cast<std::ostream&>(sink) : log;
    const std::filesystem::path dir = opts.out_dir.empty() ? config.outputs.directory : opts.out_dir;
    ArtifactSet artifacts(dir);
    const auto start = std::chrono::steady_clock::now();
    int status = 0;
    try {
        detail::ensure_writable(dir);
        if (name == "eigen")
            status = detail::run_eigen(config, artifacts, out_log);
        else if (name == "sweep")
            status = detail::run_sweep(config, artifacts, out_log);
        else if (name == "evolve")
            status = detail::run_evolve(config, artifacts, out_log);
        else if (name == "classify")
            status = detail::run_classify(config, artifacts, out_log);
        else if (name == "road-effect")
            status = detail::run_road_effect(config, artifacts, out_log);
        else if (name == "amplitude")
            status = detail::run_amplitude(config, artifacts, out_log);
        else if (name == "audit")
            status = detail::run_audit(config, artifacts, out_log);
        else if (name == "validate")
            status = detail::run_validate(config, artifacts, out_log);
        else
            throw ConfigError("unknown subcommand '" + name + "'");
    } catch (const ConfigError& e) {
        artifacts.rollback();
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        artifacts.rollback();
        err << "error: " << e.what() << '\n';
        return 1;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // the manifest lists itself last
    std::vector<std::string> listed = artifacts.names();
    listed.push_back("manifest.json");
    try {
        artifacts.write_json("manifest.json", {{"subcommand", name},
                                               {"config_hash", config_hash(config)},
                                               {"artifacts", listed},
                                               {"status", status},
                                               {"wall_clock", wall},
                                               {"version", ROADFIELD_VERSION_STRING}});
    } catch (const std::exception& e) {
        artifacts.rollback();
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return status;
}

}  // namespace roadfield
