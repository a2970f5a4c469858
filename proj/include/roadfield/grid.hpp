#pragma once

#include "errors.hpp"

#include <cmath>
#include <string>

namespace roadfield {

enum class GeometryKind {
    TruncatedRoadField,  ///< (-R,R) x [0,H): road at y=0, Dirichlet elsewhere
    DirichletRect,       ///< (-R,R) x (0,H): Dirichlet on all sides
    NeumannRect,         ///< (-R,R) x [0,H): Neumann at y=0, Dirichlet elsewhere
    PeriodicCell1D,      ///< periodic interval of `periods` cells
    PeriodicStrip,       ///< periodic in x, Dirichlet at y = +-r
    PeriodicHalfStrip,   ///< periodic in x, [0,r) with road (coupled) or Neumann (field only) at y=0
};

inline const char* to_string(GeometryKind k) {
    switch (k) {
        case GeometryKind::TruncatedRoadField: return "TruncatedRoadField";
        case GeometryKind::DirichletRect: return "DirichletRect";
        case GeometryKind::NeumannRect: return "NeumannRect";
        case GeometryKind::PeriodicCell1D: return "PeriodicCell1D";
        case GeometryKind::PeriodicStrip: return "PeriodicStrip";
        case GeometryKind::PeriodicHalfStrip: return "PeriodicHalfStrip";
    }
    return "?";
}

/// Structured node layout of one of the model domains.
///
/// Only unknown nodes are stored: Dirichlet boundary nodes are eliminated,
/// while y = 0 rows carrying a Neumann or exchange condition are kept.
/// Node (i, j) sits at (x(i), y(j)).
struct Geometry {
    GeometryKind kind = GeometryKind::PeriodicCell1D;
    double R = 0.0;     ///< half-width (rectangles)
    double H = 0.0;     ///< height (rectangles)
    double r = 0.0;     ///< strip half-height / half-strip height
    double ell = 1.0;   ///< period (periodic kinds)
    int periods = 1;    ///< number of cells in x (periodic kinds)
    int nx = 0;
    int ny = 0;
    double hx = 0.0;
    double hy = 0.0;

    bool periodic_x() const {
        return kind == GeometryKind::PeriodicCell1D || kind == GeometryKind::PeriodicStrip ||
               kind == GeometryKind::PeriodicHalfStrip;
    }
    /// y = 0 row is an unknown row closed by a ghost node (Neumann or exchange).
    bool ghost_bottom() const {
        return kind == GeometryKind::TruncatedRoadField || kind == GeometryKind::NeumannRect ||
               kind == GeometryKind::PeriodicHalfStrip;
    }
    bool supports_road() const {
        return kind == GeometryKind::TruncatedRoadField || kind == GeometryKind::PeriodicHalfStrip;
    }
    bool one_dimensional() const { return kind == GeometryKind::PeriodicCell1D; }
    int field_rows() const { return one_dimensional() ? 1 : ny; }
    int field_nodes() const { return nx * field_rows(); }

    double extent_x() const { return periodic_x() ? periods * ell : 2.0 * R; }

    double x(int i) const { return periodic_x() ? i * hx : -R + (i + 1) * hx; }
    double y(int j) const {
        switch (kind) {
            case GeometryKind::DirichletRect: return (j + 1) * hy;
            case GeometryKind::PeriodicStrip: return -r + (j + 1) * hy;
            case GeometryKind::PeriodicCell1D: return 0.0;
            default: return j * hy;
        }
    }

    int field_index(int i, int j) const { return j * nx + i; }

    bool operator==(const Geometry&) const = default;

    // --- constructors by node count --------------------------------------

    static Geometry truncated_road_field(double R, double H, int nx, int ny) {
        Geometry g;
        g.kind = GeometryKind::TruncatedRoadField;
        g.R = R;
        g.H = H;
        g.nx = nx;
        g.ny = ny;
        g.hx = 2.0 * R / (nx + 1);
        g.hy = H / ny;
        g.check();
        return g;
    }
    static Geometry dirichlet_rect(double R, double H, int nx, int ny) {
        Geometry g;
        g.kind = GeometryKind::DirichletRect;
        g.R = R;
        g.H = H;
        g.nx = nx;
        g.ny = ny;
        g.hx = 2.0 * R / (nx + 1);
        g.hy = H / (ny + 1);
        g.check();
        return g;
    }
    static Geometry neumann_rect(double R, double H, int nx, int ny) {
        Geometry g;
        g.kind = GeometryKind::NeumannRect;
        g.R = R;
        g.H = H;
        g.nx = nx;
        g.ny = ny;
        g.hx = 2.0 * R / (nx + 1);
        g.hy = H / ny;
        g.check();
        return g;
    }
    static Geometry periodic_cell(double ell, int nx, int periods = 1) {
        Geometry g;
        g.kind = GeometryKind::PeriodicCell1D;
        g.ell = ell;
        g.periods = periods;
        g.nx = nx;
        g.ny = 0;
        g.hx = periods * ell / nx;
        g.check();
        return g;
    }
    static Geometry periodic_strip(double r, double ell, int nx, int ny, int periods = 1) {
        Geometry g;
        g.kind = GeometryKind::PeriodicStrip;
        g.r = r;
        g.ell = ell;
        g.periods = periods;
        g.nx = nx;
        g.ny = ny;
        g.hx = periods * ell / nx;
        g.hy = 2.0 * r / (ny + 1);
        g.check();
        return g;
    }
    static Geometry periodic_half_strip(double r, double ell, int nx, int ny, int periods = 1) {
        Geometry g;
        g.kind = GeometryKind::PeriodicHalfStrip;
        g.r = r;
        g.ell = ell;
        g.periods = periods;
        g.nx = nx;
        g.ny = ny;
        g.hx = periods * ell / nx;
        g.hy = r / ny;
        g.check();
        return g;
    }

    void check() const {
        const int min_nx = periodic_x() ? 3 : 1;
        if (nx < min_nx) throw GeometryError(std::string(to_string(kind)) + ": too few x nodes");
        if (one_dimensional()) {
            if (ny != 0) throw GeometryError("PeriodicCell1D has ny = 0");
        } else if (ny < 1) {
            throw GeometryError(std::string(to_string(kind)) + ": too few y nodes");
        }
        if (!(hx > 0.0) || !std::isfinite(hx) || (!one_dimensional() && (!(hy > 0.0) || !std::isfinite(hy))))
            throw GeometryError(std::string(to_string(kind)) + ": spacings must be positive");
        if (periodic_x() && periods < 1) throw GeometryError("periods must be >= 1");
    }
};

namespace detail {
inline int count_from_spacing(double extent, double h, const char* what) {
    if (!(h > 0.0) || !(extent > 0.0)) throw GeometryError(std::string(what) + ": nonpositive extent or spacing");
    const double ratio = extent / h;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-8 * std::max(1.0, ratio))
        throw GeometryError(std::string(what) + ": extent is not an integer multiple of the spacing");
    return static_cast<int>(rounded);
}
}  // namespace detail

/// Geometry of kind `kind` at characteristic size `size` (R for rectangles,
/// r for strips) with spacings fixed to (hx, hy). Rectangles use H = aspect * R.
/// Used by truncation sweeps so that nested sizes share the same node lattice.
inline Geometry geometry_with_spacing(GeometryKind kind, double size, double hx, double hy, double ell,
                                      double aspect = 1.0, int periods = 1) {
    using detail::count_from_spacing;
    switch (kind) {
        case GeometryKind::TruncatedRoadField: {
            const double H = aspect * size;
            Geometry g = Geometry::truncated_road_field(size, H, count_from_spacing(2 * size, hx, "x") - 1,
                                                        count_from_spacing(H, hy, "y"));
            g.hx = hx;
            g.hy = hy;
            return g;
        }
        case GeometryKind::DirichletRect: {
            const double H = aspect * size;
            Geometry g = Geometry::dirichlet_rect(size, H, count_from_spacing(2 * size, hx, "x") - 1,
                                                  count_from_spacing(H, hy, "y") - 1);
            g.hx = hx;
            g.hy = hy;
            return g;
        }
        case GeometryKind::NeumannRect: {
            const double H = aspect * size;
            Geometry g = Geometry::neumann_rect(size, H, count_from_spacing(2 * size, hx, "x") - 1,
                                                count_from_spacing(H, hy, "y"));
            g.hx = hx;
            g.hy = hy;
            return g;
        }
        case GeometryKind::PeriodicCell1D: {
            Geometry g = Geometry::periodic_cell(ell, count_from_spacing(periods * ell, hx, "x"), periods);
            g.hx = hx;
            return g;
        }
        case GeometryKind::PeriodicStrip: {
            Geometry g = Geometry::periodic_strip(size, ell, count_from_spacing(periods * ell, hx, "x"),
                                                  count_from_spacing(2 * size, hy, "y") - 1, periods);
            g.hx = hx;
            g.hy = hy;
            return g;
        }
        case GeometryKind::PeriodicHalfStrip: {
            Geometry g = Geometry::periodic_half_strip(size, ell, count_from_spacing(periods * ell, hx, "x"),
                                                       count_from_spacing(size, hy, "y"), periods);
            g.hx = hx;
            g.hy = hy;
            return g;
        }
    }
    throw GeometryError("unknown geometry kind");
}

}  // namespace roadfield
