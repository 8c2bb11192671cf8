#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "subcontact/errors.hpp"
#include "subcontact/fft.hpp"

namespace subcontact {

// Uniform periodic grid on [0, L)^d with N points per axis, N a power of two.
struct TorusGrid {
    int dim = 1;
    double length = 1.0;
    int points_per_axis = 8;

    TorusGrid() = default;
    TorusGrid(int d, double box_side, int n) : dim(d), length(box_side), points_per_axis(n) {
        if (d < 1) throw validation_error("grid.dim", "dim >= 1 required");
        if (!(box_side > 0.0)) throw validation_error("grid.L", "must be positive");
        if (n < 8 || !fft::is_power_of_two(static_cast<std::size_t>(n)))
            throw validation_error("grid.N", "points per axis must be a power of two >= 8");
    }

    double spacing() const { return length / points_per_axis; }

    std::size_t spatial_size() const {
        std::size_t t = 1;
        for (int a = 0; a < dim; ++a) t *= static_cast<std::size_t>(points_per_axis);
        return t;
    }

    // Signed frequency index in [-N/2, N/2) for grid index j.
    int folded_index(int j) const {
        return j < points_per_axis / 2 ? j : j - points_per_axis;
    }

    double frequency(int j) const {
        return 2.0 * std::numbers::pi * folded_index(j) / length;
    }

    bool is_nyquist(int j) const { return j == points_per_axis / 2; }

    // Coordinate of grid point j along one axis, in [0, L).
    double coordinate(int j) const { return spacing() * j; }

    // Wrapped signed separation in [-L/2, L/2).
    double signed_separation(double a, double b) const {
        double d = a - b;
        d -= length * std::floor(d / length + 0.5);
        return d;
    }

    double torus_distance_1d(double a, double b) const { return std::fabs(signed_separation(a, b)); }
};

// Immigration intensity per mark.
struct ImmigrationRate {
    std::vector<double> c;

    ImmigrationRate() = default;
    explicit ImmigrationRate(std::vector<double> values) : c(std::move(values)) {
        if (c.empty()) throw validation_error("c", "at least one mark required");
        for (std::size_t s = 0; s < c.size(); ++s)
            if (!(c[s] > 0.0))
                throw validation_error("c[" + std::to_string(s) + "]", "must be strictly positive");
    }

    std::size_t size() const { return c.size(); }
    double operator[](std::size_t s) const { return c[s]; }
};

// Order-n correlation function (or source term) in one of three storage
// layouts:
//   MarkOnly    n = 1, spatially homogeneous: values[s]
//   Difference  n = 2, function of x1 - x2:   values[(w * m + s1) * m + s2],
//               w a row-major index over the torus grid
//   Full        general n (d = 1 only):       values[(j1..jn row-major) * m^n + marks]
struct CorrelationGrid {
    enum class Rep { MarkOnly, Difference, Full };

    int order = 1;
    Rep rep = Rep::MarkOnly;
    TorusGrid grid;      // meaningful for Difference / Full
    int mark_count = 1;
    std::vector<double> values;

    static CorrelationGrid mark_only(int marks, double fill = 0.0) {
        CorrelationGrid g;
        g.order = 1;
        g.rep = Rep::MarkOnly;
        g.mark_count = marks;
        g.values.assign(static_cast<std::size_t>(marks), fill);
        return g;
    }

    static CorrelationGrid difference(const TorusGrid& grid, int marks, double fill = 0.0) {
        CorrelationGrid g;
        g.order = 2;
        g.rep = Rep::Difference;
        g.grid = grid;
        g.mark_count = marks;
        g.values.assign(grid.spatial_size() * marks * marks, fill);
        return g;
    }

    static CorrelationGrid full(const TorusGrid& grid, int order, int marks, double fill = 0.0) {
        if (grid.dim != 1)
            throw validation_error("grid", "full tensors are supported for d = 1 only");
        CorrelationGrid g;
        g.order = order;
        g.rep = Rep::Full;
        g.grid = grid;
        g.mark_count = marks;
        std::size_t n = 1;
        for (int i = 0; i < order; ++i) n *= static_cast<std::size_t>(grid.points_per_axis);
        for (int i = 0; i < order; ++i) n *= static_cast<std::size_t>(marks);
        g.values.assign(n, fill);
        return g;
    }

    std::size_t mark_block() const {
        std::size_t b = 1;
        for (int i = 0; i < order; ++i) b *= static_cast<std::size_t>(mark_count);
        return b;
    }

    std::size_t spatial_points() const {
        if (rep == Rep::MarkOnly) return 1;
        return values.size() / mark_block();
    }

    double& at_difference(std::size_t w, int s1, int s2) {
        return values[(w * mark_count + s1) * mark_count + s2];
    }
    double at_difference(std::size_t w, int s1, int s2) const {
        return values[(w * mark_count + s1) * mark_count + s2];
    }

    double max_abs() const {
        double v = 0.0;
        for (double x : values) v = std::max(v, std::fabs(x));
        return v;
    }

    double min_value() const {
        double v = values.empty() ? 0.0 : values[0];
        for (double x : values) v = std::min(v, x);
        return v;
    }

    bool same_shape(const CorrelationGrid& o) const {
        return order == o.order && rep == o.rep && mark_count == o.mark_count &&
               values.size() == o.values.size();
    }

    double sup_difference(const CorrelationGrid& o) const {
        if (!same_shape(o)) throw validation_error("sup_difference", "shape mismatch");
        double v = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            v = std::max(v, std::fabs(values[i] - o.values[i]));
        return v;
    }
};

using SourceTerm = CorrelationGrid;

} // namespace subcontact
