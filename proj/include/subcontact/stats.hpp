#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "subcontact/errors.hpp"

namespace subcontact {

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

// Mean and standard error of the mean from per-replica values.
inline MeanSE replica_stats(std::span<const double> values) {
    MeanSE r;
    r.n = values.size();
    if (r.n == 0) return r;
    double sum = 0.0;
    for (double v : values) sum += v;
    r.mean = sum / static_cast<double>(r.n);
    if (r.n < 2) return r;
    double ss = 0.0;
    for (double v : values) {
        const double d = v - r.mean;
        ss += d * d;
    }
    r.se = std::sqrt(ss / static_cast<double>(r.n - 1) / static_cast<double>(r.n));
    return r;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t n = 0;
};

inline LineFit linear_fit(std::span<const double> x, std::span<const double> y) {
    LineFit f;
    f.n = x.size();
    if (x.size() != y.size() || f.n < 2) throw validation_error("linear_fit", "need >= 2 matched points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(f.n);
    my /= static_cast<double>(f.n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw numeric_error("linear_fit: degenerate abscissa");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

// Two-sided normal tail probability beyond |z|.
inline double two_sided_tail(double z) { return std::erfc(z / std::sqrt(2.0)); }

// z such that the two-sided tail equals p, by bisection on erfc.
inline double z_for_two_sided_tail(double p) {
    if (p <= 0.0 || p >= 1.0) throw validation_error("z_for_two_sided_tail", "p must be in (0,1)");
    double lo = 0.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (two_sided_tail(mid) > p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Per-test threshold keeping the family-wise false-alarm rate of n_tests
// tests at the level of a single base_z-sigma test (Bonferroni).
inline double bonferroni_threshold(std::size_t n_tests, double base_z = 3.0) {
    if (n_tests <= 1) return base_z;
    const double family_p = two_sided_tail(base_z);
    return z_for_two_sided_tail(family_p / static_cast<double>(n_tests));
}

} // namespace subcontact
