#pragma once

// Independent reference computations used only by tests. Nothing here may
// call into the code paths it is used to check.

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "subcontact/linalg.hpp"

namespace oracles {

// Spectral radius by dense eigendecomposition.
inline double eigen_spectral_radius(const subcontact::Matrix& m) {
    Eigen::MatrixXd a(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) a(static_cast<long>(i), static_cast<long>(j)) = m(i, j);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
    double r = 0.0;
    for (long i = 0; i < solver.eigenvalues().size(); ++i)
        r = std::max(r, std::abs(solver.eigenvalues()[i]));
    return r;
}

// Perron root of an entrywise-positive matrix by bisection on the exact
// predicate: lambda > r(A)  iff  (lambda I - A) x = 1 has a solution with
// x >= 0 entrywise (Collatz-Wielandt).
inline double perron_radius_bisect(const subcontact::Matrix& m) {
    const std::size_t n = m.rows;
    auto above = [&](double lambda) {
        subcontact::Matrix sys(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) sys(i, j) = (i == j ? lambda : 0.0) - m(i, j);
        try {
            subcontact::Vector x = subcontact::lu_solve(sys, subcontact::Vector(n, 1.0));
            for (double v : x)
                if (!(v >= 0.0)) return false;
            return true;
        } catch (const subcontact::numeric_error&) {
            return false;
        }
    };
    double hi = 0.0, lo = 1e300;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += m(i, j);
        hi = std::max(hi, row);
        lo = std::min(lo, row);
    }
    lo *= 0.5;
    hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (above(mid))
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Composite Simpson rule.
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / intervals;
    double acc = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// Quadratic-time reference DFT (forward: exp(-2 pi i jk / n)).
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& in,
                                                   bool inverse) {
    const std::size_t n = in.size();
    std::vector<std::complex<double>> out(n);
    const double sign = inverse ? 2.0 : -2.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = sign * 3.14159265358979323846 * static_cast<double>(j * k) / n;
            acc += in[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = inverse ? acc / static_cast<double>(n) : acc;
    }
    return out;
}

} // namespace oracles
