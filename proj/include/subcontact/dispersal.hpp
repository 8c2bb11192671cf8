#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "subcontact/errors.hpp"
#include "subcontact/linalg.hpp"
#include "subcontact/rng.hpp"

namespace subcontact {

// Dispersal densities with closed-form characteristic functions. Only
// families where alpha_hat is known exactly are supported; the spectral
// solver consumes the symbol directly.
class DispersalKernel {
public:
    enum class Family { Gaussian, UniformBall, UniformBox };

    static DispersalKernel gaussian(int dim, const std::vector<double>& sigma,
                                    std::vector<double> mean = {}) {
        if (dim < 1) throw validation_error("alpha.dim", "dim >= 1 required");
        if (static_cast<int>(sigma.size()) != dim)
            throw validation_error("alpha.sigma", "need one sigma per axis");
        Matrix cov(dim, dim);
        for (int i = 0; i < dim; ++i) {
            if (!(sigma[i] > 0.0)) throw validation_error("alpha.sigma", "must be positive");
            cov(i, i) = sigma[i] * sigma[i];
        }
        return gaussian_cov(dim, cov, std::move(mean));
    }

    static DispersalKernel gaussian_cov(int dim, Matrix cov, std::vector<double> mean = {}) {
        DispersalKernel k;
        k.family_ = Family::Gaussian;
        k.dim_ = dim;
        if (mean.empty()) mean.assign(dim, 0.0);
        if (static_cast<int>(mean.size()) != dim)
            throw validation_error("alpha.mean", "dimension mismatch");
        if (cov.rows != static_cast<std::size_t>(dim) || cov.cols != static_cast<std::size_t>(dim))
            throw validation_error("alpha.cov", "dimension mismatch");
        k.mean_ = std::move(mean);
        k.cov_ = std::move(cov);
        k.chol_ = cholesky(k.cov_);  // throws if not positive definite
        k.norm_const_ = std::pow(2.0 * std::numbers::pi, -0.5 * dim) / det_from_chol(k.chol_);
        return k;
    }

    static DispersalKernel uniform_ball(int dim, double radius) {
        if (dim < 1 || dim > 3)
            throw validation_error("alpha.dim", "uniform ball supported for d in {1,2,3}");
        if (!(radius > 0.0)) throw validation_error("alpha.radius", "must be positive");
        DispersalKernel k;
        k.family_ = Family::UniformBall;
        k.dim_ = dim;
        k.radius_ = radius;
        k.mean_.assign(dim, 0.0);
        k.cov_ = Matrix(dim, dim);
        for (int i = 0; i < dim; ++i) k.cov_(i, i) = radius * radius / (dim + 2.0);
        k.norm_const_ = 1.0 / ball_volume(dim, radius);
        return k;
    }

    static DispersalKernel uniform_box(std::vector<double> half_widths) {
        const int dim = static_cast<int>(half_widths.size());
        if (dim < 1) throw validation_error("alpha.half_widths", "need at least one axis");
        DispersalKernel k;
        k.family_ = Family::UniformBox;
        k.dim_ = dim;
        k.half_widths_ = std::move(half_widths);
        double vol = 1.0;
        for (double w : k.half_widths_) {
            if (!(w > 0.0)) throw validation_error("alpha.half_widths", "must be positive");
            vol *= 2.0 * w;
        }
        k.mean_.assign(dim, 0.0);
        k.cov_ = Matrix(dim, dim);
        for (int i = 0; i < dim; ++i) k.cov_(i, i) = k.half_widths_[i] * k.half_widths_[i] / 3.0;
        k.norm_const_ = 1.0 / vol;
        return k;
    }

    Family family() const { return family_; }
    int dim() const { return dim_; }

    double density(std::span<const double> u) const {
        if (static_cast<int>(u.size()) != dim_) throw validation_error("density", "dimension mismatch");
        switch (family_) {
            case Family::Gaussian: {
                // solve L y = (u - mean), quadratic form = |y|^2
                std::vector<double> y(dim_);
                for (int i = 0; i < dim_; ++i) {
                    double acc = u[i] - mean_[i];
                    for (int j = 0; j < i; ++j) acc -= chol_(i, j) * y[j];
                    y[i] = acc / chol_(i, i);
                }
                double q = 0.0;
                for (double v : y) q += v * v;
                return norm_const_ * std::exp(-0.5 * q);
            }
            case Family::UniformBall: {
                double r2 = 0.0;
                for (double v : u) r2 += v * v;
                return r2 <= radius_ * radius_ ? norm_const_ : 0.0;
            }
            case Family::UniformBox: {
                for (int i = 0; i < dim_; ++i)
                    if (std::fabs(u[i]) > half_widths_[i]) return 0.0;
                return norm_const_;
            }
        }
        return 0.0;
    }

    // alpha_hat(p) = integral of e^{i(p,u)} alpha(u) du
    std::complex<double> char_fn(std::span<const double> p) const {
        if (static_cast<int>(p.size()) != dim_) throw validation_error("char_fn", "dimension mismatch");
        switch (family_) {
            case Family::Gaussian: {
                double quad = 0.0, phase = 0.0;
                for (int i = 0; i < dim_; ++i) {
                    phase += p[i] * mean_[i];
                    for (int j = 0; j < dim_; ++j) quad += p[i] * cov_(i, j) * p[j];
                }
                const double amp = std::exp(-0.5 * quad);
                return {amp * std::cos(phase), amp * std::sin(phase)};
            }
            case Family::UniformBall: {
                double pn = 0.0;
                for (double v : p) pn += v * v;
                const double x = std::sqrt(pn) * radius_;
                return {ball_char(dim_, x), 0.0};
            }
            case Family::UniformBox: {
                double prod = 1.0;
                for (int i = 0; i < dim_; ++i) prod *= sinc(p[i] * half_widths_[i]);
                return {prod, 0.0};
            }
        }
        return {0.0, 0.0};
    }

    const std::vector<double>& mean() const { return mean_; }
    const Matrix& covariance() const { return cov_; }

    // sqrt of the largest / smallest diagonal covariance entry; used for the
    // box-size and grid-spacing validations.
    double length_scale_max() const {
        double v = 0.0;
        for (int i = 0; i < dim_; ++i) v = std::max(v, cov_(i, i));
        return std::sqrt(v);
    }
    double length_scale_min() const {
        double v = cov_(0, 0);
        for (int i = 1; i < dim_; ++i) v = std::min(v, cov_(i, i));
        return std::sqrt(v);
    }

    std::vector<double> sample(Rng& rng) const {
        std::vector<double> out(dim_, 0.0);
        switch (family_) {
            case Family::Gaussian: {
                std::vector<double> z(dim_);
                for (double& v : z) v = rng.normal();
                for (int i = 0; i < dim_; ++i) {
                    double acc = mean_[i];
                    for (int j = 0; j <= i; ++j) acc += chol_(i, j) * z[j];
                    out[i] = acc;
                }
                break;
            }
            case Family::UniformBall: {
                double r2;
                do {
                    r2 = 0.0;
                    for (int i = 0; i < dim_; ++i) {
                        out[i] = rng.uniform(-radius_, radius_);
                        r2 += out[i] * out[i];
                    }
                } while (r2 > radius_ * radius_);
                break;
            }
            case Family::UniformBox:
                for (int i = 0; i < dim_; ++i) out[i] = rng.uniform(-half_widths_[i], half_widths_[i]);
                break;
        }
        return out;
    }

    // Periodized density sum_{j in Z^d} alpha(u + L j), truncated so that the
    // neglected tail is below 1e-12.
    double wrapped_density(std::span<const double> u, double box_side) const {
        if (static_cast<int>(u.size()) != dim_)
            throw validation_error("wrapped_density", "dimension mismatch");
        if (!(box_side > 0.0)) throw validation_error("wrapped_density", "box side must be positive");
        const int J = wrap_order(box_side);
        std::vector<double> shifted(dim_);
        std::vector<int> idx(dim_, -J);
        double total = 0.0;
        for (;;) {
            for (int i = 0; i < dim_; ++i) shifted[i] = u[i] + box_side * idx[i];
            total += density(shifted);
            int axis = 0;
            while (axis < dim_ && ++idx[axis] > J) idx[axis++] = -J;
            if (axis == dim_) break;
        }
        return total;
    }

    // Truncation order for the wrap sum. Bounded-support families are exact;
    // the Gaussian tail beyond 9 sigma is < 1e-17 of the mass.
    int wrap_order(double box_side) const {
        double reach = 0.0;
        switch (family_) {
            case Family::Gaussian: {
                double shift = 0.0;
                for (double m : mean_) shift = std::max(shift, std::fabs(m));
                reach = 9.0 * length_scale_max() + shift;
                break;
            }
            case Family::UniformBall:
                reach = radius_;
                break;
            case Family::UniformBox:
                for (double w : half_widths_) reach = std::max(reach, w);
                break;
        }
        const int J = static_cast<int>(std::ceil(reach / box_side)) + 1;
        if (J > 64)
            throw numeric_error("wrapped_density: kernel reach " + std::to_string(reach) +
                                " too large for box side " + std::to_string(box_side));
        return J;
    }

    static double ball_volume(int dim, double r) {
        switch (dim) {
            case 1: return 2.0 * r;
            case 2: return std::numbers::pi * r * r;
            default: return 4.0 / 3.0 * std::numbers::pi * r * r * r;
        }
    }

private:
    DispersalKernel() = default;

    static double sinc(double x) {
        if (std::fabs(x) < 1e-6) return 1.0 - x * x / 6.0;
        return std::sin(x) / x;
    }

    static double ball_char(int dim, double x) {
        if (dim == 1) return sinc(x);
        if (dim == 2) {
            if (std::fabs(x) < 1e-6) return 1.0 - x * x / 8.0;
            return 2.0 * std::cyl_bessel_j(1.0, x) / x;
        }
        if (std::fabs(x) < 1e-4) return 1.0 - x * x / 10.0;
        return 3.0 * (std::sin(x) - x * std::cos(x)) / (x * x * x);
    }

    static Matrix cholesky(const Matrix& a) {
        const std::size_t n = a.rows;
        Matrix l(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double acc = a(i, j);
                for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
                if (i == j) {
                    if (!(acc > 0.0))
                        throw validation_error("alpha.cov", "covariance must be positive definite");
                    l(i, i) = std::sqrt(acc);
                } else {
                    l(i, j) = acc / l(j, j);
                }
            }
        }
        return l;
    }

    static double det_from_chol(const Matrix& l) {
        double d = 1.0;
        for (std::size_t i = 0; i < l.rows; ++i) d *= l(i, i);
        return d;
    }

    Family family_ = Family::Gaussian;
    int dim_ = 1;
    std::vector<double> mean_;
    Matrix cov_;
    Matrix chol_;
    double radius_ = 0.0;
    std::vector<double> half_widths_;
    double norm_const_ = 0.0;
};

inline std::pair<std::vector<double>, Matrix> moments(const DispersalKernel& k) {
    return {k.mean(), k.covariance()};
}

} // namespace subcontact
