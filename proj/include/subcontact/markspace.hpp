#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "subcontact/errors.hpp"
#include "subcontact/linalg.hpp"

namespace subcontact {

// Finite mark (genome) space: labels plus strictly positive measure weights.
struct MarkSpace {
    std::vector<std::string> labels;
    std::vector<double> weights;

    MarkSpace() = default;
    MarkSpace(std::vector<std::string> lab, std::vector<double> w)
        : labels(std::move(lab)), weights(std::move(w)) {
        if (labels.empty()) throw validation_error("markspace.labels", "at least one mark required");
        if (weights.size() != labels.size())
            throw validation_error("markspace.weights", "weight count must match label count");
        for (std::size_t s = 0; s < weights.size(); ++s)
            if (!(weights[s] > 0.0))
                throw validation_error("markspace.weights[" + std::to_string(s) + "]",
                                       "weights must be strictly positive");
    }

    static MarkSpace point() { return MarkSpace({"0"}, {1.0}); }

    std::size_t size() const { return labels.size(); }
    double weight(std::size_t s) const { return weights[s]; }

    double total_weight() const {
        double t = 0.0;
        for (double w : weights) t += w;
        return t;
    }
};

// Strictly positive mutation kernel Q on a MarkSpace. The operator action
// weighs columns by the measure: (Q h)(s) = sum_{s'} Q(s,s') h(s') w(s').
class MutationKernel {
public:
    MutationKernel() = default;
    MutationKernel(MarkSpace marks, std::vector<double> entries)
        : marks_(std::move(marks)), entries_(std::move(entries)) {
        const std::size_t m = marks_.size();
        if (entries_.size() != m * m)
            throw validation_error("Q", "expected " + std::to_string(m * m) + " entries");
        for (double e : entries_)
            if (!(e > 0.0)) throw validation_error("Q", "entries must be strictly positive");
    }

    const MarkSpace& marks() const { return marks_; }
    std::size_t size() const { return marks_.size(); }
    double entry(std::size_t s, std::size_t sp) const { return entries_[s * size() + sp]; }
    const std::vector<double>& entries() const { return entries_; }

    // Matrix of the operator: M[s][s'] = Q(s,s') w(s').
    Matrix weighted_matrix() const {
        const std::size_t m = size();
        Matrix w(m, m);
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t sp = 0; sp < m; ++sp) w(s, sp) = entry(s, sp) * marks_.weight(sp);
        return w;
    }

    // Matrix of the adjoint (w.r.t. the weighted inner product):
    // M*[s][s'] = Q(s',s) w(s').
    Matrix adjoint_weighted_matrix() const {
        const std::size_t m = size();
        Matrix w(m, m);
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t sp = 0; sp < m; ++sp) w(s, sp) = entry(sp, s) * marks_.weight(sp);
        return w;
    }

    MutationKernel scaled(double factor) const {
        std::vector<double> e = entries_;
        for (double& v : e) v *= factor;
        return MutationKernel(marks_, std::move(e));
    }

private:
    MarkSpace marks_;
    std::vector<double> entries_;
};

inline Vector apply_mutation(const MutationKernel& kernel, const Vector& h) {
    if (h.size() != kernel.size()) throw validation_error("apply_mutation", "dimension mismatch");
    return mat_vec(kernel.weighted_matrix(), h);
}

// Principal eigendata of a strictly positive kernel.
struct SpectralData {
    double r = 0.0;          // principal eigenvalue
    Vector q;                // right eigenfunction, sum_s q(s) w(s) = 1
    Vector q_adj;            // eigenfunction of the adjoint, <q_adj, q>_w = 1
    double kappa_cr = 0.0;   // 1/r
    double residual = 0.0;   // achieved power-iteration residual
};

namespace detail {

inline double weighted_sum(const Vector& v, const MarkSpace& marks) {
    double t = 0.0;
    for (std::size_t s = 0; s < v.size(); ++s) t += v[s] * marks.weight(s);
    return t;
}

// Power iteration with normalization sum_s v(s) w(s) = 1. For a strictly
// positive matrix the iterates stay positive and the Perron gap guarantees
// linear convergence. Returns (eigenvalue, vector, residual).
inline std::tuple<double, Vector, double> power_iterate(const Matrix& m, const MarkSpace& marks,
                                                        double tol, std::size_t max_iter) {
    const std::size_t n = m.rows;
    Vector v(n, 1.0 / marks.total_weight());
    double r = 0.0, res = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        Vector mv = mat_vec(m, v);
        r = weighted_sum(mv, marks);
        res = 0.0;
        for (std::size_t s = 0; s < n; ++s) res = std::max(res, std::fabs(mv[s] - r * v[s]));
        for (double& x : mv) x /= r;
        v = std::move(mv);
        if (res <= tol) {
            // one more product so the reported pair (r, v) is consistent
            Vector check = mat_vec(m, v);
            r = weighted_sum(check, marks);
            res = 0.0;
            for (std::size_t s = 0; s < n; ++s) res = std::max(res, std::fabs(check[s] - r * v[s]));
            if (res <= tol) return {r, v, res};
        }
    }
    throw numeric_error("krein_rutman: power iteration did not reach tol, last residual " +
                        std::to_string(res));
}

} // namespace detail

inline SpectralData krein_rutman(const MutationKernel& kernel, double tol = 1e-12,
                                 std::size_t max_iter = 200000) {
    if (!(tol > 0.0)) throw validation_error("krein_rutman.tol", "must be positive");
    const MarkSpace& marks = kernel.marks();

    auto [r, q, res_q] = detail::power_iterate(kernel.weighted_matrix(), marks, tol, max_iter);
    auto [r_adj, q_adj, res_adj] = detail::power_iterate(kernel.adjoint_weighted_matrix(), marks, tol, max_iter);

    SpectralData out;
    out.r = r;
    out.q = std::move(q);
    out.q_adj = std::move(q_adj);
    out.kappa_cr = 1.0 / r;
    out.residual = std::max(res_q, res_adj);

    // biorthogonal scaling <q_adj, q>_w = 1
    double pairing = 0.0;
    for (std::size_t s = 0; s < out.q.size(); ++s)
        pairing += out.q_adj[s] * out.q[s] * marks.weight(s);
    for (double& x : out.q_adj) x /= pairing;
    (void)r_adj;
    return out;
}

// Divides the kernel by its principal eigenvalue so that r = 1, and folds r
// into kappa. Requires kappa strictly subcritical.
inline std::pair<MutationKernel, double> renormalize(const MutationKernel& kernel, double kappa,
                                                     double tol = 1e-12) {
    const SpectralData spec = krein_rutman(kernel, tol);
    if (!(kappa >= 0.0)) throw validation_error("kappa", "must be nonnegative");
    if (!(kappa < spec.kappa_cr))
        throw validation_error("kappa", "supercritical or critical: kappa*r = " +
                                            std::to_string(kappa * spec.r) + " >= 1");
    return {kernel.scaled(1.0 / spec.r), kappa * spec.r};
}

} // namespace subcontact
