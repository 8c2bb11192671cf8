#pragma once

// Correlation-function hierarchy solver on a periodic box.
//
// Discrete conventions, used consistently by every operation here:
//  * Spatial operators act on band-limited torus functions. Convolution with
//    the dispersal density alpha multiplies the Fourier coefficient of
//    exp(+i p x) by alpha_hat(-p); convolution with the reflected density by
//    alpha_hat(+p). Symbols are evaluated from the closed-form characteristic
//    function at the grid frequencies and Hermitized at Nyquist bins.
//  * Where a source term needs alpha as grid data, the band-limited
//    periodization (inverse transform of the symbol) is used, so that
//    direct Fourier solutions and Neumann-series solutions agree to series
//    truncation accuracy, not merely to quadrature accuracy.
//  * The constant background of the pair function is carried as an additive
//    constant, never as a grid spike.

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "subcontact/dispersal.hpp"
#include "subcontact/errors.hpp"
#include "subcontact/fft.hpp"
#include "subcontact/grid.hpp"
#include "subcontact/linalg.hpp"
#include "subcontact/markspace.hpp"
#include "subcontact/stats.hpp"

namespace subcontact {

using cvec = std::vector<std::complex<double>>;

// Precomputed machinery shared by all hierarchy operations.
struct HierarchyModel {
    TorusGrid grid;
    MutationKernel Q;        // renormalized: principal eigenvalue 1
    SpectralData spectrum;   // of the renormalized kernel
    double kappa = 0.0;      // effective, in (0,1)
    ImmigrationRate c;
    DispersalKernel alpha;

    Matrix q_weighted;       // Q(s,s') w(s')
    cvec symbol_fwd;         // per spatial bin: alpha_hat(-p), Hermitized
    cvec symbol_rev;         // per spatial bin: alpha_hat(+p), Hermitized
    std::vector<double> alpha_grid;  // band-limited periodized alpha at w_j
    double alias_level = 0.0;        // max |alpha_hat| over Nyquist axis frequencies

    std::size_t marks() const { return Q.size(); }

    static HierarchyModel build(const TorusGrid& grid, const MutationKernel& q_renormalized,
                                double kappa_eff, const ImmigrationRate& c,
                                const DispersalKernel& alpha, double spectral_tol = 1e-12) {
        if (alpha.dim() != grid.dim)
            throw validation_error("alpha.dim", "kernel and grid dimension differ");
        if (!(kappa_eff >= 0.0 && kappa_eff < 1.0))
            throw validation_error("kappa", "effective kappa must lie in [0,1)");
        if (c.size() != q_renormalized.size())
            throw validation_error("c", "mark count differs from Q");
        if (!(grid.spacing() < alpha.length_scale_min()))
            throw validation_error("grid.N", "spacing " + std::to_string(grid.spacing()) +
                                                 " must resolve the dispersal scale " +
                                                 std::to_string(alpha.length_scale_min()));
        if (!(grid.length > 20.0 * alpha.length_scale_max()))
            throw validation_error("grid.L", "box must exceed 20 dispersal standard deviations");

        HierarchyModel m{grid, q_renormalized, krein_rutman(q_renormalized, spectral_tol), kappa_eff,
                         c, alpha};
        m.q_weighted = q_renormalized.weighted_matrix();

        const int N = grid.points_per_axis;
        const std::size_t bins = grid.spatial_size();
        m.symbol_fwd.resize(bins);
        m.symbol_rev.resize(bins);
        std::vector<double> p(grid.dim), p_refl(grid.dim);
        std::vector<int> idx(grid.dim, 0);
        for (std::size_t j = 0; j < bins; ++j) {
            for (int a = 0; a < grid.dim; ++a) {
                p[a] = grid.frequency(idx[a]);
                p_refl[a] = grid.frequency((N - idx[a]) % N);
            }
            // minus-p symbol, Hermitized so that real data stays real
            std::vector<double> mp(grid.dim), mp_refl(grid.dim);
            for (int a = 0; a < grid.dim; ++a) {
                mp[a] = -p[a];
                mp_refl[a] = -p_refl[a];
            }
            const auto v = alpha.char_fn(mp);
            const auto v_refl = std::conj(alpha.char_fn(mp_refl));
            m.symbol_fwd[j] = 0.5 * (v + v_refl);
            m.symbol_rev[j] = std::conj(m.symbol_fwd[j]);
            int a = 0;
            while (a < grid.dim && ++idx[a] == N) idx[a++] = 0;
        }

        // alias diagnostic: |alpha_hat| at the Nyquist frequency of each axis
        for (int a = 0; a < grid.dim; ++a) {
            std::vector<double> pn(grid.dim, 0.0);
            pn[a] = std::numbers::pi * N / grid.length;
            m.alias_level = std::max(m.alias_level, std::abs(alpha.char_fn(pn)));
        }

        // band-limited periodized alpha on the grid
        cvec buf = m.symbol_fwd;
        std::vector<std::size_t> shape(grid.dim, static_cast<std::size_t>(N));
        for (int a = 0; a < grid.dim; ++a) fft::transform_axis(buf.data(), shape, a, true);
        const double scale = static_cast<double>(bins) / std::pow(grid.length, grid.dim);
        m.alpha_grid.resize(bins);
        for (std::size_t j = 0; j < bins; ++j) m.alpha_grid[j] = buf[j].real() * scale;
        return m;
    }

    // index of -w_j on the grid
    std::size_t reflected_bin(std::size_t j) const {
        const int N = grid.points_per_axis;
        std::size_t out = 0, mul = 1;
        for (int a = 0; a < grid.dim; ++a) {
            const int ja = static_cast<int>(j / mul) % N;
            out += static_cast<std::size_t>((N - ja) % N) * mul;
            mul *= static_cast<std::size_t>(N);
        }
        return out;
    }

    double alpha_grid_reflected(std::size_t j) const { return alpha_grid[reflected_bin(j)]; }
};

namespace detail {

// Apply the mark matrix W along mark slot `slot` of an order-n block layout.
template <typename T>
inline void mark_mix_inplace(std::vector<T>& vals, int order, int m, int slot, const Matrix& w) {
    std::size_t mark_block = 1;
    for (int i = 0; i < order; ++i) mark_block *= static_cast<std::size_t>(m);
    std::size_t stride = 1;
    for (int i = slot + 1; i < order; ++i) stride *= static_cast<std::size_t>(m);
    const std::size_t groups = vals.size() / mark_block;
    std::vector<T> line(m);
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t base = g * mark_block;
        const std::size_t rest = mark_block / m;
        for (std::size_t r = 0; r < rest; ++r) {
            const std::size_t off = (r / stride) * stride * m + (r % stride);
            for (int s = 0; s < m; ++s) line[s] = vals[base + off + s * stride];
            for (int s = 0; s < m; ++s) {
                T acc{};
                for (int sp = 0; sp < m; ++sp) acc += w(s, sp) * line[sp];
                vals[base + off + s * stride] = acc;
            }
        }
    }
}

inline std::vector<std::size_t> spectral_shape(const HierarchyModel& model, const CorrelationGrid& k) {
    const std::size_t N = static_cast<std::size_t>(model.grid.points_per_axis);
    std::vector<std::size_t> shape;
    if (k.rep == CorrelationGrid::Rep::Difference) {
        shape.assign(model.grid.dim, N);
    } else {
        shape.assign(k.order, N);  // Full rep, d = 1
    }
    shape.push_back(k.mark_block());
    return shape;
}

inline int spatial_axes(const CorrelationGrid& k, const HierarchyModel& model) {
    return k.rep == CorrelationGrid::Rep::Difference ? model.grid.dim : k.order;
}

// Multiply every mark channel at spatial bin j of slot `slot` by the symbol.
// For the Difference rep there is a single spatial group covering both slots
// (slot 0 uses the forward symbol, slot 1 the reflected one). For the Full
// rep the symbol depends only on the slot's own axis index.
inline void symbol_multiply(cvec& vals, const HierarchyModel& model, const CorrelationGrid& proto,
                            int slot) {
    const std::size_t mark_block = proto.mark_block();
    if (proto.rep == CorrelationGrid::Rep::Difference) {
        const cvec& sym = slot == 0 ? model.symbol_fwd : model.symbol_rev;
        const std::size_t bins = model.grid.spatial_size();
        for (std::size_t j = 0; j < bins; ++j) {
            const std::complex<double> s = sym[j];
            for (std::size_t b = 0; b < mark_block; ++b) vals[j * mark_block + b] *= s;
        }
    } else {
        const std::size_t N = static_cast<std::size_t>(model.grid.points_per_axis);
        std::size_t stride = mark_block;
        for (int i = slot + 1; i < proto.order; ++i) stride *= N;
        const std::size_t block = stride * N;
        for (std::size_t base = 0; base < vals.size(); base += block)
            for (std::size_t j = 0; j < N; ++j) {
                const std::complex<double> s = model.symbol_fwd[j];
                for (std::size_t off = 0; off < stride; ++off) vals[base + j * stride + off] *= s;
            }
    }
}

inline cvec to_spectral(const HierarchyModel& model, const CorrelationGrid& k) {
    cvec buf(k.values.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = k.values[i];
    const auto shape = spectral_shape(model, k);
    for (int a = 0; a < spatial_axes(k, model); ++a) fft::transform_axis(buf.data(), shape, a, false);
    return buf;
}

inline void from_spectral(const HierarchyModel& model, cvec buf, CorrelationGrid& out) {
    const auto shape = spectral_shape(model, out);
    for (int a = 0; a < spatial_axes(out, model); ++a) fft::transform_axis(buf.data(), shape, a, true);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = buf[i].real();
}

} // namespace detail

// Number of Neumann terms certified by the a-priori bound
// kappa^M / (1 - kappa) < tol.
inline std::size_t neumann_terms(double kappa, double tol) {
    std::size_t m = 0;
    double t = 1.0;
    while (t / (1.0 - kappa) >= tol) {
        t *= kappa;
        ++m;
        if (m > 200000) throw numeric_error("neumann_terms: series budget exceeded");
    }
    return m;
}

// Sum over slots of A_i, real-space in and out (no -n*k part).
inline CorrelationGrid apply_A_sum(const HierarchyModel& model, const CorrelationGrid& k) {
    const int m = static_cast<int>(model.marks());
    if (k.rep == CorrelationGrid::Rep::MarkOnly) {
        CorrelationGrid out = k;
        Vector v = mat_vec(model.q_weighted, k.values);
        for (std::size_t s = 0; s < v.size(); ++s) out.values[s] = model.kappa * v[s];
        return out;
    }
    CorrelationGrid out = k;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    const int slots = k.rep == CorrelationGrid::Rep::Difference ? 2 : k.order;
    for (int slot = 0; slot < slots; ++slot) {
        cvec buf(k.values.size());
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = k.values[i];
        const auto shape = detail::spectral_shape(model, k);
        const int axes = detail::spatial_axes(k, model);
        // mark mix first (real space would do too; axes commute)
        detail::mark_mix_inplace(buf, k.order, m, slot, model.q_weighted);
        for (int a = 0; a < axes; ++a) fft::transform_axis(buf.data(), shape, a, false);
        detail::symbol_multiply(buf, model, k, slot);
        for (int a = 0; a < axes; ++a) fft::transform_axis(buf.data(), shape, a, true);
        for (std::size_t i = 0; i < buf.size(); ++i) out.values[i] += model.kappa * buf[i].real();
    }
    return out;
}

// (L*_n k)(x) = -n k(x) + sum_i kappa integral a(x_i, y) k(... y ...) dZ(y)
inline CorrelationGrid apply_Lstar(const HierarchyModel& model, const CorrelationGrid& k) {
    CorrelationGrid out = apply_A_sum(model, k);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] -= static_cast<double>(k.order) * k.values[i];
    return out;
}

// k = (-L*_n)^{-1} f = (1/n) sum_{m>=0} A^m f with A = (1/n) sum_i A_i.
// Spatial representations run the series in the spectral domain, where A is
// block diagonal over frequency tuples: per spatial bin it reduces to the
// slot symbols times the mark matrix, so the whole series is summed
// block-by-block in a single pass over the transformed source.
inline CorrelationGrid resolvent_neumann(const HierarchyModel& model, const SourceTerm& f,
                                         double tol = 1e-10) {
    const std::size_t terms = neumann_terms(model.kappa, tol);
    const double n = static_cast<double>(f.order);

    if (f.rep == CorrelationGrid::Rep::MarkOnly) {
        Vector term = f.values, acc = f.values;
        for (std::size_t it = 0; it < terms; ++it) {
            term = mat_vec(model.q_weighted, term);
            for (double& v : term) v *= model.kappa / n;
            for (std::size_t s = 0; s < acc.size(); ++s) acc[s] += term[s];
        }
        CorrelationGrid out = f;
        for (std::size_t s = 0; s < acc.size(); ++s) out.values[s] = acc[s] / n;
        return out;
    }

    cvec spec = detail::to_spectral(model, f);
    const int slots = f.rep == CorrelationGrid::Rep::Difference ? 2 : f.order;
    const int m = static_cast<int>(model.marks());
    const std::size_t mb = f.mark_block();
    const std::size_t bins = spec.size() / mb;
    const std::size_t N = static_cast<std::size_t>(model.grid.points_per_axis);

    // mark-axis strides within a block: slot t has stride m^{order-1-t}
    std::vector<std::size_t> mstride(static_cast<std::size_t>(f.order));
    {
        std::size_t s = 1;
        for (int t = f.order - 1; t >= 0; --t) {
            mstride[static_cast<std::size_t>(t)] = s;
            s *= static_cast<std::size_t>(m);
        }
    }

    std::vector<std::complex<double>> sym(static_cast<std::size_t>(slots));
    std::vector<std::complex<double>> term(mb), acc(mb), next(mb);
    for (std::size_t j = 0; j < bins; ++j) {
        if (f.rep == CorrelationGrid::Rep::Difference) {
            sym[0] = model.symbol_fwd[j] * (model.kappa / n);
            sym[1] = model.symbol_rev[j] * (model.kappa / n);
        } else {
            std::size_t rem = j;
            for (int t = f.order - 1; t >= 0; --t) {
                sym[static_cast<std::size_t>(t)] = model.symbol_fwd[rem % N] * (model.kappa / n);
                rem /= N;
            }
        }
        std::complex<double>* block = spec.data() + j * mb;
        for (std::size_t b = 0; b < mb; ++b) acc[b] = term[b] = block[b];
        for (std::size_t it = 0; it < terms; ++it) {
            std::fill(next.begin(), next.end(), std::complex<double>(0.0));
            for (int t = 0; t < slots; ++t) {
                const std::size_t stride = mstride[static_cast<std::size_t>(t)];
                for (std::size_t r = 0; r < mb / static_cast<std::size_t>(m); ++r) {
                    const std::size_t off = (r / stride) * stride * static_cast<std::size_t>(m) +
                                            (r % stride);
                    for (int s = 0; s < m; ++s) {
                        std::complex<double> a = 0.0;
                        for (int sp = 0; sp < m; ++sp)
                            a += model.q_weighted(static_cast<std::size_t>(s),
                                                  static_cast<std::size_t>(sp)) *
                                 term[off + static_cast<std::size_t>(sp) * stride];
                        next[off + static_cast<std::size_t>(s) * stride] +=
                            sym[static_cast<std::size_t>(t)] * a;
                    }
                }
            }
            term.swap(next);
            for (std::size_t b = 0; b < mb; ++b) acc[b] += term[b];
        }
        for (std::size_t b = 0; b < mb; ++b) block[b] = acc[b] / n;
    }

    CorrelationGrid out = f;
    detail::from_spectral(model, std::move(spec), out);
    return out;
}

// First-order stationary solution (1 - kappa Q)^{-1} c, by Neumann series
// with an independent direct-solve verification.
inline CorrelationGrid solve_k1(const HierarchyModel& model, double tol = 1e-13) {
    const std::size_t m = model.marks();
    double cmax = 0.0;
    for (std::size_t s = 0; s < m; ++s) cmax = std::max(cmax, model.c[s]);

    Vector term = model.c.c, acc = model.c.c;
    double bound = cmax;
    while (bound / (1.0 - model.kappa) >= tol) {
        term = mat_vec(model.q_weighted, term);
        for (double& v : term) v *= model.kappa;
        for (std::size_t s = 0; s < m; ++s) acc[s] += term[s];
        bound *= model.kappa;
    }

    Matrix sys = Matrix::identity(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) sys(i, j) -= model.kappa * model.q_weighted(i, j);
    const Vector direct = lu_solve(sys, model.c.c);

    double dev = 0.0, scale = 1.0;
    for (std::size_t s = 0; s < m; ++s) {
        dev = std::max(dev, std::fabs(acc[s] - direct[s]));
        scale = std::max(scale, std::fabs(direct[s]));
    }
    if (dev > std::max(100.0 * tol, 1e-10) * scale)
        throw numeric_error("solve_k1: Neumann series and direct solve disagree by " +
                            std::to_string(dev));

    CorrelationGrid out = CorrelationGrid::mark_only(static_cast<int>(m));
    out.values = std::move(acc);
    return out;
}

struct PairClosedForm {
    CorrelationGrid k2;       // full pair function, background included
    double rho = 0.0;         // first-order density
    double background = 0.0;  // rho^2, carried as an additive constant
};

// Direct Fourier solution of the stationary pair equation for the unmarked
// model: regular part kappa*rho*S(p) / (2 - kappa*S(p)) with
// S(p) = alpha_hat(p) + alpha_hat(-p), plus the constant background rho^2.
inline PairClosedForm solve_k2_unmarked(const HierarchyModel& model) {
    if (model.marks() != 1)
        throw validation_error("solve_k2_unmarked", "requires a one-point mark space");
    const double rho = solve_k1(model).values[0];

    const std::size_t bins = model.grid.spatial_size();
    cvec spec(bins);
    for (std::size_t j = 0; j < bins; ++j) {
        const std::complex<double> S = model.symbol_fwd[j] + model.symbol_rev[j];
        spec[j] = model.kappa * rho * S / (2.0 - model.kappa * S);
    }
    std::vector<std::size_t> shape(model.grid.dim,
                                   static_cast<std::size_t>(model.grid.points_per_axis));
    for (int a = 0; a < model.grid.dim; ++a) fft::transform_axis(spec.data(), shape, a, true);
    const double scale = static_cast<double>(bins) / std::pow(model.grid.length, model.grid.dim);

    PairClosedForm out;
    out.rho = rho;
    out.background = rho * rho;
    out.k2 = CorrelationGrid::difference(model.grid, 1);
    for (std::size_t j = 0; j < bins; ++j)
        out.k2.values[j] = out.background + spec[j].real() * scale;
    return out;
}

// f^(n) built from k^(n-1): each slot i contributes
// k^(n-1)(without x_i) * ( sum_{j != i} kappa a(x_i, x_j) + c(x_i) ).
inline SourceTerm assemble_source(const HierarchyModel& model, int order,
                                  const CorrelationGrid& k_prev) {
    const int m = static_cast<int>(model.marks());
    if (order == 1) {
        SourceTerm f = CorrelationGrid::mark_only(m);
        f.values = model.c.c;
        return f;
    }
    if (order == 2) {
        if (k_prev.rep != CorrelationGrid::Rep::MarkOnly || k_prev.order != 1)
            throw validation_error("assemble_source", "order 2 needs a mark-only k1");
        SourceTerm f = CorrelationGrid::difference(model.grid, m);
        const std::size_t bins = model.grid.spatial_size();
        for (std::size_t w = 0; w < bins; ++w) {
            const double a_fwd = model.alpha_grid[w];
            const double a_rev = model.alpha_grid_reflected(w);
            for (int s1 = 0; s1 < m; ++s1)
                for (int s2 = 0; s2 < m; ++s2) {
                    const double contact = model.kappa * (k_prev.values[s2] * a_fwd * model.Q.entry(s1, s2) +
                                                          k_prev.values[s1] * a_rev * model.Q.entry(s2, s1));
                    const double imm = model.c[s1] * k_prev.values[s2] + model.c[s2] * k_prev.values[s1];
                    f.at_difference(w, s1, s2) = contact + imm;
                }
        }
        return f;
    }
    if (order == 3) {
        if (k_prev.rep != CorrelationGrid::Rep::Difference)
            throw validation_error("assemble_source", "order 3 needs a difference-form k2");
        if (model.grid.dim != 1)
            throw validation_error("assemble_source", "order 3 tensors require d = 1");
        const int N = model.grid.points_per_axis;
        SourceTerm f = CorrelationGrid::full(model.grid, 3, m);
        auto wrap = [N](int j) { return ((j % N) + N) % N; };
        std::size_t idx = 0;
        for (int j1 = 0; j1 < N; ++j1)
            for (int j2 = 0; j2 < N; ++j2)
                for (int j3 = 0; j3 < N; ++j3) {
                    const int pos[3] = {j1, j2, j3};
                    for (int s1 = 0; s1 < m; ++s1)
                        for (int s2 = 0; s2 < m; ++s2)
                            for (int s3 = 0; s3 < m; ++s3, ++idx) {
                                const int mk[3] = {s1, s2, s3};
                                double total = 0.0;
                                for (int i = 0; i < 3; ++i) {
                                    const int a = (i + 1) % 3, b = (i + 2) % 3;
                                    const int lo = a < b ? a : b, hi = a < b ? b : a;
                                    const double kprev = k_prev.at_difference(
                                        static_cast<std::size_t>(wrap(pos[lo] - pos[hi])), mk[lo], mk[hi]);
                                    double rate = model.c[mk[i]];
                                    for (int j = 0; j < 3; ++j) {
                                        if (j == i) continue;
                                        rate += model.kappa *
                                                model.alpha_grid[static_cast<std::size_t>(wrap(pos[i] - pos[j]))] *
                                                model.Q.entry(mk[i], mk[j]);
                                    }
                                    total += kprev * rate;
                                }
                                f.values[idx] = total;
                            }
                }
        return f;
    }
    throw validation_error("assemble_source", "orders beyond 3 are not supported");
}

struct GrowthBound {
    int order = 0;
    double bound = 0.0;  // sup k / (n! prod q)
};

inline double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// sup over all arguments of k / (n! * prod_i q(s_i)).
inline GrowthBound growth_bound(const CorrelationGrid& k, const Vector& q) {
    GrowthBound g;
    g.order = k.order;
    const int m = k.mark_count;
    const std::size_t mark_block = k.mark_block();
    const double nf = factorial(k.order);
    for (std::size_t i = 0; i < k.values.size(); ++i) {
        std::size_t mk = i % mark_block;
        double qprod = 1.0;
        for (int t = 0; t < k.order; ++t) {
            qprod *= q[mk % m];
            mk /= m;
        }
        g.bound = std::max(g.bound, k.values[i] / (nf * qprod));
    }
    return g;
}

struct StationarySolution {
    std::vector<CorrelationGrid> grids;     // orders 1..n_max
    std::vector<double> pre_clip_min;       // most negative raw value per order
    std::vector<double> stationarity_residual;  // ||L* k + f||_inf per order
    std::vector<GrowthBound> growth;
    double fitted_D = 0.0;  // from log B_n = log D + n log H
    double fitted_H = 0.0;
};

// Recursive stationary solve: k^(n) = (-L*_n)^{-1} f^(n)(k^(n-1)).
// Positivity is checked post hoc: raw minima are recorded, tiny negative
// roundoff (above -positivity_tol * scale) is zeroed, anything worse throws.
inline StationarySolution solve_stationary(const HierarchyModel& model, int n_max,
                                           double tol = 1e-10, double positivity_tol = 1e-10) {
    if (n_max < 1) throw validation_error("n_max", "must be >= 1");
    if (n_max > 3) throw validation_error("n_max", "orders beyond 3 are not supported");
    StationarySolution out;
    for (int n = 1; n <= n_max; ++n) {
        CorrelationGrid k = n == 1 ? solve_k1(model, std::min(tol, 1e-13))
                                   : resolvent_neumann(model, assemble_source(model, n, out.grids.back()), tol);
        const SourceTerm f = assemble_source(model, n, n == 1 ? CorrelationGrid() : out.grids.back());
        CorrelationGrid res = apply_Lstar(model, k);
        double resid = 0.0;
        for (std::size_t i = 0; i < res.values.size(); ++i)
            resid = std::max(resid, std::fabs(res.values[i] + f.values[i]));
        out.stationarity_residual.push_back(resid);

        const double mn = k.min_value();
        out.pre_clip_min.push_back(mn);
        const double scale = std::max(1.0, k.max_abs());
        if (mn < -positivity_tol * scale)
            throw numeric_error("solve_stationary: order " + std::to_string(n) +
                                " violates positivity, min = " + std::to_string(mn));
        if (mn < 0.0)
            for (double& v : k.values) v = std::max(v, 0.0);

        out.growth.push_back(growth_bound(k, model.spectrum.q));
        out.grids.push_back(std::move(k));
    }
    if (n_max >= 2) {
        std::vector<double> ns, logb;
        for (const auto& g : out.growth) {
            ns.push_back(static_cast<double>(g.order));
            logb.push_back(std::log(std::max(g.bound, 1e-300)));
        }
        const LineFit fit = linear_fit(ns, logb);
        out.fitted_H = std::exp(fit.slope);
        out.fitted_D = std::exp(fit.intercept);
    } else {
        out.fitted_D = out.growth[0].bound;
        out.fitted_H = 1.0;
    }
    return out;
}

struct HierarchyState {
    double t = 0.0;
    std::vector<CorrelationGrid> grids;  // orders 1..n_max
};

inline HierarchyState make_initial_state(const HierarchyModel& model, int n_max, double fill) {
    HierarchyState st;
    const int m = static_cast<int>(model.marks());
    for (int n = 1; n <= n_max; ++n) {
        if (n == 1)
            st.grids.push_back(CorrelationGrid::mark_only(m, fill));
        else if (n == 2)
            st.grids.push_back(CorrelationGrid::difference(model.grid, m, fill));
        else
            st.grids.push_back(CorrelationGrid::full(model.grid, n, m, fill));
    }
    return st;
}

// One exponential-Euler step: the mortality part -n*Id is integrated
// exactly, the positive part (sum_i A_i) and the source explicitly:
//   k <- e^{-n dt} k + (1 - e^{-n dt})/n * (sum_i A_i k + f).
// Sources are assembled from the pre-step lower orders. The stationary
// solution is an exact fixed point for every dt.
inline void cauchy_step(const HierarchyModel& model, HierarchyState& state, double dt) {
    const int n_max = static_cast<int>(state.grids.size());
    std::vector<SourceTerm> sources;
    sources.reserve(n_max);
    for (int n = 1; n <= n_max; ++n)
        sources.push_back(assemble_source(model, n, n == 1 ? CorrelationGrid() : state.grids[n - 2]));
    for (int n = 1; n <= n_max; ++n) {
        CorrelationGrid& k = state.grids[n - 1];
        CorrelationGrid drive = apply_A_sum(model, k);
        const double decay = std::exp(-n * dt);
        const double weight = (1.0 - decay) / n;
        for (std::size_t i = 0; i < k.values.size(); ++i)
            k.values[i] = decay * k.values[i] + weight * (drive.values[i] + sources[n - 1].values[i]);
    }
    state.t += dt;
}

struct TrajectoryRecord {
    double t = 0.0;
    std::vector<double> sup_norm;  // per order
    std::vector<double> sup_err;   // per order, empty when no reference given
};

struct EvolveOptions {
    double T = 10.0;
    double dt = 0.0;          // 0 -> 0.1 / (n_max * (1 + kappa))
    int record_stride = 1;
    double norm_guard = 1e6;  // instability detector
};

struct CauchyResult {
    HierarchyState state;
    std::vector<TrajectoryRecord> trajectory;
};

inline CauchyResult evolve_cauchy(const HierarchyModel& model, HierarchyState initial,
                                  const EvolveOptions& opts,
                                  const std::vector<CorrelationGrid>* reference = nullptr) {
    const int n_max = static_cast<int>(initial.grids.size());
    double dt = opts.dt > 0.0 ? opts.dt : 0.1 / (n_max * (1.0 + model.kappa));
    if (!(dt * n_max * (1.0 + model.kappa) < 1.0))
        throw validation_error("solver.dt", "explicit stepping requires dt*n_max*(1+kappa) < 1");
    if (reference && static_cast<int>(reference->size()) < n_max)
        throw validation_error("evolve_cauchy", "reference must cover all evolved orders");

    CauchyResult out;
    out.state = std::move(initial);
    const std::size_t steps = static_cast<std::size_t>(std::ceil(opts.T / dt - 1e-9));
    auto record = [&](std::size_t step_idx) {
        TrajectoryRecord rec;
        rec.t = out.state.t;
        for (int n = 0; n < n_max; ++n) {
            rec.sup_norm.push_back(out.state.grids[n].max_abs());
            if (reference) rec.sup_err.push_back(out.state.grids[n].sup_difference((*reference)[n]));
        }
        if (step_idx % static_cast<std::size_t>(opts.record_stride) == 0 || step_idx == steps)
            out.trajectory.push_back(rec);
        for (int n = 0; n < n_max; ++n)
            if (!(rec.sup_norm[n] < opts.norm_guard))
                throw numeric_error("evolve_cauchy: instability at t = " + std::to_string(out.state.t) +
                                    ", order " + std::to_string(n + 1) + " norm " +
                                    std::to_string(rec.sup_norm[n]));
    };
    record(0);
    for (std::size_t s = 1; s <= steps; ++s) {
        cauchy_step(model, out.state, dt);
        record(s);
    }
    return out;
}

// Fitted exponential decay rate of the recorded errors of one order over
// [t_lo, t_hi]: minus the slope of log(err) against t.
inline double fit_decay_rate(const std::vector<TrajectoryRecord>& traj, int order, double t_lo,
                             double t_hi) {
    std::vector<double> ts, logs;
    for (const auto& rec : traj) {
        if (rec.t < t_lo || rec.t > t_hi) continue;
        const double e = rec.sup_err.empty() ? rec.sup_norm[order - 1] : rec.sup_err[order - 1];
        if (e < 1e-14) continue;
        ts.push_back(rec.t);
        logs.push_back(std::log(e));
    }
    if (ts.size() < 2) throw numeric_error("fit_decay_rate: too few usable records in window");
    return -linear_fit(ts, logs).slope;
}

struct FactorizationEntry {
    double rho_requested = 0.0;
    double rho_effective = 0.0;
    double max_deviation = 0.0;
};

struct FactorizationReport {
    std::vector<FactorizationEntry> entries;
    bool monotone = true;  // deviations non-increasing along the schedule
};

// Deviation of k from the product of first-order values over configurations
// whose pairwise torus separations all reach rho. On a circle, n points
// cannot all be further apart than L/n; requested radii are capped at the
// largest separation the grid actually realizes and the cap is reported.
inline FactorizationReport check_factorization(const HierarchyModel& model,
                                               const CorrelationGrid& k,
                                               const CorrelationGrid& k1,
                                               const std::vector<double>& radii) {
    if (k.order < 2) throw validation_error("check_factorization", "order >= 2 required");
    FactorizationReport report;
    const int m = k.mark_count;
    const TorusGrid& grid = model.grid;

    if (k.rep == CorrelationGrid::Rep::Difference) {
        const std::size_t bins = grid.spatial_size();
        std::vector<double> dist(bins);
        const int N = grid.points_per_axis;
        for (std::size_t j = 0; j < bins; ++j) {
            double r2 = 0.0;
            std::size_t rem = j;
            for (int a = 0; a < grid.dim; ++a) {
                const int ja = static_cast<int>(rem % static_cast<std::size_t>(N));
                rem /= static_cast<std::size_t>(N);
                const double x = grid.torus_distance_1d(grid.coordinate(ja), 0.0);
                r2 += x * x;
            }
            dist[j] = std::sqrt(r2);
        }
        double feasible = 0.0;
        for (double x : dist) feasible = std::max(feasible, x);
        for (double rho : radii) {
            FactorizationEntry e;
            e.rho_requested = rho;
            e.rho_effective = std::min(rho, feasible);
            for (std::size_t j = 0; j < bins; ++j) {
                if (dist[j] + 1e-12 < e.rho_effective) continue;
                for (int s1 = 0; s1 < m; ++s1)
                    for (int s2 = 0; s2 < m; ++s2)
                        e.max_deviation = std::max(
                            e.max_deviation,
                            std::fabs(k.at_difference(j, s1, s2) - k1.values[s1] * k1.values[s2]));
            }
            report.entries.push_back(e);
        }
    } else if (k.order == 3) {
        const int N = grid.points_per_axis;
        auto tdist = [&](int a, int b) {
            return grid.torus_distance_1d(grid.coordinate(a), grid.coordinate(b));
        };
        double feasible = 0.0;
        for (int j2 = 0; j2 < N; ++j2)
            for (int j3 = 0; j3 < N; ++j3) {
                const double sep = std::min({tdist(0, j2), tdist(0, j3), tdist(j2, j3)});
                feasible = std::max(feasible, sep);
            }
        for (double rho : radii) {
            FactorizationEntry e;
            e.rho_requested = rho;
            e.rho_effective = std::min(rho, feasible);
            const std::size_t mb = k.mark_block();
            for (int j1 = 0; j1 < N; ++j1)
                for (int j2 = 0; j2 < N; ++j2)
                    for (int j3 = 0; j3 < N; ++j3) {
                        const double sep = std::min({tdist(j1, j2), tdist(j1, j3), tdist(j2, j3)});
                        if (sep + 1e-12 < e.rho_effective) continue;
                        const std::size_t base =
                            ((static_cast<std::size_t>(j1) * N + j2) * N + j3) * mb;
                        for (int s1 = 0; s1 < m; ++s1)
                            for (int s2 = 0; s2 < m; ++s2)
                                for (int s3 = 0; s3 < m; ++s3) {
                                    const std::size_t mk =
                                        (static_cast<std::size_t>(s1) * m + s2) * m + s3;
                                    const double prod =
                                        k1.values[s1] * k1.values[s2] * k1.values[s3];
                                    e.max_deviation = std::max(
                                        e.max_deviation, std::fabs(k.values[base + mk] - prod));
                                }
                    }
            report.entries.push_back(e);
        }
    } else {
        throw validation_error("check_factorization", "unsupported representation");
    }

    for (std::size_t i = 1; i < report.entries.size(); ++i)
        if (report.entries[i].rho_effective > report.entries[i - 1].rho_effective &&
            report.entries[i].max_deviation > report.entries[i - 1].max_deviation)
            report.monotone = false;
    return report;
}

} // namespace subcontact
