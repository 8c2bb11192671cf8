#pragma once

#include <complex>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "subcontact/config.hpp"
#include "subcontact/hierarchy.hpp"
#include "subcontact/io.hpp"
#include "subcontact/simulator.hpp"
#include "subcontact/stats.hpp"

namespace subcontact {

namespace fs = std::filesystem;

// Average of the band-limited pair function over the separation shell
// [r_lo, r_hi), per mark pair. Exact window integrals of the trigonometric
// interpolant for d = 1; plain grid-cell averages otherwise.
inline std::vector<double> pair_bin_averages(const CorrelationGrid& k2,
                                             const std::vector<double>& r_lo,
                                             const std::vector<double>& r_hi) {
    if (k2.rep != CorrelationGrid::Rep::Difference)
        throw validation_error("pair_bin_averages", "difference representation required");
    const int m = k2.mark_count;
    const std::size_t bins = r_lo.size();
    std::vector<double> out(bins * m * m, 0.0);

    if (k2.grid.dim == 1) {
        const int N = k2.grid.points_per_axis;
        for (int s1 = 0; s1 < m; ++s1)
            for (int s2 = 0; s2 < m; ++s2) {
                cvec spec(static_cast<std::size_t>(N));
                for (int j = 0; j < N; ++j)
                    spec[static_cast<std::size_t>(j)] = k2.at_difference(static_cast<std::size_t>(j), s1, s2);
                fft::transform(spec, false);
                for (std::size_t b = 0; b < bins; ++b) {
                    const double a = r_lo[b], hi = r_hi[b];
                    std::complex<double> acc = 0.0;
                    for (int j = 0; j < N; ++j) {
                        const double p = k2.grid.frequency(j);
                        const std::complex<double> c = spec[static_cast<std::size_t>(j)] / static_cast<double>(N);
                        const double window =
                            p == 0.0 ? 2.0 * (hi - a) : 2.0 * (std::sin(p * hi) - std::sin(p * a)) / p;
                        acc += c * window;
                    }
                    out[(b * m + s1) * m + s2] = acc.real() / (2.0 * (hi - a));
                }
            }
        return out;
    }

    // d > 1: average over grid cells whose min-image distance falls in the bin
    const int N = k2.grid.points_per_axis;
    const std::size_t cells = k2.grid.spatial_size();
    std::vector<double> weight(bins, 0.0);
    for (std::size_t j = 0; j < cells; ++j) {
        double r2 = 0.0;
        std::size_t rem = j;
        for (int a = 0; a < k2.grid.dim; ++a) {
            const int ja = static_cast<int>(rem % static_cast<std::size_t>(N));
            rem /= static_cast<std::size_t>(N);
            const double x = k2.grid.torus_distance_1d(k2.grid.coordinate(ja), 0.0);
            r2 += x * x;
        }
        const double r = std::sqrt(r2);
        for (std::size_t b = 0; b < bins; ++b) {
            if (r < r_lo[b] || r >= r_hi[b]) continue;
            weight[b] += 1.0;
            for (int s1 = 0; s1 < m; ++s1)
                for (int s2 = 0; s2 < m; ++s2) out[(b * m + s1) * m + s2] += k2.at_difference(j, s1, s2);
        }
    }
    for (std::size_t b = 0; b < bins; ++b)
        if (weight[b] > 0.0)
            for (int ch = 0; ch < m * m; ++ch) out[b * m * m + ch] /= weight[b];
    return out;
}

struct StationaryArtifacts {
    StationarySolution solution;
    std::vector<std::pair<int, FactorizationReport>> factorization;  // per order >= 2
    bool alias_warning = false;
    std::vector<std::string> files;
};

struct CauchyArtifacts {
    StationarySolution stationary;
    CauchyResult result;
    std::vector<double> fitted_rates;  // per order, fit over the second half
    bool monotone_tail = true;
    std::vector<std::string> files;
};

struct SimulateArtifacts {
    std::vector<EstimatorAccumulators> replicas;
    std::vector<MeanSE> k1;
    PairCorrelationEstimate pairs;
    std::vector<std::string> files;
};

struct CompareRow {
    std::string quantity;
    double analytic = 0.0;
    double estimate = 0.0;
    double se = 0.0;
    double z = 0.0;
    double threshold = 3.0;
    bool pass = true;
};

struct CompareReport {
    std::vector<CompareRow> rows;
    std::size_t pair_tests = 0;
    double pair_threshold = 3.0;  // Bonferroni-adjusted
    double max_abs_z = 0.0;
    bool pass = true;
    std::vector<std::string> files;
};

namespace expdetail {

inline void ensure_outdir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw numeric_error("cannot create output directory " + dir.string());
}

inline json base_manifest(const LoadedModel& m, const std::string& experiment) {
    json man;
    man["experiment"] = experiment;
    man["config"] = m.config.to_json();
    std::ostringstream hash;
    hash << std::hex << m.config.params_hash();
    man["params_hash"] = hash.str();
    man["seed"] = m.config.seed;
    man["spectral"] = {{"r", m.spectrum_raw.r},
                       {"kappa_cr", m.spectrum_raw.kappa_cr},
                       {"kappa_effective", m.kappa_eff}};
    return man;
}

inline void write_manifest(const fs::path& dir, json man, std::vector<std::string>& files) {
    man["outputs"] = files;
    write_text_file(dir / "manifest.json", man.dump(2) + "\n");
    files.push_back("manifest.json");
}

inline void check_alias(const HierarchyModel& h, const ExperimentConfig& cfg, bool& warn_flag) {
    if (h.alias_level > 1e-3) {
        if (cfg.strict_aliasing)
            throw numeric_error("aliasing check failed: |alpha_hat| at Nyquist = " +
                                std::to_string(h.alias_level));
        warn_flag = true;
    }
}

inline HierarchyState initial_state(const HierarchyModel& h, const ExperimentConfig& cfg) {
    if (cfg.initial.kind == "zero") return make_initial_state(h, cfg.n_max, 0.0);
    if (cfg.initial.kind == "constant") return make_initial_state(h, cfg.n_max, cfg.initial.value);
    if (static_cast<int>(cfg.initial.files.size()) != cfg.n_max)
        throw validation_error("solver.initial.files", "need one CHK1 file per order 1..n_max");
    HierarchyState st;
    for (int n = 1; n <= cfg.n_max; ++n) {
        CorrelationGrid g = read_chk1(cfg.initial.files[static_cast<std::size_t>(n - 1)]);
        HierarchyState proto = make_initial_state(h, cfg.n_max, 0.0);
        if (!g.same_shape(proto.grids[static_cast<std::size_t>(n - 1)]))
            throw validation_error("solver.initial.files",
                                   "file for order " + std::to_string(n) + " has the wrong shape");
        st.grids.push_back(std::move(g));
    }
    return st;
}

} // namespace expdetail

inline StationaryArtifacts run_stationary(const LoadedModel& m, const fs::path& outdir) {
    expdetail::ensure_outdir(outdir);
    StationaryArtifacts art;
    const HierarchyModel h = m.hierarchy();
    expdetail::check_alias(h, m.config, art.alias_warning);

    art.solution = solve_stationary(h, m.config.n_max, m.config.tol);

    const double L = m.config.box_side;
    const std::vector<double> radii = {L / 8.0, L / 4.0, 3.0 * L / 8.0, L / 2.0};
    for (int n = 2; n <= m.config.n_max; ++n)
        art.factorization.emplace_back(
            n, check_factorization(h, art.solution.grids[static_cast<std::size_t>(n - 1)],
                                   art.solution.grids[0], radii));

    for (int n = 1; n <= m.config.n_max; ++n) {
        const CorrelationGrid& g = art.solution.grids[static_cast<std::size_t>(n - 1)];
        const std::string stem = "k" + std::to_string(n);
        if (n <= 2) {
            write_text_file(outdir / (stem + ".csv"), grid_to_csv(g));
            art.files.push_back(stem + ".csv");
        }
        if (n >= 2) {
            write_chk1(outdir / (stem + ".chk1"), g);
            art.files.push_back(stem + ".chk1");
        }
    }

    {
        std::ostringstream os;
        os << "order,rho_requested,rho_effective,max_deviation\n";
        for (const auto& [n, rep] : art.factorization)
            for (const auto& e : rep.entries)
                os << n << "," << format_double(e.rho_requested) << ","
                   << format_double(e.rho_effective) << "," << format_double(e.max_deviation) << "\n";
        write_text_file(outdir / "factorization.csv", os.str());
        art.files.push_back("factorization.csv");
    }
    {
        std::ostringstream os;
        os << "order,bound\n";
        for (const auto& g : art.solution.growth)
            os << g.order << "," << format_double(g.bound) << "\n";
        write_text_file(outdir / "growth_bound.csv", os.str());
        art.files.push_back("growth_bound.csv");
    }

    json man = expdetail::base_manifest(m, "stationary");
    man["alias_level"] = h.alias_level;
    man["alias_warning"] = art.alias_warning;
    man["growth_fit"] = {{"D", art.solution.fitted_D}, {"H", art.solution.fitted_H}};
    {
        json res = json::array();
        for (double r : art.solution.stationarity_residual) res.push_back(r);
        man["stationarity_residual"] = res;
    }
    expdetail::write_manifest(outdir, man, art.files);
    return art;
}

inline CauchyArtifacts run_cauchy(const LoadedModel& m, const fs::path& outdir) {
    expdetail::ensure_outdir(outdir);
    CauchyArtifacts art;
    const HierarchyModel h = m.hierarchy();
    bool alias_warning = false;
    expdetail::check_alias(h, m.config, alias_warning);

    art.stationary = solve_stationary(h, m.config.n_max, m.config.tol);

    EvolveOptions opts;
    opts.T = m.config.horizon;
    opts.dt = m.config.dt;
    art.result = evolve_cauchy(h, expdetail::initial_state(h, m.config), opts, &art.stationary.grids);

    {
        std::ostringstream os;
        os << "t,order,sup_err,sup_norm\n";
        for (const auto& rec : art.result.trajectory)
            for (std::size_t n = 0; n < rec.sup_norm.size(); ++n)
                os << format_double(rec.t) << "," << n + 1 << "," << format_double(rec.sup_err[n])
                   << "," << format_double(rec.sup_norm[n]) << "\n";
        write_text_file(outdir / "trajectory.csv", os.str());
        art.files.push_back("trajectory.csv");
    }

    // fitted rates over the second half of the horizon, and a monotone-decay
    // check over the same window (records at the noise floor are skipped)
    const double t_lo = opts.T / 2.0, t_hi = opts.T;
    for (int n = 1; n <= m.config.n_max; ++n) {
        double rate = 0.0;
        try {
            rate = fit_decay_rate(art.result.trajectory, n, t_lo, t_hi);
        } catch (const numeric_error&) {
            rate = std::numeric_limits<double>::quiet_NaN();  // already converged to the floor
        }
        art.fitted_rates.push_back(rate);
    }
    for (std::size_t n = 0; n < art.result.trajectory.front().sup_norm.size(); ++n) {
        const double floor_level = 1e-13 * std::max(1.0, art.stationary.grids[n].max_abs());
        double prev = -1.0;
        for (const auto& rec : art.result.trajectory) {
            if (rec.t < t_lo) continue;
            const double e = rec.sup_err[n];
            if (e < floor_level) continue;
            if (prev >= 0.0 && e > prev * (1.0 + 1e-6) + 1e-15) art.monotone_tail = false;
            prev = e;
        }
    }

    {
        std::ostringstream os;
        os << "order,fitted_rate,fit_t_lo,fit_t_hi\n";
        for (int n = 1; n <= m.config.n_max; ++n)
            os << n << "," << format_double(art.fitted_rates[static_cast<std::size_t>(n - 1)]) << ","
               << format_double(t_lo) << "," << format_double(t_hi) << "\n";
        write_text_file(outdir / "decay_rates.csv", os.str());
        art.files.push_back("decay_rates.csv");
    }

    json man = expdetail::base_manifest(m, "cauchy");
    man["alias_level"] = h.alias_level;
    man["alias_warning"] = alias_warning;
    man["monotone_tail"] = art.monotone_tail;
    expdetail::write_manifest(outdir, man, art.files);

    if (!art.monotone_tail)
        throw numeric_error("run_cauchy: trajectory norms fail eventual monotone decay");
    return art;
}

inline SimulateArtifacts run_simulate(const LoadedModel& m, const fs::path& outdir, int workers,
                                      double kappa_override_factor = 1.0) {
    expdetail::ensure_outdir(outdir);
    SimulateArtifacts art;
    SimParams params = m.sim_params();
    params.kappa *= kappa_override_factor;

    art.replicas = run_all_replicas(params, workers);
    art.k1 = estimate_k1(art.replicas, params);
    art.pairs = estimate_pair_correlation(art.replicas, params);

    {
        std::ostringstream os;
        os << "mark,estimate,stderr\n";
        for (std::size_t s = 0; s < art.k1.size(); ++s)
            os << s << "," << format_double(art.k1[s].mean) << "," << format_double(art.k1[s].se)
               << "\n";
        write_text_file(outdir / "sim_k1.csv", os.str());
        art.files.push_back("sim_k1.csv");
    }
    {
        std::ostringstream os;
        os << "r_lo,r_hi,mark_i,mark_j,estimate,stderr\n";
        const int mm = art.pairs.marks;
        for (std::size_t b = 0; b < art.pairs.bins; ++b)
            for (int s1 = 0; s1 < mm; ++s1)
                for (int s2 = 0; s2 < mm; ++s2) {
                    os << format_double(art.pairs.r_lo[b]) << "," << format_double(art.pairs.r_hi[b])
                       << "," << s1 << "," << s2 << ",";
                    const std::size_t idx = (b * mm + s1) * mm + s2;
                    if (art.pairs.missing[idx]) {
                        os << ",\n";  // missing, not zero
                    } else {
                        os << format_double(art.pairs.value[idx].mean) << ","
                           << format_double(art.pairs.value[idx].se) << "\n";
                    }
                }
        write_text_file(outdir / "sim_k2.csv", os.str());
        art.files.push_back("sim_k2.csv");
    }

    EstimatorAccumulators merged = art.replicas[0];
    for (std::size_t i = 1; i < art.replicas.size(); ++i) merged.merge(art.replicas[i]);
    json man = expdetail::base_manifest(m, "simulate");
    man["event_counts"] = {{"deaths", merged.deaths},
                           {"contact_births", merged.contact_births},
                           {"immigrations", merged.immigrations}};
    man["replicas"] = params.replicas;
    man["peak_population"] = merged.peak_population;
    man["kappa_override_factor"] = kappa_override_factor;
    expdetail::write_manifest(outdir, man, art.files);
    return art;
}

// Solver and simulator on the same model; per-quantity z-scores at the
// 3-sigma policy. The pair-bin sweep uses a Bonferroni-adjusted threshold so
// that the family-wise false-alarm rate matches a single 3-sigma test.
inline CompareReport run_compare(const LoadedModel& m, const fs::path& outdir, int workers) {
    expdetail::ensure_outdir(outdir);
    CompareReport report;

    StationaryArtifacts analytic = run_stationary(m, outdir);
    SimulateArtifacts mc = run_simulate(m, outdir, workers, m.config.mismatch_kappa_factor);
    for (const auto& f : analytic.files) report.files.push_back(f);
    for (const auto& f : mc.files) report.files.push_back(f);

    const CorrelationGrid& k1 = analytic.solution.grids[0];
    for (std::size_t s = 0; s < k1.values.size(); ++s) {
        CompareRow row;
        row.quantity = "k1[" + std::to_string(s) + "]";
        row.analytic = k1.values[s];
        row.estimate = mc.k1[s].mean;
        row.se = mc.k1[s].se;
        row.z = row.se > 0.0 ? (row.estimate - row.analytic) / row.se
                             : (row.estimate == row.analytic ? 0.0 : std::numeric_limits<double>::infinity());
        row.threshold = 3.0;
        row.pass = std::fabs(row.z) <= row.threshold;
        report.rows.push_back(row);
    }

    if (m.config.n_max >= 2) {
        const CorrelationGrid& k2 = analytic.solution.grids[1];
        std::vector<double> avg = pair_bin_averages(k2, mc.pairs.r_lo, mc.pairs.r_hi);
        const int mm = mc.pairs.marks;
        std::size_t tests = 0;
        for (std::size_t idx = 0; idx < mc.pairs.value.size(); ++idx)
            if (!mc.pairs.missing[idx]) ++tests;
        report.pair_tests = tests;
        report.pair_threshold = bonferroni_threshold(tests, 3.0);
        for (std::size_t b = 0; b < mc.pairs.bins; ++b)
            for (int s1 = 0; s1 < mm; ++s1)
                for (int s2 = 0; s2 < mm; ++s2) {
                    const std::size_t idx = (b * mm + s1) * mm + s2;
                    if (mc.pairs.missing[idx]) continue;
                    CompareRow row;
                    row.quantity = "k2[" + format_double(mc.pairs.r_lo[b]) + "," +
                                   format_double(mc.pairs.r_hi[b]) + ")[" + std::to_string(s1) + "," +
                                   std::to_string(s2) + "]";
                    row.analytic = avg[idx];
                    row.estimate = mc.pairs.value[idx].mean;
                    row.se = mc.pairs.value[idx].se;
                    row.z = row.se > 0.0
                                ? (row.estimate - row.analytic) / row.se
                                : (row.estimate == row.analytic ? 0.0
                                                                : std::numeric_limits<double>::infinity());
                    row.threshold = report.pair_threshold;
                    row.pass = std::fabs(row.z) <= row.threshold;
                    report.rows.push_back(row);
                }
    }

    for (const auto& row : report.rows) {
        report.max_abs_z = std::max(report.max_abs_z, std::fabs(row.z));
        if (!row.pass) report.pass = false;
    }

    {
        std::ostringstream os;
        os << "quantity,analytic,estimate,stderr,z,threshold,pass\n";
        for (const auto& row : report.rows)
            os << row.quantity << "," << format_double(row.analytic) << ","
               << format_double(row.estimate) << "," << format_double(row.se) << ","
               << format_double(row.z) << "," << format_double(row.threshold) << ","
               << (row.pass ? "1" : "0") << "\n";
        write_text_file(outdir / "compare.csv", os.str());
        report.files.push_back("compare.csv");
    }
    {
        json summary;
        summary["pass"] = report.pass;
        summary["max_abs_z"] = report.max_abs_z;
        summary["k1_threshold"] = 3.0;
        summary["pair_tests"] = report.pair_tests;
        summary["pair_threshold_bonferroni"] = report.pair_threshold;
        summary["note"] = "pair bins use a Bonferroni-adjusted 3-sigma family threshold";
        write_text_file(outdir / "compare_summary.json", summary.dump(2) + "\n");
        report.files.push_back("compare_summary.json");
    }
    return report;
}

} // namespace subcontact
