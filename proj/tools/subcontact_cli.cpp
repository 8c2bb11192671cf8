#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "subcontact/config.hpp"
#include "subcontact/experiments.hpp"

namespace {

int worker_count() {
    if (const char* env = std::getenv("SUBCONTACT_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"subcritical marked contact model: hierarchy solver and event simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string experiment_override;
    std::string out_dir = "out";
    CLI::App* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("config", config_path, "path to the experiment config (JSON)")->required();
    run->add_option("--experiment", experiment_override, "override the config's experiment name");
    run->add_option("--out", out_dir, "output directory (default: out)");

    CLI11_PARSE(app, argc, argv);

    using namespace subcontact;
    try {
        ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
        if (!experiment_override.empty()) {
            cfg.experiment = experiment_override;
            if (cfg.experiment != "stationary" && cfg.experiment != "cauchy" &&
                cfg.experiment != "simulate" && cfg.experiment != "compare")
                throw validation_error("--experiment", "unknown experiment '" + cfg.experiment + "'");
        }
        const LoadedModel model = load_model(cfg);
        const int workers = worker_count();

        if (cfg.experiment == "stationary") {
            StationaryArtifacts art = run_stationary(model, out_dir);
            if (art.alias_warning)
                std::cerr << "warning: dispersal spectrum not resolved at the Nyquist frequency\n";
            std::cout << "stationary solve complete, orders 1.." << cfg.n_max << ", outputs in "
                      << out_dir << "\n";
        } else if (cfg.experiment == "cauchy") {
            CauchyArtifacts art = run_cauchy(model, out_dir);
            std::cout << "cauchy evolution complete, T = " << cfg.horizon << ", outputs in "
                      << out_dir << "\n";
            for (std::size_t n = 0; n < art.fitted_rates.size(); ++n)
                std::cout << "  order " << n + 1 << " fitted decay rate " << art.fitted_rates[n]
                          << "\n";
        } else if (cfg.experiment == "simulate") {
            SimulateArtifacts art = run_simulate(model, out_dir, workers);
            std::cout << "simulation complete, " << cfg.replicas << " replicas, outputs in "
                      << out_dir << "\n";
            for (std::size_t s = 0; s < art.k1.size(); ++s)
                std::cout << "  k1[" << s << "] = " << art.k1[s].mean << " +/- " << art.k1[s].se
                          << "\n";
        } else {
            CompareReport report = run_compare(model, out_dir, workers);
            std::cout << "comparison " << (report.pass ? "PASS" : "FAIL") << ": max |z| = "
                      << report.max_abs_z << " over " << report.rows.size() << " quantities ("
                      << report.pair_tests << " pair bins, Bonferroni threshold "
                      << report.pair_threshold << ")\n";
            if (!report.pass) return 3;
        }
        return 0;
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
