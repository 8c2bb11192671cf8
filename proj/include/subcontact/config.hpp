#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subcontact/dispersal.hpp"
#include "subcontact/errors.hpp"
#include "subcontact/grid.hpp"
#include "subcontact/hierarchy.hpp"
#include "subcontact/io.hpp"
#include "subcontact/markspace.hpp"
#include "subcontact/simulator.hpp"

namespace subcontact {

using json = nlohmann::json;

namespace cfgdetail {

template <typename T>
T require(const json& j, const std::string& block, const std::string& key) {
    if (!j.contains(key)) throw validation_error(block + "." + key, "missing field");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw validation_error(block + "." + key, "wrong type");
    }
}

template <typename T>
T optional(const json& j, const std::string& block, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw validation_error(block + "." + key, "wrong type");
    }
}

} // namespace cfgdetail

struct AlphaSpec {
    std::string family;                 // gaussian | uniform_ball | uniform_box
    std::vector<double> sigma;          // gaussian, diagonal
    std::vector<std::vector<double>> cov;  // gaussian, full (alternative to sigma)
    std::vector<double> mean;           // gaussian
    double radius = 0.0;                // uniform_ball
    std::vector<double> half_widths;    // uniform_box

    DispersalKernel build(int dim) const {
        if (family == "gaussian") {
            if (!cov.empty()) {
                Matrix c(cov.size(), cov.size());
                if (static_cast<int>(cov.size()) != dim)
                    throw validation_error("model.alpha.cov", "dimension mismatch");
                for (std::size_t i = 0; i < cov.size(); ++i) {
                    if (static_cast<int>(cov[i].size()) != dim)
                        throw validation_error("model.alpha.cov", "rows must have length d");
                    for (std::size_t j = 0; j < cov[i].size(); ++j) c(i, j) = cov[i][j];
                }
                return DispersalKernel::gaussian_cov(dim, c, mean);
            }
            if (sigma.empty()) throw validation_error("model.alpha", "gaussian needs sigma or cov");
            return DispersalKernel::gaussian(dim, sigma, mean);
        }
        if (family == "uniform_ball") return DispersalKernel::uniform_ball(dim, radius);
        if (family == "uniform_box") return DispersalKernel::uniform_box(half_widths);
        throw validation_error("model.alpha.family", "unknown family '" + family + "'");
    }
};

struct InitialSpec {
    std::string kind = "zero";         // zero | constant | file
    double value = 0.0;                // constant
    std::vector<std::string> files;    // file: one CHK1 path per order
};

struct ExperimentConfig {
    std::string experiment;  // stationary | cauchy | simulate | compare

    // model block
    int dim = 1;
    double box_side = 1.0;
    double kappa = 0.0;  // raw, pre-renormalization
    AlphaSpec alpha;
    std::vector<std::string> mark_labels;
    std::vector<double> mark_weights;
    std::vector<std::vector<double>> q_rows;
    std::vector<double> c_values;

    // solver block
    int grid_points = 64;
    int n_max = 1;
    double tol = 1e-10;
    double dt = 0.0;   // 0 -> default 0.1 / (n_max (1 + kappa))
    double horizon = 10.0;
    bool strict_aliasing = false;
    InitialSpec initial;

    // simulation block
    std::uint64_t seed = 1;
    double sim_horizon = 100.0;
    double burn_in = 0.0;
    int replicas = 8;
    std::size_t population_cap = 1000000;
    double pair_bin_width = 0.0;

    // compare block
    double mismatch_kappa_factor = 1.0;  // != 1 is a deliberate negative control

    static ExperimentConfig from_json(const json& j);
    static ExperimentConfig from_string(const std::string& text) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw validation_error("config", std::string("parse error: ") + e.what());
        }
        return from_json(j);
    }
    static ExperimentConfig from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw validation_error("config", "cannot open " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        return from_string(ss.str());
    }

    json to_json() const;
    std::string canonical_text() const { return to_json().dump(2) + "\n"; }
    std::uint64_t params_hash() const { return fnv1a64(canonical_text()); }
};

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.experiment = cfgdetail::require<std::string>(j, "config", "experiment");
    if (cfg.experiment != "stationary" && cfg.experiment != "cauchy" &&
        cfg.experiment != "simulate" && cfg.experiment != "compare")
        throw validation_error("config.experiment", "unknown experiment '" + cfg.experiment + "'");

    if (!j.contains("model")) throw validation_error("model", "missing block");
    const json& model = j.at("model");
    cfg.dim = cfgdetail::require<int>(model, "model", "dim");
    cfg.box_side = cfgdetail::require<double>(model, "model", "L");
    cfg.kappa = cfgdetail::require<double>(model, "model", "kappa");

    if (!model.contains("alpha")) throw validation_error("model.alpha", "missing block");
    const json& alpha = model.at("alpha");
    cfg.alpha.family = cfgdetail::require<std::string>(alpha, "model.alpha", "family");
    cfg.alpha.sigma = cfgdetail::optional<std::vector<double>>(alpha, "model.alpha", "sigma", {});
    cfg.alpha.cov =
        cfgdetail::optional<std::vector<std::vector<double>>>(alpha, "model.alpha", "cov", {});
    cfg.alpha.mean = cfgdetail::optional<std::vector<double>>(alpha, "model.alpha", "mean", {});
    cfg.alpha.radius = cfgdetail::optional<double>(alpha, "model.alpha", "radius", 0.0);
    cfg.alpha.half_widths =
        cfgdetail::optional<std::vector<double>>(alpha, "model.alpha", "half_widths", {});

    if (!model.contains("marks")) throw validation_error("model.marks", "missing block");
    const json& marks = model.at("marks");
    cfg.mark_labels = cfgdetail::require<std::vector<std::string>>(marks, "model.marks", "labels");
    cfg.mark_weights = cfgdetail::require<std::vector<double>>(marks, "model.marks", "weights");
    cfg.q_rows = cfgdetail::require<std::vector<std::vector<double>>>(model, "model", "Q");
    cfg.c_values = cfgdetail::require<std::vector<double>>(model, "model", "c");

    if (j.contains("solver")) {
        const json& solver = j.at("solver");
        cfg.grid_points = cfgdetail::optional<int>(solver, "solver", "N", cfg.grid_points);
        cfg.n_max = cfgdetail::optional<int>(solver, "solver", "n_max", cfg.n_max);
        cfg.tol = cfgdetail::optional<double>(solver, "solver", "tol", cfg.tol);
        cfg.dt = cfgdetail::optional<double>(solver, "solver", "dt", cfg.dt);
        cfg.horizon = cfgdetail::optional<double>(solver, "solver", "T", cfg.horizon);
        cfg.strict_aliasing =
            cfgdetail::optional<bool>(solver, "solver", "strict_aliasing", cfg.strict_aliasing);
        if (solver.contains("initial")) {
            const json& init = solver.at("initial");
            cfg.initial.kind = cfgdetail::require<std::string>(init, "solver.initial", "kind");
            cfg.initial.value = cfgdetail::optional<double>(init, "solver.initial", "value", 0.0);
            cfg.initial.files =
                cfgdetail::optional<std::vector<std::string>>(init, "solver.initial", "files", {});
            if (cfg.initial.kind != "zero" && cfg.initial.kind != "constant" &&
                cfg.initial.kind != "file")
                throw validation_error("solver.initial.kind", "must be zero, constant or file");
        }
    }

    if (j.contains("simulation")) {
        const json& sim = j.at("simulation");
        cfg.seed = cfgdetail::optional<std::uint64_t>(sim, "simulation", "seed", cfg.seed);
        cfg.sim_horizon = cfgdetail::optional<double>(sim, "simulation", "T", cfg.sim_horizon);
        cfg.burn_in = cfgdetail::optional<double>(sim, "simulation", "burn_in", cfg.burn_in);
        cfg.replicas = cfgdetail::optional<int>(sim, "simulation", "replicas", cfg.replicas);
        cfg.population_cap =
            cfgdetail::optional<std::size_t>(sim, "simulation", "cap", cfg.population_cap);
        cfg.pair_bin_width =
            cfgdetail::optional<double>(sim, "simulation", "bin_width", cfg.pair_bin_width);
    }

    if (j.contains("compare")) {
        const json& cmp = j.at("compare");
        cfg.mismatch_kappa_factor =
            cfgdetail::optional<double>(cmp, "compare", "mismatch_kappa_factor", 1.0);
    }
    return cfg;
}

inline json ExperimentConfig::to_json() const {
    json alpha_j{{"family", alpha.family}};
    if (!alpha.sigma.empty()) alpha_j["sigma"] = alpha.sigma;
    if (!alpha.cov.empty()) alpha_j["cov"] = alpha.cov;
    if (!alpha.mean.empty()) alpha_j["mean"] = alpha.mean;
    if (alpha.radius > 0.0) alpha_j["radius"] = alpha.radius;
    if (!alpha.half_widths.empty()) alpha_j["half_widths"] = alpha.half_widths;

    json solver_j{{"N", grid_points}, {"n_max", n_max},          {"tol", tol},
                  {"dt", dt},         {"T", horizon},            {"strict_aliasing", strict_aliasing}};
    json init_j{{"kind", initial.kind}};
    if (initial.kind == "constant") init_j["value"] = initial.value;
    if (initial.kind == "file") init_j["files"] = initial.files;
    solver_j["initial"] = init_j;

    return json{
        {"experiment", experiment},
        {"model",
         {{"dim", dim},
          {"L", box_side},
          {"kappa", kappa},
          {"alpha", alpha_j},
          {"marks", {{"labels", mark_labels}, {"weights", mark_weights}}},
          {"Q", q_rows},
          {"c", c_values}}},
        {"solver", solver_j},
        {"simulation",
         {{"seed", seed},
          {"T", sim_horizon},
          {"burn_in", burn_in},
          {"replicas", replicas},
          {"cap", population_cap},
          {"bin_width", pair_bin_width}}},
        {"compare", {{"mismatch_kappa_factor", mismatch_kappa_factor}}}};
}

// Everything derived from a validated config: the renormalized kernel, its
// spectral data, and ready-to-use solver and simulator inputs.
struct LoadedModel {
    ExperimentConfig config;
    MarkSpace marks;
    MutationKernel q_raw;
    MutationKernel q_renormalized;
    SpectralData spectrum_raw;
    double kappa_eff = 0.0;
    DispersalKernel alpha = DispersalKernel::uniform_ball(1, 1.0);
    ImmigrationRate c;
    TorusGrid grid;

    HierarchyModel hierarchy() const {
        return HierarchyModel::build(grid, q_renormalized, kappa_eff, c, alpha);
    }

    SimParams sim_params() const {
        SimParams p;
        p.kappa = kappa_eff;
        p.c = c;
        p.dim = config.dim;
        p.box_side = config.box_side;
        p.alpha = alpha;
        p.Q = q_renormalized;
        p.seed = config.seed;
        p.horizon = config.sim_horizon;
        p.burn_in = config.burn_in;
        p.replicas = config.replicas;
        p.population_cap = config.population_cap;
        p.pair_bin_width = config.pair_bin_width;
        return p;
    }
};

// Builds and cross-validates the model. Renormalization is applied here,
// eagerly: downstream code only ever sees the r = 1 kernel and the
// effective kappa in (0,1).
inline LoadedModel load_model(const ExperimentConfig& cfg) {
    LoadedModel m;
    m.config = cfg;
    m.marks = MarkSpace(cfg.mark_labels, cfg.mark_weights);

    const std::size_t mm = m.marks.size();
    if (cfg.q_rows.size() != mm) throw validation_error("model.Q", "need one row per mark");
    std::vector<double> entries;
    entries.reserve(mm * mm);
    for (std::size_t i = 0; i < mm; ++i) {
        if (cfg.q_rows[i].size() != mm)
            throw validation_error("model.Q[" + std::to_string(i) + "]", "row length must equal mark count");
        for (double v : cfg.q_rows[i]) entries.push_back(v);
    }
    m.q_raw = MutationKernel(m.marks, std::move(entries));
    if (cfg.c_values.size() != mm) throw validation_error("model.c", "need one rate per mark");
    m.c = ImmigrationRate(cfg.c_values);

    m.spectrum_raw = krein_rutman(m.q_raw);
    auto [q_renorm, kappa_eff] = renormalize(m.q_raw, cfg.kappa);
    m.q_renormalized = std::move(q_renorm);
    m.kappa_eff = kappa_eff;

    m.alpha = cfg.alpha.build(cfg.dim);
    m.grid = TorusGrid(cfg.dim, cfg.box_side, cfg.grid_points);

    if (cfg.experiment != "simulate") {
        // surface grid/box validation problems now, with config field names
        HierarchyModel::build(m.grid, m.q_renormalized, m.kappa_eff, m.c, m.alpha);
        const double dt = cfg.dt > 0.0 ? cfg.dt : 0.1 / (cfg.n_max * (1.0 + m.kappa_eff));
        if (!(dt * cfg.n_max * (1.0 + m.kappa_eff) < 1.0))
            throw validation_error("solver.dt", "explicit stepping requires dt*n_max*(1+kappa) < 1");
        if (cfg.n_max < 1 || cfg.n_max > 3)
            throw validation_error("solver.n_max", "supported orders are 1..3");
        if (cfg.n_max >= 3 && cfg.dim != 1)
            throw validation_error("solver.n_max", "order-3 tensors require d = 1");
    }
    return m;
}

} // namespace subcontact
