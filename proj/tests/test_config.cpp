#include <doctest.h>

#include <string>

#include "subcontact/config.hpp"

using namespace subcontact;

namespace {

std::string warmup_json(const std::string& experiment = "stationary") {
    return R"({
      "experiment": ")" + experiment + R"(",
      "model": {
        "dim": 1, "L": 24.0, "kappa": 0.5,
        "alpha": {"family": "gaussian", "sigma": [1.0]},
        "marks": {"labels": ["0"], "weights": [1.0]},
        "Q": [[1.0]],
        "c": [0.5]
      },
      "solver": {"N": 64, "n_max": 2, "tol": 1e-10, "T": 20.0},
      "simulation": {"seed": 7, "T": 50.0, "burn_in": 5.0, "replicas": 4}
    })";
}

} // namespace

TEST_CASE("config parses and survives a canonical round trip") {
    ExperimentConfig cfg = ExperimentConfig::from_string(warmup_json());
    CHECK(cfg.experiment == "stationary");
    CHECK(cfg.dim == 1);
    CHECK(cfg.box_side == 24.0);
    CHECK(cfg.grid_points == 64);
    CHECK(cfg.replicas == 4);

    const std::string canon = cfg.canonical_text();
    ExperimentConfig again = ExperimentConfig::from_string(canon);
    CHECK(again.canonical_text() == canon);
    CHECK(again.params_hash() == cfg.params_hash());
}

TEST_CASE("config reports precise field paths") {
    auto expect_field = [](const std::string& text, const std::string& field) {
        try {
            load_model(ExperimentConfig::from_string(text));
            FAIL_CHECK("expected a validation error for " << field);
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };

    SUBCASE("missing experiment") {
        expect_field(R"({"model": {}})", "experiment");
    }
    SUBCASE("unknown experiment") {
        std::string bad = warmup_json("fancy");
        expect_field(bad, "experiment");
    }
    SUBCASE("missing kappa") {
        std::string bad = warmup_json();
        bad.replace(bad.find("\"kappa\""), std::string("\"kappa\"").size(), "\"kappa_oops\"");
        expect_field(bad, "model.kappa");
    }
    SUBCASE("critical kappa is rejected") {
        std::string bad = warmup_json();
        bad.replace(bad.find("\"kappa\": 0.5"), std::string("\"kappa\": 0.5").size(),
                    "\"kappa\": 1.0");
        expect_field(bad, "kappa");
    }
    SUBCASE("grid must be a power of two") {
        std::string bad = warmup_json();
        bad.replace(bad.find("\"N\": 64"), std::string("\"N\": 64").size(), "\"N\": 60");
        expect_field(bad, "N");
    }
    SUBCASE("box must dominate the dispersal scale") {
        std::string bad = warmup_json();
        bad.replace(bad.find("\"L\": 24.0"), std::string("\"L\": 24.0").size(), "\"L\": 12.0");
        expect_field(bad, "L");
    }
    SUBCASE("weights must be positive") {
        std::string bad = warmup_json();
        bad.replace(bad.find("\"weights\": [1.0]"), std::string("\"weights\": [1.0]").size(),
                    "\"weights\": [-1.0]");
        expect_field(bad, "weights");
    }
    SUBCASE("immigration must be positive") {
        std::string bad = warmup_json();
        bad.replace(bad.find("\"c\": [0.5]"), std::string("\"c\": [0.5]").size(), "\"c\": [0.0]");
        expect_field(bad, "c[0]");
    }
    SUBCASE("dt stability bound") {
        std::string bad = warmup_json();
        bad.replace(bad.find("\"tol\": 1e-10"), std::string("\"tol\": 1e-10").size(),
                    "\"tol\": 1e-10, \"dt\": 0.9");
        expect_field(bad, "solver.dt");
    }
    SUBCASE("order cap") {
        std::string bad = warmup_json();
        bad.replace(bad.find("\"n_max\": 2"), std::string("\"n_max\": 2").size(), "\"n_max\": 5");
        expect_field(bad, "n_max");
    }
}

TEST_CASE("load_model renormalizes eagerly") {
    std::string text = R"({
      "experiment": "stationary",
      "model": {
        "dim": 1, "L": 24.0, "kappa": 0.2,
        "alpha": {"family": "gaussian", "sigma": [1.0]},
        "marks": {"labels": ["a", "b"], "weights": [1.0, 1.0]},
        "Q": [[2.0, 1.0], [1.0, 2.0]],
        "c": [1.0, 2.0]
      },
      "solver": {"N": 64, "n_max": 2}
    })";
    LoadedModel m = load_model(ExperimentConfig::from_string(text));
    CHECK(m.spectrum_raw.r == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(m.kappa_eff == doctest::Approx(0.6).epsilon(1e-10));
    CHECK(krein_rutman(m.q_renormalized).r == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.sim_params().kappa == doctest::Approx(0.6).epsilon(1e-10));
}

TEST_CASE("ball and box kernels parse") {
    std::string text = R"({
      "experiment": "simulate",
      "model": {
        "dim": 1, "L": 24.0, "kappa": 0.5,
        "alpha": {"family": "uniform_ball", "radius": 1.0},
        "marks": {"labels": ["0"], "weights": [1.0]},
        "Q": [[1.0]],
        "c": [0.5]
      }
    })";
    LoadedModel m = load_model(ExperimentConfig::from_string(text));
    CHECK(m.alpha.family() == DispersalKernel::Family::UniformBall);

    std::string box = text;
    box.replace(box.find(R"({"family": "uniform_ball", "radius": 1.0})"),
                std::string(R"({"family": "uniform_ball", "radius": 1.0})").size(),
                R"({"family": "uniform_box", "half_widths": [1.0]})");
    CHECK(load_model(ExperimentConfig::from_string(box)).alpha.family() ==
          DispersalKernel::Family::UniformBox);
}
