#include <doctest.h>

#include <complex>
#include <random>

#include "oracles.hpp"
#include "subcontact/fft.hpp"
#include "subcontact/linalg.hpp"
#include "subcontact/stats.hpp"

using namespace subcontact;

TEST_CASE("lu_solve recovers known solutions") {
    Matrix a(2, 2);
    a(0, 0) = 2.0; a(0, 1) = 1.0;
    a(1, 0) = 1.0; a(1, 1) = 3.0;
    Vector x = lu_solve(a, {5.0, 10.0});
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("lu_solve rejects singular systems") {
    Matrix a(2, 2);
    a(0, 0) = 1.0; a(0, 1) = 2.0;
    a(1, 0) = 2.0; a(1, 1) = 4.0;
    CHECK_THROWS_AS(lu_solve(a, {1.0, 1.0}), numeric_error);
}

TEST_CASE("lu_solve random systems verified by residual") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + trial % 8;
        Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) a(i, j) = u(gen);
            a(i, i) += 4.0;
        }
        Vector b(n);
        for (double& v : b) v = u(gen);
        Vector x = lu_solve(a, b);
        Vector r = mat_vec(a, x);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(r[i] - b[i]) < 1e-11);
    }
}

TEST_CASE("fft matches the reference DFT and round-trips") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::complex<double>> data(32);
    for (auto& v : data) v = {u(gen), u(gen)};

    auto expect = oracles::naive_dft(data, false);
    auto got = data;
    fft::transform(got, false);
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(std::abs(got[i] - expect[i]) < 1e-12);

    fft::transform(got, true);
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(std::abs(got[i] - data[i]) < 1e-13);
}

TEST_CASE("fft rejects non power-of-two lengths") {
    std::vector<std::complex<double>> data(12);
    CHECK_THROWS_AS(fft::transform(data, false), validation_error);
}

TEST_CASE("transform_axis equals per-line transforms") {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t rows = 8, cols = 16;
    std::vector<std::complex<double>> a(rows * cols);
    for (auto& v : a) v = {u(gen), u(gen)};

    // axis 1 (contiguous rows)
    auto rowwise = a;
    fft::transform_axis(rowwise.data(), {rows, cols}, 1, false);
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<std::complex<double>> line(a.begin() + static_cast<long>(i * cols),
                                               a.begin() + static_cast<long>((i + 1) * cols));
        auto ref = oracles::naive_dft(line, false);
        for (std::size_t j = 0; j < cols; ++j) CHECK(std::abs(rowwise[i * cols + j] - ref[j]) < 1e-11);
    }

    // axis 0 (strided columns)
    auto colwise = a;
    fft::transform_axis(colwise.data(), {rows, cols}, 0, false);
    for (std::size_t j = 0; j < cols; ++j) {
        std::vector<std::complex<double>> line(rows);
        for (std::size_t i = 0; i < rows; ++i) line[i] = a[i * cols + j];
        auto ref = oracles::naive_dft(line, false);
        for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(colwise[i * cols + j] - ref[i]) < 1e-11);
    }
}

TEST_CASE("bonferroni threshold reduces to the base for one test") {
    CHECK(bonferroni_threshold(1) == doctest::Approx(3.0));
    const double z40 = bonferroni_threshold(40);
    CHECK(z40 > 3.0);
    // the adjusted threshold carries the per-test tail alpha/40
    CHECK(two_sided_tail(z40) * 40.0 == doctest::Approx(two_sided_tail(3.0)).epsilon(1e-9));
}

TEST_CASE("linear_fit recovers an exact line") {
    std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    std::vector<double> y{1.0, 0.5, 0.0, -0.5};
    auto f = linear_fit(x, y);
    CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-14));
}
