#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "subcontact/grid.hpp"
#include "subcontact/io.hpp"

using namespace subcontact;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("torus grid validation") {
    CHECK_THROWS_AS(TorusGrid(1, 10.0, 12), validation_error);  // not a power of two
    CHECK_THROWS_AS(TorusGrid(1, 10.0, 4), validation_error);   // too few points
    CHECK_THROWS_AS(TorusGrid(1, -1.0, 16), validation_error);
    CHECK_THROWS_AS(TorusGrid(0, 1.0, 16), validation_error);
}

TEST_CASE("frequency folding and separations") {
    TorusGrid g(1, 16.0, 16);
    CHECK(g.frequency(0) == 0.0);
    CHECK(g.folded_index(7) == 7);
    CHECK(g.folded_index(8) == -8);
    CHECK(g.folded_index(9) == -7);
    CHECK(g.is_nyquist(8));
    CHECK(g.signed_separation(1.0, 15.0) == doctest::Approx(2.0));
    CHECK(g.torus_distance_1d(0.5, 15.5) == doctest::Approx(1.0));
    CHECK(g.spacing() == doctest::Approx(1.0));
}

TEST_CASE("immigration rate must be strictly positive") {
    CHECK_THROWS_AS(ImmigrationRate({1.0, 0.0}), validation_error);
    CHECK_THROWS_AS(ImmigrationRate(std::vector<double>{}), validation_error);
}

TEST_CASE("chk1 round-trips bit-exactly") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    TorusGrid grid(1, 16.0, 16);

    auto roundtrip = [&](CorrelationGrid g, const char* name) {
        for (double& v : g.values) v = u(gen);
        const auto path = temp_file(std::string("chk1_test_") + name + ".chk1");
        write_chk1(path, g);
        CorrelationGrid back = read_chk1(path);
        REQUIRE(back.same_shape(g));
        CHECK(back.order == g.order);
        CHECK(back.mark_count == g.mark_count);
        for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(back.values[i] == g.values[i]);
        std::filesystem::remove(path);
    };

    roundtrip(CorrelationGrid::mark_only(3), "markonly");
    roundtrip(CorrelationGrid::difference(grid, 2), "difference");
    roundtrip(CorrelationGrid::full(grid, 3, 2), "full");
}

TEST_CASE("chk1 rejects corrupt input") {
    const auto path = temp_file("chk1_bad.chk1");
    write_text_file(path, "NOPE blah");
    CHECK_THROWS_AS(read_chk1(path), validation_error);
    std::filesystem::remove(path);

    CorrelationGrid g = CorrelationGrid::mark_only(2);
    const auto path2 = temp_file("chk1_trunc.chk1");
    write_chk1(path2, g);
    // truncate the payload
    std::filesystem::resize_file(path2, std::filesystem::file_size(path2) - 4);
    CHECK_THROWS_AS(read_chk1(path2), validation_error);
    std::filesystem::remove(path2);
}

TEST_CASE("grid csv has the advertised layout") {
    TorusGrid grid(1, 16.0, 16);
    CorrelationGrid g = CorrelationGrid::difference(grid, 2);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = static_cast<double>(i);
    const std::string csv = grid_to_csv(g);
    std::istringstream is(csv);
    std::string header;
    std::getline(is, header);
    CHECK(header == "w1,s1,s2,value");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 16 * 2 * 2);

    CorrelationGrid k1 = CorrelationGrid::mark_only(2);
    k1.values = {1.5, 2.5};
    CHECK(grid_to_csv(k1) == "mark,value\n0,1.5\n1,2.5\n");
}

TEST_CASE("sup_difference requires matching shapes") {
    CorrelationGrid a = CorrelationGrid::mark_only(2);
    CorrelationGrid b = CorrelationGrid::mark_only(3);
    CHECK_THROWS_AS(a.sup_difference(b), validation_error);
}
