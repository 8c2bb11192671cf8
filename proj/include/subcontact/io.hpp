#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "subcontact/errors.hpp"
#include "subcontact/grid.hpp"

namespace subcontact {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Shortest-round-trip decimal formatting; keeps emitted files reproducible.
inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw numeric_error("cannot open " + path.string() + " for writing");
    out << content;
}

// CSV export. Columns: coordinates, mark indices, value.
inline std::string grid_to_csv(const CorrelationGrid& g) {
    std::ostringstream os;
    const int m = g.mark_count;
    if (g.rep == CorrelationGrid::Rep::MarkOnly) {
        os << "mark,value\n";
        for (int s = 0; s < m; ++s) os << s << "," << format_double(g.values[s]) << "\n";
        return os.str();
    }
    if (g.rep == CorrelationGrid::Rep::Difference) {
        for (int a = 0; a < g.grid.dim; ++a) os << "w" << a + 1 << ",";
        os << "s1,s2,value\n";
        const int N = g.grid.points_per_axis;
        const std::size_t bins = g.grid.spatial_size();
        for (std::size_t j = 0; j < bins; ++j) {
            std::string coords;
            std::size_t rem = j;
            for (int a = 0; a < g.grid.dim; ++a) {
                const int ja = static_cast<int>(rem % static_cast<std::size_t>(N));
                rem /= static_cast<std::size_t>(N);
                coords += format_double(g.grid.coordinate(ja)) + ",";
            }
            for (int s1 = 0; s1 < m; ++s1)
                for (int s2 = 0; s2 < m; ++s2)
                    os << coords << s1 << "," << s2 << ","
                       << format_double(g.at_difference(j, s1, s2)) << "\n";
        }
        return os.str();
    }
    // Full, d = 1
    for (int i = 0; i < g.order; ++i) os << "x" << i + 1 << ",";
    for (int i = 0; i < g.order; ++i) os << "s" << i + 1 << ",";
    os << "value\n";
    const int N = g.grid.points_per_axis;
    const std::size_t mark_block = g.mark_block();
    std::vector<int> pos(g.order, 0);
    std::size_t idx = 0;
    for (std::size_t sp = 0; sp < g.values.size() / mark_block; ++sp) {
        std::string coords;
        for (int i = 0; i < g.order; ++i) coords += format_double(g.grid.coordinate(pos[i])) + ",";
        for (std::size_t mk = 0; mk < mark_block; ++mk, ++idx) {
            os << coords;
            std::size_t rem = mk;
            std::vector<int> ss(g.order);
            for (int i = g.order - 1; i >= 0; --i) {
                ss[i] = static_cast<int>(rem % static_cast<std::size_t>(m));
                rem /= static_cast<std::size_t>(m);
            }
            for (int i = 0; i < g.order; ++i) os << ss[i] << ",";
            os << format_double(g.values[idx]) << "\n";
        }
        int axis = g.order - 1;
        while (axis >= 0 && ++pos[axis] == N) pos[axis--] = 0;
    }
    return os.str();
}

// Compact binary dump. Layout: magic "CHK1", then little-endian
// u32 n, u32 d, u32 N, f64 L, u32 m, then the value array as raw f64 in
// row-major order. The representation follows from n: mark-only for n = 1,
// difference for n = 2, full tensor for n >= 3.
inline void write_chk1(const std::filesystem::path& path, const CorrelationGrid& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw numeric_error("cannot open " + path.string() + " for writing");
    auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    out.write("CHK1", 4);
    put_u32(static_cast<std::uint32_t>(g.order));
    put_u32(static_cast<std::uint32_t>(g.grid.dim));
    put_u32(static_cast<std::uint32_t>(g.grid.points_per_axis));
    put_f64(g.grid.length);
    put_u32(static_cast<std::uint32_t>(g.mark_count));
    for (double v : g.values) put_f64(v);
}

inline CorrelationGrid read_chk1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("chk1", "cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CHK1", 4) != 0)
        throw validation_error("chk1", path.string() + ": bad magic");
    auto get_u32 = [&] {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_f64 = [&] {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    const std::uint32_t n = get_u32();
    const std::uint32_t d = get_u32();
    const std::uint32_t N = get_u32();
    const double L = get_f64();
    const std::uint32_t m = get_u32();
    if (!in) throw validation_error("chk1", path.string() + ": truncated header");

    CorrelationGrid g;
    if (n == 1) {
        g = CorrelationGrid::mark_only(static_cast<int>(m));
    } else if (n == 2) {
        g = CorrelationGrid::difference(TorusGrid(static_cast<int>(d), L, static_cast<int>(N)),
                                        static_cast<int>(m));
    } else {
        g = CorrelationGrid::full(TorusGrid(static_cast<int>(d), L, static_cast<int>(N)),
                                  static_cast<int>(n), static_cast<int>(m));
    }
    for (double& v : g.values) v = get_f64();
    if (!in) throw validation_error("chk1", path.string() + ": truncated payload");
    char extra;
    if (in.read(&extra, 1)) throw validation_error("chk1", path.string() + ": trailing bytes");
    return g;
}

} // namespace subcontact
