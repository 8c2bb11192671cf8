#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "subcontact/errors.hpp"

namespace subcontact::fft {

using cd = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 transform. Forward kernel is exp(-2*pi*i*jk/n);
// inverse divides by n.
inline void transform(cd* data, std::size_t n, bool inverse) {
    if (!is_power_of_two(n)) throw validation_error("fft", "length must be a power of two");
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const cd wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cd u = data[i + k];
                const cd v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) data[i] *= inv;
    }
}

inline void transform(std::vector<cd>& data, bool inverse) { transform(data.data(), data.size(), inverse); }

// Transform along one axis of a row-major multi-dimensional array.
// shape[axis] must be a power of two. Lines are gathered into a scratch
// buffer; sizes here are small enough that the copies do not matter.
inline void transform_axis(cd* data, const std::vector<std::size_t>& shape, std::size_t axis, bool inverse) {
    const std::size_t len = shape[axis];
    std::size_t stride = 1;
    for (std::size_t a = axis + 1; a < shape.size(); ++a) stride *= shape[a];
    std::size_t total = 1;
    for (std::size_t s : shape) total *= s;
    const std::size_t block = len * stride;
    std::vector<cd> line(len);
    for (std::size_t base = 0; base < total; base += block) {
        for (std::size_t off = 0; off < stride; ++off) {
            for (std::size_t k = 0; k < len; ++k) line[k] = data[base + off + k * stride];
            transform(line.data(), len, inverse);
            for (std::size_t k = 0; k < len; ++k) data[base + off + k * stride] = line[k];
        }
    }
}

} // namespace subcontact::fft
