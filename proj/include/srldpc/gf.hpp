#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace srldpc {

namespace gf {

/// Characteristic-2 addition; valid for any field size.
inline std::uint16_t add(std::uint16_t a, std::uint16_t b) { return a ^ b; }

/// Unnormalised Walsh-Hadamard transform in place, length must be a power
/// of two. out[k] = sum_q (-1)^popcount(k & q) v[q]; applying it twice
/// multiplies by the length. Diagonalises convolution under GF(2^m) addition.
inline void wht(std::span<double> v) {
    std::size_t b = v.size();
    if (b == 0 || (b & (b - 1)) != 0)
        throw std::invalid_argument("wht: length must be a power of two");
    for (std::size_t half = 1; half < b; half <<= 1) {
        for (std::size_t start = 0; start < b; start += 2 * half) {
            for (std::size_t i = start; i < start + half; ++i) {
                double x = v[i];
                double y = v[i + half];
                v[i] = x + y;
                v[i + half] = x - y;
            }
        }
    }
}

}  // namespace gf

/// GF(2^m) with exp/log tables over the power basis. Immutable after
/// construction; all operations are pure and thread-safe.
class Field {
public:
    /// primitive_poly is the reduction polynomial bitmask including the
    /// leading term, e.g. 0x11D for GF(256). It must be primitive: the
    /// construction verifies that x generates the full multiplicative group.
    explicit Field(int m, std::uint32_t primitive_poly = 0) : m_(m) {
        if (m < 1 || m > 10) throw std::invalid_argument("Field: m must be in [1, 10]");
        size_ = 1u << m;
        poly_ = primitive_poly ? primitive_poly : default_poly(m);
        if (std::bit_width(poly_) != static_cast<unsigned>(m + 1))
            throw std::invalid_argument("Field: reduction polynomial degree must equal m");

        log_.assign(size_, 0);
        exp_.assign(2 * (size_ - 1), 0);
        std::vector<bool> seen(size_, false);
        std::uint32_t e = 1;
        for (std::uint32_t k = 0; k < size_ - 1; ++k) {
            if (seen[e])
                throw std::invalid_argument("Field: polynomial is not primitive");
            seen[e] = true;
            exp_[k] = static_cast<std::uint16_t>(e);
            exp_[k + size_ - 1] = exp_[k];
            log_[e] = static_cast<std::uint16_t>(k);
            e <<= 1;
            if (e & size_) e ^= poly_;
        }
        if (e != 1) throw std::invalid_argument("Field: polynomial is not primitive");
    }

    int m() const { return m_; }
    std::uint32_t size() const { return size_; }  // B = 2^m
    std::uint32_t poly() const { return poly_; }

    std::uint16_t mul(std::uint16_t a, std::uint16_t b) const {
        if (a == 0 || b == 0) return 0;
        return exp_[log_[a] + log_[b]];
    }

    std::uint16_t inv(std::uint16_t a) const {
        if (a == 0) throw std::domain_error("Field::inv: zero has no inverse");
        return exp_[size_ - 1 - log_[a]];
    }

    std::uint16_t pow_generator(std::uint32_t k) const { return exp_[k % (size_ - 1)]; }
    std::uint16_t log(std::uint16_t a) const {
        if (a == 0) throw std::domain_error("Field::log: log of zero");
        return log_[a];
    }

    static std::uint32_t default_poly(int m) {
        // Standard primitive polynomials; 0x11D is the usual Reed-Solomon
        // choice for GF(256).
        static constexpr std::uint32_t table[11] = {0,     0x3,   0x7,   0xB,  0x13, 0x25,
                                                    0x43,  0x83,  0x11D, 0x211, 0x409};
        if (m < 1 || m > 10) throw std::invalid_argument("Field: m must be in [1, 10]");
        return table[m];
    }

private:
    int m_;
    std::uint32_t size_;
    std::uint32_t poly_;
    std::vector<std::uint16_t> exp_;
    std::vector<std::uint16_t> log_;
};

}  // namespace srldpc
