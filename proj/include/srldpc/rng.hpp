#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace srldpc {

using cplx = std::complex<double>;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Mixes an arbitrary list of ids into one seed. Used to derive independent,
/// scheduling-invariant per-trial / per-purpose streams from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t s = base;
    std::uint64_t h = splitmix64(s);
    for (std::uint64_t id : ids) {
        s = h ^ (id + 0x9e3779b97f4a7c15ULL);
        h = splitmix64(s);
    }
    return h;
}

/// Deterministic random stream. Distribution transforms are hand-specified
/// (std::*_distribution is implementation-defined and would not reproduce
/// across standard libraries).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), n >= 1. Rejection-free enough for our n.
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection for exactness.
        std::uint64_t x = u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard real Gaussian N(0, 1), Box-Muller with cached spare.
    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double rad = std::sqrt(-2.0 * std::log(u1));
        double ang = 2.0 * M_PI * uniform();
        spare_ = rad * std::sin(ang);
        has_spare_ = true;
        return rad * std::cos(ang);
    }

    /// Circularly symmetric complex Gaussian CN(0, 1).
    cplx cgauss() {
        constexpr double inv_sqrt2 = 0.70710678118654752440;
        return {gauss() * inv_sqrt2, gauss() * inv_sqrt2};
    }

    /// k distinct indices sampled uniformly from [0, n), in selection order.
    std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k) {
        std::vector<std::uint32_t> pool(n);
        for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::uint32_t> out(k);
        for (std::uint32_t i = 0; i < k; ++i) {
            std::uint64_t j = i + below(n - i);
            std::swap(pool[i], pool[j]);
            out[i] = pool[i];
        }
        return out;
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace srldpc
