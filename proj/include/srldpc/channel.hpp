#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "srldpc/rng.hpp"

namespace srldpc {

/// Row-major complex matrix, used for the n x M received signal.
struct CMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<cplx> data;

    CMatrix() = default;
    CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    cplx& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const cplx& at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    /// Y h, length rows.
    std::vector<cplx> mul_vec(std::span<const cplx> h) const {
        if (h.size() != cols) throw std::invalid_argument("CMatrix::mul_vec: dimension mismatch");
        std::vector<cplx> out(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            cplx acc = 0.0;
            const cplx* row = data.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) acc += row[j] * h[j];
            out[i] = acc;
        }
        return out;
    }

    /// Y^H p, length cols.
    std::vector<cplx> adjoint_mul_vec(std::span<const cplx> p) const {
        if (p.size() != rows) throw std::invalid_argument("CMatrix::adjoint_mul_vec: dimension mismatch");
        std::vector<cplx> out(cols, cplx{0.0, 0.0});
        for (std::size_t i = 0; i < rows; ++i) {
            const cplx* row = data.data() + i * cols;
            const cplx pi = p[i];
            for (std::size_t j = 0; j < cols; ++j) out[j] += std::conj(row[j]) * pi;
        }
        return out;
    }

    double frobenius_sq() const {
        double s = 0.0;
        for (const auto& v : data) s += std::norm(v);
        return s;
    }
};

struct ChannelParams {
    std::uint32_t M = 1;       // receive antennas
    double sigma2 = 1.0;       // per complex noise entry
    bool normalize_by_M = false;

    void validate() const {
        if (M < 1) throw std::invalid_argument("ChannelParams: M must be >= 1");
        if (!(sigma2 > 0.0)) throw std::invalid_argument("ChannelParams: sigma2 must be positive");
    }
};

inline double norm_sq(std::span<const cplx> v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return s;
}

/// i.i.d. CN(0,1) entries; with normalize_by_M the variance becomes 1/M so
/// that E||h||^2 = 1 (the diversity-only convention of the M sweep).
inline std::vector<cplx> sample_rayleigh(std::uint32_t M, Rng& rng, bool normalize_by_M = false) {
    std::vector<cplx> h(M);
    const double scale = normalize_by_M ? 1.0 / std::sqrt(static_cast<double>(M)) : 1.0;
    for (auto& v : h) v = rng.cgauss() * scale;
    return h;
}

/// Y = z h^H + W with W entries i.i.d. CN(0, sigma2). sigma2 = 0 gives the
/// noiseless rank-one signal.
inline CMatrix transmit(std::span<const cplx> z, std::span<const cplx> h, double sigma2, Rng& rng) {
    if (sigma2 < 0.0) throw std::invalid_argument("transmit: negative noise variance");
    CMatrix Y(z.size(), h.size());
    const double w_scale = std::sqrt(sigma2);
    for (std::size_t i = 0; i < z.size(); ++i) {
        cplx* row = Y.data.data() + i * h.size();
        for (std::size_t j = 0; j < h.size(); ++j)
            row[j] = z[i] * std::conj(h[j]) + w_scale * rng.cgauss();
    }
    return Y;
}

/// Regularised lower incomplete gamma P(M, x) for integer M, evaluated as the
/// Poisson tail sum_{k>=M} e^{-x} x^k / k!. Stable for both tails.
inline double gamma_reg_lower_int(std::uint32_t M, double x) {
    if (x <= 0.0) return 0.0;
    // start at k = M, term = e^{-x} x^M / M!
    double log_term = -x + M * std::log(x);
    for (std::uint32_t k = 2; k <= M; ++k) log_term -= std::log(static_cast<double>(k));
    double term = std::exp(log_term);
    double sum = 0.0;
    for (std::uint32_t k = M;; ++k) {
        sum += term;
        term *= x / (k + 1);
        if (term < sum * 1e-17 && k > M + 4) break;
        if (k > M + 100000) break;
    }
    return std::min(sum, 1.0);
}

/// Outage probability P(||h||^2 < (2^R - 1) / snr) of the quasi-static SIMO
/// channel; ||h||^2 is Gamma(M, 1) (or Gamma(M, 1/M) under the normalised
/// convention).
inline double outage_probability(double R, double snr, std::uint32_t M, bool normalize_by_M = false) {
    if (!(R > 0.0) || !(snr > 0.0)) throw std::invalid_argument("outage_probability: need R > 0, snr > 0");
    double x = (std::exp2(R) - 1.0) / snr;
    if (normalize_by_M) x *= M;
    return gamma_reg_lower_int(M, x);
}

}  // namespace srldpc
