#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "srldpc/fft.hpp"
#include "srldpc/rng.hpp"

namespace srldpc {

/// Static code parameters shared by every module.
struct CodeSpec {
    std::uint32_t L;      // sections
    std::uint32_t B;      // section size, outer field order
    std::uint32_t L_inf;  // information sections
    std::uint32_t n;      // complex channel uses
    double P;             // per-section power, nonzeros equal sqrt(n P)

    std::uint64_t N() const { return static_cast<std::uint64_t>(L) * B; }
    double delta() const { return static_cast<double>(N()) / n; }
    double rate_out() const { return static_cast<double>(L_inf) / L; }
    double rate_in() const { return L * std::log2(static_cast<double>(B)) / n; }
    double rate() const { return rate_in() * rate_out(); }
    std::uint32_t bits() const { return static_cast<std::uint32_t>(L_inf * std::log2(static_cast<double>(B)) + 0.5); }
    double sqrt_nP() const { return std::sqrt(n * P); }
    int m() const { return std::bit_width(B) - 1; }

    static CodeSpec make(std::uint32_t L, std::uint32_t B, std::uint32_t L_inf, std::uint32_t n,
                         double P = 0.0) {
        if (L == 0 || B < 2 || (B & (B - 1)) != 0) throw std::invalid_argument("CodeSpec: B must be a power of two");
        if (L_inf == 0 || L_inf > L) throw std::invalid_argument("CodeSpec: need 1 <= L_inf <= L");
        if (n == 0 || static_cast<std::uint64_t>(n) > static_cast<std::uint64_t>(L) * B)
            throw std::invalid_argument("CodeSpec: need n <= N");
        CodeSpec s;
        s.L = L;
        s.B = B;
        s.L_inf = L_inf;
        s.n = n;
        s.P = (P > 0.0) ? P : 1.0 / L;  // LP = 1 by default, sigma^2 carries the SNR
        return s;
    }

    /// The section layout of Section 5: L=766, B=256, L_inf=736, n=3675.
    static CodeSpec paper() { return make(766, 256, 736, 3675); }
};

/// One nonzero per section; index i_j selects the column within section j.
struct SparseMessage {
    std::vector<std::uint32_t> indices;

    bool operator==(const SparseMessage&) const = default;

    std::vector<double> to_dense(const CodeSpec& spec) const {
        if (indices.size() != spec.L) throw std::invalid_argument("SparseMessage: section count");
        std::vector<double> x(spec.N(), 0.0);
        const double v = spec.sqrt_nP();
        for (std::uint32_t j = 0; j < spec.L; ++j) {
            if (indices[j] >= spec.B) throw std::invalid_argument("SparseMessage: index out of section");
            x[static_cast<std::size_t>(j) * spec.B + indices[j]] = v;
        }
        return x;
    }
};

enum class Ensemble { SignedDFT, GaussianIID };

/// The sensing operator A. SignedDFT realises
///   A = sqrt(N/n) P F_N diag(s)
/// with unitary F_N, a uniform row selection P and i.i.d. signs s, giving
/// exactly unit-norm columns and A A^H = (N/n) I. GaussianIID holds dense
/// CN(0, 1/n) entries and exists for validation at small sizes.
class Dictionary {
public:
    Dictionary(const CodeSpec& spec, Ensemble ensemble, std::uint64_t seed)
        : spec_(spec), ensemble_(ensemble), seed_(seed) {
        const std::uint64_t N = spec.N();
        Rng rng(derive_seed(seed, {0xd1c7}));
        if (ensemble == Ensemble::SignedDFT) {
            rows_ = rng.sample_without_replacement(static_cast<std::uint32_t>(N), spec.n);
            signs_.resize(N);
            for (auto& s : signs_) s = (rng.u64() & 1) ? 1 : -1;
            dft_ = shared_dft(N);
        } else {
            const std::uint64_t bytes = static_cast<std::uint64_t>(spec.n) * N * sizeof(cplx);
            if (bytes > (3ull << 30))
                throw std::invalid_argument("Dictionary: GaussianIID ensemble too large to store densely");
            dense_.resize(static_cast<std::size_t>(spec.n) * N);
            const double scale = 1.0 / std::sqrt(static_cast<double>(spec.n));
            for (auto& a : dense_) a = rng.cgauss() * scale;
        }
    }

    const CodeSpec& spec() const { return spec_; }
    Ensemble ensemble() const { return ensemble_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<std::uint32_t>& row_selection() const { return rows_; }
    const std::vector<std::int8_t>& signs() const { return signs_; }
    const std::vector<cplx>& dense_entries() const { return dense_; }

    /// A x, O(N log N) for SignedDFT.
    std::vector<cplx> forward(std::span<const cplx> x) const {
        if (x.size() != spec_.N()) throw std::invalid_argument("forward: dimension mismatch");
        std::vector<cplx> out(spec_.n);
        if (ensemble_ == Ensemble::SignedDFT) {
            auto& buf = scratch();
            buf.resize(spec_.N());
            for (std::size_t j = 0; j < x.size(); ++j) buf[j] = signs_[j] > 0 ? x[j] : -x[j];
            dft_->forward(buf.data());
            const double scale = 1.0 / std::sqrt(static_cast<double>(spec_.n));
            for (std::uint32_t k = 0; k < spec_.n; ++k) out[k] = buf[rows_[k]] * scale;
        } else {
            for (std::uint32_t i = 0; i < spec_.n; ++i) {
                cplx acc = 0.0;
                const cplx* row = dense_.data() + static_cast<std::size_t>(i) * spec_.N();
                for (std::size_t j = 0; j < x.size(); ++j) acc += row[j] * x[j];
                out[i] = acc;
            }
        }
        return out;
    }

    std::vector<cplx> forward_real(std::span<const double> x) const {
        std::vector<cplx> xc(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) xc[j] = x[j];
        return forward(xc);
    }

    /// A^H u; adjoint of forward, <Ax, u> = <x, A^H u> up to rounding.
    std::vector<cplx> adjoint(std::span<const cplx> u) const {
        if (u.size() != spec_.n) throw std::invalid_argument("adjoint: dimension mismatch");
        std::vector<cplx> out(spec_.N());
        if (ensemble_ == Ensemble::SignedDFT) {
            auto& buf = scratch();
            buf.assign(spec_.N(), cplx{0.0, 0.0});
            for (std::uint32_t k = 0; k < spec_.n; ++k) buf[rows_[k]] = u[k];
            dft_->backward(buf.data());
            const double scale = 1.0 / std::sqrt(static_cast<double>(spec_.n));
            for (std::size_t j = 0; j < out.size(); ++j)
                out[j] = (signs_[j] > 0 ? buf[j] : -buf[j]) * scale;
        } else {
            for (std::uint32_t i = 0; i < spec_.n; ++i) {
                const cplx ui = u[i];
                const cplx* row = dense_.data() + static_cast<std::size_t>(i) * spec_.N();
                for (std::size_t j = 0; j < out.size(); ++j) out[j] += std::conj(row[j]) * ui;
            }
        }
        return out;
    }

    /// A applied to the all-ones vector; used by the averaging initialiser.
    std::vector<cplx> column_sum() const {
        std::vector<cplx> ones(spec_.N(), cplx{1.0, 0.0});
        return forward(ones);
    }

    std::vector<cplx> column(std::uint64_t j) const {
        std::vector<cplx> e(spec_.N(), cplx{0.0, 0.0});
        e.at(j) = 1.0;
        return forward(e);
    }

private:
    static std::vector<cplx>& scratch() {
        thread_local std::vector<cplx> buf;
        return buf;
    }

    CodeSpec spec_;
    Ensemble ensemble_;
    std::uint64_t seed_;
    std::vector<std::uint32_t> rows_;
    std::vector<std::int8_t> signs_;
    std::shared_ptr<Dft> dft_;
    std::vector<cplx> dense_;
};

/// Maps an outer codeword to its sparse vector and modulated signal z = A x.
inline std::pair<SparseMessage, std::vector<cplx>> encode_message(const CodeSpec& spec,
                                                                  const Dictionary& dict,
                                                                  std::span<const std::uint16_t> cw) {
    if (cw.size() != spec.L) throw std::invalid_argument("encode_message: codeword length");
    SparseMessage msg;
    msg.indices.assign(cw.begin(), cw.end());
    std::vector<double> x = msg.to_dense(spec);
    return {std::move(msg), dict.forward_real(x)};
}

/// Per-section argmax; ties resolve to the lowest index.
inline SparseMessage quantize(const CodeSpec& spec, std::span<const double> r) {
    if (r.size() != spec.N()) throw std::invalid_argument("quantize: dimension mismatch");
    SparseMessage msg;
    msg.indices.resize(spec.L);
    for (std::uint32_t j = 0; j < spec.L; ++j) {
        const double* sec = r.data() + static_cast<std::size_t>(j) * spec.B;
        std::uint32_t best = 0;
        for (std::uint32_t i = 1; i < spec.B; ++i)
            if (sec[i] > sec[best]) best = i;
        msg.indices[j] = best;
    }
    return msg;
}

inline SparseMessage quantize(const CodeSpec& spec, std::span<const cplx> r) {
    std::vector<double> re(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) re[j] = r[j].real();
    return quantize(spec, re);
}

}  // namespace srldpc
