#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "srldpc/channel.hpp"
#include "srldpc/nbldpc.hpp"
#include "srldpc/sparc.hpp"

namespace srldpc {

enum class Variant { AMP, OAMP };

enum class InitMethod { Random, Avg, MMV, Svd, SvdAvg, SvdMmv, Oracle, FixedMismatch };

struct DecoderConfig {
    Variant variant = Variant::AMP;
    std::uint32_t T = 20;             // max iterations
    std::uint32_t T_BP = 10;          // final BP iterations when no valid codeword found
    std::uint32_t siso_per_iter = 1;  // BP iterations inside the denoiser
    double siso_snr_threshold_db = 8.0;  // gate on nP / tau^2 before enabling BP
    InitMethod init = InitMethod::Avg;
    cplx fixed_mismatch = 1.0;  // Delta for FixedMismatch: h_0 = Delta h
    bool update_channel = true;
    double sigma2 = 1.0;  // noise variance, known at the decoder

    void validate() const {
        if (T < 1) throw std::invalid_argument("DecoderConfig: T must be >= 1");
        if (!(sigma2 > 0.0)) throw std::invalid_argument("DecoderConfig: sigma2 must be positive");
    }
};

inline cplx cdot(std::span<const cplx> a, std::span<const cplx> b) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

/// Section-wise posterior probabilities of the scaled one-hot signal in the
/// complex Gaussian channel r = x + tau w. Only the real part carries signal,
/// so the effective noise power is tau^2 / 2 and the softmax logits are
/// 2 sqrt(nP) Re(r) / tau^2. Max-subtracted for stability.
inline void eta1(const CodeSpec& spec, std::span<const cplx> r, double tau,
                 std::span<double> probs) {
    if (!(tau > 0.0)) throw std::invalid_argument("eta1: tau must be positive");
    if (r.size() != spec.N() || probs.size() != spec.N())
        throw std::invalid_argument("eta1: dimension mismatch");
    const double c = 2.0 * spec.sqrt_nP() / (tau * tau);
    for (std::uint32_t j = 0; j < spec.L; ++j) {
        const cplx* sec = r.data() + static_cast<std::size_t>(j) * spec.B;
        double* out = probs.data() + static_cast<std::size_t>(j) * spec.B;
        double maxl = -1e300;
        for (std::uint32_t i = 0; i < spec.B; ++i) maxl = std::max(maxl, c * sec[i].real());
        double sum = 0.0;
        for (std::uint32_t i = 0; i < spec.B; ++i) {
            out[i] = std::exp(c * sec[i].real() - maxl);
            sum += out[i];
        }
        for (std::uint32_t i = 0; i < spec.B; ++i) out[i] /= sum;
    }
}

inline std::vector<double> eta1(const CodeSpec& spec, std::span<const cplx> r, double tau) {
    std::vector<double> probs(spec.N());
    eta1(spec, r, tau, probs);
    return probs;
}

/// Onsager term: mean of the denoiser derivative <eta'> over all N entries,
/// with eta' = nP/tau^2 * eta1 (1 - eta1) per entry. The derivative is taken
/// in the Wirtinger sense d/dr = (d/dRe - i d/dIm)/2, which is what both the
/// delta * q correction of the AMP recursion and the divergence-free OAMP
/// denoiser require; the BP stage is excluded (it runs below the girth and
/// contributes nothing).
inline double eta1_prime_mean(const CodeSpec& spec, std::span<const double> probs, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("eta1_prime_mean: tau must be positive");
    double acc = 0.0;
    for (double p : probs) acc += p * (1.0 - p);
    return spec.n * spec.P / (tau * tau) * acc / static_cast<double>(probs.size());
}

/// Composite denoiser sqrt(nP) * eta2(eta1(r)): posterior probabilities per
/// section, optionally refined by siso_iters rounds of outer-code BP, scaled
/// so every section sums to exactly sqrt(nP).
inline std::vector<double> eta(const CodeSpec& spec, std::span<const cplx> r, double tau,
                               const ParityCheckMatrix* H, std::uint32_t siso_iters,
                               SisoDecoder* siso = nullptr) {
    std::vector<double> probs = eta1(spec, r, tau);
    std::vector<double> beliefs;
    if (siso_iters > 0 && H != nullptr) {
        if (siso)
            beliefs = siso->run(probs, siso_iters);
        else
            beliefs = siso_decode(probs, *H, siso_iters);
    } else {
        beliefs = std::move(probs);
    }
    const double s = spec.sqrt_nP();
    for (auto& v : beliefs) v *= s;
    return beliefs;
}

struct InitResult {
    std::vector<cplx> h;
    bool svd_fallback = false;  // SVD degenerate, fell back to averaging
};

namespace detail {

/// Top right-singular pair of Y via power iteration on the M x M Gram matrix.
/// Returns false when Y is numerically zero.
inline bool top_right_singular(const CMatrix& Y, std::vector<cplx>& v_out, double& s_out) {
    const std::size_t M = Y.cols;
    std::vector<cplx> G(M * M);
    for (std::size_t i = 0; i < Y.rows; ++i) {
        const cplx* row = Y.data.data() + i * M;
        for (std::size_t a = 0; a < M; ++a)
            for (std::size_t b = 0; b < M; ++b) G[a * M + b] += std::conj(row[a]) * row[b];
    }
    double trace = 0.0;
    for (std::size_t a = 0; a < M; ++a) trace += G[a * M + a].real();
    if (!(trace > 0.0) || !std::isfinite(trace)) return false;

    std::vector<cplx> v(M), Gv(M);
    std::size_t start = 0;
    for (std::size_t a = 1; a < M; ++a)
        if (G[a * M + a].real() > G[start * M + start].real()) start = a;
    for (std::size_t a = 0; a < M; ++a) v[a] = G[start * M + a];  // conj of a row of G
    double nv = std::sqrt(norm_sq(v));
    if (!(nv > 0.0)) return false;
    for (auto& x : v) x /= nv;

    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
        for (std::size_t a = 0; a < M; ++a) {
            cplx acc = 0.0;
            for (std::size_t b = 0; b < M; ++b) acc += G[a * M + b] * v[b];
            Gv[a] = acc;
        }
        double new_lambda = std::real(cdot(v, Gv));
        double ng = std::sqrt(norm_sq(Gv));
        if (!(ng > 0.0)) return false;
        for (std::size_t a = 0; a < M; ++a) v[a] = Gv[a] / ng;
        if (it > 2 && std::abs(new_lambda - lambda) <= 1e-14 * std::abs(new_lambda)) {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    v_out = v;
    s_out = std::sqrt(std::max(lambda, 0.0));
    return s_out > 0.0;
}

inline std::vector<cplx> init_avg(const CMatrix& Y, const Dictionary& dict, const CodeSpec& spec) {
    // Y^H (A 1) / ||x||_1, equivalent to averaging the rows of A^H Y.
    std::vector<cplx> a1 = dict.column_sum();
    std::vector<cplx> h = Y.adjoint_mul_vec(a1);
    const double x_l1 = spec.L * spec.sqrt_nP();
    for (auto& v : h) v /= x_l1;
    return h;
}

inline std::vector<cplx> init_mmv(const CMatrix& Y, const Dictionary& dict, const CodeSpec& spec) {
    const std::size_t M = Y.cols;
    // R = A^H Y, one adjoint per antenna column.
    std::vector<std::vector<cplx>> R(M);
    std::vector<cplx> col(Y.rows);
    for (std::size_t mu = 0; mu < M; ++mu) {
        for (std::size_t i = 0; i < Y.rows; ++i) col[i] = Y.at(i, mu);
        R[mu] = dict.adjoint(col);
    }
    const double tau2 = Y.frobenius_sq() / (static_cast<double>(spec.n) * M);
    const double act = spec.n * spec.P;  // active row power per antenna entry
    const double logit_c = act / (tau2 * (act + tau2));
    const double shrink = act / (act + tau2);

    std::vector<cplx> acc(M, cplx{0.0, 0.0});
    std::vector<double> logits(spec.B);
    for (std::uint32_t l = 0; l < spec.L; ++l) {
        double maxl = -1e300;
        for (std::uint32_t i = 0; i < spec.B; ++i) {
            const std::size_t row = static_cast<std::size_t>(l) * spec.B + i;
            double rn = 0.0;
            for (std::size_t mu = 0; mu < M; ++mu) rn += std::norm(R[mu][row]);
            logits[i] = logit_c * rn;
            maxl = std::max(maxl, logits[i]);
        }
        double sum = 0.0;
        for (auto& v : logits) {
            v = std::exp(v - maxl);
            sum += v;
        }
        for (std::uint32_t i = 0; i < spec.B; ++i) {
            const double w = logits[i] / sum * shrink;
            const std::size_t row = static_cast<std::size_t>(l) * spec.B + i;
            for (std::size_t mu = 0; mu < M; ++mu) acc[mu] += w * R[mu][row];
        }
    }
    // acc sums the shrunk row estimates of x h^H over all sections, so it
    // targets L sqrt(nP) h^H; conjugate and rescale to land on h.
    std::vector<cplx> h(M);
    const double scale = 1.0 / (static_cast<double>(spec.L) * spec.sqrt_nP());
    for (std::size_t mu = 0; mu < M; ++mu) h[mu] = std::conj(acc[mu]) * scale;
    return h;
}

inline std::vector<cplx> init_svd(const CMatrix& Y, const CodeSpec& spec, bool& ok) {
    std::vector<cplx> v;
    double s1 = 0.0;
    ok = top_right_singular(Y, v, s1);
    if (!ok) return {};
    // s1 carries sqrt(nLP) ||h||, so the sqrt(nP) of the paper needs the
    // extra sqrt(L) to land on ||h||.
    const double scale = s1 / std::sqrt(spec.n * spec.P * static_cast<double>(spec.L));
    for (auto& x : v) x *= scale;
    return v;
}

}  // namespace detail

/// Initial channel estimate. Oracle and FixedMismatch require the true
/// channel; Random draws from the provided stream.
inline InitResult init_channel(const CMatrix& Y, const Dictionary& dict, const CodeSpec& spec,
                               InitMethod method, Rng& rng,
                               std::span<const cplx> true_h = {}, cplx fixed_mismatch = 1.0) {
    InitResult res;
    switch (method) {
        case InitMethod::Random: {
            res.h = sample_rayleigh(static_cast<std::uint32_t>(Y.cols), rng, false);
            return res;
        }
        case InitMethod::Oracle:
        case InitMethod::FixedMismatch: {
            if (true_h.size() != Y.cols)
                throw std::invalid_argument("init_channel: oracle methods need the true channel");
            res.h.assign(true_h.begin(), true_h.end());
            if (method == InitMethod::FixedMismatch)
                for (auto& v : res.h) v *= fixed_mismatch;
            return res;
        }
        case InitMethod::Avg: {
            res.h = detail::init_avg(Y, dict, spec);
            return res;
        }
        case InitMethod::MMV: {
            res.h = detail::init_mmv(Y, dict, spec);
            return res;
        }
        case InitMethod::Svd:
        case InitMethod::SvdAvg:
        case InitMethod::SvdMmv: {
            bool ok = false;
            std::vector<cplx> hs = detail::init_svd(Y, spec, ok);
            if (!ok) {
                res.h = detail::init_avg(Y, dict, spec);
                res.svd_fallback = true;
                return res;
            }
            if (method == InitMethod::Svd) {
                res.h = std::move(hs);
                return res;
            }
            std::vector<cplx> h2 = (method == InitMethod::SvdAvg) ? detail::init_avg(Y, dict, spec)
                                                                  : detail::init_mmv(Y, dict, spec);
            cplx phi = cdot(h2, hs);  // carries e^{+i phase(hs vs h)}
            double mag = std::abs(phi);
            if (!(mag > 0.0)) {
                res.h = std::move(h2);
                res.svd_fallback = true;
                return res;
            }
            // Only the phase is missing; the raw product carries a spurious
            // magnitude of order ||h||^2, and the rotation must undo the
            // offset, hence the conjugate.
            phi = std::conj(phi) / mag;
            res.h = std::move(hs);
            for (auto& v : res.h) v *= phi;
            return res;
        }
    }
    throw std::logic_error("init_channel: unknown method");
}

/// Per-iteration quantities of the joint estimation loop.
struct DecoderState {
    std::uint32_t t = 0;
    std::vector<cplx> x;  // length N; real for AMP, complex for OAMP
    std::vector<cplx> p;  // length n
    std::vector<cplx> u;  // length n
    std::vector<cplx> r;  // length N
    std::vector<cplx> h;  // length M
    double tau2 = 0.0;
    double q = 0.0;
    std::vector<double> probs;    // eta1 posteriors at the last r
    std::vector<double> beliefs;  // sqrt(nP)-scaled denoiser output
    bool siso_active = false;
};

struct DecodeTruth {
    std::vector<double> x;  // dense transmitted signal
    std::vector<cplx> h;
    SparseMessage msg;
};

struct DecodeResult {
    SparseMessage message_hat;
    std::optional<std::uint32_t> converged_at;
    bool syndrome_valid = false;
    std::vector<cplx> h_final;
    bool svd_fallback = false;
    std::uint32_t iterations = 0;
    double initial_cmse = std::numeric_limits<double>::quiet_NaN();
    // per-iteration traces; signal/channel errors need the truth
    std::vector<double> tau2_trace;
    std::vector<double> q_trace;
    std::vector<double> mse_trace;          // ||x - x_{t+1}||^2 / N
    std::vector<double> cmse_trace;         // ||h - h_{t+1}||^2 / M
    std::vector<double> alpha_proxy_trace;  // ||x_{t+1}||^2 / Re<x, x_{t+1}>
};

/// Joint AMP/OAMP decoder. Owns the scratch buffers and the SISO decoder;
/// one instance per thread, reusable across decodes.
class Decoder {
public:
    Decoder(const Dictionary& dict, const ParityCheckMatrix* H, DecoderConfig config)
        : dict_(&dict), spec_(dict.spec()), H_(H), config_(config) {
        config_.validate();
        if (H_) siso_.emplace(*H_);
    }

    const DecoderConfig& config() const { return config_; }

    DecoderState init_state(const CMatrix& Y, std::vector<cplx> h0) const {
        DecoderState st;
        st.x.assign(spec_.N(), cplx{0.0, 0.0});
        st.p.assign(spec_.n, cplx{0.0, 0.0});
        st.h = std::move(h0);
        if (st.h.size() != Y.cols) throw std::invalid_argument("init_state: channel length mismatch");
        return st;
    }

    /// One iteration: lifts Y through the current channel estimate, denoises
    /// in the transform domain and re-estimates the channel from the new
    /// signal estimate.
    void step(DecoderState& st, const CMatrix& Y) {
        const double delta = spec_.delta();
        const double nP = spec_.n * spec_.P;

        const double h_norm2 = norm_sq(st.h);
        if (!(h_norm2 > 0.0)) throw std::runtime_error("decoder: channel estimate vanished");

        // u_t = Y h_t / ||h_t||^2 - p_t
        st.u = Y.mul_vec(st.h);
        for (std::uint32_t i = 0; i < spec_.n; ++i) st.u[i] = st.u[i] / h_norm2 - st.p[i];

        // r_t = x_t + A^H u_t
        st.r = dict_->adjoint(st.u);
        for (std::size_t j = 0; j < st.r.size(); ++j) st.r[j] += st.x[j];

        const double u_mean2 = norm_sq(st.u) / spec_.n;
        if (config_.variant == Variant::AMP) {
            st.tau2 = u_mean2;
        } else {
            st.tau2 = (config_.sigma2 / h_norm2 + (delta - 1.0) * u_mean2) / delta;
        }
        if (!(st.tau2 > 0.0) || !std::isfinite(st.tau2))
            throw std::runtime_error("decoder: degenerate effective noise variance");

        const double tau = std::sqrt(st.tau2);
        if (st.probs.empty()) st.probs.resize(spec_.N());
        eta1(spec_, st.r, tau, st.probs);
        const double q_next = eta1_prime_mean(spec_, st.probs, tau);

        st.siso_active = config_.siso_per_iter > 0 && H_ != nullptr &&
                         10.0 * std::log10(nP / st.tau2) > config_.siso_snr_threshold_db;
        if (st.siso_active) {
            st.beliefs = siso_->run(st.probs, config_.siso_per_iter);
        } else {
            st.beliefs = st.probs;
        }
        const double s = spec_.sqrt_nP();
        for (auto& v : st.beliefs) v *= s;

        if (config_.variant == Variant::AMP) {
            for (std::size_t j = 0; j < st.x.size(); ++j) st.x[j] = st.beliefs[j];
            std::vector<cplx> ax = dict_->forward(st.x);
            for (std::uint32_t i = 0; i < spec_.n; ++i)
                st.p[i] = ax[i] - delta * q_next * st.u[i];
        } else {
            const double denom = 1.0 - q_next;
            if (std::abs(denom) < 1e-12)
                throw std::runtime_error("decoder: OAMP divergence (q -> 1)");
            for (std::size_t j = 0; j < st.x.size(); ++j)
                st.x[j] = (st.beliefs[j] - q_next * st.r[j]) / denom;
            st.p = dict_->forward(st.x);
        }
        st.q = q_next;

        if (config_.update_channel) {
            const double p_norm2 = norm_sq(st.p);
            st.h = Y.adjoint_mul_vec(st.p);
            const double denom = config_.sigma2 + p_norm2;
            for (auto& v : st.h) v /= denom;
        }
        ++st.t;
    }

    DecodeResult decode(const CMatrix& Y, Rng& init_rng, const DecodeTruth* truth = nullptr,
                        const std::function<void(const DecoderState&)>& on_iteration = nullptr) {
        if ((config_.init == InitMethod::Oracle || config_.init == InitMethod::FixedMismatch) &&
            (truth == nullptr || truth->h.empty()))
            throw std::invalid_argument("decode: oracle initialisation needs the true channel");

        InitResult init = init_channel(Y, *dict_, spec_, config_.init, init_rng,
                                       truth ? std::span<const cplx>(truth->h) : std::span<const cplx>{},
                                       config_.fixed_mismatch);
        DecodeResult res;
        res.svd_fallback = init.svd_fallback;

        DecoderState st = init_state(Y, std::move(init.h));
        if (truth) res.initial_cmse = cmse(st.h, truth->h);

        bool stopped = false;
        for (std::uint32_t t = 0; t < config_.T; ++t) {
            step(st, Y);
            res.tau2_trace.push_back(st.tau2);
            res.q_trace.push_back(st.q);
            if (truth) {
                res.mse_trace.push_back(signal_mse(st.x, truth->x));
                res.cmse_trace.push_back(cmse(st.h, truth->h));
                res.alpha_proxy_trace.push_back(alpha_proxy(st.x, truth->x));
            }
            if (on_iteration) on_iteration(st);

            if (H_) {
                SparseMessage cand = quantize(spec_, st.beliefs);
                if (check_codeword(cand)) {
                    res.message_hat = std::move(cand);
                    res.converged_at = t;
                    res.syndrome_valid = true;
                    stopped = true;
                    break;
                }
            }
        }
        res.iterations = st.t;
        if (!stopped) {
            if (H_ && config_.T_BP > 0) {
                std::vector<double> beliefs = siso_->run(st.probs, config_.T_BP);
                res.message_hat = quantize(spec_, beliefs);
            } else {
                res.message_hat = quantize(spec_, st.beliefs.empty()
                                                      ? std::vector<double>(spec_.N(), 0.0)
                                                      : st.beliefs);
            }
            res.syndrome_valid = H_ ? check_codeword(res.message_hat) : false;
        }
        res.h_final = std::move(st.h);
        return res;
    }

private:
    bool check_codeword(const SparseMessage& msg) const {
        std::vector<std::uint16_t> symbols(msg.indices.size());
        for (std::size_t i = 0; i < symbols.size(); ++i)
            symbols[i] = static_cast<std::uint16_t>(msg.indices[i]);
        return H_->syndrome_ok(symbols);
    }

    double signal_mse(std::span<const cplx> x_est, std::span<const double> x_true) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < x_est.size(); ++j) acc += std::norm(x_est[j] - x_true[j]);
        return acc / static_cast<double>(x_est.size());
    }

    double cmse(std::span<const cplx> h_est, std::span<const cplx> h_true) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < h_est.size(); ++j) acc += std::norm(h_est[j] - h_true[j]);
        return acc / static_cast<double>(h_est.size());
    }

    double alpha_proxy(std::span<const cplx> x_est, std::span<const double> x_true) const {
        double overlap = 0.0;
        double nx = 0.0;
        for (std::size_t j = 0; j < x_est.size(); ++j) {
            overlap += x_true[j] * x_est[j].real();
            nx += std::norm(x_est[j]);
        }
        return overlap != 0.0 ? nx / overlap : std::numeric_limits<double>::quiet_NaN();
    }

    const Dictionary* dict_;
    CodeSpec spec_;
    const ParityCheckMatrix* H_;
    DecoderConfig config_;
    std::optional<SisoDecoder> siso_;
};

/// Operation-level wrappers for single steps.
inline void amp_step(DecoderState& st, const CMatrix& Y, const Dictionary& dict,
                     const ParityCheckMatrix* H, DecoderConfig config) {
    config.variant = Variant::AMP;
    Decoder dec(dict, H, config);
    dec.step(st, Y);
}

inline void oamp_step(DecoderState& st, const CMatrix& Y, const Dictionary& dict,
                      const ParityCheckMatrix* H, DecoderConfig config) {
    config.variant = Variant::OAMP;
    Decoder dec(dict, H, config);
    dec.step(st, Y);
}

}  // namespace srldpc
