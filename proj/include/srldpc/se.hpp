#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srldpc/channel.hpp"
#include "srldpc/decoder.hpp"
#include "srldpc/nbldpc.hpp"
#include "srldpc/parallel.hpp"
#include "srldpc/sparc.hpp"

namespace srldpc {

inline std::uint64_t fnv1a64(std::span<const char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t spec_fingerprint(const CodeSpec& spec) {
    char buf[128];
    int len = std::snprintf(buf, sizeof(buf), "%u|%u|%u|%u|%a", spec.L, spec.B, spec.L_inf, spec.n, spec.P);
    return fnv1a64({buf, static_cast<std::size_t>(len)});
}

/// Pool-adjacent-violators projection onto non-decreasing sequences.
inline void isotonic_increasing(std::span<double> v) {
    const std::size_t n = v.size();
    std::vector<double> level(n), weight(n);
    std::vector<std::size_t> count(n);
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        level[blocks] = v[i];
        weight[blocks] = 1.0;
        count[blocks] = 1;
        ++blocks;
        while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
            double w = weight[blocks - 2] + weight[blocks - 1];
            level[blocks - 2] = (level[blocks - 2] * weight[blocks - 2] + level[blocks - 1] * weight[blocks - 1]) / w;
            weight[blocks - 2] = w;
            count[blocks - 2] += count[blocks - 1];
            --blocks;
        }
    }
    std::size_t i = 0;
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t k = 0; k < count[b]; ++k) v[i++] = level[b];
}

inline void isotonic_decreasing(std::span<double> v) {
    for (auto& x : v) x = -x;
    isotonic_increasing(v);
    for (auto& x : v) x = -x;
}

struct MseCell {
    double mse = 0.0;    // (1/N) E||a X - eta||^2 at the grid alpha
    double cross = 0.0;  // E[X^T eta] / N
    double q = 0.0;      // mean denoiser derivative
};

/// Empirical MSE transfer table of the combined demodulation + SISO denoiser
/// on the scalar channel r = alpha x + tau w, gridded over Re(alpha) and
/// tau^2 for each BP depth. Interpolation is linear in Re(alpha) and in
/// log-SNR; queries are reconstructed from the smooth (ee, cross) pair so a
/// complex alpha only needs its real part on the grid.
struct MseTable {
    std::vector<double> alpha_grid;              // ascending Re(alpha)
    std::vector<double> tau2_grid;               // ascending
    std::vector<std::uint32_t> siso_iters_list;  // e.g. {0, 1}
    // values[s][a][t]
    std::vector<std::vector<std::vector<MseCell>>> values;
    std::uint32_t samples = 0;
    std::uint64_t seed = 0;
    std::uint64_t fingerprint = 0;
    double px = 0.0;  // per-entry prior second moment nP/B

    /// Interpolated view at one (Re alpha, tau^2) query point. mse_at(alpha)
    /// is evaluated through the exact shift identity
    ///   mse(alpha) = mse(a_cell) + (|alpha|^2 - a_cell^2) px
    ///                - 2 (Re alpha - a_cell) cross(a_cell)
    /// around each neighbouring cell and geometrically blended along the
    /// noise axis, so small MSE values never come out of a large-term
    /// cancellation.
    struct Lookup {
        const MseTable* table;
        int s;
        std::size_t ia, ia1, it, it1;
        double fa, ft;
        double cross;  // E[X^T eta] / N at the query point
        double q;      // mean denoiser derivative

        double mse_at(cplx alpha) const {
            auto corrected = [&](std::size_t a, std::size_t t) {
                const MseCell& c = table->values[s][a][t];
                const double ag = table->alpha_grid[a];
                double v = c.mse + (std::norm(alpha) - ag * ag) * table->px -
                           2.0 * (alpha.real() - ag) * c.cross;
                return std::max(v, 1e-300);
            };
            auto tau_blend = [&](std::size_t a) {
                const double lo = corrected(a, it);
                const double hi = corrected(a, it1);
                return std::exp((1.0 - ft) * std::log(lo) + ft * std::log(hi));
            };
            return (1.0 - fa) * tau_blend(ia) + fa * tau_blend(ia1);
        }

        /// E||eta||^2 / N, derived at the query mismatch (no cancellation:
        /// the moment itself is of order px).
        double ee_at(cplx alpha) const {
            return mse_at(alpha) - std::norm(alpha) * table->px + 2.0 * alpha.real() * cross;
        }
    };

    int siso_index(std::uint32_t siso) const {
        for (std::size_t i = 0; i < siso_iters_list.size(); ++i)
            if (siso_iters_list[i] == siso) return static_cast<int>(i);
        return -1;
    }

    Lookup lookup(std::uint32_t siso, double alpha_re, double tau2, bool* clamped = nullptr) const {
        int s = siso_index(siso);
        if (s < 0) throw std::invalid_argument("MseTable: BP depth not tabulated");
        Lookup out;
        out.table = this;
        out.s = s;
        out.fa = 0.0;
        out.ia = 0;
        if (alpha_grid.size() > 1) {
            if (alpha_re <= alpha_grid.front()) {
                if (alpha_re < alpha_grid.front() && clamped) *clamped = true;
            } else if (alpha_re >= alpha_grid.back()) {
                out.ia = alpha_grid.size() - 2;
                out.fa = 1.0;
                if (alpha_re > alpha_grid.back() && clamped) *clamped = true;
            } else {
                while (alpha_grid[out.ia + 1] < alpha_re) ++out.ia;
                out.fa = (alpha_re - alpha_grid[out.ia]) /
                         (alpha_grid[out.ia + 1] - alpha_grid[out.ia]);
            }
        }
        out.ia1 = std::min(out.ia + 1, alpha_grid.size() - 1);

        out.ft = 0.0;
        out.it = 0;
        if (tau2_grid.size() > 1) {
            if (tau2 <= tau2_grid.front()) {
                if (tau2 < tau2_grid.front() && clamped) *clamped = true;
            } else if (tau2 >= tau2_grid.back()) {
                out.it = tau2_grid.size() - 2;
                out.ft = 1.0;
                if (tau2 > tau2_grid.back() && clamped) *clamped = true;
            } else {
                // linear in log tau^2 (= linear in log SNR)
                while (tau2_grid[out.it + 1] < tau2) ++out.it;
                out.ft = (std::log(tau2) - std::log(tau2_grid[out.it])) /
                         (std::log(tau2_grid[out.it + 1]) - std::log(tau2_grid[out.it]));
            }
        }
        out.it1 = std::min(out.it + 1, tau2_grid.size() - 1);

        auto blend = [&](auto&& get) {
            double lo = get(out.ia, out.it) * (1.0 - out.ft) + get(out.ia, out.it1) * out.ft;
            double hi = get(out.ia1, out.it) * (1.0 - out.ft) + get(out.ia1, out.it1) * out.ft;
            return lo * (1.0 - out.fa) + hi * out.fa;
        };
        out.cross = blend([&](std::size_t a, std::size_t t) { return values[s][a][t].cross; });
        out.q = blend([&](std::size_t a, std::size_t t) { return values[s][a][t].q; });
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = "mse_table";
        j["alpha_grid"] = alpha_grid;
        j["tau2_grid"] = tau2_grid;
        j["siso_iters"] = siso_iters_list;
        j["samples"] = samples;
        j["seed"] = seed;
        j["fingerprint"] = fingerprint;
        j["px"] = px;
        nlohmann::json vals = nlohmann::json::array();
        for (const auto& plane : values) {
            nlohmann::json pa = nlohmann::json::array();
            for (const auto& row : plane) {
                nlohmann::json pr = nlohmann::json::array();
                for (const auto& c : row) pr.push_back({{"mse", c.mse}, {"cross", c.cross}, {"q", c.q}});
                pa.push_back(pr);
            }
            vals.push_back(pa);
        }
        j["values"] = vals;
        return j;
    }

    static MseTable from_json(const nlohmann::json& j, const CodeSpec& spec) {
        if (j.at("kind") != "mse_table") throw std::runtime_error("MseTable: wrong file kind");
        MseTable t;
        t.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
        t.tau2_grid = j.at("tau2_grid").get<std::vector<double>>();
        t.siso_iters_list = j.at("siso_iters").get<std::vector<std::uint32_t>>();
        t.samples = j.at("samples").get<std::uint32_t>();
        t.seed = j.at("seed").get<std::uint64_t>();
        t.fingerprint = j.at("fingerprint").get<std::uint64_t>();
        t.px = j.at("px").get<double>();
        if (t.fingerprint != spec_fingerprint(spec))
            throw std::runtime_error("MseTable: fingerprint does not match the active code spec");
        for (const auto& plane : j.at("values")) {
            std::vector<std::vector<MseCell>> pv;
            for (const auto& row : plane) {
                std::vector<MseCell> rv;
                for (const auto& c : row)
                    rv.push_back({c.at("mse").get<double>(), c.at("cross").get<double>(), c.at("q").get<double>()});
                pv.push_back(std::move(rv));
            }
            t.values.push_back(std::move(pv));
        }
        return t;
    }

    void save_file(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open " + path + " for writing");
        os << to_json().dump(1) << "\n";
    }

    static MseTable load_file(const std::string& path, const CodeSpec& spec) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open " + path);
        nlohmann::json j;
        is >> j;
        return from_json(j, spec);
    }
};

/// Builds the table by Monte Carlo over random codewords and noise at each
/// grid point. Deterministic given the seed; grid points are independent
/// streams so the build parallelises without affecting values.
inline MseTable build_mse_table(const CodeSpec& spec, const ParityCheckMatrix* H,
                                std::vector<double> alpha_grid, std::vector<double> tau2_grid,
                                std::vector<std::uint32_t> siso_iters_list, std::uint32_t samples,
                                std::uint64_t seed) {
    if (alpha_grid.empty() || tau2_grid.empty() || siso_iters_list.empty() || samples == 0)
        throw std::invalid_argument("build_mse_table: empty grid");
    for (auto s : siso_iters_list)
        if (s > 0 && H == nullptr)
            throw std::invalid_argument("build_mse_table: BP depths need a parity check matrix");

    MseTable t;
    t.alpha_grid = std::move(alpha_grid);
    t.tau2_grid = std::move(tau2_grid);
    t.siso_iters_list = std::move(siso_iters_list);
    t.samples = samples;
    t.seed = seed;
    t.fingerprint = spec_fingerprint(spec);
    t.px = spec.n * spec.P / spec.B;
    const std::size_t na = t.alpha_grid.size();
    const std::size_t nt = t.tau2_grid.size();
    const std::size_t ns = t.siso_iters_list.size();
    t.values.assign(ns, std::vector<std::vector<MseCell>>(na, std::vector<MseCell>(nt)));

    const double sqrt_np = spec.sqrt_nP();
    const std::uint64_t N = spec.N();

    parallel_for(na * nt, [&](std::size_t cell) {
        const std::size_t ia = cell / nt;
        const std::size_t it = cell % nt;
        const double a = t.alpha_grid[ia];
        const double tau2 = t.tau2_grid[it];
        const double tau = std::sqrt(tau2);

        Rng rng(derive_seed(seed, {0x6d7365, ia, it}));
        std::optional<SisoDecoder> siso;
        if (H) siso.emplace(*H);

        std::vector<double> msacc(ns, 0.0), cross(ns, 0.0), qacc(ns, 0.0);
        std::vector<cplx> r(N);
        std::vector<double> x(N);
        std::vector<std::uint16_t> info(spec.L_inf);
        for (std::uint32_t smp = 0; smp < samples; ++smp) {
            std::fill(x.begin(), x.end(), 0.0);
            if (H) {
                for (auto& s : info) s = static_cast<std::uint16_t>(rng.below(spec.B));
                auto cw = H->encode(info);
                for (std::uint32_t j = 0; j < spec.L; ++j)
                    x[static_cast<std::size_t>(j) * spec.B + cw[j]] = sqrt_np;
            } else {
                for (std::uint32_t j = 0; j < spec.L; ++j)
                    x[static_cast<std::size_t>(j) * spec.B + rng.below(spec.B)] = sqrt_np;
            }
            for (std::uint64_t k = 0; k < N; ++k) r[k] = a * x[k] + tau * rng.cgauss();

            std::vector<double> probs = eta1(spec, r, tau);
            const double q = eta1_prime_mean(spec, std::span<const double>(probs), tau);
            for (std::size_t s = 0; s < ns; ++s) {
                std::vector<double> beliefs =
                    (t.siso_iters_list[s] == 0) ? probs : siso->run(probs, t.siso_iters_list[s]);
                double ms = 0.0, cr = 0.0;
                for (std::uint64_t k = 0; k < N; ++k) {
                    const double eta_k = sqrt_np * beliefs[k];
                    const double d = a * x[k] - eta_k;
                    ms += d * d;
                    cr += x[k] * eta_k;
                }
                msacc[s] += ms / static_cast<double>(N);
                cross[s] += cr / static_cast<double>(N);
                qacc[s] += q;
            }
        }
        for (std::size_t s = 0; s < ns; ++s) {
            MseCell c;
            c.mse = msacc[s] / samples;
            c.cross = cross[s] / samples;
            c.q = qacc[s] / samples;
            t.values[s][ia][it] = c;
        }
    });

    // monotone physics along the noise axis
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t ia = 0; ia < na; ++ia) {
            std::vector<double> mse(nt), cr(nt);
            for (std::size_t it = 0; it < nt; ++it) {
                mse[it] = t.values[s][ia][it].mse;
                cr[it] = t.values[s][ia][it].cross;
            }
            isotonic_increasing(mse);   // mse grows with tau^2
            isotonic_decreasing(cr);    // overlap shrinks with tau^2
            for (std::size_t it = 0; it < nt; ++it) {
                t.values[s][ia][it].mse = mse[it];
                t.values[s][ia][it].cross = cr[it];
            }
        }
    }
    return t;
}

/// Empirical BLER of the final quantise(+T_BP BP) stage on r = x + tau_T w.
struct BlerTable {
    std::vector<double> tau2_grid;
    std::vector<double> bler;
    std::uint32_t samples = 0;
    std::uint32_t t_bp = 0;
    std::uint64_t seed = 0;
    std::uint64_t fingerprint = 0;

    double lookup(double tau2) const {
        if (tau2 <= tau2_grid.front()) return bler.front();
        if (tau2 >= tau2_grid.back()) return bler.back();
        std::size_t i = 0;
        while (tau2_grid[i + 1] < tau2) ++i;
        double f = (std::log(tau2) - std::log(tau2_grid[i])) /
                   (std::log(tau2_grid[i + 1]) - std::log(tau2_grid[i]));
        return bler[i] * (1.0 - f) + bler[i + 1] * f;
    }

    nlohmann::json to_json() const {
        return {{"kind", "bler_table"}, {"tau2_grid", tau2_grid}, {"bler", bler},
                {"samples", samples},   {"t_bp", t_bp},           {"seed", seed},
                {"fingerprint", fingerprint}};
    }

    static BlerTable from_json(const nlohmann::json& j, const CodeSpec& spec) {
        if (j.at("kind") != "bler_table") throw std::runtime_error("BlerTable: wrong file kind");
        BlerTable t;
        t.tau2_grid = j.at("tau2_grid").get<std::vector<double>>();
        t.bler = j.at("bler").get<std::vector<double>>();
        t.samples = j.at("samples").get<std::uint32_t>();
        t.t_bp = j.at("t_bp").get<std::uint32_t>();
        t.seed = j.at("seed").get<std::uint64_t>();
        t.fingerprint = j.at("fingerprint").get<std::uint64_t>();
        if (t.fingerprint != spec_fingerprint(spec))
            throw std::runtime_error("BlerTable: fingerprint does not match the active code spec");
        return t;
    }

    void save_file(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open " + path + " for writing");
        os << to_json().dump(1) << "\n";
    }

    static BlerTable load_file(const std::string& path, const CodeSpec& spec) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open " + path);
        nlohmann::json j;
        is >> j;
        return from_json(j, spec);
    }
};

inline BlerTable build_bler_table(const CodeSpec& spec, const ParityCheckMatrix& H,
                                  std::vector<double> tau2_grid, std::uint32_t samples,
                                  std::uint32_t t_bp, std::uint64_t seed) {
    if (tau2_grid.empty() || samples == 0) throw std::invalid_argument("build_bler_table: empty grid");
    BlerTable t;
    t.tau2_grid = std::move(tau2_grid);
    t.bler.assign(t.tau2_grid.size(), 0.0);
    t.samples = samples;
    t.t_bp = t_bp;
    t.seed = seed;
    t.fingerprint = spec_fingerprint(spec);

    const double sqrt_np = spec.sqrt_nP();
    const std::uint64_t N = spec.N();

    parallel_for(t.tau2_grid.size(), [&](std::size_t it) {
        const double tau2 = t.tau2_grid[it];
        const double tau = std::sqrt(tau2);
        Rng rng(derive_seed(seed, {0x626c6572, it}));
        SisoDecoder siso(H);
        std::vector<cplx> r(N);
        std::vector<std::uint16_t> info(spec.L_inf);
        std::uint32_t errors = 0;
        for (std::uint32_t smp = 0; smp < samples; ++smp) {
            for (auto& s : info) s = static_cast<std::uint16_t>(rng.below(spec.B));
            auto cw = H.encode(info);
            for (std::uint64_t k = 0; k < N; ++k) r[k] = tau * rng.cgauss();
            for (std::uint32_t j = 0; j < spec.L; ++j)
                r[static_cast<std::size_t>(j) * spec.B + cw[j]] += sqrt_np;

            std::vector<double> probs = eta1(spec, r, tau);
            SparseMessage hard = quantize(spec, std::span<const double>(probs));
            bool correct = true;
            for (std::uint32_t j = 0; j < spec.L && correct; ++j) correct = (hard.indices[j] == cw[j]);
            if (!correct) {
                std::vector<std::uint16_t> sym(hard.indices.begin(), hard.indices.end());
                if (!H.syndrome_ok(sym) && t_bp > 0) {
                    auto beliefs = siso.run(probs, t_bp);
                    hard = quantize(spec, std::span<const double>(beliefs));
                    correct = true;
                    for (std::uint32_t j = 0; j < spec.L && correct; ++j)
                        correct = (hard.indices[j] == cw[j]);
                }
            }
            errors += !correct;
        }
        t.bler[it] = static_cast<double>(errors) / samples;
    });
    isotonic_increasing(t.bler);
    return t;
}

/// State-evolution order parameters per iteration.
struct SeTrajectory {
    std::vector<cplx> alpha;       // alpha_t, t = 0..T
    std::vector<double> tau2;      // tau_t^2, t = 0..T
    std::vector<double> b2;        // b_t^2, defined from t = 1
    std::vector<double> q;         // Onsager mean used at step t
    std::vector<double> m;         // overlap auxiliaries of the decoupling result
    std::vector<double> tau_phi2;  //   (reported, not fed back)
    std::vector<double> mse_pred;   // predicted ||x - x_{t+1}||^2 / N
    std::vector<double> cmse_pred;  // predicted ||h - h_{t+1}||^2 / M
    std::vector<bool> siso_active;
    bool clamped = false;  // any table lookup left the grid
};

struct SeConfig {
    CodeSpec spec;
    Variant variant = Variant::AMP;
    std::uint32_t T = 20;
    std::uint32_t siso_per_iter = 0;
    double siso_snr_threshold_db = 8.0;
    double sigma2 = 1.0;
    bool update_channel = true;  // false pins alpha_t at alpha_0
    std::uint32_t M = 4;
};

/// Runs the recursion from a given initial mismatch alpha_0 and initial
/// estimate energy ||h_0||^2, with the channel fixed at ||h||^2.
/// tau0_override > 0 seeds the recursion from a realised initial effective
/// noise (e.g. the decoder's measured ||u_0||^2/n); otherwise the asymptotic
/// |alpha_0|^2 L P + sigma^2/||h_0||^2 is used.
inline SeTrajectory se_run(const SeConfig& cfg, const MseTable& table, cplx alpha0,
                           double norm_h0_sq, double norm_h_sq, double tau0_override = 0.0) {
    const double delta = cfg.spec.delta();
    const double nP = cfg.spec.n * cfg.spec.P;
    const double px = cfg.spec.n * cfg.spec.P / cfg.spec.B;
    const double LP = static_cast<double>(cfg.spec.L) * cfg.spec.P;
    const double N = static_cast<double>(cfg.spec.N());

    SeTrajectory tr;
    cplx alpha = alpha0;
    double tau2 = tau0_override > 0.0 ? tau0_override
                                      : std::norm(alpha0) * LP + cfg.sigma2 / norm_h0_sq;
    tr.alpha.push_back(alpha);
    tr.tau2.push_back(tau2);

    for (std::uint32_t t = 0; t < cfg.T; ++t) {
        const bool siso_on = cfg.siso_per_iter > 0 &&
                             10.0 * std::log10(nP / tau2) > cfg.siso_snr_threshold_db;
        const std::uint32_t siso = siso_on ? cfg.siso_per_iter : 0;
        tr.siso_active.push_back(siso_on);

        bool clamped = false;
        auto cell = table.lookup(siso, alpha.real(), tau2, &clamped);
        tr.clamped = tr.clamped || clamped;

        const double mse_alpha = cell.mse_at(alpha);
        const double q = cell.q;
        tr.q.push_back(q);

        const double ee_alpha = cell.ee_at(alpha);
        cplx alpha_next = alpha;
        double ee_eff = ee_alpha;
        double mse_pred;
        if (cfg.variant == Variant::AMP) {
            if (cfg.update_channel && cell.cross != 0.0) alpha_next = ee_alpha / cell.cross;
            mse_pred = cell.mse_at(1.0);
        } else {
            const double denom = 1.0 - q;
            // moments of the divergence-free denoiser via the Stein identity
            const double r_eta_re = alpha.real() * cell.cross + tau2 * q;
            const double ee_tilde =
                (ee_alpha - 2.0 * q * r_eta_re + q * q * (std::norm(alpha) * px + tau2)) / (denom * denom);
            const cplx cross_tilde = (cell.cross - q * alpha * px) / denom;
            if (cfg.update_channel && std::abs(cross_tilde) > 0.0) alpha_next = ee_tilde / cross_tilde;
            ee_eff = ee_tilde;
            const double mse1 = cell.mse_at(1.0);
            mse_pred = (mse1 -
                        2.0 * q * ((alpha.real() - 1.0) * (cell.cross - px) + tau2 * q) +
                        q * q * (std::norm(alpha - 1.0) * px + tau2)) /
                       (denom * denom);
        }
        tr.mse_pred.push_back(mse_pred);

        const double ee_ext = N * ee_eff;
        const double b2 = ee_ext / ((cfg.sigma2 + ee_ext) * (cfg.sigma2 + ee_ext));
        tr.b2.push_back(b2);
        tr.m.push_back(cell.cross / std::sqrt(px));
        tr.tau_phi2.push_back(std::max(0.0, delta * (ee_eff - cell.cross * cell.cross / px)));

        // with a frozen estimate the lift through h_0 keeps its exact noise
        // gain sigma^2/||h_0||^2; with updates it concentrates at
        // sigma^2 |alpha_{t+1}|^2 / ||h||^2
        const double lift_noise = cfg.update_channel
                                      ? cfg.sigma2 * std::norm(alpha_next) / norm_h_sq
                                      : cfg.sigma2 / norm_h0_sq;
        double tau2_next;
        if (cfg.variant == Variant::AMP) {
            tau2_next = lift_noise + delta * mse_alpha;
        } else {
            const double denom = 1.0 - q;
            const double resid = std::max(0.0, mse_alpha - q * q * tau2);
            tau2_next = lift_noise + (delta - 1.0) / (denom * denom) * resid;
        }

        // with updates, Eq.-style prediction from (alpha_{t+1}, b_{t+1});
        // a frozen estimate keeps its constant offset |1/alpha_0 - 1|^2
        const double cmse = cfg.update_channel
                                ? std::norm(1.0 / alpha_next - 1.0) * norm_h_sq / cfg.M + cfg.sigma2 * b2
                                : std::norm(1.0 / alpha0 - 1.0) * norm_h_sq / cfg.M;
        tr.cmse_pred.push_back(cmse);

        alpha = alpha_next;
        tau2 = tau2_next;
        tr.alpha.push_back(alpha);
        tr.tau2.push_back(tau2);
    }
    return tr;
}

/// Predicted channel MSE at iteration t+1 from the trajectory entries.
inline double channel_mse_prediction(const SeTrajectory& tr, std::size_t t, double norm_h_sq,
                                     std::uint32_t M, double sigma2) {
    if (t + 1 >= tr.alpha.size()) throw std::out_of_range("channel_mse_prediction: iteration");
    return std::norm(1.0 / tr.alpha[t + 1] - 1.0) * norm_h_sq / M + sigma2 * tr.b2[t];
}

/// Remark-style online estimates of alpha_t and b_t from a decode trace.
struct OnlineAlphaB {
    std::vector<cplx> alpha;
    std::vector<double> b2;
};

inline OnlineAlphaB estimate_alpha_b_online(const std::vector<std::vector<cplx>>& h_sequence,
                                            const std::vector<double>& x_norm_sq,
                                            double sigma2, cplx alpha0) {
    OnlineAlphaB out;
    out.alpha.push_back(alpha0);
    for (std::size_t t = 0; t + 1 < h_sequence.size(); ++t) {
        cplx ip = cdot(h_sequence[t + 1], h_sequence[t]);
        if (std::abs(ip) == 0.0)
            throw std::runtime_error("estimate_alpha_b_online: vanishing inner product");
        out.alpha.push_back(out.alpha.back() * norm_sq(h_sequence[t]) / ip);
    }
    for (double nx : x_norm_sq) out.b2.push_back(nx / ((sigma2 + nx) * (sigma2 + nx)));
    return out;
}

struct PredictBlerResult {
    double bler = 0.0;
    double mean_tau2_final = 0.0;
};

/// E_h[BLER(tau_T^2(h))]: samples channel draws, runs the recursion per draw
/// and maps the final residual noise through the empirical BLER table.
/// alpha0_model: 1 = oracle CSI (alpha = 1 throughout), 0 = averaging-init
/// model with the random-matrix decomposition statistics.
inline PredictBlerResult predict_bler(const SeConfig& cfg, const MseTable& mse_table,
                                      const BlerTable& bler_table, std::uint32_t h_samples,
                                      std::uint64_t seed, bool oracle_alpha,
                                      bool normalize_by_M = false) {
    Rng rng(derive_seed(seed, {0x70626c72}));
    const double LP = static_cast<double>(cfg.spec.L) * cfg.spec.P;
    const std::uint32_t B = cfg.spec.B;
    const std::uint32_t n = cfg.spec.n;
    double acc = 0.0, acc_tau = 0.0;
    for (std::uint32_t s = 0; s < h_samples; ++s) {
        auto h = sample_rayleigh(cfg.M, rng, normalize_by_M);
        const double nh2 = norm_sq(h);
        cplx alpha0 = 1.0;
        double nh02 = nh2;
        if (!oracle_alpha) {
            // averaging estimate: h_init = kappa h + e with kappa and e from
            // the rank-one decomposition of A^H Y
            cplx kappa = 1.0 + rng.cgauss() / std::sqrt(static_cast<double>(n)) +
                         std::sqrt(static_cast<double>(B - 1)) * rng.cgauss() / std::sqrt(static_cast<double>(n));
            const double noise_var = cfg.sigma2 * B / (static_cast<double>(n) * LP);
            std::vector<cplx> h_init(cfg.M);
            for (std::uint32_t j = 0; j < cfg.M; ++j)
                h_init[j] = kappa * h[j] + std::sqrt(noise_var) * rng.cgauss();
            nh02 = norm_sq(h_init);
            cplx ip = cdot(h, h_init);  // h^H h_init
            alpha0 = ip / nh02;
        }
        SeConfig per = cfg;
        auto tr = se_run(per, mse_table, alpha0, nh02, nh2);
        const double tau2_T = tr.tau2.back();
        acc += bler_table.lookup(tau2_T);
        acc_tau += tau2_T;
    }
    return {acc / h_samples, acc_tau / h_samples};
}

}  // namespace srldpc
