#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srldpc/gf.hpp"
#include "srldpc/rng.hpp"

namespace srldpc {

struct PcmEntry {
    std::uint32_t col;
    std::uint16_t coeff;  // nonzero
};

/// Sparse parity-check matrix over GF(2^m) with the row-echelon data needed
/// for systematic encoding. Immutable after construction.
class ParityCheckMatrix {
public:
    ParityCheckMatrix(Field field, std::uint32_t L, std::vector<std::vector<PcmEntry>> rows)
        : field_(std::move(field)), L_(L), rows_(std::move(rows)) {
        if (rows_.empty()) throw std::invalid_argument("ParityCheckMatrix: no parity rows");
        if (L_ <= rows_.size()) throw std::invalid_argument("ParityCheckMatrix: need L > L - L_inf");
        for (auto& row : rows_) {
            std::sort(row.begin(), row.end(), [](auto& a, auto& b) { return a.col < b.col; });
            for (std::size_t k = 0; k < row.size(); ++k) {
                if (row[k].col >= L_) throw std::invalid_argument("ParityCheckMatrix: column out of range");
                if (row[k].coeff == 0 || row[k].coeff >= field_.size())
                    throw std::invalid_argument("ParityCheckMatrix: invalid coefficient");
                if (k > 0 && row[k].col == row[k - 1].col)
                    throw std::invalid_argument("ParityCheckMatrix: repeated column in row");
            }
        }
        build_echelon();
        build_adjacency();
    }

    const Field& field() const { return field_; }
    std::uint32_t length() const { return L_; }
    std::uint32_t num_checks() const { return static_cast<std::uint32_t>(rows_.size()); }
    std::uint32_t info_length() const { return L_ - num_checks(); }
    const std::vector<std::vector<PcmEntry>>& rows() const { return rows_; }
    const std::vector<std::uint32_t>& info_positions() const { return info_positions_; }

    /// Neighbourhood of a variable node: (row index, entry index within row).
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& col_adjacency(std::uint32_t col) const {
        return cols_[col];
    }

    std::vector<std::uint16_t> syndrome(std::span<const std::uint16_t> cw) const {
        if (cw.size() != L_) throw std::invalid_argument("syndrome: length mismatch");
        std::vector<std::uint16_t> s(rows_.size(), 0);
        for (std::size_t a = 0; a < rows_.size(); ++a) {
            std::uint16_t acc = 0;
            for (const auto& e : rows_[a]) acc = gf::add(acc, field_.mul(e.coeff, cw[e.col]));
            s[a] = acc;
        }
        return s;
    }

    bool syndrome_ok(std::span<const std::uint16_t> cw) const {
        if (cw.size() != L_) return false;
        for (std::size_t a = 0; a < rows_.size(); ++a) {
            std::uint16_t acc = 0;
            for (const auto& e : rows_[a]) acc = gf::add(acc, field_.mul(e.coeff, cw[e.col]));
            if (acc != 0) return false;
        }
        return true;
    }

    /// Systematic encoding: info symbols land on info_positions() in order,
    /// parity symbols are fixed by back-substitution of the reduced echelon
    /// form.
    std::vector<std::uint16_t> encode(std::span<const std::uint16_t> info) const {
        if (info.size() != info_length()) throw std::invalid_argument("encode: info length mismatch");
        std::vector<std::uint16_t> cw(L_, 0);
        for (std::size_t k = 0; k < info.size(); ++k) {
            if (info[k] >= field_.size()) throw std::invalid_argument("encode: symbol out of field");
            cw[info_positions_[k]] = info[k];
        }
        // Reduced form: each row reads x_pivot = sum of non-pivot terms.
        for (std::size_t a = 0; a < rref_.size(); ++a) {
            std::uint16_t acc = 0;
            for (const auto& e : rref_[a])
                if (e.col != pivot_cols_[a]) acc = gf::add(acc, field_.mul(e.coeff, cw[e.col]));
            cw[pivot_cols_[a]] = acc;
        }
        return cw;
    }

    /// Serialises as: header "L L_inf B poly", then one line per row of
    /// hex "col:coeff" pairs. Round-trips bit-exactly.
    void save(std::ostream& os) const {
        os << std::hex << L_ << " " << (L_ - rows_.size()) << " " << field_.size() << " "
           << field_.poly() << "\n";
        for (const auto& row : rows_) {
            for (std::size_t k = 0; k < row.size(); ++k) {
                if (k) os << " ";
                os << row[k].col << ":" << row[k].coeff;
            }
            os << "\n";
        }
        os << std::dec;
    }

    void save_file(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open " + path + " for writing");
        save(os);
    }

    static ParityCheckMatrix load(std::istream& is) {
        std::string header;
        if (!std::getline(is, header)) throw std::runtime_error("H matrix: empty input");
        std::istringstream hs(header);
        std::uint32_t L = 0, L_inf = 0, B = 0, poly = 0;
        hs >> std::hex >> L >> L_inf >> B >> poly;
        if (!hs || B < 2 || (B & (B - 1)) != 0 || L_inf >= L)
            throw std::runtime_error("H matrix: bad header");
        int m = std::bit_width(B) - 1;
        Field field(m, poly);
        std::vector<std::vector<PcmEntry>> rows;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::vector<PcmEntry> row;
            std::string tok;
            while (ls >> tok) {
                auto colon = tok.find(':');
                if (colon == std::string::npos) throw std::runtime_error("H matrix: bad entry " + tok);
                PcmEntry e;
                e.col = static_cast<std::uint32_t>(std::stoul(tok.substr(0, colon), nullptr, 16));
                e.coeff = static_cast<std::uint16_t>(std::stoul(tok.substr(colon + 1), nullptr, 16));
                row.push_back(e);
            }
            rows.push_back(std::move(row));
        }
        if (rows.size() != L - L_inf) throw std::runtime_error("H matrix: row count mismatch");
        return ParityCheckMatrix(std::move(field), L, std::move(rows));
    }

    static ParityCheckMatrix load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open " + path);
        return load(is);
    }

private:
    void build_echelon() {
        const std::uint32_t R = num_checks();
        // Dense elimination; R is small (L - L_inf).
        std::vector<std::vector<std::uint16_t>> dense(R, std::vector<std::uint16_t>(L_, 0));
        for (std::uint32_t a = 0; a < R; ++a)
            for (const auto& e : rows_[a]) dense[a][e.col] = e.coeff;

        pivot_cols_.clear();
        std::uint32_t rank = 0;
        for (std::uint32_t col = 0; col < L_ && rank < R; ++col) {
            std::uint32_t sel = R;
            for (std::uint32_t a = rank; a < R; ++a)
                if (dense[a][col] != 0) { sel = a; break; }
            if (sel == R) continue;
            std::swap(dense[sel], dense[rank]);
            std::uint16_t inv = field_.inv(dense[rank][col]);
            for (std::uint32_t j = col; j < L_; ++j) dense[rank][j] = field_.mul(dense[rank][j], inv);
            for (std::uint32_t a = 0; a < R; ++a) {
                if (a == rank || dense[a][col] == 0) continue;
                std::uint16_t f = dense[a][col];
                for (std::uint32_t j = col; j < L_; ++j)
                    dense[a][j] = gf::add(dense[a][j], field_.mul(f, dense[rank][j]));
            }
            pivot_cols_.push_back(col);
            ++rank;
        }
        if (rank < R) throw std::invalid_argument("ParityCheckMatrix: rank deficient");

        rref_.assign(R, {});
        for (std::uint32_t a = 0; a < R; ++a)
            for (std::uint32_t j = 0; j < L_; ++j)
                if (dense[a][j] != 0) rref_[a].push_back({j, dense[a][j]});

        std::vector<bool> is_pivot(L_, false);
        for (auto c : pivot_cols_) is_pivot[c] = true;
        info_positions_.clear();
        for (std::uint32_t j = 0; j < L_; ++j)
            if (!is_pivot[j]) info_positions_.push_back(j);
    }

    void build_adjacency() {
        cols_.assign(L_, {});
        for (std::uint32_t a = 0; a < rows_.size(); ++a)
            for (std::uint32_t k = 0; k < rows_[a].size(); ++k)
                cols_[rows_[a][k].col].push_back({a, k});
    }

    Field field_;
    std::uint32_t L_;
    std::vector<std::vector<PcmEntry>> rows_;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> cols_;
    std::vector<std::vector<PcmEntry>> rref_;
    std::vector<std::uint32_t> pivot_cols_;
    std::vector<std::uint32_t> info_positions_;
};

/// Random code with the requested column weight, full rank and uniformly
/// random nonzero coefficients, deterministic given the seed.
///
/// Short cycles: two columns sharing two rows form a length-4 cycle. Supports
/// are drawn to avoid reusing a row pair while unused pairs remain; once the
/// pair pool is exhausted (unavoidable when L * C(deg,2) exceeds C(rows,2),
/// which includes the L=766 configuration) repeated pairs are admitted but the
/// 2x2 submatrix of any such cycle is kept nonsingular, so no cycle carries a
/// rank-deficient constraint.
inline ParityCheckMatrix generate_code(std::uint32_t L, std::uint32_t L_inf, int m,
                                       std::uint32_t variable_degree, std::uint64_t seed,
                                       std::uint32_t primitive_poly = 0) {
    if (L_inf >= L) throw std::invalid_argument("generate_code: no parity rows (L must exceed L_inf)");
    if (L_inf < 1) throw std::invalid_argument("generate_code: L_inf must be >= 1");
    if (variable_degree < 2) throw std::invalid_argument("generate_code: variable degree must be >= 2");
    Field field(m, primitive_poly);
    const std::uint32_t R = L - L_inf;
    const std::uint32_t deg = std::min(variable_degree, R);

    for (std::uint32_t attempt = 0; attempt < 64; ++attempt) {
        Rng rng(derive_seed(seed, {0x636f6465, attempt}));
        // ratio key per ordered row pair -> coefficient ratios already in use
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::set<std::uint16_t>> pair_ratios;
        std::set<std::pair<std::uint32_t, std::uint32_t>> used_pairs;
        std::vector<std::vector<PcmEntry>> rows(R);

        bool ok = true;
        for (std::uint32_t j = 0; j < L && ok; ++j) {
            bool placed = false;
            // When even the coefficient-ratio pool of every candidate pair is
            // spent (possible only at toy dimensions), the column weight
            // degrades rather than admitting a singular cycle.
            for (std::uint32_t deg_try = deg; deg_try >= 1 && !placed; --deg_try) {
                for (std::uint32_t trial = 0; trial < 200 && !placed; ++trial) {
                    auto support = rng.sample_without_replacement(R, deg_try);
                    std::sort(support.begin(), support.end());
                    bool fresh = true;
                    for (std::uint32_t u = 0; u < deg_try && fresh; ++u)
                        for (std::uint32_t v = u + 1; v < deg_try && fresh; ++v)
                            if (used_pairs.count({support[u], support[v]})) fresh = false;
                    // Prefer girth >= 6; accept repeated pairs only after the
                    // search stops finding fresh ones.
                    if (!fresh && trial < 60) continue;

                    std::vector<std::uint16_t> coeffs(deg_try);
                    for (std::uint32_t ctrial = 0; ctrial < 200 && !placed; ++ctrial) {
                        for (auto& c : coeffs)
                            c = static_cast<std::uint16_t>(1 + rng.below(field.size() - 1));
                        bool coeff_ok = true;
                        // A repeated row pair must carry a fresh coefficient
                        // ratio; that keeps every length-4 cycle nonsingular.
                        for (std::uint32_t u = 0; u < deg_try && coeff_ok; ++u) {
                            for (std::uint32_t v = u + 1; v < deg_try && coeff_ok; ++v) {
                                auto key = std::make_pair(support[u], support[v]);
                                auto it = pair_ratios.find(key);
                                if (it == pair_ratios.end()) continue;
                                std::uint16_t ratio = field.mul(coeffs[v], field.inv(coeffs[u]));
                                if (it->second.count(ratio)) coeff_ok = false;
                            }
                        }
                        if (coeff_ok) placed = true;
                    }
                    if (!placed) continue;
                    for (std::uint32_t u = 0; u < deg_try; ++u)
                        for (std::uint32_t v = u + 1; v < deg_try; ++v) {
                            pair_ratios[{support[u], support[v]}].insert(
                                field.mul(coeffs[v], field.inv(coeffs[u])));
                            used_pairs.insert({support[u], support[v]});
                        }
                    for (std::uint32_t u = 0; u < deg_try; ++u)
                        rows[support[u]].push_back({j, coeffs[u]});
                }
            }
            if (!placed) ok = false;
        }
        if (!ok) continue;
        try {
            return ParityCheckMatrix(field, L, std::move(rows));
        } catch (const std::invalid_argument&) {
            continue;  // rank deficient, retry with evolved seed
        }
    }
    throw std::runtime_error("generate_code: construction failed after bounded retries");
}

/// One check-to-variable message: the |da\i|-fold circular convolution of
/// coefficient-relabelled incoming messages, evaluated through the WHT.
/// `incoming` holds (message, coefficient) for the row neighbours other than
/// the target; `target_coeff` is H_{a,i}.
inline std::vector<double> check_to_variable(const Field& field,
                                             const std::vector<std::pair<std::span<const double>, std::uint16_t>>& incoming,
                                             std::uint16_t target_coeff,
                                             std::uint64_t* underflow_flags = nullptr) {
    const std::uint32_t B = field.size();
    std::vector<double> acc(B, 1.0);
    std::vector<double> scratch(B);
    for (const auto& [msg, coeff] : incoming) {
        if (msg.size() != B) throw std::invalid_argument("check_to_variable: message length");
        std::fill(scratch.begin(), scratch.end(), 0.0);
        for (std::uint32_t q = 0; q < B; ++q) scratch[field.mul(coeff, static_cast<std::uint16_t>(q))] = msg[q];
        gf::wht(scratch);
        for (std::uint32_t q = 0; q < B; ++q) acc[q] *= scratch[q];
    }
    gf::wht(acc);  // inverse up to 1/B, absorbed by the normalisation
    std::vector<double> out(B);
    double sum = 0.0;
    for (std::uint32_t q = 0; q < B; ++q) {
        double v = acc[field.mul(target_coeff, static_cast<std::uint16_t>(q))];
        if (v < 0.0) v = 0.0;  // WHT round-off
        out[q] = v;
        sum += v;
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        if (underflow_flags) ++*underflow_flags;
        std::fill(out.begin(), out.end(), 1.0 / B);
        return out;
    }
    for (auto& v : out) v /= sum;
    return out;
}

/// Soft-in soft-out flooding BP over the Tanner graph. Owns the per-decode
/// message buffers; one instance per thread.
class SisoDecoder {
public:
    explicit SisoDecoder(const ParityCheckMatrix& H)
        : H_(&H), B_(H.field().size()) {
        edge_offset_.assign(H.num_checks() + 1, 0);
        for (std::uint32_t a = 0; a < H.num_checks(); ++a)
            edge_offset_[a + 1] = edge_offset_[a] + static_cast<std::uint32_t>(H.rows()[a].size());
        n_edges_ = edge_offset_.back();
        max_row_deg_ = 0;
        for (const auto& row : H.rows())
            max_row_deg_ = std::max<std::uint32_t>(max_row_deg_, static_cast<std::uint32_t>(row.size()));
        v2c_.resize(static_cast<std::size_t>(n_edges_) * B_);
        c2v_.resize(static_cast<std::size_t>(n_edges_) * B_);
        wht_buf_.resize(static_cast<std::size_t>(max_row_deg_) * B_);
        prefix_.resize(static_cast<std::size_t>(max_row_deg_ + 1) * B_);
        suffix_.resize(static_cast<std::size_t>(max_row_deg_ + 1) * B_);
    }

    std::uint64_t underflow_count() const { return underflow_count_; }

    /// priors: L stacked length-B probability vectors. Returns per-variable
    /// beliefs, L1-normalised per section. iterations = 0 returns the
    /// normalised priors.
    std::vector<double> run(std::span<const double> priors, std::uint32_t iterations) {
        const auto& H = *H_;
        const std::uint32_t L = H.length();
        if (priors.size() != static_cast<std::size_t>(L) * B_)
            throw std::invalid_argument("siso_decode: prior size mismatch");

        std::vector<double> beliefs(static_cast<std::size_t>(L) * B_);
        if (iterations == 0) {
            for (std::uint32_t i = 0; i < L; ++i)
                normalize(priors.subspan(static_cast<std::size_t>(i) * B_, B_),
                          std::span<double>(beliefs).subspan(static_cast<std::size_t>(i) * B_, B_));
            return beliefs;
        }

        // mu_{i->a} initialised with the priors
        for (std::uint32_t a = 0; a < H.num_checks(); ++a) {
            const auto& row = H.rows()[a];
            for (std::uint32_t k = 0; k < row.size(); ++k) {
                auto dst = v2c(a, k);
                auto src = priors.subspan(static_cast<std::size_t>(row[k].col) * B_, B_);
                normalize(src, dst);
            }
        }

        for (std::uint32_t it = 1; it <= iterations; ++it) {
            check_update();
            if (it < iterations) variable_update(priors);
        }

        // final beliefs: prior times all incoming check messages
        for (std::uint32_t i = 0; i < L; ++i) {
            auto out = std::span<double>(beliefs).subspan(static_cast<std::size_t>(i) * B_, B_);
            for (std::uint32_t q = 0; q < B_; ++q) out[q] = priors[static_cast<std::size_t>(i) * B_ + q];
            for (const auto& [a, k] : H.col_adjacency(i)) {
                auto msg = c2v(a, k);
                for (std::uint32_t q = 0; q < B_; ++q) out[q] *= msg[q];
            }
            clamp_normalize(out);
        }
        return beliefs;
    }

private:
    std::span<double> v2c(std::uint32_t a, std::uint32_t k) {
        return {v2c_.data() + static_cast<std::size_t>(edge_offset_[a] + k) * B_, B_};
    }
    std::span<double> c2v(std::uint32_t a, std::uint32_t k) {
        return {c2v_.data() + static_cast<std::size_t>(edge_offset_[a] + k) * B_, B_};
    }

    static void normalize(std::span<const double> in, std::span<double> out) {
        double sum = 0.0;
        for (double v : in) sum += v;
        if (!(sum > 0.0)) {
            std::fill(out.begin(), out.end(), 1.0 / in.size());
            return;
        }
        for (std::size_t q = 0; q < in.size(); ++q) out[q] = in[q] / sum;
    }

    void clamp_normalize(std::span<double> v) {
        // softmax priors can be numerically one-hot at high SNR
        double sum = 0.0;
        for (auto& x : v) {
            if (!(x > 1e-30)) x = 1e-30;
            sum += x;
        }
        for (auto& x : v) x /= sum;
    }

    void check_update() {
        const auto& H = *H_;
        for (std::uint32_t a = 0; a < H.num_checks(); ++a) {
            const auto& row = H.rows()[a];
            const std::uint32_t deg = static_cast<std::uint32_t>(row.size());
            // WHT of each relabelled incoming message
            for (std::uint32_t k = 0; k < deg; ++k) {
                double* w = wht_buf_.data() + static_cast<std::size_t>(k) * B_;
                std::fill(w, w + B_, 0.0);
                auto msg = v2c(a, k);
                for (std::uint32_t q = 0; q < B_; ++q)
                    w[H.field().mul(row[k].coeff, static_cast<std::uint16_t>(q))] = msg[q];
                gf::wht({w, B_});
            }
            // prefix/suffix products leave out one edge at a time
            double* pre = prefix_.data();
            double* suf = suffix_.data();
            std::fill(pre, pre + B_, 1.0);
            for (std::uint32_t k = 0; k < deg; ++k) {
                const double* w = wht_buf_.data() + static_cast<std::size_t>(k) * B_;
                for (std::uint32_t q = 0; q < B_; ++q)
                    pre[(k + 1) * B_ + q] = pre[k * B_ + q] * w[q];
            }
            std::fill(suf + static_cast<std::size_t>(deg) * B_, suf + static_cast<std::size_t>(deg + 1) * B_, 1.0);
            for (std::uint32_t k = deg; k-- > 0;) {
                const double* w = wht_buf_.data() + static_cast<std::size_t>(k) * B_;
                for (std::uint32_t q = 0; q < B_; ++q)
                    suf[k * B_ + q] = suf[(k + 1) * B_ + q] * w[q];
            }
            for (std::uint32_t k = 0; k < deg; ++k) {
                std::vector<double>& tmp = conv_tmp_;
                tmp.resize(B_);
                for (std::uint32_t q = 0; q < B_; ++q)
                    tmp[q] = pre[k * B_ + q] * suf[(k + 1) * B_ + q];
                gf::wht(tmp);
                auto out = c2v(a, k);
                double sum = 0.0;
                for (std::uint32_t q = 0; q < B_; ++q) {
                    double v = tmp[H.field().mul(row[k].coeff, static_cast<std::uint16_t>(q))];
                    if (v < 0.0) v = 0.0;
                    out[q] = v;
                    sum += v;
                }
                if (!(sum > 0.0) || !std::isfinite(sum)) {
                    ++underflow_count_;
                    std::fill(out.begin(), out.end(), 1.0 / B_);
                } else {
                    for (auto& v : out) v /= sum;
                }
            }
        }
    }

    void variable_update(std::span<const double> priors) {
        const auto& H = *H_;
        for (std::uint32_t i = 0; i < H.length(); ++i) {
            const auto& adj = H.col_adjacency(i);
            const std::uint32_t deg = static_cast<std::uint32_t>(adj.size());
            if (deg == 0) continue;
            double* pre = prefix_.data();
            double* suf = suffix_.data();
            std::fill(pre, pre + B_, 1.0);
            for (std::uint32_t k = 0; k < deg; ++k) {
                auto msg = c2v(adj[k].first, adj[k].second);
                for (std::uint32_t q = 0; q < B_; ++q)
                    pre[(k + 1) * B_ + q] = pre[k * B_ + q] * msg[q];
            }
            std::fill(suf + static_cast<std::size_t>(deg) * B_, suf + static_cast<std::size_t>(deg + 1) * B_, 1.0);
            for (std::uint32_t k = deg; k-- > 0;) {
                auto msg = c2v(adj[k].first, adj[k].second);
                for (std::uint32_t q = 0; q < B_; ++q)
                    suf[k * B_ + q] = suf[(k + 1) * B_ + q] * msg[q];
            }
            for (std::uint32_t k = 0; k < deg; ++k) {
                auto out = v2c(adj[k].first, adj[k].second);
                for (std::uint32_t q = 0; q < B_; ++q)
                    out[q] = priors[static_cast<std::size_t>(i) * B_ + q] * pre[k * B_ + q] *
                             suf[(k + 1) * B_ + q];
                clamp_normalize(out);
            }
        }
    }

    const ParityCheckMatrix* H_;
    std::uint32_t B_;
    std::uint32_t n_edges_ = 0;
    std::uint32_t max_row_deg_ = 0;
    std::vector<std::uint32_t> edge_offset_;
    std::vector<double> v2c_, c2v_, wht_buf_, prefix_, suffix_;
    std::vector<double> conv_tmp_;
    std::uint64_t underflow_count_ = 0;
};

/// Convenience wrapper matching the operation contract; allocates a decoder
/// per call. Hot paths keep a SisoDecoder instance instead.
inline std::vector<double> siso_decode(std::span<const double> priors, const ParityCheckMatrix& H,
                                       std::uint32_t iterations) {
    SisoDecoder dec(H);
    return dec.run(priors, iterations);
}

}  // namespace srldpc
