#include <catch2/catch_amalgamated.hpp>

#include "srldpc/sparc.hpp"

using namespace srldpc;

namespace {

// dense matrix straight from the definition A = sqrt(N/n) P F_N diag(s)
std::vector<cplx> dense_signed_dft(const Dictionary& d) {
    const auto& spec = d.spec();
    const std::uint64_t N = spec.N();
    std::vector<cplx> A(static_cast<std::size_t>(spec.n) * N);
    const double scale = std::sqrt(static_cast<double>(N) / spec.n) / std::sqrt(static_cast<double>(N));
    for (std::uint32_t k = 0; k < spec.n; ++k) {
        const std::uint64_t row = d.row_selection()[k];
        for (std::uint64_t j = 0; j < N; ++j) {
            double ang = -2.0 * M_PI * static_cast<double>((row * j) % N) / static_cast<double>(N);
            A[k * N + j] = scale * static_cast<double>(d.signs()[j]) * cplx{std::cos(ang), std::sin(ang)};
        }
    }
    return A;
}

}  // namespace

TEST_CASE("CodeSpec invariants") {
    auto spec = CodeSpec::paper();
    CHECK(spec.N() == 766ull * 256);
    CHECK(spec.rate_out() == Catch::Approx(736.0 / 766.0));
    CHECK(spec.rate_in() == Catch::Approx(766.0 * 8 / 3675.0));
    CHECK(spec.rate() == Catch::Approx(8.0 * 736 / 3675.0));
    CHECK(spec.bits() == 736 * 8);
    CHECK(spec.P == Catch::Approx(1.0 / 766.0));
    CHECK_THROWS_AS(CodeSpec::make(4, 8, 2, 64, 1.0), std::invalid_argument);  // n > N
    CHECK_THROWS_AS(CodeSpec::make(4, 6, 2, 8, 1.0), std::invalid_argument);   // B not a power of two
}

TEST_CASE("SignedDFT columns have exactly unit norm") {
    auto spec = CodeSpec::make(8, 8, 6, 16, 1.0);
    Dictionary d(spec, Ensemble::SignedDFT, 123);
    for (std::uint64_t j = 0; j < spec.N(); j += 7) {
        auto col = d.column(j);
        double norm = 0.0;
        for (auto& v : col) norm += std::norm(v);
        CHECK(norm == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("SignedDFT rows are orthogonal: ||A^H u||^2 = delta ||u||^2") {
    auto spec = CodeSpec::make(16, 16, 12, 64, 1.0);
    Dictionary d(spec, Ensemble::SignedDFT, 5);
    Rng rng(17);
    for (int t = 0; t < 5; ++t) {
        std::vector<cplx> u(spec.n);
        for (auto& v : u) v = rng.cgauss();
        auto r = d.adjoint(u);
        double nu = 0.0, nr = 0.0;
        for (auto& v : u) nu += std::norm(v);
        for (auto& v : r) nr += std::norm(v);
        CHECK(nr / nu == Catch::Approx(spec.delta()).epsilon(1e-9));
    }
}

TEST_CASE("forward and adjoint match the dense oracle at N=64") {
    auto spec = CodeSpec::make(8, 8, 6, 16, 1.0);
    Dictionary d(spec, Ensemble::SignedDFT, 42);
    auto A = dense_signed_dft(d);
    const std::uint64_t N = spec.N();
    Rng rng(3);

    std::vector<cplx> x(N);
    for (auto& v : x) v = rng.cgauss();
    auto fast = d.forward(x);
    for (std::uint32_t k = 0; k < spec.n; ++k) {
        cplx acc = 0.0;
        for (std::uint64_t j = 0; j < N; ++j) acc += A[k * N + j] * x[j];
        REQUIRE(std::abs(fast[k] - acc) < 1e-10);
    }

    std::vector<cplx> u(spec.n);
    for (auto& v : u) v = rng.cgauss();
    auto adj = d.adjoint(u);
    for (std::uint64_t j = 0; j < N; ++j) {
        cplx acc = 0.0;
        for (std::uint32_t k = 0; k < spec.n; ++k) acc += std::conj(A[k * N + j]) * u[k];
        REQUIRE(std::abs(adj[j] - acc) < 1e-10);
    }

    // adjointness identity <Ax, u> = <x, A^H u>
    cplx lhs = 0.0, rhs = 0.0;
    for (std::uint32_t k = 0; k < spec.n; ++k) lhs += std::conj(fast[k]) * u[k];
    for (std::uint64_t j = 0; j < N; ++j) rhs += std::conj(x[j]) * adj[j];
    CHECK(std::abs(lhs - rhs) < 1e-10);

    // zero maps to zero
    std::vector<cplx> zero(N, cplx{0.0, 0.0});
    for (auto& v : d.forward(zero)) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("GaussianIID entries have variance 1/n") {
    auto spec = CodeSpec::make(32, 16, 24, 128, 1.0);
    Dictionary d(spec, Ensemble::GaussianIID, 11);
    const auto& entries = d.dense_entries();
    double mean2 = 0.0;
    for (const auto& v : entries) mean2 += std::norm(v);
    mean2 /= static_cast<double>(entries.size());
    // 3 sigma band for the sample mean of |a|^2 (exponential, var = 1/n^2)
    double tol = 3.0 / (std::sqrt(static_cast<double>(entries.size())) * spec.n);
    CHECK(std::abs(mean2 - 1.0 / spec.n) < tol);

    // adjointness holds for the dense ensemble too
    Rng rng(7);
    std::vector<cplx> x(spec.N()), u(spec.n);
    for (auto& v : x) v = rng.cgauss();
    for (auto& v : u) v = rng.cgauss();
    auto ax = d.forward(x);
    auto ahu = d.adjoint(u);
    cplx lhs = 0.0, rhs = 0.0;
    for (std::uint32_t k = 0; k < spec.n; ++k) lhs += std::conj(ax[k]) * u[k];
    for (std::uint64_t j = 0; j < spec.N(); ++j) rhs += std::conj(x[j]) * ahu[j];
    CHECK(std::abs(lhs - rhs) < 1e-10);
}

TEST_CASE("encode_message places nonzeros and concentrates the signal energy") {
    auto spec = CodeSpec::make(16, 8, 12, 32, 1.0);
    Dictionary d(spec, Ensemble::SignedDFT, 9);

    std::vector<std::uint16_t> zero_cw(spec.L, 0);
    auto [msg, z] = encode_message(spec, d, zero_cw);
    auto x = msg.to_dense(spec);
    for (std::uint32_t j = 0; j < spec.L; ++j) {
        CHECK(x[static_cast<std::size_t>(j) * spec.B] == Catch::Approx(spec.sqrt_nP()));
        for (std::uint32_t i = 1; i < spec.B; ++i)
            CHECK(x[static_cast<std::size_t>(j) * spec.B + i] == 0.0);
    }
    CHECK(z.size() == spec.n);

    // single-section code: z is one scaled column
    auto spec1 = CodeSpec::make(1, 16, 1, 8, 1.0);
    Dictionary d1(spec1, Ensemble::SignedDFT, 10);
    std::vector<std::uint16_t> cw1 = {5};
    auto [m1, z1] = encode_message(spec1, d1, cw1);
    auto col = d1.column(5);
    for (std::uint32_t k = 0; k < spec1.n; ++k)
        CHECK(std::abs(z1[k] - spec1.sqrt_nP() * col[k]) < 1e-12);

    // ||z||^2 concentrates at nLP at the full-scale dimensions
    auto specp = CodeSpec::paper();
    Rng rng(21);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Dictionary dp(specp, Ensemble::SignedDFT, seed);
        std::vector<std::uint16_t> cw(specp.L);
        for (auto& s : cw) s = static_cast<std::uint16_t>(rng.below(specp.B));
        auto [mp, zp] = encode_message(specp, dp, cw);
        double e = 0.0;
        for (auto& v : zp) e += std::norm(v);
        double ratio = e / (specp.n * specp.L * specp.P);
        CHECK(ratio > 0.9);
        CHECK(ratio < 1.1);
    }
}

TEST_CASE("quantize recovers signals and breaks ties deterministically") {
    auto spec = CodeSpec::make(8, 4, 6, 16, 1.0);
    Rng rng(33);
    SparseMessage msg;
    msg.indices.resize(spec.L);
    for (auto& i : msg.indices) i = static_cast<std::uint32_t>(rng.below(spec.B));
    auto x = msg.to_dense(spec);
    CHECK(quantize(spec, x) == msg);

    // small perturbation below half the gap keeps the argmax
    auto noisy = x;
    for (auto& v : noisy) v += 0.4 * spec.sqrt_nP() * (rng.uniform() - 0.5);
    CHECK(quantize(spec, noisy) == msg);

    // all-equal section resolves to index zero
    std::vector<double> flat(spec.N(), 1.0);
    auto q = quantize(spec, flat);
    for (auto i : q.indices) CHECK(i == 0);
}
