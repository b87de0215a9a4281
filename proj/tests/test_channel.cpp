#include <catch2/catch_amalgamated.hpp>

#include "srldpc/channel.hpp"
#include "stat_utils.hpp"

using namespace srldpc;

TEST_CASE("sample_rayleigh moments and distribution") {
    Rng rng(101);
    const std::uint32_t M = 4;
    const int draws = 100000;
    double acc = 0.0;
    std::vector<double> norms;
    norms.reserve(draws);
    for (int k = 0; k < draws; ++k) {
        auto h = sample_rayleigh(M, rng);
        double n2 = norm_sq(h);
        acc += n2;
        norms.push_back(n2);
    }
    CHECK(acc / draws == Catch::Approx(static_cast<double>(M)).epsilon(0.02));

    // ||h||^2 ~ Gamma(M, 1)
    double p = testutil::ks_p_value(norms, [M](double x) { return gamma_reg_lower_int(M, x); });
    CHECK(p > 0.01);

    // M = 1 reduces to an exponential
    Rng rng1(102);
    std::vector<double> exp_norms;
    for (int k = 0; k < 50000; ++k) exp_norms.push_back(norm_sq(sample_rayleigh(1, rng1)));
    double p1 = testutil::ks_p_value(exp_norms, [](double x) { return 1.0 - std::exp(-x); });
    CHECK(p1 > 0.01);

    // normalised convention: E||h||^2 = 1
    Rng rng2(103);
    double accn = 0.0;
    for (int k = 0; k < 50000; ++k) accn += norm_sq(sample_rayleigh(8, rng2, true));
    CHECK(accn / 50000 == Catch::Approx(1.0).epsilon(0.02));
}

TEST_CASE("transmit realises Y = z h^H + W") {
    Rng rng(7);
    const std::uint32_t n = 64, M = 4;
    std::vector<cplx> z(n), h(M);
    for (auto& v : z) v = rng.cgauss();
    for (auto& v : h) v = rng.cgauss();

    // noiseless: rank one, rows proportional to h^H
    auto Y0 = transmit(z, h, 0.0, rng);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < M; ++j)
            CHECK(std::abs(Y0.at(i, j) - z[i] * std::conj(h[j])) < 1e-14);

    // zero signal: pure noise with the right Frobenius energy
    const double sigma2 = 0.7;
    std::vector<cplx> zero(4096, cplx{0.0, 0.0});
    auto Yn = transmit(zero, h, sigma2, rng);
    CHECK(Yn.frobenius_sq() == Catch::Approx(4096.0 * M * sigma2).epsilon(0.05));

    // determinism under a fixed seed
    Rng ra(55), rb(55);
    auto Ya = transmit(z, h, sigma2, ra);
    auto Yb = transmit(z, h, sigma2, rb);
    CHECK(Ya.data == Yb.data);

    // sample covariance of the noise rows approaches sigma2 I
    Rng rc(77);
    auto Yc = transmit(zero, h, sigma2, rc);
    for (std::uint32_t a = 0; a < M; ++a)
        for (std::uint32_t b = 0; b < M; ++b) {
            cplx acc = 0.0;
            for (std::size_t i = 0; i < Yc.rows; ++i) acc += std::conj(Yc.at(i, a)) * Yc.at(i, b);
            acc /= static_cast<double>(Yc.rows);
            double expect = (a == b) ? sigma2 : 0.0;
            // 3 sigma of the sample estimate
            CHECK(std::abs(acc - expect) < 3.0 * sigma2 / std::sqrt(static_cast<double>(Yc.rows)));
        }
}

TEST_CASE("outage probability closed forms") {
    // M = 1: exponential CDF
    for (double ebn0 : {-2.0, 0.0, 2.0, 4.0}) {
        double R = 1.6;
        double snr = R * std::pow(10.0, ebn0 / 10.0);
        double x = (std::exp2(R) - 1.0) / snr;
        CHECK(outage_probability(R, snr, 1) == Catch::Approx(1.0 - std::exp(-x)).margin(1e-12));
    }

    // monotone decreasing in snr and in M
    double prev = 1.0;
    for (double snr = 0.5; snr < 64.0; snr *= 2.0) {
        double p = outage_probability(1.6, snr, 4);
        CHECK(p < prev);
        prev = p;
    }
    CHECK(outage_probability(1.6, 2.0, 8) < outage_probability(1.6, 2.0, 4));

    CHECK_THROWS_AS(outage_probability(0.0, 1.0, 4), std::invalid_argument);
}

TEST_CASE("outage probability matches Monte Carlo within 1e-3") {
    const std::uint32_t M = 4;
    const double R = 1.6;
    const double snr = 3.0;
    const double threshold = (std::exp2(R) - 1.0) / snr;
    Rng rng(2027);
    const int draws = 1000000;
    int count = 0;
    for (int k = 0; k < draws; ++k) {
        double n2 = 0.0;
        for (std::uint32_t j = 0; j < M; ++j) n2 += std::norm(rng.cgauss());
        count += (n2 < threshold);
    }
    double mc = static_cast<double>(count) / draws;
    CHECK(std::abs(mc - outage_probability(R, snr, M)) < 1e-3);
}
