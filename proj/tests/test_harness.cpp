#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "srldpc/harness.hpp"

using namespace srldpc;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::object());
    cfg.set_override("code.L=64");
    cfg.set_override("code.L_inf=48");
    cfg.set_override("code.B=16");
    cfg.set_override("code.n=256");
    cfg.set_override("channel.M=2");
    cfg.set_override("decoder.T=12");
    cfg.set_override("decoder.T_BP=6");
    cfg.set_override("trials=20");
    return cfg;
}

}  // namespace

TEST_CASE("wilson interval") {
    auto ci = wilson_ci95(0, 100);
    CHECK(ci.lo < 1e-12);
    CHECK(ci.hi < 0.05);
    auto ci2 = wilson_ci95(50, 100);
    CHECK(ci2.lo == Catch::Approx(0.40).margin(0.01));
    CHECK(ci2.hi == Catch::Approx(0.60).margin(0.01));
}

TEST_CASE("config parsing, overrides and validation") {
    auto cfg = small_config();
    CHECK(cfg.code_spec().L == 64);
    CHECK(cfg.code_spec().P == Catch::Approx(1.0 / 64));
    cfg.set_override("decoder.variant=OAMP");
    CHECK(cfg.decoder_config(1.0).variant == Variant::OAMP);
    cfg.set_override("sweep.ebn0_db=[0.5,1.5]");
    CHECK(cfg.raw.at("sweep").at("ebn0_db").size() == 2);
    CHECK_THROWS(cfg.set_override("no_equals_sign"));

    cfg.set_override("decoder.variant=Bogus");
    CHECK_THROWS_AS(cfg.decoder_config(1.0), std::runtime_error);
}

TEST_CASE("sigma2 follows the Eb/N0 convention") {
    auto spec = CodeSpec::paper();
    // SNR = LP/sigma^2, Eb/N0 = SNR/R, P = 1/L
    double s = sigma2_from_ebn0(spec, 1.0);
    CHECK(1.0 / s == Catch::Approx(spec.rate() * std::pow(10.0, 0.1)));
}

TEST_CASE("simulate aggregates and reproduces byte-identically") {
    auto cfg = small_config();
    cfg.set_override("sweep.ebn0_db=[30.0]");  // effectively noiseless
    auto res = simulate(cfg);
    REQUIRE(res.aggregates.size() == 1);
    CHECK(res.aggregates[0].bler == 0.0);
    CHECK(res.aggregates[0].block_errors == 0);

    auto csv1 = simulate_csv(cfg, res);
    auto res2 = simulate(cfg);
    auto csv2 = simulate_csv(cfg, res2);
    CHECK(csv1 == csv2);

    // aggregation identity: bler = block_errors / trials
    cfg.set_override("sweep.ebn0_db=[-2.0]");
    cfg.set_override("trials=30");
    auto noisy = simulate(cfg);
    CHECK(noisy.aggregates[0].bler ==
          Catch::Approx(static_cast<double>(noisy.aggregates[0].block_errors) / 30.0));
    CHECK(noisy.aggregates[0].ci.lo <= noisy.aggregates[0].bler);
    CHECK(noisy.aggregates[0].ci.hi >= noisy.aggregates[0].bler);
}

TEST_CASE("serial and parallel execution agree") {
    auto cfg = small_config();
    cfg.set_override("sweep.ebn0_db=[2.0]");
    setenv("SRLDPC_THREADS", "1", 1);
    auto serial = simulate(cfg);
    setenv("SRLDPC_THREADS", "4", 1);
    auto parallel = simulate(cfg);
    unsetenv("SRLDPC_THREADS");
    CHECK(simulate_csv(cfg, serial) == simulate_csv(cfg, parallel));
}

TEST_CASE("antenna sweep with the normalised channel convention") {
    auto cfg = small_config();
    cfg.set_override("sweep.ebn0_db=[12.0]");
    cfg.set_override("sweep.M=[1,2,4]");
    cfg.set_override("channel.normalize_by_M=true");
    cfg.set_override("trials=12");
    auto res = simulate(cfg);
    REQUIRE(res.aggregates.size() == 3);
    CHECK(res.aggregates[0].M == 1);
    CHECK(res.aggregates[2].M == 4);
    for (const auto& a : res.aggregates) CHECK(a.ebn0_db == 12.0);
}

TEST_CASE("outage csv is monotone and matches the closed form") {
    auto csv = outage_csv(1.6, 1, {0.0, 2.0, 4.0});
    CHECK(csv.find("ebn0_db,M,p_out") != std::string::npos);
    double snr = 1.6 * std::pow(10.0, 0.2);
    char expect[64];
    std::snprintf(expect, sizeof(expect), "%.12g",
                  1.0 - std::exp(-(std::exp2(1.6) - 1.0) / snr));
    CHECK(csv.find(expect) != std::string::npos);
}

TEST_CASE("bits files and symbol packing") {
    std::vector<int> bits;
    for (int i = 0; i < 32; ++i) bits.push_back((i * 7 + 1) % 3 == 0);
    write_bits_file("bits_test.txt", bits);
    auto rd = read_bits_file("bits_test.txt", 32);
    CHECK(rd == bits);
    CHECK_THROWS(read_bits_file("bits_test.txt", 64));
    std::remove("bits_test.txt");

    auto sym = bits_to_symbols({1, 0, 1, 1, 0, 0, 0, 1}, 4);
    REQUIRE(sym.size() == 2);
    CHECK(sym[0] == 0xB);
    CHECK(sym[1] == 0x1);
    CHECK(symbols_to_bits(sym, 4) == std::vector<int>{1, 0, 1, 1, 0, 0, 0, 1});
}

TEST_CASE("encode/decode files round-trip through a quiet channel") {
    auto cfg = small_config();
    const CodeSpec spec = cfg.code_spec();

    // random payload
    Rng rng(71);
    std::vector<int> bits(spec.bits());
    for (auto& b : bits) b = static_cast<int>(rng.below(2));
    write_bits_file("payload.txt", bits);

    auto enc = encode_file(cfg, "payload.txt", "samples.txt", "indices.txt");
    CHECK(enc.z.size() == spec.n);

    // push through an almost noiseless SIMO channel and decode from file
    Rng crng(73);
    auto h = sample_rayleigh(2, crng);
    CMatrix Y = transmit(enc.z, h, 1e-12, crng);
    write_matrix_file("received.txt", Y);

    auto diag = decode_file(cfg, "received.txt", "decoded.txt", 1e-12);
    CHECK(diag.at("syndrome_valid").get<bool>());
    auto decoded = read_bits_file("decoded.txt", spec.bits());
    CHECK(decoded == bits);

    // truncated input reports the offset
    {
        std::ofstream os("truncated.txt");
        os << "0.5 0.5\n0.25 -0.25\n";
    }
    CHECK_THROWS_WITH(read_matrix_file("truncated.txt", spec.n, 2),
                      Catch::Matchers::ContainsSubstring("truncated"));

    // wrong payload size is rejected up front
    write_bits_file("short.txt", std::vector<int>(3, 1));
    CHECK_THROWS(encode_file(cfg, "short.txt", "samples.txt", ""));

    for (const char* f : {"payload.txt", "samples.txt", "indices.txt", "received.txt",
                          "decoded.txt", "truncated.txt", "short.txt"})
        std::remove(f);
}

TEST_CASE("se trajectory runner emits aligned SE and empirical columns") {
    auto cfg = small_config();
    cfg.set_override("sweep.ebn0_db=[4.0]");
    cfg.set_override("decoder.init=Oracle");
    cfg.set_override("decoder.update_channel=false");
    cfg.set_override("decoder.siso_per_iter=0");
    cfg.set_override("decoder.T=6");
    cfg.set_override("se.empirical_trials=4");
    cfg.set_override("se.h_norm_factor=1.0");
    cfg.set_override("se.table_samples=16");
    auto res = se_trajectory(cfg);
    REQUIRE(res.mse_se.size() == 6);
    REQUIRE(res.mse_emp.size() == 6);
    auto csv = se_trajectory_csv(cfg, res);
    CHECK(csv.find("iter,tau2_se,mse_se,cmse_se,tau2_empirical,mse_empirical,cmse_empirical") !=
          std::string::npos);
}
