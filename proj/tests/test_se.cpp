#include <catch2/catch_amalgamated.hpp>

#include "srldpc/harness.hpp"
#include "srldpc/se.hpp"

using namespace srldpc;

TEST_CASE("isotonic projection") {
    std::vector<double> v{1.0, 0.5, 2.0, 1.5, 3.0};
    isotonic_increasing(v);
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] >= v[i - 1]);
    CHECK(v[0] == Catch::Approx(0.75));
}

TEST_CASE("mse table limits") {
    auto spec = CodeSpec::make(32, 16, 24, 128);  // nP = 4
    auto H = generate_code(spec.L, spec.L_inf, spec.m(), 2, 21);
    const double px = spec.n * spec.P / spec.B;

    auto table = build_mse_table(spec, &H, {1.0}, {1e-4, 0.05, 0.5, 5.0, 500.0}, {0, 1}, 24, 9);
    CHECK(table.px == Catch::Approx(px));

    // tau -> 0: mse -> 0; tau -> inf: mse -> prior variance P_X (1 - 1/B)
    CHECK(table.values[0][0][0].mse < 1e-6);
    CHECK(table.values[0][0][4].mse ==
          Catch::Approx(px * (1.0 - 1.0 / spec.B)).epsilon(0.05));

    // monotone mse along the grid
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t t = 1; t < 5; ++t)
            CHECK(table.values[s][0][t].mse >= table.values[s][0][t - 1].mse);

    // lookup reconstructs grid cells
    auto cell = table.lookup(0, 1.0, 0.5);
    CHECK(cell.mse_at(cplx{1.0, 0.0}) == Catch::Approx(table.values[0][0][2].mse).margin(1e-12));

    CHECK_THROWS_AS(table.lookup(3, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("mse table is insensitive to the transmitted codeword") {
    // shift invariance consequence: random codewords vs the uniform-index
    // ensemble give the same statistics within sampling error
    auto spec = CodeSpec::make(48, 16, 36, 192);
    auto H = generate_code(spec.L, spec.L_inf, spec.m(), 2, 23);
    auto with_code = build_mse_table(spec, &H, {1.0}, {0.2, 0.6}, {0}, 80, 31);
    auto without = build_mse_table(spec, nullptr, {1.0}, {0.2, 0.6}, {0}, 80, 31);
    for (int t = 0; t < 2; ++t)
        CHECK(with_code.values[0][0][t].mse ==
              Catch::Approx(without.values[0][0][t].mse).epsilon(0.08).margin(1e-4));
}

TEST_CASE("se step algebra") {
    auto spec = CodeSpec::paper();
    const double px = spec.n * spec.P / spec.B;
    const double sigma2 = 0.5;
    const double nh2 = 3.6;

    // perfect denoiser: mse = 0, cross = ee = px -> tau^2 = sigma^2/||h||^2
    MseTable t;
    t.alpha_grid = {1.0};
    t.tau2_grid = {1e-6, 10.0};
    t.siso_iters_list = {0};
    t.px = px;
    t.samples = 1;
    t.fingerprint = spec_fingerprint(spec);
    MseCell perfect{0.0, px, 0.0};
    t.values = {{{perfect, perfect}}};

    SeConfig cfg;
    cfg.spec = spec;
    cfg.sigma2 = sigma2;
    cfg.T = 2;
    cfg.M = 4;
    auto tr = se_run(cfg, t, 1.0, nh2, nh2);
    CHECK(tr.alpha[1].real() == Catch::Approx(1.0));
    CHECK(tr.tau2[1] == Catch::Approx(sigma2 / nh2).epsilon(1e-12));
    CHECK(tr.mse_pred[0] == Catch::Approx(0.0).margin(1e-12));
    // cmse at alpha = 1: only the sigma^2 b^2 term survives
    const double ee_ext = static_cast<double>(spec.N()) * px;
    CHECK(tr.cmse_pred[0] ==
          Catch::Approx(sigma2 * ee_ext / ((sigma2 + ee_ext) * (sigma2 + ee_ext))).epsilon(1e-12));

    // OAMP with q = 0 differs from AMP only by (delta - 1) vs delta
    MseCell mid{0.4 * px, 0.7 * px, 0.0};
    MseTable t2 = t;
    t2.values = {{{mid, mid}}};
    SeConfig amp = cfg;
    auto tr_amp = se_run(amp, t2, 1.0, nh2, nh2);
    SeConfig oamp = cfg;
    oamp.variant = Variant::OAMP;
    auto tr_oamp = se_run(oamp, t2, 1.0, nh2, nh2);
    const double delta = spec.delta();
    double amp_gain = tr_amp.tau2[1] - sigma2 * std::norm(tr_amp.alpha[1]) / nh2;
    double oamp_gain = tr_oamp.tau2[1] - sigma2 * std::norm(tr_oamp.alpha[1]) / nh2;
    CHECK(oamp_gain / amp_gain == Catch::Approx((delta - 1.0) / delta).epsilon(1e-6));
}

TEST_CASE("matched denoiser keeps alpha at one") {
    auto spec = CodeSpec::make(96, 16, 72, 384);
    auto table = build_mse_table(spec, nullptr, {1.0}, {0.1, 0.3, 1.0}, {0}, 400, 77);
    // MMSE orthogonality: E[X eta] = E[||eta||^2] at alpha = 1
    for (std::size_t it = 0; it < 3; ++it) {
        const auto& c = table.values[0][0][it];
        double ee = c.mse - table.px + 2.0 * c.cross;
        CHECK(c.cross == Catch::Approx(ee).epsilon(0.02));
    }
}

TEST_CASE("online alpha/b estimates") {
    std::vector<std::vector<cplx>> h_seq(5, {cplx{1.0, 0.5}, cplx{-0.3, 0.2}});
    std::vector<double> x_norms{1.0, 2.0, 3.0, 4.0};
    auto est = estimate_alpha_b_online(h_seq, x_norms, 0.5, 1.0);
    for (const auto& a : est.alpha) CHECK(std::abs(a - cplx{1.0, 0.0}) < 1e-12);
    for (std::size_t t = 0; t < x_norms.size(); ++t)
        CHECK(est.b2[t] == Catch::Approx(x_norms[t] / std::pow(0.5 + x_norms[t], 2)));

    std::vector<std::vector<cplx>> bad = {{cplx{1.0, 0.0}}, {cplx{0.0, 1.0}}, {cplx{0.0, 0.0}}};
    CHECK_THROWS_AS(estimate_alpha_b_online(bad, {1.0}, 0.5, 1.0), std::runtime_error);
}

TEST_CASE("bler table is monotone and brackets the transition") {
    auto spec = CodeSpec::make(96, 16, 72, 384);  // nP = 4
    auto H = generate_code(spec.L, spec.L_inf, spec.m(), 2, 25);
    auto t = build_bler_table(spec, H, {0.02, 0.1, 0.4, 1.5, 6.0}, 60, 6, 3);
    for (std::size_t i = 1; i < t.bler.size(); ++i) CHECK(t.bler[i] >= t.bler[i - 1]);
    CHECK(t.bler.front() == 0.0);
    CHECK(t.bler.back() > 0.9);
    CHECK(t.lookup(0.01) == 0.0);
    CHECK(t.lookup(100.0) == t.bler.back());
}

TEST_CASE("table files round-trip and validate the fingerprint") {
    auto spec = CodeSpec::make(32, 16, 24, 128, 1.0);
    auto table = build_mse_table(spec, nullptr, {0.8, 1.0}, {0.2, 0.8}, {0}, 8, 5);
    const std::string path = "mse_table_test.json";
    table.save_file(path);
    auto loaded = MseTable::load_file(path, spec);
    CHECK(loaded.values[0][1][1].mse == table.values[0][1][1].mse);
    CHECK(loaded.values[0][0][0].cross == table.values[0][0][0].cross);

    auto other = CodeSpec::make(32, 16, 24, 120, 1.0);
    CHECK_THROWS_AS(MseTable::load_file(path, other), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("predict_bler vanishes at high snr") {
    auto spec = CodeSpec::make(96, 16, 72, 384);
    auto H = generate_code(spec.L, spec.L_inf, spec.m(), 2, 27);
    auto mse_table = build_mse_table(spec, &H, {1.0}, default_tau2_grid(0.005, 8.0, 18), {0, 1}, 40, 7);
    auto bler_table = build_bler_table(spec, H, default_tau2_grid(0.05, 4.0, 10), 60, 6, 9);

    SeConfig cfg;
    cfg.spec = spec;
    cfg.T = 12;
    cfg.siso_per_iter = 1;
    cfg.M = 4;
    cfg.update_channel = false;  // oracle CSI

    cfg.sigma2 = sigma2_from_ebn0(spec, 12.0);
    auto hi = predict_bler(cfg, mse_table, bler_table, 400, 11, true);
    cfg.sigma2 = sigma2_from_ebn0(spec, -6.0);
    auto lo = predict_bler(cfg, mse_table, bler_table, 400, 11, true);
    CHECK(hi.bler < 0.01);
    CHECK(lo.bler > 0.5);
}
