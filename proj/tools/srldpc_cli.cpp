// Command-line front end: seeded Monte-Carlo simulation, state-evolution
// prediction, outage baselines, file-level encode/decode and table building.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srldpc/harness.hpp"

using namespace srldpc;

namespace {

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    ExperimentConfig cfg = path.empty() ? ExperimentConfig::from_json(nlohmann::json::object())
                                        : ExperimentConfig::from_file(path);
    for (const auto& kv : overrides) cfg.set_override(kv);
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SR-LDPC code simulator for the non-coherent Rayleigh SIMO channel"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "experiment config JSON")->capture_default_str();
    app.add_option("--set", overrides, "override config leaves, e.g. decoder.variant=OAMP");

    auto* sim = app.add_subcommand("simulate", "Monte-Carlo BLER / CMSE simulation");
    std::string sim_out;
    sim->add_option("--out", sim_out, "output CSV path (default: outputs.csv from config, or stdout)");

    auto* se = app.add_subcommand("se", "state-evolution prediction");
    std::string se_out;
    std::string se_mode = "trajectory";
    se->add_option("--out", se_out, "output CSV path");
    se->add_option("--mode", se_mode, "trajectory | bler")->check(CLI::IsMember({"trajectory", "bler"}));

    auto* outage = app.add_subcommand("outage", "closed-form outage probability sweep");
    std::string outage_out;
    double outage_rate = 0.0;
    std::uint32_t outage_m = 0;
    std::vector<double> outage_ebn0;
    bool outage_norm = false;
    outage->add_option("--out", outage_out, "output CSV path");
    outage->add_option("--rate", outage_rate, "code rate (default: from config)");
    outage->add_option("--M", outage_m, "receive antennas (default: from config)");
    outage->add_option("--ebn0", outage_ebn0, "Eb/N0 grid in dB (default: sweep from config)");
    outage->add_flag("--normalize-by-M", outage_norm, "use the h-normalised convention");

    auto* enc = app.add_subcommand("encode", "bits file -> section indices + baseband samples");
    std::string enc_bits, enc_samples, enc_indices;
    enc->add_option("--bits", enc_bits, "input bits file (ASCII 0/1)")->required();
    enc->add_option("--samples", enc_samples, "output complex samples file")->required();
    enc->add_option("--indices", enc_indices, "optional output of per-section indices");

    auto* dec = app.add_subcommand("decode", "received matrix -> decoded bits + diagnostics");
    std::string dec_received, dec_bits, dec_diag;
    double dec_ebn0 = 1.0;
    dec->add_option("--received", dec_received, "received n x M matrix file")->required();
    dec->add_option("--bits", dec_bits, "output bits file")->required();
    dec->add_option("--diag", dec_diag, "output diagnostics JSON");
    dec->add_option("--ebn0", dec_ebn0, "operating Eb/N0 in dB (fixes the assumed sigma^2)");

    auto* tables = app.add_subcommand("build-tables", "build and store the SE lookup tables");
    std::string mse_out, bler_out;
    bool tables_2d = false;
    tables->add_option("--mse-out", mse_out, "MSE table JSON path")->required();
    tables->add_option("--bler-out", bler_out, "BLER table JSON path");
    tables->add_flag("--mismatch-grid", tables_2d, "grid over Re(alpha) as well");

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = load_config(config_path, overrides);

        if (*sim) {
            auto res = simulate(cfg, &std::cerr);
            std::string out = sim_out.empty()
                                  ? cfg.raw.at("outputs").at("csv").get<std::string>()
                                  : sim_out;
            write_text(out, simulate_csv(cfg, res));
            if (cfg.raw.at("outputs").at("trace").get<bool>() && !out.empty() && out != "-")
                write_text(out + ".trials.csv", trials_csv(cfg, res));
        } else if (*se) {
            if (se_mode == "trajectory") {
                auto res = se_trajectory(cfg, &std::cerr);
                write_text(se_out, se_trajectory_csv(cfg, res));
            } else {
                write_text(se_out, se_bler_csv(cfg, &std::cerr));
            }
        } else if (*outage) {
            const CodeSpec spec = cfg.code_spec();
            double R = outage_rate > 0.0 ? outage_rate : spec.rate();
            std::uint32_t M = outage_m ? outage_m : cfg.raw.at("channel").at("M").get<std::uint32_t>();
            std::vector<double> grid = outage_ebn0;
            if (grid.empty())
                for (const auto& e : cfg.raw.at("sweep").at("ebn0_db")) grid.push_back(e.get<double>());
            bool norm = outage_norm || cfg.raw.at("channel").at("normalize_by_M").get<bool>();
            write_text(outage_out, outage_csv(R, M, grid, norm));
        } else if (*enc) {
            encode_file(cfg, enc_bits, enc_samples, enc_indices);
        } else if (*dec) {
            const CodeSpec spec = cfg.code_spec();
            nlohmann::json diag = decode_file(cfg, dec_received, dec_bits,
                                              sigma2_from_ebn0(spec, dec_ebn0));
            if (!dec_diag.empty()) {
                std::ofstream os(dec_diag);
                os << diag.dump(1) << "\n";
            } else {
                std::cout << diag.dump(1) << "\n";
            }
        } else if (*tables) {
            const CodeSpec spec = cfg.code_spec();
            const ParityCheckMatrix H = cfg.outer_code();
            cfg.set_override("se.mse_table=" + mse_out);
            ensure_mse_table(cfg, spec, &H, !tables_2d, &std::cerr);
            if (!bler_out.empty()) {
                cfg.set_override("se.bler_table=" + bler_out);
                ensure_bler_table(cfg, spec, H, &std::cerr);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
