// Tracks the decoder's per-iteration MSE against the deterministic
// state-evolution prediction for a fixed mismatched channel estimate.

#include <iostream>

#include "srldpc/harness.hpp"

using namespace srldpc;

int main() {
    ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::object());
    cfg.set_override("sweep.ebn0_db=[-1.0]");
    cfg.set_override("decoder.init=FixedMismatch");
    cfg.set_override("decoder.update_channel=false");
    cfg.set_override("decoder.siso_per_iter=0");
    cfg.set_override("decoder.T=12");
    cfg.set_override("decoder.fixed_mismatch_abs=1.1");
    cfg.set_override("decoder.fixed_mismatch_arg=0.19634954084936207");  // pi/16
    cfg.set_override("se.empirical_trials=8");
    cfg.set_override("se.h_norm_factor=0.9");
    cfg.set_override("se.table_samples=8");

    auto res = se_trajectory(cfg, &std::cerr);
    std::cout << se_trajectory_csv(cfg, res);
    return 0;
}
