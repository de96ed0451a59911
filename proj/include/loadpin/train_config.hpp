#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

namespace loadpin {

struct TrainConfig {
    double lr_g = 1e-4, lr_d = 1e-4;
    double beta1 = 0.5, beta2 = 0.9;
    double lambda_adv = 0.1, lambda_feat = 10.0;
    std::size_t batch_size = 16;
    std::size_t max_iters = 2000;
    std::optional<std::size_t> margin_steps;  // unset: half an hour, rounded up
    std::size_t d_steps_per_g = 1;
    std::uint64_t seed = 1;
    std::size_t eval_every = 100;  // validation cadence
    std::size_t val_max = 256;     // validation samples used per evaluation
    int sn_iters = 1;              // power iterations per discriminator update

    std::size_t margin_for(int resolution) const { return margin_steps ? *margin_steps : (30 + resolution - 1) / resolution; }
    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct LossReport {
    double l_coarse = 0, l_content2 = 0, l_adv = 0, l_feat = 0, l_refine = 0, l_d = 0;
    bool all_finite() const;
    bool operator==(const LossReport&) const = default;
};

}  // namespace loadpin
