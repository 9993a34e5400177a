#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sf/losses.hpp"

namespace sf {

// Run configuration, parsed from a flat `key = value` text file. Unknown
// keys and malformed values are rejected with the offending key named.
struct RunConfig {
    std::string stage = "scaffnet";  // scaffnet | fusionnet
    std::string dataset;
    std::string val_dataset;
    std::string scaffnet_checkpoint;   // stage 2 input
    std::string fusionnet_checkpoint;  // ablation input
    std::string resume_from;

    std::string preset = "tiny";  // tiny | paper | paper-scanline
    std::string spp_kernels;      // optional override, e.g. "5,7,9,11,13"
    bool use_spp = true;
    std::string head = "alpha-beta";  // alpha-beta | direct

    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::vector<int> lr_halve_epochs;
    int epochs = 3;
    int batch_size = 8;
    int crop_width = 0;   // 0 = full frame
    int crop_height = 0;

    LossWeights weights;
    long tp_start_step = -1;      // absolute step; -1 derives from the ratio
    double tp_start_ratio = 0.2;  // fraction of total steps before l_tp engages

    std::string pose_source = "ground-truth";  // ground-truth | learned
    bool freeze_scaffnet = true;
    bool hflip_augment = false;

    double d_min = 0.2;
    double d_max = 10.0;
    double eval_min = 0.2;
    double eval_max = 10.0;

    std::uint64_t seed = 42;
    int workers = 2;
    bool deterministic = false;
    int checkpoint_every = 1;  // epochs

    static RunConfig load(const std::string& path);
    static RunConfig parse(const std::string& text, const std::string& origin);
    std::string serialize() const;
    void validate() const;

    long resolve_tp_start(long total_steps) const {
        return tp_start_step >= 0 ? tp_start_step
                                  : static_cast<long>(tp_start_ratio * static_cast<double>(total_steps));
    }
};

std::vector<int> parse_int_list(const std::string& s, const std::string& key);

}  // namespace sf
