#pragma once

#include <cstdint>
#include <stdexcept>

namespace trackforge {

// All tracker hyperparameters in one place. Defaults: memory gap 50,
// long-term capacity 8, selection threshold 0.1, propagation layers (3, 1).
struct TrackerConfig {
    int memory_gap = 50;        // G: frames between long-term memory writes
    int memory_capacity = 8;    // L: long-term entries, excluding the initial frame
    double tau = 0.1;           // refined-mask acceptance threshold
    int gpm_layers_16 = 3;      // propagation layers at 1/16 scale
    int gpm_layers_8 = 1;       // propagation layers at 1/8 scale
    int c_vis = 16;             // visual channel width
    int c_id = 8;               // identity channel width
    uint64_t seed = 7;

    void validate() const {
        if (memory_gap < 1) throw std::invalid_argument("config: G must be >= 1");
        if (memory_capacity < 1) throw std::invalid_argument("config: L must be >= 1");
        if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("config: tau must be in [0,1]");
        if (gpm_layers_16 < 0 || gpm_layers_8 < 0)
            throw std::invalid_argument("config: layer counts must be >= 0");
        if (c_vis < 1 || c_id < 1)
            throw std::invalid_argument("config: channel widths must be >= 1");
    }
};

}  // namespace trackforge
