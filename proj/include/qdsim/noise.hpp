#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qdsim/params.hpp"

namespace qdsim::noise {

// One quasi-static noise draw: constant within a shot, independent across
// shots. Reproducible from (master seed, shot index) alone.
struct NoiseSample {
    double d_eps = 0.0;    // ueV
    double d_delta = 0.0;  // kHz
    std::uint64_t master_seed = 0;
    std::uint64_t shot_index = 0;
};

NoiseSample sample(const DeviceParams& params, std::uint64_t master_seed,
                   std::uint64_t shot_index);

// Params with the shot's quasi-static offsets applied.
DeviceParams perturbed(const DeviceParams& params, const NoiseSample& s);

// Shot-averaged experiment execution: each shot perturbs (eps, delta), runs
// the experiment, draws the binary blockade outcome per cell and averages.
// `experiment` maps perturbed params to the per-cell triplet probabilities.
std::vector<double> shot_average(
    const std::function<std::vector<double>(const DeviceParams&)>& experiment,
    const DeviceParams& params, int n_shots, std::uint64_t master_seed);

}  // namespace qdsim::noise
