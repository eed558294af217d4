#include "qdsim/noise.hpp"

#include "qdsim/errors.hpp"
#include "qdsim/rng.hpp"

namespace qdsim::noise {

NoiseSample sample(const DeviceParams& params, std::uint64_t master_seed,
                   std::uint64_t shot_index) {
    params.validate();
    Rng rng(mix_seed(master_seed, shot_index, 0x5a3e));
    NoiseSample s;
    s.master_seed = master_seed;
    s.shot_index = shot_index;
    s.d_eps = params.sigma_eps > 0 ? params.sigma_eps * rng.normal() : 0.0;
    s.d_delta = params.sigma_delta > 0 ? params.sigma_delta * rng.normal() : 0.0;
    return s;
}

DeviceParams perturbed(const DeviceParams& params, const NoiseSample& s) {
    DeviceParams p = params;
    p.eps_offset += s.d_eps;
    p.delta_offset += s.d_delta * 1e-3;  // kHz -> MHz
    return p;
}

std::vector<double> shot_average(
    const std::function<std::vector<double>(const DeviceParams&)>& experiment,
    const DeviceParams& params, int n_shots, std::uint64_t master_seed) {
    if (n_shots < 1) throw ModelError("shot_average: n_shots must be >= 1");
    std::vector<double> acc;
    for (int shot = 0; shot < n_shots; ++shot) {
        const NoiseSample ns = sample(params, master_seed, std::uint64_t(shot));
        const std::vector<double> probs = experiment(perturbed(params, ns));
        if (acc.empty()) acc.assign(probs.size(), 0.0);
        if (probs.size() != acc.size())
            throw ModelError("shot_average: experiment output size changed");
        for (size_t cell = 0; cell < probs.size(); ++cell) {
            Rng rng(mix_seed(master_seed, std::uint64_t(shot), cell));
            acc[cell] += (rng.uniform() < probs[cell]) ? 1.0 : 0.0;
        }
    }
    for (double& v : acc) v /= double(n_shots);
    return acc;
}

}  // namespace qdsim::noise
