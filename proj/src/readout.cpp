#include "qdsim/readout.hpp"

#include <algorithm>
#include <cmath>

#include "qdsim/errors.hpp"

namespace qdsim::readout {

namespace {

double gauss_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void mode_means(const SensorParams& s, Mode mode, double& mu_s, double& mu_t) {
    if (mode == Mode::standard) {
        mu_s = s.mu_singlet_standard;
        mu_t = s.mu_triplet_standard;
    } else {
        mu_s = s.mu_singlet_latched;
        mu_t = s.mu_triplet_latched;
    }
}

}  // namespace

double sample_current(Outcome outcome, Mode mode, const SensorParams& sensor,
                      Rng& rng) {
    sensor.validate();
    double mu_s, mu_t;
    mode_means(sensor, mode, mu_s, mu_t);

    Outcome effective = outcome;
    if (effective == Outcome::singlet && sensor.prep_error > 0 &&
        rng.uniform() < sensor.prep_error)
        effective = Outcome::triplet;
    if (effective == Outcome::triplet && mode == Mode::latched &&
        rng.uniform() >= sensor.latch_success)
        effective = Outcome::singlet;  // latch failure

    const double mu = (effective == Outcome::singlet) ? mu_s : mu_t;
    return mu + sensor.sigma_current * rng.normal();
}

Histogram histogram(std::span<const double> values, int n_bins) {
    if (values.empty()) throw ModelError("histogram: empty input");
    if (n_bins < 2) throw ModelError("histogram: need at least 2 bins");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn, hi = *mx;
    if (hi == lo) hi = lo + 1.0;  // constant input: single occupied bin
    Histogram h;
    h.bin_width = (hi - lo) / n_bins;
    h.counts.assign(n_bins, 0);
    h.bin_centers.resize(n_bins);
    for (int i = 0; i < n_bins; ++i)
        h.bin_centers[i] = lo + (i + 0.5) * h.bin_width;
    for (double v : values) {
        int k = int((v - lo) / h.bin_width);
        k = std::clamp(k, 0, n_bins - 1);
        ++h.counts[k];
    }
    return h;
}

ThresholdResult optimal_threshold(const SensorParams& sensor, Mode mode) {
    sensor.validate();
    double mu_s, mu_t;
    mode_means(sensor, mode, mu_s, mu_t);
    ThresholdResult out;
    if (mu_s == mu_t) {
        out.threshold = mu_s;
        out.f_m = 0.5;
        out.warnings.push_back(
            "outcome distributions are identical; classification is random");
        return out;
    }
    // Equal sigmas: the midpoint minimizes the mean error.
    out.threshold = 0.5 * (mu_s + mu_t);
    const double d = std::abs(mu_t - mu_s) / sensor.sigma_current;
    const double err = gauss_cdf(-0.5 * d);
    out.fidelity_singlet = 1.0 - err;
    out.fidelity_triplet = 1.0 - err;
    out.f_m = 1.0 - err;
    return out;
}

VisibilityResult visibility(std::span<const ShotRecord> shots) {
    int n_s = 0, n_t = 0, fs = 0, ft = 0;
    for (const ShotRecord& r : shots) {
        if (r.truth == Outcome::singlet) {
            ++n_s;
            if (r.classified == Outcome::triplet) ++ft;
        } else {
            ++n_t;
            if (r.classified == Outcome::singlet) ++fs;
        }
    }
    if (n_s == 0 || n_t == 0)
        throw ModelError("visibility: both outcomes must be represented");
    VisibilityResult v;
    v.false_singlet_rate = double(fs) / n_t;
    v.false_triplet_rate = double(ft) / n_s;
    v.visibility = 1.0 - v.false_singlet_rate - v.false_triplet_rate;
    return v;
}

std::vector<ShotRecord> simulate_shots(const SensorParams& sensor, Mode mode,
                                       int n, double p_triplet,
                                       std::uint64_t seed) {
    const ThresholdResult th = optimal_threshold(sensor, mode);
    const bool triplet_high =
        (mode == Mode::standard ? sensor.mu_triplet_standard >
                                      sensor.mu_singlet_standard
                                : sensor.mu_triplet_latched >
                                      sensor.mu_singlet_latched);
    std::vector<ShotRecord> shots(n);
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, std::uint64_t(i), 0x4ead));
        ShotRecord& r = shots[i];
        r.truth = rng.uniform() < p_triplet ? Outcome::triplet : Outcome::singlet;
        r.current = sample_current(r.truth, mode, sensor, rng);
        const bool above = r.current > th.threshold;
        r.classified = (above == triplet_high) ? Outcome::triplet : Outcome::singlet;
    }
    return shots;
}

}  // namespace qdsim::readout
