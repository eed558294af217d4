#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdsim/params.hpp"
#include "qdsim/rng.hpp"

namespace qdsim::readout {

enum class Outcome { singlet, triplet };
enum class Mode { standard, latched };

// Sensor-current draw for one shot. A latched triplet falls back to the
// singlet distribution with probability (1 - latch_success); a nominal
// singlet behaves as a triplet with probability prep_error.
double sample_current(Outcome outcome, Mode mode, const SensorParams& sensor,
                      Rng& rng);

struct Histogram {
    std::vector<double> bin_centers;
    std::vector<int> counts;
    double bin_width = 0.0;
};

// Equal-width binning over [min, max]; counts sum to the input size.
Histogram histogram(std::span<const double> values, int n_bins);

struct ThresholdResult {
    double threshold = 0.0;      // pA
    double fidelity_singlet = 0.5;
    double fidelity_triplet = 0.5;
    double f_m = 0.5;            // 1 - mean misclassification
    std::vector<std::string> warnings;
};

// Threshold minimizing the mean misclassification of the two Gaussian
// outcome distributions (midpoint for equal sigma).
ThresholdResult optimal_threshold(const SensorParams& sensor, Mode mode);

struct ShotRecord {
    Outcome truth = Outcome::singlet;
    double current = 0.0;
    Outcome classified = Outcome::singlet;
};

struct VisibilityResult {
    double visibility = 0.0;
    double false_singlet_rate = 0.0;  // triplets read as singlet
    double false_triplet_rate = 0.0;  // singlets read as triplet
};

// visibility = 1 - (false-singlet rate + false-triplet rate).
VisibilityResult visibility(std::span<const ShotRecord> shots);

// Draws n shots with the given true-triplet probability, classifies them at
// the optimal threshold and returns the records.
std::vector<ShotRecord> simulate_shots(const SensorParams& sensor, Mode mode,
                                       int n, double p_triplet,
                                       std::uint64_t seed);

}  // namespace qdsim::readout
