#pragma once

#include <cmath>
#include <limits>

#include "qdsim/constants.hpp"

namespace qdsim {

// Sensor model for the latched Pauli-spin-blockade readout. Current scales
// are arbitrary; only separation/sigma ratios are physically meaningful.
// Defaults are calibrated so standard/latched visibilities come out 70%/98%.
struct SensorParams {
    double mu_singlet_standard = 0.0;   // pA
    double mu_triplet_standard = 2.07;  // pA
    double mu_singlet_latched = 0.0;    // pA
    double mu_triplet_latched = 4.65;   // pA
    double sigma_current = 1.0;         // pA
    double latch_success = 1.0;         // probability a triplet latch survives
    double prep_error = 0.0;            // probability a nominal singlet acts as triplet

    void validate() const;
};

// All physical model parameters of the double-dot two-spin system.
struct DeviceParams {
    double tc0 = 1.864;  // GHz, tunnel coupling at eps=0
    double tc_decay = std::numeric_limits<double>::infinity();  // ueV; inf => constant t_c
    double delta11 = 0.0;  // MHz, S/T+- coupling magnitude in the (1,1) singlet channel
    double g1 = 2.0;
    double g2 = 2.0;
    double b0z = 0.0;      // mT, applied field
    double b_offset = 0.0; // mT, residual offset field
    double e_charging = 15.0;   // meV, charging energy (validity bound only)
    double valley_frac = 0.017; // (0,2) S-T splitting as fraction of e_charging
    double sigma_eps = 0.0;     // ueV, quasi-static detuning noise std
    double sigma_delta = 0.0;   // kHz, quasi-static fluctuation of delta11

    // Runtime offsets applied by the noise module (quasi-static, per shot).
    // Not part of the serialized config.
    double eps_offset = 0.0;    // ueV
    double delta_offset = 0.0;  // MHz

    SensorParams sensor;

    void validate() const;  // throws ModelError naming the offending field

    double b_total_mt() const { return b0z + b_offset; }

    // Mean Zeeman frequency (g1+g2)/2 * mu_B/h * B, GHz.
    double zeeman_mean() const {
        return 0.5 * (g1 + g2) * constants::mu_b_ghz_per_mt * b_total_mt();
    }

    // Zeeman difference (g2-g1) * mu_B/h * B, GHz.
    double zeeman_diff() const {
        return (g2 - g1) * constants::mu_b_ghz_per_mt * b_total_mt();
    }

    double delta11_ghz() const { return (delta11 + delta_offset) * 1e-3; }

    // |eps| beyond this bound leaves the five-level model's validity window
    // (the (0,2) triplet would come into play). Warn, never fail.
    double eps_validity_bound_uev() const {
        return e_charging * 1e3 * valley_frac;
    }
};

}  // namespace qdsim
