#pragma once

#include <string>
#include <vector>

#include "qdsim/evolve.hpp"
#include "qdsim/model.hpp"
#include "qdsim/pulse.hpp"

namespace qdsim::experiments {

struct Axis {
    std::string name;
    std::string units;
    std::vector<double> grid;
};

// Rectangular map of triplet (blockade) probabilities over two swept axes.
struct PTMap {
    Axis axis1, axis2;
    std::vector<double> values;  // row-major, axis1 index major
    int shots = 0;               // 0: deterministic probabilities
    std::string params_snapshot;
    std::vector<std::string> warnings;

    double at(size_t i, size_t j) const { return values[i * axis2.grid.size() + j]; }
};

struct Curve {
    std::string x_name, x_units, y_name;
    std::vector<double> x, y;
    std::vector<std::string> warnings;
};

// ---- protocol sweeps ----

struct FunnelOptions {
    double readout_eps = -250.0;  // ueV
    double rate = 80.0;           // ueV/ns, plunge rate (diabatic w.r.t. Delta)
    double max_phase_per_step = 0.05;
};

// Triplet probability vs (eps, B0z): prepare (0,2)S, plunge in, dwell, plunge
// out, classify blockade. The ridge traces the S_H/T- degeneracy.
PTMap spin_funnel(const DeviceParams& params, const std::vector<double>& eps_grid,
                  const std::vector<double>& b_grid_mt, double dwell_ns,
                  const FunnelOptions& opts = {});

struct LzSingleOptions {
    double window = 25.0;  // half-window in units of max(sqrt(nu), 4 Delta)
    double max_phase_per_step = 0.05;
    std::uint64_t step_budget = 100'000'000;
};

// Single-passage Landau-Zener curve: P_T vs level velocity (Hz/s). Ramp-out
// is diabatic (projective in the diabatic basis after the passage).
Curve lz_single_passage(const DeviceParams& params,
                        const std::vector<double>& velocity_grid_hz_s,
                        double b0z_mt, const LzSingleOptions& opts = {});

struct LzsOptions {
    double bs_window = 3.0;     // beamsplitter half-window scale
    double ladder_rate = 100.0; // ueV/ns beyond the crossing
    double max_phase_per_step = 0.05;
};

// Landau-Zener-Stueckelberg interference: semi-diabatic double passage with
// dwell (eps, tau). Fringes in tau at |E_SH - E_T-|(eps)/h.
PTMap lzs_map(const DeviceParams& params, const std::vector<double>& eps_grid,
              const std::vector<double>& tau_grid, const LzsOptions& opts = {});

struct ExchangeOptions {
    double prep_eps = 0.0;      // 0 => max(eps_grid) + 30 ueV
    double prep_ramp_ns = 300.0;
    double readout_eps = -300.0;  // also the preparation start point
    double plunge_rate = 100.0;   // ueV/ns
    double max_phase_per_step = 0.05;
};

// Coherent exchange oscillations: prepare |down,up>, diabatic plunge to eps,
// dwell tau, reverse, semi-adiabatic map-out. Column frequency equals
// |E_SH - E_T0|(eps)/h.
PTMap exchange_map(const DeviceParams& params, const std::vector<double>& eps_grid,
                   const std::vector<double>& tau_grid, double b0z_mt = 200.0,
                   const ExchangeOptions& opts = {});

struct ExchangeTraceOptions {
    bool ideal = true;  // pure (1,1) |down,up> init and projective readout
    ExchangeOptions protocol;  // used when ideal == false
};

// Single-detuning exchange fringe P_T(tau); the ideal mode isolates the dwell
// physics (sudden plunge, projective |down,up| readout) for noise studies.
Curve exchange_trace(const DeviceParams& params, double eps_uev,
                     const std::vector<double>& tau_grid, double b0z_mt = 200.0,
                     const ExchangeTraceOptions& opts = {});

struct EsrOptions {
    double readout_eps = -250.0;
    double mapout_rate = 20.0;  // ueV/ns
    double max_phase_per_step = 0.05;
};

// ESR spectroscopy: ground-state init at eps, microwave drive (RWA), map
// back, classify. Two resonance branches split by dEz at large eps, bending
// by J(eps) at low eps.
PTMap esr_map(const DeviceParams& params, const std::vector<double>& eps_grid,
              const std::vector<double>& freq_grid_ghz, const Segment& pulse,
              const EsrOptions& opts = {});

// Exact eigen-gap per eps: the theory line experiments are compared against.
Curve gap_curve(const DeviceParams& params, const std::vector<double>& eps_grid,
                GapKind which);

// Ridge location of a funnel map: for each eps row, the B > b_center maximum
// (used for the asymmetry analysis).
std::vector<double> funnel_ridge_b(const PTMap& map);

// Inclusive range helper: count points from start to stop.
std::vector<double> linspace(double start, double stop, int count);

}  // namespace qdsim::experiments
