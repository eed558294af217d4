#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qdsim/pulse.hpp"

namespace qdsim {

// Per-segment integration grid. `grid_steps` follows the phase rule
// (2*pi*f_max*dt <= max_phase_per_step, f_max = half the eigenvalue spread;
// lab-frame drives additionally resolve >= 20 steps per carrier cycle).
// Segments whose Hamiltonian is constant in time (dwells, rotating-frame
// drives) are propagated by a single exact exponential, so their `work_steps`
// is 1; the exponential of a constant H over the full duration equals the
// composition of the per-step exponentials exactly. The step budget applies
// to work steps.
struct SegmentGrid {
    double dt = 0.0;  // ns
    std::uint64_t grid_steps = 1;
    std::uint64_t work_steps = 1;
    bool constant_h = true;
    double f_max = 0.0;  // GHz
};

struct CompiledGrid {
    std::vector<SegmentGrid> segments;
    std::uint64_t total_grid_steps = 0;
    std::uint64_t total_work_steps = 0;
};

CompiledGrid compile(const PulseSchedule& schedule, const DeviceParams& params,
                     const EvolveOptions& opts);

struct TrajectoryPoint {
    double t_ns = 0.0;
    Vector5cd amplitudes;
};

struct EvolveResult {
    StateVector final_state;
    std::vector<TrajectoryPoint> trajectory;
    double norm_drift = 0.0;  // accumulated |1 - norm| before renormalization
    std::uint64_t steps = 0;
    std::vector<std::string> warnings;
};

// Piecewise midpoint-exponential propagation of the five-level model through
// the schedule. Deterministic; norm tracked and renormalized every step with
// the accumulated drift reported (drift > 1e-6 is an integration failure).
EvolveResult evolve(const PulseSchedule& schedule, const DeviceParams& params,
                    const EvolveOptions& opts = {});

// Full 5x5 propagator of a segment span (used by experiments to cache the
// shared parts of a protocol). Same stepping rules as evolve.
Matrix5cd propagate_unitary(std::span<const Segment> segments,
                            const DeviceParams& params,
                            const EvolveOptions& opts = {});

// Exact propagator exp(-i 2 pi h tau) of a constant Hamiltonian (GHz, ns),
// computed by eigendecomposition.
Matrix5cd exact_propagator(const Matrix5cd& h_ghz, double tau_ns);

// Five-level Hamiltonian during an ESR drive segment at segment-local time t.
// Rotating frame: diagonal shifted by -f * Sz and static RWA couplings
// (time-independent). Lab frame: bare H plus transverse couplings modulated
// by cos(2 pi f t + phase).
Hamiltonian esr_hamiltonian(const DeviceParams& params, const Segment& seg,
                            double t_ns, EvolveOptions::Frame frame);

// Energy level velocity of a ramp: |d(E_a - E_b)/dt| at the point where the
// uncoupled (diabatic) levels cross, by finite difference with step
// duration/1e4, in Hz/s. If the crossing is not bracketed by the ramp the
// slope at the point of minimum gap is reported.
double level_velocity(const DeviceParams& params, const Segment& ramp,
                      GapKind which);

struct PrepOptions {
    double eps_start = -300.0;           // ueV, initialization point
    double diabatic_leak_target = 1e-3;  // sets the rate through the S/T- crossing
    int adiabatic_subsegments = 16;
};

struct PrepResult {
    StateVector state;
    std::vector<Segment> schedule;       // ramp actually used
    double crossing_leak_estimate = 0.0; // LZ estimate at the Delta crossing
    double adiabatic_estimate = 0.0;     // max |<m|dH/dt|n>|/gap^2 along the ramp
    std::vector<std::string> warnings;
};

// Ramp-in from a (0,2)S ground state to eps_target over ramp_ns: diabatic
// with respect to Delta through the S/T- crossing, adiabatic with respect to
// t_c elsewhere. ramp_ns == 0 returns the initial state unchanged.
PrepResult adiabatic_prepare(const DeviceParams& params, double eps_target,
                             double ramp_ns, const PrepOptions& popts = {},
                             const EvolveOptions& opts = {});

}  // namespace qdsim
