#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdsim/params.hpp"
#include "qdsim/pulse.hpp"

namespace qdsim::analysis {

struct FitResult {
    std::vector<std::string> names;
    Eigen::VectorXd values;
    Eigen::VectorXd ci95;  // half-widths
    double residual_norm = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<bool> identifiable;
    std::vector<std::string> notes;

    double value(const std::string& name) const;
    double ci(const std::string& name) const;
};

// ---- generic damped Gauss-Newton (Levenberg-Marquardt) ----

struct LmOptions {
    int max_iterations = 400;
    double ftol = 1e-14;
    double xtol = 1e-12;
    double lambda0 = 1e-3;
    int multistarts = 5;       // jittered restarts, deterministic
    double jitter = 0.25;      // relative jitter of starting points
    std::uint64_t seed = 17;
};

struct LmInternals {
    Eigen::VectorXd x;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    double ssr = 0.0;
    bool converged = false;
    int iterations = 0;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

LmInternals lm_minimize(const ResidualFn& fn, const Eigen::VectorXd& x0,
                        const LmOptions& opts = {});
// Best of multistart jittered runs.
LmInternals lm_minimize_multistart(const ResidualFn& fn, const Eigen::VectorXd& x0,
                                   const LmOptions& opts = {});

// ---- confidence intervals ----

// Linearized 95% CIs: 1.96 * sqrt(diag((J^T J)^-1) * s^2), s^2 = SSR/(n-p).
// Returns nullopt when J^T J is singular (caller falls back to bootstrap).
std::optional<Eigen::VectorXd> ci_linearized(const Eigen::MatrixXd& jacobian,
                                             const Eigen::VectorXd& residuals);

// Residual-resampling bootstrap CIs (percentile, >= 200 reps).
Eigen::VectorXd ci_bootstrap(
    const std::function<Eigen::VectorXd(std::span<const double> y)>& refit,
    std::span<const double> y_fit, std::span<const double> residuals,
    int replicates = 200, std::uint64_t seed = 1);

// ---- spectral estimation ----

struct FftPeak {
    bool found = false;
    double frequency = 0.0;   // 1/time-unit of dt
    double uncertainty = 0.0; // one bin width
};

// Dominant nonzero-frequency bin of the mean-subtracted magnitude spectrum,
// refined by quadratic interpolation of the 3-bin neighborhood.
FftPeak fft_peak(std::span<const double> series, double dt);

// ---- model fits ----

// P_T(nu) = A * (1 - exp(-4 pi^2 f^2 / nu)) + B.  nu in Hz/s, f in Hz.
FitResult fit_lz(std::span<const double> nu_hz_s, std::span<const double> p_t,
                 const LmOptions& opts = {});

struct GapModelResult {
    FitResult fit;                  // parameters tc0 (GHz), tc_decay (ueV), dg
    double residual_ratio_const = 0.0;  // SSR(constant t_c) / SSR(decaying t_c)
    FitResult fit_const;            // constant-t_c alternative
};

// Nonlinear least squares of |E_SH - E_T0|(eps; tc0, tc_decay, dg) built from
// the five-level eigen-gaps. `prior` supplies fixed g-mean, field and starting
// values; identifiability is flagged when a CI spans the prior scale.
GapModelResult fit_gap_model(std::span<const double> eps_uev,
                             std::span<const double> gap_ghz,
                             const DeviceParams& prior,
                             const LmOptions& opts = {});

// A cos(2 pi f tau + phi) exp(-(tau/T)^p) + C with p in {1,2} chosen by
// residual. Reports F_pi = (1 + envelope(tau_pi)) / 2 at tau_pi = 1/(2f),
// the first-fringe amplitude convention.
struct DecayResult {
    FitResult fit;  // f (GHz if tau in ns), rate=1/T, phi, A, C
    int envelope_power = 2;
    bool frequency_found = true;
    double f_pi = 1.0;
    bool decay_resolved = true;  // false: pure cosine, T effectively infinite
};
DecayResult fit_decay(std::span<const double> tau_ns, std::span<const double> p_t,
                      const LmOptions& opts = {});

// Stueckelberg phase: integral of 2 pi * gap(eps(t)) dt between the two S/T-
// crossing passages of the schedule (over the whole schedule when fewer than
// two passages exist). Fringe extrema of an LZS map sit at
// phase + phase_stokes = 0 (mod 2 pi); the Stokes correction is an additive
// constant treated as a fit parameter by callers.
double stueckelberg_phase(const DeviceParams& params, const PulseSchedule& schedule);

}  // namespace qdsim::analysis
