#include "qdsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "qdsim/errors.hpp"
#include "qdsim/io.hpp"

namespace qdsim::experiments {

std::vector<double> linspace(double start, double stop, int count) {
    if (count < 1) throw ModelError("linspace: count must be >= 1");
    std::vector<double> v(count);
    if (count == 1) {
        v[0] = start;
        return v;
    }
    for (int i = 0; i < count; ++i)
        v[i] = start + (stop - start) * double(i) / double(count - 1);
    v.back() = stop;
    return v;
}

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

int thread_count() {
    const char* env = std::getenv("QDSIM_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return std::clamp(n, 1, 64);
}

// Deterministic parallel map: workers own disjoint index slices.
void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    const int nt = std::min<size_t>(thread_count(), n);
    if (nt <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

void check_monotone(const std::vector<double>& g, const char* name) {
    if (g.empty()) throw ModelError(std::string(name) + ": grid is empty");
    for (size_t i = 1; i < g.size(); ++i)
        if (!(g[i] > g[i - 1]))
            throw ModelError(std::string(name) + ": grid must be strictly increasing");
}

// Eigenstate at the readout point that carries the hybridized-singlet
// lineage; everything orthogonal to it reads out as blockaded.
Vector5cd readout_singlet_state(const DeviceParams& p, double readout_eps) {
    const EigenSystem es = eigensystem5(h5_matrix(p, readout_eps));
    const Vector5cd ref = m0_ground_state(p, readout_eps);
    int best = 0;
    double bmax = -1;
    for (int c = 0; c < 5; ++c) {
        const double ov = std::norm(ref.dot(es.vectors.col(c)));
        if (ov > bmax) {
            bmax = ov;
            best = c;
        }
    }
    return es.vectors.col(best);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Incremental unitaries along a detuning ladder: u_away[k] propagates from
// the anchor to points[k], u_back[k] the reverse, both at the given ramp
// rate. points must be ordered monotonically away from the anchor.
struct Ladder {
    std::vector<Matrix5cd> u_away, u_back;
};

Ladder build_ladder(const DeviceParams& p, double anchor,
                    const std::vector<double>& points, double rate_uev_ns,
                    const EvolveOptions& opts) {
    Ladder lad;
    lad.u_away.reserve(points.size());
    lad.u_back.reserve(points.size());
    Matrix5cd away = Matrix5cd::Identity();
    Matrix5cd back = Matrix5cd::Identity();
    double prev = anchor;
    for (const double e : points) {
        const double de = std::abs(e - prev);
        if (de > 1e-12) {
            const double dur = de / rate_uev_ns;
            const Segment up = Segment::ramp(prev, e, dur);
            const Segment dn = Segment::ramp(e, prev, dur);
            away = propagate_unitary(std::span(&up, 1), p, opts) * away;
            back = back * propagate_unitary(std::span(&dn, 1), p, opts);
        }
        lad.u_away.push_back(away);
        lad.u_back.push_back(back);
        prev = e;
    }
    return lad;
}

void add_bound_warning(const DeviceParams& p, double eps_max,
                       std::vector<std::string>& warnings) {
    const double bound = p.eps_validity_bound_uev();
    if (std::abs(eps_max) > bound)
        warnings.push_back("protocol reaches |eps| = " + std::to_string(eps_max) +
                           " ueV beyond the (0,2) validity bound " +
                           std::to_string(bound) + " ueV");
}

double j_slope(const DeviceParams& p, double eps) {  // GHz per ueV
    const double de = 0.25;
    return std::abs(exchange_j(p, eps + de) - exchange_j(p, eps - de)) / (2 * de);
}

}  // namespace

PTMap spin_funnel(const DeviceParams& params, const std::vector<double>& eps_grid,
                  const std::vector<double>& b_grid_mt, double dwell_ns,
                  const FunnelOptions& opts) {
    params.validate();
    check_monotone(eps_grid, "spin_funnel eps");
    check_monotone(b_grid_mt, "spin_funnel b0z");
    if (!(dwell_ns > 0)) throw ModelError("spin_funnel: dwell must be > 0");

    PTMap map;
    map.axis1 = {"eps", "ueV", eps_grid};
    map.axis2 = {"b0z", "mT", b_grid_mt};
    map.values.assign(eps_grid.size() * b_grid_mt.size(), 0.0);
    map.params_snapshot = io::serialize_device_config(params);
    add_bound_warning(params, std::max(std::abs(eps_grid.back()),
                                       std::abs(opts.readout_eps)),
                      map.warnings);

    double readout = opts.readout_eps;
    const double anchor = eps_grid.front();
    if (readout >= anchor - 10.0) {
        readout = anchor - 50.0;
        map.warnings.push_back("readout_eps moved to " + std::to_string(readout) +
                               " ueV below the eps grid");
    }

    EvolveOptions eopts;
    eopts.max_phase_per_step = opts.max_phase_per_step;

    parallel_for(b_grid_mt.size(), [&](size_t j) {
        DeviceParams pb = params;
        pb.b0z = b_grid_mt[j];

        const double d_in = (anchor - readout) / opts.rate;
        const Segment approach = Segment::ramp(readout, anchor, d_in);
        const Segment retreat = Segment::ramp(anchor, readout, d_in);

        PulseSchedule pre;
        pre.segments = {approach};
        pre.initial_state = PulseSchedule::Init::custom;
        pre.custom_amplitudes = m0_ground_state(pb, readout);
        const Vector5cd psi_pre = evolve(pre, pb, eopts).final_state.amplitudes;
        const Matrix5cd u_ret = propagate_unitary(std::span(&retreat, 1), pb, eopts);
        const Ladder lad = build_ladder(pb, anchor, eps_grid, opts.rate, eopts);
        const Vector5cd sh = readout_singlet_state(pb, readout);

        for (size_t i = 0; i < eps_grid.size(); ++i) {
            const Matrix5cd u_dwell =
                exact_propagator(h5_matrix(pb, eps_grid[i]), dwell_ns);
            const Vector5cd psi =
                u_ret * (lad.u_back[i] * (u_dwell * (lad.u_away[i] * psi_pre)));
            map.values[i * b_grid_mt.size() + j] =
                clamp01(1.0 - std::norm(sh.dot(psi)));
        }
    });
    return map;
}

namespace {

// Detuning at which the diabatic S/T- gap equals g (signed; J monotone).
double eps_of_gap(const DeviceParams& p, double estar, double g) {
    const double ez = std::abs(p.zeeman_mean());
    const double target = ez - g;  // J at the wanted point
    double lo = estar, hi = estar;
    const double span0 = 1.0;
    double span = span0;
    if (g >= 0) {  // beyond the crossing: J smaller, eps larger
        while (exchange_j(p, estar + span) > target && span < 1e6) span *= 2;
        lo = estar;
        hi = estar + span;
    } else {
        while (exchange_j(p, estar - span) < target && span < 1e6) span *= 2;
        lo = estar - span;
        hi = estar;
    }
    for (int i = 0; i < 120; ++i) {
        const double mid = 0.5 * (lo + hi);
        (exchange_j(p, mid) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

Curve lz_single_passage(const DeviceParams& params,
                        const std::vector<double>& velocity_grid_hz_s,
                        double b0z_mt, const LzSingleOptions& opts) {
    DeviceParams p = params;
    p.b0z = b0z_mt;
    p.validate();
    if (velocity_grid_hz_s.empty())
        throw ModelError("lz_single_passage: velocity grid is empty");
    for (double v : velocity_grid_hz_s)
        if (!(v > 0)) throw ModelError("lz_single_passage: velocities must be > 0");

    const auto crossing = st_crossing_eps(p);
    if (!crossing)
        throw ModelError("lz_single_passage: no S/T- crossing for these parameters");
    const double estar = *crossing;
    const double dstar = delta_theta(p, estar) * 1e-3;  // GHz
    const double ez = std::abs(p.zeeman_mean());

    Curve out;
    out.x_name = "velocity";
    out.x_units = "Hz/s";
    out.y_name = "p_t";
    out.x = velocity_grid_hz_s;
    out.y.assign(velocity_grid_hz_s.size(),
                 std::numeric_limits<double>::quiet_NaN());

    EvolveOptions eopts;
    eopts.max_phase_per_step = opts.max_phase_per_step;
    eopts.step_budget = opts.step_budget;

    parallel_for(velocity_grid_hz_s.size(), [&](size_t k) {
        const double nu_g = velocity_grid_hz_s[k] * 1e-18;  // GHz/ns

        double w_gap = opts.window * std::max(std::sqrt(nu_g), dstar);
        bool clamped = false;
        if (w_gap > 0.8 * ez) {
            w_gap = 0.8 * ez;
            clamped = true;
        }

        // The ramp is built piecewise so the *gap* moves at the requested
        // level velocity (linear in time through the crossing), with a smooth
        // velocity taper over the outer 30% of the window to suppress
        // finite-window oscillations of the Landau-Zener probability.
        const int nseg = 64;
        std::vector<Segment> segs;
        segs.reserve(nseg);
        double prev_eps = eps_of_gap(p, estar, -w_gap);
        double prev_g = -w_gap;
        for (int s = 1; s <= nseg; ++s) {
            const double g = -w_gap + 2.0 * w_gap * double(s) / nseg;
            const double eps = (s == nseg) ? eps_of_gap(p, estar, w_gap)
                                           : eps_of_gap(p, estar, g);
            const double gm = 0.5 * (prev_g + g);
            const double edge = std::abs(gm) / w_gap;  // 0 center .. 1 edge
            double speed = 1.0;
            if (edge > 0.7) {
                const double u = (edge - 0.7) / 0.3;
                speed = 0.25 + 0.75 * 0.5 * (1.0 + std::cos(M_PI * u));
            }
            const double dur = (g - prev_g) / (nu_g * speed);
            segs.push_back(Segment::ramp(prev_eps, eps, dur));
            prev_eps = eps;
            prev_g = g;
        }

        PulseSchedule sch;
        sch.segments = segs;
        sch.initial_state = PulseSchedule::Init::custom;
        // dressed singlet-branch eigenstates at both window edges: entering
        // and leaving along the adiabatic continuation of S_H, as the full
        // protocol ramps would do
        sch.custom_amplitudes = readout_singlet_state(p, segs.front().eps_start);
        try {
            const Vector5cd psi = evolve(sch, p, eopts).final_state.amplitudes;
            const Vector5cd sh = readout_singlet_state(p, segs.back().eps_end);
            out.y[k] = clamp01(1.0 - std::norm(sh.dot(psi)));
            if (clamped)
                out.warnings.push_back(
                    "velocity " + std::to_string(velocity_grid_hz_s[k]) +
                    ": window clamped by Zeeman isolation");
        } catch (const NumericError& e) {
            out.warnings.push_back("velocity " +
                                   std::to_string(velocity_grid_hz_s[k]) +
                                   " skipped: " + e.what());
        }
    });
    return out;
}

PTMap lzs_map(const DeviceParams& params, const std::vector<double>& eps_grid,
              const std::vector<double>& tau_grid, const LzsOptions& opts) {
    params.validate();
    check_monotone(eps_grid, "lzs_map eps");
    check_monotone(tau_grid, "lzs_map tau");

    const auto crossing = st_crossing_eps(params);
    if (!crossing) throw ModelError("lzs_map: no S/T- crossing for these parameters");
    const double estar = *crossing;
    const double dstar = delta_theta(params, estar) * 1e-3;  // GHz
    if (!(dstar > 0)) throw ModelError("lzs_map: delta11 must be > 0");

    PTMap map;
    map.axis1 = {"eps", "ueV", eps_grid};
    map.axis2 = {"tau", "ns", tau_grid};
    map.values.assign(eps_grid.size() * tau_grid.size(), 0.0);
    map.params_snapshot = io::serialize_device_config(params);
    add_bound_warning(params, eps_grid.back(), map.warnings);

    // Beamsplitter passage: velocity giving a 50/50 Landau-Zener split.
    const double nu50 = 4.0 * M_PI * M_PI * dstar * dstar / std::log(2.0);
    const double ez = std::abs(params.zeeman_mean());
    double w_gap = opts.bs_window * std::max(2.0 * dstar, std::sqrt(nu50));
    if (w_gap > 0.6 * ez) {
        w_gap = 0.6 * ez;
        map.warnings.push_back("beamsplitter window clamped by Zeeman isolation");
    }
    const double slope = j_slope(params, estar);
    const double w_eps = w_gap / slope;
    const double eps_bs0 = estar - w_eps, eps_bs1 = estar + w_eps;
    if (eps_grid.front() <= eps_bs1)
        throw ModelError("lzs_map: eps grid must lie beyond the S/T- crossing window");
    const double bs_dur = 2.0 * w_gap / nu50;

    EvolveOptions eopts;
    eopts.max_phase_per_step = opts.max_phase_per_step;

    const Segment bs_in = Segment::ramp(eps_bs0, eps_bs1, bs_dur);
    const Segment bs_out = Segment::ramp(eps_bs1, eps_bs0, bs_dur);
    const Matrix5cd u_in = propagate_unitary(std::span(&bs_in, 1), params, eopts);
    const Matrix5cd u_out = propagate_unitary(std::span(&bs_out, 1), params, eopts);
    const Vector5cd psi0 = m0_ground_state(params, eps_bs0);
    const Ladder lad =
        build_ladder(params, eps_bs1, eps_grid, opts.ladder_rate, eopts);

    const Vector5cd psi_split = u_in * psi0;

    parallel_for(eps_grid.size(), [&](size_t i) {
        const EigenSystem es = eigensystem5(h5_matrix(params, eps_grid[i]));
        const Vector5cd b = es.vectors.adjoint() * (lad.u_away[i] * psi_split);
        const Eigen::RowVector<std::complex<double>, 5> c =
            (psi0.adjoint() * (u_out * lad.u_back[i])) * es.vectors;
        for (size_t j = 0; j < tau_grid.size(); ++j) {
            std::complex<double> amp = 0;
            for (int k = 0; k < 5; ++k)
                amp += c(k) * b(k) *
                       std::exp(std::complex<double>(
                           0.0, -kTwoPi * es.values(k) * tau_grid[j]));
            map.values[i * tau_grid.size() + j] = clamp01(1.0 - std::norm(amp));
        }
    });
    return map;
}

PTMap exchange_map(const DeviceParams& params, const std::vector<double>& eps_grid,
                   const std::vector<double>& tau_grid, double b0z_mt,
                   const ExchangeOptions& opts) {
    DeviceParams p = params;
    p.b0z = b0z_mt;
    p.validate();
    check_monotone(eps_grid, "exchange_map eps");
    check_monotone(tau_grid, "exchange_map tau");

    PTMap map;
    map.axis1 = {"eps", "ueV", eps_grid};
    map.axis2 = {"tau", "ns", tau_grid};
    map.values.assign(eps_grid.size() * tau_grid.size(), 0.0);
    map.params_snapshot = io::serialize_device_config(p);

    const double prep_eps =
        opts.prep_eps > 0 ? opts.prep_eps : eps_grid.back() + 30.0;
    add_bound_warning(p, prep_eps, map.warnings);

    EvolveOptions eopts;
    eopts.max_phase_per_step = opts.max_phase_per_step;
    PrepOptions popts;
    popts.eps_start = opts.readout_eps;

    const PrepResult prep =
        adiabatic_prepare(p, prep_eps, opts.prep_ramp_ns, popts, eopts);
    for (const auto& w : prep.warnings) map.warnings.push_back(w);
    const Vector5cd psi_prep = prep.state.amplitudes;

    // Map-out mirrors the preparation ramp.
    std::vector<Segment> mapout(prep.schedule.rbegin(), prep.schedule.rend());
    for (Segment& s : mapout) std::swap(s.eps_start, s.eps_end);
    const Matrix5cd u_mapout = propagate_unitary(mapout, p, eopts);
    const Vector5cd sh = readout_singlet_state(p, opts.readout_eps);
    const Eigen::RowVector<std::complex<double>, 5> sh_out =
        sh.adjoint() * u_mapout;

    // Ladder descends from the preparation point over the eps grid.
    std::vector<double> desc(eps_grid.rbegin(), eps_grid.rend());
    const Ladder lad = build_ladder(p, prep_eps, desc, opts.plunge_rate, eopts);

    parallel_for(eps_grid.size(), [&](size_t i) {
        const size_t k = eps_grid.size() - 1 - i;  // ladder index for eps_grid[i]
        const EigenSystem es = eigensystem5(h5_matrix(p, eps_grid[i]));
        const Vector5cd b = es.vectors.adjoint() * (lad.u_away[k] * psi_prep);
        const Eigen::RowVector<std::complex<double>, 5> c =
            (sh_out * lad.u_back[k]) * es.vectors;
        for (size_t j = 0; j < tau_grid.size(); ++j) {
            std::complex<double> amp = 0;
            for (int m = 0; m < 5; ++m)
                amp += c(m) * b(m) *
                       std::exp(std::complex<double>(
                           0.0, -kTwoPi * es.values(m) * tau_grid[j]));
            map.values[i * tau_grid.size() + j] = clamp01(1.0 - std::norm(amp));
        }
    });
    return map;
}

Curve exchange_trace(const DeviceParams& params, double eps_uev,
                     const std::vector<double>& tau_grid, double b0z_mt,
                     const ExchangeTraceOptions& opts) {
    DeviceParams p = params;
    p.b0z = b0z_mt;
    p.validate();
    check_monotone(tau_grid, "exchange_trace tau");

    Curve out;
    out.x_name = "tau";
    out.x_units = "ns";
    out.y_name = "p_t";
    out.x = tau_grid;
    out.y.assign(tau_grid.size(), 0.0);

    if (opts.ideal) {
        // Sudden-plunge limit: pure (1,1) |down,up> in, projective readout.
        Vector5cd psi0 = Vector5cd::Zero();
        psi0(kT0) = 1.0 / std::sqrt(2.0);
        psi0(kS11) = -1.0 / std::sqrt(2.0);
        const EigenSystem es = eigensystem5(h5_matrix(p, eps_uev));
        const Vector5cd b = es.vectors.adjoint() * psi0;
        for (size_t j = 0; j < tau_grid.size(); ++j) {
            std::complex<double> amp = 0;
            for (int m = 0; m < 5; ++m)
                amp += std::conj(b(m)) * b(m) *
                       std::exp(std::complex<double>(
                           0.0, -kTwoPi * es.values(m) * tau_grid[j]));
            out.y[j] = clamp01(1.0 - std::norm(amp));
        }
        return out;
    }
    const PTMap map =
        exchange_map(p, {eps_uev}, tau_grid, b0z_mt, opts.protocol);
    out.y.assign(map.values.begin(), map.values.end());
    out.warnings = map.warnings;
    return out;
}

PTMap esr_map(const DeviceParams& params, const std::vector<double>& eps_grid,
              const std::vector<double>& freq_grid_ghz, const Segment& pulse,
              const EsrOptions& opts) {
    params.validate();
    check_monotone(eps_grid, "esr_map eps");
    check_monotone(freq_grid_ghz, "esr_map freq");
    if (pulse.kind != Segment::Kind::drive)
        throw ModelError("esr_map: pulse segment must be a drive");

    PTMap map;
    map.axis1 = {"eps", "ueV", eps_grid};
    map.axis2 = {"f_esr", "GHz", freq_grid_ghz};
    map.values.assign(eps_grid.size() * freq_grid_ghz.size(), 0.0);
    map.params_snapshot = io::serialize_device_config(params);
    add_bound_warning(params, eps_grid.back(), map.warnings);

    EvolveOptions eopts;
    eopts.max_phase_per_step = opts.max_phase_per_step;

    // Shared map-out: ladder down to the lowest grid point, then a common
    // tail to the readout detuning.
    const double anchor = eps_grid.front();
    std::vector<double> asc(eps_grid.begin(), eps_grid.end());
    const Ladder lad = build_ladder(params, anchor, asc, opts.mapout_rate, eopts);
    const double tail_dur = (anchor - opts.readout_eps) / opts.mapout_rate;
    const Segment tail = Segment::ramp(anchor, opts.readout_eps, tail_dur);
    const Matrix5cd u_tail = propagate_unitary(std::span(&tail, 1), params, eopts);
    const Vector5cd sh = readout_singlet_state(params, opts.readout_eps);
    const Eigen::RowVector<std::complex<double>, 5> sh_tail =
        sh.adjoint() * u_tail;

    parallel_for(eps_grid.size(), [&](size_t i) {
        const Vector5cd psi0 = m0_ground_state(params, eps_grid[i]);
        const Eigen::RowVector<std::complex<double>, 5> row =
            sh_tail * lad.u_back[i];
        for (size_t j = 0; j < freq_grid_ghz.size(); ++j) {
            Segment seg = pulse;
            seg.eps_start = seg.eps_end = eps_grid[i];
            seg.drive_freq = freq_grid_ghz[j];
            const Matrix5cd h_rot =
                esr_hamiltonian(params, seg, 0.0, EvolveOptions::Frame::rotating)
                    .entries;
            Vector5cd psi = exact_propagator(h_rot, seg.duration) * psi0;
            const double cyc = std::remainder(seg.drive_freq * seg.duration, 1.0);
            const std::complex<double> ph =
                std::exp(std::complex<double>(0.0, -kTwoPi * cyc));
            psi(kTplus) *= ph;
            psi(kTminus) *= std::conj(ph);
            map.values[i * freq_grid_ghz.size() + j] =
                clamp01(1.0 - std::norm((row * psi)(0)));
        }
    });
    return map;
}

Curve gap_curve(const DeviceParams& params, const std::vector<double>& eps_grid,
                GapKind which) {
    params.validate();
    check_monotone(eps_grid, "gap_curve eps");
    Curve out;
    out.x_name = "eps";
    out.x_units = "ueV";
    out.y_name = which == GapKind::S_T0 ? "gap_st0_ghz" : "gap_stm_ghz";
    out.x = eps_grid;
    out.y.resize(eps_grid.size());
    for (size_t i = 0; i < eps_grid.size(); ++i)
        out.y[i] = eigen_gap(params, eps_grid[i], which);
    return out;
}

std::vector<double> funnel_ridge_b(const PTMap& map) {
    const size_t n1 = map.axis1.grid.size(), n2 = map.axis2.grid.size();
    std::vector<double> ridge(n1);
    for (size_t i = 0; i < n1; ++i) {
        size_t jmax = 0;
        for (size_t j = 1; j < n2; ++j)
            if (map.at(i, j) > map.at(i, jmax)) jmax = j;
        double b = map.axis2.grid[jmax];
        if (jmax > 0 && jmax + 1 < n2) {  // parabolic refinement
            const double a = map.at(i, jmax - 1), m = map.at(i, jmax),
                         c = map.at(i, jmax + 1);
            const double den = a - 2 * m + c;
            if (den < 0) {
                const double d = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
                b += d * (map.axis2.grid[jmax + 1] - map.axis2.grid[jmax]);
            }
        }
        ridge[i] = b;
    }
    return ridge;
}

}  // namespace qdsim::experiments
