#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qdsim/analysis.hpp"
#include "qdsim/constants.hpp"
#include "qdsim/errors.hpp"
#include "qdsim/evolve.hpp"
#include "qdsim/experiments.hpp"
#include "qdsim/io.hpp"
#include "qdsim/noise.hpp"
#include "qdsim/readout.hpp"

namespace py = pybind11;
using namespace qdsim;

PYBIND11_MODULE(_qdsim, m) {
    m.doc() = "Two-electron spin dynamics in a tunnel-coupled silicon double "
              "quantum dot: five-level Hamiltonian model, pulse-schedule "
              "integration, protocol sweeps, readout statistics and fits.";

    m.attr("PLANCK_UEV_PER_GHZ") = constants::planck_uev_per_ghz;
    m.attr("MU_B_GHZ_PER_MT") = constants::mu_b_ghz_per_mt;

    py::register_exception<ModelError>(m, "ModelError");
    py::register_exception<NumericError>(m, "NumericError");
    py::register_exception<ParseError>(m, "ConfigParseError");

    py::class_<SensorParams>(m, "SensorParams")
        .def(py::init<>())
        .def_readwrite("mu_singlet_standard", &SensorParams::mu_singlet_standard)
        .def_readwrite("mu_triplet_standard", &SensorParams::mu_triplet_standard)
        .def_readwrite("mu_singlet_latched", &SensorParams::mu_singlet_latched)
        .def_readwrite("mu_triplet_latched", &SensorParams::mu_triplet_latched)
        .def_readwrite("sigma_current", &SensorParams::sigma_current)
        .def_readwrite("latch_success", &SensorParams::latch_success)
        .def_readwrite("prep_error", &SensorParams::prep_error);

    py::class_<DeviceParams>(m, "DeviceParams")
        .def(py::init<>())
        .def_readwrite("tc0", &DeviceParams::tc0)
        .def_readwrite("tc_decay", &DeviceParams::tc_decay)
        .def_readwrite("delta11", &DeviceParams::delta11)
        .def_readwrite("g1", &DeviceParams::g1)
        .def_readwrite("g2", &DeviceParams::g2)
        .def_readwrite("b0z", &DeviceParams::b0z)
        .def_readwrite("b_offset", &DeviceParams::b_offset)
        .def_readwrite("e_charging", &DeviceParams::e_charging)
        .def_readwrite("valley_frac", &DeviceParams::valley_frac)
        .def_readwrite("sigma_eps", &DeviceParams::sigma_eps)
        .def_readwrite("sigma_delta", &DeviceParams::sigma_delta)
        .def_readwrite("sensor", &DeviceParams::sensor)
        .def("validate", &DeviceParams::validate)
        .def("zeeman_mean", &DeviceParams::zeeman_mean)
        .def("zeeman_diff", &DeviceParams::zeeman_diff);

    m.def("to_frequency", [](double e) { return to_frequency(e); },
          "eps (ueV) -> frequency (GHz)");
    m.def("to_energy_uev", [](double f) { return to_energy_uev(f); });
    m.def("tunnel_coupling", &tunnel_coupling);
    m.def("mixing_angle", &mixing_angle);
    m.def("exchange_j", &exchange_j);
    m.def("delta_theta", &delta_theta);

    py::class_<Hamiltonian>(m, "Hamiltonian")
        .def_readonly("dim", &Hamiltonian::dim)
        .def_readonly("entries", &Hamiltonian::entries)
        .def_readonly("basis", &Hamiltonian::basis);
    py::class_<EigenSystem>(m, "EigenSystem")
        .def_readonly("values", &EigenSystem::values)
        .def_readonly("vectors", &EigenSystem::vectors);

    m.def("build_h5", &build_h5);
    py::enum_<T0Coupling>(m, "T0Coupling")
        .value("h5_weight", T0Coupling::h5_weight)
        .value("paper_eq1", T0Coupling::paper_eq1);
    m.def("effective_h4", &effective_h4, py::arg("params"), py::arg("eps_uev"),
          py::arg("form") = T0Coupling::h5_weight);
    m.def("eigensystem", &eigensystem);
    m.def("m0_ground_state", &m0_ground_state);
    m.def("st_crossing_eps",
          [](const DeviceParams& p) -> py::object {
              const auto e = st_crossing_eps(p);
              return e ? py::cast(*e) : py::none();
          });
    py::enum_<GapKind>(m, "GapKind")
        .value("S_T0", GapKind::S_T0)
        .value("S_Tminus", GapKind::S_Tminus);
    m.def("eigen_gap", &eigen_gap);
    m.def("lz_diabatic_probability", &lz_diabatic_probability);
    m.def("lz_velocity_for_probability", &lz_velocity_for_probability);

    py::class_<Segment> seg(m, "Segment");
    py::enum_<Segment::Kind>(seg, "Kind")
        .value("ramp", Segment::Kind::ramp)
        .value("dwell", Segment::Kind::dwell)
        .value("drive", Segment::Kind::drive);
    seg.def(py::init<>())
        .def_static("ramp", &Segment::ramp)
        .def_static("dwell", &Segment::dwell)
        .def_static("drive", &Segment::drive, py::arg("e"), py::arg("dur"),
                    py::arg("f_ghz"), py::arg("amp_mhz"), py::arg("phase") = 0.0)
        .def_readwrite("kind", &Segment::kind)
        .def_readwrite("eps_start", &Segment::eps_start)
        .def_readwrite("eps_end", &Segment::eps_end)
        .def_readwrite("duration", &Segment::duration)
        .def_readwrite("drive_freq", &Segment::drive_freq)
        .def_readwrite("drive_amp", &Segment::drive_amp)
        .def_readwrite("drive_phase", &Segment::drive_phase);

    py::class_<StateVector>(m, "StateVector")
        .def_readonly("amplitudes", &StateVector::amplitudes)
        .def_readonly("basis", &StateVector::basis);

    py::class_<PulseSchedule> sch(m, "PulseSchedule");
    py::enum_<PulseSchedule::Init>(sch, "Init")
        .value("ground_02s", PulseSchedule::Init::ground_02s)
        .value("custom", PulseSchedule::Init::custom);
    sch.def(py::init<>())
        .def_readwrite("segments", &PulseSchedule::segments)
        .def_readwrite("initial_state", &PulseSchedule::initial_state)
        .def_readwrite("custom_amplitudes", &PulseSchedule::custom_amplitudes)
        .def("validate", &PulseSchedule::validate)
        .def("total_duration", &PulseSchedule::total_duration);

    py::class_<EvolveOptions> eo(m, "EvolveOptions");
    py::enum_<EvolveOptions::Frame>(eo, "Frame")
        .value("lab", EvolveOptions::Frame::lab)
        .value("rotating", EvolveOptions::Frame::rotating);
    eo.def(py::init<>())
        .def_readwrite("max_phase_per_step", &EvolveOptions::max_phase_per_step)
        .def_readwrite("frame", &EvolveOptions::frame)
        .def_readwrite("record_trajectory", &EvolveOptions::record_trajectory)
        .def_readwrite("step_budget", &EvolveOptions::step_budget);

    py::class_<TrajectoryPoint>(m, "TrajectoryPoint")
        .def_readonly("t_ns", &TrajectoryPoint::t_ns)
        .def_readonly("amplitudes", &TrajectoryPoint::amplitudes);
    py::class_<EvolveResult>(m, "EvolveResult")
        .def_readonly("final_state", &EvolveResult::final_state)
        .def_readonly("trajectory", &EvolveResult::trajectory)
        .def_readonly("norm_drift", &EvolveResult::norm_drift)
        .def_readonly("steps", &EvolveResult::steps)
        .def_readonly("warnings", &EvolveResult::warnings);
    m.def("evolve", &evolve, py::arg("schedule"), py::arg("params"),
          py::arg("opts") = EvolveOptions{});
    m.def("esr_hamiltonian", &esr_hamiltonian);
    m.def("level_velocity", &level_velocity);

    py::class_<PrepResult>(m, "PrepResult")
        .def_readonly("state", &PrepResult::state)
        .def_readonly("crossing_leak_estimate", &PrepResult::crossing_leak_estimate)
        .def_readonly("adiabatic_estimate", &PrepResult::adiabatic_estimate)
        .def_readonly("warnings", &PrepResult::warnings);
    m.def(
        "adiabatic_prepare",
        [](const DeviceParams& p, double eps_target, double ramp_ns) {
            return adiabatic_prepare(p, eps_target, ramp_ns);
        },
        py::arg("params"), py::arg("eps_target"), py::arg("ramp_ns"));

    py::class_<experiments::Axis>(m, "Axis")
        .def_readonly("name", &experiments::Axis::name)
        .def_readonly("units", &experiments::Axis::units)
        .def_readonly("grid", &experiments::Axis::grid);
    py::class_<experiments::PTMap>(m, "PTMap")
        .def_readonly("axis1", &experiments::PTMap::axis1)
        .def_readonly("axis2", &experiments::PTMap::axis2)
        .def_readonly("values", &experiments::PTMap::values)
        .def_readonly("shots", &experiments::PTMap::shots)
        .def_readonly("warnings", &experiments::PTMap::warnings)
        .def("at", &experiments::PTMap::at);
    py::class_<experiments::Curve>(m, "Curve")
        .def_readonly("x", &experiments::Curve::x)
        .def_readonly("y", &experiments::Curve::y)
        .def_readonly("x_name", &experiments::Curve::x_name)
        .def_readonly("warnings", &experiments::Curve::warnings);

    m.def("spin_funnel",
          [](const DeviceParams& p, const std::vector<double>& eps,
             const std::vector<double>& b, double dwell) {
              return experiments::spin_funnel(p, eps, b, dwell);
          });
    m.def("lz_single_passage",
          [](const DeviceParams& p, const std::vector<double>& nu, double b0z) {
              return experiments::lz_single_passage(p, nu, b0z);
          });
    m.def("lzs_map", [](const DeviceParams& p, const std::vector<double>& eps,
                        const std::vector<double>& tau) {
        return experiments::lzs_map(p, eps, tau);
    });
    m.def("exchange_map",
          [](const DeviceParams& p, const std::vector<double>& eps,
             const std::vector<double>& tau, double b0z) {
              return experiments::exchange_map(p, eps, tau, b0z);
          },
          py::arg("params"), py::arg("eps_grid"), py::arg("tau_grid"),
          py::arg("b0z_mt") = 200.0);
    m.def("exchange_trace",
          [](const DeviceParams& p, double eps, const std::vector<double>& tau,
             double b0z, bool ideal) {
              experiments::ExchangeTraceOptions o;
              o.ideal = ideal;
              return experiments::exchange_trace(p, eps, tau, b0z, o);
          },
          py::arg("params"), py::arg("eps_uev"), py::arg("tau_grid"),
          py::arg("b0z_mt") = 200.0, py::arg("ideal") = true);
    m.def("esr_map", [](const DeviceParams& p, const std::vector<double>& eps,
                        const std::vector<double>& freq, const Segment& pulse) {
        return experiments::esr_map(p, eps, freq, pulse);
    });
    m.def("gap_curve", &experiments::gap_curve);
    m.def("linspace", &experiments::linspace);

    py::class_<noise::NoiseSample>(m, "NoiseSample")
        .def_readonly("d_eps", &noise::NoiseSample::d_eps)
        .def_readonly("d_delta", &noise::NoiseSample::d_delta);
    m.def("noise_sample", &noise::sample);
    m.def("shot_average",
          [](const std::function<std::vector<double>(const DeviceParams&)>& fn,
             const DeviceParams& p, int shots, std::uint64_t seed) {
              return noise::shot_average(fn, p, shots, seed);
          });

    py::enum_<readout::Outcome>(m, "Outcome")
        .value("singlet", readout::Outcome::singlet)
        .value("triplet", readout::Outcome::triplet);
    py::enum_<readout::Mode>(m, "ReadoutMode")
        .value("standard", readout::Mode::standard)
        .value("latched", readout::Mode::latched);
    py::class_<readout::Histogram>(m, "Histogram")
        .def_readonly("bin_centers", &readout::Histogram::bin_centers)
        .def_readonly("counts", &readout::Histogram::counts);
    m.def("histogram", [](const std::vector<double>& v, int bins) {
        return readout::histogram(v, bins);
    });
    py::class_<readout::ThresholdResult>(m, "ThresholdResult")
        .def_readonly("threshold", &readout::ThresholdResult::threshold)
        .def_readonly("f_m", &readout::ThresholdResult::f_m);
    m.def("optimal_threshold", &readout::optimal_threshold);
    py::class_<readout::ShotRecord>(m, "ShotRecord")
        .def_readonly("truth", &readout::ShotRecord::truth)
        .def_readonly("current", &readout::ShotRecord::current)
        .def_readonly("classified", &readout::ShotRecord::classified);
    py::class_<readout::VisibilityResult>(m, "VisibilityResult")
        .def_readonly("visibility", &readout::VisibilityResult::visibility)
        .def_readonly("false_singlet_rate",
                      &readout::VisibilityResult::false_singlet_rate)
        .def_readonly("false_triplet_rate",
                      &readout::VisibilityResult::false_triplet_rate);
    m.def("simulate_shots", &readout::simulate_shots);
    m.def("visibility", [](const std::vector<readout::ShotRecord>& shots) {
        return readout::visibility(shots);
    });

    py::class_<analysis::FitResult>(m, "FitResult")
        .def_readonly("names", &analysis::FitResult::names)
        .def_readonly("values", &analysis::FitResult::values)
        .def_readonly("ci95", &analysis::FitResult::ci95)
        .def_readonly("residual_norm", &analysis::FitResult::residual_norm)
        .def_readonly("converged", &analysis::FitResult::converged)
        .def_readonly("identifiable", &analysis::FitResult::identifiable)
        .def_readonly("notes", &analysis::FitResult::notes)
        .def("value", &analysis::FitResult::value)
        .def("ci", &analysis::FitResult::ci);
    py::class_<analysis::FftPeak>(m, "FftPeak")
        .def_readonly("found", &analysis::FftPeak::found)
        .def_readonly("frequency", &analysis::FftPeak::frequency)
        .def_readonly("uncertainty", &analysis::FftPeak::uncertainty);
    m.def("fft_peak", [](const std::vector<double>& s, double dt) {
        return analysis::fft_peak(s, dt);
    });
    m.def("fit_lz", [](const std::vector<double>& nu, const std::vector<double>& pt) {
        return analysis::fit_lz(nu, pt);
    });
    py::class_<analysis::GapModelResult>(m, "GapModelResult")
        .def_readonly("fit", &analysis::GapModelResult::fit)
        .def_readonly("residual_ratio_const",
                      &analysis::GapModelResult::residual_ratio_const)
        .def_readonly("fit_const", &analysis::GapModelResult::fit_const);
    m.def("fit_gap_model",
          [](const std::vector<double>& eps, const std::vector<double>& gap,
             const DeviceParams& prior) {
              return analysis::fit_gap_model(eps, gap, prior);
          });
    py::class_<analysis::DecayResult>(m, "DecayResult")
        .def_readonly("fit", &analysis::DecayResult::fit)
        .def_readonly("envelope_power", &analysis::DecayResult::envelope_power)
        .def_readonly("frequency_found", &analysis::DecayResult::frequency_found)
        .def_readonly("f_pi", &analysis::DecayResult::f_pi)
        .def_readonly("decay_resolved", &analysis::DecayResult::decay_resolved);
    m.def("fit_decay",
          [](const std::vector<double>& tau, const std::vector<double>& pt) {
              return analysis::fit_decay(tau, pt);
          });
    m.def("stueckelberg_phase", &analysis::stueckelberg_phase);

    m.def("parse_device_config",
          [](const std::string& text) { return io::parse_device_config(text); });
    m.def("serialize_device_config", &io::serialize_device_config);
    m.def("parse_schedule",
          [](const std::string& text) { return io::parse_schedule(text); });
    m.def("parse_range", &io::parse_range);
}
