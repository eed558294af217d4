#include "qdsim/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qdsim/analysis.hpp"
#include "qdsim/errors.hpp"
#include "qdsim/evolve.hpp"
#include "qdsim/experiments.hpp"
#include "qdsim/io.hpp"
#include "qdsim/noise.hpp"
#include "qdsim/readout.hpp"

namespace qdsim::cli {

namespace {

constexpr const char* kVersion = "qdsim 0.1.0";

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ModelError("cannot open file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content,
                std::vector<std::string>& outputs) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ModelError("cannot write file: " + path);
    f << content;
    outputs.push_back(path);
}

int env_threads() {
    const char* env = std::getenv("QDSIM_THREADS");
    return env ? std::max(1, std::atoi(env)) : 1;
}

struct ManifestScope {
    io::RunManifest m;
    std::string out_path;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    ~ManifestScope() = default;

    void finish() {
        m.version = kVersion;
        m.threads = env_threads();
        m.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        std::ofstream f(out_path + ".manifest.json");
        io::write_manifest(f, m);
    }
};

std::pair<std::vector<double>, std::vector<double>> read_two_column_csv(
    const std::string& path) {
    const std::string text = slurp(path);
    std::istringstream is(text);
    std::string line;
    std::vector<double> x, y;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (line.empty()) continue;
        if (n == 1 && line.find_first_not_of("0123456789+-.eE, \r") !=
                          std::string::npos)
            continue;  // header
        const size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("expected two comma-separated columns", n, 1);
        try {
            x.push_back(std::stod(line.substr(0, comma)));
            y.push_back(std::stod(line.substr(comma + 1)));
        } catch (...) {
            throw ParseError("malformed number in CSV", n, 1);
        }
    }
    if (x.size() < 2) throw ParseError("CSV has fewer than 2 data rows", n, 1);
    return {x, y};
}

// Shot sampling over a deterministic per-cell probability map.
std::vector<double> maybe_shot_average(
    const std::function<std::vector<double>(const DeviceParams&)>& experiment,
    const DeviceParams& params, int shots, std::uint64_t seed) {
    if (shots <= 0) return experiment(params);
    return noise::shot_average(experiment, params, shots, seed);
}

int dispatch(const std::vector<std::string>& argv) {
    CLI::App app{"Two-electron spin dynamics simulator for a silicon double "
                 "quantum dot"};
    app.require_subcommand(1);

    std::string config_path, out_path, schedule_path, in_path, residuals_path;
    std::string eps_range, b_range, tau_range, nu_range, freq_range;
    std::string which = "st0", mode = "latched", model = "lz";
    double dwell = 20.0, b0z = 0.0, amp = 0.02, duration = 25000.0, eps_one = 0.0;
    int shots = 0, bins = 60;
    std::uint64_t seed = 0;
    bool seed_given = false, log_nu = false, record = false, b0z_given = false;

    auto add_common = [&](CLI::App* sub, bool needs_out = true) {
        sub->add_option("--config", config_path, "device config file")->required();
        if (needs_out)
            sub->add_option("--out", out_path, "output CSV path")->required();
    };
    auto add_shots = [&](CLI::App* sub) {
        sub->add_option("--shots", shots, "shot-sample each cell (0: exact)");
        sub->add_option("--seed", seed, "master seed (required for stochastic runs)")
            ->each([&](const std::string&) { seed_given = true; });
    };

    CLI::App* funnel = app.add_subcommand("funnel", "spin-funnel map P_T(eps, B)");
    add_common(funnel);
    funnel->add_option("--eps", eps_range, "eps grid start:stop:count (ueV)")
        ->required();
    funnel->add_option("--b", b_range, "B0z grid start:stop:count (mT)")->required();
    funnel->add_option("--dwell", dwell, "dwell time (ns)");
    add_shots(funnel);

    CLI::App* lz = app.add_subcommand("lz", "single-passage Landau-Zener curve");
    add_common(lz);
    lz->add_option("--nu", nu_range, "velocity grid start:stop:count (Hz/s)")
        ->required();
    lz->add_flag("--log", log_nu, "geometric velocity spacing");
    lz->add_option("--b0z", b0z, "applied field (mT)");
    add_shots(lz);

    CLI::App* lzs = app.add_subcommand("lzs", "Landau-Zener-Stueckelberg map");
    add_common(lzs);
    lzs->add_option("--eps", eps_range, "eps grid (ueV)")->required();
    lzs->add_option("--tau", tau_range, "dwell grid (ns)")->required();
    add_shots(lzs);

    CLI::App* exch = app.add_subcommand("exchange", "coherent exchange map");
    add_common(exch);
    exch->add_option("--eps", eps_range, "eps grid (ueV)")->required();
    exch->add_option("--tau", tau_range, "dwell grid (ns)")->required();
    exch->add_option("--b0z", b0z, "applied field (mT)")
        ->each([&](const std::string&) { b0z_given = true; });
    add_shots(exch);

    CLI::App* esr = app.add_subcommand("esr", "ESR spectroscopy map");
    add_common(esr);
    esr->add_option("--eps", eps_range, "eps grid (ueV)")->required();
    esr->add_option("--freq", freq_range, "drive frequency grid (GHz)")->required();
    esr->add_option("--amp", amp, "drive amplitude (MHz)");
    esr->add_option("--duration", duration, "pulse duration (ns)");
    add_shots(esr);

    CLI::App* gap = app.add_subcommand("gap", "exact eigen-gap curve");
    add_common(gap);
    gap->add_option("--eps", eps_range, "eps grid (ueV)")->required();
    gap->add_option("--which", which, "st0 | stm");

    CLI::App* readout_cmd = app.add_subcommand("readout", "sensor histograms");
    add_common(readout_cmd);
    readout_cmd->add_option("--mode", mode, "standard | latched");
    readout_cmd->add_option("--shots", shots, "shot count")->required();
    readout_cmd
        ->add_option("--seed", seed, "master seed (required for stochastic runs)")
        ->each([&](const std::string&) { seed_given = true; });
    readout_cmd->add_option("--bins", bins, "histogram bins");

    CLI::App* fit = app.add_subcommand("fit", "parameter fits");
    fit->add_option("--model", model, "lz | gap | decay")->required();
    fit->add_option("--in", in_path, "input CSV")->required();
    fit->add_option("--out", out_path, "fit report path")->required();
    fit->add_option("--config", config_path, "device config (prior for gap fits)");
    fit->add_option("--residuals", residuals_path, "residuals CSV path");

    CLI::App* evolve_cmd = app.add_subcommand("evolve", "integrate a schedule");
    add_common(evolve_cmd);
    evolve_cmd->add_option("--schedule", schedule_path, "schedule file")->required();
    evolve_cmd->add_flag("--record", record, "record the trajectory");

    // eps for single-trace usage (reserved for future subcommands)
    (void)eps_one;

    std::vector<std::string> args(argv.rbegin(), argv.rend());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // usage errors -> 1 (CLI11 prints to stderr)
    }

    const bool stochastic = shots > 0;
    if (stochastic && !seed_given) {
        std::cerr << "error: --seed is required for stochastic runs\n";
        return 1;
    }

    ManifestScope ms;
    ms.m.argv = argv;
    ms.m.master_seed = seed;
    ms.out_path = out_path;

    DeviceParams params;
    if (!config_path.empty()) {
        const std::string text = slurp(config_path);
        params = io::parse_device_config(text);
        ms.m.config_path = config_path;
        ms.m.config_hash = io::fnv1a_hex(text);
    }

    const auto emit_map = [&](experiments::PTMap map) {
        map.shots = shots;
        std::ostringstream os;
        io::write_ptmap_csv(os, map);
        std::vector<std::string> outputs;
        write_file(out_path, os.str(), outputs);
        for (const auto& w : map.warnings) std::cerr << "warning: " << w << "\n";
        ms.m.outputs = outputs;
        ms.finish();
    };
    const auto emit_curve = [&](const experiments::Curve& c) {
        std::ostringstream os;
        io::write_curve_csv(os, c);
        std::vector<std::string> outputs;
        write_file(out_path, os.str(), outputs);
        for (const auto& w : c.warnings) std::cerr << "warning: " << w << "\n";
        ms.m.outputs = outputs;
        ms.finish();
    };

    if (*funnel) {
        ms.m.command = "funnel";
        const auto eps = io::parse_range(eps_range);
        const auto b = io::parse_range(b_range);
        experiments::PTMap map = experiments::spin_funnel(params, eps, b, dwell);
        if (stochastic) {
            map.values = maybe_shot_average(
                [&](const DeviceParams& p) {
                    return experiments::spin_funnel(p, eps, b, dwell).values;
                },
                params, shots, seed);
        }
        emit_map(std::move(map));
        return 0;
    }
    if (*lz) {
        ms.m.command = "lz";
        auto nu = io::parse_range(nu_range);
        if (log_nu) {
            const auto lin = nu;
            const double a = std::log(lin.front()), b2 = std::log(lin.back());
            for (size_t i = 0; i < nu.size(); ++i)
                nu[i] = std::exp(a + (b2 - a) * (nu.size() == 1
                                                     ? 0.0
                                                     : double(i) / (nu.size() - 1)));
        }
        emit_curve(experiments::lz_single_passage(params, nu, b0z));
        return 0;
    }
    if (*lzs) {
        ms.m.command = "lzs";
        const auto eps = io::parse_range(eps_range);
        const auto tau = io::parse_range(tau_range);
        experiments::PTMap map = experiments::lzs_map(params, eps, tau);
        if (stochastic)
            map.values = maybe_shot_average(
                [&](const DeviceParams& p) {
                    return experiments::lzs_map(p, eps, tau).values;
                },
                params, shots, seed);
        emit_map(std::move(map));
        return 0;
    }
    if (*exch) {
        ms.m.command = "exchange";
        const auto eps = io::parse_range(eps_range);
        const auto tau = io::parse_range(tau_range);
        const double field = b0z_given ? b0z : 200.0;
        experiments::PTMap map = experiments::exchange_map(params, eps, tau, field);
        if (stochastic)
            map.values = maybe_shot_average(
                [&](const DeviceParams& p) {
                    return experiments::exchange_map(p, eps, tau, field).values;
                },
                params, shots, seed);
        emit_map(std::move(map));
        return 0;
    }
    if (*esr) {
        ms.m.command = "esr";
        const auto eps = io::parse_range(eps_range);
        const auto freq = io::parse_range(freq_range);
        const Segment pulse = Segment::drive(0.0, duration, 1.0, amp);
        experiments::PTMap map = experiments::esr_map(params, eps, freq, pulse);
        if (stochastic)
            map.values = maybe_shot_average(
                [&](const DeviceParams& p) {
                    return experiments::esr_map(p, eps, freq, pulse).values;
                },
                params, shots, seed);
        emit_map(std::move(map));
        return 0;
    }
    if (*gap) {
        ms.m.command = "gap";
        const auto eps = io::parse_range(eps_range);
        const GapKind kind = (which == "stm") ? GapKind::S_Tminus : GapKind::S_T0;
        emit_curve(experiments::gap_curve(params, eps, kind));
        return 0;
    }
    if (*readout_cmd) {
        ms.m.command = "readout";
        const readout::Mode m =
            (mode == "standard") ? readout::Mode::standard : readout::Mode::latched;
        const auto recs =
            readout::simulate_shots(params.sensor, m, shots, 0.5, seed);
        std::vector<double> currents(recs.size());
        for (size_t i = 0; i < recs.size(); ++i) currents[i] = recs[i].current;
        const auto hist = readout::histogram(currents, bins);
        std::ostringstream os;
        io::write_histogram_csv(os, hist);
        std::vector<std::string> outputs;
        write_file(out_path, os.str(), outputs);
        const auto th = readout::optimal_threshold(params.sensor, m);
        const auto vis = readout::visibility(recs);
        std::cout << "threshold_pA = " << th.threshold << "\n"
                  << "f_m = " << th.f_m << "\n"
                  << "visibility = " << vis.visibility << "\n"
                  << "false_singlet_rate = " << vis.false_singlet_rate << "\n"
                  << "false_triplet_rate = " << vis.false_triplet_rate << "\n";
        ms.m.outputs = outputs;
        ms.finish();
        return 0;
    }
    if (*fit) {
        ms.m.command = "fit";
        const auto [x, y] = read_two_column_csv(in_path);
        std::ostringstream os;
        std::vector<double> residuals;
        if (model == "lz") {
            const auto fr = analysis::fit_lz(x, y);
            io::write_fit_text(os, fr);
            for (size_t i = 0; i < x.size(); ++i) {
                const double f = fr.values(0), a = fr.values(1), b2 = fr.values(2);
                residuals.push_back(
                    a * (1 - std::exp(-4 * M_PI * M_PI * f * f / x[i])) + b2 - y[i]);
            }
        } else if (model == "gap") {
            if (config_path.empty()) {
                std::cerr << "error: fit gap requires --config for the prior\n";
                return 1;
            }
            const auto gr = analysis::fit_gap_model(x, y, params);
            io::write_fit_text(os, gr.fit);
            os << "residual_ratio_const = " << gr.residual_ratio_const << "\n";
        } else if (model == "decay") {
            const auto dr = analysis::fit_decay(x, y);
            io::write_fit_text(os, dr.fit);
            os << "envelope_power = " << dr.envelope_power << "\n";
            os << "f_pi = " << dr.f_pi << "\n";
        } else {
            std::cerr << "error: unknown fit model '" << model << "'\n";
            return 1;
        }
        std::vector<std::string> outputs;
        write_file(out_path, os.str(), outputs);
        if (!residuals_path.empty()) {
            std::ostringstream ros;
            io::write_residuals_csv(ros, x, residuals);
            write_file(residuals_path, ros.str(), outputs);
        }
        ms.m.outputs = outputs;
        ms.finish();
        return 0;
    }
    if (*evolve_cmd) {
        ms.m.command = "evolve";
        const std::string sched_text = slurp(schedule_path);
        ms.m.schedule_hash = io::fnv1a_hex(sched_text);
        const PulseSchedule sch = io::parse_schedule(sched_text);
        EvolveOptions opts;
        opts.record_trajectory = record;
        const EvolveResult res = evolve(sch, params, opts);
        std::ostringstream os;
        os << "t_ns,re_tp,im_tp,re_t0,im_t0,re_tm,im_tm,re_s11,im_s11,re_s02,"
              "im_s02\n";
        const auto row = [&](double t, const Vector5cd& a) {
            os << t;
            for (int k = 0; k < 5; ++k)
                os << "," << a(k).real() << "," << a(k).imag();
            os << "\n";
        };
        if (record)
            for (const auto& pt : res.trajectory) row(pt.t_ns, pt.amplitudes);
        else
            row(sch.total_duration(), res.final_state.amplitudes);
        std::vector<std::string> outputs;
        write_file(out_path, os.str(), outputs);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        ms.m.outputs = outputs;
        ms.finish();
        return 0;
    }
    return 1;
}

}  // namespace

int run(const std::vector<std::string>& argv) {
    try {
        return dispatch(argv);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace qdsim::cli
