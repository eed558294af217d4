#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "qdsim/analysis.hpp"
#include "qdsim/experiments.hpp"
#include "qdsim/params.hpp"
#include "qdsim/pulse.hpp"
#include "qdsim/readout.hpp"

namespace qdsim::io {

// Device config: INI-style sections [hamiltonian], [field], [noise], [sensor];
// units are mandatory suffixes on dimensioned keys (e.g. tc0 = 1.864 GHz).
// Unknown keys are errors; missing optional keys take documented defaults;
// tc0, g1, g2 and b0z are required.
DeviceParams parse_device_config(std::string_view text);
std::string serialize_device_config(const DeviceParams& params);

// Schedule text: one segment per line
//   ramp  <eps0><unit> <eps1><unit> <dur><unit>
//   dwell <eps><unit> <dur><unit>
//   drive <eps><unit> <dur><unit> freq=<f><unit> amp=<a><unit> [phase=<rad>]
//   initial ground_02S | initial custom <10 numbers re/im>
// or presets expanding to the four canonical sequences:
//   preset funnel|lzs|exchange|esr key=value ...
PulseSchedule parse_schedule(std::string_view text);
PulseSchedule expand_preset(const std::string& name,
                            const std::vector<std::pair<std::string, std::string>>& kv);

// Inclusive range "start:stop:count".
std::vector<double> parse_range(const std::string& text);

// CSV emission (deterministic %.17g formatting).
void write_ptmap_csv(std::ostream& os, const experiments::PTMap& map);
void write_curve_csv(std::ostream& os, const experiments::Curve& curve);
void write_histogram_csv(std::ostream& os, const readout::Histogram& h,
                         const std::string& value_units = "pA");
void write_fit_text(std::ostream& os, const analysis::FitResult& fit);
void write_residuals_csv(std::ostream& os, const std::vector<double>& x,
                         const std::vector<double>& residuals);

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string config_path;
    std::string config_hash;    // FNV-1a 64 of the config bytes
    std::string schedule_hash;  // empty when unused
    std::uint64_t master_seed = 0;
    std::string version;
    double wall_time_s = 0.0;
    std::vector<std::string> outputs;
    int threads = 1;
};

std::string fnv1a_hex(std::string_view bytes);
void write_manifest(std::ostream& os, const RunManifest& m);

}  // namespace qdsim::io
