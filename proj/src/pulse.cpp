#include "qdsim/pulse.hpp"

#include <cmath>
#include <string>

#include "qdsim/errors.hpp"

namespace qdsim {

void PulseSchedule::validate() const {
    for (size_t i = 0; i < segments.size(); ++i) {
        const Segment& s = segments[i];
        const std::string at = "segment " + std::to_string(i);
        if (!(s.duration > 0)) throw ModelError(at + ": duration must be > 0");
        if (s.kind != Segment::Kind::ramp && s.eps_start != s.eps_end)
            throw ModelError(at + ": dwell/drive requires eps_start == eps_end");
        if (s.kind == Segment::Kind::drive && !(s.drive_freq > 0))
            throw ModelError(at + ": drive requires drive_freq > 0");
        if (i > 0 && segments[i - 1].eps_end != s.eps_start)
            throw ModelError(at + ": eps discontinuity with previous segment");
    }
    if (initial_state == Init::custom) {
        const double n = custom_amplitudes.norm();
        if (std::abs(n - 1.0) > 1e-9)
            throw ModelError("custom initial state must be normalized");
    }
}

double PulseSchedule::total_duration() const {
    double t = 0;
    for (const auto& s : segments) t += s.duration;
    return t;
}

void EvolveOptions::validate() const {
    if (!(max_phase_per_step > 0) || max_phase_per_step > 0.2)
        throw ModelError("max_phase_per_step must lie in (0, 0.2]");
}

}  // namespace qdsim
