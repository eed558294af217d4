#pragma once

#include <vector>

#include "qdsim/model.hpp"

namespace qdsim {

struct Segment {
    enum class Kind { ramp, dwell, drive };
    Kind kind = Kind::dwell;
    double eps_start = 0.0;  // ueV
    double eps_end = 0.0;    // ueV (== eps_start for dwell/drive)
    double duration = 0.0;   // ns
    double drive_freq = 0.0;   // GHz (drive only)
    double drive_amp = 0.0;    // MHz Rabi frequency (drive only)
    double drive_phase = 0.0;  // rad

    double eps_at(double t_ns) const {
        if (kind != Kind::ramp || duration <= 0) return eps_start;
        return eps_start + (eps_end - eps_start) * (t_ns / duration);
    }

    static Segment ramp(double e0, double e1, double dur) {
        return {Kind::ramp, e0, e1, dur, 0, 0, 0};
    }
    static Segment dwell(double e, double dur) {
        return {Kind::dwell, e, e, dur, 0, 0, 0};
    }
    static Segment drive(double e, double dur, double f_ghz, double amp_mhz,
                         double phase = 0) {
        return {Kind::drive, e, e, dur, f_ghz, amp_mhz, phase};
    }
};

struct StateVector {
    Vector5cd amplitudes = Vector5cd::Zero();
    std::vector<std::string> basis = {"T+", "T0", "T-", "(1,1)S", "(0,2)S"};
};

struct PulseSchedule {
    enum class Init { ground_02s, custom };
    std::vector<Segment> segments;
    Init initial_state = Init::ground_02s;
    Vector5cd custom_amplitudes = Vector5cd::Zero();

    // Enforces positive durations, dwell/drive eps equality and boundary
    // continuity in eps. Throws ModelError naming the segment index.
    void validate() const;

    double total_duration() const;
};

struct EvolveOptions {
    enum class Frame { lab, rotating };
    double max_phase_per_step = 0.05;  // rad, must lie in (0, 0.2]
    Frame frame = Frame::rotating;     // applies to drive segments
    bool record_trajectory = false;
    std::uint64_t step_budget = 100'000'000;

    void validate() const;
};

}  // namespace qdsim
