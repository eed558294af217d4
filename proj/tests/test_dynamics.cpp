#include <doctest.h>

#include <cmath>

#include "qdsim/errors.hpp"
#include "qdsim/evolve.hpp"
#include "qdsim/rng.hpp"

using namespace qdsim;

namespace {

DeviceParams quiet_params() {
    DeviceParams p;
    p.tc0 = 1.864;
    p.g1 = p.g2 = 2.0;
    return p;
}

double overlap2(const Vector5cd& a, const Vector5cd& b) {
    return std::norm(a.dot(b));
}

}  // namespace

TEST_SUITE_BEGIN("dynamics");

TEST_CASE("compile follows the phase rule") {
    // A dwell whose centered eigenvalue spread is 10 GHz (f_max = 5 GHz):
    // realized with a pure charge doublet at eps giving sqrt(f^2/4+tc^2)=5.
    DeviceParams p = quiet_params();
    p.tc0 = 3.0;
    const double f = 2.0 * std::sqrt(25.0 - 9.0);  // eigenvalues +-5
    PulseSchedule sch;
    sch.segments = {Segment::dwell(to_energy_uev(f), 100.0)};
    EvolveOptions opts;
    opts.max_phase_per_step = 0.05;
    const CompiledGrid g = compile(sch, p, opts);
    CHECK(g.segments[0].f_max == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(g.segments[0].dt == doctest::Approx(0.00159155).epsilon(1e-3));
    CHECK(g.segments[0].grid_steps == doctest::Approx(62832).epsilon(1e-4));
    CHECK(g.segments[0].constant_h);
    CHECK(g.segments[0].work_steps == 1);
}

TEST_CASE("zero-Hamiltonian dwell compiles to one step") {
    DeviceParams p = quiet_params();
    p.tc0 = 1e-300;  // no couplings, eps = 0: H = 0
    PulseSchedule sch;
    sch.segments = {Segment::dwell(0.0, 50.0)};
    const CompiledGrid g = compile(sch, p, EvolveOptions{});
    CHECK(g.segments[0].grid_steps == 1);
    CHECK(g.total_work_steps == 1);
}

TEST_CASE("lab-frame drives resolve the carrier; RWA needs no refinement") {
    DeviceParams p = quiet_params();
    p.b0z = 150.0;
    PulseSchedule sch;
    sch.segments = {Segment::drive(400.0, 10.0, 4.2, 1.0)};
    EvolveOptions lab;
    lab.frame = EvolveOptions::Frame::lab;
    EvolveOptions rwa;
    rwa.frame = EvolveOptions::Frame::rotating;
    const CompiledGrid gl = compile(sch, p, lab);
    const CompiledGrid gr = compile(sch, p, rwa);
    CHECK(gl.segments[0].dt <= 1.0 / (20.0 * 4.2));
    CHECK_FALSE(gl.segments[0].constant_h);
    CHECK(gr.segments[0].constant_h);
    CHECK(gr.total_work_steps == 1);
}

TEST_CASE("step budget refusal carries a diagnostic") {
    DeviceParams p = quiet_params();
    PulseSchedule sch;
    sch.segments = {Segment::ramp(-300.0, 300.0, 1e6)};
    EvolveOptions opts;
    opts.step_budget = 1000;
    CHECK_THROWS_AS((void)compile(sch, p, opts), NumericError);
}

TEST_CASE("dwell in an eigenstate is stationary") {
    DeviceParams p = quiet_params();
    p.b0z = 25.0;
    const double eps = 80.0;
    PulseSchedule sch;
    sch.segments = {Segment::dwell(eps, 250.0)};
    sch.initial_state = PulseSchedule::Init::custom;
    sch.custom_amplitudes = m0_ground_state(p, eps);
    const EvolveResult r = evolve(sch, p);
    CHECK(overlap2(sch.custom_amplitudes, r.final_state.amplitudes) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.norm_drift < 1e-9);
}

TEST_CASE("two-level Landau-Zener sweep against the analytic formula") {
    // Singlet charge doublet only: tc couples (1,1)S and (0,2)S, triplets
    // are spectators. Sweeping eps through zero is a textbook LZ problem
    // with coupling tc and velocity d(f_eps)/dt.
    DeviceParams p = quiet_params();
    p.tc0 = 0.010;  // GHz

    for (double rate_f : {2.0, 8.0, 32.0}) {  // GHz per ns
        const double f_span = 6.0;            // GHz on each side
        const double eps_span = to_energy_uev(f_span);
        const double dur = 2.0 * f_span / rate_f;
        PulseSchedule sch;
        sch.segments = {Segment::ramp(-eps_span, eps_span, dur)};
        sch.initial_state = PulseSchedule::Init::custom;
        Vector5cd init = Vector5cd::Zero();
        init(kS02) = 1.0;  // incoming диabatic branch
        sch.custom_amplitudes = init;
        const EvolveResult r = evolve(sch, p);
        const double p_stay = std::norm(r.final_state.amplitudes(kS02));
        // diabatic slope of (E_S02 - E_S11) is d f/dt = rate_f
        const double expected =
            std::exp(-4.0 * M_PI * M_PI * p.tc0 * p.tc0 / rate_f);
        CHECK(std::abs(p_stay - expected) < 1e-3);
    }
}

TEST_CASE("resonant Rabi drive flips the spins at 1/(2 Omega)") {
    DeviceParams p = quiet_params();
    p.b0z = 150.0;
    const double eps = 400.0;
    const double f_res = p.zeeman_mean();  // T- <-> T0 ladder resonance
    const double omega = 1.0;              // MHz

    // start in T-: the collective ladder returns sin^2(pi Omega t) per spin
    PulseSchedule sch;
    sch.segments = {Segment::drive(eps, 500.0, f_res, omega)};
    sch.initial_state = PulseSchedule::Init::custom;
    Vector5cd init = Vector5cd::Zero();
    init(kTminus) = 1.0;
    sch.custom_amplitudes = init;
    const EvolveResult r = evolve(sch, p);
    // both spins flipped: T- -> T+ at t = 1/(2 Omega) = 500 ns
    CHECK(std::norm(r.final_state.amplitudes(kTplus)) ==
          doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("time reversal returns the initial state") {
    // Adiabatically clean schedule: no S/T- crossing inside the span, so the
    // forward-then-reversed sweep is an echo rather than an interferometer.
    DeviceParams p = quiet_params();
    p.delta11 = 0.0;
    p.b0z = 30.0;

    PulseSchedule sch;
    sch.segments = {Segment::ramp(-150.0, 60.0, 16.0), Segment::dwell(60.0, 20.0),
                    Segment::ramp(60.0, 140.0, 6.0)};
    sch.initial_state = PulseSchedule::Init::ground_02s;
    // forward then exact reverse
    std::vector<Segment> rev(sch.segments.rbegin(), sch.segments.rend());
    for (Segment& s : rev) std::swap(s.eps_start, s.eps_end);
    PulseSchedule full = sch;
    for (const Segment& s : rev) full.segments.push_back(s);

    const Vector5cd init = m0_ground_state(p, -150.0);
    const EvolveResult r = evolve(full, p);
    CHECK(overlap2(init, r.final_state.amplitudes) > 1.0 - 1e-6);
    CHECK(r.norm_drift < 1e-9);
}

TEST_CASE("step halving leaves probabilities unchanged") {
    DeviceParams p = quiet_params();
    p.delta11 = 10.0;
    p.b0z = 20.0;
    PulseSchedule sch;
    sch.segments = {Segment::ramp(-120.0, 90.0, 15.0), Segment::dwell(90.0, 30.0)};

    EvolveOptions a, b;
    a.max_phase_per_step = 0.05;
    b.max_phase_per_step = 0.025;
    const Vector5cd pa = evolve(sch, p, a).final_state.amplitudes;
    const Vector5cd pb = evolve(sch, p, b).final_state.amplitudes;
    for (int k = 0; k < 5; ++k)
        CHECK(std::abs(std::norm(pa(k)) - std::norm(pb(k))) < 1e-4);
}

TEST_CASE("lab frame agrees with the rotating frame on resonance") {
    DeviceParams p = quiet_params();
    p.b0z = 25.0;  // f_res ~ 0.7 GHz keeps the lab integration cheap
    const double eps = 60.0;
    const double f_res = p.zeeman_mean();
    const double omega = f_res * 1e3 / 1200.0;  // MHz, Omega ~ f/1200

    PulseSchedule sch;
    sch.segments = {Segment::drive(eps, 0.5 / (omega * 1e-3), f_res, omega)};
    sch.initial_state = PulseSchedule::Init::custom;
    Vector5cd init = Vector5cd::Zero();
    init(kTminus) = 1.0;
    sch.custom_amplitudes = init;

    EvolveOptions lab;
    lab.frame = EvolveOptions::Frame::lab;
    lab.step_budget = 400'000'000;
    const Vector5cd pl = evolve(sch, p, lab).final_state.amplitudes;
    const Vector5cd pr = evolve(sch, p).final_state.amplitudes;
    for (int k = 0; k < 5; ++k)
        CHECK(std::abs(std::norm(pl(k)) - std::norm(pr(k))) < 5e-3);
}

TEST_CASE("esr hamiltonian couplings") {
    DeviceParams p = quiet_params();
    p.b0z = 150.0;
    Segment seg = Segment::drive(300.0, 1000.0, 4.2, 2.0);

    SUBCASE("equal g-factors decouple the (1,1) singlet") {
        const Hamiltonian h =
            esr_hamiltonian(p, seg, 0.0, EvolveOptions::Frame::rotating);
        CHECK(std::abs(h.entries(kTplus, kS11) - tunnel_coupling(p, 300.0) * 0.0) ==
              doctest::Approx(0.0));
        CHECK(std::abs(h.entries(kS11, kTminus)) == doctest::Approx(0.0));
    }

    SUBCASE("matrix elements match the two-spin product basis") {
        p.g1 = 1.98;
        p.g2 = 2.03;
        const double gbar = 0.5 * (p.g1 + p.g2);
        const double om1 = seg.drive_amp * 1e-3 * p.g1 / gbar;
        const double om2 = seg.drive_amp * 1e-3 * p.g2 / gbar;

        // brute-force 4-dim product basis: V = om1 sx(1) + om2 sx(2)
        Eigen::Matrix4cd v = Eigen::Matrix4cd::Zero();
        // basis order |uu>, |ud>, |du>, |dd>
        v(0, 2) = v(2, 0) = om1;  // flip spin 1: |uu><du|
        v(1, 3) = v(3, 1) = om1;
        v(0, 1) = v(1, 0) = om2;  // flip spin 2
        v(2, 3) = v(3, 2) = om2;
        // coupled basis vectors in the product basis
        Eigen::Vector4cd tp, t0, tm, s;
        tp << 1, 0, 0, 0;
        t0 << 0, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0;
        tm << 0, 0, 0, 1;
        s << 0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0;

        const Hamiltonian h =
            esr_hamiltonian(p, seg, 0.0, EvolveOptions::Frame::lab);
        const Hamiltonian h0 = build_h5(p, 300.0);
        const Eigen::MatrixXcd drive = h.entries - h0.entries;
        const double c = std::cos(seg.drive_phase);

        CHECK(drive(kTplus, kT0).real() ==
              doctest::Approx((tp.adjoint() * v * t0)(0).real() * c).epsilon(1e-12));
        CHECK(drive(kT0, kTminus).real() ==
              doctest::Approx((t0.adjoint() * v * tm)(0).real() * c).epsilon(1e-12));
        CHECK(drive(kTplus, kS11).real() ==
              doctest::Approx((tp.adjoint() * v * s)(0).real() * c).epsilon(1e-12));
        CHECK(drive(kS11, kTminus).real() ==
              doctest::Approx((s.adjoint() * v * tm)(0).real() * c).epsilon(1e-12));
        CHECK(std::abs(drive(kS02, kS02)) == doctest::Approx(0.0));
    }

    SUBCASE("far-detuned drive leaves the state in place") {
        p.g1 = 1.98;
        p.g2 = 2.03;
        const double detuning = 0.2;  // GHz
        Segment far = seg;
        far.drive_freq = p.zeeman_mean() + detuning;
        far.drive_amp = 2.0;  // MHz
        PulseSchedule sch;
        sch.segments = {far};
        sch.initial_state = PulseSchedule::Init::custom;
        Vector5cd init = Vector5cd::Zero();
        init(kTminus) = 1.0;
        sch.custom_amplitudes = init;
        const EvolveResult r = evolve(sch, p);
        const double p_flip = 1.0 - std::norm(r.final_state.amplitudes(kTminus));
        // detuning from the nearest transition out of T- (eigen-gap based)
        const EigenSystem es = eigensystem(build_h5(p, 300.0));
        double dmin = 1e18;
        for (int a = 0; a < 5; ++a)
            for (int b = 0; b < 5; ++b)
                if (a != b)
                    dmin = std::min(dmin, std::abs(std::abs(es.values(a) -
                                                            es.values(b)) -
                                                   far.drive_freq));
        const double bound = std::pow(far.drive_amp * 1e-3 / dmin, 2);
        CHECK(p_flip < bound);
    }
}

TEST_CASE("level velocity") {
    DeviceParams p = quiet_params();
    p.tc0 = 0.25;
    p.b0z = 7.0;
    const auto estar = st_crossing_eps(p);
    REQUIRE(estar.has_value());

    SUBCASE("linear gap slope is recovered exactly") {
        // narrow ramp around the crossing: J is locally linear
        const Segment ramp = Segment::ramp(*estar - 2.0, *estar + 2.0, 10.0);
        const double nu = level_velocity(p, ramp, GapKind::S_Tminus);
        const double de = 0.01;
        const double slope_eps =
            std::abs(exchange_j(p, *estar + de) - exchange_j(p, *estar - de)) /
            (2 * de);  // GHz/ueV
        const double expected = slope_eps * (4.0 / 10.0) * 1e18;
        CHECK(nu == doctest::Approx(expected).epsilon(1e-4));

        // doubling the duration halves the velocity
        const Segment slow = Segment::ramp(*estar - 2.0, *estar + 2.0, 20.0);
        CHECK(level_velocity(p, slow, GapKind::S_Tminus) ==
              doctest::Approx(nu / 2).epsilon(1e-6));
    }

    SUBCASE("unbracketed crossing reports the minimum-gap slope") {
        const Segment ramp = Segment::ramp(*estar + 5.0, *estar + 9.0, 10.0);
        CHECK(level_velocity(p, ramp, GapKind::S_Tminus) > 0.0);
    }

    SUBCASE("non-ramp segments are rejected") {
        CHECK_THROWS_AS(
            (void)level_velocity(p, Segment::dwell(10.0, 5.0), GapKind::S_Tminus),
            ModelError);
    }
}

TEST_CASE("adiabatic preparation") {
    DeviceParams p = quiet_params();
    p.b0z = 200.0;
    p.g2 = 2.0 + 4.3e-3;  // large dg keeps the m0 crossover fast
    p.tc_decay = 120.0;
    p.delta11 = 5.0;

    SUBCASE("instantaneous ramp leaves (0,2)S unchanged") {
        const PrepResult r = adiabatic_prepare(p, 250.0, 0.0);
        CHECK(overlap2(r.state.amplitudes, m0_ground_state(p, -300.0)) ==
              doctest::Approx(1.0));
    }

    SUBCASE("slow ramp with Delta = 0 reaches the target ground state") {
        DeviceParams q = p;
        q.delta11 = 0.0;
        q.g2 = 2.0 + 4.3e-2;
        q.tc_decay = 60.0;
        PrepOptions po;
        po.eps_start = -80.0;
        po.adiabatic_subsegments = 32;
        const PrepResult r = adiabatic_prepare(q, 120.0, 2000.0, po);
        CHECK(overlap2(r.state.amplitudes, m0_ground_state(q, 120.0)) >
              1.0 - 1e-6);
    }

    SUBCASE("paper regime prepares |down,up> with high fidelity") {
        const PrepResult r = adiabatic_prepare(p, 250.0, 600.0);
        CHECK(overlap2(r.state.amplitudes, m0_ground_state(p, 250.0)) > 0.9);
        CHECK(r.crossing_leak_estimate < 0.05);
    }
}

TEST_SUITE_END();
