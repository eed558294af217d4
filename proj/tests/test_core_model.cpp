#include <doctest.h>

#include <cmath>

#include "qdsim/constants.hpp"
#include "qdsim/errors.hpp"
#include "qdsim/model.hpp"
#include "qdsim/rng.hpp"

using namespace qdsim;

namespace {

DeviceParams base_params() {
    DeviceParams p;
    p.tc0 = 1.864;
    p.g1 = 2.0;
    p.g2 = 2.0;
    return p;
}

}  // namespace

TEST_SUITE_BEGIN("core-model");

TEST_CASE("unit bridge eps <-> frequency") {
    CHECK(to_frequency(0.0) == 0.0);
    CHECK(to_frequency(4.135667696) == doctest::Approx(1.0).epsilon(1e-15));
    // 0.6 meV operating point
    CHECK(to_frequency(600.0) ==
          doctest::Approx(600.0 / 4.135667696).epsilon(1e-15));
    for (double e : {-123.4, 0.5, 99.0})
        CHECK(to_energy_uev(to_frequency(e)) == doctest::Approx(e).epsilon(1e-15));
}

TEST_CASE("tunnel coupling model") {
    DeviceParams p = base_params();
    CHECK(tunnel_coupling(p, 0.0) == doctest::Approx(1.864));
    p.tc0 = 0.37;
    CHECK(tunnel_coupling(p, 0.0) == doctest::Approx(0.37));

    p = base_params();
    p.tc_decay = 300.0;
    CHECK(tunnel_coupling(p, 300.0) ==
          doctest::Approx(1.864 / std::exp(1.0)).epsilon(1e-12));
    CHECK(tunnel_coupling(p, 300.0) == doctest::Approx(0.6858).epsilon(1e-3));
    // clamped below zero detuning
    CHECK(tunnel_coupling(p, -200.0) == doctest::Approx(1.864));
}

TEST_CASE("mixing angle") {
    CHECK(mixing_angle(1.864, 0.0) == doctest::Approx(-M_PI / 2).epsilon(1e-14));
    CHECK(mixing_angle(1e-12, 50.0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(mixing_angle(1e-12, 50.0) < 0.0);
    // eps such that eps/h = 2 tc
    const double eps = to_energy_uev(2 * 1.864);
    CHECK(mixing_angle(1.864, eps) == doctest::Approx(-M_PI / 4).epsilon(1e-14));
    // deep (0,2) side approaches -pi
    CHECK(mixing_angle(1.864, -5000.0) == doctest::Approx(-M_PI).epsilon(1e-2));
}

TEST_CASE("exchange energy closed form and asymptote") {
    DeviceParams p = base_params();
    CHECK(exchange_j(p, 0.0) == doctest::Approx(p.tc0).epsilon(1e-14));

    const double f = 100.0;  // GHz
    const double eps = to_energy_uev(f);
    const double j = exchange_j(p, eps);
    const double exact = std::hypot(f / 2, p.tc0) - f / 2;
    CHECK(j == doctest::Approx(exact).epsilon(1e-12));
    CHECK(std::abs(j - p.tc0 * p.tc0 / f) / j < 1e-3);

    // monotone decreasing on a grid (constant t_c)
    double prev = exchange_j(p, -50.0);
    for (double e = -40; e <= 400; e += 10) {
        const double cur = exchange_j(p, e);
        CHECK(cur < prev);
        prev = cur;
    }

    // asymptotic-exchange invariant: |J f / tc^2 - 1| < 0.5% for f >= 20 tc
    for (double mult : {20.0, 50.0, 200.0}) {
        const double ff = mult * p.tc0;
        const double jj = exchange_j(p, to_energy_uev(ff));
        CHECK(std::abs(jj * ff / (p.tc0 * p.tc0) - 1.0) < 5e-3);
    }
}

TEST_CASE("delta(theta): coupling through the (1,1) channel") {
    DeviceParams p = base_params();
    p.delta11 = 16.72;  // MHz
    CHECK(delta_theta(p, 4e6) == doctest::Approx(16.72).epsilon(1e-4));
    CHECK(delta_theta(p, 0.0) ==
          doctest::Approx(16.72 / std::sqrt(2.0)).epsilon(1e-12));
    p.delta11 = 0.0;
    for (double e : {-100.0, 0.0, 50.0, 400.0}) CHECK(delta_theta(p, e) == 0.0);
}

TEST_CASE("five-level Hamiltonian structure") {
    DeviceParams p = base_params();
    p.delta11 = 0.0;
    p.b0z = 0.0;

    SUBCASE("block structure at zero field and zero delta") {
        const Hamiltonian h = build_h5(p, 0.0);
        REQUIRE(h.dim == 5);
        CHECK(h.basis == std::vector<std::string>{"T+", "T0", "T-", "(1,1)S",
                                                  "(0,2)S"});
        // triplets decoupled (g1 == g2 -> dEz = 0)
        for (int t : {0, 1, 2})
            for (int s : {3, 4}) CHECK(std::abs(h.entries(t, s)) == 0.0);
        // singlet 2x2 block has gap 2 tc at eps = 0
        const EigenSystem es = eigensystem(h);
        CHECK(es.values(4) - es.values(0) == doctest::Approx(2 * p.tc0));
    }

    SUBCASE("Zeeman scales") {
        p.b0z = 150.0;
        CHECK(p.zeeman_mean() == doctest::Approx(4.19887).epsilon(1e-5));
        p.g2 = 2.0 + 0.43e-3;
        p.g1 = 2.0;
        // dEz = 0.903 MHz at 150 mT for dg = 0.43e-3
        CHECK(p.zeeman_diff() * 1e3 == doctest::Approx(0.903).epsilon(2e-3));
        const Hamiltonian h = build_h5(p, 40.0);
        // half-convention element between T0 and (1,1)S
        CHECK(h.entries(1, 3).real() ==
              doctest::Approx(0.5 * p.zeeman_diff()).epsilon(1e-12));
    }

    SUBCASE("hermiticity over random parameter draws") {
        Rng rng(7);
        for (int i = 0; i < 50; ++i) {
            DeviceParams q = base_params();
            q.tc0 = 0.3 + 2 * rng.uniform();
            q.tc_decay = 50 + 400 * rng.uniform();
            q.delta11 = 30 * rng.uniform();
            q.g1 = 1.9 + 0.2 * rng.uniform();
            q.g2 = 1.9 + 0.2 * rng.uniform();
            q.b0z = -200 + 400 * rng.uniform();
            const double eps = -300 + 900 * rng.uniform();
            const Hamiltonian h = build_h5(q, eps);
            CHECK((h.entries - h.entries.adjoint()).cwiseAbs().maxCoeff() <=
                  1e-12);
            const Hamiltonian h4 = effective_h4(q, eps);
            CHECK((h4.entries - h4.entries.adjoint()).cwiseAbs().maxCoeff() <=
                  1e-12);
        }
    }
}

TEST_CASE("effective four-level model vs five-level gaps") {
    DeviceParams p = base_params();
    p.delta11 = 2.0;  // MHz, well below tc
    p.g1 = 2.0;
    p.g2 = 2.0 + 0.43e-3;
    p.b0z = 150.0;

    SUBCASE("diagonal when decoupled") {
        DeviceParams q = p;
        q.delta11 = 0.0;
        q.g2 = q.g1;
        const Hamiltonian h4 = effective_h4(q, 60.0);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i != j) CHECK(std::abs(h4.entries(i, j)) == 0.0);
        const EigenSystem es = eigensystem(h4);
        Eigen::Vector4d diag = h4.entries.diagonal().real();
        std::sort(diag.data(), diag.data() + 4);
        for (int i = 0; i < 4; ++i)
            CHECK(es.values(i) == doctest::Approx(diag(i)).epsilon(1e-14));
    }

    SUBCASE("lowest gaps agree within 1% when J < tc/5") {
        for (double eps : {to_energy_uev(5.0 * p.tc0), to_energy_uev(8.0 * p.tc0),
                           to_energy_uev(15.0 * p.tc0)}) {
            REQUIRE(exchange_j(p, eps) < p.tc0 / 5.0);
            const EigenSystem e5 = eigensystem(build_h5(p, eps));
            const EigenSystem e4 = eigensystem(effective_h4(p, eps));
            for (int k = 0; k < 2; ++k) {
                const double g5 = e5.values(k + 1) - e5.values(k);
                const double g4 = e4.values(k + 1) - e4.values(k);
                CHECK(std::abs(g4 - g5) <= std::max(0.01 * g5, 1e-6));
            }
        }
    }

    SUBCASE("S/T0 block matches the 2x2 closed form at high field") {
        const double eps = 120.0;
        const Hamiltonian h4 = effective_h4(p, eps);
        const EigenSystem es = eigensystem(h4);
        const double j = exchange_j(p, eps);
        const double th = mixing_angle(tunnel_coupling(p, eps), eps);
        const double c2 = std::cos(th / 2) * std::cos(th / 2);
        const double closed = std::hypot(j, p.zeeman_diff() * c2);
        // the m=0 pair are the two middle eigenvalues at this field
        double best = 1e9;
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b)
                best = std::min(best,
                                std::abs((es.values(b) - es.values(a)) - closed));
        CHECK(best < 1e-4);
    }
}

TEST_CASE("eigensystem contract") {
    SUBCASE("diagonal matrix") {
        Hamiltonian h;
        h.dim = 5;
        h.entries = Eigen::MatrixXcd::Zero(5, 5);
        h.basis = {"T+", "T0", "T-", "(1,1)S", "(0,2)S"};
        for (int i = 0; i < 5; ++i) h.entries(i, i) = 4 - i;
        const EigenSystem es = eigensystem(h);
        for (int i = 0; i < 5; ++i) CHECK(es.values(i) == doctest::Approx(i));
        for (int i = 0; i < 5; ++i) {
            int imax;
            es.vectors.col(i).cwiseAbs().maxCoeff(&imax);
            CHECK(es.vectors(imax, i).real() == doctest::Approx(1.0));
            CHECK(es.vectors(imax, i).imag() == doctest::Approx(0.0));
        }
    }

    SUBCASE("2x2 closed form") {
        Hamiltonian h;
        h.dim = 4;
        h.entries = Eigen::MatrixXcd::Zero(2, 2);
        h.basis = {"a", "b"};
        const double a = 1.3, t = 0.7;
        h.entries << -a, t, t, a;
        const EigenSystem es = eigensystem(h);
        CHECK(es.values(0) == doctest::Approx(-std::hypot(a, t)).epsilon(1e-14));
        CHECK(es.values(1) == doctest::Approx(std::hypot(a, t)).epsilon(1e-14));
    }

    SUBCASE("random Hermitian 5x5: residual and orthonormality") {
        Rng rng(11);
        for (int trial = 0; trial < 25; ++trial) {
            Matrix5cd h;
            for (int i = 0; i < 5; ++i) {
                h(i, i) = 4 * (rng.uniform() - 0.5);
                for (int j = i + 1; j < 5; ++j) {
                    const std::complex<double> z(rng.uniform() - 0.5,
                                                 rng.uniform() - 0.5);
                    h(i, j) = z;
                    h(j, i) = std::conj(z);
                }
            }
            const EigenSystem es = eigensystem5(h);
            for (int k = 0; k < 5; ++k) {
                const Vector5cd r =
                    h * es.vectors.col(k) - es.values(k) * es.vectors.col(k);
                CHECK(r.norm() < 1e-9);
            }
            const Matrix5cd gram =
                es.vectors.adjoint() * es.vectors - Matrix5cd::Identity();
            CHECK(gram.cwiseAbs().maxCoeff() < 1e-10);
            for (int k = 1; k < 5; ++k) CHECK(es.values(k) >= es.values(k - 1));
        }
    }

    SUBCASE("non-Hermitian input is a model error") {
        Hamiltonian h;
        h.dim = 4;
        h.entries = Eigen::MatrixXcd::Zero(2, 2);
        h.entries(0, 1) = 1.0;
        h.entries(1, 0) = 0.5;
        h.basis = {"a", "b"};
        CHECK_THROWS_AS((void)eigensystem(h), ModelError);
    }
}

TEST_CASE("anti-crossing gap equals 2|Delta| at the S/T- crossing") {
    DeviceParams p = base_params();
    p.tc0 = 0.25;
    p.delta11 = 8.0;  // MHz
    p.b0z = 7.0;      // Ez ~ 0.196 GHz < tc
    const auto estar = st_crossing_eps(p);
    REQUIRE(estar.has_value());

    // scan the eigen-gap minimum near the crossing
    double gmin = 1e18, eps_at_min = 0;
    for (double e = *estar - 8.0; e <= *estar + 8.0; e += 0.01) {
        const double g = eigen_gap(p, e, GapKind::S_Tminus);
        if (g < gmin) {
            gmin = g;
            eps_at_min = e;
        }
    }
    const double dth = delta_theta(p, *estar) * 1e-3;  // GHz
    CHECK(gmin == doctest::Approx(2 * dth).epsilon(0.01));

    // funnel locus: Ez = J(eps) at the minimum-gap detuning, to O(Delta)
    CHECK(std::abs(exchange_j(p, eps_at_min) - std::abs(p.zeeman_mean())) <
          2 * dth);
}

TEST_CASE("device parameter invariants") {
    DeviceParams p = base_params();
    p.tc0 = -1.0;
    CHECK_THROWS_WITH_AS(p.validate(), "tc0 must be > 0", ModelError);
    p = base_params();
    p.g2 = 0.0;
    CHECK_THROWS_AS(p.validate(), ModelError);
    p = base_params();
    p.sigma_eps = -2.0;
    CHECK_THROWS_AS(p.validate(), ModelError);
    p = base_params();
    p.sensor.sigma_current = 0.0;
    CHECK_THROWS_AS(p.validate(), ModelError);
}

TEST_CASE("lz probability helpers") {
    // velocity at which the diabatic survival is 1/2, for 196 kHz coupling
    const double nu = lz_velocity_for_probability(196e3, 0.5);
    CHECK(nu == doctest::Approx(2.19e12).epsilon(5e-3));
    CHECK(lz_diabatic_probability(196e3, nu) == doctest::Approx(0.5).epsilon(1e-12));
    // ratio law between the two reported couplings
    const double nu2 = lz_velocity_for_probability(16.72e6, 0.5);
    CHECK(nu2 / nu == doctest::Approx(std::pow(16.72e6 / 196e3, 2)).epsilon(1e-12));
}

TEST_SUITE_END();
