#include "qdsim/model.hpp"

#include <algorithm>
#include <cmath>

#include "qdsim/errors.hpp"

namespace qdsim {

void SensorParams::validate() const {
    if (!(sigma_current > 0)) throw ModelError("sensor: sigma_current must be > 0");
    if (latch_success < 0 || latch_success > 1)
        throw ModelError("sensor: latch_success must be in [0,1]");
    if (prep_error < 0 || prep_error > 1)
        throw ModelError("sensor: prep_error must be in [0,1]");
}

void DeviceParams::validate() const {
    if (!(tc0 > 0)) throw ModelError("tc0 must be > 0");
    if (!(tc_decay > 0)) throw ModelError("tc_decay must be > 0 (or infinite)");
    if (!(g1 > 0)) throw ModelError("g1 must be > 0");
    if (!(g2 > 0)) throw ModelError("g2 must be > 0");
    if (delta11 < 0) throw ModelError("delta11 must be >= 0");
    if (sigma_eps < 0) throw ModelError("sigma_eps must be >= 0");
    if (sigma_delta < 0) throw ModelError("sigma_delta must be >= 0");
    if (!(e_charging > 0)) throw ModelError("e_charging must be > 0");
    if (valley_frac < 0) throw ModelError("valley_frac must be >= 0");
    sensor.validate();
}

double tunnel_coupling(const DeviceParams& p, double eps_uev) {
    if (std::isinf(p.tc_decay)) return p.tc0;
    return p.tc0 * std::exp(-std::max(eps_uev, 0.0) / p.tc_decay);
}

double mixing_angle(double tc_ghz, double eps_uev) {
    return -std::atan2(2.0 * tc_ghz, to_frequency(eps_uev));
}

double exchange_j(const DeviceParams& p, double eps_uev) {
    const double f = to_frequency(eps_uev + p.eps_offset);
    const double t = tunnel_coupling(p, eps_uev + p.eps_offset);
    const double root = std::hypot(0.5 * f, t);
    // Rationalized branch avoids cancellation for large positive f.
    if (f > 0) return t * t / (root + 0.5 * f);
    return root - 0.5 * f;
}

double delta_theta(const DeviceParams& p, double eps_uev) {
    const double eps = eps_uev + p.eps_offset;
    const double theta = mixing_angle(tunnel_coupling(p, eps), eps);
    return (p.delta11 + p.delta_offset) * std::cos(0.5 * theta);
}

Matrix5cd h5_matrix(const DeviceParams& p, double eps_uev) {
    const double eps = eps_uev + p.eps_offset;
    const double f = to_frequency(eps);
    const double tc = tunnel_coupling(p, eps);
    const double ez = p.zeeman_mean();
    const double dez = p.zeeman_diff();
    const double d11 = p.delta11_ghz();

    Matrix5cd h = Matrix5cd::Zero();
    h(kTplus, kTplus) = -0.5 * f + ez;
    h(kT0, kT0) = -0.5 * f;
    h(kTminus, kTminus) = -0.5 * f - ez;
    h(kS11, kS11) = -0.5 * f;
    h(kS02, kS02) = 0.5 * f;

    h(kS11, kS02) = tc;
    h(kS02, kS11) = tc;
    // Half convention: the element is dEz/2, so the observable splitting of
    // the two Sz=0 (1,1) eigenstates deep in (1,1) equals dEz.
    h(kT0, kS11) = 0.5 * dez;
    h(kS11, kT0) = 0.5 * dez;
    h(kTplus, kS11) = d11;
    h(kS11, kTplus) = d11;
    h(kTminus, kS11) = -d11;
    h(kS11, kTminus) = -d11;
    return h;
}

Hamiltonian build_h5(const DeviceParams& p, double eps_uev) {
    Hamiltonian h;
    h.dim = 5;
    h.entries = h5_matrix(p, eps_uev);
    h.basis = {"T+", "T0", "T-", "(1,1)S", "(0,2)S"};
    return h;
}

Hamiltonian effective_h4(const DeviceParams& p, double eps_uev, T0Coupling form) {
    const double eps = eps_uev + p.eps_offset;
    const double f = to_frequency(eps);
    const double tc = tunnel_coupling(p, eps);
    const double theta = mixing_angle(tc, eps);
    const double j = exchange_j(p, eps_uev);
    const double ez = p.zeeman_mean();
    const double dez = p.zeeman_diff();
    const double dth = delta_theta(p, eps_uev) * 1e-3;  // GHz

    const double c = std::cos(0.5 * theta);
    const double t0_elem = (form == T0Coupling::h5_weight)
                               ? 0.5 * dez * c * c
                               : dez * std::cos(theta);

    Hamiltonian h;
    h.dim = 4;
    h.entries = Eigen::MatrixXcd::Zero(4, 4);
    h.entries(0, 0) = ez - 0.5 * f;
    h.entries(1, 1) = -0.5 * f;
    h.entries(2, 2) = -ez - 0.5 * f;
    h.entries(3, 3) = -0.5 * f - j;
    h.entries(0, 3) = dth;
    h.entries(3, 0) = dth;
    h.entries(1, 3) = t0_elem;
    h.entries(3, 1) = t0_elem;
    h.entries(2, 3) = -dth;
    h.entries(3, 2) = -dth;
    h.basis = {"T+", "T0", "T-", "S_H"};
    return h;
}

namespace {

// Deterministic phase fix: largest-magnitude component real positive.
void fix_phases(Eigen::MatrixXcd& vecs) {
    for (int c = 0; c < vecs.cols(); ++c) {
        int imax = 0;
        double amax = -1;
        for (int r = 0; r < vecs.rows(); ++r) {
            const double a = std::norm(vecs(r, c));
            if (a > amax + 1e-30) {
                amax = a;
                imax = r;
            }
        }
        const std::complex<double> z = vecs(imax, c);
        const double az = std::abs(z);
        if (az > 0) vecs.col(c) *= std::conj(z) / az;
    }
}

}  // namespace

EigenSystem eigensystem(const Hamiltonian& h) {
    const double herm = (h.entries - h.entries.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12)
        throw ModelError("eigensystem: input is not Hermitian (max deviation " +
                         std::to_string(herm) + " GHz)");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.entries);
    if (es.info() != Eigen::Success)
        throw NumericError("eigensystem: eigensolver failed to converge");
    EigenSystem out;
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    fix_phases(out.vectors);
    return out;
}

EigenSystem eigensystem5(const Matrix5cd& h) {
    Eigen::SelfAdjointEigenSolver<Matrix5cd> es(h);
    EigenSystem out;
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    fix_phases(out.vectors);
    return out;
}

namespace {

Matrix3cd m0_block(const DeviceParams& p, double eps_uev) {
    const Matrix5cd h = h5_matrix(p, eps_uev);
    Matrix3cd b;
    const int idx[3] = {kT0, kS11, kS02};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = h(idx[i], idx[j]);
    return b;
}

Vector5cd m0_state(const DeviceParams& p, double eps_uev, int which) {
    Eigen::SelfAdjointEigenSolver<Matrix3cd> es(m0_block(p, eps_uev));
    Eigen::Vector3cd v = es.eigenvectors().col(which);
    int imax = 0;
    for (int r = 1; r < 3; ++r)
        if (std::norm(v(r)) > std::norm(v(imax))) imax = r;
    v *= std::conj(v(imax)) / std::abs(v(imax));
    Vector5cd out = Vector5cd::Zero();
    out(kT0) = v(0);
    out(kS11) = v(1);
    out(kS02) = v(2);
    return out;
}

}  // namespace

Vector5cd m0_ground_state(const DeviceParams& p, double eps_uev) {
    return m0_state(p, eps_uev, 0);
}

Vector5cd m0_excited_state(const DeviceParams& p, double eps_uev) {
    return m0_state(p, eps_uev, 1);
}

std::optional<double> st_crossing_eps(const DeviceParams& p, double lo_uev,
                                      double hi_uev) {
    const double ez = std::abs(p.zeeman_mean());
    if (ez <= 0) return std::nullopt;
    auto s = [&](double e) { return exchange_j(p, e) - ez; };
    double lo = lo_uev, hi = hi_uev;
    if (s(lo) <= 0 || s(hi) >= 0) return std::nullopt;  // J monotone decreasing
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (s(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

// Index of the eigenstate with maximal overlap against a reference vector.
int lineage_index(const EigenSystem& es, const Vector5cd& ref) {
    int best = 0;
    double bmax = -1;
    for (int c = 0; c < 5; ++c) {
        const double ov = std::norm(ref.dot(es.vectors.col(c)));
        if (ov > bmax) {
            bmax = ov;
            best = c;
        }
    }
    return best;
}

}  // namespace

double eigen_gap(const DeviceParams& p, double eps_uev, GapKind which) {
    const EigenSystem es = eigensystem5(h5_matrix(p, eps_uev));
    const Vector5cd sh = m0_ground_state(p, eps_uev);
    const int is = lineage_index(es, sh);
    Vector5cd ref = Vector5cd::Zero();
    if (which == GapKind::S_T0) {
        ref = m0_excited_state(p, eps_uev);
    } else {
        ref((p.zeeman_mean() >= 0) ? kTminus : kTplus) = 1.0;
    }
    int it = lineage_index(es, ref);
    if (it == is) it = (is == 0) ? 1 : is - 1;  // hybridized at the crossing
    return std::abs(es.values(is) - es.values(it));
}

double lz_diabatic_probability(double f_delta_hz, double nu_hz_per_s) {
    const double x = 4.0 * M_PI * M_PI * f_delta_hz * f_delta_hz / nu_hz_per_s;
    return std::exp(-x);
}

double lz_velocity_for_probability(double f_delta_hz, double p) {
    if (!(p > 0 && p < 1)) throw ModelError("lz_velocity_for_probability: p must be in (0,1)");
    return 4.0 * M_PI * M_PI * f_delta_hz * f_delta_hz / (-std::log(p));
}

}  // namespace qdsim
