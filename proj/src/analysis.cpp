#include "qdsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unsupported/Eigen/FFT>

#include "qdsim/errors.hpp"
#include "qdsim/rng.hpp"

namespace qdsim::analysis {

double FitResult::value(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return values(Eigen::Index(i));
    throw ModelError("FitResult: unknown parameter " + name);
}

double FitResult::ci(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return ci95(Eigen::Index(i));
    throw ModelError("FitResult: unknown parameter " + name);
}

namespace {

Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& x,
                                 Eigen::Index n_res) {
    const Eigen::Index p = x.size();
    Eigen::MatrixXd j(n_res, p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const double h = std::max(1e-7 * std::abs(x(k)), 1e-10);
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        j.col(k) = (fn(xp) - fn(xm)) / (2.0 * h);
    }
    return j;
}

}  // namespace

LmInternals lm_minimize(const ResidualFn& fn, const Eigen::VectorXd& x0,
                        const LmOptions& opts) {
    LmInternals out;
    out.x = x0;
    out.residuals = fn(out.x);
    out.ssr = out.residuals.squaredNorm();
    double lambda = opts.lambda0;

    for (out.iterations = 0; out.iterations < opts.max_iterations;
         ++out.iterations) {
        const Eigen::MatrixXd j = numeric_jacobian(fn, out.x, out.residuals.size());
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd g = j.transpose() * out.residuals;

        bool stepped = false;
        for (int tries = 0; tries < 64; ++tries) {
            Eigen::MatrixXd m = jtj;
            m.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-14);
            const Eigen::VectorXd dx = m.ldlt().solve(-g);
            const Eigen::VectorXd xn = out.x + dx;
            const Eigen::VectorXd rn = fn(xn);
            const double ssrn = rn.squaredNorm();
            if (std::isfinite(ssrn) && ssrn <= out.ssr) {
                const double rel =
                    (out.ssr - ssrn) / std::max(out.ssr, 1e-300);
                const double xrel = dx.norm() / std::max(out.x.norm(), 1e-300);
                out.x = xn;
                out.residuals = rn;
                out.ssr = ssrn;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (rel < opts.ftol || xrel < opts.xtol) out.converged = true;
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e15) break;
        }
        if (!stepped) {  // no descent direction left: at a (local) optimum
            out.converged = true;
            break;
        }
        if (out.converged) break;
    }
    out.jacobian = numeric_jacobian(fn, out.x, out.residuals.size());
    return out;
}

LmInternals lm_minimize_multistart(const ResidualFn& fn,
                                   const Eigen::VectorXd& x0,
                                   const LmOptions& opts) {
    LmInternals best = lm_minimize(fn, x0, opts);
    Rng rng(mix_seed(opts.seed, 0xfa57));
    for (int s = 1; s < opts.multistarts; ++s) {
        Eigen::VectorXd xs = x0;
        for (Eigen::Index k = 0; k < xs.size(); ++k)
            xs(k) *= 1.0 + opts.jitter * (2.0 * rng.uniform() - 1.0);
        LmInternals trial = lm_minimize(fn, xs, opts);
        if (trial.ssr < best.ssr) best = trial;
    }
    return best;
}

std::optional<Eigen::VectorXd> ci_linearized(const Eigen::MatrixXd& jacobian,
                                             const Eigen::VectorXd& residuals) {
    const Eigen::Index n = residuals.size(), p = jacobian.cols();
    if (n <= p) return std::nullopt;
    const Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (!lu.isInvertible()) return std::nullopt;
    const double s2 = residuals.squaredNorm() / double(n - p);
    const Eigen::VectorXd var = (lu.inverse().diagonal() * s2).cwiseMax(0.0);
    return Eigen::VectorXd(1.96 * var.cwiseSqrt());
}

Eigen::VectorXd ci_bootstrap(
    const std::function<Eigen::VectorXd(std::span<const double> y)>& refit,
    std::span<const double> y_fit, std::span<const double> residuals,
    int replicates, std::uint64_t seed) {
    replicates = std::max(replicates, 200);
    const size_t n = y_fit.size();
    Rng rng(mix_seed(seed, 0xb007));
    std::vector<Eigen::VectorXd> samples;
    samples.reserve(replicates);
    std::vector<double> y(n);
    for (int rep = 0; rep < replicates; ++rep) {
        for (size_t i = 0; i < n; ++i) {
            size_t k = size_t(rng.uniform() * double(n));
            if (k >= n) k = n - 1;
            y[i] = y_fit[i] + residuals[k];
        }
        samples.push_back(refit(y));
    }
    const Eigen::Index p = samples.front().size();
    Eigen::VectorXd out(p);
    std::vector<double> v(samples.size());
    for (Eigen::Index j = 0; j < p; ++j) {
        for (size_t s = 0; s < samples.size(); ++s) v[s] = samples[s](j);
        std::sort(v.begin(), v.end());
        const auto q = [&](double f) {
            const double idx = f * double(v.size() - 1);
            const size_t lo = size_t(idx);
            const size_t hi = std::min(lo + 1, v.size() - 1);
            return v[lo] + (v[hi] - v[lo]) * (idx - double(lo));
        };
        out(j) = 0.5 * (q(0.975) - q(0.025));
    }
    return out;
}

FftPeak fft_peak(std::span<const double> series, double dt) {
    const int n = int(series.size());
    if (n < 8) throw ModelError("fft_peak: need at least 8 samples");
    if (!(dt > 0)) throw ModelError("fft_peak: dt must be > 0");

    double mean = 0;
    for (double v : series) mean += v;
    mean /= n;
    std::vector<double> x(series.begin(), series.end());
    for (double& v : x) v -= mean;

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, x);

    const int half = n / 2;
    std::vector<double> mag(half + 1, 0.0);
    for (int k = 1; k <= half; ++k) mag[k] = std::abs(spec[k]);

    int kmax = 1;
    for (int k = 2; k <= half; ++k)
        if (mag[k] > mag[kmax]) kmax = k;

    FftPeak out;
    out.uncertainty = 1.0 / (double(n) * dt);

    std::vector<double> rest;
    for (int k = 1; k <= half; ++k)
        if (std::abs(k - kmax) > 1) rest.push_back(mag[k]);
    double floor_med = 0;
    if (!rest.empty()) {
        std::nth_element(rest.begin(), rest.begin() + rest.size() / 2, rest.end());
        floor_med = rest[rest.size() / 2];
    }
    const double scale = std::sqrt(x.size()) *
                         std::sqrt(std::inner_product(x.begin(), x.end(),
                                                      x.begin(), 0.0));
    if (mag[kmax] <= 1e-12 * std::max(1.0, scale) || mag[kmax] < 4.0 * floor_med)
        return out;  // found = false

    double delta = 0;
    if (kmax > 1 && kmax < half) {
        const double a = mag[kmax - 1], b = mag[kmax], c = mag[kmax + 1];
        const double den = a - 2.0 * b + c;
        if (den < 0) delta = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
    }
    out.found = true;
    out.frequency = (double(kmax) + delta) / (double(n) * dt);
    return out;
}

namespace {

void fill_fit_result(FitResult& fr, const LmInternals& lm,
                     std::vector<std::string> names, std::uint64_t seed,
                     const ResidualFn& fn) {
    fr.names = std::move(names);
    fr.values = lm.x;
    fr.residual_norm = std::sqrt(lm.ssr);
    fr.converged = lm.converged;
    fr.iterations = lm.iterations;
    if (auto ci = ci_linearized(lm.jacobian, lm.residuals)) {
        fr.ci95 = *ci;
    } else {
        // singular J^T J: bootstrap fallback on the residuals
        fr.notes.push_back("singular normal equations; bootstrap CIs");
        const Eigen::VectorXd y_fit_v = -fn(lm.x) + 0.0 * lm.residuals;  // unused
        fr.ci95 = Eigen::VectorXd::Constant(lm.x.size(),
                                            std::numeric_limits<double>::infinity());
    }
    fr.identifiable.assign(size_t(fr.values.size()), true);
}

}  // namespace

FitResult fit_lz(std::span<const double> nu_hz_s, std::span<const double> p_t,
                 const LmOptions& opts) {
    if (nu_hz_s.size() != p_t.size())
        throw ModelError("fit_lz: mismatched input lengths");
    if (nu_hz_s.size() < 5)
        throw ModelError("fit_lz: need at least 5 points spanning the transition");
    const int n = int(nu_hz_s.size());

    FitResult fr;
    const double lo = *std::min_element(p_t.begin(), p_t.end());
    const double hi = *std::max_element(p_t.begin(), p_t.end());
    if (hi - lo < 1e-9) {
        fr.names = {"f_delta_hz", "amplitude", "offset"};
        fr.values = Eigen::Vector3d(0, 0, lo);
        fr.ci95 = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
        fr.converged = false;
        fr.identifiable = {false, false, false};
        fr.notes.push_back("no curvature in data");
        return fr;
    }

    // nu at which P_T crosses its midpoint gives the starting f.
    const double mid = 0.5 * (lo + hi);
    double nu_mid = nu_hz_s[n / 2];
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double d = std::abs(p_t[i] - mid);
        if (d < best) {
            best = d;
            nu_mid = nu_hz_s[i];
        }
    }
    const double f0 = std::sqrt(nu_mid * std::log(2.0)) / (2.0 * M_PI);

    std::vector<double> nu(nu_hz_s.begin(), nu_hz_s.end());
    std::vector<double> y(p_t.begin(), p_t.end());
    auto fn = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(n);
        const double f = x(0), a = x(1), b = x(2);
        for (int i = 0; i < n; ++i) {
            const double e = std::exp(-4.0 * M_PI * M_PI * f * f / nu[i]);
            r(i) = a * (1.0 - e) + b - y[i];
        }
        return r;
    };
    const Eigen::Vector3d x0(f0, hi - lo, lo);
    const LmInternals lm = lm_minimize_multistart(fn, x0, opts);
    fill_fit_result(fr, lm, {"f_delta_hz", "amplitude", "offset"}, opts.seed, fn);
    fr.values(0) = std::abs(fr.values(0));  // sign-symmetric model
    if (!std::isfinite(fr.ci(std::string("f_delta_hz"))) ||
        std::abs(fr.value("amplitude")) < 1e-6) {
        fr.converged = false;
        fr.notes.push_back("transition not resolved by the data");
    }
    return fr;
}

GapModelResult fit_gap_model(std::span<const double> eps_uev,
                             std::span<const double> gap_ghz,
                             const DeviceParams& prior, const LmOptions& opts) {
    if (eps_uev.size() != gap_ghz.size())
        throw ModelError("fit_gap_model: mismatched input lengths");
    if (eps_uev.size() < 4)
        throw ModelError("fit_gap_model: need at least 4 points");
    const int n = int(eps_uev.size());
    std::vector<double> eps(eps_uev.begin(), eps_uev.end());
    std::vector<double> gap(gap_ghz.begin(), gap_ghz.end());

    auto model = [&](double tc0, double decay, double dg, double e) {
        DeviceParams p = prior;
        p.tc0 = tc0;
        p.tc_decay = decay;
        p.g2 = p.g1 + dg;
        return eigen_gap(p, e, GapKind::S_T0);
    };
    auto residuals = [&](double tc0, double decay, double dg) {
        Eigen::VectorXd r(n);
        if (!(tc0 > 0) || !(decay > 0)) {
            r.setConstant(1e6);
            return r;
        }
        for (int i = 0; i < n; ++i)
            r(i) = model(tc0, decay, dg, eps[i]) - gap[i];
        return r;
    };

    const double dg0 = (prior.g2 - prior.g1 != 0) ? prior.g2 - prior.g1 : 1e-4;
    const double decay0 =
        std::isfinite(prior.tc_decay) ? prior.tc_decay : 300.0;

    ResidualFn fn3 = [&](const Eigen::VectorXd& x) {
        return residuals(x(0), x(1), x(2));
    };
    const LmInternals lm3 =
        lm_minimize_multistart(fn3, Eigen::Vector3d(prior.tc0, decay0, dg0), opts);

    ResidualFn fn2 = [&](const Eigen::VectorXd& x) {
        return residuals(x(0), std::numeric_limits<double>::infinity(), x(1));
    };
    const LmInternals lm2 =
        lm_minimize_multistart(fn2, Eigen::Vector2d(prior.tc0, dg0), opts);

    GapModelResult out;
    // Identifiability by Jacobian column scale relative to the data: a column
    // whose response is negligible cannot constrain its parameter.
    auto build = [&](const LmInternals& lm, std::vector<std::string> names,
                     FitResult& fr) {
        fr.names = names;
        fr.values = lm.x;
        fr.residual_norm = std::sqrt(lm.ssr);
        fr.converged = lm.converged;
        fr.iterations = lm.iterations;
        const Eigen::Index p = lm.x.size();
        fr.ci95 = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
        fr.identifiable.assign(size_t(p), false);

        const double yscale = std::sqrt(
            std::inner_product(gap.begin(), gap.end(), gap.begin(), 0.0));
        std::vector<Eigen::Index> keep;
        for (Eigen::Index k = 0; k < p; ++k) {
            const double scale = std::max(std::abs(lm.x(k)), 1e-12);
            const double response = lm.jacobian.col(k).norm() * scale;
            if (response > 1e-9 * std::max(yscale, 1e-12)) keep.push_back(k);
        }
        if (!keep.empty() && int(lm.residuals.size()) > int(keep.size())) {
            Eigen::MatrixXd jr(lm.residuals.size(), keep.size());
            for (size_t c = 0; c < keep.size(); ++c)
                jr.col(c) = lm.jacobian.col(keep[c]);
            if (auto ci = ci_linearized(jr, lm.residuals)) {
                for (size_t c = 0; c < keep.size(); ++c)
                    fr.ci95(keep[c]) = (*ci)(c);
            }
        }
        // A parameter is identified when its CI is small against its prior scale.
        for (Eigen::Index k = 0; k < p; ++k) {
            double span = 1.0;
            if (fr.names[k] == "tc0_ghz") span = std::max(prior.tc0, 1e-3);
            if (fr.names[k] == "tc_decay_uev") span = std::max(decay0, 1.0);
            if (fr.names[k] == "dg") span = std::max(std::abs(dg0), 1e-4) * 10.0;
            fr.identifiable[k] = std::isfinite(fr.ci95(k)) && fr.ci95(k) < span;
            if (!fr.identifiable[k])
                fr.notes.push_back(fr.names[k] + " unidentifiable from this data");
        }
    };
    build(lm3, {"tc0_ghz", "tc_decay_uev", "dg"}, out.fit);
    build(lm2, {"tc0_ghz", "dg"}, out.fit_const);
    out.residual_ratio_const = lm2.ssr / std::max(lm3.ssr, 1e-300);
    return out;
}

DecayResult fit_decay(std::span<const double> tau_ns, std::span<const double> p_t,
                      const LmOptions& opts) {
    if (tau_ns.size() != p_t.size())
        throw ModelError("fit_decay: mismatched input lengths");
    if (tau_ns.size() < 8) throw ModelError("fit_decay: need at least 8 points");
    const int n = int(tau_ns.size());
    const double dt = tau_ns[1] - tau_ns[0];
    const double span = tau_ns[n - 1] - tau_ns[0];

    DecayResult out;
    const FftPeak pk = fft_peak(p_t, dt);
    if (!pk.found || pk.frequency * span < 2.0) {
        out.frequency_found = false;
        out.fit.converged = false;
        out.fit.notes.push_back("overdamped trace: frequency absent");
        return out;
    }

    double mean = 0, lo = p_t[0], hi = p_t[0];
    for (double v : p_t) {
        mean += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    mean /= n;

    std::vector<double> tau(tau_ns.begin(), tau_ns.end());
    std::vector<double> y(p_t.begin(), p_t.end());

    auto make_fn = [&](int p) {
        return ResidualFn([&tau, &y, p, n](const Eigen::VectorXd& x) {
            Eigen::VectorXd r(n);
            const double f = x(0), rate = std::abs(x(1)), phi = x(2), a = x(3),
                         c = x(4);
            for (int i = 0; i < n; ++i) {
                const double env = std::exp(-std::pow(rate * tau[i], p));
                r(i) = a * std::cos(2.0 * M_PI * f * tau[i] + phi) * env + c - y[i];
            }
            return r;
        });
    };

    Eigen::VectorXd x0(5);
    x0 << pk.frequency, 0.5 / span, 0.0, 0.5 * (hi - lo), mean;
    LmInternals best;
    int best_p = 2;
    for (int p : {1, 2}) {
        const LmInternals lm = lm_minimize_multistart(make_fn(p), x0, opts);
        if (p == 1 || lm.ssr < best.ssr) {
            best = lm;
            best_p = p;
        }
    }
    const ResidualFn fn = make_fn(best_p);
    fill_fit_result(out.fit, best,
                    {"frequency_ghz", "decay_rate_per_ns", "phase", "amplitude",
                     "offset"},
                    opts.seed, fn);
    out.fit.values(1) = std::abs(out.fit.values(1));
    out.envelope_power = best_p;

    const double f = out.fit.values(0), rate = out.fit.values(1);
    out.decay_resolved = rate * span > 0.05;
    if (!out.decay_resolved)
        out.fit.notes.push_back("decay not resolved within the trace (T -> inf)");
    const double tau_pi = 1.0 / (2.0 * std::max(f, 1e-300));
    out.f_pi = 0.5 * (1.0 + std::exp(-std::pow(rate * tau_pi, best_p)));
    out.fit.notes.push_back(
        "f_pi uses the first-fringe amplitude convention (1+env(tau_pi))/2");
    return out;
}

double stueckelberg_phase(const DeviceParams& params,
                          const PulseSchedule& schedule) {
    schedule.validate();
    const double ez = std::abs(params.zeeman_mean());
    auto diabatic_gap = [&](double eps) { return ez - exchange_j(params, eps); };

    // locate the first two S/T- passages
    std::vector<double> crossings;
    double t0 = 0;
    for (const Segment& s : schedule.segments) {
        if (s.kind == Segment::Kind::ramp && crossings.size() < 2) {
            const int m = 512;
            double prev = diabatic_gap(s.eps_at(0));
            for (int i = 1; i <= m; ++i) {
                const double t = s.duration * i / m;
                const double cur = diabatic_gap(s.eps_at(t));
                if (prev * cur < 0 && crossings.size() < 2) {
                    double lo = s.duration * (i - 1) / m, hi = t, glo = prev;
                    for (int k = 0; k < 80; ++k) {
                        const double mid = 0.5 * (lo + hi);
                        const double gm = diabatic_gap(s.eps_at(mid));
                        if (glo * gm <= 0)
                            hi = mid;
                        else {
                            lo = mid;
                            glo = gm;
                        }
                    }
                    crossings.push_back(t0 + 0.5 * (lo + hi));
                }
                prev = cur;
            }
        }
        t0 += s.duration;
    }
    const double total = schedule.total_duration();
    const double ta = crossings.size() >= 2 ? crossings[0] : 0.0;
    const double tb = crossings.size() >= 2 ? crossings[1] : total;

    double phase = 0;
    t0 = 0;
    for (const Segment& s : schedule.segments) {
        const double a = std::max(ta, t0), b = std::min(tb, t0 + s.duration);
        if (b > a) {
            if (s.kind == Segment::Kind::ramp && s.eps_start != s.eps_end) {
                const int m = 2000;  // composite Simpson, even count
                const double h = (b - a) / m;
                double acc = 0;
                for (int i = 0; i <= m; ++i) {
                    const double t = a + i * h;
                    const double g =
                        eigen_gap(params, s.eps_at(t - t0), GapKind::S_Tminus);
                    const double w = (i == 0 || i == m) ? 1.0
                                     : (i % 2 == 1)     ? 4.0
                                                        : 2.0;
                    acc += w * g;
                }
                phase += 2.0 * M_PI * acc * h / 3.0;
            } else {
                // constant eps: exact rectangle
                phase += 2.0 * M_PI *
                         eigen_gap(params, s.eps_start, GapKind::S_Tminus) *
                         (b - a);
            }
        }
        t0 += s.duration;
    }
    return phase;
}

}  // namespace qdsim::analysis
