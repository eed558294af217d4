#include "qdsim/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qdsim/errors.hpp"

namespace qdsim::io {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- unit tables ----

enum class Dim { frequency, energy, field, current, time, angle, bare };

// factor converting a token to the canonical unit of its key
double unit_factor(Dim dim, const std::string& u, const std::string& canonical) {
    static const std::map<std::string, double> freq_ghz = {
        {"GHz", 1.0}, {"MHz", 1e-3}, {"kHz", 1e-6}, {"Hz", 1e-9}};
    static const std::map<std::string, double> energy_uev = {
        {"ueV", 1.0}, {"µeV", 1.0}, {"meV", 1e3}, {"eV", 1e6}};
    static const std::map<std::string, double> field_mt = {{"mT", 1.0}, {"T", 1e3}};
    static const std::map<std::string, double> current_pa = {{"pA", 1.0},
                                                             {"nA", 1e3}};
    static const std::map<std::string, double> time_ns = {
        {"ns", 1.0}, {"us", 1e3}, {"µs", 1e3}, {"ms", 1e6}, {"s", 1e9}};

    const std::map<std::string, double>* table = nullptr;
    double canon = 1.0;
    switch (dim) {
        case Dim::frequency:
            table = &freq_ghz;
            canon = freq_ghz.at(canonical);
            break;
        case Dim::energy:
            table = &energy_uev;
            canon = energy_uev.at(canonical);
            break;
        case Dim::field:
            table = &field_mt;
            canon = field_mt.at(canonical);
            break;
        case Dim::current:
            table = &current_pa;
            canon = current_pa.at(canonical);
            break;
        case Dim::time:
            table = &time_ns;
            canon = time_ns.at(canonical);
            break;
        case Dim::angle:
        case Dim::bare:
            return u.empty() || u == "rad" ? 1.0 : NAN;
    }
    const auto it = table->find(u);
    if (it == table->end()) return NAN;
    return it->second / canon;
}

struct KeySpec {
    const char* section;
    const char* key;
    Dim dim;
    const char* unit;  // canonical
    double DeviceParams::* field;
    double SensorParams::* sensor_field;
    bool required;
    bool allow_inf;
};

const KeySpec kKeys[] = {
    {"hamiltonian", "tc0", Dim::frequency, "GHz", &DeviceParams::tc0, nullptr, true, false},
    {"hamiltonian", "tc_decay", Dim::energy, "ueV", &DeviceParams::tc_decay, nullptr, false, true},
    {"hamiltonian", "delta11", Dim::frequency, "MHz", &DeviceParams::delta11, nullptr, false, false},
    {"hamiltonian", "g1", Dim::bare, "", &DeviceParams::g1, nullptr, true, false},
    {"hamiltonian", "g2", Dim::bare, "", &DeviceParams::g2, nullptr, true, false},
    {"hamiltonian", "e_charging", Dim::energy, "meV", &DeviceParams::e_charging, nullptr, false, false},
    {"hamiltonian", "valley_frac", Dim::bare, "", &DeviceParams::valley_frac, nullptr, false, false},
    {"field", "b0z", Dim::field, "mT", &DeviceParams::b0z, nullptr, true, false},
    {"field", "b_offset", Dim::field, "mT", &DeviceParams::b_offset, nullptr, false, false},
    {"noise", "sigma_eps", Dim::energy, "ueV", &DeviceParams::sigma_eps, nullptr, false, false},
    {"noise", "sigma_delta", Dim::frequency, "kHz", &DeviceParams::sigma_delta, nullptr, false, false},
    {"sensor", "mu_singlet_standard", Dim::current, "pA", nullptr, &SensorParams::mu_singlet_standard, false, false},
    {"sensor", "mu_triplet_standard", Dim::current, "pA", nullptr, &SensorParams::mu_triplet_standard, false, false},
    {"sensor", "mu_singlet_latched", Dim::current, "pA", nullptr, &SensorParams::mu_singlet_latched, false, false},
    {"sensor", "mu_triplet_latched", Dim::current, "pA", nullptr, &SensorParams::mu_triplet_latched, false, false},
    {"sensor", "sigma_current", Dim::current, "pA", nullptr, &SensorParams::sigma_current, false, false},
    {"sensor", "latch_success", Dim::bare, "", nullptr, &SensorParams::latch_success, false, false},
    {"sensor", "prep_error", Dim::bare, "", nullptr, &SensorParams::prep_error, false, false},
};

struct Line {
    std::string text;
    int number;
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    int n = 1;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string raw(text.substr(pos, end - pos));
        const size_t cut = raw.find_first_of("#;");
        if (cut != std::string::npos) raw.resize(cut);
        lines.push_back({raw, n});
        ++n;
        pos = end + 1;
        if (end == text.size()) break;
    }
    return lines;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// parses "<number><unit>" or "<number> <unit>" or "inf"
void split_value_unit(const std::string& v, double& num, std::string& unit,
                      bool& is_inf, int line, int col) {
    is_inf = false;
    const std::string t = trim(v);
    if (t == "inf" || t == "infinite" || t == "infinity") {
        is_inf = true;
        num = std::numeric_limits<double>::infinity();
        unit.clear();
        return;
    }
    size_t i = 0;
    while (i < t.size() &&
           (std::isdigit((unsigned char)t[i]) || t[i] == '+' || t[i] == '-' ||
            t[i] == '.' || t[i] == 'e' || t[i] == 'E' ||
            ((t[i] == '+' || t[i] == '-') && i > 0 &&
             (t[i - 1] == 'e' || t[i - 1] == 'E'))))
        ++i;
    const std::string numpart = t.substr(0, i);
    try {
        size_t used = 0;
        num = std::stod(numpart, &used);
        if (used != numpart.size()) throw std::invalid_argument("trail");
    } catch (...) {
        throw ParseError("malformed numeric value '" + t + "'", line, col);
    }
    unit = trim(t.substr(i));
}

}  // namespace

DeviceParams parse_device_config(std::string_view text) {
    DeviceParams p;
    std::string section;
    std::vector<std::string> seen;

    for (const Line& ln : split_lines(text)) {
        const std::string t = trim(ln.text);
        if (t.empty()) continue;
        const int col = int(ln.text.find_first_not_of(" \t")) + 1;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ParseError("unterminated section header", ln.number, col);
            section = t.substr(1, t.size() - 2);
            bool known = false;
            for (const KeySpec& k : kKeys)
                if (section == k.section) known = true;
            if (!known)
                throw ParseError("unknown section [" + section + "]", ln.number, col);
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key = value", ln.number, col);
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        if (section.empty())
            throw ParseError("key '" + key + "' outside any section", ln.number, col);

        const KeySpec* spec = nullptr;
        for (const KeySpec& k : kKeys)
            if (section == k.section && key == k.key) spec = &k;
        if (!spec)
            throw ParseError("unknown key '" + key + "' in section [" + section + "]",
                             ln.number, col);
        const std::string full = section + "." + key;
        for (const auto& s : seen)
            if (s == full)
                throw ParseError("duplicate key '" + key + "'", ln.number, col);
        seen.push_back(full);

        double num = 0;
        std::string unit;
        bool is_inf = false;
        split_value_unit(val, num, unit, is_inf, ln.number, col);
        if (is_inf && !spec->allow_inf)
            throw ParseError("key '" + key + "' does not accept 'inf'", ln.number, col);
        double value;
        if (is_inf) {
            value = std::numeric_limits<double>::infinity();
        } else if (spec->dim == Dim::bare) {
            if (!unit.empty())
                throw ParseError("key '" + key + "' is dimensionless; got unit '" +
                                     unit + "'",
                                 ln.number, col);
            value = num;
        } else {
            if (unit.empty())
                throw ParseError("key '" + key + "' requires a unit suffix",
                                 ln.number, col);
            const double f = unit_factor(spec->dim, unit, spec->unit);
            if (std::isnan(f))
                throw ParseError("unit '" + unit + "' not valid for key '" + key + "'",
                                 ln.number, col);
            value = num * f;
        }
        if (spec->field)
            p.*(spec->field) = value;
        else
            p.sensor.*(spec->sensor_field) = value;
    }

    for (const KeySpec& k : kKeys) {
        if (!k.required) continue;
        const std::string full = std::string(k.section) + "." + k.key;
        bool found = false;
        for (const auto& s : seen)
            if (s == full) found = true;
        if (!found)
            throw ParseError("missing required key '" + full + "'", 0, 0);
    }
    p.validate();
    return p;
}

std::string serialize_device_config(const DeviceParams& p) {
    std::ostringstream os;
    std::string section;
    for (const KeySpec& k : kKeys) {
        if (section != k.section) {
            if (!section.empty()) os << "\n";
            section = k.section;
            os << "[" << section << "]\n";
        }
        const double v = k.field ? p.*(k.field) : p.sensor.*(k.sensor_field);
        os << k.key << " = ";
        if (std::isinf(v))
            os << "inf";
        else {
            os << fmt(v);
            if (k.dim != Dim::bare) os << " " << k.unit;
        }
        os << "\n";
    }
    return os.str();
}

namespace {

double parse_quantity(const std::string& tok, Dim dim, const std::string& canon,
                      int line, int col) {
    double num;
    std::string unit;
    bool is_inf;
    split_value_unit(tok, num, unit, is_inf, line, col);
    if (is_inf) throw ParseError("'inf' not valid here", line, col);
    if (dim == Dim::bare || dim == Dim::angle) {
        if (!unit.empty() && unit != "rad")
            throw ParseError("unexpected unit '" + unit + "'", line, col);
        return num;
    }
    if (unit.empty())
        throw ParseError("missing unit on '" + tok + "'", line, col);
    const double f = unit_factor(dim, unit, canon);
    if (std::isnan(f)) throw ParseError("bad unit '" + unit + "'", line, col);
    return num * f;
}

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> toks;
    std::istringstream is(s);
    std::string t;
    while (is >> t) toks.push_back(t);
    return toks;
}

std::pair<std::string, std::string> split_kv(const std::string& tok, int line) {
    const size_t eq = tok.find('=');
    if (eq == std::string::npos)
        throw ParseError("expected key=value, got '" + tok + "'", line, 1);
    return {tok.substr(0, eq), tok.substr(eq + 1)};
}

double kv_quantity(const std::vector<std::pair<std::string, std::string>>& kv,
                   const std::string& key, Dim dim, const std::string& canon,
                   double fallback) {
    for (const auto& [k, v] : kv)
        if (k == key) return parse_quantity(v, dim, canon, 0, 0);
    return fallback;
}

bool kv_has(const std::vector<std::pair<std::string, std::string>>& kv,
            const std::string& key) {
    for (const auto& [k, v] : kv)
        if (k == key) return true;
    return false;
}

}  // namespace

PulseSchedule expand_preset(
    const std::string& name,
    const std::vector<std::pair<std::string, std::string>>& kv) {
    PulseSchedule sch;
    const auto q = [&](const std::string& key, Dim dim, const std::string& canon,
                       double fb) { return kv_quantity(kv, key, dim, canon, fb); };

    if (name == "funnel" || name == "lzs") {
        const double depth = q("depth", Dim::energy, "ueV", NAN);
        const double dwell = q("dwell", Dim::time, "ns", NAN);
        if (std::isnan(depth) || std::isnan(dwell))
            throw ParseError("preset " + name + " requires depth= and dwell=", 0, 0);
        const double readout = q("readout", Dim::energy, "ueV", -250.0);
        const double rate =
            q("rate", Dim::energy, "ueV", name == "funnel" ? 80.0 : 2.0);
        const double d = (depth - readout) / rate;
        sch.segments = {Segment::ramp(readout, depth, d),
                        Segment::dwell(depth, dwell),
                        Segment::ramp(depth, readout, d)};
    } else if (name == "exchange") {
        const double depth = q("depth", Dim::energy, "ueV", NAN);
        const double dwell = q("dwell", Dim::time, "ns", NAN);
        if (std::isnan(depth) || std::isnan(dwell))
            throw ParseError("preset exchange requires depth= and dwell=", 0, 0);
        const double prep = q("prep", Dim::energy, "ueV", 250.0);
        const double init = q("init", Dim::energy, "ueV", -300.0);
        const double prep_ns = q("prep_ns", Dim::time, "ns", 300.0);
        const double rate = q("plunge_rate", Dim::energy, "ueV", 100.0);
        const double dp = (prep - depth) / rate;
        sch.segments = {Segment::ramp(init, prep, prep_ns),
                        Segment::ramp(prep, depth, dp),
                        Segment::dwell(depth, dwell),
                        Segment::ramp(depth, prep, dp),
                        Segment::ramp(prep, init, prep_ns)};
    } else if (name == "esr") {
        const double eps = q("eps", Dim::energy, "ueV", NAN);
        const double freq = q("freq", Dim::frequency, "GHz", NAN);
        if (std::isnan(eps) || std::isnan(freq))
            throw ParseError("preset esr requires eps= and freq=", 0, 0);
        const double dur = q("duration", Dim::time, "ns", 25000.0);
        const double amp = q("amp", Dim::frequency, "MHz", 0.02);
        const double phase = q("phase", Dim::angle, "", 0.0);
        const double init = q("init", Dim::energy, "ueV", -300.0);
        const double prep_ns = q("prep_ns", Dim::time, "ns", 300.0);
        sch.segments = {Segment::ramp(init, eps, prep_ns),
                        Segment::drive(eps, dur, freq, amp, phase),
                        Segment::ramp(eps, init, prep_ns)};
    } else {
        throw ParseError("unknown preset '" + name + "'", 0, 0);
    }
    sch.validate();
    return sch;
}

PulseSchedule parse_schedule(std::string_view text) {
    PulseSchedule sch;
    bool have_preset = false;
    for (const Line& ln : split_lines(text)) {
        const std::string t = trim(ln.text);
        if (t.empty()) continue;
        const auto toks = tokenize(t);
        const std::string& head = toks[0];
        try {
            if (head == "initial") {
                if (toks.size() >= 2 && toks[1] == "ground_02S") {
                    sch.initial_state = PulseSchedule::Init::ground_02s;
                } else if (toks.size() == 12 && toks[1] == "custom") {
                    sch.initial_state = PulseSchedule::Init::custom;
                    for (int k = 0; k < 5; ++k)
                        sch.custom_amplitudes(k) =
                            std::complex<double>(std::stod(toks[2 + 2 * k]),
                                                 std::stod(toks[3 + 2 * k]));
                } else {
                    throw ParseError("initial must be ground_02S or custom with "
                                     "10 numbers",
                                     ln.number, 1);
                }
            } else if (head == "ramp") {
                if (toks.size() != 4)
                    throw ParseError("ramp needs <eps0> <eps1> <duration>",
                                     ln.number, 1);
                sch.segments.push_back(Segment::ramp(
                    parse_quantity(toks[1], Dim::energy, "ueV", ln.number, 1),
                    parse_quantity(toks[2], Dim::energy, "ueV", ln.number, 1),
                    parse_quantity(toks[3], Dim::time, "ns", ln.number, 1)));
            } else if (head == "dwell") {
                if (toks.size() != 3)
                    throw ParseError("dwell needs <eps> <duration>", ln.number, 1);
                sch.segments.push_back(Segment::dwell(
                    parse_quantity(toks[1], Dim::energy, "ueV", ln.number, 1),
                    parse_quantity(toks[2], Dim::time, "ns", ln.number, 1)));
            } else if (head == "drive") {
                if (toks.size() < 5)
                    throw ParseError(
                        "drive needs <eps> <duration> freq=.. amp=.. [phase=..]",
                        ln.number, 1);
                std::vector<std::pair<std::string, std::string>> kv;
                for (size_t k = 3; k < toks.size(); ++k)
                    kv.push_back(split_kv(toks[k], ln.number));
                if (!kv_has(kv, "freq") || !kv_has(kv, "amp"))
                    throw ParseError("drive requires freq= and amp=", ln.number, 1);
                sch.segments.push_back(Segment::drive(
                    parse_quantity(toks[1], Dim::energy, "ueV", ln.number, 1),
                    parse_quantity(toks[2], Dim::time, "ns", ln.number, 1),
                    kv_quantity(kv, "freq", Dim::frequency, "GHz", 0.0),
                    kv_quantity(kv, "amp", Dim::frequency, "MHz", 0.0),
                    kv_quantity(kv, "phase", Dim::angle, "", 0.0)));
            } else if (head == "preset") {
                if (toks.size() < 2)
                    throw ParseError("preset needs a name", ln.number, 1);
                std::vector<std::pair<std::string, std::string>> kv;
                for (size_t k = 2; k < toks.size(); ++k)
                    kv.push_back(split_kv(toks[k], ln.number));
                const PulseSchedule p = expand_preset(toks[1], kv);
                for (const Segment& s : p.segments) sch.segments.push_back(s);
                have_preset = true;
            } else {
                throw ParseError("unknown directive '" + head + "'", ln.number, 1);
            }
        } catch (const std::invalid_argument&) {
            throw ParseError("malformed number", ln.number, 1);
        }
    }
    (void)have_preset;
    try {
        sch.validate();
    } catch (const ModelError& e) {
        throw ParseError(e.what(), 0, 0);
    }
    return sch;
}

std::vector<double> parse_range(const std::string& text) {
    const size_t c1 = text.find(':');
    const size_t c2 = text.rfind(':');
    if (c1 == std::string::npos || c2 == c1)
        throw ParseError("range must be start:stop:count", 0, 0);
    try {
        const double start = std::stod(text.substr(0, c1));
        const double stop = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
        const int count = std::stoi(text.substr(c2 + 1));
        if (count < 1) throw ParseError("range count must be >= 1", 0, 0);
        return experiments::linspace(start, stop, count);
    } catch (const std::invalid_argument&) {
        throw ParseError("malformed range '" + text + "'", 0, 0);
    } catch (const std::out_of_range&) {
        throw ParseError("malformed range '" + text + "'", 0, 0);
    }
}

void write_ptmap_csv(std::ostream& os, const experiments::PTMap& map) {
    os << map.axis1.name << "_" << map.axis1.units << "," << map.axis2.name << "_"
       << map.axis2.units << ",p_t\n";
    for (size_t i = 0; i < map.axis1.grid.size(); ++i)
        for (size_t j = 0; j < map.axis2.grid.size(); ++j)
            os << fmt(map.axis1.grid[i]) << "," << fmt(map.axis2.grid[j]) << ","
               << fmt(map.at(i, j)) << "\n";
}

void write_curve_csv(std::ostream& os, const experiments::Curve& curve) {
    os << curve.x_name << "_" << curve.x_units << "," << curve.y_name << "\n";
    for (size_t i = 0; i < curve.x.size(); ++i)
        os << fmt(curve.x[i]) << "," << fmt(curve.y[i]) << "\n";
}

void write_histogram_csv(std::ostream& os, const readout::Histogram& h,
                         const std::string& value_units) {
    os << "bin_center_" << value_units << ",count\n";
    for (size_t i = 0; i < h.bin_centers.size(); ++i)
        os << fmt(h.bin_centers[i]) << "," << h.counts[i] << "\n";
}

void write_fit_text(std::ostream& os, const analysis::FitResult& fit) {
    os << "converged = " << (fit.converged ? "true" : "false") << "\n";
    os << "iterations = " << fit.iterations << "\n";
    os << "residual_norm = " << fmt(fit.residual_norm) << "\n";
    for (size_t i = 0; i < fit.names.size(); ++i) {
        os << fit.names[i] << " = " << fmt(fit.values(Eigen::Index(i))) << " +- "
           << fmt(fit.ci95(Eigen::Index(i)));
        if (!fit.identifiable.empty() && !fit.identifiable[i])
            os << "  (unidentifiable)";
        os << "\n";
    }
    for (const auto& n : fit.notes) os << "# " << n << "\n";
}

void write_residuals_csv(std::ostream& os, const std::vector<double>& x,
                         const std::vector<double>& residuals) {
    os << "x,residual\n";
    for (size_t i = 0; i < x.size(); ++i)
        os << fmt(x[i]) << "," << fmt(residuals[i]) << "\n";
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

void write_manifest(std::ostream& os, const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["argv"] = m.argv;
    j["config_path"] = m.config_path;
    j["config_hash"] = m.config_hash;
    if (!m.schedule_hash.empty()) j["schedule_hash"] = m.schedule_hash;
    j["master_seed"] = m.master_seed;
    j["version"] = m.version;
    j["wall_time_s"] = m.wall_time_s;
    j["outputs"] = m.outputs;
    j["threads"] = m.threads;
    os << j.dump(2) << "\n";
}

}  // namespace qdsim::io
