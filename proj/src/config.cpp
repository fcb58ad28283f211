#include "dnsl/config.hpp"

#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dnsl {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Line-addressed error collector.
struct Errors {
    std::vector<std::string> list;
    void add(int line, const std::string& msg) {
        list.push_back("line " + std::to_string(line) + ": " + msg);
    }
    void add(const std::string& msg) { list.push_back(msg); }
};

struct Parser {
    RunConfig c;
    Errors err;
    bool forcing_given = false;

    bool to_double(const std::string& v, int line, double& out) {
        try {
            size_t used = 0;
            out = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return true;
        } catch (...) {
            err.add(line, "expected a number, got '" + v + "'");
            return false;
        }
    }
    bool to_int(const std::string& v, int line, int& out) {
        try {
            size_t used = 0;
            out = std::stoi(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return true;
        } catch (...) {
            err.add(line, "expected an integer, got '" + v + "'");
            return false;
        }
    }
    bool to_u64(const std::string& v, int line, uint64_t& out) {
        try {
            size_t used = 0;
            out = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return true;
        } catch (...) {
            err.add(line, "expected an unsigned integer, got '" + v + "'");
            return false;
        }
    }
    bool to_bool(const std::string& v, int line, bool& out) {
        if (v == "on" || v == "true" || v == "1") {
            out = true;
            return true;
        }
        if (v == "off" || v == "false" || v == "0") {
            out = false;
            return true;
        }
        err.add(line, "expected on/off, got '" + v + "'");
        return false;
    }
    bool to_doubles(const std::string& v, int line, std::vector<double>& out) {
        out.clear();
        for (const auto& tok : split_ws(v)) {
            double x = 0;
            if (!to_double(tok, line, x)) return false;
            out.push_back(x);
        }
        if (out.empty()) err.add(line, "expected at least one number");
        return !out.empty();
    }
    bool to_mode(const std::string& v, int line, Mode& out) {
        const auto toks = split_ws(v);
        if (toks.size() != 2 || !to_int(toks[0], line, out.x) || !to_int(toks[1], line, out.y)) {
            err.add(line, "expected a mode as two integers, got '" + v + "'");
            return false;
        }
        return true;
    }

    void observable_key(RunConfig::Observable& o, const std::string& prefix, const std::string& key,
                        const std::string& value, int line, bool& handled) {
        handled = true;
        if (key == prefix) {
            if (value != "constant" && value != "coordinate" && value != "tanh" && value != "bump")
                err.add(line, "unknown observable kind '" + value + "'");
            else
                o.kind = value;
        } else if (key == prefix + "_mode") {
            to_mode(value, line, o.mode);
        } else if (key == prefix + "_amplitude") {
            to_double(value, line, o.amplitude);
        } else if (key == prefix + "_scale") {
            to_double(value, line, o.scale);
        } else {
            handled = false;
        }
    }

    void key(const std::string& section, const std::string& k, const std::string& v, int line) {
        auto unknown = [&] { err.add(line, "unknown key '" + k + "' in section [" + section + "]"); };
        if (section == "model") {
            if (k == "truncation") to_int(v, line, c.model.truncation);
            else if (k == "viscosity") to_double(v, line, c.model.viscosity);
            else if (k == "dt") to_double(v, line, c.model.dt);
            else unknown();
        } else if (section == "forcing") {
            if (k == "mode") {
                if (!forcing_given) {
                    c.forcing.modes.clear();
                    c.forcing.amplitudes.clear();
                }
                const auto toks = split_ws(v);
                Mode m;
                double b = 0;
                if (toks.size() != 3 || !to_int(toks[0], line, m.x) || !to_int(toks[1], line, m.y) ||
                    !to_double(toks[2], line, b)) {
                    err.add(line, "forcing mode needs 'l1 l2 amplitude'");
                } else {
                    for (const Mode& prev : c.forcing.modes)
                        if (prev == m)
                            err.add(line, "duplicate forcing mode (" + std::to_string(m.x) + "," +
                                              std::to_string(m.y) + ")");
                    c.forcing.modes.push_back(m);
                    c.forcing.amplitudes.push_back(b);
                    forcing_given = true;
                }
            } else {
                unknown();
            }
        } else if (section == "run") {
            if (k == "seed") to_u64(v, line, c.run.seed);
            else if (k == "threads") to_int(v, line, c.run.threads);
            else if (k == "out") c.run.out = v;
            else unknown();
        } else if (section == "simulate") {
            if (k == "trajectories") to_int(v, line, c.simulate.trajectories);
            else if (k == "horizon") to_double(v, line, c.simulate.horizon);
            else if (k == "output_stride") to_double(v, line, c.simulate.output_stride);
            else if (k == "gamma") to_double(v, line, c.simulate.gamma);
            else if (k == "moment_m") to_int(v, line, c.simulate.moment_m);
            else unknown();
        } else if (section == "malliavin") {
            if (k == "beta") to_double(v, line, c.malliavin.beta);
            else if (k == "beta_sweep") to_doubles(v, line, c.malliavin.beta_sweep);
            else if (k == "trajectories") to_int(v, line, c.malliavin.trajectories);
            else if (k == "n_max") to_int(v, line, c.malliavin.n_max);
            else if (k == "replicas") to_int(v, line, c.malliavin.replicas);
            else if (k == "horizon") to_double(v, line, c.malliavin.horizon);
            else if (k == "amplitude") to_double(v, line, c.malliavin.amplitude);
            else unknown();
        } else if (section == "fk") {
            bool handled = false;
            observable_key(c.fk.potential, "observable", k, v, line, handled);
            if (!handled) observable_key(c.fk.terminal, "terminal", k, v, line, handled);
            if (handled) return;
            if (k == "ensemble") to_int(v, line, c.fk.ensemble);
            else if (k == "units") to_int(v, line, c.fk.units);
            else if (k == "units_short") to_int(v, line, c.fk.units_short);
            else if (k == "mode") {
                if (v != "cloning" && v != "direct") err.add(line, "fk mode must be cloning or direct");
                else c.fk.mode = v;
            } else if (k == "probes") to_int(v, line, c.fk.probes);
            else if (k == "probe_radius") to_double(v, line, c.fk.probe_radius);
            else unknown();
        } else if (section == "feller") {
            if (k == "pairs") to_int(v, line, c.feller.pairs);
            else if (k == "pair_radius") to_double(v, line, c.feller.pair_radius);
            else if (k == "normalizer_radius") to_double(v, line, c.feller.normalizer_radius);
            else if (k == "separation_min") to_double(v, line, c.feller.separation_min);
            else if (k == "separation_max") to_double(v, line, c.feller.separation_max);
            else if (k == "times") to_doubles(v, line, c.feller.times);
            else if (k == "ensemble") to_int(v, line, c.feller.ensemble);
            else if (k == "normalizer_probes") to_int(v, line, c.feller.normalizer_probes);
            else unknown();
        } else if (section == "ldp") {
            if (k == "theta_max") to_double(v, line, c.ldp.theta_max);
            else if (k == "theta_count") to_int(v, line, c.ldp.theta_count);
            else if (k == "ell_count") to_int(v, line, c.ldp.ell_count);
            else if (k == "ensemble") to_int(v, line, c.ldp.ensemble);
            else if (k == "units") to_int(v, line, c.ldp.units);
            else if (k == "occupation_horizon") to_double(v, line, c.ldp.occupation_horizon);
            else unknown();
        } else if (section == "growth") {
            if (k == "moment_m") to_int(v, line, c.growth.moment_m);
            else if (k == "gamma") to_double(v, line, c.growth.gamma);
            else if (k == "times") to_doubles(v, line, c.growth.times);
            else if (k == "probes") to_int(v, line, c.growth.probes);
            else if (k == "radius") to_double(v, line, c.growth.radius);
            else if (k == "ensemble") to_int(v, line, c.growth.ensemble);
            else unknown();
        } else if (section == "steer") {
            if (k == "target_mode") to_mode(v, line, c.steer.target_mode);
            else if (k == "target_amplitude") to_double(v, line, c.steer.target_amplitude);
            else if (k == "tolerance") to_double(v, line, c.steer.tolerance);
            else if (k == "segments") to_int(v, line, c.steer.segments);
            else if (k == "max_iterations") to_int(v, line, c.steer.max_iterations);
            else if (k == "horizon") to_double(v, line, c.steer.horizon);
            else if (k == "transfer_seed") to_bool(v, line, c.steer.transfer_seed);
            else unknown();
        } else {
            err.add(line, "unknown section [" + section + "]");
        }
    }

    void validate() {
        if (c.model.truncation < 1) err.add("model.truncation must be >= 1");
        if (c.model.viscosity <= 0) err.add("model.viscosity must be positive");
        if (c.model.dt <= 0) {
            err.add("model.dt must be positive");
        } else {
            const long half = std::lround(0.5 / c.model.dt);
            if (half < 1 || half * c.model.dt != 0.5)
                err.add("model.dt must divide 1/2 exactly (got " + fmt(c.model.dt) + ")");
        }
        if (c.forcing.modes.empty()) err.add("forcing section lists no modes");
        for (size_t i = 0; i < c.forcing.modes.size(); ++i) {
            const Mode m = c.forcing.modes[i];
            if (m.zero()) err.add("forcing mode (0,0) is not allowed");
            if (std::abs(m.x) > c.model.truncation || std::abs(m.y) > c.model.truncation)
                err.add("forcing mode (" + std::to_string(m.x) + "," + std::to_string(m.y) +
                        ") lies outside the truncation");
            if (c.forcing.amplitudes[i] == 0.0)
                err.add("forcing mode (" + std::to_string(m.x) + "," + std::to_string(m.y) +
                        ") has zero amplitude");
        }
        if (c.run.threads < 0) err.add("run.threads must be >= 0");
        if (c.malliavin.beta <= 0) err.add("malliavin.beta must be positive");
        for (double b : c.malliavin.beta_sweep)
            if (b <= 0) err.add("malliavin.beta_sweep entries must be positive");
        if (c.ldp.theta_count < 3 || c.ldp.theta_count % 2 == 0)
            err.add("ldp.theta_count must be an odd number >= 3");
        if (c.fk.units_short >= c.fk.units) err.add("fk.units_short must be below fk.units");
        if (c.steer.segments < 1) err.add("steer.segments must be >= 1");
    }
};

} // namespace

ConfigParse parse_config(const std::string& text) {
    Parser p;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        std::string s = trim(raw);
        if (const auto hash = s.find('#'); hash != std::string::npos) s = trim(s.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') {
                p.err.add(line, "malformed section header '" + s + "'");
                continue;
            }
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            p.err.add(line, "expected key = value, got '" + s + "'");
            continue;
        }
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (section.empty()) {
            p.err.add(line, "key '" + key + "' appears before any [section]");
            continue;
        }
        p.key(section, key, value, line);
    }
    p.validate();
    ConfigParse out;
    out.errors = p.err.list;
    if (out.errors.empty()) out.config = std::move(p.c);
    return out;
}

ConfigParse parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return {std::nullopt, {"cannot open config file " + path}};
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    os << "[model]\n";
    os << "truncation = " << c.model.truncation << "\n";
    os << "viscosity = " << fmt(c.model.viscosity) << "\n";
    os << "dt = " << fmt(c.model.dt) << "\n";
    os << "[forcing]\n";
    for (size_t i = 0; i < c.forcing.modes.size(); ++i)
        os << "mode = " << c.forcing.modes[i].x << " " << c.forcing.modes[i].y << " "
           << fmt(c.forcing.amplitudes[i]) << "\n";
    os << "[run]\n";
    os << "seed = " << c.run.seed << "\n";
    os << "threads = " << c.run.threads << "\n";
    os << "out = " << c.run.out << "\n";
    os << "[simulate]\n";
    os << "trajectories = " << c.simulate.trajectories << "\n";
    os << "horizon = " << fmt(c.simulate.horizon) << "\n";
    os << "output_stride = " << fmt(c.simulate.output_stride) << "\n";
    os << "gamma = " << fmt(c.simulate.gamma) << "\n";
    os << "moment_m = " << c.simulate.moment_m << "\n";
    os << "[malliavin]\n";
    os << "beta = " << fmt(c.malliavin.beta) << "\n";
    os << "beta_sweep =";
    for (double b : c.malliavin.beta_sweep) os << " " << fmt(b);
    os << "\n";
    os << "trajectories = " << c.malliavin.trajectories << "\n";
    os << "n_max = " << c.malliavin.n_max << "\n";
    os << "replicas = " << c.malliavin.replicas << "\n";
    os << "horizon = " << fmt(c.malliavin.horizon) << "\n";
    os << "amplitude = " << fmt(c.malliavin.amplitude) << "\n";
    os << "[fk]\n";
    auto obs = [&](const char* prefix, const RunConfig::Observable& o) {
        os << prefix << " = " << o.kind << "\n";
        os << prefix << "_mode = " << o.mode.x << " " << o.mode.y << "\n";
        os << prefix << "_amplitude = " << fmt(o.amplitude) << "\n";
        os << prefix << "_scale = " << fmt(o.scale) << "\n";
    };
    obs("observable", c.fk.potential);
    obs("terminal", c.fk.terminal);
    os << "ensemble = " << c.fk.ensemble << "\n";
    os << "units = " << c.fk.units << "\n";
    os << "units_short = " << c.fk.units_short << "\n";
    os << "mode = " << c.fk.mode << "\n";
    os << "probes = " << c.fk.probes << "\n";
    os << "probe_radius = " << fmt(c.fk.probe_radius) << "\n";
    os << "[feller]\n";
    os << "pairs = " << c.feller.pairs << "\n";
    os << "pair_radius = " << fmt(c.feller.pair_radius) << "\n";
    os << "normalizer_radius = " << fmt(c.feller.normalizer_radius) << "\n";
    os << "separation_min = " << fmt(c.feller.separation_min) << "\n";
    os << "separation_max = " << fmt(c.feller.separation_max) << "\n";
    os << "times =";
    for (double t : c.feller.times) os << " " << fmt(t);
    os << "\n";
    os << "ensemble = " << c.feller.ensemble << "\n";
    os << "normalizer_probes = " << c.feller.normalizer_probes << "\n";
    os << "[ldp]\n";
    os << "theta_max = " << fmt(c.ldp.theta_max) << "\n";
    os << "theta_count = " << c.ldp.theta_count << "\n";
    os << "ell_count = " << c.ldp.ell_count << "\n";
    os << "ensemble = " << c.ldp.ensemble << "\n";
    os << "units = " << c.ldp.units << "\n";
    os << "occupation_horizon = " << fmt(c.ldp.occupation_horizon) << "\n";
    os << "[growth]\n";
    os << "moment_m = " << c.growth.moment_m << "\n";
    os << "gamma = " << fmt(c.growth.gamma) << "\n";
    os << "times =";
    for (double t : c.growth.times) os << " " << fmt(t);
    os << "\n";
    os << "probes = " << c.growth.probes << "\n";
    os << "radius = " << fmt(c.growth.radius) << "\n";
    os << "ensemble = " << c.growth.ensemble << "\n";
    os << "[steer]\n";
    os << "target_mode = " << c.steer.target_mode.x << " " << c.steer.target_mode.y << "\n";
    os << "target_amplitude = " << fmt(c.steer.target_amplitude) << "\n";
    os << "tolerance = " << fmt(c.steer.tolerance) << "\n";
    os << "segments = " << c.steer.segments << "\n";
    os << "max_iterations = " << c.steer.max_iterations << "\n";
    os << "horizon = " << fmt(c.steer.horizon) << "\n";
    os << "transfer_seed = " << (c.steer.transfer_seed ? "on" : "off") << "\n";
    return os.str();
}

std::string config_hash(const RunConfig& c) {
    const std::string bytes = serialize_config(c);
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001B3ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016" PRIx64, h);
    return buf;
}

} // namespace dnsl
