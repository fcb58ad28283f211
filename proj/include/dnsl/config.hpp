#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dnsl/forcing.hpp"

namespace dnsl {

/// Full experiment configuration, read from a sectioned key = value file.
/// Unknown keys are errors; validation reports every violation at once.
struct RunConfig {
    struct Model {
        int truncation = 8;
        double viscosity = 0.1;
        double dt = 1.0 / 32;
        friend bool operator==(const Model&, const Model&) = default;
    } model;

    struct Forcing {
        // canonical example set unless the config lists its own modes
        std::vector<Mode> modes = {{1, 0}, {-1, 0}, {1, 1}, {-1, -1}};
        std::vector<double> amplitudes = {1.0, 1.0, 1.0, 1.0};
        friend bool operator==(const Forcing&, const Forcing&) = default;
    } forcing;

    struct Run {
        uint64_t seed = 1;
        int threads = 0; // 0 = all available cores
        std::string out = "out";
        friend bool operator==(const Run&, const Run&) = default;
    } run;

    struct Simulate {
        int trajectories = 4;
        double horizon = 4.0;
        double output_stride = 0.25;
        double gamma = 0.0; // 0 = 1/(8 B0)
        int moment_m = 1;
        friend bool operator==(const Simulate&, const Simulate&) = default;
    } simulate;

    struct Malliavin {
        double beta = 1e-2;
        std::vector<double> beta_sweep = {1e-4, 1e-3, 1e-2, 1e-1};
        int trajectories = 500;
        int n_max = 6;
        int replicas = 400;       // duality / gradient replicas
        double horizon = 2.0;     // gradient-check horizon (unit blocks)
        double amplitude = 0.2;   // potential amplitude of the gradient check
        friend bool operator==(const Malliavin&, const Malliavin&) = default;
    } malliavin;

    struct Observable {
        std::string kind = "tanh"; // constant | coordinate | tanh | bump
        Mode mode{1, 0};
        double amplitude = 0.2;
        double scale = 1.0;
        friend bool operator==(const Observable&, const Observable&) = default;
    };

    struct Fk {
        Observable potential;
        Observable terminal{"tanh", {1, 1}, 1.0, 1.0};
        int ensemble = 1000;
        int units = 8;
        int units_short = 4;
        std::string mode = "cloning"; // cloning | direct
        int probes = 8;
        double probe_radius = 2.0;
        friend bool operator==(const Fk&, const Fk&) = default;
    } fk;

    struct Feller {
        int pairs = 10;
        double pair_radius = 2.0;
        double normalizer_radius = 2.0; // <= 0: reuse pair_radius
        double separation_min = 1e-3;
        double separation_max = 1e-1;
        std::vector<double> times = {1.0, 2.0, 4.0};
        int ensemble = 500;
        int normalizer_probes = 16;
        friend bool operator==(const Feller&, const Feller&) = default;
    } feller;

    struct Ldp {
        double theta_max = 2.0;
        int theta_count = 9;
        int ell_count = 41;
        int ensemble = 1000;
        int units = 8;
        double occupation_horizon = 200.0;
        friend bool operator==(const Ldp&, const Ldp&) = default;
    } ldp;

    struct Growth {
        int moment_m = 1;
        double gamma = 0.0;
        // long enough for the ensemble to reach stationarity, where the
        // normalized ratios flatten
        std::vector<double> times = {1.0, 2.0, 4.0, 8.0, 16.0, 24.0};
        int probes = 16;
        double radius = 2.0;
        int ensemble = 400;
        friend bool operator==(const Growth&, const Growth&) = default;
    } growth;

    struct Steer {
        Mode target_mode{2, 1};
        double target_amplitude = 0.05;
        double tolerance = 0.05;
        int segments = 16;
        int max_iterations = 300;
        double horizon = 1.0;
        bool transfer_seed = true;
        friend bool operator==(const Steer&, const Steer&) = default;
    } steer;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;

    ForcingSet forcing_set() const { return ForcingSet(forcing.modes, forcing.amplitudes); }
};

struct ConfigParse {
    std::optional<RunConfig> config;
    std::vector<std::string> errors; // every violation, with line numbers
};

ConfigParse parse_config(const std::string& text);
ConfigParse parse_config_file(const std::string& path);

/// Canonical serialization; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& c);

/// FNV-1a 64 over the canonical serialization, hex-encoded.
std::string config_hash(const RunConfig& c);

} // namespace dnsl
