#include "doctest.h"

#include <fstream>
#include <sstream>

#include "dnsl/cli.hpp"

using namespace dnsl;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has_error_containing(const ConfigParse& p, const std::string& needle) {
    for (const auto& e : p.errors)
        if (e.find(needle) != std::string::npos) return true;
    return false;
}

} // namespace

TEST_CASE("a minimal config parses with the standard forcing set") {
    const auto p = parse_config("[model]\ntruncation = 8\nviscosity = 0.1\ndt = 0.0078125\n");
    REQUIRE(p.config.has_value());
    CHECK(p.config->model.truncation == 8);
    CHECK(p.config->forcing.modes.size() == 4); // defaulted to the example set
    CHECK(check_condition_h(p.config->forcing_set()).satisfied);
}

TEST_CASE("dt must divide one half exactly") {
    // 1/100 divides: 50 * 0.01 rounds to exactly 0.5 in binary
    CHECK(parse_config("[model]\ndt = 0.01\n").config.has_value());
    const auto bad = parse_config("[model]\ndt = 0.003\n");
    CHECK(!bad.config.has_value());
    CHECK(has_error_containing(bad, "divide 1/2"));
}

TEST_CASE("unknown keys and sections are rejected with line numbers") {
    const auto p = parse_config("[model]\ntruncation = 8\ntypo_key = 3\n[nonsense]\nx = 1\n");
    CHECK(!p.config.has_value());
    CHECK(has_error_containing(p, "line 3: unknown key 'typo_key'"));
    CHECK(has_error_containing(p, "line 5: unknown section [nonsense]"));
}

TEST_CASE("all violations are reported at once") {
    const auto p = parse_config(
        "[model]\ntruncation = 4\ndt = 0.003\nviscosity = -1\n"
        "[forcing]\nmode = 1 0 1.0\nmode = 1 0 2.0\nmode = 9 0 1.0\nmode = 2 0 0\n");
    CHECK(!p.config.has_value());
    CHECK(has_error_containing(p, "divide 1/2"));
    CHECK(has_error_containing(p, "viscosity"));
    CHECK(has_error_containing(p, "duplicate forcing mode (1,0)"));
    CHECK(has_error_containing(p, "(9,0)"));
    CHECK(has_error_containing(p, "zero amplitude"));
    CHECK(p.errors.size() >= 5);
}

TEST_CASE("configs round-trip through their canonical serialization") {
    RunConfig c;
    c.model.truncation = 6;
    c.model.dt = 1.0 / 128;
    c.model.viscosity = 0.17;
    c.run.seed = 987654321;
    c.run.out = "elsewhere";
    c.fk.potential.kind = "bump";
    c.fk.potential.amplitude = -0.125;
    c.malliavin.beta_sweep = {1e-5, 0.3};
    c.steer.transfer_seed = false;
    c.ldp.theta_count = 11;
    const auto p = parse_config(serialize_config(c));
    REQUIRE(p.config.has_value());
    CHECK(*p.config == c);
    CHECK(config_hash(*p.config) == config_hash(c));

    RunConfig d = c;
    d.run.seed += 1;
    CHECK(config_hash(d) != config_hash(c));
}

TEST_CASE("keys before any section are rejected") {
    const auto p = parse_config("truncation = 8\n");
    CHECK(has_error_containing(p, "before any [section]"));
}

TEST_CASE("csv output uses full round-trip formatting") {
    CsvWriter csv({"a", "b"});
    csv.row({1.0 / 3.0, 2.0});
    const std::string s = csv.to_string();
    CHECK(s.find("0.33333333333333331") != std::string::npos);
}

TEST_CASE("forcing decision driver emits the record and succeeds") {
    RunConfig c;
    c.run.out = "harness_out_a";
    CHECK(run_check_forcing(c, true) == kOk);
    const std::string body = slurp("harness_out_a/check_forcing.json");
    CHECK(body.find("\"condition_H\": true") != std::string::npos);
    CHECK(body.find(config_hash(c)) != std::string::npos);
}

TEST_CASE("simulate reruns are byte-identical") {
    RunConfig c;
    c.model.truncation = 4;
    c.model.dt = 1.0 / 16;
    c.simulate.trajectories = 3;
    c.simulate.horizon = 1.0;
    c.simulate.gamma = 0.05;
    c.run.seed = 2024;

    c.run.out = "harness_out_b1";
    REQUIRE(run_simulate(c, true) == kOk);
    c.run.out = "harness_out_b2";
    REQUIRE(run_simulate(c, true) == kOk);
    CHECK(slurp("harness_out_b1/simulate_series.csv") == slurp("harness_out_b2/simulate_series.csv"));
    CHECK(slurp("harness_out_b1/simulate_final.snap") == slurp("harness_out_b2/simulate_final.snap"));

    // a different seed must change the payload
    c.run.seed = 2025;
    c.run.out = "harness_out_b3";
    REQUIRE(run_simulate(c, true) == kOk);
    CHECK(slurp("harness_out_b1/simulate_series.csv") != slurp("harness_out_b3/simulate_series.csv"));
}

TEST_CASE("steer driver on a directly forced target") {
    RunConfig c;
    c.model.truncation = 4;
    c.model.dt = 1.0 / 32;
    c.run.out = "harness_out_c";
    c.steer.target_mode = {1, 0};
    c.steer.target_amplitude = 0.05;
    c.steer.tolerance = 0.03;
    c.steer.max_iterations = 50;
    CHECK(run_steer(c, true) == kOk);
    const std::string body = slurp("harness_out_c/steer.json");
    CHECK(body.find("\"converged\": true") != std::string::npos);
}
