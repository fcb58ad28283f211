#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "dnsl/config.hpp"

namespace dnsl {

using Json = nlohmann::ordered_json;

/// CSV table with full round-trip decimal formatting (17 significant
/// digits), so a rerun with the same config and seed is byte-identical.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void row(const std::vector<double>& values);
    void raw_row(const std::vector<std::string>& cells);
    void write(const std::string& path) const;
    std::string to_string() const;

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

std::string format_full(double v);

/// Experiment report wrapper: config hash, code version, wall clock and the
/// experiment payload. The wall clock is the only non-deterministic field.
Json make_envelope(const RunConfig& config, const std::string& experiment, Json payload,
                   Json provenance, double wall_seconds);

void write_json(const std::string& path, const Json& j);
void ensure_directory(const std::string& path);

extern const char* kCodeVersion;

} // namespace dnsl
