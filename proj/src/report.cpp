#include "dnsl/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dnsl/errors.hpp"

namespace dnsl {

const char* kCodeVersion = "dnsl 0.1.0";

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_full(v));
    rows_.push_back(std::move(cells));
}

void CsvWriter::raw_row(const std::vector<std::string>& cells) { rows_.push_back(cells); }

std::string CsvWriter::to_string() const {
    std::string out;
    for (size_t i = 0; i < columns_.size(); ++i) {
        if (i) out += ",";
        out += columns_[i];
    }
    out += "\n";
    for (const auto& r : rows_) {
        for (size_t i = 0; i < r.size(); ++i) {
            if (i) out += ",";
            out += r[i];
        }
        out += "\n";
    }
    return out;
}

void CsvWriter::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << to_string();
    if (!out) throw IoError("failed writing " + path);
}

Json make_envelope(const RunConfig& config, const std::string& experiment, Json payload,
                   Json provenance, double wall_seconds) {
    Json j;
    j["experiment"] = experiment;
    j["config_hash"] = config_hash(config);
    j["code_version"] = kCodeVersion;
    j["wall_clock_seconds"] = wall_seconds;
    j["provenance"] = std::move(provenance);
    j["payload"] = std::move(payload);
    return j;
}

void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing " + path);
}

void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create output directory " + path + ": " + ec.message());
}

} // namespace dnsl
