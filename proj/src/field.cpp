#include "dnsl/field.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dnsl {

static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'N', 'S', 'L'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kScalarKind = 0;
constexpr uint8_t kVelocityKind = 1;

void write_header(std::ofstream& out, uint32_t truncation, uint8_t kind) {
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), 4);
    out.write(reinterpret_cast<const char*>(&truncation), 4);
    out.write(reinterpret_cast<const char*>(&kind), 1);
}

void write_coeffs(std::ofstream& out, const ScalarField& w) {
    out.write(reinterpret_cast<const char*>(w.data()), std::streamsize(sizeof(double)) * w.dim());
}

std::ifstream open_and_check(const std::string& path, uint32_t& truncation, uint8_t& kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot " + path);
    char magic[4];
    uint32_t version = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&truncation), 4);
    in.read(reinterpret_cast<char*>(&kind), 1);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError("bad snapshot magic in " + path);
    if (version != kVersion) throw IoError("unsupported snapshot version in " + path);
    return in;
}

void read_coeffs(std::ifstream& in, const std::string& path, ScalarField& w) {
    in.read(reinterpret_cast<char*>(w.data()), std::streamsize(sizeof(double)) * w.dim());
    if (!in) throw IoError("truncated snapshot " + path);
}

} // namespace

void write_snapshot(const std::string& path, const ScalarField& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write snapshot " + path);
    write_header(out, uint32_t(w.lattice().truncation()), kScalarKind);
    write_coeffs(out, w);
    if (!out) throw IoError("failed writing snapshot " + path);
}

void write_snapshot(const std::string& path, const VelocityField& u) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write snapshot " + path);
    write_header(out, uint32_t(u.lattice().truncation()), kVelocityKind);
    write_coeffs(out, u.x);
    write_coeffs(out, u.y);
    if (!out) throw IoError("failed writing snapshot " + path);
}

ScalarField read_scalar_snapshot(const std::string& path) {
    uint32_t n = 0;
    uint8_t kind = 0;
    auto in = open_and_check(path, n, kind);
    if (kind != kScalarKind) throw IoError("snapshot " + path + " is not a scalar field");
    ScalarField w(Lattice::make(int(n)));
    read_coeffs(in, path, w);
    return w;
}

VelocityField read_velocity_snapshot(const std::string& path) {
    uint32_t n = 0;
    uint8_t kind = 0;
    auto in = open_and_check(path, n, kind);
    if (kind != kVelocityKind) throw IoError("snapshot " + path + " is not a velocity field");
    VelocityField u(Lattice::make(int(n)));
    read_coeffs(in, path, u.x);
    read_coeffs(in, path, u.y);
    return u;
}

} // namespace dnsl
