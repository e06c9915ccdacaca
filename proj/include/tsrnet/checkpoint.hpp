#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsrnet/layers.hpp"
#include "tsrnet/tensor.hpp"

namespace tsrnet {

// Flat binary container of named arrays plus a config fingerprint.
// Little-endian, doubles on disk.
namespace ckpt {

constexpr char kMagic[8] = {'T', 'S', 'R', 'C', 'K', 'P', 'T', '1'};

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    std::string s(read_u32(is), '\0');
    is.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return s;
}

} // namespace ckpt

inline void save_checkpoint(const std::filesystem::path& path,
                            const std::vector<ParamRef>& params,
                            const std::string& fingerprint) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
    os.write(ckpt::kMagic, sizeof(ckpt::kMagic));
    ckpt::write_string(os, fingerprint);
    ckpt::write_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        ckpt::write_string(os, p.name);
        ckpt::write_u32(os, static_cast<std::uint32_t>(p.value->rank()));
        for (int d : p.value->shape()) ckpt::write_u32(os, static_cast<std::uint32_t>(d));
        os.write(reinterpret_cast<const char*>(p.value->data()),
                 static_cast<std::streamsize>(p.value->size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

// Loads into an existing parameter registry; names, shapes, and the config
// fingerprint must all match.
inline void load_checkpoint(const std::filesystem::path& path,
                            std::vector<ParamRef>& params,
                            const std::string& expected_fingerprint) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, ckpt::kMagic, sizeof(magic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    const std::string fingerprint = ckpt::read_string(is);
    if (fingerprint != expected_fingerprint)
        throw std::runtime_error("checkpoint: config fingerprint mismatch (file " + fingerprint +
                                 ", expected " + expected_fingerprint + ")");
    const std::uint32_t count = ckpt::read_u32(is);
    if (count != params.size())
        throw std::runtime_error("checkpoint: array count mismatch");
    for (auto& p : params) {
        const std::string name = ckpt::read_string(is);
        if (name != p.name)
            throw std::runtime_error("checkpoint: expected array " + p.name + ", found " + name);
        const std::uint32_t rank = ckpt::read_u32(is);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(ckpt::read_u32(is));
        if (shape != p.value->shape())
            throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
        is.read(reinterpret_cast<char*>(p.value->data()),
                static_cast<std::streamsize>(p.value->size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated data for " + p.name);
    }
}

} // namespace tsrnet
