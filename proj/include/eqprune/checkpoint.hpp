#pragma once

// Binary checkpoint container (version 1). All integers little-endian,
// doubles as IEEE-754 binary64 little-endian bit patterns:
//
//   offset 0   char[8]  magic "EQPRUNE\0"
//          8   u32      format version (1)
//         12   u32      config length L
//         16   u8[L]    resolved run configuration, UTF-8 JSON
//              u32      hidden layer count H
//              H x { u32 rows, u32 cols,
//                    f64[rows*cols] weights (row-major),
//                    f64[rows] biases, f64[rows] participation }
//              u32 rows, u32 cols, f64[rows*cols] weights, f64[rows] biases
//                                               (output layer)
//              u64      FNV-1a 64 hash of every preceding byte
//
// Reading is lossless: every double is restored bit for bit.

#include "eqprune/net.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqprune {

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

struct Checkpoint {
    ParticipatingNet net;
    std::string config_json;
};

std::vector<std::uint8_t> encode_checkpoint(const ParticipatingNet& net, const std::string& config_json);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ParticipatingNet& net, const std::string& config_json);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

} // namespace eqprune
