#include "eqprune/mnist.hpp"

#include <zlib.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

namespace eqprune::mnist {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
    char buf[11];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

// Validates the header and returns the dimension sizes.
std::vector<std::uint32_t> parse_header(std::span<const std::uint8_t> bytes, std::uint32_t magic,
                                        std::size_t ndims, const std::string& origin) {
    const std::size_t header = 4 + 4 * ndims;
    if (bytes.size() < header)
        throw IdxError(origin + ": truncated header (" + std::to_string(bytes.size()) +
                       " bytes, need " + std::to_string(header) + ")");
    const std::uint32_t found = read_be32(bytes, 0);
    if (found != magic)
        throw IdxError(origin + ": bad magic " + hex32(found) + ", expected " + hex32(magic));

    std::vector<std::uint32_t> dims(ndims);
    std::size_t payload = 1;
    for (std::size_t d = 0; d < ndims; ++d) {
        dims[d] = read_be32(bytes, 4 + 4 * d);
        if (dims[d] != 0 && payload > std::numeric_limits<std::size_t>::max() / dims[d])
            throw IdxError(origin + ": dimension product overflows");
        payload *= dims[d];
    }
    if (bytes.size() - header != payload)
        throw IdxError(origin + ": payload is " + std::to_string(bytes.size() - header) +
                       " bytes but the header declares " + std::to_string(payload) +
                       (bytes.size() - header < payload ? " (truncated file)" : " (trailing bytes)"));
    return dims;
}

bool has_gz_suffix(const std::filesystem::path& path) { return path.extension() == ".gz"; }

} // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    if (has_gz_suffix(path)) {
        gzFile file = gzopen(path.c_str(), "rb");
        if (file == nullptr) throw IdxError(path.string() + ": cannot open");
        std::vector<std::uint8_t> out;
        std::uint8_t chunk[1 << 16];
        for (;;) {
            const int got = gzread(file, chunk, sizeof chunk);
            if (got < 0) {
                int code = 0;
                const std::string msg = gzerror(file, &code);
                gzclose(file);
                throw IdxError(path.string() + ": gzip error: " + msg);
            }
            if (got == 0) break;
            out.insert(out.end(), chunk, chunk + got);
        }
        gzclose(file);
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IdxError(path.string() + ": cannot open");
    std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IdxError(path.string() + ": read error");
    return out;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (has_gz_suffix(path)) {
        gzFile file = gzopen(path.c_str(), "wb");
        if (file == nullptr) throw IdxError(path.string() + ": cannot create");
        const int wrote = bytes.empty() ? 0 : gzwrite(file, bytes.data(), static_cast<unsigned>(bytes.size()));
        gzclose(file);
        if (wrote != static_cast<int>(bytes.size())) throw IdxError(path.string() + ": gzip write failed");
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IdxError(path.string() + ": cannot create");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IdxError(path.string() + ": write failed");
}

DenseMatrix parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& origin) {
    const auto dims = parse_header(bytes, kImageMagic, 3, origin);
    const std::size_t n = dims[0];
    const std::size_t pixels = std::size_t{dims[1]} * dims[2];
    DenseMatrix images(n, pixels);
    auto out = images.data();
    const auto payload = bytes.subspan(16);
    for (std::size_t k = 0; k < payload.size(); ++k) out[k] = static_cast<double>(payload[k]) / 255.0;
    return images;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& origin) {
    parse_header(bytes, kLabelMagic, 1, origin);
    std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.end());
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= kNumClasses)
            throw IdxError(origin + ": label " + std::to_string(labels[i]) + " at index " +
                           std::to_string(i) + " is not a digit class");
    return labels;
}

DenseMatrix load_idx_images(const std::filesystem::path& path) {
    return parse_idx_images(read_file_bytes(path), path.string());
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path) {
    return parse_idx_labels(read_file_bytes(path), path.string());
}

Dataset load_dataset(const std::filesystem::path& images, const std::filesystem::path& labels) {
    Dataset data{load_idx_images(images), load_idx_labels(labels)};
    if (data.images.rows() != data.labels.size())
        throw IdxError(images.string() + " has " + std::to_string(data.images.rows()) + " images but " +
                       labels.string() + " has " + std::to_string(data.labels.size()) + " labels");
    return data;
}

std::vector<std::uint8_t> encode_idx_images(const DenseMatrix& images, std::uint32_t rows, std::uint32_t cols) {
    if (std::size_t{rows} * cols != images.cols())
        throw IdxError("encode_idx_images: " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " does not match row length " + std::to_string(images.cols()));
    std::vector<std::uint8_t> out;
    out.reserve(16 + images.size());
    append_be32(out, kImageMagic);
    append_be32(out, static_cast<std::uint32_t>(images.rows()));
    append_be32(out, rows);
    append_be32(out, cols);
    for (double v : images.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw IdxError("encode_idx_images: pixel outside [0, 1]");
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
    return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    append_be32(out, kLabelMagic);
    append_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

} // namespace eqprune::mnist
