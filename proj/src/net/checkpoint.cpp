#include "eqprune/checkpoint.hpp"

#include "eqprune/mnist.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <system_error>

namespace eqprune {
namespace {

constexpr char kMagic[8] = {'E', 'Q', 'P', 'R', 'U', 'N', 'E', '\0'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void u64(std::uint64_t v) {
        for (int k = 0; k < 8; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void f64s(std::span<const double> values) {
        for (double v : values) u64(std::bit_cast<std::uint64_t>(v));
    }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n)
            throw CheckpointError(std::string("truncated while reading ") + what, pos_);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= std::uint32_t{bytes_[pos_ + k]} << (8 * k);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= std::uint64_t{bytes_[pos_ + k]} << (8 * k);
        pos_ += 8;
        return v;
    }
    std::vector<double> f64s(std::size_t count, const char* what) {
        if (count > (bytes_.size() - pos_) / 8) throw CheckpointError(std::string("truncated while reading ") + what, pos_);
        std::vector<double> out(count);
        for (auto& v : out) v = std::bit_cast<double>(u64(what));
        return out;
    }
    std::string text(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void write_layer(Writer& w, const DenseMatrix& weights, std::span<const double> biases) {
    w.u32(static_cast<std::uint32_t>(weights.rows()));
    w.u32(static_cast<std::uint32_t>(weights.cols()));
    w.f64s(weights.data());
    w.f64s(biases);
}

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParticipatingNet& net, const std::string& config_json) {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(config_json.size()));
    w.raw(config_json.data(), config_json.size());
    w.u32(static_cast<std::uint32_t>(net.hidden().size()));
    for (const auto& layer : net.hidden()) {
        write_layer(w, layer.weights, layer.biases);
        w.f64s(layer.participation);
    }
    write_layer(w, net.output().weights, net.output().biases);
    w.u64(fnv1a(w.bytes()));
    return std::move(w.bytes());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const std::string magic = r.text(sizeof kMagic, "magic");
    if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw CheckpointError("not an eqprune checkpoint", 0);
    const std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version), r.offset() - 4);
    const std::uint32_t config_len = r.u32("config length");
    std::string config = r.text(config_len, "config");

    const std::size_t hidden_offset = r.offset();
    const std::uint32_t hidden_count = r.u32("hidden layer count");
    if (hidden_count == 0) throw CheckpointError("checkpoint has no hidden layers", hidden_offset);
    std::vector<ParticipatingLayer> hidden;
    for (std::uint32_t l = 0; l < hidden_count; ++l) {
        const std::uint32_t rows = r.u32("layer rows");
        const std::uint32_t cols = r.u32("layer cols");
        ParticipatingLayer layer;
        layer.weights = DenseMatrix(rows, cols, r.f64s(std::size_t{rows} * cols, "hidden weights"));
        layer.biases = r.f64s(rows, "hidden biases");
        const std::size_t gates_at = r.offset();
        layer.participation = r.f64s(rows, "participation");
        for (double s : layer.participation)
            if (!(s >= 0.0 && s <= 1.0)) throw CheckpointError("participation value outside [0, 1]", gates_at);
        hidden.push_back(std::move(layer));
    }
    LinearLayer output;
    const std::uint32_t rows = r.u32("output rows");
    const std::uint32_t cols = r.u32("output cols");
    output.weights = DenseMatrix(rows, cols, r.f64s(std::size_t{rows} * cols, "output weights"));
    output.biases = r.f64s(rows, "output biases");

    const std::size_t body_end = r.offset();
    const std::uint64_t stored = r.u64("checksum");
    if (r.offset() != bytes.size()) throw CheckpointError("trailing bytes after checksum", r.offset());
    if (stored != fnv1a(bytes.first(body_end))) throw CheckpointError("checksum mismatch", body_end);

    try {
        return {ParticipatingNet(std::move(hidden), std::move(output)), std::move(config)};
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("inconsistent layer shapes: ") + e.what(), hidden_offset);
    }
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(tmp.string() + ": cannot create");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw std::runtime_error(tmp.string() + ": write failed");
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_checkpoint(const std::filesystem::path& path, const ParticipatingNet& net, const std::string& config_json) {
    write_file_atomic(path, encode_checkpoint(net, config_json));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = mnist::read_file_bytes(path);
    } catch (const mnist::IdxError& e) {
        throw CheckpointError(e.what(), 0);
    }
    return decode_checkpoint(bytes);
}

} // namespace eqprune
