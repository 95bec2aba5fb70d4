#pragma once

// IDX (MNIST) readers/writers and shuffled mini-batch iteration.
//
// Wire format: big-endian u32 magic (0x00000803 images, 0x00000801 labels),
// big-endian u32 dimension sizes, then unsigned bytes in row-major order.
// Paths ending in ".gz" are decompressed transparently.

#include "eqprune/numkit.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace eqprune::mnist {

inline constexpr std::uint32_t kImageMagic = 0x00000803;
inline constexpr std::uint32_t kLabelMagic = 0x00000801;
inline constexpr std::size_t kNumClasses = 10;

class IdxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    DenseMatrix images;                 // n x (rows * cols), values in [0, 1]
    std::vector<std::uint8_t> labels;   // n class ids in 0..9

    std::size_t size() const noexcept { return labels.size(); }
};

/// Pixel bytes divided by 255.
DenseMatrix load_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

/// Loads and cross-checks an image/label pair.
Dataset load_dataset(const std::filesystem::path& images, const std::filesystem::path& labels);

DenseMatrix parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes,
                                           const std::string& origin = "<memory>");

/// Inverse of the loaders: pixels are mapped back with round(v * 255).
std::vector<std::uint8_t> encode_idx_images(const DenseMatrix& images, std::uint32_t rows,
                                            std::uint32_t cols);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

/// Raw file contents, gunzipped when the name ends in ".gz".
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Walks a dataset in shuffled mini-batches; the order is redrawn at the
/// start of every epoch.
class BatchPlan {
public:
    BatchPlan(std::size_t num_samples, std::size_t batch_size);

    std::size_t batch_size() const noexcept { return batch_size_; }
    std::size_t batches_per_epoch() const noexcept;
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t cursor() const noexcept { return cursor_; }
    std::span<const std::size_t> order() const noexcept { return order_; }

    /// Indices of the next batch (the last one of an epoch may be short).
    std::span<const std::size_t> next(Rng& rng);

private:
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t cursor_;
    std::size_t epoch_ = 0;
};

struct Batch {
    DenseMatrix images;
    std::vector<std::uint8_t> labels;
};

Batch gather(const Dataset& data, std::span<const std::size_t> indices);

Batch next_batch(const Dataset& data, BatchPlan& plan, Rng& rng);

} // namespace eqprune::mnist
