#include "eqprune/mnist.hpp"

#include <algorithm>
#include <numeric>

namespace eqprune::mnist {

BatchPlan::BatchPlan(std::size_t num_samples, std::size_t batch_size)
    : batch_size_(batch_size), order_(num_samples), cursor_(num_samples) {
    if (batch_size == 0) throw std::invalid_argument("BatchPlan: batch size must be positive");
    if (num_samples == 0) throw std::invalid_argument("BatchPlan: empty dataset");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
}

std::size_t BatchPlan::batches_per_epoch() const noexcept {
    return (order_.size() + batch_size_ - 1) / batch_size_;
}

std::span<const std::size_t> BatchPlan::next(Rng& rng) {
    if (cursor_ == order_.size()) {
        // Epoch boundary: permute the previous order in place.
        rng_shuffle(rng, order_);
        cursor_ = 0;
        ++epoch_;
    }
    const std::size_t take = std::min(batch_size_, order_.size() - cursor_);
    std::span<const std::size_t> batch{order_.data() + cursor_, take};
    cursor_ += take;
    return batch;
}

Batch gather(const Dataset& data, std::span<const std::size_t> indices) {
    Batch batch{DenseMatrix(indices.size(), data.images.cols()), {}};
    batch.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto src = data.images.row(indices[r]);
        std::copy(src.begin(), src.end(), batch.images.row(r).begin());
        batch.labels.push_back(data.labels[indices[r]]);
    }
    return batch;
}

Batch next_batch(const Dataset& data, BatchPlan& plan, Rng& rng) {
    return gather(data, plan.next(rng));
}

} // namespace eqprune::mnist
