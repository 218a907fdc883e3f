#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "wlcusum/models.hpp"
#include "wlcusum/types.hpp"

namespace wlcusum {

// Running sums are rebuilt from the buffered samples every this many pushes.
inline constexpr std::uint64_t kSumRefreshInterval = 4096;

/// Last-w sample buffer with running sums of x and x*x.
class SlidingWindow {
public:
    SlidingWindow(std::size_t capacity, std::size_t dim);

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t count() const noexcept { return count_; }
    bool ready() const noexcept { return count_ == capacity_; }
    std::uint64_t pushes() const noexcept { return pushes_; }

    void push(const Observation& x);
    void push_unchecked(std::span<const double> x);

    std::span<const double> running_sum() const noexcept { return sum_; }
    std::span<const double> running_sq_sum() const noexcept { return sum_sq_; }

    /// Buffered samples, oldest first.
    std::vector<Observation> samples() const;

    ParameterVector estimate(const Model& model) const;
    void estimate_into(const Model& model, std::span<double> out) const;

    void clear();

private:
    std::span<const double> slot(std::size_t i) const { return {ring_.data() + i * dim_, dim_}; }
    void refresh();

    std::size_t capacity_;
    std::size_t dim_;
    std::vector<double> ring_;  // capacity * dim, row per slot
    std::size_t head_ = 0;      // next slot to write (== oldest when full)
    std::size_t count_ = 0;
    std::uint64_t pushes_ = 0;
    std::vector<double> sum_;
    std::vector<double> sum_sq_;
};

/// Shared buffer of the last W samples with running sums for every window
/// size 1..W. One push costs Theta(W * dim); each estimate is Theta(dim).
///
/// The size-w sums follow exactly the same update and refresh schedule as a
/// SlidingWindow of capacity w fed the same stream, so the two produce
/// bit-identical estimates.
class PrefixEstimateBank {
public:
    PrefixEstimateBank(std::size_t max_window, std::size_t dim);

    std::size_t max_window() const noexcept { return max_window_; }
    std::size_t dim() const noexcept { return dim_; }
    std::uint64_t pushes() const noexcept { return pushes_; }
    /// Largest window size whose estimate is available.
    std::size_t available() const noexcept { return count_; }

    void push(const Observation& x);
    void push_unchecked(std::span<const double> x);

    std::span<const double> running_sum(std::size_t w) const;

    ParameterVector estimate(const Model& model, std::size_t w) const;
    void estimate_into(const Model& model, std::size_t w, std::span<double> out) const;
    std::map<std::size_t, ParameterVector> estimates_all(const Model& model) const;

    void clear();

private:
    // i-th most recent sample, i = 0 is the newest.
    std::span<const double> recent(std::size_t i) const;
    void refresh();

    std::size_t max_window_;
    std::size_t dim_;
    std::vector<double> ring_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
    std::uint64_t pushes_ = 0;
    std::vector<double> sums_;     // (w-1) * dim + i
    std::vector<double> sums_sq_;
};

}  // namespace wlcusum
