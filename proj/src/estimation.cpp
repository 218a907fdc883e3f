#include "wlcusum/estimation.hpp"

#include <algorithm>
#include <string>

namespace wlcusum {

SlidingWindow::SlidingWindow(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), ring_(capacity * dim, 0.0), sum_(dim, 0.0), sum_sq_(dim, 0.0) {
    if (capacity == 0) throw UsageError("window capacity must be at least 1");
    if (dim == 0) throw UsageError("observation dimension must be at least 1");
}

void SlidingWindow::push(const Observation& x) {
    if (x.size() != dim_)
        throw InputError("observation has dimension " + std::to_string(x.size()) +
                         ", window expects " + std::to_string(dim_));
    push_unchecked(x.view());
}

void SlidingWindow::push_unchecked(std::span<const double> x) {
    const bool evict = count_ == capacity_;
    double* dst = ring_.data() + head_ * dim_;
    for (std::size_t i = 0; i < dim_; ++i) {
        sum_[i] += x[i];
        sum_sq_[i] += x[i] * x[i];
        if (evict) {
            sum_[i] -= dst[i];
            sum_sq_[i] -= dst[i] * dst[i];
        }
        dst[i] = x[i];
    }
    head_ = (head_ + 1) % capacity_;
    if (!evict) ++count_;
    if (++pushes_ % kSumRefreshInterval == 0) refresh();
}

void SlidingWindow::refresh() {
    std::fill(sum_.begin(), sum_.end(), 0.0);
    std::fill(sum_sq_.begin(), sum_sq_.end(), 0.0);
    const std::size_t oldest = count_ == capacity_ ? head_ : 0;
    for (std::size_t k = 0; k < count_; ++k) {
        const auto s = slot((oldest + k) % capacity_);
        for (std::size_t i = 0; i < dim_; ++i) {
            sum_[i] += s[i];
            sum_sq_[i] += s[i] * s[i];
        }
    }
}

std::vector<Observation> SlidingWindow::samples() const {
    std::vector<Observation> out;
    out.reserve(count_);
    const std::size_t oldest = count_ == capacity_ ? head_ : 0;
    for (std::size_t k = 0; k < count_; ++k) out.emplace_back(slot((oldest + k) % capacity_));
    return out;
}

void SlidingWindow::estimate_into(const Model& model, std::span<double> out) const {
    if (!ready())
        throw NotReadyError("window holds " + std::to_string(count_) + " of " +
                            std::to_string(capacity_) + " samples");
    model.estimate_from_sums(sum_, sum_sq_, capacity_, out);
}

ParameterVector SlidingWindow::estimate(const Model& model) const {
    if (model.observation_dim() != dim_) throw InputError("model dimension does not match window");
    ParameterVector out(model.parameter_dim());
    estimate_into(model, out.view());
    return out;
}

void SlidingWindow::clear() {
    head_ = count_ = 0;
    pushes_ = 0;
    std::fill(sum_.begin(), sum_.end(), 0.0);
    std::fill(sum_sq_.begin(), sum_sq_.end(), 0.0);
}

PrefixEstimateBank::PrefixEstimateBank(std::size_t max_window, std::size_t dim)
    : max_window_(max_window),
      dim_(dim),
      ring_(max_window * dim, 0.0),
      sums_(max_window * dim, 0.0),
      sums_sq_(max_window * dim, 0.0) {
    if (max_window == 0) throw UsageError("maximal window must be at least 1");
    if (dim == 0) throw UsageError("observation dimension must be at least 1");
}

std::span<const double> PrefixEstimateBank::recent(std::size_t i) const {
    const std::size_t idx = (head_ + max_window_ - 1 - i) % max_window_;
    return {ring_.data() + idx * dim_, dim_};
}

void PrefixEstimateBank::push(const Observation& x) {
    if (x.size() != dim_)
        throw InputError("observation has dimension " + std::to_string(x.size()) +
                         ", bank expects " + std::to_string(dim_));
    push_unchecked(x.view());
}

void PrefixEstimateBank::push_unchecked(std::span<const double> x) {
    for (std::size_t w = 1; w <= max_window_; ++w) {
        const bool evict = count_ >= w;
        double* s = sums_.data() + (w - 1) * dim_;
        double* sq = sums_sq_.data() + (w - 1) * dim_;
        if (evict) {
            const auto old = recent(w - 1);
            for (std::size_t i = 0; i < dim_; ++i) {
                s[i] += x[i];
                sq[i] += x[i] * x[i];
                s[i] -= old[i];
                sq[i] -= old[i] * old[i];
            }
        } else {
            for (std::size_t i = 0; i < dim_; ++i) {
                s[i] += x[i];
                sq[i] += x[i] * x[i];
            }
        }
    }
    std::copy(x.begin(), x.end(), ring_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
    head_ = (head_ + 1) % max_window_;
    if (count_ < max_window_) ++count_;
    if (++pushes_ % kSumRefreshInterval == 0) refresh();
}

void PrefixEstimateBank::refresh() {
    for (std::size_t w = 1; w <= max_window_; ++w) {
        double* s = sums_.data() + (w - 1) * dim_;
        double* sq = sums_sq_.data() + (w - 1) * dim_;
        std::fill(s, s + dim_, 0.0);
        std::fill(sq, sq + dim_, 0.0);
        const std::size_t m = std::min(w, count_);
        for (std::size_t k = m; k-- > 0;) {
            const auto v = recent(k);
            for (std::size_t i = 0; i < dim_; ++i) {
                s[i] += v[i];
                sq[i] += v[i] * v[i];
            }
        }
    }
}

std::span<const double> PrefixEstimateBank::running_sum(std::size_t w) const {
    if (w < 1 || w > max_window_) throw UsageError("window size out of range");
    return {sums_.data() + (w - 1) * dim_, dim_};
}

void PrefixEstimateBank::estimate_into(const Model& model, std::size_t w,
                                       std::span<double> out) const {
    if (w < 1 || w > max_window_)
        throw UsageError("window size " + std::to_string(w) + " outside 1.." +
                         std::to_string(max_window_));
    if (w > count_)
        throw NotReadyError("bank holds " + std::to_string(count_) + " samples, window " +
                            std::to_string(w) + " requested");
    model.estimate_from_sums({sums_.data() + (w - 1) * dim_, dim_},
                             {sums_sq_.data() + (w - 1) * dim_, dim_}, w, out);
}

ParameterVector PrefixEstimateBank::estimate(const Model& model, std::size_t w) const {
    if (model.observation_dim() != dim_) throw InputError("model dimension does not match bank");
    ParameterVector out(model.parameter_dim());
    estimate_into(model, w, out.view());
    return out;
}

std::map<std::size_t, ParameterVector> PrefixEstimateBank::estimates_all(const Model& model) const {
    if (count_ == 0) throw NotReadyError("estimate bank is empty");
    std::map<std::size_t, ParameterVector> out;
    for (std::size_t w = 1; w <= count_; ++w) out.emplace(w, estimate(model, w));
    return out;
}

void PrefixEstimateBank::clear() {
    head_ = count_ = 0;
    pushes_ = 0;
    std::fill(sums_.begin(), sums_.end(), 0.0);
    std::fill(sums_sq_.begin(), sums_sq_.end(), 0.0);
}

}  // namespace wlcusum
