#include "wlcusum/detectors.hpp"

#include <algorithm>
#include <cmath>

namespace wlcusum {

namespace {

// log(e^a + 1) without overflow.
double log1p_exp(double a) {
    if (a == -std::numeric_limits<double>::infinity()) return 0.0;
    return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

void require_running(const DetectorState& s) {
    if (s.stopped) throw UsageError("detector already stopped; reset before stepping again");
}

}  // namespace

DetectorState cusum_step(DetectorState state, double llr) {
    require_running(state);
    state.statistic = std::max(state.statistic, 0.0) + llr;
    state.stopped = state.statistic >= state.threshold;
    ++state.t;
    return state;
}

DetectorState cumulative_step(DetectorState state, double llr) {
    require_running(state);
    state.statistic += llr;
    state.stopped = state.statistic >= state.threshold;
    ++state.t;
    return state;
}

DetectorState sr_step_log(DetectorState state, double log_ratio) {
    require_running(state);
    state.statistic = log1p_exp(state.statistic) + log_ratio;
    state.stopped = state.statistic >= state.threshold;
    ++state.t;
    return state;
}

DetectorState sr_step(DetectorState state, double likelihood_ratio) {
    if (!(likelihood_ratio >= 0.0)) throw DomainError("likelihood ratio must be non-negative");
    return sr_step_log(state, std::log(likelihood_ratio));
}

double cusum_maxform_oracle(std::span<const double> increments) {
    if (increments.empty()) throw UsageError("max-form CUSUM needs at least one increment");
    double best = -std::numeric_limits<double>::infinity();
    const std::size_t t = increments.size();
    for (std::size_t k = 0; k < t; ++k) {
        double s = 0.0;
        for (std::size_t j = k; j < t; ++j) s += increments[j];
        best = std::max(best, s);
    }
    return best;
}

namespace detail {

double glr_flat(const Model& model, std::span<const double> flat, std::size_t n,
                std::vector<double>& scratch) {
    const std::size_t k = model.observation_dim();
    const std::size_t p = model.parameter_dim();
    scratch.assign(2 * k + p, 0.0);
    std::span<double> sum(scratch.data(), k);
    std::span<double> sum_sq(scratch.data() + k, k);
    std::span<double> theta(scratch.data() + 2 * k, p);
    const bool gaussian = model.family() == Family::GaussianMeanShift;
    const double barrier = model.barrier();

    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t len = 1; len <= n; ++len) {
        const double* x = flat.data() + (n - len) * k;
        for (std::size_t i = 0; i < k; ++i) {
            sum[i] += x[i];
            sum_sq[i] += x[i] * x[i];
        }
        double value;
        if (gaussian) {
            const double m = norm(sum) / static_cast<double>(len);
            const double dn = static_cast<double>(len);
            value = (barrier == 0.0 || m >= barrier) ? dn * m * m / 2.0
                                                     : dn * (barrier * m - barrier * barrier / 2.0);
        } else {
            model.estimate_from_sums(sum, sum_sq, len, theta);
            value = 0.0;
            for (std::size_t s = n - len; s < n; ++s)
                value += model.llr_unchecked({flat.data() + s * k, k}, theta);
        }
        best = std::max(best, value);
    }
    return best;
}

}  // namespace detail

double glr_window_stat(std::span<const Observation> samples, const Model& model) {
    if (samples.empty()) throw UsageError("GLR statistic needs at least one sample");
    const std::size_t k = model.observation_dim();
    std::vector<double> flat;
    flat.reserve(samples.size() * k);
    for (const auto& s : samples) {
        model.check_observation(s.view());
        flat.insert(flat.end(), s.values().begin(), s.values().end());
    }
    std::vector<double> scratch;
    return detail::glr_flat(model, flat, samples.size(), scratch);
}

// ---------------------------------------------------------------------------

Detector::Detector(double threshold) : threshold_(threshold) {
    if (std::isnan(threshold)) throw UsageError("threshold must be a number");
}

bool Detector::step(const Observation& x) {
    model().check_observation(x.view());
    return step_unchecked(x.view());
}

bool Detector::step_unchecked(std::span<const double> x) {
    if (stopped_) throw UsageError("detector already stopped; reset before stepping again");
    ++t_;
    if (auto s = advance(x)) {
        statistic_ = *s;
        has_statistic_ = true;
        stopped_ = statistic_ >= threshold_;
    }
    return stopped_;
}

void Detector::reset_base() {
    t_ = 0;
    statistic_ = 0.0;
    has_statistic_ = false;
    stopped_ = false;
}

ExactCusumDetector::ExactCusumDetector(Model model, ParameterVector theta, double threshold)
    : Detector(threshold), model_(std::move(model)), theta_(std::move(theta)) {
    model_.check_parameter(theta_.view());
    reset();
}

void ExactCusumDetector::reset() {
    reset_base();
    state_ = DetectorState{};
}

std::optional<double> ExactCusumDetector::advance(std::span<const double> x) {
    state_ = cusum_step(state_, model_.llr_unchecked(x, theta_.view()));
    return state_.statistic;
}

WlcusumDetector::WlcusumDetector(Model model, std::size_t window, double threshold, StopOn rule,
                                 std::optional<ParameterVector> forced_estimate)
    : Detector(threshold),
      model_(std::move(model)),
      window_(window, model_.observation_dim()),
      rule_(rule),
      forced_(std::move(forced_estimate)),
      estimate_(model_.parameter_dim(), 0.0) {
    if (forced_) model_.check_parameter(forced_->view());
    reset();
}

void WlcusumDetector::reset() {
    reset_base();
    window_.clear();
    s_ = DetectorState{};
    u_ = DetectorState{};
    l_ = DetectorState{};
    l_.statistic = -std::numeric_limits<double>::infinity();  // L_w = 0
    last_llr_ = 0.0;
}

std::optional<double> WlcusumDetector::advance(std::span<const double> x) {
    if (!window_.ready()) {
        window_.push_unchecked(x);
        return std::nullopt;
    }
    // Estimate from the previous w samples; x itself is pushed afterwards.
    if (forced_)
        std::copy(forced_->values().begin(), forced_->values().end(), estimate_.begin());
    else
        window_.estimate_into(model_, estimate_);
    last_llr_ = model_.llr_unchecked(x, estimate_);
    s_ = cusum_step(s_, last_llr_);
    u_ = cumulative_step(u_, last_llr_);
    l_ = sr_step_log(l_, last_llr_);
    window_.push_unchecked(x);
    return rule_ == StopOn::Reflected ? s_.statistic : u_.statistic;
}

ParallelWlcusumDetector::ParallelWlcusumDetector(Model model, std::size_t max_window,
                                                 double threshold)
    : Detector(threshold),
      model_(std::move(model)),
      bank_(max_window, model_.observation_dim()),
      per_window_(max_window),
      estimate_(model_.parameter_dim(), 0.0) {
    reset();
}

void ParallelWlcusumDetector::reset() {
    reset_base();
    bank_.clear();
    std::fill(per_window_.begin(), per_window_.end(), DetectorState{});
    which_.reset();
}

std::optional<double> ParallelWlcusumDetector::window_statistic(std::size_t w) const {
    if (w < 1 || w > per_window_.size()) throw UsageError("window size out of range");
    if (per_window_[w - 1].t == 0) return std::nullopt;
    return per_window_[w - 1].statistic;
}

std::optional<double> ParallelWlcusumDetector::advance(std::span<const double> x) {
    const std::size_t active = bank_.available();
    std::optional<double> best;
    for (std::size_t w = 1; w <= active; ++w) {
        bank_.estimate_into(model_, w, estimate_);
        auto& st = per_window_[w - 1];
        st = cusum_step(st, model_.llr_unchecked(x, estimate_));
        if (!best || st.statistic > *best) best = st.statistic;
        if (!which_ && st.statistic >= threshold()) which_ = w;
    }
    bank_.push_unchecked(x);
    return best;
}

GlrDetector::GlrDetector(Model model, std::size_t window, double threshold)
    : Detector(threshold), model_(std::move(model)), capacity_(window) {
    if (window == 0) throw UsageError("GLR window must be at least 1");
    samples_.reserve(capacity_ * model_.observation_dim());
    reset();
}

void GlrDetector::reset() {
    reset_base();
    samples_.clear();
    count_ = 0;
}

std::optional<double> GlrDetector::advance(std::span<const double> x) {
    const std::size_t k = model_.observation_dim();
    if (count_ == capacity_) {
        samples_.erase(samples_.begin(), samples_.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
        ++count_;
    }
    samples_.insert(samples_.end(), x.begin(), x.end());
    return detail::glr_flat(model_, samples_, count_, scratch_);
}

StoppingResult run_until_stop(Detector& detector, const ObservationSource& source,
                              std::uint64_t max_steps, const StepObserver& observer) {
    if (!(detector.threshold() > 0.0)) throw UsageError("threshold must be positive");
    if (max_steps < 1) throw UsageError("max_steps must be at least 1");
    std::vector<double> x(detector.model().observation_dim());
    StoppingResult r;
    bool stopped = detector.stopped();
    while (!stopped && detector.time() < max_steps) {
        if (!source(x)) break;
        stopped = detector.step_unchecked(x);
        if (observer) observer(detector);
    }
    r.stop_time = detector.time();
    r.terminal_statistic = detector.has_statistic() ? detector.statistic() : 0.0;
    r.censored = !stopped;
    r.overshoot = stopped ? r.terminal_statistic - detector.threshold() : 0.0;
    if (stopped) r.which_window = detector.stopping_window();
    return r;
}

}  // namespace wlcusum
