#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wlcusum/estimation.hpp"
#include "wlcusum/models.hpp"

namespace wlcusum {

/// One scalar statistic recursion with its stopping flag.
struct DetectorState {
    std::uint64_t t = 0;
    double statistic = 0.0;
    double threshold = std::numeric_limits<double>::infinity();
    bool stopped = false;
};

// Reflected CUSUM update: S <- max(S, 0) + llr; stops on S >= threshold.
DetectorState cusum_step(DetectorState state, double llr);
// Plain cumulative sum U <- U + llr (no reflection).
DetectorState cumulative_step(DetectorState state, double llr);
// Shiryaev-Roberts-type update L <- (L + 1) * ratio. `state.statistic`
// holds log L (so L = 0 is -inf); stops on log L >= threshold.
DetectorState sr_step(DetectorState state, double likelihood_ratio);
// Same update driven by the log ratio directly.
DetectorState sr_step_log(DetectorState state, double log_ratio);

/// max over 0 <= k < t of sum_{j=k+1}^{t} increments[j]; the non-recursive CUSUM.
double cusum_maxform_oracle(std::span<const double> increments);

/// Window-limited GLR statistic over `samples` (oldest first, newest last):
/// max over trailing segments of length 1..n of sup_theta sum llr.
double glr_window_stat(std::span<const Observation> samples, const Model& model);

struct StoppingResult {
    std::uint64_t stop_time = 0;
    double terminal_statistic = 0.0;
    double overshoot = 0.0;
    bool censored = false;
    std::optional<std::size_t> which_window;
};

/// Common interface for the sequential detectors. `time()` counts observations
/// consumed, warm-up included.
class Detector {
public:
    explicit Detector(double threshold);
    virtual ~Detector() = default;

    /// Consumes one observation; returns true once the stopping rule fires.
    bool step(const Observation& x);
    bool step_unchecked(std::span<const double> x);

    virtual void reset() = 0;
    virtual std::size_t warmup() const noexcept = 0;
    virtual std::string name() const = 0;
    virtual std::optional<std::size_t> stopping_window() const { return std::nullopt; }
    virtual const Model& model() const noexcept = 0;

    std::uint64_t time() const noexcept { return t_; }
    double threshold() const noexcept { return threshold_; }
    bool stopped() const noexcept { return stopped_; }
    /// Statistic compared against the threshold; meaningful once has_statistic().
    double statistic() const noexcept { return statistic_; }
    bool has_statistic() const noexcept { return has_statistic_; }

protected:
    // Returns the new stopping statistic, or nullopt while warming up.
    virtual std::optional<double> advance(std::span<const double> x) = 0;
    void reset_base();

private:
    double threshold_;
    std::uint64_t t_ = 0;
    double statistic_ = 0.0;
    bool has_statistic_ = false;
    bool stopped_ = false;
};

/// CUSUM with the post-change parameter known exactly.
class ExactCusumDetector final : public Detector {
public:
    ExactCusumDetector(Model model, ParameterVector theta, double threshold);

    void reset() override;
    std::size_t warmup() const noexcept override { return 0; }
    std::string name() const override { return "exact-cusum"; }
    const Model& model() const noexcept override { return model_; }
    const ParameterVector& theta() const noexcept { return theta_; }

protected:
    std::optional<double> advance(std::span<const double> x) override;

private:
    Model model_;
    ParameterVector theta_;
    DetectorState state_;
};

/// Window-limited CUSUM: the CUSUM increment uses the MLE computed from the
/// previous w samples. The plain cumulative sum U and the log of the SR-type
/// statistic L are tracked on the same increments.
class WlcusumDetector final : public Detector {
public:
    enum class StopOn { Reflected, Cumulative };

    WlcusumDetector(Model model, std::size_t window, double threshold,
                    StopOn rule = StopOn::Reflected,
                    std::optional<ParameterVector> forced_estimate = std::nullopt);

    void reset() override;
    std::size_t warmup() const noexcept override { return window_.capacity(); }
    std::string name() const override { return "wlcusum"; }
    const Model& model() const noexcept override { return model_; }

    std::size_t window() const noexcept { return window_.capacity(); }
    double cusum_statistic() const noexcept { return s_.statistic; }
    double cumulative_statistic() const noexcept { return u_.statistic; }
    double log_sr_statistic() const noexcept { return l_.statistic; }
    double last_increment() const noexcept { return last_llr_; }
    /// Estimate used for the most recent increment.
    std::span<const double> last_estimate() const noexcept { return estimate_; }

protected:
    std::optional<double> advance(std::span<const double> x) override;

private:
    Model model_;
    SlidingWindow window_;
    StopOn rule_;
    std::optional<ParameterVector> forced_;
    std::vector<double> estimate_;
    DetectorState s_, u_, l_;
    double last_llr_ = 0.0;
};

/// WLCUSUMs for all window sizes 1..W run side by side on one shared
/// estimate bank; stops when any per-window statistic reaches the threshold.
class ParallelWlcusumDetector final : public Detector {
public:
    ParallelWlcusumDetector(Model model, std::size_t max_window, double threshold);

    void reset() override;
    std::size_t warmup() const noexcept override { return 1; }
    std::string name() const override { return "parallel"; }
    const Model& model() const noexcept override { return model_; }
    std::optional<std::size_t> stopping_window() const override { return which_; }

    std::size_t max_window() const noexcept { return bank_.max_window(); }
    /// Statistic of window w, or nullopt while that window warms up.
    std::optional<double> window_statistic(std::size_t w) const;

protected:
    std::optional<double> advance(std::span<const double> x) override;

private:
    Model model_;
    PrefixEstimateBank bank_;
    std::vector<DetectorState> per_window_;
    std::vector<double> estimate_;
    std::optional<std::size_t> which_;
};

/// Window-limited GLR: maximizes over the changepoint in the last w steps
/// and over the parameter set, recomputed from scratch each step.
class GlrDetector final : public Detector {
public:
    GlrDetector(Model model, std::size_t window, double threshold);

    void reset() override;
    std::size_t warmup() const noexcept override { return 0; }
    std::string name() const override { return "glr"; }
    const Model& model() const noexcept override { return model_; }
    std::size_t window() const noexcept { return capacity_; }

protected:
    std::optional<double> advance(std::span<const double> x) override;

private:
    Model model_;
    std::size_t capacity_;
    std::vector<double> samples_;  // flat trailing samples, oldest first
    std::size_t count_ = 0;
    std::vector<double> scratch_;
};

/// Writes the next observation into `out`; returns false once exhausted.
using ObservationSource = std::function<bool(std::span<double> out)>;
/// Called after every step.
using StepObserver = std::function<void(const Detector&)>;

/// Steps `detector` until it stops or `max_steps` observations have been
/// consumed. An exhausted source also ends the run as censored.
StoppingResult run_until_stop(Detector& detector, const ObservationSource& source,
                              std::uint64_t max_steps, const StepObserver& observer = {});

namespace detail {
// GLR over a flat buffer of n samples (oldest first), shared by the free
// function and the detector. `scratch` is resized as needed.
double glr_flat(const Model& model, std::span<const double> flat, std::size_t n,
                std::vector<double>& scratch);
}  // namespace detail

}  // namespace wlcusum
