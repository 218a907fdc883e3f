#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wlcusum/detectors.hpp"
#include "wlcusum/models.hpp"

namespace wlcusum {

enum class MethodKind { ExactCusum, Wlcusum, Parallel, Glr, CusumMinStrength };

/// Detection method plus its window parameter (w, or W for the parallel detector).
struct MethodSpec {
    MethodKind kind = MethodKind::ExactCusum;
    std::size_t window = 0;

    /// Parses "exact-cusum", "cusum-min-strength", "wlcusum(4)", "parallel(15)", "glr(30)".
    static MethodSpec parse(const std::string& text);
    /// Method name as written in the CSV `method` column.
    std::string name() const;
    /// name() plus the window, in the form accepted by parse().
    std::string label() const;
    bool has_window() const noexcept {
        return kind != MethodKind::ExactCusum && kind != MethodKind::CusumMinStrength;
    }

    friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

enum class Regime { PreChange, PostChangeAtZero };

std::string metric_name(Regime r);  // "arl" or "wadd"
Regime parse_regime(const std::string& text);

/// Threshold used for `method` at target ARL gamma.
double method_threshold(const MethodSpec& method, double gamma);

/// Fresh detector for `method`, calibrated at threshold nu.
std::unique_ptr<Detector> make_detector(const MethodSpec& method, const Model& model,
                                        const ParameterVector& theta, double nu);

/// One cell of an experiment: a single method, target ARL and regime.
struct ExperimentConfig {
    Model model = Model::gaussian_mean_shift(1, 0.5);
    ParameterVector theta{1.0};
    MethodSpec method;
    double gamma = 1000.0;
    Regime regime = Regime::PostChangeAtZero;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> max_steps;  // default: 200*gamma (ARL) or 1e5 (WADD)
    std::optional<double> threshold;         // overrides method_threshold
    unsigned workers = 1;
};

std::uint64_t default_max_steps(Regime regime, double gamma);

struct MetricsRecord {
    std::string method;
    double gamma = 0.0;
    std::optional<std::size_t> window;
    std::string metric;
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t trials = 0;
    std::size_t censored = 0;
    double mean_overshoot = 0.0;

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

using DetectorFactory = std::function<std::unique_ptr<Detector>()>;

/// Runs `trials` independent paths. Trial i draws its samples from
/// RngStream(seed, i), so results are identical for any worker count.
std::vector<StoppingResult> run_trials(const DetectorFactory& factory, const Model& model,
                                       const ParameterVector& theta, Regime regime,
                                       std::size_t trials, std::uint64_t seed,
                                       std::uint64_t max_steps, unsigned workers = 1);

/// Aggregates index-ordered trial results into one record.
MetricsRecord summarize(const std::vector<StoppingResult>& results, const MethodSpec& method,
                        double gamma, Regime regime);

MetricsRecord simulate(const ExperimentConfig& config);
/// simulate() under the pre-change law.
MetricsRecord simulate_arl(ExperimentConfig config);
/// simulate() with the change at time zero.
MetricsRecord simulate_wadd(ExperimentConfig config);

struct SweepConfig {
    Model model = Model::gaussian_mean_shift(1, 0.5);
    ParameterVector theta{1.0};
    std::vector<MethodSpec> methods;
    std::vector<double> gammas;
    std::vector<Regime> regimes{Regime::PostChangeAtZero};
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> max_steps;
    unsigned workers = 1;
};

/// One record per method x gamma x regime, sorted by (method, window, gamma, metric).
std::vector<MetricsRecord> sweep(const SweepConfig& config);

struct WindowSearchResult {
    std::vector<MetricsRecord> records;  // one WADD record per window, ascending w
    std::size_t argmin = 0;
};

WindowSearchResult window_search(const SweepConfig& base, double gamma, std::size_t w_min,
                                 std::size_t w_max);

inline constexpr const char* kCsvHeader =
    "method,gamma,window,metric,mean,stderr,trials,censored,mean_overshoot";

std::string format_double(double v);
void write_csv(const std::vector<MetricsRecord>& records, std::ostream& out);
void write_csv(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_csv(std::istream& in);
std::vector<MetricsRecord> read_csv(const std::string& path);

}  // namespace wlcusum
