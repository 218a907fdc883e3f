#include "wlcusum/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wlcusum {

namespace {

void require_gamma(double gamma) {
    if (!(gamma > 1.0) || !std::isfinite(gamma))
        throw DomainError("target ARL gamma must be a finite real > 1 (got " + std::to_string(gamma) +
                          ")");
}

}  // namespace

double threshold_single(double gamma) {
    require_gamma(gamma);
    return std::log(gamma);
}

double threshold_parallel(double gamma, int max_window) {
    require_gamma(gamma);
    if (max_window < 1) throw DomainError("maximal window must be at least 1");
    return std::log(static_cast<double>(max_window) * gamma);
}

double optimal_window_real(double gamma, const InfoNumbers& info) {
    if (!(gamma > std::exp(1.0))) throw DomainError("optimal window requires gamma > e");
    if (!(info.I0 > 0.0)) throw DomainError("optimal window requires I0 > 0");
    const double tr = trace_of_product(info.Sigma0, info.F0);
    return std::sqrt(tr) / (info.I0 * std::sqrt(2.0)) * std::sqrt(std::log(gamma));
}

int optimal_window(double gamma, const InfoNumbers& info) {
    return std::max(1, static_cast<int>(std::lround(optimal_window_real(gamma, info))));
}

bool window_feasible(int w, const InfoNumbers& info) {
    return approx_info_numbers(info, w).Ihat0 > 0.0;
}

double wadd_upper_bound(double gamma, int w, const InfoNumbers& info) {
    require_gamma(gamma);
    const auto a = approx_info_numbers(info, w);
    if (!(a.Ihat0 > 0.0))
        throw InfeasibleWindowError("window " + std::to_string(w) +
                                    " too small: perturbed post-change drift is not positive");
    const double lg = std::log(gamma);
    const double ratio = a.Jhat0 / a.Ihat0;
    const double wi0 = static_cast<double>(w) * info.I0;
    return (lg + ratio + std::sqrt(ratio * lg) + wi0 + std::sqrt(ratio * wi0)) / a.Ihat0;
}

double overshoot_upper_bound(double nu, int w, const InfoNumbers& info) {
    const auto a = approx_info_numbers(info, w);
    if (!(a.Ihat0 > 0.0))
        throw InfeasibleWindowError("window " + std::to_string(w) +
                                    " too small: perturbed post-change drift is not positive");
    const double ratio = a.Jhat0 / a.Ihat0;
    return ratio + std::sqrt(ratio * nu) + std::sqrt(ratio * info.I0 * static_cast<double>(w));
}

double cusum_delay_first_order(double gamma, double I0) {
    require_gamma(gamma);
    if (!(I0 > 0.0)) throw DomainError("I0 must be positive");
    return std::log(gamma) / I0;
}

CalibrationReport calibrate(double gamma, std::optional<int> max_window, const Model& model,
                            const ParameterVector& theta) {
    CalibrationReport r;
    r.gamma = gamma;
    r.threshold = threshold_single(gamma);
    if (max_window) {
        r.max_window = max_window;
        r.parallel_threshold = threshold_parallel(gamma, *max_window);
    }
    const InfoNumbers info = info_numbers(model, theta);
    r.optimal_window_real = optimal_window_real(gamma, info);
    r.optimal_window = optimal_window(gamma, info);
    r.first_order_delay = cusum_delay_first_order(gamma, info.I0);
    if (window_feasible(r.optimal_window, info))
        r.wadd_upper_bound = wadd_upper_bound(gamma, r.optimal_window, info);
    return r;
}

}  // namespace wlcusum
