#pragma once

#include <optional>

#include "wlcusum/models.hpp"

namespace wlcusum {

/// Threshold log(gamma); guarantees E_inf[T] >= gamma for one window.
double threshold_single(double gamma);

/// Threshold log(W * gamma) for the parallel detector with windows 1..W.
double threshold_parallel(double gamma, int max_window);

/// Leading-term optimal window sqrt(trace(Sigma0 F0) log gamma / 2) / I0 before rounding.
double optimal_window_real(double gamma, const InfoNumbers& info);

/// optimal_window_real rounded to the nearest integer, floored at 1.
int optimal_window(double gamma, const InfoNumbers& info);

/// Upper bound on the worst-case average detection delay of WLCUSUM with
/// window w. Throws InfeasibleWindowError when the perturbed drift Ihat0 <= 0.
double wadd_upper_bound(double gamma, int w, const InfoNumbers& info);

/// Upper bound on the mean overshoot of the cumulative-sum stopping time at threshold nu.
double overshoot_upper_bound(double nu, int w, const InfoNumbers& info);

/// log(gamma) / I0, the first-order CUSUM delay.
double cusum_delay_first_order(double gamma, double I0);

/// Whether Ihat0(w) > 0, i.e. w exceeds trace(Sigma0 F0) / (2 I0).
bool window_feasible(int w, const InfoNumbers& info);

struct CalibrationReport {
    double gamma = 0.0;
    double threshold = 0.0;
    std::optional<int> max_window;
    std::optional<double> parallel_threshold;
    int optimal_window = 1;
    double optimal_window_real = 0.0;
    double first_order_delay = 0.0;
    std::optional<double> wadd_upper_bound;  // empty when w_opt is infeasible
};

CalibrationReport calibrate(double gamma, std::optional<int> max_window, const Model& model,
                            const ParameterVector& theta);

}  // namespace wlcusum
