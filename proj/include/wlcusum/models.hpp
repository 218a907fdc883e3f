#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wlcusum/rng.hpp"
#include "wlcusum/types.hpp"

namespace wlcusum {

// Floor applied to variance estimates so degenerate windows stay finite.
inline constexpr double kVarianceFloor = 1e-8;

enum class Family {
    GaussianMeanShift,          // N(0, I_K) -> N(theta, I_K)
    LaplaceToNormalKnownVar,    // Laplace(0, 1/sqrt2) -> N(mu, sigma^2), sigma^2 known
    LaplaceToNormalUnknownVar,  // Laplace(0, 1/sqrt2) -> N(mu, v), theta = (mu, v)
};

std::string family_name(Family f);
Family parse_family(const std::string& name);

/// Constraint set for the post-change parameter.
class ParameterSet {
public:
    enum class Kind { FullSpace, NormBarrier, MeanAndPositiveVariance };

    static ParameterSet full_space() { return ParameterSet(Kind::FullSpace, 0.0); }
    static ParameterSet norm_barrier(double barrier);
    static ParameterSet mean_and_positive_variance() {
        return ParameterSet(Kind::MeanAndPositiveVariance, 0.0);
    }

    Kind kind() const noexcept { return kind_; }
    double barrier() const noexcept { return barrier_; }
    bool contains(std::span<const double> theta) const;

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

private:
    ParameterSet(Kind k, double b) : kind_(k), barrier_(b) {}
    Kind kind_;
    double barrier_;
};

/// Parametric pre-/post-change family. Immutable after construction.
class Model {
public:
    /// Gaussian mean shift in dimension `dim`. A barrier of 0 means the full space.
    static Model gaussian_mean_shift(std::size_t dim, double barrier);
    static Model laplace_to_normal_known_var(double variance);
    static Model laplace_to_normal_unknown_var();

    Family family() const noexcept { return family_; }
    const ParameterSet& parameter_set() const noexcept { return set_; }
    std::size_t observation_dim() const noexcept { return obs_dim_; }
    std::size_t parameter_dim() const noexcept { return param_dim_; }
    double barrier() const noexcept { return set_.barrier(); }
    double known_variance() const noexcept { return variance_; }

    double log_density_pre(const Observation& x) const;
    double log_density_post(const Observation& x, const ParameterVector& theta) const;
    double llr(const Observation& x, const ParameterVector& theta) const;

    Observation sample_pre(RngStream& rng) const;
    Observation sample_post(const ParameterVector& theta, RngStream& rng) const;

    ParameterVector project(const ParameterVector& raw) const;
    ParameterVector window_mle(std::span<const Observation> samples) const;

    // Unchecked span versions used on hot paths. Callers guarantee sizes.
    double llr_unchecked(std::span<const double> x, std::span<const double> theta) const;
    double log_pre_unchecked(std::span<const double> x) const;
    double log_post_unchecked(std::span<const double> x, std::span<const double> theta) const;
    void sample_pre_into(RngStream& rng, std::span<double> out) const;
    void sample_post_into(std::span<const double> theta, RngStream& rng, std::span<double> out) const;
    void project_in_place(std::span<double> theta) const;

    /// MLE from sufficient statistics of n samples: per-component sums of
    /// x and x*x. The window classes call this so that every route sharing
    /// the same sums produces bit-identical estimates.
    void estimate_from_sums(std::span<const double> sum, std::span<const double> sum_sq,
                            std::size_t n, std::span<double> out) const;

    /// Whether the MLE needs the running sum of squares.
    bool needs_second_moment() const noexcept {
        return family_ == Family::LaplaceToNormalUnknownVar;
    }

    void check_observation(std::span<const double> x) const;
    void check_parameter(std::span<const double> theta) const;

    std::string describe() const;

    friend bool operator==(const Model&, const Model&) = default;

private:
    Model(Family f, ParameterSet s, std::size_t obs_dim, std::size_t param_dim, double variance)
        : family_(f), set_(s), obs_dim_(obs_dim), param_dim_(param_dim), variance_(variance) {}

    Family family_;
    ParameterSet set_;
    std::size_t obs_dim_;
    std::size_t param_dim_;
    double variance_;  // known post-change variance (LaplaceToNormalKnownVar only)
};

/// Information numbers entering the delay and window formulas.
struct InfoNumbers {
    double I0 = 0.0;
    double Iinf = 0.0;
    double J0 = 0.0;
    Matrix F0, Finf, Q0, Sigma0, SigmaInf;
    ParameterVector thetaInf;
    // Fields obtained by Monte Carlo, keyed by name (e.g. "J0", "Q0[0,1]"),
    // with their standard errors. Empty when everything is closed form.
    std::map<std::string, double> standard_errors;

    bool estimated() const noexcept { return !standard_errors.empty(); }
};

InfoNumbers info_numbers(const Model& model, const ParameterVector& theta);

/// Leading-order estimate-perturbed information numbers for window size w.
struct ApproxInfoNumbers {
    double Ihat0 = 0.0;
    double IhatInf = 0.0;
    double Jhat0 = 0.0;
};

ApproxInfoNumbers approx_info_numbers(const InfoNumbers& info, int w);

double norm(std::span<const double> v);

}  // namespace wlcusum
