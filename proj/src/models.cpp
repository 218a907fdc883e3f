#include "wlcusum/models.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <utility>

namespace wlcusum {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kHalfLog2 = 0.34657359027997265471;  // log(2)/2
constexpr std::uint64_t kInfoSeed = 0x5eed'1f0'0fULL;
constexpr std::size_t kInfoDraws = 1'000'000;
constexpr int kSigmaInfReferenceWindow = 20;

bool all_finite(std::span<const double> v) {
    for (double d : v)
        if (!std::isfinite(d)) return false;
    return true;
}

// E|X| for X ~ N(mu, v)
double folded_normal_mean(double mu, double v) {
    const double s = std::sqrt(v);
    return s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-mu * mu / (2.0 * v)) +
           mu * std::erf(mu / (s * kSqrt2));
}

// KL divergence of N(mu, v) from the unit-variance Laplace law.
double laplace_to_normal_I0(double mu, double v) {
    return -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 + kHalfLog2 +
           kSqrt2 * folded_normal_mean(mu, v);
}

// -E_inf[log f0(x, (0, v)) - log f_inf(x)] under the unit-variance Laplace law.
double laplace_to_normal_Iinf(double v) {
    return 0.5 * std::log(2.0 * std::numbers::pi * v) + 1.0 / (2.0 * v) - kHalfLog2 - 1.0;
}

// Running mean / variance accumulator for Monte Carlo fields.
struct MomentAccumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
    void add(double x) { sum += x; sum_sq += x * x; ++n; }
    double mean() const { return sum / static_cast<double>(n); }
    double stderr_of_mean() const {
        const double m = mean();
        const double var = (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    }
};

std::mutex& info_cache_mutex() {
    static std::mutex m;
    return m;
}
std::map<std::string, InfoNumbers>& info_cache() {
    static std::map<std::string, InfoNumbers> cache;
    return cache;
}

// w * E[(thetahat - nearest maximizer)(...)^T] for the projected sample mean
// of pre-change Gaussian data at a reference window.
Matrix gaussian_sigma_inf(const Model& model, std::map<std::string, double>& se) {
    const std::size_t k = model.parameter_dim();
    const double barrier = model.barrier();
    const double w = kSigmaInfReferenceWindow;
    RngStream rng(kInfoSeed, 1);
    std::vector<MomentAccumulator> acc(k * k);
    std::vector<double> est(k), dev(k);
    const std::size_t draws = kInfoDraws / 10;
    for (std::size_t d = 0; d < draws; ++d) {
        for (std::size_t i = 0; i < k; ++i) est[i] = rng.normal() / std::sqrt(w);
        model.project_in_place(est);
        const double n = norm(est);
        for (std::size_t i = 0; i < k; ++i)
            dev[i] = barrier > 0.0 ? est[i] - barrier * est[i] / n : est[i];
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) acc[i * k + j].add(w * dev[i] * dev[j]);
    }
    Matrix out(k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            out(i, j) = acc[i * k + j].mean();
            se["SigmaInf[" + std::to_string(i) + "," + std::to_string(j) + "]"] =
                acc[i * k + j].stderr_of_mean();
        }
    return out;
}

InfoNumbers compute_info(const Model& model, const ParameterVector& theta) {
    InfoNumbers info;
    const std::size_t k = model.parameter_dim();
    switch (model.family()) {
        case Family::GaussianMeanShift: {
            const double n2 = std::pow(norm(theta.view()), 2);
            info.I0 = n2 / 2.0;
            info.thetaInf = ParameterVector(k, 0.0);
            info.thetaInf[0] = model.barrier();
            info.Iinf = model.barrier() * model.barrier() / 2.0;
            info.J0 = n2 * n2 / 4.0 + n2;
            info.F0 = Matrix::identity(k);
            info.Finf = Matrix::identity(k);
            info.Q0 = Matrix::identity(k, 1.0 - n2 / 2.0);
            info.Sigma0 = Matrix::identity(k);
            info.SigmaInf = gaussian_sigma_inf(model, info.standard_errors);
            break;
        }
        case Family::LaplaceToNormalKnownVar: {
            const double mu = theta[0];
            const double v = model.known_variance();
            info.I0 = laplace_to_normal_I0(mu, v);
            info.thetaInf = ParameterVector{0.0};
            info.Iinf = laplace_to_normal_Iinf(v);
            info.F0 = Matrix::diagonal({1.0 / v});
            info.Finf = Matrix::diagonal({1.0 / v});
            info.Q0 = Matrix::diagonal({(1.0 - info.I0) / v});
            info.Sigma0 = Matrix::diagonal({v});
            info.SigmaInf = Matrix::diagonal({1.0});
            RngStream rng(kInfoSeed, 2);
            MomentAccumulator j0;
            std::vector<double> x(1);
            for (std::size_t d = 0; d < kInfoDraws; ++d) {
                model.sample_post_into(theta.view(), rng, x);
                const double l = model.llr_unchecked(x, theta.view());
                j0.add(l * l);
            }
            info.J0 = j0.mean();
            info.standard_errors["J0"] = j0.stderr_of_mean();
            break;
        }
        case Family::LaplaceToNormalUnknownVar: {
            const double mu = theta[0];
            const double v = theta[1];
            info.I0 = laplace_to_normal_I0(mu, v);
            info.thetaInf = ParameterVector{0.0, 1.0};
            info.Iinf = laplace_to_normal_Iinf(1.0);
            info.F0 = Matrix::diagonal({1.0 / v, 1.0 / (2.0 * v * v)});
            info.Finf = Matrix::diagonal({1.0, 0.5});
            info.Sigma0 = Matrix::diagonal({v, 2.0 * v * v});
            // Var of the sample second moment under the unit Laplace law: E x^4 - 1 = 5.
            info.SigmaInf = Matrix::diagonal({1.0, 5.0});
            RngStream rng(kInfoSeed, 3);
            MomentAccumulator j0, q00, q01, q11;
            std::vector<double> x(1);
            for (std::size_t d = 0; d < kInfoDraws; ++d) {
                model.sample_post_into(theta.view(), rng, x);
                const double l = model.llr_unchecked(x, theta.view());
                const double r = x[0] - mu;
                j0.add(l * l);
                // Hessian of log f0 in (mu, v)
                q00.add(l * (-1.0 / v));
                q01.add(l * (-r / (v * v)));
                q11.add(l * (1.0 / (2.0 * v * v) - r * r / (v * v * v)));
            }
            info.J0 = j0.mean();
            info.Q0 = Matrix(2);
            info.Q0(0, 0) = info.F0(0, 0) + q00.mean();
            info.Q0(0, 1) = info.Q0(1, 0) = q01.mean();
            info.Q0(1, 1) = info.F0(1, 1) + q11.mean();
            info.standard_errors["J0"] = j0.stderr_of_mean();
            info.standard_errors["Q0[0,0]"] = q00.stderr_of_mean();
            info.standard_errors["Q0[0,1]"] = q01.stderr_of_mean();
            info.standard_errors["Q0[1,1]"] = q11.stderr_of_mean();
            break;
        }
    }
    return info;
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::GaussianMeanShift: return "gaussian";
        case Family::LaplaceToNormalKnownVar: return "laplace-normal-known-var";
        case Family::LaplaceToNormalUnknownVar: return "laplace-normal-unknown-var";
    }
    return "unknown";
}

Family parse_family(const std::string& name) {
    if (name == "gaussian") return Family::GaussianMeanShift;
    if (name == "laplace-normal-known-var") return Family::LaplaceToNormalKnownVar;
    if (name == "laplace-normal-unknown-var") return Family::LaplaceToNormalUnknownVar;
    throw UsageError("unknown model family '" + name +
                     "' (expected gaussian, laplace-normal-known-var or laplace-normal-unknown-var)");
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double d : v) s += d * d;
    return std::sqrt(s);
}

ParameterSet ParameterSet::norm_barrier(double barrier) {
    if (!(barrier > 0.0) || !std::isfinite(barrier))
        throw DomainError("norm barrier must be a positive finite real");
    return ParameterSet(Kind::NormBarrier, barrier);
}

bool ParameterSet::contains(std::span<const double> theta) const {
    if (!all_finite(theta)) return false;
    switch (kind_) {
        case Kind::FullSpace: return true;
        // Relative slack so that projected boundary points test as members.
        case Kind::NormBarrier: return norm(theta) >= barrier_ * (1.0 - 1e-12);
        case Kind::MeanAndPositiveVariance: return theta.size() == 2 && theta[1] > 0.0;
    }
    return false;
}

Model Model::gaussian_mean_shift(std::size_t dim, double barrier) {
    if (dim == 0) throw UsageError("gaussian model dimension must be at least 1");
    if (!(barrier >= 0.0) || !std::isfinite(barrier))
        throw DomainError("barrier must be a non-negative finite real");
    const ParameterSet set =
        barrier > 0.0 ? ParameterSet::norm_barrier(barrier) : ParameterSet::full_space();
    return Model(Family::GaussianMeanShift, set, dim, dim, 0.0);
}

Model Model::laplace_to_normal_known_var(double variance) {
    if (!(variance > 0.0) || !std::isfinite(variance))
        throw DomainError("post-change variance must be positive");
    return Model(Family::LaplaceToNormalKnownVar, ParameterSet::full_space(), 1, 1, variance);
}

Model Model::laplace_to_normal_unknown_var() {
    return Model(Family::LaplaceToNormalUnknownVar, ParameterSet::mean_and_positive_variance(), 1,
                 2, 0.0);
}

void Model::check_observation(std::span<const double> x) const {
    if (x.size() != obs_dim_)
        throw InputError("observation has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(obs_dim_));
    if (!all_finite(x)) throw InputError("observation contains a non-finite entry");
}

void Model::check_parameter(std::span<const double> theta) const {
    if (theta.size() != param_dim_)
        throw InputError("parameter has dimension " + std::to_string(theta.size()) +
                         ", model expects " + std::to_string(param_dim_));
    if (!all_finite(theta)) throw InputError("parameter contains a non-finite entry");
    if (family_ == Family::LaplaceToNormalUnknownVar && !(theta[1] > 0.0))
        throw DomainError("post-change variance must be positive");
}

double Model::log_pre_unchecked(std::span<const double> x) const {
    if (family_ == Family::GaussianMeanShift) {
        double s = 0.0;
        for (double d : x) s += d * d;
        return -0.5 * static_cast<double>(obs_dim_) * kLog2Pi - 0.5 * s;
    }
    return -kHalfLog2 - kSqrt2 * std::abs(x[0]);
}

double Model::log_post_unchecked(std::span<const double> x, std::span<const double> theta) const {
    switch (family_) {
        case Family::GaussianMeanShift: {
            double s = 0.0;
            for (std::size_t i = 0; i < obs_dim_; ++i) {
                const double d = x[i] - theta[i];
                s += d * d;
            }
            return -0.5 * static_cast<double>(obs_dim_) * kLog2Pi - 0.5 * s;
        }
        case Family::LaplaceToNormalKnownVar: {
            const double d = x[0] - theta[0];
            return -0.5 * (kLog2Pi + std::log(variance_)) - d * d / (2.0 * variance_);
        }
        case Family::LaplaceToNormalUnknownVar: {
            const double d = x[0] - theta[0];
            return -0.5 * (kLog2Pi + std::log(theta[1])) - d * d / (2.0 * theta[1]);
        }
    }
    return 0.0;
}

double Model::llr_unchecked(std::span<const double> x, std::span<const double> theta) const {
    if (family_ == Family::GaussianMeanShift) {
        double dot = 0.0, n2 = 0.0;
        for (std::size_t i = 0; i < obs_dim_; ++i) {
            dot += theta[i] * x[i];
            n2 += theta[i] * theta[i];
        }
        return dot - 0.5 * n2;
    }
    return log_post_unchecked(x, theta) - log_pre_unchecked(x);
}

double Model::log_density_pre(const Observation& x) const {
    check_observation(x.view());
    return log_pre_unchecked(x.view());
}

double Model::log_density_post(const Observation& x, const ParameterVector& theta) const {
    check_observation(x.view());
    check_parameter(theta.view());
    return log_post_unchecked(x.view(), theta.view());
}

double Model::llr(const Observation& x, const ParameterVector& theta) const {
    check_observation(x.view());
    check_parameter(theta.view());
    return llr_unchecked(x.view(), theta.view());
}

void Model::sample_pre_into(RngStream& rng, std::span<double> out) const {
    if (family_ == Family::GaussianMeanShift) {
        for (double& v : out) v = rng.normal();
        return;
    }
    // Laplace with scale 1/sqrt(2): unit variance.
    const double magnitude = rng.exponential() / kSqrt2;
    out[0] = rng.coin() ? magnitude : -magnitude;
}

void Model::sample_post_into(std::span<const double> theta, RngStream& rng,
                             std::span<double> out) const {
    switch (family_) {
        case Family::GaussianMeanShift:
            for (std::size_t i = 0; i < obs_dim_; ++i) out[i] = theta[i] + rng.normal();
            return;
        case Family::LaplaceToNormalKnownVar:
            out[0] = theta[0] + std::sqrt(variance_) * rng.normal();
            return;
        case Family::LaplaceToNormalUnknownVar:
            out[0] = theta[0] + std::sqrt(theta[1]) * rng.normal();
            return;
    }
}

Observation Model::sample_pre(RngStream& rng) const {
    Observation x(obs_dim_);
    sample_pre_into(rng, x.view());
    return x;
}

Observation Model::sample_post(const ParameterVector& theta, RngStream& rng) const {
    check_parameter(theta.view());
    Observation x(obs_dim_);
    sample_post_into(theta.view(), rng, x.view());
    return x;
}

void Model::project_in_place(std::span<double> theta) const {
    switch (set_.kind()) {
        case ParameterSet::Kind::FullSpace: return;
        case ParameterSet::Kind::NormBarrier: {
            const double n = norm(theta);
            const double b = set_.barrier();
            if (n == 0.0) {
                // Direction undefined; any norm-b point has the same pre-change fit.
                theta[0] = b;
                for (std::size_t i = 1; i < theta.size(); ++i) theta[i] = 0.0;
            } else if (n < b) {
                const double scale = b / n;
                for (double& v : theta) v *= scale;
            }
            return;
        }
        case ParameterSet::Kind::MeanAndPositiveVariance:
            theta[1] = std::max(theta[1], kVarianceFloor);
            return;
    }
}

ParameterVector Model::project(const ParameterVector& raw) const {
    if (raw.size() != param_dim_)
        throw InputError("parameter has dimension " + std::to_string(raw.size()) +
                         ", model expects " + std::to_string(param_dim_));
    if (!all_finite(raw.view())) throw InputError("parameter contains a non-finite entry");
    ParameterVector out = raw;
    project_in_place(out.view());
    return out;
}

void Model::estimate_from_sums(std::span<const double> sum, std::span<const double> sum_sq,
                               std::size_t n, std::span<double> out) const {
    // Divide rather than multiply by 1/n so the mean matches window_mle bit for bit.
    const double dn = static_cast<double>(n);
    switch (family_) {
        case Family::GaussianMeanShift:
            for (std::size_t i = 0; i < obs_dim_; ++i) out[i] = sum[i] / dn;
            project_in_place(out);
            return;
        case Family::LaplaceToNormalKnownVar:
            out[0] = sum[0] / dn;
            return;
        case Family::LaplaceToNormalUnknownVar: {
            const double mean = sum[0] / dn;
            out[0] = mean;
            out[1] = std::max(sum_sq[0] / dn - mean * mean, kVarianceFloor);
            return;
        }
    }
}

ParameterVector Model::window_mle(std::span<const Observation> samples) const {
    if (samples.empty()) throw UsageError("window_mle requires at least one sample");
    for (const auto& s : samples) check_observation(s.view());
    const double n = static_cast<double>(samples.size());
    std::vector<double> sum(obs_dim_, 0.0);
    for (const auto& s : samples)
        for (std::size_t i = 0; i < obs_dim_; ++i) sum[i] += s[i];
    ParameterVector out(param_dim_);
    switch (family_) {
        case Family::GaussianMeanShift:
            for (std::size_t i = 0; i < obs_dim_; ++i) out[i] = sum[i] / n;
            project_in_place(out.view());
            break;
        case Family::LaplaceToNormalKnownVar:
            out[0] = sum[0] / n;
            break;
        case Family::LaplaceToNormalUnknownVar: {
            const double mean = sum[0] / n;
            double ss = 0.0;
            for (const auto& s : samples) ss += (s[0] - mean) * (s[0] - mean);
            out[0] = mean;
            out[1] = std::max(ss / n, kVarianceFloor);
            break;
        }
    }
    return out;
}

std::string Model::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << family_name(family_);
    switch (family_) {
        case Family::GaussianMeanShift: os << "(k=" << obs_dim_ << ",barrier=" << barrier() << ")"; break;
        case Family::LaplaceToNormalKnownVar: os << "(variance=" << variance_ << ")"; break;
        case Family::LaplaceToNormalUnknownVar: break;
    }
    return os.str();
}

InfoNumbers info_numbers(const Model& model, const ParameterVector& theta) {
    model.check_parameter(theta.view());
    if (!model.parameter_set().contains(theta.view()))
        throw DomainError("parameter lies outside the model's parameter set");

    std::ostringstream key;
    key.precision(17);
    key << model.describe();
    for (double v : theta.values()) key << ';' << v;

    {
        std::lock_guard lock(info_cache_mutex());
        if (auto it = info_cache().find(key.str()); it != info_cache().end()) return it->second;
    }
    InfoNumbers info = compute_info(model, theta);
    std::lock_guard lock(info_cache_mutex());
    info_cache().emplace(key.str(), info);
    return info;
}

ApproxInfoNumbers approx_info_numbers(const InfoNumbers& info, int w) {
    if (w < 1) throw UsageError("window size must be at least 1");
    const double inv_w = 1.0 / static_cast<double>(w);
    ApproxInfoNumbers a;
    a.Ihat0 = info.I0 - trace_of_product(info.Sigma0, info.F0) * inv_w / 2.0;
    a.IhatInf = info.Iinf + trace_of_product(info.SigmaInf, info.Finf) * inv_w / 2.0;
    a.Jhat0 = info.J0 + trace_of_product(info.Sigma0, info.Q0) * inv_w;
    return a;
}

}  // namespace wlcusum
