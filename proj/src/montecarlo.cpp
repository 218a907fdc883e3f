#include "wlcusum/montecarlo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <tuple>

#include "wlcusum/calibration.hpp"
#include "wlcusum/rng.hpp"

namespace wlcusum {

namespace {

std::size_t parse_window_arg(const std::string& text, const std::string& inner) {
    std::size_t w = 0;
    const auto* end = inner.data() + inner.size();
    auto [p, ec] = std::from_chars(inner.data(), end, w);
    if (ec != std::errc{} || p != end || w == 0)
        throw UsageError("method '" + text + "' needs a positive integer window");
    return w;
}

double parse_double(const std::string& s, const char* field) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || p != end)
        throw InputError(std::string("cannot parse ") + field + " value '" + s + "'");
    return v;
}

std::size_t parse_size(const std::string& s, const char* field) {
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || p != end)
        throw InputError(std::string("cannot parse ") + field + " value '" + s + "'");
    return v;
}

}  // namespace

MethodSpec MethodSpec::parse(const std::string& text) {
    if (text == "exact-cusum" || text == "exact") return {MethodKind::ExactCusum, 0};
    if (text == "cusum-min-strength") return {MethodKind::CusumMinStrength, 0};
    const auto open = text.find('(');
    if (open == std::string::npos || text.back() != ')')
        throw UsageError("unknown method '" + text +
                         "' (expected exact-cusum, cusum-min-strength, wlcusum(w), parallel(W), glr(w))");
    const std::string head = text.substr(0, open);
    const std::string inner = text.substr(open + 1, text.size() - open - 2);
    MethodSpec m;
    if (head == "wlcusum") m.kind = MethodKind::Wlcusum;
    else if (head == "parallel") m.kind = MethodKind::Parallel;
    else if (head == "glr") m.kind = MethodKind::Glr;
    else throw UsageError("unknown method '" + text + "'");
    m.window = parse_window_arg(text, inner);
    return m;
}

std::string MethodSpec::name() const {
    switch (kind) {
        case MethodKind::ExactCusum: return "exact-cusum";
        case MethodKind::Wlcusum: return "wlcusum";
        case MethodKind::Parallel: return "parallel";
        case MethodKind::Glr: return "glr";
        case MethodKind::CusumMinStrength: return "cusum-min-strength";
    }
    return "unknown";
}

std::string MethodSpec::label() const {
    return has_window() ? name() + "(" + std::to_string(window) + ")" : name();
}

std::string metric_name(Regime r) { return r == Regime::PreChange ? "arl" : "wadd"; }

Regime parse_regime(const std::string& text) {
    if (text == "arl" || text == "pre-change") return Regime::PreChange;
    if (text == "wadd" || text == "post-change-at-zero") return Regime::PostChangeAtZero;
    throw UsageError("unknown regime '" + text + "' (expected arl or wadd)");
}

double method_threshold(const MethodSpec& method, double gamma) {
    if (method.kind == MethodKind::Parallel)
        return threshold_parallel(gamma, static_cast<int>(method.window));
    return threshold_single(gamma);
}

std::unique_ptr<Detector> make_detector(const MethodSpec& method, const Model& model,
                                        const ParameterVector& theta, double nu) {
    switch (method.kind) {
        case MethodKind::ExactCusum: return std::make_unique<ExactCusumDetector>(model, theta, nu);
        case MethodKind::Wlcusum: return std::make_unique<WlcusumDetector>(model, method.window, nu);
        case MethodKind::Parallel:
            return std::make_unique<ParallelWlcusumDetector>(model, method.window, nu);
        case MethodKind::Glr: return std::make_unique<GlrDetector>(model, method.window, nu);
        case MethodKind::CusumMinStrength: {
            if (model.family() != Family::GaussianMeanShift || model.barrier() <= 0.0)
                throw UsageError("cusum-min-strength needs a gaussian model with a positive barrier");
            // Same direction as the true parameter, at the barrier radius.
            ParameterVector weakest = theta;
            const double n = norm(theta.view());
            if (n == 0.0) throw DomainError("cusum-min-strength needs a non-zero parameter");
            for (std::size_t i = 0; i < weakest.size(); ++i) weakest[i] *= model.barrier() / n;
            return std::make_unique<ExactCusumDetector>(model, weakest, nu);
        }
    }
    throw UsageError("unknown method");
}

std::uint64_t default_max_steps(Regime regime, double gamma) {
    if (regime == Regime::PreChange)
        return static_cast<std::uint64_t>(std::ceil(200.0 * gamma));
    return 100'000;
}

std::vector<StoppingResult> run_trials(const DetectorFactory& factory, const Model& model,
                                       const ParameterVector& theta, Regime regime,
                                       std::size_t trials, std::uint64_t seed,
                                       std::uint64_t max_steps, unsigned workers) {
    if (trials < 1) throw UsageError("trials must be at least 1");
    model.check_parameter(theta.view());
    std::vector<StoppingResult> results(trials);
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(trials)));

    auto work = [&](unsigned worker) {
        auto detector = factory();
        for (std::size_t i = worker; i < trials; i += workers) {
            detector->reset();
            RngStream rng(seed, i);
            ObservationSource source;
            if (regime == Regime::PreChange)
                source = [&](std::span<double> out) { model.sample_pre_into(rng, out); return true; };
            else
                source = [&](std::span<double> out) {
                    model.sample_post_into(theta.view(), rng, out);
                    return true;
                };
            results[i] = run_until_stop(*detector, source, max_steps);
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < workers; ++k) pool.emplace_back(work, k);
        for (auto& th : pool) th.join();
    }
    return results;
}

MetricsRecord summarize(const std::vector<StoppingResult>& results, const MethodSpec& method,
                        double gamma, Regime regime) {
    MetricsRecord r;
    r.method = method.name();
    r.gamma = gamma;
    if (method.has_window()) r.window = method.window;
    r.metric = metric_name(regime);
    r.trials = results.size();
    double sum = 0.0, sum_sq = 0.0, over = 0.0;
    for (const auto& s : results) {
        const double t = static_cast<double>(s.stop_time);
        sum += t;
        sum_sq += t * t;
        if (s.censored) ++r.censored;
        else over += s.overshoot;
    }
    const double n = static_cast<double>(r.trials);
    r.mean = sum / n;
    if (r.trials > 1) {
        const double var = std::max(0.0, (sum_sq - n * r.mean * r.mean) / (n - 1.0));
        r.standard_error = std::sqrt(var / n);
    }
    const std::size_t stopped = r.trials - r.censored;
    r.mean_overshoot = stopped > 0 ? over / static_cast<double>(stopped) : 0.0;
    return r;
}

MetricsRecord simulate(const ExperimentConfig& config) {
    if (config.trials < 1) throw UsageError("trials must be at least 1");
    const double nu = config.threshold ? *config.threshold : method_threshold(config.method, config.gamma);
    const auto max_steps = config.max_steps ? *config.max_steps
                                            : default_max_steps(config.regime, config.gamma);
    auto factory = [&] { return make_detector(config.method, config.model, config.theta, nu); };
    const auto results = run_trials(factory, config.model, config.theta, config.regime,
                                    config.trials, config.seed, max_steps, config.workers);
    return summarize(results, config.method, config.gamma, config.regime);
}

MetricsRecord simulate_arl(ExperimentConfig config) {
    config.regime = Regime::PreChange;
    return simulate(config);
}

MetricsRecord simulate_wadd(ExperimentConfig config) {
    config.regime = Regime::PostChangeAtZero;
    return simulate(config);
}

namespace {

bool record_less(const MetricsRecord& a, const MetricsRecord& b) {
    const std::size_t wa = a.window.value_or(0), wb = b.window.value_or(0);
    return std::tie(a.method, wa, a.gamma, a.metric) < std::tie(b.method, wb, b.gamma, b.metric);
}

}  // namespace

std::vector<MetricsRecord> sweep(const SweepConfig& config) {
    if (config.gammas.empty()) throw UsageError("sweep needs at least one gamma value");
    if (config.methods.empty()) throw UsageError("sweep needs at least one method");
    if (config.regimes.empty()) throw UsageError("sweep needs at least one regime");
    std::vector<MetricsRecord> out;
    for (const auto& method : config.methods)
        for (double gamma : config.gammas)
            for (Regime regime : config.regimes) {
                ExperimentConfig cell;
                cell.model = config.model;
                cell.theta = config.theta;
                cell.method = method;
                cell.gamma = gamma;
                cell.regime = regime;
                cell.trials = config.trials;
                cell.seed = config.seed;
                cell.max_steps = config.max_steps;
                cell.workers = config.workers;
                out.push_back(simulate(cell));
            }
    std::stable_sort(out.begin(), out.end(), record_less);
    return out;
}

WindowSearchResult window_search(const SweepConfig& base, double gamma, std::size_t w_min,
                                 std::size_t w_max) {
    if (w_min < 1 || w_max < w_min) throw UsageError("window range must be non-empty and start at 1 or above");
    WindowSearchResult r;
    for (std::size_t w = w_min; w <= w_max; ++w) {
        ExperimentConfig cell;
        cell.model = base.model;
        cell.theta = base.theta;
        cell.method = {MethodKind::Wlcusum, w};
        cell.gamma = gamma;
        cell.regime = Regime::PostChangeAtZero;
        cell.trials = base.trials;
        cell.seed = base.seed;
        cell.max_steps = base.max_steps;
        cell.workers = base.workers;
        r.records.push_back(simulate(cell));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.records.size(); ++i)
        if (r.records[i].mean < r.records[best].mean) best = i;
    r.argmin = w_min + best;
    return r;
}

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void write_csv(const std::vector<MetricsRecord>& records, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
        out << r.method << ',' << format_double(r.gamma) << ',';
        if (r.window) out << *r.window;
        out << ',' << r.metric << ',' << format_double(r.mean) << ','
            << format_double(r.standard_error) << ',' << r.trials << ',' << r.censored << ','
            << format_double(r.mean_overshoot) << '\n';
    }
}

void write_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(records, f);
    f.flush();
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<MetricsRecord> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw InputError("CSV header does not match the metrics schema");
    std::vector<MetricsRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (!line.empty() && line.back() == ',') cols.emplace_back();
        if (cols.size() != 9)
            throw InputError("line " + std::to_string(lineno) + ": expected 9 columns");
        MetricsRecord r;
        r.method = cols[0];
        r.gamma = parse_double(cols[1], "gamma");
        if (!cols[2].empty()) r.window = parse_size(cols[2], "window");
        r.metric = cols[3];
        r.mean = parse_double(cols[4], "mean");
        r.standard_error = parse_double(cols[5], "stderr");
        r.trials = parse_size(cols[6], "trials");
        r.censored = parse_size(cols[7], "censored");
        r.mean_overshoot = parse_double(cols[8], "mean_overshoot");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<MetricsRecord> read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
    return read_csv(f);
}

}  // namespace wlcusum
