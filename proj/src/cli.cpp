#include "wlcusum/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "wlcusum/calibration.hpp"
#include "wlcusum/config.hpp"
#include "wlcusum/detectors.hpp"
#include "wlcusum/montecarlo.hpp"

namespace wlcusum {

namespace {

struct ModelOptions {
    std::string family = "gaussian";
    std::string theta;  // comma-separated
    double barrier = 0.0;
    double variance = 1.0;
    std::size_t dimension = 0;
};

void add_model_options(CLI::App* sub, ModelOptions& m) {
    sub->add_option("--model", m.family,
                    "Model family: gaussian, laplace-normal-known-var, laplace-normal-unknown-var");
    sub->add_option("--theta", m.theta, "Post-change parameter, comma-separated");
    sub->add_option("--barrier", m.barrier, "Minimum parameter norm (gaussian; 0 = full space)");
    sub->add_option("--variance", m.variance, "Known post-change variance (laplace-normal-known-var)");
    sub->add_option("--dimension", m.dimension, "Observation dimension (gaussian; default from --theta)");
}

std::vector<double> parse_reals(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        if (b == std::string::npos) throw InputError("empty component in " + what);
        const std::string tok = cell.substr(b, e - b + 1);
        double v = 0.0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size())
            throw InputError("cannot parse '" + tok + "' in " + what);
        out.push_back(v);
    }
    return out;
}

std::vector<double> parse_theta(const std::string& text) {
    try {
        return parse_reals(text, "--theta");
    } catch (const InputError& e) {
        throw UsageError(e.what());
    }
}

struct ResolvedModel {
    Model model;
    std::optional<ParameterVector> theta;
};

ResolvedModel resolve_model(const ModelOptions& m) {
    std::optional<ParameterVector> theta;
    if (!m.theta.empty()) theta = ParameterVector(parse_theta(m.theta));
    Model model = make_model(m.family, m.dimension, m.barrier, m.variance, theta ? theta->size() : 0);
    if (theta) model.check_parameter(theta->view());
    return {model, theta};
}

MethodSpec resolve_method(const std::string& text, std::size_t window, std::size_t max_window) {
    if (text.find('(') != std::string::npos) return MethodSpec::parse(text);
    if (text == "wlcusum" || text == "glr") {
        if (window == 0) throw UsageError("method '" + text + "' needs --window");
        return MethodSpec::parse(text + "(" + std::to_string(window) + ")");
    }
    if (text == "parallel") {
        const std::size_t w = max_window ? max_window : window;
        if (w == 0) throw UsageError("method 'parallel' needs --max-window");
        return MethodSpec::parse("parallel(" + std::to_string(w) + ")");
    }
    return MethodSpec::parse(text);
}

std::pair<std::size_t, std::size_t> parse_window_range(const std::string& text) {
    auto to_size = [&](const std::string& s) {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size() || v == 0)
            throw UsageError("bad window range '" + text + "' (expected e.g. 1..15 or 5)");
        return v;
    };
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const auto lo = to_size(text.substr(0, dots)), hi = to_size(text.substr(dots + 2));
        if (hi < lo) throw UsageError("empty window range '" + text + "'");
        return {lo, hi};
    }
    const auto dash = text.find('-');
    if (dash != std::string::npos) {
        const auto lo = to_size(text.substr(0, dash)), hi = to_size(text.substr(dash + 1));
        if (hi < lo) throw UsageError("empty window range '" + text + "'");
        return {lo, hi};
    }
    const auto w = to_size(text);
    return {w, w};
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

// --------------------------------------------------------------------------

int cmd_calibrate(double gamma, std::optional<int> max_window, const ModelOptions& mo,
                  std::ostream& out) {
    if (!(gamma > 1.0)) throw UsageError("--gamma must exceed 1");
    auto rm = resolve_model(mo);
    if (!rm.theta) throw UsageError("calibrate needs --theta");
    const auto r = calibrate(gamma, max_window, rm.model, *rm.theta);
    out << "gamma=" << format_double(r.gamma) << '\n';
    out << "threshold=" << format_double(r.threshold) << '\n';
    if (r.parallel_threshold)
        out << "parallel_threshold=" << format_double(*r.parallel_threshold) << " (W=" << *r.max_window
            << ")\n";
    out << "optimal_window=" << r.optimal_window << " (leading term "
        << format_double(r.optimal_window_real) << ")\n";
    out << "first_order_delay=" << format_double(r.first_order_delay) << '\n';
    if (r.wadd_upper_bound)
        out << "wadd_upper_bound=" << format_double(*r.wadd_upper_bound) << '\n';
    else
        out << "wadd_upper_bound=infeasible\n";
    return kExitOk;
}

struct RunOverrides {
    std::optional<long long> trials;
    std::optional<std::uint64_t> seed;
    std::optional<long long> max_steps;
    std::optional<unsigned> workers;
};

void apply_overrides(SweepConfig& c, const RunOverrides& o) {
    if (o.trials) {
        if (*o.trials < 1) throw UsageError("--trials must be at least 1");
        c.trials = static_cast<std::size_t>(*o.trials);
    }
    if (o.seed) c.seed = *o.seed;
    if (o.max_steps) {
        if (*o.max_steps < 1) throw UsageError("--max-steps must be at least 1");
        c.max_steps = static_cast<std::uint64_t>(*o.max_steps);
    }
    if (o.workers) {
        if (*o.workers < 1) throw UsageError("--workers must be at least 1");
        c.workers = *o.workers;
    }
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const RunOverrides& ov, std::ostream& out) {
    SweepConfig c = parse_sweep_config(read_file(config_path));
    apply_overrides(c, ov);
    const auto records = sweep(c);
    write_csv(records, out_path);
    const std::string manifest_path = out_path + ".manifest.json";
    write_text(manifest_path, make_manifest(c, "simulate", out_path) + "\n");
    out << "wrote " << records.size() << " records to " << out_path << '\n';
    out << "manifest " << manifest_path << '\n';
    return kExitOk;
}

int cmd_window_search(const std::string& config_path, const ModelOptions& mo, double gamma,
                      const std::string& range, const std::string& out_path, const RunOverrides& ov,
                      std::ostream& out) {
    SweepConfig c;
    if (!config_path.empty()) {
        c = parse_sweep_config(read_file(config_path));
    } else {
        auto rm = resolve_model(mo);
        if (!rm.theta) throw UsageError("window-search needs --theta or --config");
        c.model = rm.model;
        c.theta = *rm.theta;
    }
    if (!(gamma > 1.0)) {
        if (!config_path.empty() && c.gammas.size() == 1) gamma = c.gammas.front();
        else throw UsageError("--gamma must exceed 1");
    }
    apply_overrides(c, ov);
    const auto [lo, hi] = parse_window_range(range);
    const auto result = window_search(c, gamma, lo, hi);

    std::optional<InfoNumbers> info;
    try {
        info = info_numbers(c.model, c.theta);
    } catch (const DomainError&) {
    }
    for (const auto& r : result.records) {
        const int w = static_cast<int>(*r.window);
        out << "w=" << w << " wadd=" << format_double(r.mean) << " stderr="
            << format_double(r.standard_error) << " censored=" << r.censored;
        if (info) out << " feasible=" << (window_feasible(w, *info) ? "yes" : "no");
        out << '\n';
    }
    out << "argmin=" << result.argmin << '\n';
    if (info && gamma > std::exp(1.0))
        out << "predicted=" << optimal_window(gamma, *info) << " (leading term "
            << format_double(optimal_window_real(gamma, *info)) << ")\n";

    if (!out_path.empty()) {
        write_csv(result.records, out_path);
        SweepConfig m = c;
        m.methods.clear();
        for (std::size_t w = lo; w <= hi; ++w) m.methods.push_back({MethodKind::Wlcusum, w});
        m.gammas = {gamma};
        m.regimes = {Regime::PostChangeAtZero};
        write_text(out_path + ".manifest.json", make_manifest(m, "window-search", out_path) + "\n");
    }
    return kExitOk;
}

struct DetectOptions {
    std::string data;
    std::string method = "wlcusum";
    std::size_t window = 0;
    std::size_t max_window = 0;
    double gamma = 0.0;
    std::optional<double> threshold;
    std::optional<long long> max_steps;
    bool verbose = false;
};

int cmd_detect(const DetectOptions& d, const ModelOptions& mo, std::ostream& out) {
    auto rm = resolve_model(mo);
    const MethodSpec method = resolve_method(d.method, d.window, d.max_window);
    double nu;
    if (d.threshold) nu = *d.threshold;
    else if (d.gamma > 0.0) nu = method_threshold(method, d.gamma);
    else throw UsageError("detect needs --gamma or --threshold");
    if (!(nu > 0.0)) throw UsageError("threshold must be positive");
    if ((method.kind == MethodKind::ExactCusum || method.kind == MethodKind::CusumMinStrength) &&
        !rm.theta)
        throw UsageError("method '" + method.label() + "' needs --theta");
    const ParameterVector theta = rm.theta ? *rm.theta : ParameterVector{};
    auto detector = make_detector(method, rm.model, theta, nu);

    std::ifstream f(d.data);
    if (!f) throw std::runtime_error("cannot open data file '" + d.data + "'");
    std::size_t lineno = 0;
    const std::size_t k = rm.model.observation_dim();
    ObservationSource source = [&](std::span<double> x) {
        std::string line;
        while (std::getline(f, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            std::vector<double> v;
            try {
                v = parse_reals(line, "observation");
            } catch (const InputError& e) {
                throw InputError(d.data + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (v.size() != k)
                throw InputError(d.data + ":" + std::to_string(lineno) + ": observation has " +
                                 std::to_string(v.size()) + " components, model expects " +
                                 std::to_string(k));
            try {
                rm.model.check_observation(v);
            } catch (const InputError& e) {
                throw InputError(d.data + ":" + std::to_string(lineno) + ": " + e.what());
            }
            std::copy(v.begin(), v.end(), x.begin());
            return true;
        }
        return false;
    };
    StepObserver observer;
    if (d.verbose)
        observer = [&](const Detector& det) {
            out << "t=" << det.time();
            if (det.has_statistic()) out << " S=" << format_double(det.statistic());
            else out << " warmup";
            out << '\n';
        };
    std::uint64_t max_steps = std::numeric_limits<std::uint64_t>::max();
    if (d.max_steps) {
        if (*d.max_steps < 1) throw UsageError("--max-steps must be at least 1");
        max_steps = static_cast<std::uint64_t>(*d.max_steps);
    }
    const auto r = run_until_stop(*detector, source, max_steps, observer);
    if (r.censored)
        out << "NO-ALARM t=" << r.stop_time << '\n';
    else
        out << "ALARM t=" << r.stop_time << " S=" << format_double(r.terminal_statistic)
            << " overshoot=" << format_double(r.overshoot) << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Window-limited CUSUM change detection: calibration, simulation, detection",
                 "wlcusum"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    // calibrate
    double cal_gamma = 0.0;
    std::optional<int> cal_w;
    ModelOptions cal_model;
    auto* cal = app.add_subcommand("calibrate", "Thresholds, optimal window and delay bounds");
    cal->add_option("--gamma", cal_gamma, "Target ARL (> 1)")->required();
    cal->add_option("--max-window", cal_w, "Maximal window W of the parallel detector");
    add_model_options(cal, cal_model);

    // simulate
    std::string sim_config, sim_out;
    RunOverrides sim_ov;
    auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo sweep and write CSV + manifest");
    sim->add_option("--config", sim_config, "Experiment config (JSON) or a previous manifest")->required();
    sim->add_option("--out", sim_out, "Output CSV path")->required();
    sim->add_option("--trials", sim_ov.trials, "Override trial count");
    sim->add_option("--seed", sim_ov.seed, "Override root seed");
    sim->add_option("--max-steps", sim_ov.max_steps, "Override censoring horizon");
    sim->add_option("--workers", sim_ov.workers, "Worker threads (results do not depend on it)");

    // window-search
    std::string ws_config, ws_range = "1..15", ws_out;
    double ws_gamma = 0.0;
    ModelOptions ws_model;
    RunOverrides ws_ov;
    auto* ws = app.add_subcommand("window-search", "Empirical WADD for each window size");
    ws->add_option("--config", ws_config, "Experiment config supplying model and theta");
    ws->add_option("--gamma", ws_gamma, "Target ARL (> 1)");
    ws->add_option("--window", ws_range, "Window range, e.g. 1..15 (default) or 5");
    ws->add_option("--out", ws_out, "Optional output CSV path");
    ws->add_option("--trials", ws_ov.trials, "Trial count");
    ws->add_option("--seed", ws_ov.seed, "Root seed");
    ws->add_option("--max-steps", ws_ov.max_steps, "Censoring horizon");
    ws->add_option("--workers", ws_ov.workers, "Worker threads");
    add_model_options(ws, ws_model);

    // detect
    DetectOptions det_opts;
    ModelOptions det_model;
    auto* det = app.add_subcommand("detect", "Run a detector over an observation file");
    det->add_option("--data", det_opts.data, "One observation per line, comma-separated")->required();
    det->add_option("--method", det_opts.method, "exact-cusum, wlcusum, parallel, glr, cusum-min-strength");
    det->add_option("--window", det_opts.window, "Window size");
    det->add_option("--max-window", det_opts.max_window, "Maximal window (parallel)");
    det->add_option("--gamma", det_opts.gamma, "Target ARL; the threshold follows from it");
    det->add_option("--threshold", det_opts.threshold, "Explicit threshold");
    det->add_option("--max-steps", det_opts.max_steps, "Stop reading after this many observations");
    det->add_flag("--verbose", det_opts.verbose, "Print the statistic after every step");
    add_model_options(det, det_model);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*cal) return cmd_calibrate(cal_gamma, cal_w, cal_model, out);
        if (*sim) return cmd_simulate(sim_config, sim_out, sim_ov, out);
        if (*ws) return cmd_window_search(ws_config, ws_model, ws_gamma, ws_range, ws_out, ws_ov, out);
        if (*det) return cmd_detect(det_opts, det_model, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InfeasibleWindowError& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const DomainError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace wlcusum
