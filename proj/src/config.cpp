#include "wlcusum/config.hpp"

#include <ctime>
#include <set>

#include <json.hpp>

#include "wlcusum/calibration.hpp"

namespace wlcusum {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw UsageError("unknown config key '" + where + key + "'");
}

template <class T>
T get_field(const json& obj, const std::string& key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError("config key '" + where + key + "' is missing or has the wrong type");
    }
}

json model_to_json(const Model& m) {
    json j;
    j["family"] = family_name(m.family());
    switch (m.family()) {
        case Family::GaussianMeanShift:
            j["dimension"] = m.observation_dim();
            j["barrier"] = m.barrier();
            break;
        case Family::LaplaceToNormalKnownVar: j["variance"] = m.known_variance(); break;
        case Family::LaplaceToNormalUnknownVar: break;
    }
    return j;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

Model make_model(const std::string& family, std::size_t dimension, double barrier, double variance,
                 std::size_t theta_size) {
    switch (parse_family(family)) {
        case Family::GaussianMeanShift: {
            const std::size_t k = dimension ? dimension : (theta_size ? theta_size : 1);
            return Model::gaussian_mean_shift(k, barrier);
        }
        case Family::LaplaceToNormalKnownVar: return Model::laplace_to_normal_known_var(variance);
        case Family::LaplaceToNormalUnknownVar: return Model::laplace_to_normal_unknown_var();
    }
    throw UsageError("unknown model family");
}

SweepConfig parse_sweep_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw UsageError("config must be a JSON object");
    if (root.contains("config")) root = root["config"];
    reject_unknown_keys(root,
                        {"model", "theta", "methods", "gammas", "regimes", "trials", "seed",
                         "max_steps", "workers", "thresholds"},
                        "");

    SweepConfig c;
    const json& jm = root.contains("model") ? root["model"] : json::object();
    if (!jm.is_object()) throw UsageError("config key 'model' must be an object");
    reject_unknown_keys(jm, {"family", "dimension", "barrier", "variance"}, "model.");
    const auto theta = get_field<std::vector<double>>(root, "theta", "");
    if (theta.empty()) throw UsageError("config key 'theta' must be a non-empty list");
    const std::string family = jm.contains("family") ? get_field<std::string>(jm, "family", "model.")
                                                     : std::string("gaussian");
    const std::size_t dim = jm.contains("dimension") ? get_field<std::size_t>(jm, "dimension", "model.") : 0;
    const double barrier = jm.contains("barrier") ? get_field<double>(jm, "barrier", "model.") : 0.0;
    const double variance = jm.contains("variance") ? get_field<double>(jm, "variance", "model.") : 1.0;
    try {
        c.model = make_model(family, dim, barrier, variance, theta.size());
    } catch (const std::exception& e) {
        throw UsageError(std::string("config key 'model': ") + e.what());
    }
    c.theta = ParameterVector(theta);
    try {
        c.model.check_parameter(c.theta.view());
    } catch (const std::exception& e) {
        throw UsageError(std::string("config key 'theta': ") + e.what());
    }

    for (const auto& m : get_field<std::vector<std::string>>(root, "methods", ""))
        c.methods.push_back(MethodSpec::parse(m));
    if (c.methods.empty()) throw UsageError("config key 'methods' must be a non-empty list");
    c.gammas = get_field<std::vector<double>>(root, "gammas", "");
    if (c.gammas.empty()) throw UsageError("config key 'gammas' must be a non-empty list");
    for (double g : c.gammas)
        if (!(g > 1.0)) throw UsageError("config key 'gammas': every gamma must exceed 1");
    if (root.contains("regimes")) {
        c.regimes.clear();
        for (const auto& r : get_field<std::vector<std::string>>(root, "regimes", ""))
            c.regimes.push_back(parse_regime(r));
        if (c.regimes.empty()) throw UsageError("config key 'regimes' must be a non-empty list");
    }
    if (root.contains("trials")) {
        const auto t = get_field<long long>(root, "trials", "");
        if (t < 1) throw UsageError("config key 'trials' must be at least 1");
        c.trials = static_cast<std::size_t>(t);
    }
    if (root.contains("seed")) c.seed = get_field<std::uint64_t>(root, "seed", "");
    if (root.contains("max_steps") && !root["max_steps"].is_null()) {
        const auto m = get_field<long long>(root, "max_steps", "");
        if (m < 1) throw UsageError("config key 'max_steps' must be at least 1");
        c.max_steps = static_cast<std::uint64_t>(m);
    }
    if (root.contains("workers")) {
        const auto w = get_field<long long>(root, "workers", "");
        if (w < 1) throw UsageError("config key 'workers' must be at least 1");
        c.workers = static_cast<unsigned>(w);
    }
    return c;
}

std::string sweep_config_to_json(const SweepConfig& c) {
    json j;
    j["model"] = model_to_json(c.model);
    j["theta"] = c.theta.values();
    std::vector<std::string> methods;
    for (const auto& m : c.methods) methods.push_back(m.label());
    j["methods"] = methods;
    j["gammas"] = c.gammas;
    std::vector<std::string> regimes;
    for (auto r : c.regimes) regimes.push_back(metric_name(r));
    j["regimes"] = regimes;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["max_steps"] = c.max_steps ? json(*c.max_steps) : json(nullptr);
    j["workers"] = c.workers;
    return j.dump(2);
}

std::string make_manifest(const SweepConfig& c, const std::string& command,
                          const std::string& output_path) {
    json cfg = json::parse(sweep_config_to_json(c));
    json thresholds = json::object();
    for (const auto& m : c.methods)
        for (double g : c.gammas)
            thresholds[m.label() + "@" + format_double(g)] = method_threshold(m, g);
    cfg["thresholds"] = thresholds;
    json j;
    j["tool"] = "wlcusum";
    j["version"] = kToolVersion;
    j["timestamp"] = utc_timestamp();
    j["command"] = command;
    j["output"] = output_path;
    j["config"] = cfg;
    return j.dump(2);
}

}  // namespace wlcusum
