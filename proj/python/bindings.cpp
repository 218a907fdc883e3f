#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "wlcusum/calibration.hpp"
#include "wlcusum/cli.hpp"
#include "wlcusum/config.hpp"
#include "wlcusum/detectors.hpp"
#include "wlcusum/montecarlo.hpp"

namespace py = pybind11;
using namespace wlcusum;

namespace {

using Vec = std::vector<double>;

std::vector<std::vector<double>> to_rows(const Matrix& m) {
    std::vector<std::vector<double>> rows(m.dim(), Vec(m.dim()));
    for (std::size_t i = 0; i < m.dim(); ++i)
        for (std::size_t j = 0; j < m.dim(); ++j) rows[i][j] = m(i, j);
    return rows;
}

py::dict info_dict(const InfoNumbers& info) {
    py::dict d;
    d["I0"] = info.I0;
    d["Iinf"] = info.Iinf;
    d["J0"] = info.J0;
    d["F0"] = to_rows(info.F0);
    d["Finf"] = to_rows(info.Finf);
    d["Q0"] = to_rows(info.Q0);
    d["Sigma0"] = to_rows(info.Sigma0);
    d["SigmaInf"] = to_rows(info.SigmaInf);
    d["thetaInf"] = info.thetaInf.values();
    d["standard_errors"] = info.standard_errors;
    return d;
}

py::dict result_dict(const StoppingResult& r) {
    py::dict d;
    d["stop_time"] = r.stop_time;
    d["terminal_statistic"] = r.terminal_statistic;
    d["overshoot"] = r.overshoot;
    d["censored"] = r.censored;
    d["which_window"] = r.which_window;
    return d;
}

py::dict record_dict(const MetricsRecord& r) {
    py::dict d;
    d["method"] = r.method;
    d["gamma"] = r.gamma;
    d["window"] = r.window;
    d["metric"] = r.metric;
    d["mean"] = r.mean;
    d["stderr"] = r.standard_error;
    d["trials"] = r.trials;
    d["censored"] = r.censored;
    d["mean_overshoot"] = r.mean_overshoot;
    return d;
}

std::vector<Observation> to_observations(const std::vector<Vec>& rows) {
    std::vector<Observation> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.emplace_back(r);
    return out;
}

// Accepts a flat list of scalars or a list of rows.
std::vector<Vec> as_rows(const py::sequence& data) {
    std::vector<Vec> rows;
    rows.reserve(py::len(data));
    for (const auto& item : data) {
        if (py::isinstance<py::sequence>(item) && !py::isinstance<py::str>(item))
            rows.push_back(item.cast<Vec>());
        else
            rows.push_back(Vec{item.cast<double>()});
    }
    return rows;
}

ExperimentConfig experiment(const Model& model, const Vec& theta, const std::string& method, double gamma,
                            std::size_t trials, std::uint64_t seed, std::optional<std::uint64_t> max_steps,
                            std::optional<double> threshold, unsigned workers) {
    ExperimentConfig c;
    c.model = model;
    c.theta = ParameterVector(theta);
    c.method = MethodSpec::parse(method);
    c.gamma = gamma;
    c.trials = trials;
    c.seed = seed;
    c.max_steps = max_steps;
    c.threshold = threshold;
    c.workers = workers;
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Window-limited CUSUM detectors, calibration and Monte Carlo tools";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NotReadyError>(m, "NotReadyError", PyExc_RuntimeError);
    py::register_exception<InfeasibleWindowError>(m, "InfeasibleWindowError", PyExc_ValueError);

    py::class_<RngStream>(m, "RngStream")
        .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("index") = 0)
        .def("normal", &RngStream::normal)
        .def("uniform", &RngStream::uniform);

    py::class_<Model>(m, "Model")
        .def_static("gaussian_mean_shift", &Model::gaussian_mean_shift, py::arg("dim") = 1,
                    py::arg("barrier") = 0.5)
        .def_static("laplace_to_normal_known_var", &Model::laplace_to_normal_known_var, py::arg("variance") = 1.0)
        .def_static("laplace_to_normal_unknown_var", &Model::laplace_to_normal_unknown_var)
        .def_property_readonly("family", [](const Model& s) { return family_name(s.family()); })
        .def_property_readonly("observation_dim", &Model::observation_dim)
        .def_property_readonly("parameter_dim", &Model::parameter_dim)
        .def_property_readonly("barrier", &Model::barrier)
        .def("llr", [](const Model& s, const Vec& x, const Vec& theta) {
            return s.llr(Observation(x), ParameterVector(theta));
        })
        .def("log_density_pre", [](const Model& s, const Vec& x) { return s.log_density_pre(Observation(x)); })
        .def("log_density_post", [](const Model& s, const Vec& x, const Vec& theta) {
            return s.log_density_post(Observation(x), ParameterVector(theta));
        })
        .def("project", [](const Model& s, const Vec& theta) { return s.project(ParameterVector(theta)).values(); })
        .def("window_mle", [](const Model& s, const py::sequence& samples) {
            return s.window_mle(to_observations(as_rows(samples))).values();
        })
        .def("sample_pre", [](const Model& s, RngStream& rng) { return s.sample_pre(rng).values(); })
        .def("sample_post", [](const Model& s, const Vec& theta, RngStream& rng) {
            return s.sample_post(ParameterVector(theta), rng).values();
        })
        .def("__repr__", &Model::describe);

    m.def("info_numbers", [](const Model& model, const Vec& theta) {
        return info_dict(info_numbers(model, ParameterVector(theta)));
    });
    m.def(
        "approx_info_numbers",
        [](const Model& model, const Vec& theta, int w) {
            const auto a = approx_info_numbers(info_numbers(model, ParameterVector(theta)), w);
            py::dict d;
            d["Ihat0"] = a.Ihat0;
            d["IhatInf"] = a.IhatInf;
            d["Jhat0"] = a.Jhat0;
            return d;
        },
        py::arg("model"), py::arg("theta"), py::arg("w"));

    m.def("threshold_single", &threshold_single, py::arg("gamma"));
    m.def("threshold_parallel", &threshold_parallel, py::arg("gamma"), py::arg("max_window"));
    m.def("cusum_delay_first_order", &cusum_delay_first_order, py::arg("gamma"), py::arg("I0"));
    m.def("optimal_window", [](double gamma, const Model& model, const Vec& theta) {
        return optimal_window(gamma, info_numbers(model, ParameterVector(theta)));
    });
    m.def("wadd_upper_bound", [](double gamma, int w, const Model& model, const Vec& theta) {
        return wadd_upper_bound(gamma, w, info_numbers(model, ParameterVector(theta)));
    });
    m.def("overshoot_upper_bound", [](double nu, int w, const Model& model, const Vec& theta) {
        return overshoot_upper_bound(nu, w, info_numbers(model, ParameterVector(theta)));
    });
    m.def(
        "calibrate",
        [](double gamma, const Model& model, const Vec& theta, std::optional<int> max_window) {
            const auto r = calibrate(gamma, max_window, model, ParameterVector(theta));
            py::dict d;
            d["gamma"] = r.gamma;
            d["threshold"] = r.threshold;
            d["max_window"] = r.max_window;
            d["parallel_threshold"] = r.parallel_threshold;
            d["optimal_window"] = r.optimal_window;
            d["optimal_window_real"] = r.optimal_window_real;
            d["first_order_delay"] = r.first_order_delay;
            d["wadd_upper_bound"] = r.wadd_upper_bound;
            return d;
        },
        py::arg("gamma"), py::arg("model"), py::arg("theta"), py::arg("max_window") = py::none());

    m.def("cusum_maxform_oracle", [](const Vec& inc) { return cusum_maxform_oracle(inc); });
    m.def("glr_window_stat", [](const py::sequence& samples, const Model& model) {
        return glr_window_stat(to_observations(as_rows(samples)), model);
    });

    py::class_<Detector>(m, "Detector")
        .def("step", [](Detector& d, const py::object& x) {
            if (py::isinstance<py::sequence>(x)) return d.step(Observation(x.cast<Vec>()));
            return d.step(Observation{x.cast<double>()});
        })
        .def("reset", &Detector::reset)
        .def("run", [](Detector& d, const py::sequence& data, std::uint64_t max_steps) {
            const auto rows = as_rows(data);
            std::size_t i = 0;
            return result_dict(run_until_stop(
                d,
                [&](std::span<double> out) {
                    if (i == rows.size()) return false;
                    if (rows[i].size() != out.size()) throw InputError("observation dimension mismatch");
                    std::copy(rows[i].begin(), rows[i].end(), out.begin());
                    ++i;
                    return true;
                },
                max_steps));
        }, py::arg("data"), py::arg("max_steps") = std::numeric_limits<std::uint64_t>::max())
        .def_property_readonly("time", &Detector::time)
        .def_property_readonly("threshold", &Detector::threshold)
        .def_property_readonly("stopped", &Detector::stopped)
        .def_property_readonly("statistic", [](const Detector& d) -> std::optional<double> {
            if (!d.has_statistic()) return std::nullopt;
            return d.statistic();
        })
        .def_property_readonly("warmup", &Detector::warmup)
        .def_property_readonly("name", &Detector::name)
        .def_property_readonly("stopping_window", &Detector::stopping_window);

    py::class_<ExactCusumDetector, Detector>(m, "ExactCusumDetector")
        .def(py::init([](const Model& model, const Vec& theta, double nu) {
            return ExactCusumDetector(model, ParameterVector(theta), nu);
        }), py::arg("model"), py::arg("theta"), py::arg("threshold"));

    py::class_<WlcusumDetector, Detector>(m, "WlcusumDetector")
        .def(py::init([](const Model& model, std::size_t w, double nu, bool stop_on_cumulative) {
            return WlcusumDetector(model, w, nu,
                                   stop_on_cumulative ? WlcusumDetector::StopOn::Cumulative
                                                      : WlcusumDetector::StopOn::Reflected);
        }), py::arg("model"), py::arg("window"), py::arg("threshold"), py::arg("stop_on_cumulative") = false)
        .def_property_readonly("window", &WlcusumDetector::window)
        .def_property_readonly("cusum_statistic", &WlcusumDetector::cusum_statistic)
        .def_property_readonly("cumulative_statistic", &WlcusumDetector::cumulative_statistic)
        .def_property_readonly("log_sr_statistic", &WlcusumDetector::log_sr_statistic)
        .def_property_readonly("last_increment", &WlcusumDetector::last_increment)
        .def_property_readonly("last_estimate", [](const WlcusumDetector& d) {
            return Vec(d.last_estimate().begin(), d.last_estimate().end());
        });

    py::class_<ParallelWlcusumDetector, Detector>(m, "ParallelWlcusumDetector")
        .def(py::init<Model, std::size_t, double>(), py::arg("model"), py::arg("max_window"), py::arg("threshold"))
        .def_property_readonly("max_window", &ParallelWlcusumDetector::max_window)
        .def("window_statistic", &ParallelWlcusumDetector::window_statistic);

    py::class_<GlrDetector, Detector>(m, "GlrDetector")
        .def(py::init<Model, std::size_t, double>(), py::arg("model"), py::arg("window"), py::arg("threshold"))
        .def_property_readonly("window", &GlrDetector::window);

    m.def(
        "make_detector",
        [](const std::string& method, const Model& model, const Vec& theta, double nu) {
            return make_detector(MethodSpec::parse(method), model, ParameterVector(theta), nu);
        },
        py::arg("method"), py::arg("model"), py::arg("theta"), py::arg("threshold"));
    m.def("method_threshold", [](const std::string& method, double gamma) {
        return method_threshold(MethodSpec::parse(method), gamma);
    });

    m.def(
        "simulate",
        [](const Model& model, const Vec& theta, const std::string& method, double gamma, const std::string& metric,
           std::size_t trials, std::uint64_t seed, std::optional<std::uint64_t> max_steps,
           std::optional<double> threshold, unsigned workers) {
            auto c = experiment(model, theta, method, gamma, trials, seed, max_steps, threshold, workers);
            c.regime = parse_regime(metric);
            MetricsRecord r;
            {
                py::gil_scoped_release release;
                r = simulate(c);
            }
            return record_dict(r);
        },
        py::arg("model"), py::arg("theta"), py::arg("method"), py::arg("gamma"), py::arg("metric") = "wadd",
        py::arg("trials") = 1000, py::arg("seed") = 1, py::arg("max_steps") = py::none(),
        py::arg("threshold") = py::none(), py::arg("workers") = 1);

    m.def("sweep", [](const std::string& config_json) {
        const auto c = parse_sweep_config(config_json);
        std::vector<MetricsRecord> records;
        {
            py::gil_scoped_release release;
            records = sweep(c);
        }
        py::list out;
        for (const auto& r : records) out.append(record_dict(r));
        return out;
    }, py::arg("config_json"));

    m.def(
        "window_search",
        [](const std::string& config_json, double gamma, std::size_t w_min, std::size_t w_max) {
            const auto c = parse_sweep_config(config_json);
            WindowSearchResult r;
            {
                py::gil_scoped_release release;
                r = window_search(c, gamma, w_min, w_max);
            }
            py::list records;
            for (const auto& rec : r.records) records.append(record_dict(rec));
            return py::make_tuple(r.argmin, records);
        },
        py::arg("config_json"), py::arg("gamma"), py::arg("w_min"), py::arg("w_max"));

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"));
}
