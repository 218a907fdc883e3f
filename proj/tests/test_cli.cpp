#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "wlcusum/cli.hpp"
#include "wlcusum/config.hpp"
#include "wlcusum/detectors.hpp"
#include "wlcusum/montecarlo.hpp"

using namespace wlcusum;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch_dir() {
    static const fs::path dir = [] {
        auto p = fs::temp_directory_path() / ("wlcusum_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
    const auto p = scratch_dir() / name;
    std::ofstream(p) << text;
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string last_line(const std::string& text) {
    std::istringstream in(text);
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty()) last = line;
    return last;
}

// Seeded fixture: `n` scalar rows, N(0,1) before row `change` (1-based) and N(1,1) from it on.
std::string fixture(std::size_t n, std::size_t change, std::uint64_t seed) {
    const auto g = Model::gaussian_mean_shift(1, 0.5);
    RngStream rng(seed, 0);
    std::ostringstream s;
    s << "# seeded fixture\n";
    for (std::size_t i = 1; i <= n; ++i) {
        const auto x = i < change ? g.sample_pre(rng) : g.sample_post(ParameterVector{1.0}, rng);
        s << format_double(x[0]) << '\n';
    }
    return s.str();
}

}  // namespace

TEST_CASE("calibrate prints thresholds and the optimal window") {
    const auto r = cli({"calibrate", "--gamma", "1e4", "--theta", "1", "--barrier", "0.5"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("threshold=9.21034") != std::string::npos);
    CHECK(r.out.find("optimal_window=4") != std::string::npos);
    CHECK(r.out.find("first_order_delay=18.42") != std::string::npos);
    CHECK(r.out.find("wadd_upper_bound=62.3") != std::string::npos);

    const auto p = cli({"calibrate", "--gamma", "1000", "--max-window", "15", "--theta", "1", "--barrier", "0.5"});
    CHECK(p.code == kExitOk);
    CHECK(p.out.find("parallel_threshold=9.6158") != std::string::npos);
}

TEST_CASE("calibrate rejects bad input with usage errors") {
    CHECK(cli({"calibrate", "--gamma", "0.5", "--theta", "1", "--barrier", "0.5"}).code == kExitUsage);
    CHECK(cli({"calibrate", "--gamma", "100", "--theta", "0.1", "--barrier", "0.5"}).code == kExitUsage);
    CHECK(cli({"calibrate", "--gamma", "100"}).code == kExitUsage);
    CHECK(cli({"calibrate", "--gamma", "100", "--theta", "x"}).code == kExitUsage);
    CHECK(cli({"calibrate", "--gamma", "100", "--theta", "1", "--model", "cauchy"}).code == kExitUsage);
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"bogus"}).code == kExitUsage);
    CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("simulate writes CSV and a manifest that reproduces it") {
    const auto cfg = write_file("fig.json", R"json({
        "model": {"family": "gaussian", "barrier": 0.5},
        "theta": [1.0],
        "methods": ["exact-cusum", "wlcusum(4)", "parallel(15)", "glr(30)"],
        "gammas": [100, 1000],
        "trials": 40,
        "seed": 3
    })json");
    const auto out = (scratch_dir() / "fig.csv").string();
    const auto r = cli({"simulate", "--config", cfg, "--out", out});
    REQUIRE(r.code == kExitOk);
    const auto csv = slurp(out);
    std::istringstream in(csv);
    const auto rows = read_csv(in);
    CHECK(rows.size() == 8);
    const auto manifest = out + ".manifest.json";
    REQUIRE(fs::exists(manifest));

    const auto out2 = (scratch_dir() / "fig2.csv").string();
    REQUIRE(cli({"simulate", "--config", manifest, "--out", out2}).code == kExitOk);
    CHECK(slurp(out2) == csv);
}

TEST_CASE("simulate argument errors") {
    const auto cfg = write_file("mini.json", R"({"theta":[1],"methods":["exact"],"gammas":[10],"trials":5})");
    const auto out = (scratch_dir() / "mini.csv").string();
    CHECK(cli({"simulate", "--config", cfg, "--out", out, "--trials", "0"}).code == kExitUsage);
    const auto bad = write_file("bad.json", R"({"theta":[1],"methods":["exact"],"gammas":[10],"trails":5})");
    const auto r = cli({"simulate", "--config", bad, "--out", out});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("trails") != std::string::npos);
    CHECK(cli({"simulate", "--config", (scratch_dir() / "missing.json").string(), "--out", out}).code ==
          kExitRuntime);
    CHECK(cli({"simulate", "--config", cfg, "--out", "/nonexistent-dir/x.csv"}).code == kExitRuntime);
}

TEST_CASE("window search") {
    const auto one = cli({"window-search", "--gamma", "1e4", "--window", "5", "--theta", "1", "--barrier",
                          "0.5", "--trials", "100"});
    REQUIRE(one.code == kExitOk);
    CHECK(one.out.find("argmin=5") != std::string::npos);
    CHECK(one.out.find("predicted=4") != std::string::npos);

    const auto out = (scratch_dir() / "ws.csv").string();
    const auto many = cli({"window-search", "--gamma", "1e3", "--window", "1..4", "--theta", "1", "--barrier",
                           "0.5", "--trials", "100", "--out", out});
    REQUIRE(many.code == kExitOk);
    CHECK(many.out.find("w=1 ") != std::string::npos);
    // w = 1 has a non-positive perturbed drift for theta = 1.
    CHECK(many.out.find("feasible=no") != std::string::npos);
    CHECK(many.out.find("feasible=yes") != std::string::npos);
    std::istringstream in(slurp(out));
    CHECK(read_csv(in).size() == 4);
    CHECK(fs::exists(out + ".manifest.json"));

    CHECK(cli({"window-search", "--gamma", "1e3", "--window", "5..2", "--theta", "1", "--barrier", "0.5"}).code ==
          kExitUsage);
    CHECK(cli({"window-search", "--gamma", "1e3", "--window", "0", "--theta", "1"}).code == kExitUsage);
}

TEST_CASE("detect on an empty file") {
    const auto f = write_file("empty.txt", "");
    const auto r = cli({"detect", "--data", f, "--method", "wlcusum", "--window", "4", "--gamma", "100",
                        "--barrier", "0.5"});
    CHECK(r.code == kExitOk);
    CHECK(last_line(r.out) == "NO-ALARM t=0");
}

TEST_CASE("detect on pre-change data with a high threshold") {
    const auto f = write_file("pre.txt", fixture(50, 1000, 5));
    const auto r = cli({"detect", "--data", f, "--method", "wlcusum", "--window", "4", "--threshold", "50",
                        "--barrier", "0.5"});
    CHECK(r.code == kExitOk);
    CHECK(last_line(r.out) == "NO-ALARM t=50");
}

TEST_CASE("detect raises an alarm after an injected shift") {
    const auto f = write_file("shift.txt", fixture(200, 20, 6));
    const auto r = cli({"detect", "--data", f, "--method", "wlcusum(4)", "--gamma", "100", "--barrier", "0.5",
                        "--verbose"});
    REQUIRE(r.code == kExitOk);
    const auto line = last_line(r.out);
    REQUIRE(line.rfind("ALARM t=", 0) == 0);
    const auto t = std::stoul(line.substr(8));
    CHECK(t >= 21);
    CHECK(line.find(" S=") != std::string::npos);
    CHECK(line.find(" overshoot=") != std::string::npos);
    // Verbose output has one line per step before the final report.
    CHECK(r.out.find("t=1 warmup") != std::string::npos);
    CHECK(r.out.find("t=5 S=") != std::string::npos);
}

TEST_CASE("detect agrees with run_until_stop on the same observations") {
    const auto text = fixture(300, 100, 7);
    const auto f = write_file("agree.txt", text);
    const auto g = Model::gaussian_mean_shift(1, 0.5);
    std::vector<double> xs;
    {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty() && line[0] != '#') xs.push_back(std::stod(line));
    }
    for (const std::string method : {"exact-cusum", "wlcusum(5)", "parallel(10)", "glr(20)", "cusum-min-strength"}) {
        const double nu = 6.0;
        auto d = make_detector(MethodSpec::parse(method), g, ParameterVector{1.0}, nu);
        std::size_t i = 0;
        const auto res = run_until_stop(
            *d,
            [&](std::span<double> out) {
                if (i == xs.size()) return false;
                out[0] = xs[i++];
                return true;
            },
            100000);
        std::string expect = res.censored ? "NO-ALARM t=" + std::to_string(res.stop_time)
                                          : "ALARM t=" + std::to_string(res.stop_time) +
                                                " S=" + format_double(res.terminal_statistic) +
                                                " overshoot=" + format_double(res.overshoot);
        const auto r = cli({"detect", "--data", f, "--method", method, "--threshold", "6", "--theta", "1",
                            "--barrier", "0.5"});
        CHECK(r.code == kExitOk);
        CHECK(last_line(r.out) == expect);
    }
}

TEST_CASE("detect input errors name the line") {
    const auto f = write_file("bad.txt", "0.1\n# note\n0.2\nabc\n");
    const auto r = cli({"detect", "--data", f, "--method", "wlcusum(2)", "--threshold", "100", "--barrier", "0.5"});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find(":4:") != std::string::npos);

    const auto d = write_file("dim.txt", "0.1,0.2\n");
    const auto rd = cli({"detect", "--data", d, "--method", "wlcusum(2)", "--threshold", "100", "--barrier", "0.5"});
    CHECK(rd.code == kExitRuntime);
    CHECK(rd.err.find(":1:") != std::string::npos);
    CHECK(rd.err.find("components") != std::string::npos);

    // Two-dimensional data is fine with a matching model.
    const auto two = write_file("two.txt", "0.1, 0.2\n1.5,1.5 # inline comment\n");
    const auto r2 = cli({"detect", "--data", two, "--method", "wlcusum(1)", "--threshold", "100", "--barrier",
                         "0.5", "--dimension", "2"});
    CHECK(r2.code == kExitOk);
    CHECK(last_line(r2.out) == "NO-ALARM t=2");

    CHECK(cli({"detect", "--data", f, "--method", "wlcusum"}).code == kExitUsage);
    CHECK(cli({"detect", "--data", f, "--method", "exact-cusum", "--gamma", "10"}).code == kExitUsage);
    CHECK(cli({"detect", "--data", (scratch_dir() / "nope.txt").string(), "--method", "wlcusum(2)", "--gamma",
               "10"})
              .code == kExitRuntime);
}

TEST_CASE("installed binary reports exit codes") {
    const std::string bin = WLCUSUM_CLI_PATH;
    CHECK(std::system((bin + " calibrate --gamma 100 --theta 1 --barrier 0.5 > /dev/null").c_str()) == 0);
    const int bad = std::system((bin + " calibrate --gamma 0.5 --theta 1 > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(bad) == 2);
}
