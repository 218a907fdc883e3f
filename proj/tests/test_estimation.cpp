#include <doctest.h>

#include <chrono>
#include <cmath>
#include <deque>
#include <vector>

#include "wlcusum/estimation.hpp"

using namespace wlcusum;

namespace {

std::vector<double> exact_sum(const std::vector<Observation>& xs, std::size_t dim) {
    std::vector<double> s(dim, 0.0);
    for (const auto& x : xs)
        for (std::size_t i = 0; i < dim; ++i) s[i] += x[i];
    return s;
}

}  // namespace

TEST_CASE("sliding window ring semantics") {
    SlidingWindow w(2, 1);
    CHECK_FALSE(w.ready());
    w.push(Observation{1.0});
    w.push(Observation{2.0});
    w.push(Observation{3.0});
    CHECK(w.count() == 2);
    const auto s = w.samples();
    REQUIRE(s.size() == 2);
    CHECK(s[0][0] == 2.0);
    CHECK(s[1][0] == 3.0);
    CHECK(w.running_sum()[0] == 5.0);
    CHECK(w.running_sq_sum()[0] == 13.0);

    SlidingWindow one(1, 1);
    one.push(Observation{7.0});
    CHECK(one.running_sum()[0] == 7.0);
    CHECK(one.ready());

    CHECK_THROWS_AS(w.push(Observation{1.0, 2.0}), InputError);
    CHECK_THROWS_AS(SlidingWindow(0, 1), UsageError);
}

TEST_CASE("sliding window estimate") {
    const auto g = Model::gaussian_mean_shift(1, 0.5);
    SlidingWindow w(2, 1);
    w.push(Observation{0.2});
    CHECK_THROWS_AS(w.estimate(g), NotReadyError);
    w.push(Observation{0.4});
    CHECK(w.estimate(g)[0] == doctest::Approx(0.5));
    w.clear();
    w.push(Observation{1.0});
    w.push(Observation{1.4});
    CHECK(w.estimate(g)[0] == doctest::Approx(1.2));
}

TEST_CASE("sliding window estimate matches the direct MLE") {
    RngStream rng(71, 0);
    const std::vector<Model> models{Model::gaussian_mean_shift(1, 0.5), Model::gaussian_mean_shift(3, 0.5),
                                    Model::laplace_to_normal_known_var(2.0),
                                    Model::laplace_to_normal_unknown_var()};
    for (const auto& m : models) {
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t cap = 1 + trial % 12;
            SlidingWindow w(cap, m.observation_dim());
            // Fresh buffers: running sums accumulate in the same order as a direct pass.
            for (std::size_t i = 0; i < cap; ++i) {
                std::vector<double> x(m.observation_dim());
                for (auto& v : x) v = rng.normal() + 0.3;
                w.push(Observation(x));
            }
            const auto a = w.estimate(m);
            const auto b = m.window_mle(w.samples());
            for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
            if (m.family() != Family::LaplaceToNormalUnknownVar) CHECK(a == b);
        }
    }
}

TEST_CASE("estimates after eviction stay within rounding of the direct MLE") {
    RngStream rng(72, 0);
    const auto m = Model::laplace_to_normal_unknown_var();
    SlidingWindow w(7, 1);
    for (int t = 0; t < 5000; ++t) {
        w.push(Observation{2.0 * rng.normal() + 1.0});
        if (!w.ready()) continue;
        const auto a = w.estimate(m);
        const auto b = m.window_mle(w.samples());
        CHECK(std::abs(a[0] - b[0]) <= 1e-12 * std::max(1.0, std::abs(b[0])));
        CHECK(std::abs(a[1] - b[1]) <= 1e-10 * std::max(1.0, b[1]));
    }
}

TEST_CASE("running sums do not drift over a million pushes") {
    RngStream rng(73, 0);
    SlidingWindow w(13, 2);
    std::deque<Observation> shadow;
    for (int t = 0; t < 1000000; ++t) {
        // Large offset makes catastrophic cancellation visible if sums were never rebuilt.
        Observation x{1e4 + rng.normal(), -3.0 + 1e-3 * rng.normal()};
        w.push(x);
        shadow.push_back(x);
        if (shadow.size() > 13) shadow.pop_front();
    }
    const auto s = exact_sum({shadow.begin(), shadow.end()}, 2);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(std::abs(w.running_sum()[i] - s[i]) <= 1e-9 * std::abs(s[i]));
}

TEST_CASE("prefix bank suffix estimates") {
    const auto full = Model::gaussian_mean_shift(1, 0.0);
    PrefixEstimateBank bank(2, 1);
    CHECK_THROWS_AS(bank.estimates_all(full), NotReadyError);
    bank.push(Observation{1.0});
    bank.push(Observation{3.0});
    const auto e = bank.estimates_all(full);
    REQUIRE(e.size() == 2);
    CHECK(e.at(1)[0] == 3.0);
    CHECK(e.at(2)[0] == 2.0);
    CHECK_THROWS_AS(bank.estimate(full, 3), UsageError);

    PrefixEstimateBank partial(5, 1);
    partial.push(Observation{4.0});
    CHECK(partial.available() == 1);
    CHECK(partial.estimates_all(full).size() == 1);
    CHECK_THROWS_AS(partial.estimate(full, 2), NotReadyError);
}

TEST_CASE("prefix bank equals independent sliding windows exactly") {
    RngStream rng(74, 0);
    const std::vector<Model> models{Model::gaussian_mean_shift(1, 0.5), Model::gaussian_mean_shift(2, 0.5),
                                    Model::laplace_to_normal_unknown_var()};
    for (int stream = 0; stream < 500; ++stream) {
        const auto& m = models[stream % models.size()];
        const std::size_t W = 1 + stream % 15;
        const int len = 1 + static_cast<int>(rng.uniform() * 60);
        PrefixEstimateBank bank(W, m.observation_dim());
        std::vector<SlidingWindow> windows;
        for (std::size_t w = 1; w <= W; ++w) windows.emplace_back(w, m.observation_dim());
        for (int t = 0; t < len; ++t) {
            std::vector<double> x(m.observation_dim());
            for (auto& v : x) v = rng.normal() + (t > len / 2 ? 1.0 : 0.0);
            bank.push(Observation(x));
            for (auto& win : windows) win.push(Observation(x));
            const auto all = bank.estimates_all(m);
            CHECK(all.size() == std::min<std::size_t>(W, t + 1));
            for (const auto& [w, est] : all) CHECK(est == windows[w - 1].estimate(m));
        }
    }
}

TEST_CASE("prefix bank stays exact across sum refreshes") {
    RngStream rng(75, 0);
    const auto m = Model::laplace_to_normal_unknown_var();
    const std::size_t W = 6;
    PrefixEstimateBank bank(W, 1);
    std::vector<SlidingWindow> windows;
    for (std::size_t w = 1; w <= W; ++w) windows.emplace_back(w, 1);
    for (std::uint64_t t = 0; t < 3 * kSumRefreshInterval + 17; ++t) {
        const Observation x{100.0 + rng.normal()};
        bank.push(x);
        for (auto& win : windows) win.push(x);
        if (t + 1 >= W && (t % 97 == 0 || t + 1 == 3 * kSumRefreshInterval + 17))
            for (std::size_t w = 1; w <= W; ++w) CHECK(bank.estimate(m, w) == windows[w - 1].estimate(m));
    }
}

TEST_CASE("prefix bank per-step cost is linear in W") {
    const auto m = Model::gaussian_mean_shift(1, 0.5);
    RngStream rng(76, 0);
    std::vector<double> xs(20000);
    for (auto& x : xs) x = rng.normal();
    auto cost = [&](std::size_t W) {
        std::vector<double> est(1);
        double best = 1e300;
        for (int rep = 0; rep < 3; ++rep) {
            PrefixEstimateBank bank(W, 1);
            const auto t0 = std::chrono::steady_clock::now();
            double sink = 0;
            for (double x : xs) {
                bank.push_unchecked(std::span<const double>(&x, 1));
                for (std::size_t w = 1; w <= bank.available(); ++w) {
                    bank.estimate_into(m, w, est);
                    sink += est[0];
                }
            }
            const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            CHECK(std::isfinite(sink));
            best = std::min(best, dt);
        }
        return best / xs.size();
    };
    // Least-squares line through (W, cost); each point must sit within 2x of the fit.
    const std::vector<std::size_t> Ws{4, 8, 16, 32, 64};
    std::vector<double> c;
    for (auto W : Ws) c.push_back(cost(W));
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < Ws.size(); ++i) {
        mx += static_cast<double>(Ws[i]);
        my += c[i];
    }
    mx /= Ws.size();
    my /= Ws.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < Ws.size(); ++i) {
        sxy += (Ws[i] - mx) * (c[i] - my);
        sxx += (Ws[i] - mx) * (Ws[i] - mx);
    }
    const double slope = sxy / sxx, icpt = my - slope * mx;
    CHECK(slope > 0);
    for (std::size_t i = 0; i < Ws.size(); ++i) {
        const double fit = icpt + slope * static_cast<double>(Ws[i]);
        CHECK(c[i] <= 2 * fit);
        CHECK(c[i] >= fit / 2);
    }
}
