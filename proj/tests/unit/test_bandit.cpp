#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "oracle.hpp"
#include "tsdyn/bandit.hpp"
#include "tsdyn/error.hpp"
#include "tsdyn/stats.hpp"

using namespace tsdyn;

namespace {

BanditConfig make(std::vector<double> mu, std::int64_t horizon, std::uint64_t seed = 1) {
    BanditConfig c;
    c.mu = std::move(mu);
    c.horizon = horizon;
    c.seed = seed;
    return c;
}

bool same_trace(const BanditTrace& a, const BanditTrace& b) {
    return a.pulls == b.pulls && a.emp_mean == b.emp_mean && a.noise_sum == b.noise_sum &&
           a.running_residual_ss == b.running_residual_ss && a.reward_sum == b.reward_sum;
}

}  // namespace

TEST_CASE("single arm takes every pull") {
    auto c = make({0.3}, 100);
    Stream rng = substream(c.seed, 0);
    const auto t = run_episode(c, rng);
    CHECK(t.pulls == std::vector<std::int64_t>{100});
}

TEST_CASE("episode matches a literal replay of the selection loop") {
    auto c = make({0.2, 0.5, 0.5, -1.0}, 3000, 9);
    c.sigma = 1.7;
    Stream a = substream(c.seed, 4);
    Stream b = substream(c.seed, 4);
    const auto trace = run_episode(c, a);
    const auto replay = oracle::replay(c, b);

    std::vector<std::int64_t> pulls(c.arms(), 0);
    std::vector<double> sums(c.arms(), 0.0);
    for (std::size_t s = 0; s < replay.arms.size(); ++s) {
        ++pulls[replay.arms[s]];
        sums[replay.arms[s]] += replay.rewards[s];
    }
    CHECK(trace.pulls == pulls);
    for (std::size_t k = 0; k < c.arms(); ++k) {
        CHECK(trace.emp_mean[k] * static_cast<double>(trace.pulls[k]) ==
              doctest::Approx(sums[k]).epsilon(1e-9));
    }
}

TEST_CASE("conservation and recursion against batch means at random rounds") {
    auto c = make({1.0, 0.8, 0.0}, 5000, 21);
    std::vector<std::vector<double>> rewards(c.arms());
    Stream pick = substream(99, 0);
    std::vector<std::int64_t> probes;
    for (int i = 0; i < 100; ++i) probes.push_back(1 + static_cast<std::int64_t>(pick.bits() % 5000));
    std::sort(probes.begin(), probes.end());

    int checked = 0;
    bool ok = true;
    Stream rng = substream(c.seed, 0);
    const auto trace = run_episode(c, rng, [&](const RoundView& v) {
        rewards[v.arm].push_back(v.reward);
        if (!std::binary_search(probes.begin(), probes.end(), v.t)) return;
        ++checked;
        for (std::size_t a = 0; a < c.arms(); ++a) {
            const auto& r = rewards[a];
            // Prior pseudo-observation at 0 enters the posterior mean with weight 1.
            const double batch = std::accumulate(r.begin(), r.end(), 0.0) / (1.0 + static_cast<double>(r.size()));
            ok = ok && std::abs(v.posterior_mean[a] - batch) <= 1e-9 * std::max(1.0, std::abs(batch));
            ok = ok && v.posterior_count[a] == 1 + static_cast<std::int64_t>(r.size());
        }
    });
    CHECK(ok);
    CHECK(checked > 0);
    CHECK(trace.horizon() == c.horizon);
}

TEST_CASE("unpulled arms report a zero empirical mean") {
    auto c = make({10.0, -10.0}, 50, 2);
    c.sigma = 0.01;
    Stream rng = substream(c.seed, 0);
    const auto t = run_episode(c, rng);
    CHECK(t.pulls[0] + t.pulls[1] == 50);
    if (t.pulls[1] == 0) CHECK(t.emp_mean[1] == 0.0);
}

TEST_CASE("zero noise gives exact means and zero residuals") {
    auto c = make({1.0, 1.0, 0.5, 0.0}, 4000, 8);
    c.noise = make_noise("zero");
    Stream rng = substream(c.seed, 0);
    const auto t = run_episode(c, rng);
    for (std::size_t a = 0; a < c.arms(); ++a) {
        if (t.pulls[a] == 0) continue;
        CHECK(t.emp_mean[a] == c.mu[a]);
        CHECK(t.running_residual_ss[a] == 0.0);
        CHECK(t.noise_sum[a] == 0.0);
    }
}

TEST_CASE("residual modes differ only in the centring mean") {
    auto c = make({0.0, -0.4}, 2000, 4);
    Stream a = substream(c.seed, 0);
    const auto after = run_episode(c, a);
    c.residual_mode = ResidualMode::before_update;
    Stream b = substream(c.seed, 0);
    const auto before = run_episode(c, b);
    CHECK(after.pulls == before.pulls);
    CHECK(after.emp_mean == before.emp_mean);
    // (R - mean_after) = (n-1)/n (R - mean_before), so every term shrinks.
    for (std::size_t k = 0; k < 2; ++k) CHECK(after.running_residual_ss[k] < before.running_residual_ss[k]);
}

TEST_CASE("checkpoints snapshot pull counts on a geometric grid") {
    CHECK(geometric_checkpoints(20) == std::vector<std::int64_t>{1, 2, 5, 10, 20});
    CHECK(geometric_checkpoints(1) == std::vector<std::int64_t>{1});
    auto c = make({1.0, 0.0}, 1000, 3);
    c.checkpoint_times = geometric_checkpoints(c.horizon);
    Stream rng = substream(c.seed, 0);
    const auto t = run_episode(c, rng);
    REQUIRE(t.checkpoints.size() == c.checkpoint_times.size());
    for (const auto& cp : t.checkpoints) {
        CHECK(std::accumulate(cp.pulls.begin(), cp.pulls.end(), std::int64_t{0}) == cp.t);
    }
    CHECK(t.checkpoints.back().pulls == t.pulls);
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(make({}, 10).validate(), ParameterError);
    auto c = make({1.0, 0.0}, 0);
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c.horizon = 10;
    c.sigma = 0.0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c.sigma = 1.0;
    c.checkpoint_times = {11};
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c.checkpoint_times.clear();
    CHECK_NOTHROW(c.validate());
    const auto s1 = make({1, 1, 0.5, 0}, 10);
    CHECK(s1.optimal_arms() == std::vector<std::size_t>{0, 1});
    CHECK(s1.suboptimal_arms() == std::vector<std::size_t>{2, 3});
    CHECK(s1.gaps() == std::vector<double>{0, 0, 0.5, 1});
}

TEST_CASE("theoretical pull count and the Lai-Robbins benchmark") {
    const auto g = SamplingDistribution::gaussian();
    const double q = oracle::normal_upper(1e-6);
    CHECK(theoretical_pull_count(g, 1.0, 1.0, 1000000) == doctest::Approx(q * q).epsilon(1e-9));
    CHECK(theoretical_pull_count(g, 1.0, 1.0, 1000000) == doctest::Approx(22.595).epsilon(1e-4));
    CHECK(theoretical_pull_count(g, 0.5, 1.0, 5000) ==
          doctest::Approx(4.0 * theoretical_pull_count(g, 1.0, 1.0, 5000)).epsilon(1e-12));

    const auto d = SamplingDistribution::double_exp_tail();
    const double qd = std::log(1.0 + std::log(5e5));
    CHECK(theoretical_pull_count(d, 1.0, 1.0, 1000000) == doctest::Approx(qd * qd).epsilon(1e-9));

    CHECK(lai_robbins_benchmark(1.0, 1.0, 1000000) == doctest::Approx(2 * std::log(1e6)).epsilon(1e-12));
    CHECK(lai_robbins_benchmark(1.0, 2.0, 1000) ==
          doctest::Approx(4 * lai_robbins_benchmark(1.0, 1.0, 1000)).epsilon(1e-12));

    double prev = 0.0;
    for (double t = 1e4; t <= 1e8; t *= 10) {
        const auto T = static_cast<std::int64_t>(t);
        const double ratio = theoretical_pull_count(g, 1.0, 1.0, T) / lai_robbins_benchmark(1.0, 1.0, T);
        CAPTURE(t);
        CHECK(ratio > prev);
        CHECK(ratio >= 0.75);
        CHECK(ratio <= 1.0);
        prev = ratio;
    }

    CHECK_THROWS_AS(theoretical_pull_count(g, 0.0, 1.0, 100), DomainError);
    CHECK_THROWS_AS(lai_robbins_benchmark(-1.0, 1.0, 100), DomainError);
    CHECK_THROWS_AS(lai_robbins_benchmark(1.0, 1.0, 1), DomainError);
}

TEST_CASE("replicate is ordered by index and independent of thread count") {
    auto c = make({1.0, 1.0, 0.0}, 500, 77);
    const auto serial = replicate_serial(c, 12);
    const auto par = replicate(c, 12, 8);
    REQUIRE(par.size() == serial.size());
    for (std::size_t r = 0; r < serial.size(); ++r) CHECK(same_trace(serial[r], par[r]));

    Stream rng = substream(c.seed, 0);
    CHECK(same_trace(replicate(c, 1, 1).front(), run_episode(c, rng)));

    const auto tail = replicate(c, 4, 3, 8);
    for (std::size_t r = 0; r < 4; ++r) CHECK(same_trace(tail[r], serial[8 + r]));
}

TEST_CASE("three equal arms keep spread-out pull fractions") {
    auto c = make({0.0, 0.0, 0.0}, 20000, 5);
    const auto traces = replicate(c, 2000, 1);
    for (std::size_t a = 0; a < 3; ++a) {
        const auto f = pull_fractions(traces, a);
        CHECK(std::sqrt(sample_variance(f)) >= 0.05);
    }
}

TEST_CASE("relabelling arms permutes the pull-fraction law") {
    auto c = make({1.0, 1.0, 0.0}, 3000, 6);
    auto perm = make({0.0, 1.0, 1.0}, 3000, 60);
    const auto a = replicate(c, 2000, 1);
    const auto b = replicate(perm, 2000, 1);
    // Arm 0 in c corresponds to arm 2 (or 1) in perm; arm 2 in c to arm 0.
    CHECK(std::abs(sample_mean(pull_fractions(a, 0)) - sample_mean(pull_fractions(b, 2))) <= 0.02);
    CHECK(std::abs(sample_mean(pull_fractions(a, 1)) - sample_mean(pull_fractions(b, 1))) <= 0.02);
    CHECK(std::abs(sample_mean(pull_fractions(a, 2)) - sample_mean(pull_fractions(b, 0))) <= 0.02);
}

TEST_CASE("suboptimal pull count lands near its theoretical scale") {
    auto c = make({1.0, 0.0}, 20000, 12);
    const auto traces = replicate(c, 200, 1);
    const auto s = stability_ratio(traces, c);
    REQUIRE(s.size() == 1);
    CHECK(s[0].median >= 0.5);
    CHECK(s[0].median <= 2.5);
    std::size_t dominant = 0;
    for (const auto f : pull_fractions(traces, 0)) dominant += f >= 0.95;
    CHECK(dominant >= 190);
}
