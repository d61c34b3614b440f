// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. SDE sample sets are cached in the work directory keyed by the
// hash of their configuration, so reruns only repeat the bandit work.

#include <sys/wait.h>

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tsdyn/bandit.hpp"
#include "tsdyn/error.hpp"
#include "tsdyn/inference.hpp"
#include "tsdyn/io.hpp"
#include "tsdyn/rng.hpp"
#include "tsdyn/sde.hpp"
#include "tsdyn/stats.hpp"

using namespace tsdyn;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kMasterSeed = 20240601;
constexpr std::uint64_t kSdeSeedTag = 0x73646531;

// Reference quantiles of the pooled normalized stream, K = 2..6, at kTableAlphas.
constexpr std::array<std::array<double, 9>, 5> kReference{{
    {-2.57, -2.20, -1.76, -1.02, -0.22, 0.53, 1.19, 1.57, 1.90},
    {-2.52, -2.19, -1.79, -1.09, -0.30, 0.46, 1.12, 1.50, 1.84},
    {-2.52, -2.18, -1.78, -1.10, -0.34, 0.42, 1.08, 1.48, 1.82},
    {-2.53, -2.19, -1.80, -1.12, -0.36, 0.39, 1.05, 1.45, 1.79},
    {-2.51, -2.17, -1.78, -1.11, -0.37, 0.38, 1.05, 1.44, 1.78},
}};

// Tolerances.
constexpr double kQuantileTol = 0.10;
constexpr double kQuantileTailTol = 0.12;
constexpr double kDegenerateMeanTol = 0.05;
constexpr double kDegenerateVarLo = 0.90;
constexpr double kDegenerateVarHi = 1.10;
constexpr double kDegenerateKs = 0.02;
constexpr std::size_t kOracleStates = 1000;
constexpr std::size_t kOracleMc = 400;
constexpr double kOracleHitRate = 0.95;
constexpr double kOracleSumRate = 0.99;
constexpr double kLimitLawKs = 0.08;
constexpr double kGaussianGap = 0.04;
constexpr double kCoverOptLo = 0.91;
constexpr double kCoverOptHi = 0.985;
constexpr double kNaiveCap = 0.93;
constexpr double kCoverSubLo = 0.90;
constexpr double kCoverSubHi = 0.99;
constexpr double kSmallRunLo = 0.87;
constexpr double kUniqueFraction = 0.95;
constexpr double kUniqueRate = 0.95;
constexpr double kRatioLo = 0.5;
constexpr double kRatioHi = 2.5;
constexpr double kSigmaLo = 0.85;
constexpr double kSigmaHi = 1.15;

struct Outcome {
    std::string name;
    bool pass;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void note(const std::string& msg) {
    using clock = std::chrono::steady_clock;
    static const auto start = clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(clock::now() - start).count();
    std::cerr << "[" << secs << "s] " << msg << std::endl;
}

class Runner {
public:
    Runner(fs::path work, int threads) : work_(std::move(work)), threads_(threads) {
        fs::create_directories(work_);
    }

    // Sample set for K, seeded as the quantiles command derives it.
    const InvariantSampleSet& sde_set(std::size_t k) {
        if (auto it = sets_.find(k); it != sets_.end()) return it->second;
        SdeConfig cfg = SdeConfig::defaults(k);
        cfg.seed = derive_seed(derive_seed(kMasterSeed, kSdeSeedTag), k);
        return sets_.emplace(k, cached(cfg)).first->second;
    }

    Outcome quantile_table() {
        double worst = 0.0;
        std::string where;
        bool pass = true;
        for (std::size_t k = 2; k <= 6; ++k) {
            const auto row = quantile_row_from_samples(sde_set(k), kTableAlphas);
            const auto& ref = kReference[k - 2];
            std::ostringstream line;
            line << "K=" << k;
            for (std::size_t i = 0; i < ref.size(); ++i) {
                const double dev = std::abs(row.values[i] - ref[i]);
                const bool tail = i == 0 || i + 1 == ref.size();
                if (dev > (tail ? kQuantileTailTol : kQuantileTol)) pass = false;
                if (dev > worst) {
                    worst = dev;
                    where = "K=" + std::to_string(k) + " alpha=" + fmt(kTableAlphas[i], 3);
                }
                line << " " << fmt(row.values[i], 2);
            }
            note(line.str());
        }
        return {"quantile_table", pass, "max_dev=" + fmt(worst) + " at " + where};
    }

    Outcome degenerate_law() {
        SdeConfig cfg = SdeConfig::defaults(1);
        cfg.seed = derive_seed(kMasterSeed, 1);
        const auto set = cached(cfg);
        const bool u_one = std::all_of(set.u.begin(), set.u.end(), [](double u) { return u == 1.0; });
        const double mean = sample_mean(set.w);
        const double var = sample_variance(set.w);
        const double ks = ks_one_sample(set.w, [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); });
        const bool pass = u_one && std::abs(mean) <= kDegenerateMeanTol && var >= kDegenerateVarLo &&
                          var <= kDegenerateVarHi && ks <= kDegenerateKs;
        return {"degenerate_law", pass,
                "n=" + std::to_string(set.size()) + " u_const=" + (u_one ? "yes" : "no") +
                    " mean=" + fmt(mean) + " var=" + fmt(var) + " ks=" + fmt(ks)};
    }

    Outcome p_estimator() {
        Stream states = substream(derive_seed(kMasterSeed, 2), 0);
        Stream mc = substream(derive_seed(kMasterSeed, 2), 1);
        const auto dist = SamplingDistribution::gaussian();
        std::size_t hits = 0;
        std::size_t sums = 0;
        for (std::size_t i = 0; i < kOracleStates; ++i) {
            const double u1 = 0.02 + 0.96 * states.uniform_open();
            const std::vector<double> u{u1, 1.0 - u1};
            const std::vector<double> w{states.normal(), states.normal()};
            const auto exact = p_exact_gaussian_two_arms(u, w);
            const auto est = estimate_p(u, w, kOracleMc, dist, mc);
            bool ok = true;
            for (std::size_t a = 0; a < 2; ++a) {
                const double tol = 4.0 * std::sqrt(exact[a] * (1.0 - exact[a]) / kOracleMc) + 2e-10;
                ok = ok && std::abs(est.p[a] - exact[a]) <= tol;
            }
            hits += ok;
            sums += std::abs(est.raw_sum - 1.0) <= 5.0 / std::sqrt(static_cast<double>(kOracleMc));
        }
        const double hit_rate = static_cast<double>(hits) / kOracleStates;
        const double sum_rate = static_cast<double>(sums) / kOracleStates;
        return {"p_estimator", hit_rate >= kOracleHitRate && sum_rate >= kOracleSumRate,
                "within_band=" + fmt(hit_rate, 3) + " sum_ok=" + fmt(sum_rate, 3)};
    }

    // Returns pull-fraction and normalized-mean outcomes from one shared run.
    std::pair<Outcome, Outcome> limit_laws() {
        BanditConfig c;
        c.mu = {0.0, 0.0, 0.0};
        c.horizon = 20000;
        c.seed = derive_seed(kMasterSeed, 4);
        note("bandit K=3 T=2e4 x 20000");
        const auto traces = replicate(c, 20000, threads_);
        const auto& set = sde_set(3);
        const auto frac = optimal_fraction_vs_sde(traces, c, set, 0);
        const auto sde = normalized_mean_vs_limit(traces, c, 0, LimitReference::sde_normalized, &set);
        const auto gauss = normalized_mean_vs_limit(traces, c, 0, LimitReference::gaussian, nullptr,
                                                    200000, derive_seed(kMasterSeed, 5));
        return {{"pull_fraction_law", frac.ks_statistic <= kLimitLawKs, "ks=" + fmt(frac.ks_statistic)},
                {"normalized_mean_law",
                 sde.ks_statistic <= kLimitLawKs && gauss.ks_statistic >= sde.ks_statistic + kGaussianGap,
                 "ks_sde=" + fmt(sde.ks_statistic) + " ks_gaussian=" + fmt(gauss.ks_statistic)}};
    }

    std::pair<Outcome, Outcome> coverage_and_sigma() {
        BanditConfig c;
        c.mu = {1.0, 1.0, 0.5, 0.0};
        c.horizon = 20000;
        c.seed = derive_seed(kMasterSeed, 6);
        QuantileTable table;
        table.set_row(1, analytic_normal_row(kTableAlphas));
        table.set_row(2, quantile_row_from_samples(sde_set(2), kTableAlphas));

        note("bandit setting 1 x 1000");
        const auto traces = replicate(c, 1000, threads_);
        const auto correct = evaluate_coverage(traces, c, 0.05, table, false);
        const auto naive = evaluate_coverage(traces, c, 0.05, table, true);
        bool pass = true;
        std::ostringstream detail;
        for (std::size_t a = 0; a < c.arms(); ++a) {
            const double r = correct[a].rate();
            const double n = naive[a].rate();
            if (a < 2) {
                pass = pass && r >= kCoverOptLo && r <= kCoverOptHi && n < r && n <= kNaiveCap;
            } else {
                pass = pass && r >= kCoverSubLo && r <= kCoverSubHi && n >= kCoverSubLo && n <= kCoverSubHi;
            }
            detail << "arm" << a << "=" << fmt(r, 3) << "/" << fmt(n, 3) << " ";
        }

        BanditConfig small = c;
        small.seed = derive_seed(kMasterSeed, 7);
        const auto short_run = replicate(small, 100, threads_);
        double lowest = 1.0;
        for (const bool nv : {false, true}) {
            for (const auto& cov : evaluate_coverage(short_run, small, 0.05, table, nv)) {
                lowest = std::min(lowest, cov.rate());
            }
        }
        pass = pass && lowest >= kSmallRunLo;
        detail << "R100_min=" << fmt(lowest, 2);

        const auto cls = classify_oracle(c.mu);
        std::vector<double> est;
        for (std::size_t r = 0; r < 100; ++r) est.push_back(estimate_sigma_squared(traces[r], cls));
        const double med = median(est);

        BanditConfig before = c;
        before.residual_mode = ResidualMode::before_update;
        std::vector<double> est_before;
        for (const auto& t : replicate(before, 100, threads_)) {
            est_before.push_back(estimate_sigma_squared(t, cls));
        }

        BanditConfig silent = c;
        silent.noise = make_noise("zero");
        Stream rng = substream(silent.seed, 0);
        const double zero = estimate_sigma_squared(run_episode(silent, rng), cls);

        return {{"coverage", pass, detail.str()},
                {"sigma_consistency", med >= kSigmaLo && med <= kSigmaHi && zero == 0.0,
                 "median=" + fmt(med) + " zero_noise=" + fmt(zero, 1) +
                     " before_update_median=" + fmt(median(est_before))}};
    }

    std::array<Outcome, 3> stability() {
        BanditConfig c;
        c.mu = {1.0, 0.0};
        c.horizon = 20000;
        c.seed = derive_seed(kMasterSeed, 8);
        const auto traces = replicate(c, 200, threads_);
        std::size_t good = 0;
        for (const auto& t : traces) good += static_cast<double>(t.pulls[0]) / 20000.0 >= kUniqueFraction;
        const double rate = static_cast<double>(good) / 200.0;
        const double ratio = stability_ratio(traces, c)[0].median;

        std::vector<double> medians;
        for (const std::int64_t horizon : {1000, 10000, 100000}) {
            BanditConfig h = c;
            h.horizon = horizon;
            medians.push_back(stability_ratio(replicate(h, 200, threads_), h)[0].median);
        }
        const bool trend = std::abs(medians[2] - 1.0) <= std::abs(medians[1] - 1.0) &&
                           std::abs(medians[1] - 1.0) <= std::abs(medians[0] - 1.0) &&
                           std::abs(medians[2] - 1.0) < std::abs(medians[0] - 1.0);

        BanditConfig slow = c;
        slow.sampling = SamplingDistribution::double_exp_tail();
        const auto sg = stability_ratio(traces, c)[0].median_pulls;
        const auto sd = stability_ratio(replicate(slow, 200, threads_), slow)[0].median_pulls;

        return {{{"stability_unique_optimal", rate >= kUniqueRate, "rate=" + fmt(rate, 3)},
                 {"stability_suboptimal", ratio >= kRatioLo && ratio <= kRatioHi && trend,
                  "median_ratio=" + fmt(ratio) + " trend=" + fmt(medians[0]) + "," + fmt(medians[1]) +
                      "," + fmt(medians[2])},
                 {"stability_slow_growth", sd < sg,
                  "median_pulls double_exp=" + fmt(sd, 1) + " gaussian=" + fmt(sg, 1)}}};
    }

    Outcome determinism() {
        const fs::path dir = work_ / "determinism";
        fs::remove_all(dir);
        fs::create_directories(dir);
        const std::map<std::string, std::string> configs{
            {"sde-sample", R"({"master_seed": 9, "sde": {"m": 3, "total_time": 200, "burn_in_time": 20}})"},
            {"quantiles", R"({"master_seed": 9, "sde": {"total_time": 200, "burn_in_time": 20},
                              "inference": {"k_max": 3}})"},
            {"bandit-run", R"({"master_seed": 9, "bandit": {"mu": [1, 1, 0.5, 0], "horizon": 2000,
                               "replications": 300}})"},
            {"coverage", R"({"master_seed": 9, "bandit": {"mu": [1, 1, 0.5, 0], "horizon": 2000,
                             "replications": 300}, "sde": {"total_time": 200, "burn_in_time": 20}})"},
            {"compare", R"({"master_seed": 9, "bandit": {"mu": [0, 0, 0], "horizon": 2000,
                            "replications": 300}, "sde": {"total_time": 200, "burn_in_time": 20},
                            "compare": {"mode": "fig2", "gaussian_draws": 5000}})"},
            {"stability", R"({"master_seed": 9, "bandit": {"mu": [1, 0], "horizon": 2000,
                              "replications": 100}, "stability": {"horizons": [500, 2000]}})"},
        };
        std::size_t compared = 0;
        std::string first_diff;
        for (const auto& [command, body] : configs) {
            const fs::path cfg = dir / (command + ".json");
            write_text(cfg, body);
            std::vector<fs::path> outs;
            for (const char* run : {"t1", "t8", "t1_again"}) {
                const fs::path out = dir / command / run;
                const std::string threads = std::string(run).substr(1, 1);
                const std::string cmd = std::string(TSDYN_CLI_PATH) + " " + command + " --config " +
                                        cfg.string() + " --out " + out.string() + " --threads " + threads +
                                        " >/dev/null 2>&1";
                const int status = std::system(cmd.c_str());
                if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
                    return {"determinism", false, command + " exited abnormally"};
                }
                outs.push_back(out);
            }
            for (const auto& entry : fs::directory_iterator(outs[0])) {
                const auto name = entry.path().filename();
                const auto ref = read_text(entry.path());
                for (std::size_t i = 1; i < outs.size(); ++i) {
                    if (!fs::exists(outs[i] / name) || read_text(outs[i] / name) != ref) {
                        if (first_diff.empty()) first_diff = (outs[i] / name).string();
                    }
                }
                ++compared;
            }
        }
        return {"determinism", first_diff.empty() && compared > 0,
                std::to_string(compared) + " files" + (first_diff.empty() ? "" : " differ: " + first_diff)};
    }

private:
    InvariantSampleSet cached(const SdeConfig& cfg) {
        const auto key = config_hash(to_json(cfg));
        const fs::path csv = work_ / ("sde_" + key + ".csv");
        const fs::path side = work_ / ("sde_" + key + ".json");
        if (fs::exists(csv) && fs::exists(side)) {
            try {
                note("cache hit m=" + std::to_string(cfg.m) + " " + key);
                return read_sample_set(csv, side);
            } catch (const IoError& e) {
                note(std::string("cache unreadable, recomputing: ") + e.what());
            }
        }
        note("simulating m=" + std::to_string(cfg.m) + " steps=" + std::to_string(cfg.steps()));
        const auto set = simulate_invariant(cfg, threads_, [&](std::size_t, std::uint64_t done, std::uint64_t total) {
            note("  m=" + std::to_string(cfg.m) + " " + std::to_string(done) + "/" + std::to_string(total));
        });
        const fs::path tmp_csv = work_ / ("sde_" + key + ".csv.tmp");
        const fs::path tmp_side = work_ / ("sde_" + key + ".json.tmp");
        write_sample_set(tmp_csv, tmp_side, set, {cfg.seed, key});
        fs::rename(tmp_csv, csv);
        fs::rename(tmp_side, side);
        return set;
    }

    fs::path work_;
    int threads_;
    std::map<std::size_t, InvariantSampleSet> sets_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tsdyn acceptance"};
    fs::path work = fs::temp_directory_path() / "tsdyn_acceptance";
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::string> only;
    app.add_option("--work-dir", work, "cache and scratch directory");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--only", only, "run the named checks only");
    CLI11_PARSE(app, argc, argv);

    Runner runner(work, threads);
    std::vector<Outcome> outcomes;
    auto wanted = [&](std::initializer_list<const char*> names) {
        if (only.empty()) return true;
        for (const char* n : names) {
            if (std::find(only.begin(), only.end(), n) != only.end()) return true;
        }
        return false;
    };
    auto guard = [&](std::initializer_list<const char*> names, const std::function<void()>& body) {
        if (!wanted(names)) return;
        try {
            body();
        } catch (const std::exception& e) {
            for (const char* n : names) outcomes.push_back({n, false, std::string("error: ") + e.what()});
        }
    };

    guard({"p_estimator"}, [&] { outcomes.push_back(runner.p_estimator()); });
    guard({"degenerate_law"}, [&] { outcomes.push_back(runner.degenerate_law()); });
    guard({"stability_unique_optimal", "stability_suboptimal", "stability_slow_growth"}, [&] {
        for (auto& o : runner.stability()) outcomes.push_back(std::move(o));
    });
    guard({"determinism"}, [&] { outcomes.push_back(runner.determinism()); });
    guard({"coverage", "sigma_consistency"}, [&] {
        auto [cov, sig] = runner.coverage_and_sigma();
        outcomes.push_back(std::move(cov));
        outcomes.push_back(std::move(sig));
    });
    guard({"pull_fraction_law", "normalized_mean_law"}, [&] {
        auto [frac, norm] = runner.limit_laws();
        outcomes.push_back(std::move(frac));
        outcomes.push_back(std::move(norm));
    });
    guard({"quantile_table"}, [&] { outcomes.push_back(runner.quantile_table()); });

    bool all = true;
    for (const auto& o : outcomes) {
        std::cout << (o.pass ? "PASS " : "FAIL ") << o.name << "  " << o.detail << "\n";
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
