#include "tsdyn/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "tsdyn/error.hpp"

namespace tsdyn {

void BanditConfig::validate() const {
    if (mu.empty()) throw ParameterError("bandit.mu: at least one arm required");
    for (std::size_t a = 0; a < mu.size(); ++a) {
        if (!std::isfinite(mu[a])) {
            throw ParameterError("bandit.mu[" + std::to_string(a) + "]: must be finite");
        }
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ParameterError("bandit.sigma: must be positive and finite");
    }
    if (horizon < 1) throw ParameterError("bandit.horizon: must be >= 1");
    for (const auto t : checkpoint_times) {
        if (t < 1 || t > horizon) {
            throw ParameterError("bandit.checkpoint_times: entries must lie in [1, horizon]");
        }
    }
}

double BanditConfig::best_mean() const { return *std::max_element(mu.begin(), mu.end()); }

std::vector<double> BanditConfig::gaps() const {
    const double best = best_mean();
    std::vector<double> out(mu.size());
    std::transform(mu.begin(), mu.end(), out.begin(), [best](double m) { return best - m; });
    return out;
}

std::vector<std::size_t> BanditConfig::optimal_arms() const {
    const double best = best_mean();
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < mu.size(); ++a) {
        if (mu[a] == best) out.push_back(a);
    }
    return out;
}

std::vector<std::size_t> BanditConfig::suboptimal_arms() const {
    const double best = best_mean();
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < mu.size(); ++a) {
        if (mu[a] != best) out.push_back(a);
    }
    return out;
}

std::vector<std::int64_t> geometric_checkpoints(std::int64_t horizon) {
    std::vector<std::int64_t> out;
    for (std::int64_t t = horizon; t >= 1; t /= 2) out.push_back(t);
    std::reverse(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::int64_t BanditTrace::horizon() const {
    std::int64_t total = 0;
    for (const auto n : pulls) total += n;
    return total;
}

namespace {

template <class Sampler, class Noise>
BanditTrace run_loop(const BanditConfig& cfg, const Sampler& sampler, const Noise& noise,
                     Stream& rng, const RoundObserver& observer) {
    const std::size_t k = cfg.arms();
    const double sigma = cfg.sigma;

    // Algorithm state: prior pseudo-count 1 and prior mean 0 per arm.
    std::vector<std::int64_t> post_count(k, 1);
    std::vector<double> post_mean(k, 0.0);
    std::vector<double> scale(k, sigma);

    BanditTrace trace;
    trace.pulls.assign(k, 0);
    trace.emp_mean.assign(k, 0.0);
    trace.reward_sum.assign(k, 0.0);
    trace.noise_sum.assign(k, 0.0);
    trace.running_residual_ss.assign(k, 0.0);

    std::vector<std::int64_t> checkpoints = cfg.checkpoint_times;
    std::sort(checkpoints.begin(), checkpoints.end());
    auto next_checkpoint = checkpoints.begin();

    for (std::int64_t t = 1; t <= cfg.horizon; ++t) {
        std::size_t chosen = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < k; ++a) {
            const double index = post_mean[a] + scale[a] * sampler.sample(rng);
            if (index > best) {
                best = index;
                chosen = a;
            }
        }

        const double xi = noise.sample(rng);
        const double reward = cfg.mu[chosen] + sigma * xi;

        const std::int64_t prev_count = post_count[chosen];
        post_count[chosen] = prev_count + 1;
        post_mean[chosen] = (static_cast<double>(prev_count) * post_mean[chosen] + reward) /
                            static_cast<double>(post_count[chosen]);
        scale[chosen] = sigma / std::sqrt(static_cast<double>(post_count[chosen]));

        const std::int64_t prev_pulls = trace.pulls[chosen];
        const double mean_before =
            prev_pulls == 0 ? 0.0 : trace.reward_sum[chosen] / static_cast<double>(prev_pulls);
        trace.pulls[chosen] = prev_pulls + 1;
        trace.reward_sum[chosen] += reward;
        trace.noise_sum[chosen] += xi;
        const double mean_after =
            trace.reward_sum[chosen] / static_cast<double>(trace.pulls[chosen]);
        const double centre =
            cfg.residual_mode == ResidualMode::after_update ? mean_after : mean_before;
        const double resid = reward - centre;
        trace.running_residual_ss[chosen] += resid * resid;

        if (observer) {
            observer(RoundView{t, chosen, reward, xi, post_mean, post_count});
        }
        while (next_checkpoint != checkpoints.end() && *next_checkpoint == t) {
            trace.checkpoints.push_back(Checkpoint{t, trace.pulls});
            ++next_checkpoint;
        }
    }

    for (std::size_t a = 0; a < k; ++a) {
        trace.emp_mean[a] =
            trace.pulls[a] == 0 ? 0.0 : trace.reward_sum[a] / static_cast<double>(trace.pulls[a]);
    }
    return trace;
}

void require_gap(double gap, double sigma, std::int64_t horizon, const char* what) {
    if (!(gap > 0.0)) {
        throw DomainError(std::string(what) + ": gap must be positive (suboptimal arms only)");
    }
    if (!(sigma > 0.0)) throw DomainError(std::string(what) + ": sigma must be positive");
    if (horizon < 2) throw DomainError(std::string(what) + ": horizon must be >= 2");
}

}  // namespace

BanditTrace run_episode(const BanditConfig& config, Stream& rng, const RoundObserver& observer) {
    config.validate();
    return config.sampling.visit([&](const auto& sampler) {
        return config.noise.visit([&](const auto& noise) {
            return run_loop(config, sampler, noise, rng, observer);
        });
    });
}

double theoretical_pull_count(const SamplingDistribution& dist, double gap, double sigma,
                              std::int64_t horizon) {
    require_gap(gap, sigma, horizon, "theoretical_pull_count");
    const double q = dist.survival_inverse(1.0 / static_cast<double>(horizon));
    return sigma * sigma * (q / gap) * (q / gap);
}

double lai_robbins_benchmark(double gap, double sigma, std::int64_t horizon) {
    require_gap(gap, sigma, horizon, "lai_robbins_benchmark");
    return sigma * sigma * 2.0 * std::log(static_cast<double>(horizon)) / (gap * gap);
}

std::vector<BanditTrace> replicate_serial(const BanditConfig& config, std::size_t replications) {
    config.validate();
    std::vector<BanditTrace> out;
    out.reserve(replications);
    for (std::size_t r = 0; r < replications; ++r) {
        Stream rng = substream(config.seed, r);
        out.push_back(run_episode(config, rng));
    }
    return out;
}

std::vector<BanditTrace> replicate(const BanditConfig& config, std::size_t replications,
                                   int threads, std::size_t first) {
    config.validate();
    std::vector<BanditTrace> out(replications);
    std::exception_ptr failure;
    const auto n = static_cast<std::int64_t>(replications);

#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(threads, 1))
    for (std::int64_t r = 0; r < n; ++r) {
        try {
            Stream rng = substream(config.seed, first + static_cast<std::uint64_t>(r));
            out[static_cast<std::size_t>(r)] = run_episode(config, rng);
        } catch (...) {
#pragma omp critical(tsdyn_replicate_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace tsdyn
