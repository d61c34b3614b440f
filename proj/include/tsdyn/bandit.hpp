#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tsdyn/dist.hpp"
#include "tsdyn/rng.hpp"

namespace tsdyn {

// Which running mean enters the residual sum behind the variance estimator:
// the empirical mean after folding in the current reward, or before.
enum class ResidualMode { after_update, before_update };

struct BanditConfig {
    std::vector<double> mu;
    double sigma = 1.0;
    std::int64_t horizon = 1;
    SamplingDistribution sampling;
    NoiseDistribution noise;
    std::uint64_t seed = 0;
    ResidualMode residual_mode = ResidualMode::after_update;
    // Rounds after which pull counts are snapshotted; empty disables.
    std::vector<std::int64_t> checkpoint_times;

    std::size_t arms() const { return mu.size(); }
    // Throws ParameterError on the first violated constraint.
    void validate() const;

    double best_mean() const;
    std::vector<double> gaps() const;
    std::vector<std::size_t> optimal_arms() const;
    std::vector<std::size_t> suboptimal_arms() const;
};

// {floor(T / 2^k) : k >= 0, value >= 1}, ascending, deduplicated.
std::vector<std::int64_t> geometric_checkpoints(std::int64_t horizon);

struct Checkpoint {
    std::int64_t t = 0;
    std::vector<std::int64_t> pulls;
};

struct BanditTrace {
    std::vector<std::int64_t> pulls;
    std::vector<double> emp_mean;           // 0 for never-pulled arms
    std::vector<double> reward_sum;
    std::vector<double> noise_sum;          // sum of xi_s over rounds pulling the arm
    std::vector<double> running_residual_ss;
    std::vector<Checkpoint> checkpoints;

    std::size_t arms() const { return pulls.size(); }
    std::int64_t horizon() const;
};

// Observer hook for tests and diagnostics; called after each round's update.
struct RoundView {
    std::int64_t t;
    std::size_t arm;
    double reward;
    double noise;
    std::span<const double> posterior_mean;   // prior-shrunk running mean per arm
    std::span<const std::int64_t> posterior_count;  // 1 + pulls
};
using RoundObserver = std::function<void(const RoundView&)>;

BanditTrace run_episode(const BanditConfig& config, Stream& rng,
                        const RoundObserver& observer = nullptr);

// sigma^2 (survival_inverse(1/T) / gap)^2, the deterministic pull-count scale
// of a suboptimal arm.
double theoretical_pull_count(const SamplingDistribution& dist, double gap, double sigma,
                              std::int64_t horizon);

// sigma^2 * 2 log T / gap^2.
double lai_robbins_benchmark(double gap, double sigma, std::int64_t horizon);

// Replication r runs on substream(config.seed, r). The parallel version
// produces the same list as the serial reference for any thread count;
// `first` offsets the replication index so long runs can be split into
// batches without changing any trace.
std::vector<BanditTrace> replicate_serial(const BanditConfig& config, std::size_t replications);
std::vector<BanditTrace> replicate(const BanditConfig& config, std::size_t replications,
                                   int threads, std::size_t first = 0);

}  // namespace tsdyn
