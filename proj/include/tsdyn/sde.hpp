#pragma once

// Euler-Maruyama sampling of the invariant law of the pull-fraction /
// noise-sum diffusion for m optimal arms:
//
//   du_a = (p_a(u, w) - u_a) dt
//   dw_a = -w_a/2 dt + sqrt(p_a(u, w)) dB_a
//
// on the open simplex times R^m, with clipping of u, flooring of p, burn-in
// and thinning.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tsdyn/dist.hpp"
#include "tsdyn/rng.hpp"

namespace tsdyn {

struct SdeConfig {
    std::size_t m = 2;
    double dt = 0.02;
    double total_time = 1e5;
    double burn_in_time = 2e4;
    std::size_t thinning = 5;
    std::size_t mc_size = 400;
    double clip_eps = 1e-6;
    double clip_delta = 1e-10;
    std::vector<double> u0;  // empty: uniform 1/m
    std::vector<double> w0;  // empty: zeros
    std::uint64_t seed = 0;
    std::size_t chains = 1;
    SamplingDistribution sampling;
    // Use the exact Gaussian convolution for m = 2 instead of Monte Carlo.
    bool closed_form_two_arm = true;

    static SdeConfig defaults(std::size_t m);

    std::vector<double> initial_u() const;
    std::vector<double> initial_w() const;
    void validate() const;

    std::uint64_t steps() const;
    std::uint64_t burn_in_steps() const;
    std::uint64_t stored_per_chain() const;
    bool uses_closed_form() const;
};

struct SelectionEstimate {
    std::vector<double> raw;  // Monte-Carlo averages before flooring
    std::vector<double> p;    // floored at clip_delta, renormalized
    double raw_sum = 0.0;
};

// Monte-Carlo selection probabilities from M shared draws of the sampling
// distribution. m = 1 returns {1} exactly without consuming randomness.
SelectionEstimate estimate_p(std::span<const double> u, std::span<const double> w,
                             std::size_t mc_size, const SamplingDistribution& dist, Stream& rng,
                             double clip_delta = 1e-10, int threads = 1);

// Same estimator on explicit draws. The plain version runs the OpenMP kernel
// on `threads` threads, the _serial version the reference kernel; results are
// identical.
SelectionEstimate estimate_p_from_draws(std::span<const double> u, std::span<const double> w,
                                        std::span<const double> draws,
                                        const SamplingDistribution& dist, double clip_delta,
                                        int threads);
SelectionEstimate estimate_p_from_draws_serial(std::span<const double> u,
                                               std::span<const double> w,
                                               std::span<const double> draws,
                                               const SamplingDistribution& dist,
                                               double clip_delta);

// Closed form for two arms under Gaussian sampling:
// p_1 = Phi((w_1/u_1 - w_2/u_2) / sqrt(1/u_1 + 1/u_2)), p_2 = Phi(-that).
std::vector<double> p_exact_gaussian_two_arms(std::span<const double> u,
                                              std::span<const double> w);

struct InvariantSampleSet {
    std::size_t m = 0;
    // Row-major, one row of m values per stored sample.
    std::vector<double> u;
    std::vector<double> w;
    std::vector<double> normalized;  // w_a / sqrt(u_a)
    std::vector<std::size_t> chain;
    std::vector<std::uint64_t> step;
    SdeConfig provenance;

    std::size_t size() const { return chain.size(); }
    std::span<const double> u_row(std::size_t i) const { return {u.data() + i * m, m}; }
    std::span<const double> w_row(std::size_t i) const { return {w.data() + i * m, m}; }
    void append(const InvariantSampleSet& other);
};

// Independent streams for one chain: one for the shared Z draws, one per arm
// for the Brownian increments.
struct SdeRandomness {
    Stream z;
    std::vector<Stream> brownian;

    static SdeRandomness from_seed(std::uint64_t seed, std::size_t chain, std::size_t m);
};

// Called every `progress_interval` steps with (chain, step, total steps).
using SdeProgress = std::function<void(std::size_t, std::uint64_t, std::uint64_t)>;
inline constexpr std::uint64_t progress_interval = 500000;

// One chain. Throws DivergedError if the state becomes non-finite or |w_a|
// exceeds 1e6.
InvariantSampleSet euler_maruyama(const SdeConfig& config, SdeRandomness& rng, int threads = 1,
                                  std::size_t chain_index = 0, const SdeProgress& progress = {});

// All configured chains, merged in chain order. Chains run concurrently when
// chains > 1; a single chain instead gets the threads for its inner kernel.
InvariantSampleSet simulate_invariant(const SdeConfig& config, int threads = 1,
                                      const SdeProgress& progress = {});

struct NormalizedStreams {
    std::vector<std::vector<double>> per_arm;
    std::vector<double> pooled;  // arm 0 stream, then arm 1, ...
    std::string warning;         // set when the input set was empty
};

NormalizedStreams normalized_mean_samples(const InvariantSampleSet& set);

}  // namespace tsdyn
