#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tsdyn/bandit.hpp"
#include "tsdyn/sde.hpp"

namespace tsdyn {

// Two-sample Kolmogorov-Smirnov distance sup_x |F_a(x) - F_b(x)|, by merge
// scan over the sorted samples (ties advance both sides together).
double ks_two_sample(std::span<const double> a, std::span<const double> b);

// sup_x |F_n(x) - cdf(x)| for a continuous reference cdf.
double ks_one_sample(std::span<const double> sample, const std::function<double(double)>& cdf);

struct HistogramBin {
    double edge = 0.0;  // left edge; the last bin is closed on the right
    std::size_t count_left = 0;
    std::size_t count_right = 0;
};

struct ComparisonReport {
    double ks_statistic = 0.0;
    std::size_t n_left = 0;
    std::size_t n_right = 0;
    double upper_edge = 0.0;  // right edge of the last bin
    std::vector<HistogramBin> histogram_bins;
};

// KS distance plus a shared equal-width histogram over [min, max] of both.
ComparisonReport compare_samples(std::span<const double> left, std::span<const double> right,
                                 std::size_t bins = 40);

struct RatioSummary {
    std::size_t arm = 0;
    double n_star = 0.0;        // theoretical pull count
    double lai_robbins = 0.0;   // 2 sigma^2 log T / gap^2
    double median = 0.0;        // of n / n_star
    double q25 = 0.0;
    double q75 = 0.0;
    double median_lai_robbins = 0.0;  // of n / lai_robbins
    double median_pulls = 0.0;
};

std::vector<RatioSummary> stability_ratio(const std::vector<BanditTrace>& traces,
                                          const BanditConfig& config);

// n_{a;T}/T across traces against the matching u-coordinate of the SDE set.
ComparisonReport optimal_fraction_vs_sde(const std::vector<BanditTrace>& traces,
                                         const BanditConfig& config,
                                         const InvariantSampleSet& sde_set, std::size_t arm,
                                         std::size_t bins = 40);

enum class LimitReference { gaussian, sde_normalized };

// sqrt(n/sigma^2) (mean - mu_a) across traces against N(0,1) draws or the
// pooled SDE normalized stream.
ComparisonReport normalized_mean_vs_limit(const std::vector<BanditTrace>& traces,
                                          const BanditConfig& config, std::size_t arm,
                                          LimitReference reference,
                                          const InvariantSampleSet* sde_set = nullptr,
                                          std::size_t gaussian_draws = 200000,
                                          std::uint64_t seed = 0, std::size_t bins = 40);

std::vector<double> pull_fractions(const std::vector<BanditTrace>& traces, std::size_t arm);
std::vector<double> normalized_means(const std::vector<BanditTrace>& traces,
                                     const BanditConfig& config, std::size_t arm);

double median(std::span<const double> values);
double sample_mean(std::span<const double> values);
double sample_variance(std::span<const double> values);

}  // namespace tsdyn
