#include "tsdyn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsdyn/error.hpp"
#include "tsdyn/inference.hpp"

namespace tsdyn {

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DomainError("ks_two_sample: both samples must be nonempty");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());

    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    // Once one side is exhausted the gap only shrinks toward zero.
    return d;
}

double ks_one_sample(std::span<const double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw DomainError("ks_one_sample: empty sample");
    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

ComparisonReport compare_samples(std::span<const double> left, std::span<const double> right,
                                 std::size_t bins) {
    if (bins < 1) throw ParameterError("compare_samples: need at least one bin");
    ComparisonReport report;
    report.ks_statistic = ks_two_sample(left, right);
    report.n_left = left.size();
    report.n_right = right.size();

    const auto [lmin, lmax] = std::minmax_element(left.begin(), left.end());
    const auto [rmin, rmax] = std::minmax_element(right.begin(), right.end());
    const double lo = std::min(*lmin, *rmin);
    double hi = std::max(*lmax, *rmax);
    if (!(hi > lo)) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);

    report.histogram_bins.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        report.histogram_bins[k].edge = lo + width * static_cast<double>(k);
    }
    report.upper_edge = hi;
    auto bin_of = [&](double v) {
        const auto k = static_cast<std::size_t>((v - lo) / width);
        return std::min(k, bins - 1);
    };
    for (const double v : left) ++report.histogram_bins[bin_of(v)].count_left;
    for (const double v : right) ++report.histogram_bins[bin_of(v)].count_right;
    return report;
}

double median(std::span<const double> values) { return empirical_quantile(values, 0.5); }

double sample_mean(std::span<const double> values) {
    if (values.empty()) throw DomainError("sample_mean: empty sample");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) throw DomainError("sample_variance: need at least two values");
    const double mean = sample_mean(values);
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(values.size() - 1);
}

std::vector<RatioSummary> stability_ratio(const std::vector<BanditTrace>& traces,
                                          const BanditConfig& config) {
    const auto sub = config.suboptimal_arms();
    if (sub.empty()) throw DomainError("stability_ratio: configuration has no suboptimal arm");
    if (traces.empty()) throw DomainError("stability_ratio: no traces");
    const auto gaps = config.gaps();
    std::vector<RatioSummary> out;
    for (const std::size_t a : sub) {
        RatioSummary s;
        s.arm = a;
        s.n_star = theoretical_pull_count(config.sampling, gaps[a], config.sigma, config.horizon);
        s.lai_robbins = lai_robbins_benchmark(gaps[a], config.sigma, config.horizon);
        std::vector<double> pulls;
        std::vector<double> ratio;
        std::vector<double> ratio_lr;
        for (const auto& t : traces) {
            const auto n = static_cast<double>(t.pulls[a]);
            pulls.push_back(n);
            ratio.push_back(n / s.n_star);
            ratio_lr.push_back(n / s.lai_robbins);
        }
        const double qs[] = {0.25, 0.5, 0.75};
        const auto q = empirical_quantiles(ratio, qs);
        s.q25 = q[0];
        s.median = q[1];
        s.q75 = q[2];
        s.median_lai_robbins = median(ratio_lr);
        s.median_pulls = median(pulls);
        out.push_back(s);
    }
    return out;
}

std::vector<double> pull_fractions(const std::vector<BanditTrace>& traces, std::size_t arm) {
    std::vector<double> out;
    out.reserve(traces.size());
    for (const auto& t : traces) {
        if (arm >= t.arms()) throw ShapeError("pull_fractions: arm index out of range");
        out.push_back(static_cast<double>(t.pulls[arm]) / static_cast<double>(t.horizon()));
    }
    return out;
}

std::vector<double> normalized_means(const std::vector<BanditTrace>& traces,
                                     const BanditConfig& config, std::size_t arm) {
    if (arm >= config.arms()) throw ShapeError("normalized_means: arm index out of range");
    std::vector<double> out;
    out.reserve(traces.size());
    for (const auto& t : traces) {
        const auto n = static_cast<double>(t.pulls[arm]);
        if (n == 0.0) throw DomainError("normalized_means: arm never pulled in some trace");
        out.push_back(std::sqrt(n) / config.sigma * (t.emp_mean[arm] - config.mu[arm]));
    }
    return out;
}

ComparisonReport optimal_fraction_vs_sde(const std::vector<BanditTrace>& traces,
                                         const BanditConfig& config,
                                         const InvariantSampleSet& sde_set, std::size_t arm,
                                         std::size_t bins) {
    const auto optimal = config.optimal_arms();
    const auto pos = std::find(optimal.begin(), optimal.end(), arm);
    if (pos == optimal.end()) {
        throw DomainError("optimal_fraction_vs_sde: arm " + std::to_string(arm) + " is not optimal");
    }
    if (optimal.size() != sde_set.m) {
        throw ShapeError("optimal_fraction_vs_sde: bandit has |A0| = " +
                         std::to_string(optimal.size()) + " but SDE sample set has m = " +
                         std::to_string(sde_set.m));
    }
    const auto coord = static_cast<std::size_t>(pos - optimal.begin());
    std::vector<double> u;
    u.reserve(sde_set.size());
    for (std::size_t i = 0; i < sde_set.size(); ++i) u.push_back(sde_set.u[i * sde_set.m + coord]);
    if (u.empty()) throw DomainError("optimal_fraction_vs_sde: empty SDE sample set");
    return compare_samples(pull_fractions(traces, arm), u, bins);
}

ComparisonReport normalized_mean_vs_limit(const std::vector<BanditTrace>& traces,
                                          const BanditConfig& config, std::size_t arm,
                                          LimitReference reference,
                                          const InvariantSampleSet* sde_set,
                                          std::size_t gaussian_draws, std::uint64_t seed,
                                          std::size_t bins) {
    const auto values = normalized_means(traces, config, arm);
    if (reference == LimitReference::gaussian) {
        std::vector<double> draws(gaussian_draws);
        Stream rng = substream(seed, 0, 0x6e6f726dULL);
        for (auto& d : draws) d = rng.normal();
        return compare_samples(values, draws, bins);
    }
    if (sde_set == nullptr) throw ParameterError("normalized_mean_vs_limit: SDE sample set required");
    const std::size_t optimal = config.optimal_arms().size();
    if (optimal != sde_set->m) {
        throw ShapeError("normalized_mean_vs_limit: bandit has |A0| = " + std::to_string(optimal) +
                         " but SDE sample set has m = " + std::to_string(sde_set->m));
    }
    const auto streams = normalized_mean_samples(*sde_set);
    if (streams.pooled.empty()) throw DomainError("normalized_mean_vs_limit: empty SDE sample set");
    return compare_samples(values, streams.pooled, bins);
}

}  // namespace tsdyn
