#include "tsdyn/inference.hpp"

#include <algorithm>
#include <cmath>

#include "tsdyn/error.hpp"
#include "tsdyn/io.hpp"

namespace tsdyn {

namespace {

void require_alpha(double alpha, const char* what) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError(std::string(what) + ": alpha must lie in (0, 1), got " +
                          std::to_string(alpha));
    }
}

double interpolate_sorted(std::span<const double> sorted, double alpha) {
    const double pos = static_cast<double>(sorted.size() - 1) * alpha;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

bool same_alpha(double a, double b) { return std::abs(a - b) <= 1e-12; }

}  // namespace

std::vector<double> empirical_quantiles(std::span<const double> samples,
                                        std::span<const double> alphas) {
    if (samples.empty()) throw DomainError("empirical_quantiles: empty sample");
    for (const double a : alphas) require_alpha(a, "empirical_quantiles");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    out.reserve(alphas.size());
    for (const double a : alphas) out.push_back(interpolate_sorted(sorted, a));
    return out;
}

double empirical_quantile(std::span<const double> samples, double alpha) {
    const double a[] = {alpha};
    return empirical_quantiles(samples, a).front();
}

void QuantileTable::set_row(std::size_t k, QuantileRow row) {
    if (k < 1) throw ParameterError("QuantileTable: K must be >= 1");
    if (row.alphas.size() != row.values.size()) {
        throw ShapeError("QuantileTable: alphas and values differ in length");
    }
    for (std::size_t i = 1; i < row.alphas.size(); ++i) {
        if (!(row.alphas[i] > row.alphas[i - 1])) {
            throw ParameterError("QuantileTable: alphas must be strictly increasing");
        }
        if (row.values[i] < row.values[i - 1]) {
            throw ParameterError("QuantileTable: quantiles must be nondecreasing in alpha");
        }
    }
    rows_[k] = std::move(row);
}

const QuantileRow& QuantileTable::row(std::size_t k) const {
    const auto it = rows_.find(k);
    if (it == rows_.end()) {
        throw ValidationError("quantile table has no row for K = " + std::to_string(k));
    }
    return it->second;
}

double QuantileTable::quantile(std::size_t k, double alpha) const {
    const auto& r = row(k);
    for (std::size_t i = 0; i < r.alphas.size(); ++i) {
        if (same_alpha(r.alphas[i], alpha)) return r.values[i];
    }
    throw ValidationError("quantile table row K = " + std::to_string(k) + " has no alpha = " +
                          std::to_string(alpha));
}

QuantileRow analytic_normal_row(std::span<const double> alphas) {
    QuantileRow row;
    row.alphas.assign(alphas.begin(), alphas.end());
    std::sort(row.alphas.begin(), row.alphas.end());
    for (const double a : row.alphas) {
        require_alpha(a, "analytic_normal_row");
        row.values.push_back(normal_quantile(a));
    }
    row.provenance = "analytic";
    return row;
}

QuantileRow quantile_row_from_samples(const InvariantSampleSet& set,
                                      std::span<const double> alphas) {
    const auto streams = normalized_mean_samples(set);
    if (streams.pooled.empty()) {
        throw DomainError("quantile_row_from_samples: empty invariant sample set");
    }
    QuantileRow row;
    row.alphas.assign(alphas.begin(), alphas.end());
    std::sort(row.alphas.begin(), row.alphas.end());
    row.values = empirical_quantiles(streams.pooled, row.alphas);
    row.sample_count = streams.pooled.size();
    row.provenance = to_json(set.provenance).dump();
    return row;
}

QuantileTable build_quantile_table(std::size_t k_max, std::span<const double> alphas,
                                   const SdeConfig& sde_defaults, int threads,
                                   const SdeProgress& progress) {
    if (k_max < 1) throw ParameterError("build_quantile_table: K_max must be >= 1");
    QuantileTable table;
    table.set_row(1, analytic_normal_row(alphas));
    for (std::size_t k = 2; k <= k_max; ++k) {
        SdeConfig cfg = sde_defaults;
        cfg.m = k;
        cfg.u0.clear();
        cfg.w0.clear();
        cfg.seed = derive_seed(sde_defaults.seed, k);
        table.set_row(k, quantile_row_from_samples(simulate_invariant(cfg, threads, progress), alphas));
    }
    return table;
}

bool ArmClassification::is_optimal(std::size_t arm) const {
    return std::binary_search(optimal.begin(), optimal.end(), arm);
}

std::vector<std::size_t> ArmClassification::suboptimal(std::size_t arms) const {
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < arms; ++a) {
        if (!is_optimal(a)) out.push_back(a);
    }
    return out;
}

ArmClassification classify_oracle(std::span<const double> mu) {
    if (mu.empty()) throw ParameterError("classify_oracle: no arms");
    const double best = *std::max_element(mu.begin(), mu.end());
    ArmClassification out;
    out.source = ClassificationSource::oracle;
    for (std::size_t a = 0; a < mu.size(); ++a) {
        if (mu[a] == best) out.optimal.push_back(a);
    }
    return out;
}

ArmClassification classify_plug_in(const BanditTrace& trace, double sigma, double c) {
    const std::size_t k = trace.arms();
    if (k == 0) throw ParameterError("classify_plug_in: no arms");
    const double horizon = static_cast<double>(std::max<std::int64_t>(trace.horizon(), 2));
    double best = -INFINITY;
    for (std::size_t a = 0; a < k; ++a) {
        if (trace.pulls[a] > 0) best = std::max(best, trace.emp_mean[a]);
    }
    ArmClassification out;
    out.source = ClassificationSource::plug_in;
    for (std::size_t a = 0; a < k; ++a) {
        if (trace.pulls[a] == 0) {
            out.optimal.push_back(a);
            continue;
        }
        const double width =
            c * sigma * std::sqrt(2.0 * std::log(horizon) / static_cast<double>(trace.pulls[a]));
        if (best - trace.emp_mean[a] <= width) out.optimal.push_back(a);
    }
    return out;
}

ConfidenceInterval build_arm_ci(const BanditTrace& trace, std::size_t arm,
                                const ArmClassification& classification,
                                const QuantileTable& table, double alpha, double sigma,
                                bool naive) {
    require_alpha(alpha, "build_ci");
    if (!(sigma > 0.0)) throw DomainError("build_ci: sigma must be positive");
    if (arm >= trace.arms()) throw ShapeError("build_ci: arm index out of range");
    if (trace.pulls[arm] == 0) throw UndefinedIntervalError(arm);

    ConfidenceInterval ci;
    ci.arm = arm;
    ci.alpha = alpha;
    double z_lo;
    double z_hi;
    if (!naive && classification.is_optimal(arm)) {
        const std::size_t k = classification.optimal.size();
        ci.source = QuantileSource::script_n;
        ci.optimal_count = k;
        z_lo = table.quantile(k, alpha / 2.0);
        z_hi = table.quantile(k, 1.0 - alpha / 2.0);
    } else {
        ci.source = QuantileSource::gaussian;
        ci.optimal_count = 1;
        z_lo = normal_quantile(alpha / 2.0);
        z_hi = normal_quantile(1.0 - alpha / 2.0);
    }
    const double se = sigma / std::sqrt(static_cast<double>(trace.pulls[arm]));
    // The quantiles describe sqrt(n)(mean - mu)/sigma; inverting swaps them.
    ci.lower = trace.emp_mean[arm] - z_hi * se;
    ci.upper = trace.emp_mean[arm] - z_lo * se;
    return ci;
}

std::vector<ConfidenceInterval> build_ci(const BanditTrace& trace,
                                         const ArmClassification& classification,
                                         const QuantileTable& table, double alpha, double sigma,
                                         bool naive) {
    std::vector<ConfidenceInterval> out;
    out.reserve(trace.arms());
    for (std::size_t a = 0; a < trace.arms(); ++a) {
        out.push_back(build_arm_ci(trace, a, classification, table, alpha, sigma, naive));
    }
    return out;
}

double estimate_sigma_squared(const BanditTrace& trace, const ArmClassification& classification) {
    const auto sub = classification.suboptimal(trace.arms());
    if (sub.empty()) {
        throw UndefinedError("estimate_sigma: no suboptimal arms, estimator undefined");
    }
    double total = 0.0;
    for (const std::size_t a : sub) {
        if (trace.pulls[a] < 2) {
            throw UndefinedError("estimate_sigma: suboptimal arm " + std::to_string(a) +
                                 " pulled fewer than 2 times");
        }
        total += trace.running_residual_ss[a] / static_cast<double>(trace.pulls[a]);
    }
    return total / static_cast<double>(sub.size());
}

double estimate_sigma(const BanditTrace& trace, const ArmClassification& classification) {
    return std::sqrt(estimate_sigma_squared(trace, classification));
}

std::vector<ArmCoverage> evaluate_coverage(const std::vector<BanditTrace>& traces,
                                           const BanditConfig& config, double alpha,
                                           const QuantileTable& table, bool naive,
                                           SigmaMode sigma_mode) {
    require_alpha(alpha, "coverage_experiment");
    const auto classification = classify_oracle(config.mu);
    if (!naive && classification.optimal.size() >= 2) {
        table.quantile(classification.optimal.size(), alpha / 2.0);
        table.quantile(classification.optimal.size(), 1.0 - alpha / 2.0);
    }
    std::vector<ArmCoverage> out(config.arms());
    for (std::size_t a = 0; a < out.size(); ++a) {
        out[a].arm = a;
        out[a].method = naive ? "gaussian" : "script_n";
        out[a].replications = traces.size();
    }
    for (const auto& trace : traces) {
        const double sigma = sigma_mode == SigmaMode::known ? config.sigma
                                                            : estimate_sigma(trace, classification);
        for (std::size_t a = 0; a < out.size(); ++a) {
            if (trace.pulls[a] == 0) continue;
            const auto ci = build_arm_ci(trace, a, classification, table, alpha, sigma, naive);
            if (ci.contains(config.mu[a])) ++out[a].covered;
        }
    }
    return out;
}

std::vector<ArmCoverage> coverage_experiment(const BanditConfig& config, std::size_t replications,
                                             double alpha, const QuantileTable& table, bool naive,
                                             int threads, SigmaMode sigma_mode) {
    if (replications < 1) throw ParameterError("coverage_experiment: R must be >= 1");
    const auto traces = replicate(config, replications, threads);
    return evaluate_coverage(traces, config, alpha, table, naive, sigma_mode);
}

}  // namespace tsdyn
