#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tsdyn/bandit.hpp"
#include "tsdyn/sde.hpp"

namespace tsdyn {

// alpha grid of the published quantile table.
inline const std::vector<double> kTableAlphas{0.025, 0.05, 0.10, 0.25, 0.50,
                                              0.75,  0.90, 0.95, 0.975};

// Sorted-sample quantiles with linear interpolation between order statistics
// at (n - 1) * alpha + 1 (1-based). Input order does not matter.
std::vector<double> empirical_quantiles(std::span<const double> samples,
                                        std::span<const double> alphas);
double empirical_quantile(std::span<const double> samples, double alpha);

struct QuantileRow {
    std::vector<double> alphas;  // ascending
    std::vector<double> values;
    std::uint64_t sample_count = 0;  // 0 for the analytic row
    std::string provenance;          // "analytic" or a serialized SDE config

    friend bool operator==(const QuantileRow&, const QuantileRow&) = default;
};

class QuantileTable {
public:
    void set_row(std::size_t k, QuantileRow row);
    bool has_row(std::size_t k) const { return rows_.count(k) != 0; }
    const QuantileRow& row(std::size_t k) const;
    // Throws ValidationError if the row or the alpha entry is missing.
    double quantile(std::size_t k, double alpha) const;
    const std::map<std::size_t, QuantileRow>& rows() const { return rows_; }
    std::size_t k_max() const { return rows_.empty() ? 0 : rows_.rbegin()->first; }

    friend bool operator==(const QuantileTable&, const QuantileTable&) = default;

private:
    std::map<std::size_t, QuantileRow> rows_;
};

// Normal quantiles for the given alphas; the K = 1 row.
QuantileRow analytic_normal_row(std::span<const double> alphas);

// Row K from an explicit invariant sample set (pooled across arms).
QuantileRow quantile_row_from_samples(const InvariantSampleSet& set, std::span<const double> alphas);

// K = 1 analytically, K >= 2 by simulation with `sde_defaults` adapted to
// m = K (uniform start, zero noise) and seed derived per K.
QuantileTable build_quantile_table(std::size_t k_max, std::span<const double> alphas,
                                   const SdeConfig& sde_defaults, int threads = 1,
                                   const SdeProgress& progress = {});

enum class QuantileSource { gaussian, script_n };

struct ConfidenceInterval {
    std::size_t arm = 0;
    double lower = 0.0;
    double upper = 0.0;
    QuantileSource source = QuantileSource::gaussian;
    std::size_t optimal_count = 1;  // |A_0| behind a script_n interval
    double alpha = 0.05;

    bool contains(double x) const { return lower <= x && x <= upper; }
};

enum class ClassificationSource { oracle, plug_in };

struct ArmClassification {
    std::vector<std::size_t> optimal;  // ascending, nonempty
    ClassificationSource source = ClassificationSource::oracle;

    bool is_optimal(std::size_t arm) const;
    std::vector<std::size_t> suboptimal(std::size_t arms) const;
};

ArmClassification classify_oracle(std::span<const double> mu);
// Arm a is declared optimal iff max_b mean_b - mean_a <= c sigma sqrt(2 log T / n_a);
// never-pulled arms are kept as optimal.
ArmClassification classify_plug_in(const BanditTrace& trace, double sigma, double c = 1.0);

// Interval for one arm. `naive` forces normal quantiles regardless of class.
ConfidenceInterval build_arm_ci(const BanditTrace& trace, std::size_t arm,
                                const ArmClassification& classification,
                                const QuantileTable& table, double alpha, double sigma,
                                bool naive = false);
std::vector<ConfidenceInterval> build_ci(const BanditTrace& trace,
                                         const ArmClassification& classification,
                                         const QuantileTable& table, double alpha, double sigma,
                                         bool naive = false);

// Averaged residual variance over suboptimal arms; returns sigma-hat.
double estimate_sigma(const BanditTrace& trace, const ArmClassification& classification);
double estimate_sigma_squared(const BanditTrace& trace, const ArmClassification& classification);

enum class SigmaMode { known, estimated };

struct ArmCoverage {
    std::size_t arm = 0;
    std::string method;  // "script_n" or "gaussian"
    std::size_t covered = 0;
    std::size_t replications = 0;
    double rate() const {
        return replications == 0 ? 0.0
                                 : static_cast<double>(covered) / static_cast<double>(replications);
    }
};

std::vector<ArmCoverage> evaluate_coverage(const std::vector<BanditTrace>& traces,
                                           const BanditConfig& config, double alpha,
                                           const QuantileTable& table, bool naive,
                                           SigmaMode sigma_mode = SigmaMode::known);

std::vector<ArmCoverage> coverage_experiment(const BanditConfig& config, std::size_t replications,
                                             double alpha, const QuantileTable& table, bool naive,
                                             int threads = 1,
                                             SigmaMode sigma_mode = SigmaMode::known);

}  // namespace tsdyn
