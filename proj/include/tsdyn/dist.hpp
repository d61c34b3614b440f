#pragma once

// Sampling schemes for the Thompson-sampling index perturbation, and the
// reward-noise laws. Every object here is immutable after construction and
// can be shared across threads; randomness always comes from a caller-owned
// Stream.

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsdyn/rng.hpp"

namespace tsdyn {

double normal_cdf(double z);
double normal_survival(double z);
double normal_pdf(double z);
// Lower-tail standard normal quantile for p in (0, 1).
double normal_quantile(double p);

// Generalized inverse inf{z : survival(z) <= u} of a nonincreasing survival
// function. Brackets by doubling out to |z| <= 1e6, then bisects to 1e-10.
double survival_inverse_numeric(const std::function<double(double)>& survival, double u);

namespace dist {

struct Gaussian {
    static constexpr std::string_view name = "gaussian";
    double cdf(double z) const { return normal_cdf(z); }
    double survival(double z) const { return normal_survival(z); }
    double survival_inverse(double u) const;
    double sample(Stream& rng) const { return rng.normal(); }
};

// Density e^{-|z|}/2.
struct Laplace {
    static constexpr std::string_view name = "laplace";
    double cdf(double z) const { return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z); }
    double survival(double z) const {
        return z > 0.0 ? 0.5 * std::exp(-z) : 1.0 - 0.5 * std::exp(z);
    }
    double survival_inverse(double u) const;
    double sample(Stream& rng) const { return survival_inverse(rng.uniform_open()); }
};

// Survival exp(-z^shape)/2 on z >= 0, mirrored on the left.
struct SymmetricWeibull {
    static constexpr std::string_view name = "symmetric_weibull";
    double shape = 2.0;

    double cdf(double z) const {
        return z < 0.0 ? 0.5 * std::exp(-std::pow(-z, shape))
                       : 1.0 - 0.5 * std::exp(-std::pow(z, shape));
    }
    double survival(double z) const {
        return z > 0.0 ? 0.5 * std::exp(-std::pow(z, shape))
                       : 1.0 - 0.5 * std::exp(-std::pow(-z, shape));
    }
    double survival_inverse(double u) const;
    double sample(Stream& rng) const { return survival_inverse(rng.uniform_open()); }
};

// Survival exp(1 - e^z)/2 on z >= 0, mirrored on the left. The tail quantile
// at 1/T grows like log log T.
struct DoubleExpTail {
    static constexpr std::string_view name = "double_exp_tail";
    double cdf(double z) const {
        return z < 0.0 ? 0.5 * std::exp(1.0 - std::exp(-z)) : 1.0 - 0.5 * std::exp(1.0 - std::exp(z));
    }
    double survival(double z) const {
        return z > 0.0 ? 0.5 * std::exp(1.0 - std::exp(z)) : 1.0 - 0.5 * std::exp(1.0 - std::exp(-z));
    }
    double survival_inverse(double u) const;
    double sample(Stream& rng) const { return survival_inverse(rng.uniform_open()); }
};

// User-supplied survival function; inverse and sampler are numeric.
struct Custom {
    std::string label;
    std::shared_ptr<const std::function<double(double)>> survival_fn;

    double cdf(double z) const { return 1.0 - (*survival_fn)(z); }
    double survival(double z) const { return (*survival_fn)(z); }
    double survival_inverse(double u) const { return survival_inverse_numeric(*survival_fn, u); }
    double sample(Stream& rng) const { return survival_inverse(rng.uniform_open()); }
};

}  // namespace dist

enum class SamplingKind { gaussian, laplace, symmetric_weibull, double_exp_tail, custom };

class SamplingDistribution {
public:
    using Model = std::variant<dist::Gaussian, dist::Laplace, dist::SymmetricWeibull,
                               dist::DoubleExpTail, dist::Custom>;

    SamplingDistribution() : model_(dist::Gaussian{}) {}

    static SamplingDistribution gaussian() { return SamplingDistribution(dist::Gaussian{}); }
    static SamplingDistribution laplace() { return SamplingDistribution(dist::Laplace{}); }
    static SamplingDistribution symmetric_weibull(double shape);
    static SamplingDistribution double_exp_tail() { return SamplingDistribution(dist::DoubleExpTail{}); }
    // Rejects survival functions that fail the unbounded-support / bounded
    // density checks on a probe grid.
    static SamplingDistribution from_survival(std::string label, std::function<double(double)> survival);

    SamplingKind kind() const { return static_cast<SamplingKind>(model_.index()); }
    std::string name() const;
    // Shape parameter for symmetric_weibull; 0 otherwise.
    double shape() const;
    bool has_closed_form_inverse() const { return kind() != SamplingKind::custom; }

    double cdf(double z) const {
        return std::visit([z](const auto& d) { return d.cdf(z); }, model_);
    }
    double survival(double z) const {
        return std::visit([z](const auto& d) { return d.survival(z); }, model_);
    }
    // inf{z : survival(z) <= u}, u in (0, 1).
    double survival_inverse(double u) const;
    double sample(Stream& rng) const {
        return std::visit([&rng](const auto& d) { return d.sample(rng); }, model_);
    }

    // Dispatch once, then run a loop against the concrete model.
    template <class F>
    decltype(auto) visit(F&& f) const {
        return std::visit(std::forward<F>(f), model_);
    }

private:
    explicit SamplingDistribution(Model m) : model_(std::move(m)) {}
    Model model_;
};

SamplingDistribution make_distribution(SamplingKind kind, double shape = 2.0);
// Accepts "gaussian", "laplace", "symmetric_weibull", "double_exp_tail".
SamplingDistribution make_distribution(std::string_view name, double shape = 2.0);

namespace noise {

struct Gaussian {
    static constexpr std::string_view name = "gaussian";
    double sample(Stream& rng) const { return rng.normal(); }
};
struct Rademacher {
    static constexpr std::string_view name = "rademacher";
    double sample(Stream& rng) const { return (rng.bits() >> 63) ? 1.0 : -1.0; }
};
// Laplace scaled to unit variance.
struct Laplace {
    static constexpr std::string_view name = "laplace";
    double sample(Stream& rng) const {
        const double u = rng.uniform_open();
        const double b = 0.70710678118654752440;
        return u < 0.5 ? b * std::log(2.0 * u) : -b * std::log(2.0 * (1.0 - u));
    }
};
// Test-only: violates the unit-variance requirement.
struct Zero {
    static constexpr std::string_view name = "zero";
    double sample(Stream&) const { return 0.0; }
};

}  // namespace noise

enum class NoiseKind { gaussian, rademacher, laplace, zero };

class NoiseDistribution {
public:
    using Model = std::variant<noise::Gaussian, noise::Rademacher, noise::Laplace, noise::Zero>;

    NoiseDistribution() : model_(noise::Gaussian{}) {}
    explicit NoiseDistribution(NoiseKind kind);

    NoiseKind kind() const { return static_cast<NoiseKind>(model_.index()); }
    std::string name() const;
    bool test_only() const { return kind() == NoiseKind::zero; }

    double sample(Stream& rng) const {
        return std::visit([&rng](const auto& d) { return d.sample(rng); }, model_);
    }

    template <class F>
    decltype(auto) visit(F&& f) const {
        return std::visit(std::forward<F>(f), model_);
    }

private:
    Model model_;
};

NoiseDistribution make_noise(std::string_view name);

// Grid diagnostics for the tail-decay condition:
//   left      = log z / (-log cdf(-z))
//   right     = log z / (-log survival(z))
//   ratio     = z^2 survival(c z) / survival(z)
// "decreasing" means strictly decreasing over the last five usable points.
struct B2Report {
    std::vector<double> grid;  // points actually evaluated
    std::vector<double> left;
    std::vector<double> right;
    std::vector<double> ratio;
    bool left_decreasing = false;
    bool right_decreasing = false;
    bool ratio_decreasing = false;
    bool truncated = false;
    std::vector<std::string> notes;

    bool all_decreasing() const { return left_decreasing && right_decreasing && ratio_decreasing; }
};

B2Report check_assumption_b2(const SamplingDistribution& dist, std::span<const double> z_grid,
                             double c = 2.0);

}  // namespace tsdyn
