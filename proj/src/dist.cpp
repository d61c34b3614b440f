#include "tsdyn/dist.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include "tsdyn/error.hpp"

namespace tsdyn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Nudge x upward until survival(x) <= u so the closed forms honor the
// infimum definition exactly in floating point.
template <class D>
double enforce_infimum(const D& d, double x, double u) {
    for (int i = 0; i < 64 && d.survival(x) > u; ++i) {
        x = std::nextafter(x, std::numeric_limits<double>::infinity());
    }
    return x;
}

void require_open_unit(double u, const char* what) {
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError(std::string(what) + ": argument must lie in (0, 1), got " +
                          std::to_string(u));
    }
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double normal_survival(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// Acklam's rational approximation (relative error ~1e-9) followed by a
// Newton step against the exact CDF. The step uses whichever tail keeps the
// residual well conditioned.
double normal_quantile(double p) {
    require_open_unit(p, "normal_quantile");

    static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                             -2.759285104469687e+02, 1.383577518672690e+02,
                                             -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                             -1.556989798598866e+02, 6.680131188771972e+01,
                                             -1.328068155288572e+01};
    static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                             -2.400758277161838e+00, -2.549732539343734e+00,
                                             4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                             2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    auto tail = [&](double q) {
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    };

    double x;
    if (p < p_low) {
        x = tail(std::sqrt(-2.0 * std::log(p)));
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        x = -tail(std::sqrt(-2.0 * std::log1p(-p)));
    }

    const double density = normal_pdf(x);
    if (density > 0.0) {
        const double residual = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_survival(x);
        x -= residual / density;
    }
    return x;
}

double survival_inverse_numeric(const std::function<double(double)>& survival, double u) {
    require_open_unit(u, "survival_inverse_numeric");
    constexpr double limit = 1e6;
    constexpr double tol = 1e-10;

    // Invariant: survival(lo) > u >= survival(hi).
    double lo;
    double hi;
    if (survival(0.0) > u) {
        lo = 0.0;
        hi = 1.0;
        while (survival(hi) > u) {
            if (hi >= limit) {
                throw ConvergenceError("survival_inverse_numeric: no bracket within |z| <= 1e6");
            }
            lo = hi;
            hi = std::min(2.0 * hi, limit);
        }
    } else {
        hi = 0.0;
        lo = -1.0;
        while (survival(lo) <= u) {
            if (lo <= -limit) {
                throw ConvergenceError("survival_inverse_numeric: no bracket within |z| <= 1e6");
            }
            hi = lo;
            lo = std::max(2.0 * lo, -limit);
        }
    }

    while (hi - lo > tol) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        if (survival(mid) > u) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return hi;
}

namespace dist {

double Gaussian::survival_inverse(double u) const {
    require_open_unit(u, "gaussian survival_inverse");
    return enforce_infimum(*this, -normal_quantile(u), u);
}

double Laplace::survival_inverse(double u) const {
    require_open_unit(u, "laplace survival_inverse");
    const double x = u <= 0.5 ? -std::log(2.0 * u) : std::log(2.0 * (1.0 - u));
    return enforce_infimum(*this, x, u);
}

double SymmetricWeibull::survival_inverse(double u) const {
    require_open_unit(u, "symmetric_weibull survival_inverse");
    const double x = u <= 0.5 ? std::pow(-std::log(2.0 * u), 1.0 / shape)
                              : -std::pow(-std::log(2.0 * (1.0 - u)), 1.0 / shape);
    return enforce_infimum(*this, x, u);
}

double DoubleExpTail::survival_inverse(double u) const {
    require_open_unit(u, "double_exp_tail survival_inverse");
    const double x = u <= 0.5 ? std::log(1.0 - std::log(2.0 * u))
                              : -std::log(1.0 - std::log(2.0 * (1.0 - u)));
    return enforce_infimum(*this, x, u);
}

}  // namespace dist

SamplingDistribution SamplingDistribution::symmetric_weibull(double shape) {
    // shape < 1 has an unbounded density at the origin.
    if (!std::isfinite(shape) || shape < 1.0) {
        throw ParameterError("symmetric_weibull: shape must be finite and >= 1, got " +
                             std::to_string(shape));
    }
    return SamplingDistribution(dist::SymmetricWeibull{shape});
}

SamplingDistribution SamplingDistribution::from_survival(std::string label,
                                                         std::function<double(double)> survival) {
    if (!survival) throw ParameterError("from_survival: empty survival function");
    auto reject = [&label](const std::string& why) {
        throw ParameterError("sampling distribution '" + label + "' rejected: " + why);
    };

    for (int i = -300; i <= 300; ++i) {
        const double z = 0.01 * i;
        const double s = survival(z);
        if (!(s > 0.0 && s < 1.0)) {
            reject("cdf leaves (0, 1) at z = " + std::to_string(z));
        }
    }
    constexpr double step = 0.01;
    double prev = survival(-8.0);
    for (int i = 1; i <= 1600; ++i) {
        const double z = -8.0 + step * i;
        const double s = survival(z);
        if (s > prev) reject("survival increases near z = " + std::to_string(z));
        if (prev - s > 0.05) reject("jump or unbounded density near z = " + std::to_string(z));
        prev = s;
    }
    if (survival(40.0) > 1e-6 || survival(-40.0) < 1.0 - 1e-6) {
        reject("tails do not vanish");
    }
    return SamplingDistribution(dist::Custom{
        std::move(label),
        std::make_shared<const std::function<double(double)>>(std::move(survival))});
}

std::string SamplingDistribution::name() const {
    return std::visit(
        [](const auto& d) -> std::string {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, dist::Custom>) {
                return d.label;
            } else {
                return std::string(T::name);
            }
        },
        model_);
}

double SamplingDistribution::shape() const {
    if (const auto* w = std::get_if<dist::SymmetricWeibull>(&model_)) return w->shape;
    return 0.0;
}

double SamplingDistribution::survival_inverse(double u) const {
    return std::visit([u](const auto& d) { return d.survival_inverse(u); }, model_);
}

SamplingDistribution make_distribution(SamplingKind kind, double shape) {
    switch (kind) {
        case SamplingKind::gaussian: return SamplingDistribution::gaussian();
        case SamplingKind::laplace: return SamplingDistribution::laplace();
        case SamplingKind::symmetric_weibull: return SamplingDistribution::symmetric_weibull(shape);
        case SamplingKind::double_exp_tail: return SamplingDistribution::double_exp_tail();
        case SamplingKind::custom: break;
    }
    throw ParameterError("make_distribution: custom distributions are built with from_survival");
}

SamplingDistribution make_distribution(std::string_view name, double shape) {
    if (name == "gaussian") return make_distribution(SamplingKind::gaussian);
    if (name == "laplace") return make_distribution(SamplingKind::laplace);
    if (name == "symmetric_weibull") return make_distribution(SamplingKind::symmetric_weibull, shape);
    if (name == "double_exp_tail") return make_distribution(SamplingKind::double_exp_tail);
    throw ParameterError("unknown sampling distribution '" + std::string(name) + "'");
}

NoiseDistribution::NoiseDistribution(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::gaussian: model_ = noise::Gaussian{}; break;
        case NoiseKind::rademacher: model_ = noise::Rademacher{}; break;
        case NoiseKind::laplace: model_ = noise::Laplace{}; break;
        case NoiseKind::zero: model_ = noise::Zero{}; break;
    }
}

std::string NoiseDistribution::name() const {
    return std::visit([](const auto& d) { return std::string(std::decay_t<decltype(d)>::name); },
                      model_);
}

NoiseDistribution make_noise(std::string_view name) {
    if (name == "gaussian") return NoiseDistribution(NoiseKind::gaussian);
    if (name == "rademacher") return NoiseDistribution(NoiseKind::rademacher);
    if (name == "laplace") return NoiseDistribution(NoiseKind::laplace);
    if (name == "zero") return NoiseDistribution(NoiseKind::zero);
    throw ParameterError("unknown noise distribution '" + std::string(name) + "'");
}

namespace {

bool strictly_decreasing_tail(std::span<const double> values, std::span<const double> grid) {
    std::vector<double> usable;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (grid[i] > 1.0) usable.push_back(values[i]);
    }
    if (usable.size() < 2) return false;
    const std::size_t start = usable.size() > 5 ? usable.size() - 5 : 0;
    for (std::size_t i = start + 1; i < usable.size(); ++i) {
        if (!(usable[i] < usable[i - 1])) return false;
    }
    return usable.back() >= 0.0;
}

}  // namespace

B2Report check_assumption_b2(const SamplingDistribution& dist, std::span<const double> z_grid,
                             double c) {
    if (!(c > 1.0)) throw ParameterError("check_assumption_b2: c must exceed 1");
    for (std::size_t i = 0; i < z_grid.size(); ++i) {
        if (!(z_grid[i] > 0.0) || (i > 0 && !(z_grid[i] > z_grid[i - 1]))) {
            throw ParameterError("check_assumption_b2: grid must be positive and increasing");
        }
    }

    constexpr double floor = 1e-300;
    B2Report report;
    for (const double z : z_grid) {
        const double left_tail = dist.cdf(-z);
        const double right_tail = dist.survival(z);
        const double far_tail = dist.survival(c * z);
        if (left_tail < floor || right_tail < floor || far_tail < floor) {
            report.truncated = true;
            report.notes.push_back("grid truncated at z = " + std::to_string(z) +
                                   ": survival below 1e-300");
            break;
        }
        const double logz = std::log(z);
        report.grid.push_back(z);
        report.left.push_back(logz / -std::log(left_tail));
        report.right.push_back(logz / -std::log(right_tail));
        report.ratio.push_back(z * z * far_tail / right_tail);
    }
    if (std::any_of(report.grid.begin(), report.grid.end(), [](double z) { return z <= 1.0; })) {
        report.notes.push_back("points with z <= 1 excluded from trend (log z <= 0)");
    }
    report.left_decreasing = strictly_decreasing_tail(report.left, report.grid);
    report.right_decreasing = strictly_decreasing_tail(report.right, report.grid);
    report.ratio_decreasing = strictly_decreasing_tail(report.ratio, report.grid);
    return report;
}

}  // namespace tsdyn
