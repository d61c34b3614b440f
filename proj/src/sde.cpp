#include "tsdyn/sde.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "tsdyn/error.hpp"
#include "tsdyn/kernels.hpp"

namespace tsdyn {

namespace {

constexpr double kDivergenceBound = 1e6;

void floor_and_normalize(std::span<const double> raw, double delta, std::vector<double>& p) {
    p.resize(raw.size());
    double total = 0.0;
    for (std::size_t a = 0; a < raw.size(); ++a) {
        p[a] = std::max(raw[a], delta);
        total += p[a];
    }
    for (auto& v : p) v /= total;
}

void check_state(std::span<const double> u, std::span<const double> w, const char* what) {
    if (u.size() != w.size()) {
        throw ShapeError(std::string(what) + ": |u| = " + std::to_string(u.size()) +
                         " but |w| = " + std::to_string(w.size()));
    }
    if (u.empty()) throw ShapeError(std::string(what) + ": empty state");
    double total = 0.0;
    for (const double v : u) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw DomainError(std::string(what) + ": u must lie in the open simplex");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw DomainError(std::string(what) + ": u must sum to 1");
    }
}

void exact_two_arm(std::span<const double> u, std::span<const double> w, std::span<double> p) {
    const double diff = w[0] / u[0] - w[1] / u[1];
    const double spread = std::sqrt(1.0 / u[0] + 1.0 / u[1]);
    p[0] = normal_cdf(diff / spread);
    p[1] = normal_cdf(-diff / spread);
}

}  // namespace

SdeConfig SdeConfig::defaults(std::size_t m) {
    SdeConfig cfg;
    cfg.m = m;
    return cfg;
}

std::vector<double> SdeConfig::initial_u() const {
    if (!u0.empty()) return u0;
    return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

std::vector<double> SdeConfig::initial_w() const {
    if (!w0.empty()) return w0;
    return std::vector<double>(m, 0.0);
}

void SdeConfig::validate() const {
    if (m < 1) throw ParameterError("sde.m: must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("sde.dt: must be positive");
    if (!(total_time >= 0.0) || !std::isfinite(total_time)) {
        throw ParameterError("sde.total_time: must be finite and >= 0");
    }
    if (!(burn_in_time >= 0.0 && burn_in_time <= total_time)) {
        throw ParameterError("sde.burn_in_time: must lie in [0, total_time]");
    }
    if (thinning < 1) throw ParameterError("sde.thinning: must be >= 1");
    if (mc_size < 1) throw ParameterError("sde.mc_size: must be >= 1");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ParameterError("sde.clip_eps: must lie in (0, 1)");
    if (!(clip_delta > 0.0 && clip_delta < 1.0)) {
        throw ParameterError("sde.clip_delta: must lie in (0, 1)");
    }
    if (chains < 1) throw ParameterError("sde.chains: must be >= 1");
    if (!u0.empty()) {
        if (u0.size() != m) throw ParameterError("sde.u0: length must equal m");
        double total = 0.0;
        for (const double v : u0) {
            if (!(v > 0.0)) throw ParameterError("sde.u0: entries must be positive");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ParameterError("sde.u0: must sum to 1");
    }
    if (!w0.empty()) {
        if (w0.size() != m) throw ParameterError("sde.w0: length must equal m");
        for (const double v : w0) {
            if (!std::isfinite(v)) throw ParameterError("sde.w0: entries must be finite");
        }
    }
}

// The relative nudge keeps quotients such as 1e5 / 0.02 from rounding just
// below an integer.
std::uint64_t SdeConfig::steps() const {
    return static_cast<std::uint64_t>(std::floor(total_time / dt * (1.0 + 1e-12)));
}

std::uint64_t SdeConfig::burn_in_steps() const {
    return static_cast<std::uint64_t>(std::floor(burn_in_time / dt * (1.0 + 1e-12)));
}

std::uint64_t SdeConfig::stored_per_chain() const {
    const auto n = steps();
    const auto burn = burn_in_steps();
    if (burn >= n) return 0;
    return (n - burn + thinning - 1) / thinning;
}

bool SdeConfig::uses_closed_form() const {
    return m == 2 && closed_form_two_arm && sampling.kind() == SamplingKind::gaussian;
}

SelectionEstimate estimate_p_from_draws(std::span<const double> u, std::span<const double> w,
                                        std::span<const double> draws,
                                        const SamplingDistribution& dist, double clip_delta,
                                        int threads) {
    check_state(u, w, "estimate_p");
    SelectionEstimate est;
    if (u.size() == 1) {
        est.raw = {1.0};
        est.p = {1.0};
        est.raw_sum = 1.0;
        return est;
    }
    if (draws.empty()) throw ParameterError("estimate_p: at least one draw required");
    kernels::SelectionGeometry geometry;
    geometry.assign(u, w);
    est.raw.assign(u.size(), 0.0);
    std::vector<double> scratch;
    dist.visit([&](const auto& d) {
        kernels::selection_mc_omp(d, geometry, draws, est.raw, scratch, std::max(threads, 1));
    });
    est.raw_sum = std::accumulate(est.raw.begin(), est.raw.end(), 0.0);
    floor_and_normalize(est.raw, clip_delta, est.p);
    return est;
}

SelectionEstimate estimate_p_from_draws_serial(std::span<const double> u,
                                               std::span<const double> w,
                                               std::span<const double> draws,
                                               const SamplingDistribution& dist,
                                               double clip_delta) {
    check_state(u, w, "estimate_p");
    SelectionEstimate est;
    if (u.size() == 1) {
        est.raw = {1.0};
        est.p = {1.0};
        est.raw_sum = 1.0;
        return est;
    }
    if (draws.empty()) throw ParameterError("estimate_p: at least one draw required");
    kernels::SelectionGeometry geometry;
    geometry.assign(u, w);
    est.raw.assign(u.size(), 0.0);
    dist.visit([&](const auto& d) { kernels::selection_mc_serial(d, geometry, draws, est.raw); });
    est.raw_sum = std::accumulate(est.raw.begin(), est.raw.end(), 0.0);
    floor_and_normalize(est.raw, clip_delta, est.p);
    return est;
}

SelectionEstimate estimate_p(std::span<const double> u, std::span<const double> w,
                             std::size_t mc_size, const SamplingDistribution& dist, Stream& rng,
                             double clip_delta, int threads) {
    check_state(u, w, "estimate_p");
    if (u.size() == 1) return estimate_p_from_draws(u, w, {}, dist, clip_delta, threads);
    if (mc_size < 1) throw ParameterError("estimate_p: M must be >= 1");
    std::vector<double> draws(mc_size);
    dist.visit([&](const auto& d) {
        for (auto& z : draws) z = d.sample(rng);
    });
    return estimate_p_from_draws(u, w, draws, dist, clip_delta, threads);
}

std::vector<double> p_exact_gaussian_two_arms(std::span<const double> u,
                                              std::span<const double> w) {
    if (u.size() != 2 || w.size() != 2) {
        throw ShapeError("p_exact_gaussian_two_arms: only m = 2 is supported");
    }
    check_state(u, w, "p_exact_gaussian_two_arms");
    std::vector<double> p(2);
    exact_two_arm(u, w, p);
    return p;
}

void InvariantSampleSet::append(const InvariantSampleSet& other) {
    if (other.m != m) throw ShapeError("InvariantSampleSet::append: arm count mismatch");
    u.insert(u.end(), other.u.begin(), other.u.end());
    w.insert(w.end(), other.w.begin(), other.w.end());
    normalized.insert(normalized.end(), other.normalized.begin(), other.normalized.end());
    chain.insert(chain.end(), other.chain.begin(), other.chain.end());
    step.insert(step.end(), other.step.begin(), other.step.end());
}

SdeRandomness SdeRandomness::from_seed(std::uint64_t seed, std::size_t chain, std::size_t m) {
    SdeRandomness r{substream(seed, chain, 0), {}};
    r.brownian.reserve(m);
    for (std::size_t a = 0; a < m; ++a) r.brownian.push_back(substream(seed, chain, 1 + a));
    return r;
}

namespace {

template <class Dist>
InvariantSampleSet run_chain(const SdeConfig& cfg, const Dist& dist, SdeRandomness& rng,
                             int threads, std::size_t chain_index, const SdeProgress& progress) {
    const std::size_t m = cfg.m;
    const std::uint64_t n_steps = cfg.steps();
    const std::uint64_t burn = cfg.burn_in_steps();
    const double dt = cfg.dt;
    const double sqrt_dt = std::sqrt(dt);
    const double decay = 1.0 - 0.5 * dt;
    const double eps = cfg.clip_eps;
    const bool closed_form = cfg.uses_closed_form();
    const bool monte_carlo = m >= 2 && !closed_form;

    InvariantSampleSet out;
    out.m = m;
    out.provenance = cfg;
    const auto expected = cfg.stored_per_chain();
    out.u.reserve(expected * m);
    out.w.reserve(expected * m);
    out.normalized.reserve(expected * m);
    out.chain.reserve(expected);
    out.step.reserve(expected);

    std::vector<double> u = cfg.initial_u();
    std::vector<double> w = cfg.initial_w();
    std::vector<double> raw(m, 1.0);
    std::vector<double> p(m, 1.0);
    std::vector<double> draws(monte_carlo ? cfg.mc_size : 0);
    std::vector<double> scratch;
    kernels::SelectionGeometry geometry;

    for (std::uint64_t k = 0; k < n_steps; ++k) {
        if (progress && k % progress_interval == 0) progress(chain_index, k, n_steps);

        if (closed_form) {
            exact_two_arm(u, w, raw);
            floor_and_normalize(raw, cfg.clip_delta, p);
        } else if (monte_carlo) {
            for (auto& z : draws) z = dist.sample(rng.z);
            geometry.assign(u, w);
            kernels::selection_mc_omp(dist, geometry, draws, raw, scratch, threads);
            floor_and_normalize(raw, cfg.clip_delta, p);
        }

        if (k >= burn && (k - burn) % cfg.thinning == 0) {
            for (std::size_t a = 0; a < m; ++a) {
                out.u.push_back(u[a]);
                out.w.push_back(w[a]);
                out.normalized.push_back(w[a] / std::sqrt(u[a]));
            }
            out.chain.push_back(chain_index);
            out.step.push_back(k);
        }

        for (std::size_t a = 0; a < m; ++a) {
            const double increment = sqrt_dt * rng.brownian[a].normal();
            u[a] = u[a] + (p[a] - u[a]) * dt;
            w[a] = w[a] * decay + std::sqrt(p[a]) * increment;
            if (!std::isfinite(w[a]) || std::abs(w[a]) > kDivergenceBound || !std::isfinite(u[a])) {
                throw DivergedError("euler_maruyama: state left the stable region", k);
            }
        }

        double total = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            u[a] = std::clamp(u[a], eps, 1.0 - eps);
            total += u[a];
        }
        for (std::size_t a = 0; a < m; ++a) u[a] /= total;
    }
    if (progress) progress(chain_index, n_steps, n_steps);
    return out;
}

}  // namespace

InvariantSampleSet euler_maruyama(const SdeConfig& config, SdeRandomness& rng, int threads,
                                  std::size_t chain_index, const SdeProgress& progress) {
    config.validate();
    if (rng.brownian.size() != config.m) {
        throw ShapeError("euler_maruyama: need one Brownian stream per arm");
    }
    return config.sampling.visit([&](const auto& d) {
        return run_chain(config, d, rng, std::max(threads, 1), chain_index, progress);
    });
}

InvariantSampleSet simulate_invariant(const SdeConfig& config, int threads,
                                      const SdeProgress& progress) {
    config.validate();
    threads = std::max(threads, 1);
    if (config.chains == 1) {
        auto rng = SdeRandomness::from_seed(config.seed, 0, config.m);
        return euler_maruyama(config, rng, threads, 0, progress);
    }

    std::vector<InvariantSampleSet> parts(config.chains);
    std::exception_ptr failure;
    const auto n = static_cast<std::ptrdiff_t>(config.chains);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t c = 0; c < n; ++c) {
        try {
            const auto idx = static_cast<std::size_t>(c);
            auto rng = SdeRandomness::from_seed(config.seed, idx, config.m);
            parts[idx] = euler_maruyama(config, rng, 1, idx, progress);
        } catch (...) {
#pragma omp critical(tsdyn_sde_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    InvariantSampleSet merged;
    merged.m = config.m;
    merged.provenance = config;
    for (const auto& part : parts) merged.append(part);
    return merged;
}

NormalizedStreams normalized_mean_samples(const InvariantSampleSet& set) {
    NormalizedStreams out;
    out.per_arm.resize(set.m);
    if (set.size() == 0) {
        out.warning = "normalized_mean_samples: empty sample set";
        return out;
    }
    for (std::size_t a = 0; a < set.m; ++a) {
        auto& stream = out.per_arm[a];
        stream.reserve(set.size());
        for (std::size_t i = 0; i < set.size(); ++i) stream.push_back(set.normalized[i * set.m + a]);
    }
    out.pooled.reserve(set.size() * set.m);
    for (const auto& stream : out.per_arm) out.pooled.insert(out.pooled.end(), stream.begin(), stream.end());
    return out;
}

}  // namespace tsdyn
