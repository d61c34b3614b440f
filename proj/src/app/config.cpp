#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>

#include "tsdyn/app.hpp"
#include "tsdyn/error.hpp"

namespace tsdyn::app {

namespace {

constexpr std::uint64_t kBanditSeedTag = 0x62616e64;  // "band"
constexpr std::uint64_t kSdeSeedTag = 0x73646531;     // "sde1"

std::uint64_t parse_seed_text(std::string_view text, const std::string& origin) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ValidationError(origin + ": expected an unsigned 64-bit integer, got '" +
                              std::string(text) + "'");
    }
    return v;
}

template <class F>
auto rethrow_as_validation(F&& f) {
    try {
        return f();
    } catch (const ParameterError& e) {
        throw ValidationError(e.what());
    }
}

// Accepts 2e4 as well as 20000.
std::int64_t integral(ObjectReader& r, std::string_view key, std::int64_t fallback) {
    if (!r.has(key)) return fallback;
    const double v = r.number(key);
    if (!(std::abs(v) < 9e15) || v != std::floor(v)) {
        throw ValidationError(r.child_path(key) + ": expected an integer");
    }
    return static_cast<std::int64_t>(v);
}

BanditSection parse_bandit(const json& j, std::uint64_t master_seed) {
    ObjectReader r(j, "bandit");
    BanditSection s;
    auto& c = s.config;
    if (!r.has("mu")) throw ValidationError("bandit.mu: required field missing");
    c.mu = r.numbers_or("mu", {});
    c.sigma = r.number_or("sigma", 1.0);
    if (!r.has("horizon")) throw ValidationError("bandit.horizon: required field missing");
    c.horizon = integral(r, "horizon", 0);
    const std::int64_t reps = integral(r, "replications", 100);
    if (reps < 1) throw ValidationError("bandit.replications: must be >= 1");
    s.replications = static_cast<std::size_t>(reps);
    if (r.has("sampling")) c.sampling = distribution_from_json(r.get("sampling"), "bandit.sampling");
    if (r.has("noise")) {
        ObjectReader n(r.get("noise"), "bandit.noise");
        const std::string kind = n.string_or("kind", "gaussian");
        n.finish();
        try {
            c.noise = make_noise(kind);
        } catch (const Error& e) {
            throw ValidationError(std::string("bandit.noise.kind: ") + e.what());
        }
    }
    const std::string mode = r.string_or("residual_mode", "after_update");
    if (mode == "after_update") {
        c.residual_mode = ResidualMode::after_update;
    } else if (mode == "before_update") {
        c.residual_mode = ResidualMode::before_update;
    } else {
        throw ValidationError("bandit.residual_mode: expected 'after_update' or 'before_update'");
    }
    if (r.has("checkpoints")) {
        const auto& cp = r.get("checkpoints");
        if (cp.is_string() && cp.get<std::string>() == "geometric") {
            if (c.horizon >= 1) c.checkpoint_times = geometric_checkpoints(c.horizon);
        } else if (cp.is_string() && cp.get<std::string>() == "none") {
            c.checkpoint_times.clear();
        } else if (cp.is_array()) {
            for (std::size_t i = 0; i < cp.size(); ++i) {
                if (!cp[i].is_number_integer()) {
                    throw ValidationError("bandit.checkpoints[" + std::to_string(i) +
                                          "]: expected an integer");
                }
                c.checkpoint_times.push_back(cp[i].get<std::int64_t>());
            }
        } else {
            throw ValidationError("bandit.checkpoints: expected 'none', 'geometric' or an array");
        }
    }
    if (r.has("seed")) throw ValidationError("bandit.seed: seeds derive from master_seed");
    r.finish();
    c.seed = derive_seed(master_seed, kBanditSeedTag);
    rethrow_as_validation([&] {
        c.validate();
        return 0;
    });
    return s;
}

InferenceSection parse_inference(const json& j) {
    ObjectReader r(j, "inference");
    InferenceSection s;
    s.alphas = r.numbers_or("alphas", s.alphas);
    if (s.alphas.empty()) throw ValidationError("inference.alphas: must not be empty");
    for (std::size_t i = 0; i < s.alphas.size(); ++i) {
        if (!(s.alphas[i] > 0.0 && s.alphas[i] < 1.0)) {
            throw ValidationError("inference.alphas[" + std::to_string(i) + "]: must lie in (0, 1)");
        }
        if (i > 0 && !(s.alphas[i] > s.alphas[i - 1])) {
            throw ValidationError("inference.alphas: must be strictly increasing");
        }
    }
    const std::int64_t k_max = r.integer_or("k_max", 6);
    if (k_max < 1) throw ValidationError("inference.k_max: must be >= 1");
    s.k_max = static_cast<std::size_t>(k_max);
    s.alpha = r.number_or("alpha", s.alpha);
    if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw ValidationError("inference.alpha: must lie in (0, 1)");
    s.naive = r.boolean_or("naive", false);
    const std::string sigma = r.string_or("sigma_mode", "known");
    if (sigma == "known") {
        s.sigma_mode = SigmaMode::known;
    } else if (sigma == "estimated") {
        s.sigma_mode = SigmaMode::estimated;
    } else {
        throw ValidationError("inference.sigma_mode: expected 'known' or 'estimated'");
    }
    s.quantile_table = r.string_or("quantile_table", "");
    r.finish();
    return s;
}

CompareSection parse_compare(const json& j) {
    ObjectReader r(j, "compare");
    CompareSection s;
    const std::int64_t arm = r.integer_or("arm", 0);
    if (arm < 0) throw ValidationError("compare.arm: must be >= 0");
    s.arm = static_cast<std::size_t>(arm);
    const std::string mode = r.string_or("mode", "fig1");
    if (mode == "fig1") {
        s.mode = CompareMode::fig1;
    } else if (mode == "fig2") {
        s.mode = CompareMode::fig2;
    } else if (mode == "self") {
        s.mode = CompareMode::self;
    } else {
        throw ValidationError("compare.mode: expected 'fig1', 'fig2' or 'self'");
    }
    const std::int64_t bins = r.integer_or("bins", 40);
    if (bins < 1) throw ValidationError("compare.bins: must be >= 1");
    s.bins = static_cast<std::size_t>(bins);
    const std::int64_t draws = r.integer_or("gaussian_draws", 200000);
    if (draws < 1) throw ValidationError("compare.gaussian_draws: must be >= 1");
    s.gaussian_draws = static_cast<std::size_t>(draws);
    s.sde_samples = r.string_or("sde_samples", "");
    r.finish();
    return s;
}

StabilitySection parse_stability(const json& j) {
    ObjectReader r(j, "stability");
    StabilitySection s;
    if (r.has("horizons")) {
        const auto& h = r.get("horizons");
        if (!h.is_array()) throw ValidationError("stability.horizons: expected an array");
        for (std::size_t i = 0; i < h.size(); ++i) {
            const std::string path = "stability.horizons[" + std::to_string(i) + "]";
            if (!h[i].is_number()) throw ValidationError(path + ": expected a number");
            const double v = h[i].get<double>();
            if (!(v >= 2.0) || v != static_cast<double>(static_cast<std::int64_t>(v))) {
                throw ValidationError(path + ": must be an integer >= 2");
            }
            s.horizons.push_back(static_cast<std::int64_t>(v));
        }
    }
    r.finish();
    return s;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& document, const Overrides& overrides) {
    ObjectReader r(document, "");
    ExperimentConfig cfg;
    cfg.master_seed = r.unsigned_or("master_seed", 0);
    if (const char* env = std::getenv(kSeedEnvVar); env != nullptr && *env != '\0') {
        cfg.master_seed = parse_seed_text(env, kSeedEnvVar);
    }
    if (overrides.seed) cfg.master_seed = *overrides.seed;
    cfg.output_dir = r.string_or("output_dir", ".");
    if (overrides.out) cfg.output_dir = *overrides.out;

    if (r.has("bandit")) cfg.bandit = parse_bandit(r.get("bandit"), cfg.master_seed);
    if (r.has("sde")) {
        const auto& j = r.get("sde");
        if (j.is_object() && j.contains("seed")) {
            throw ValidationError("sde.seed: seeds derive from master_seed");
        }
        cfg.sde = sde_config_from_json(j, "sde");
        cfg.sde_m_given = j.contains("m");
    }
    if (r.has("inference")) cfg.inference = parse_inference(r.get("inference"));
    if (overrides.naive) cfg.inference.naive = true;
    if (r.has("compare")) cfg.compare = parse_compare(r.get("compare"));
    if (r.has("stability")) cfg.stability = parse_stability(r.get("stability"));
    r.finish();

    const std::uint64_t sde_seed = derive_seed(cfg.master_seed, kSdeSeedTag);
    if (cfg.sde) cfg.sde->seed = sde_seed;

    if (cfg.bandit) {
        const auto optimal = cfg.bandit->config.optimal_arms();
        const std::size_t k0 = optimal.size();
        if (cfg.sde && cfg.sde_m_given && cfg.sde->m != k0 && r.has("compare")) {
            throw ValidationError("sde.m = " + std::to_string(cfg.sde->m) +
                                  " does not match bandit |A0| = " + std::to_string(k0));
        }
        if (r.has("compare")) {
            if (cfg.compare.arm >= cfg.bandit->config.arms()) {
                throw ValidationError("compare.arm: index " + std::to_string(cfg.compare.arm) +
                                      " out of range for " +
                                      std::to_string(cfg.bandit->config.arms()) + " arms");
            }
            const bool is_optimal =
                std::find(optimal.begin(), optimal.end(), cfg.compare.arm) != optimal.end();
            if (cfg.compare.mode != CompareMode::self && !is_optimal) {
                throw ValidationError("compare.arm: arm " + std::to_string(cfg.compare.arm) +
                                      " is not an optimal arm");
            }
        }
    }

    cfg.canonical = document;
    cfg.canonical.erase("output_dir");
    cfg.canonical["master_seed"] = cfg.master_seed;
    if (overrides.naive) cfg.canonical["inference"]["naive"] = true;
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const Overrides& overrides) {
    json document;
    try {
        document = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ValidationError("config '" + path.string() + "': malformed JSON: " + e.what());
    }
    return parse_experiment_config(document, overrides);
}

}  // namespace tsdyn::app
