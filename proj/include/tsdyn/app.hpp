#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsdyn/bandit.hpp"
#include "tsdyn/inference.hpp"
#include "tsdyn/io.hpp"
#include "tsdyn/sde.hpp"

namespace tsdyn::app {

inline constexpr const char* kSeedEnvVar = "TSDYN_MASTER_SEED";

struct BanditSection {
    BanditConfig config;
    std::size_t replications = 100;
};

struct InferenceSection {
    std::vector<double> alphas{kTableAlphas.begin(), kTableAlphas.end()};
    std::size_t k_max = 6;
    double alpha = 0.05;
    bool naive = false;
    SigmaMode sigma_mode = SigmaMode::known;
    std::string quantile_table;  // optional path to a table written by `quantiles`
};

enum class CompareMode { fig1, fig2, self };

struct CompareSection {
    std::size_t arm = 0;
    CompareMode mode = CompareMode::fig1;
    std::size_t bins = 40;
    std::size_t gaussian_draws = 200000;
    std::string sde_samples;  // optional CSV written by `sde-sample`; sidecar alongside
};

struct StabilitySection {
    std::vector<std::int64_t> horizons;  // empty: bandit.horizon only
};

struct ExperimentConfig {
    std::uint64_t master_seed = 0;
    std::filesystem::path output_dir = ".";
    std::optional<BanditSection> bandit;
    std::optional<SdeConfig> sde;
    bool sde_m_given = false;
    InferenceSection inference;
    CompareSection compare;
    StabilitySection stability;
    // Normalized input minus output_dir, with the effective seed and flags.
    json canonical;

    OutputMeta meta() const { return {master_seed, config_hash(canonical)}; }
};

struct Overrides {
    std::optional<std::uint64_t> seed;  // --seed wins over the environment
    std::optional<std::filesystem::path> out;
    bool naive = false;
};

// Strictly parses the whole document; section seeds derive from master_seed.
ExperimentConfig parse_experiment_config(const json& document, const Overrides& overrides);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const Overrides& overrides);

// Each command writes its files under config.output_dir, its summary to
// `out` and progress lines to `err`.
int cmd_sde_sample(const ExperimentConfig& config, int threads, std::ostream& out,
                   std::ostream& err);
int cmd_quantiles(const ExperimentConfig& config, int threads, std::ostream& out,
                  std::ostream& err);
int cmd_bandit_run(const ExperimentConfig& config, int threads, std::ostream& out,
                   std::ostream& err);
int cmd_coverage(const ExperimentConfig& config, int threads, std::ostream& out,
                 std::ostream& err);
int cmd_compare(const ExperimentConfig& config, int threads, std::ostream& out,
                std::ostream& err);
int cmd_stability(const ExperimentConfig& config, int threads, std::ostream& out,
                  std::ostream& err);

std::vector<std::string_view> command_names();
int run_command(std::string_view name, const ExperimentConfig& config, int threads,
                std::ostream& out, std::ostream& err);

// 0 ok, 2 validation, 3 divergence, 4 I/O, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace tsdyn::app
