#pragma once

// File formats. CSV files carry a header row and use '.' decimals; the first
// line is a '#' comment with the provenance stamp. JSON files carry the same
// stamp under "meta". Doubles are written in shortest round-trip form, so
// every reader here reproduces the written values exactly.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsdyn/bandit.hpp"
#include "tsdyn/dist.hpp"
#include "tsdyn/sde.hpp"

namespace tsdyn {

using json = nlohmann::json;

inline constexpr std::string_view kToolkitVersion = "0.1.0";

struct OutputMeta {
    std::uint64_t master_seed = 0;
    std::string config_hash = "none";
};

std::string format_double(double v);
double parse_double(std::string_view text);

// FNV-1a over the canonical (sorted-key, compact) dump.
std::string config_hash(const json& config);

json meta_to_json(const OutputMeta& meta);
std::string meta_comment(const OutputMeta& meta);

// Strict reader for one JSON object: every key must be consumed before
// finish(), otherwise ValidationError names the first unknown field path.
class ObjectReader {
public:
    ObjectReader(const json& object, std::string path);

    bool has(std::string_view key) const;
    const json& get(std::string_view key);  // required
    std::string child_path(std::string_view key) const;

    double number(std::string_view key);
    double number_or(std::string_view key, double fallback);
    std::uint64_t unsigned_int(std::string_view key);
    std::uint64_t unsigned_or(std::string_view key, std::uint64_t fallback);
    std::int64_t integer_or(std::string_view key, std::int64_t fallback);
    std::string string_or(std::string_view key, std::string fallback);
    bool boolean_or(std::string_view key, bool fallback);
    std::vector<double> numbers_or(std::string_view key, std::vector<double> fallback);

    void finish() const;

private:
    const json& object_;
    std::string path_;
    std::set<std::string, std::less<>> seen_;
};

json distribution_to_json(const SamplingDistribution& dist);
SamplingDistribution distribution_from_json(const json& j, const std::string& path);

json to_json(const SdeConfig& cfg);
SdeConfig sde_config_from_json(const json& j, const std::string& path = "sde");

// Trace export: replication, arm, pulls, emp_mean, noise_sum, residual_ss.
void write_traces_csv(const std::filesystem::path& path, const std::vector<BanditTrace>& traces,
                      const OutputMeta& meta);

struct TraceRow {
    std::size_t replication = 0;
    std::size_t arm = 0;
    std::int64_t pulls = 0;
    double emp_mean = 0.0;
    double noise_sum = 0.0;
    double residual_ss = 0.0;
};
std::vector<TraceRow> read_traces_csv(const std::filesystem::path& path);

// Sample set: CSV (chain, step, u_1..u_m, w_1..w_m) plus JSON sidecar with
// the SDE configuration snapshot.
void write_sample_set(const std::filesystem::path& csv_path,
                      const std::filesystem::path& sidecar_path, const InvariantSampleSet& set,
                      const OutputMeta& meta);
InvariantSampleSet read_sample_set(const std::filesystem::path& csv_path,
                                   const std::filesystem::path& sidecar_path);

void write_column_csv(const std::filesystem::path& path, std::string_view header,
                      const std::vector<double>& values, const OutputMeta& meta);

class QuantileTable;
json quantile_table_to_json(const QuantileTable& table, const OutputMeta& meta);
QuantileTable quantile_table_from_json(const json& j);

struct ArmCoverage;
// Columns: arm, method, coverage, R, covered.
void write_coverage_csv(const std::filesystem::path& path, const std::vector<ArmCoverage>& rows,
                        const OutputMeta& meta);
std::vector<ArmCoverage> read_coverage_csv(const std::filesystem::path& path);

struct ComparisonReport;
json comparison_to_json(const ComparisonReport& report, const OutputMeta& meta);
// Columns: edge, count_left, count_right.
void write_histogram_csv(const std::filesystem::path& path, const ComparisonReport& report,
                         const OutputMeta& meta);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Splits a CSV file into data rows, skipping '#' comment lines; the first
// non-comment row is returned as the header.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace tsdyn
