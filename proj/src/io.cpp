#include "tsdyn/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "tsdyn/error.hpp"
#include "tsdyn/inference.hpp"
#include "tsdyn/stats.hpp"

namespace tsdyn {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw IoError("malformed number '" + std::string(text) + "'");
    }
    return v;
}

namespace {

std::int64_t parse_int(std::string_view text) {
    std::int64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw IoError("malformed integer '" + std::string(text) + "'");
    }
    return v;
}

std::string type_error(const std::string& path, const char* expected) {
    return path + ": expected " + expected;
}

}  // namespace

std::string config_hash(const json& config) {
    const std::string canonical = config.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json meta_to_json(const OutputMeta& meta) {
    return json{{"toolkit", "tsdyn"},
                {"version", std::string(kToolkitVersion)},
                {"master_seed", meta.master_seed},
                {"config_hash", meta.config_hash}};
}

std::string meta_comment(const OutputMeta& meta) {
    return "# tsdyn " + std::string(kToolkitVersion) +
           " master_seed=" + std::to_string(meta.master_seed) + " config_hash=" + meta.config_hash;
}

ObjectReader::ObjectReader(const json& object, std::string path)
    : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ValidationError(type_error(path_, "an object"));
}

std::string ObjectReader::child_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

bool ObjectReader::has(std::string_view key) const { return object_.contains(key); }

const json& ObjectReader::get(std::string_view key) {
    const auto it = object_.find(key);
    if (it == object_.end()) throw ValidationError(child_path(key) + ": required field missing");
    seen_.emplace(key);
    return *it;
}

double ObjectReader::number(std::string_view key) {
    const auto& v = get(key);
    if (!v.is_number()) throw ValidationError(type_error(child_path(key), "a number"));
    return v.get<double>();
}

double ObjectReader::number_or(std::string_view key, double fallback) {
    return has(key) ? number(key) : fallback;
}

std::uint64_t ObjectReader::unsigned_int(std::string_view key) {
    const auto& v = get(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ValidationError(type_error(child_path(key), "a non-negative integer"));
}

std::uint64_t ObjectReader::unsigned_or(std::string_view key, std::uint64_t fallback) {
    return has(key) ? unsigned_int(key) : fallback;
}

std::int64_t ObjectReader::integer_or(std::string_view key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = get(key);
    if (!v.is_number_integer()) throw ValidationError(type_error(child_path(key), "an integer"));
    return v.get<std::int64_t>();
}

std::string ObjectReader::string_or(std::string_view key, std::string fallback) {
    if (!has(key)) return fallback;
    const auto& v = get(key);
    if (!v.is_string()) throw ValidationError(type_error(child_path(key), "a string"));
    return v.get<std::string>();
}

bool ObjectReader::boolean_or(std::string_view key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = get(key);
    if (!v.is_boolean()) throw ValidationError(type_error(child_path(key), "a boolean"));
    return v.get<bool>();
}

std::vector<double> ObjectReader::numbers_or(std::string_view key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const auto& v = get(key);
    if (!v.is_array()) throw ValidationError(type_error(child_path(key), "an array of numbers"));
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) {
            throw ValidationError(type_error(child_path(key) + "[" + std::to_string(i) + "]",
                                             "a number"));
        }
        out.push_back(v[i].get<double>());
    }
    return out;
}

void ObjectReader::finish() const {
    for (const auto& [key, value] : object_.items()) {
        if (!seen_.count(key)) throw ValidationError(child_path(key) + ": unknown field");
    }
}

json distribution_to_json(const SamplingDistribution& dist) {
    json j{{"kind", dist.name()}};
    if (dist.kind() == SamplingKind::symmetric_weibull) j["shape"] = dist.shape();
    return j;
}

SamplingDistribution distribution_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string kind = r.string_or("kind", "gaussian");
    double shape = 2.0;
    if (kind == "symmetric_weibull") shape = r.number_or("shape", 2.0);
    r.finish();
    try {
        return make_distribution(kind, shape);
    } catch (const ParameterError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

json to_json(const SdeConfig& cfg) {
    return json{{"m", cfg.m},
                {"dt", cfg.dt},
                {"total_time", cfg.total_time},
                {"burn_in_time", cfg.burn_in_time},
                {"thinning", cfg.thinning},
                {"mc_size", cfg.mc_size},
                {"clip_eps", cfg.clip_eps},
                {"clip_delta", cfg.clip_delta},
                {"u0", cfg.initial_u()},
                {"w0", cfg.initial_w()},
                {"seed", cfg.seed},
                {"chains", cfg.chains},
                {"sampling", distribution_to_json(cfg.sampling)},
                {"closed_form_two_arm", cfg.closed_form_two_arm}};
}

SdeConfig sde_config_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    SdeConfig cfg;
    cfg.m = r.unsigned_or("m", cfg.m);
    cfg.dt = r.number_or("dt", cfg.dt);
    cfg.total_time = r.number_or("total_time", cfg.total_time);
    cfg.burn_in_time = r.number_or("burn_in_time", cfg.burn_in_time);
    cfg.thinning = r.unsigned_or("thinning", cfg.thinning);
    cfg.mc_size = r.unsigned_or("mc_size", cfg.mc_size);
    cfg.clip_eps = r.number_or("clip_eps", cfg.clip_eps);
    cfg.clip_delta = r.number_or("clip_delta", cfg.clip_delta);
    cfg.u0 = r.numbers_or("u0", {});
    cfg.w0 = r.numbers_or("w0", {});
    cfg.seed = r.unsigned_or("seed", cfg.seed);
    cfg.chains = r.unsigned_or("chains", cfg.chains);
    if (r.has("sampling")) cfg.sampling = distribution_from_json(r.get("sampling"), r.child_path("sampling"));
    cfg.closed_form_two_arm = r.boolean_or("closed_form_two_arm", cfg.closed_form_two_arm);
    r.finish();
    try {
        cfg.validate();
    } catch (const ParameterError& e) {
        throw ValidationError(e.what());
    }
    return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

CsvTable read_csv(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    CsvTable table;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos
                                                                                   : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
        } else {
            if (fields.size() != table.header.size()) {
                throw IoError("'" + path.string() + "': row width does not match header");
            }
            table.rows.push_back(std::move(fields));
        }
    }
    if (!have_header) throw IoError("'" + path.string() + "': missing header row");
    return table;
}

void write_traces_csv(const std::filesystem::path& path, const std::vector<BanditTrace>& traces,
                      const OutputMeta& meta) {
    std::string out = meta_comment(meta) + "\n";
    out += "replication,arm,pulls,emp_mean,noise_sum,residual_ss\n";
    for (std::size_t r = 0; r < traces.size(); ++r) {
        const auto& t = traces[r];
        for (std::size_t a = 0; a < t.arms(); ++a) {
            out += std::to_string(r) + "," + std::to_string(a) + "," + std::to_string(t.pulls[a]) +
                   "," + format_double(t.emp_mean[a]) + "," + format_double(t.noise_sum[a]) + "," +
                   format_double(t.running_residual_ss[a]) + "\n";
        }
    }
    write_text(path, out);
}

std::vector<TraceRow> read_traces_csv(const std::filesystem::path& path) {
    const auto table = read_csv(path);
    if (table.header != std::vector<std::string>{"replication", "arm", "pulls", "emp_mean",
                                                 "noise_sum", "residual_ss"}) {
        throw IoError("'" + path.string() + "': unexpected trace header");
    }
    std::vector<TraceRow> rows;
    for (const auto& f : table.rows) {
        rows.push_back(TraceRow{static_cast<std::size_t>(parse_int(f[0])),
                                static_cast<std::size_t>(parse_int(f[1])), parse_int(f[2]),
                                parse_double(f[3]), parse_double(f[4]), parse_double(f[5])});
    }
    return rows;
}

void write_sample_set(const std::filesystem::path& csv_path,
                      const std::filesystem::path& sidecar_path, const InvariantSampleSet& set,
                      const OutputMeta& meta) {
    std::string out = meta_comment(meta) + "\nchain,step";
    for (std::size_t a = 1; a <= set.m; ++a) out += ",u_" + std::to_string(a);
    for (std::size_t a = 1; a <= set.m; ++a) out += ",w_" + std::to_string(a);
    out += "\n";
    out.reserve(out.size() + set.size() * (12 + 2 * set.m * 24));
    for (std::size_t i = 0; i < set.size(); ++i) {
        out += std::to_string(set.chain[i]);
        out += ',';
        out += std::to_string(set.step[i]);
        for (std::size_t a = 0; a < set.m; ++a) {
            out += ',';
            out += format_double(set.u[i * set.m + a]);
        }
        for (std::size_t a = 0; a < set.m; ++a) {
            out += ',';
            out += format_double(set.w[i * set.m + a]);
        }
        out += '\n';
    }
    write_text(csv_path, out);

    json sidecar{{"format", "tsdyn.sde_samples"},
                 {"meta", meta_to_json(meta)},
                 {"config", to_json(set.provenance)},
                 {"m", set.m},
                 {"samples", set.size()}};
    write_json(sidecar_path, sidecar);
}

InvariantSampleSet read_sample_set(const std::filesystem::path& csv_path,
                                   const std::filesystem::path& sidecar_path) {
    const json sidecar = read_json(sidecar_path);
    if (!sidecar.contains("config") || !sidecar.contains("m")) {
        throw IoError("'" + sidecar_path.string() + "': not a sample-set sidecar");
    }
    InvariantSampleSet set;
    set.provenance = sde_config_from_json(sidecar.at("config"), "config");
    set.m = sidecar.at("m").get<std::size_t>();

    const auto table = read_csv(csv_path);
    if (table.header.size() != 2 + 2 * set.m) {
        throw IoError("'" + csv_path.string() + "': column count does not match m");
    }
    for (const auto& f : table.rows) {
        set.chain.push_back(static_cast<std::size_t>(parse_int(f[0])));
        set.step.push_back(static_cast<std::uint64_t>(parse_int(f[1])));
        for (std::size_t a = 0; a < set.m; ++a) set.u.push_back(parse_double(f[2 + a]));
        for (std::size_t a = 0; a < set.m; ++a) set.w.push_back(parse_double(f[2 + set.m + a]));
    }
    set.normalized.resize(set.u.size());
    for (std::size_t i = 0; i < set.u.size(); ++i) set.normalized[i] = set.w[i] / std::sqrt(set.u[i]);
    return set;
}

void write_column_csv(const std::filesystem::path& path, std::string_view header,
                      const std::vector<double>& values, const OutputMeta& meta) {
    std::string out = meta_comment(meta) + "\n" + std::string(header) + "\n";
    for (const double v : values) {
        out += format_double(v);
        out += '\n';
    }
    write_text(path, out);
}

json quantile_table_to_json(const QuantileTable& table, const OutputMeta& meta) {
    json rows = json::array();
    for (const auto& [k, row] : table.rows()) {
        json q = json::array();
        for (std::size_t i = 0; i < row.alphas.size(); ++i) {
            q.push_back(json{{"alpha", row.alphas[i]}, {"z", row.values[i]}});
        }
        rows.push_back(json{{"K", k},
                            {"samples", row.sample_count},
                            {"provenance", row.provenance},
                            {"quantiles", q}});
    }
    return json{{"format", "tsdyn.quantile_table"}, {"meta", meta_to_json(meta)}, {"rows", rows}};
}

QuantileTable quantile_table_from_json(const json& j) {
    try {
        if (j.value("format", "") != "tsdyn.quantile_table") {
            throw IoError("not a quantile table (format tag missing)");
        }
        QuantileTable table;
        for (const auto& r : j.at("rows")) {
            QuantileRow row;
            row.sample_count = r.at("samples").get<std::uint64_t>();
            row.provenance = r.at("provenance").get<std::string>();
            for (const auto& q : r.at("quantiles")) {
                row.alphas.push_back(q.at("alpha").get<double>());
                row.values.push_back(q.at("z").get<double>());
            }
            table.set_row(r.at("K").get<std::size_t>(), std::move(row));
        }
        return table;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed quantile table: ") + e.what());
    }
}

void write_coverage_csv(const std::filesystem::path& path, const std::vector<ArmCoverage>& rows,
                        const OutputMeta& meta) {
    std::string out = meta_comment(meta) + "\narm,method,coverage,R,covered\n";
    for (const auto& r : rows) {
        out += std::to_string(r.arm) + "," + r.method + "," + format_double(r.rate()) + "," +
               std::to_string(r.replications) + "," + std::to_string(r.covered) + "\n";
    }
    write_text(path, out);
}

std::vector<ArmCoverage> read_coverage_csv(const std::filesystem::path& path) {
    const auto table = read_csv(path);
    if (table.header != std::vector<std::string>{"arm", "method", "coverage", "R", "covered"}) {
        throw IoError("'" + path.string() + "': unexpected coverage header");
    }
    std::vector<ArmCoverage> rows;
    for (const auto& f : table.rows) {
        ArmCoverage c;
        c.arm = static_cast<std::size_t>(parse_int(f[0]));
        c.method = f[1];
        c.replications = static_cast<std::size_t>(parse_int(f[3]));
        c.covered = static_cast<std::size_t>(parse_int(f[4]));
        if (parse_double(f[2]) != c.rate()) {
            throw IoError("'" + path.string() + "': coverage column inconsistent with counts");
        }
        rows.push_back(c);
    }
    return rows;
}

json comparison_to_json(const ComparisonReport& report, const OutputMeta& meta) {
    json bins = json::array();
    for (const auto& b : report.histogram_bins) {
        bins.push_back(json{{"edge", b.edge}, {"count_left", b.count_left}, {"count_right", b.count_right}});
    }
    return json{{"format", "tsdyn.comparison"},
                {"meta", meta_to_json(meta)},
                {"ks_statistic", report.ks_statistic},
                {"n_left", report.n_left},
                {"n_right", report.n_right},
                {"upper_edge", report.upper_edge},
                {"histogram_bins", bins}};
}

void write_histogram_csv(const std::filesystem::path& path, const ComparisonReport& report,
                         const OutputMeta& meta) {
    std::string out = meta_comment(meta) + "\nedge,count_left,count_right\n";
    for (const auto& b : report.histogram_bins) {
        out += format_double(b.edge) + "," + std::to_string(b.count_left) + "," +
               std::to_string(b.count_right) + "\n";
    }
    write_text(path, out);
}

}  // namespace tsdyn
