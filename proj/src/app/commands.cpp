#include <algorithm>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <string>

#include "tsdyn/app.hpp"
#include "tsdyn/error.hpp"
#include "tsdyn/stats.hpp"

namespace tsdyn::app {

namespace {

constexpr std::size_t kReplicationBatch = 250;
constexpr std::uint64_t kGaussianRefTag = 0x67726566;  // "gref"

std::filesystem::path prepare_output_dir(const ExperimentConfig& config) {
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec || !std::filesystem::is_directory(config.output_dir)) {
        throw IoError("cannot create output directory '" + config.output_dir.string() + "'");
    }
    return config.output_dir;
}

const BanditSection& require_bandit(const ExperimentConfig& config, const char* command) {
    if (!config.bandit) {
        throw ValidationError(std::string("bandit: section required by '") + command + "'");
    }
    return *config.bandit;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// Progress lines are `progress <command> <phase> <done>/<total>`.
class Progress {
public:
    Progress(std::ostream& err, std::string command) : err_(err), command_(std::move(command)) {}

    void report(const std::string& phase, std::uint64_t done, std::uint64_t total) {
        std::lock_guard<std::mutex> lock(mutex_);
        err_ << "progress " << command_ << ' ' << phase << ' ' << done << '/' << total << '\n';
        err_.flush();
    }

    SdeProgress sde(const std::string& phase) {
        return [this, phase](std::size_t chain, std::uint64_t step, std::uint64_t total) {
            report(phase + ".chain" + std::to_string(chain), step, total);
        };
    }

private:
    std::ostream& err_;
    std::string command_;
    std::mutex mutex_;
};

std::vector<BanditTrace> replicate_with_progress(const BanditConfig& config,
                                                 std::size_t replications, int threads,
                                                 Progress& progress, const std::string& phase) {
    std::vector<BanditTrace> traces;
    traces.reserve(replications);
    for (std::size_t first = 0; first < replications; first += kReplicationBatch) {
        const std::size_t count = std::min(kReplicationBatch, replications - first);
        auto batch = replicate(config, count, threads, first);
        std::move(batch.begin(), batch.end(), std::back_inserter(traces));
        progress.report(phase, traces.size(), replications);
    }
    return traces;
}

SdeConfig sde_for(const ExperimentConfig& config, std::size_t m) {
    SdeConfig cfg = config.sde ? *config.sde : SdeConfig{};
    if (!config.sde) cfg.seed = derive_seed(config.master_seed, 0x73646531);
    if (cfg.m != m) {
        cfg.m = m;
        cfg.u0.clear();
        cfg.w0.clear();
    }
    try {
        cfg.validate();
    } catch (const ParameterError& e) {
        throw ValidationError(e.what());
    }
    return cfg;
}

std::filesystem::path sidecar_for(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".json");
    return p;
}

InvariantSampleSet obtain_sde_set(const ExperimentConfig& config, std::size_t m, int threads,
                                  Progress& progress) {
    if (!config.compare.sde_samples.empty()) {
        const std::filesystem::path csv = config.compare.sde_samples;
        return read_sample_set(csv, sidecar_for(csv));
    }
    const SdeConfig cfg = sde_for(config, m);
    return simulate_invariant(cfg, threads, progress.sde("sde"));
}

json histogram_plot_spec(const ComparisonReport& report, const OutputMeta& meta,
                         const std::string& title, const std::string& x_label,
                         const std::string& left_label, const std::string& right_label) {
    json data = json::array();
    const double nl = static_cast<double>(std::max<std::size_t>(report.n_left, 1));
    const double nr = static_cast<double>(std::max<std::size_t>(report.n_right, 1));
    for (std::size_t k = 0; k < report.histogram_bins.size(); ++k) {
        const auto& b = report.histogram_bins[k];
        const double hi =
            k + 1 < report.histogram_bins.size() ? report.histogram_bins[k + 1].edge : report.upper_edge;
        const double width = hi - b.edge;
        data.push_back({{"bin_start", b.edge}, {"bin_end", hi}, {"series", left_label},
                        {"density", static_cast<double>(b.count_left) / nl / width}});
        data.push_back({{"bin_start", b.edge}, {"bin_end", hi}, {"series", right_label},
                        {"density", static_cast<double>(b.count_right) / nr / width}});
    }
    return json{{"format", "tsdyn.plot_spec"},
                {"meta", meta_to_json(meta)},
                {"title", title},
                {"mark", "bar"},
                {"encoding",
                 {{"x", {{"field", "bin_start"}, {"field_end", "bin_end"}, {"label", x_label}}},
                  {"y", {{"field", "density"}, {"label", "density"}}},
                  {"color", {{"field", "series"}}}}},
                {"ks_statistic", report.ks_statistic},
                {"data", data}};
}

}  // namespace

int cmd_sde_sample(const ExperimentConfig& config, int threads, std::ostream& out,
                   std::ostream& err) {
    if (!config.sde) throw ValidationError("sde: section required by 'sde-sample'");
    const auto dir = prepare_output_dir(config);
    const auto meta = config.meta();
    Progress progress(err, "sde-sample");

    const auto set = simulate_invariant(*config.sde, threads, progress.sde("euler_maruyama"));
    write_sample_set(dir / "sde_samples.csv", dir / "sde_samples.json", set, meta);
    const auto streams = normalized_mean_samples(set);
    for (std::size_t a = 0; a < set.m; ++a) {
        const std::string name = "normalized_arm_" + std::to_string(a);
        write_column_csv(dir / (name + ".csv"), name,
                         streams.per_arm.empty() ? std::vector<double>{} : streams.per_arm[a], meta);
    }

    out << "stored " << set.size() << '\n';
    if (set.size() == 0) {
        err << "warning: no samples stored; burn-in covers the whole run\n";
        return 0;
    }
    for (std::size_t a = 0; a < set.m; ++a) {
        double su = 0.0;
        double sw = 0.0;
        for (std::size_t i = 0; i < set.size(); ++i) {
            su += set.u[i * set.m + a];
            sw += set.w[i * set.m + a];
        }
        const double n = static_cast<double>(set.size());
        out << "arm " << a << " u_mean " << format_double(su / n) << " w_mean "
            << format_double(sw / n) << '\n';
    }
    return 0;
}

int cmd_quantiles(const ExperimentConfig& config, int threads, std::ostream& out,
                  std::ostream& err) {
    SdeConfig tmpl = sde_for(config, config.sde ? config.sde->m : 2);
    const auto dir = prepare_output_dir(config);
    const auto meta = config.meta();
    Progress progress(err, "quantiles");

    const auto& alphas = config.inference.alphas;
    QuantileTable table;
    table.set_row(1, analytic_normal_row(alphas));
    for (std::size_t k = 2; k <= config.inference.k_max; ++k) {
        // Same per-K seeding as build_quantile_table.
        SdeConfig cfg = tmpl;
        cfg.m = k;
        cfg.u0.clear();
        cfg.w0.clear();
        cfg.seed = derive_seed(tmpl.seed, k);
        const auto set = simulate_invariant(cfg, threads, progress.sde("K" + std::to_string(k)));
        table.set_row(k, quantile_row_from_samples(set, alphas));
        progress.report("rows", k, config.inference.k_max);
    }
    write_json(dir / "quantile_table.json", quantile_table_to_json(table, meta));

    std::string text = "alpha(%)";
    for (const double a : alphas) text += "\t" + fixed(100.0 * a, 1);
    text += "\n";
    for (const auto& [k, row] : table.rows()) {
        text += "N_" + std::to_string(k);
        for (const double v : row.values) text += "\t" + fixed(v, 2);
        text += "\n";
    }
    write_text(dir / "quantile_table.txt", meta_comment(meta) + "\n" + text);
    out << text;
    return 0;
}

int cmd_bandit_run(const ExperimentConfig& config, int threads, std::ostream& out,
                   std::ostream& err) {
    const auto& bandit = require_bandit(config, "bandit-run");
    const auto dir = prepare_output_dir(config);
    const auto meta = config.meta();
    Progress progress(err, "bandit-run");
    if (bandit.config.noise.test_only()) err << "warning: test-only noise law in use\n";

    const auto traces =
        replicate_with_progress(bandit.config, bandit.replications, threads, progress, "replications");
    write_traces_csv(dir / "traces.csv", traces, meta);

    out << "replications " << traces.size() << " arms " << bandit.config.arms() << " rows "
        << traces.size() * bandit.config.arms() << '\n';
    for (std::size_t a = 0; a < bandit.config.arms(); ++a) {
        double s = 0.0;
        for (const auto& t : traces) s += static_cast<double>(t.pulls[a]);
        out << "arm " << a << " mean_pulls " << format_double(s / static_cast<double>(traces.size()))
            << '\n';
    }
    return 0;
}

int cmd_coverage(const ExperimentConfig& config, int threads, std::ostream& out,
                 std::ostream& err) {
    const auto& bandit = require_bandit(config, "coverage");
    const auto& inf = config.inference;
    const std::size_t k0 = bandit.config.optimal_arms().size();
    const double alphas[] = {inf.alpha / 2.0, 1.0 - inf.alpha / 2.0};

    QuantileTable table;
    const bool need_row = !inf.naive && k0 >= 2;
    std::optional<SdeConfig> table_sde;
    if (!inf.quantile_table.empty()) {
        table = quantile_table_from_json(read_json(inf.quantile_table));
        if (need_row) {
            table.quantile(k0, alphas[0]);
            table.quantile(k0, alphas[1]);
        }
    } else if (need_row) {
        table_sde = sde_for(config, k0);
        table_sde->seed = derive_seed(table_sde->seed, k0);
    }
    const auto dir = prepare_output_dir(config);
    const auto meta = config.meta();
    Progress progress(err, "coverage");

    if (table_sde) {
        const auto set = simulate_invariant(*table_sde, threads, progress.sde("table"));
        table.set_row(k0, quantile_row_from_samples(set, alphas));
    }

    const auto traces =
        replicate_with_progress(bandit.config, bandit.replications, threads, progress, "replications");
    std::vector<ArmCoverage> rows;
    if (!inf.naive) {
        const auto correct = evaluate_coverage(traces, bandit.config, inf.alpha, table, false, inf.sigma_mode);
        rows.insert(rows.end(), correct.begin(), correct.end());
    }
    const auto naive = evaluate_coverage(traces, bandit.config, inf.alpha, table, true, inf.sigma_mode);
    rows.insert(rows.end(), naive.begin(), naive.end());
    write_coverage_csv(dir / "coverage.csv", rows, meta);

    json data = json::array();
    for (const auto& r : rows) {
        data.push_back({{"arm", r.arm}, {"method", r.method}, {"coverage", r.rate()},
                        {"replications", r.replications}});
    }
    const json plot{{"format", "tsdyn.plot_spec"},
                    {"meta", meta_to_json(meta)},
                    {"title", "Coverage of " + fixed(100.0 * (1.0 - inf.alpha), 1) +
                                  "% confidence intervals per arm"},
                    {"mark", "bar"},
                    {"grouping", "grouped"},
                    {"encoding",
                     {{"x", {{"field", "arm"}, {"type", "ordinal"}, {"label", "arm"}}},
                      {"y", {{"field", "coverage"}, {"label", "coverage"}, {"domain", {0.0, 1.0}}}},
                      {"color", {{"field", "method"}}}}},
                    {"reference_lines", json::array({{{"axis", "y"}, {"value", 1.0 - inf.alpha}}})},
                    {"data", data}};
    write_json(dir / "coverage_plot.json", plot);

    for (const auto& r : rows) {
        out << "arm " << r.arm << ' ' << r.method << ' ' << fixed(r.rate(), 3) << '\n';
    }
    return 0;
}

int cmd_compare(const ExperimentConfig& config, int threads, std::ostream& out,
                std::ostream& err) {
    const auto& bandit = require_bandit(config, "compare");
    const auto& cmp = config.compare;
    const std::size_t k0 = bandit.config.optimal_arms().size();
    if (cmp.mode != CompareMode::self && cmp.sde_samples.empty()) sde_for(config, k0);
    const auto dir = prepare_output_dir(config);
    const auto meta = config.meta();
    Progress progress(err, "compare");

    const auto traces =
        replicate_with_progress(bandit.config, bandit.replications, threads, progress, "replications");

    ComparisonReport report;
    json extra = json::object();
    std::string title;
    std::string x_label;
    std::string right_label;
    if (cmp.mode == CompareMode::self) {
        const auto values = pull_fractions(traces, cmp.arm);
        report = compare_samples(values, values, cmp.bins);
        title = "Pull fraction against itself";
        x_label = "n/T";
        right_label = "bandit";
    } else {
        const auto set = obtain_sde_set(config, k0, threads, progress);
        if (cmp.mode == CompareMode::fig1) {
            report = optimal_fraction_vs_sde(traces, bandit.config, set, cmp.arm, cmp.bins);
            title = "Pull fraction of an optimal arm against the SDE u-marginal";
            x_label = "n/T";
        } else {
            report = normalized_mean_vs_limit(traces, bandit.config, cmp.arm,
                                              LimitReference::sde_normalized, &set, 0, 0,
                                              cmp.bins);
            const auto gauss = normalized_mean_vs_limit(
                traces, bandit.config, cmp.arm, LimitReference::gaussian, nullptr,
                cmp.gaussian_draws, derive_seed(config.master_seed, kGaussianRefTag), cmp.bins);
            extra["gaussian_reference"] = {{"ks_statistic", gauss.ks_statistic},
                                           {"n_right", gauss.n_right}};
            title = "Normalized empirical mean of an optimal arm against the SDE limit";
            x_label = "sqrt(n) (mean - mu) / sigma";
        }
        right_label = "sde";
    }

    json report_json = comparison_to_json(report, meta);
    report_json["mode"] = cmp.mode == CompareMode::fig1 ? "fig1" : cmp.mode == CompareMode::fig2 ? "fig2" : "self";
    report_json["arm"] = cmp.arm;
    for (auto& [k, v] : extra.items()) report_json[k] = v;
    write_json(dir / "comparison.json", report_json);
    write_histogram_csv(dir / "histogram.csv", report, meta);
    write_json(dir / "comparison_plot.json",
               histogram_plot_spec(report, meta, title, x_label, "bandit", right_label));

    out << "ks " << format_double(report.ks_statistic) << '\n';
    if (extra.contains("gaussian_reference")) {
        out << "ks_gaussian "
            << format_double(extra["gaussian_reference"]["ks_statistic"].get<double>()) << '\n';
    }
    return 0;
}

int cmd_stability(const ExperimentConfig& config, int threads, std::ostream& out,
                  std::ostream& err) {
    const auto& bandit = require_bandit(config, "stability");
    if (bandit.config.suboptimal_arms().empty()) {
        throw ValidationError("bandit.mu: stability needs at least one suboptimal arm");
    }
    std::vector<std::int64_t> horizons = config.stability.horizons;
    if (horizons.empty()) horizons.push_back(bandit.config.horizon);
    if (std::find_if(horizons.begin(), horizons.end(), [](auto t) { return t < 2; }) != horizons.end()) {
        throw ValidationError("stability.horizons: entries must be >= 2");
    }
    const auto dir = prepare_output_dir(config);
    const auto meta = config.meta();
    Progress progress(err, "stability");

    std::string csv = meta_comment(meta) +
                      "\nhorizon,arm,n_star,lai_robbins,median_ratio,q25_ratio,q75_ratio,"
                      "median_ratio_lai_robbins,median_pulls\n";
    json data = json::array();
    for (const auto horizon : horizons) {
        BanditConfig cfg = bandit.config;
        cfg.horizon = horizon;
        cfg.checkpoint_times.clear();
        const auto traces = replicate_with_progress(cfg, bandit.replications, threads, progress,
                                                    "T" + std::to_string(horizon));
        for (const auto& s : stability_ratio(traces, cfg)) {
            csv += std::to_string(horizon) + "," + std::to_string(s.arm) + "," +
                   format_double(s.n_star) + "," + format_double(s.lai_robbins) + "," +
                   format_double(s.median) + "," + format_double(s.q25) + "," +
                   format_double(s.q75) + "," + format_double(s.median_lai_robbins) + "," +
                   format_double(s.median_pulls) + "\n";
            data.push_back({{"horizon", horizon}, {"arm", s.arm}, {"median_ratio", s.median},
                            {"q25_ratio", s.q25}, {"q75_ratio", s.q75}});
            out << "T " << horizon << " arm " << s.arm << " median_pulls "
                << format_double(s.median_pulls) << " n_star " << fixed(s.n_star, 3)
                << " median_ratio " << fixed(s.median, 3) << '\n';
        }
    }
    write_text(dir / "stability.csv", csv);
    const json plot{{"format", "tsdyn.plot_spec"},
                    {"meta", meta_to_json(meta)},
                    {"title", "Suboptimal pull count over its theoretical scale"},
                    {"mark", "line"},
                    {"encoding",
                     {{"x", {{"field", "horizon"}, {"scale", "log"}, {"label", "T"}}},
                      {"y", {{"field", "median_ratio"}, {"label", "n / n*"}}},
                      {"band", {{"lower", "q25_ratio"}, {"upper", "q75_ratio"}}},
                      {"color", {{"field", "arm"}}}}},
                    {"reference_lines", json::array({{{"axis", "y"}, {"value", 1.0}}})},
                    {"data", data}};
    write_json(dir / "stability_plot.json", plot);
    return 0;
}

std::vector<std::string_view> command_names() {
    return {"sde-sample", "quantiles", "bandit-run", "coverage", "compare", "stability"};
}

int run_command(std::string_view name, const ExperimentConfig& config, int threads,
                std::ostream& out, std::ostream& err) {
    if (threads < 1) throw ValidationError("--threads: must be >= 1");
    if (name == "sde-sample") return cmd_sde_sample(config, threads, out, err);
    if (name == "quantiles") return cmd_quantiles(config, threads, out, err);
    if (name == "bandit-run") return cmd_bandit_run(config, threads, out, err);
    if (name == "coverage") return cmd_coverage(config, threads, out, err);
    if (name == "compare") return cmd_compare(config, threads, out, err);
    if (name == "stability") return cmd_stability(config, threads, out, err);
    throw ValidationError("unknown command '" + std::string(name) + "'");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
        dynamic_cast<const ShapeError*>(&e)) {
        return 2;
    }
    if (dynamic_cast<const DivergedError*>(&e)) return 3;
    if (dynamic_cast<const IoError*>(&e)) return 4;
    return 1;
}

}  // namespace tsdyn::app
