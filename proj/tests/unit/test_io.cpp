#include <doctest.h>

#include <filesystem>
#include <limits>
#include <string>

#include "tsdyn/error.hpp"
#include "tsdyn/inference.hpp"
#include "tsdyn/io.hpp"
#include "tsdyn/stats.hpp"

using namespace tsdyn;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("tsdyn_io_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("doubles survive text formatting exactly") {
    for (double v : {0.1, -2.5e-300, 1.0 / 3.0, 6.02214076e23, 0.0,
                     std::numeric_limits<double>::denorm_min()}) {
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK_THROWS_AS(parse_double("1.5x"), IoError);
    CHECK_THROWS_AS(parse_double(""), IoError);
}

TEST_CASE("config hash is stable over key order") {
    const auto a = json::parse(R"({"b": 1, "a": [1, 2]})");
    const auto b = json::parse(R"({"a": [1, 2], "b": 1})");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    CHECK(config_hash(a) != config_hash(json::parse(R"({"a": [1, 2], "b": 2})")));
    CHECK(meta_comment({7, "abc"}) == "# tsdyn 0.1.0 master_seed=7 config_hash=abc");
}

TEST_CASE("strict object reader") {
    const auto j = json::parse(R"({"x": 1.5, "n": 3, "flag": true, "extra": 0})");
    ObjectReader r(j, "root");
    CHECK(r.number("x") == 1.5);
    CHECK(r.unsigned_int("n") == 3);
    CHECK(r.boolean_or("flag", false));
    CHECK(r.string_or("missing", "dflt") == "dflt");
    CHECK_THROWS_WITH_AS(r.finish(), "root.extra: unknown field", ValidationError);

    const auto k = json::parse(R"({"x": "text"})");
    ObjectReader s(k, "cfg");
    CHECK_THROWS_WITH_AS(s.number("x"), doctest::Contains("cfg.x"), ValidationError);
    CHECK_THROWS_AS(ObjectReader(json::array(), "arr"), ValidationError);
}

TEST_CASE("SDE config JSON round-trip and validation") {
    SdeConfig c = SdeConfig::defaults(3);
    c.sampling = SamplingDistribution::symmetric_weibull(1.5);
    c.seed = 0xfeedfacecafebeefULL;
    c.chains = 2;
    const auto back = sde_config_from_json(to_json(c));
    CHECK(back.m == 3);
    CHECK(back.seed == c.seed);
    CHECK(back.sampling.kind() == SamplingKind::symmetric_weibull);
    CHECK(back.sampling.shape() == 1.5);
    CHECK(back.initial_u() == c.initial_u());
    CHECK(to_json(back) == to_json(c));

    auto bad = to_json(c);
    bad["thinning"] = 0;
    CHECK_THROWS_WITH_AS(sde_config_from_json(bad), doctest::Contains("sde.thinning"), ValidationError);
    bad = to_json(c);
    bad["bogus"] = 1;
    CHECK_THROWS_WITH_AS(sde_config_from_json(bad), "sde.bogus: unknown field", ValidationError);
    bad = to_json(c);
    bad["sampling"] = {{"kind", "cauchy"}};
    CHECK_THROWS_AS(sde_config_from_json(bad), ValidationError);
}

TEST_CASE("sample set CSV and sidecar round-trip exactly") {
    const auto dir = scratch_dir("samples");
    SdeConfig c = SdeConfig::defaults(3);
    c.total_time = 5;
    c.burn_in_time = 1;
    c.mc_size = 20;
    c.seed = 5;
    const auto set = simulate_invariant(c);
    write_sample_set(dir / "s.csv", dir / "s.json", set, {5, "h"});
    const auto back = read_sample_set(dir / "s.csv", dir / "s.json");
    CHECK(back.m == set.m);
    CHECK(back.u == set.u);
    CHECK(back.w == set.w);
    CHECK(back.step == set.step);
    CHECK(back.normalized == set.normalized);
    CHECK(to_json(back.provenance) == to_json(set.provenance));

    const auto text = read_text(dir / "s.csv");
    CHECK(text.rfind("# tsdyn 0.1.0 master_seed=5 config_hash=h\nchain,step,u_1,u_2,u_3,w_1,w_2,w_3\n", 0) == 0);
    CHECK_THROWS_AS(read_sample_set(dir / "nope.csv", dir / "s.json"), IoError);
}

TEST_CASE("quantile table JSON round-trip") {
    QuantileTable t;
    t.set_row(1, analytic_normal_row(kTableAlphas));
    QuantileRow r;
    r.alphas = {0.025, 0.975};
    r.values = {-2.5700000000000003, 1.9};
    r.sample_count = 1600000;
    r.provenance = R"({"m":2})";
    t.set_row(2, r);
    const auto j = quantile_table_to_json(t, {1, "x"});
    CHECK(quantile_table_from_json(j) == t);
    CHECK(quantile_table_from_json(json::parse(j.dump())) == t);
    CHECK_THROWS_AS(quantile_table_from_json(json::object()), IoError);
}

TEST_CASE("coverage CSV round-trip") {
    const auto dir = scratch_dir("coverage");
    std::vector<ArmCoverage> rows{{0, "script_n", 93, 100}, {3, "gaussian", 1, 3}};
    write_coverage_csv(dir / "c.csv", rows, {2, "y"});
    const auto back = read_coverage_csv(dir / "c.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].arm == 3);
    CHECK(back[1].method == "gaussian");
    CHECK(back[1].covered == 1);
    CHECK(back[1].rate() == rows[1].rate());
}

TEST_CASE("trace CSV round-trip") {
    const auto dir = scratch_dir("traces");
    BanditConfig c;
    c.mu = {1.0, 0.0};
    c.horizon = 300;
    const auto traces = replicate(c, 3, 1);
    write_traces_csv(dir / "t.csv", traces, {0, "z"});
    const auto rows = read_traces_csv(dir / "t.csv");
    REQUIRE(rows.size() == 6);
    CHECK(rows[3].replication == 1);
    CHECK(rows[3].arm == 1);
    CHECK(rows[3].pulls == traces[1].pulls[1]);
    CHECK(rows[3].emp_mean == traces[1].emp_mean[1]);
    CHECK(rows[3].residual_ss == traces[1].running_residual_ss[1]);
}

TEST_CASE("csv reader rejects ragged rows and unwritable paths fail as I/O") {
    const auto dir = scratch_dir("ragged");
    write_text(dir / "r.csv", "# c\na,b\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(dir / "r.csv"), IoError);
    CHECK_THROWS_AS(write_text(dir / "missing" / "x.txt", "x"), IoError);
    CHECK_THROWS_AS(read_json(dir / "r.csv"), IoError);
}

TEST_CASE("comparison report JSON carries every bin") {
    const std::vector<double> a{0.0, 0.5, 1.0};
    const std::vector<double> b{0.25, 0.75};
    const auto r = compare_samples(a, b, 4);
    const auto j = comparison_to_json(r, {3, "q"});
    CHECK(j["histogram_bins"].size() == 4);
    CHECK(j["meta"]["master_seed"] == 3);
    CHECK(j["ks_statistic"].get<double>() == r.ks_statistic);
}
