#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "chm/csv.hpp"
#include "chm/experiments.hpp"
#include "chm/synthgen.hpp"

using namespace chm;
using namespace chm::experiments;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write_config(const fs::path& dir, const std::string& body) {
    const fs::path p = dir / "config.txt";
    std::ofstream out(p);
    out << body;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CHM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

} // namespace

TEST_CASE("config parsing: lists, comments, overrides, errors") {
    auto dir = fresh_dir("chm_cfg_test");
    const auto path = write_config(dir,
                                   "# comment\n"
                                   "methods = dml-rf, gdhm\n"
                                   "sample_sizes = 250, 500\n"
                                   "replications = 3\n"
                                   "q10_values = 1.5,1.25\n"
                                   "seed = 42\n"
                                   "regularization = dropout\n"
                                   "output_dir = out\n");
    auto cfg = load_config(path);
    CHECK(cfg.methods == std::vector<std::string>{"dml-rf", "gdhm"});
    CHECK(cfg.sample_sizes == std::vector<std::size_t>{250, 500});
    CHECK(cfg.replications == 3);
    CHECK(cfg.q10_values == std::vector<double>{1.5, 1.25});
    CHECK(cfg.seed == 42);
    CHECK(cfg.regularization == "dropout");

    CHECK_THROWS_AS(load_config(write_config(dir, "bogus_key = 1\n")), ConfigError);
    CHECK_THROWS_AS(load_config(write_config(dir, "replications = 0\n")), ConfigError);
    CHECK_THROWS_AS(load_config(write_config(dir, "replications zero\n")), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("q10-sim: bookkeeping, determinism, resume") {
    auto dir = fresh_dir("chm_q10_test");
    ExperimentConfig cfg;
    cfg.experiment = "q10-sim";
    cfg.methods = {"dml-gbt"};
    cfg.sample_sizes = {250};
    cfg.replications = 1;
    cfg.seed = 5;
    cfg.output_dir = (dir / "a").string();

    auto res = run_q10_simulation(cfg);
    REQUIRE(res.records.size() == 1); // one row per (method, n, rep)
    CHECK(res.failures == 0);
    CHECK(res.records[0].status == "ok");
    CHECK(res.records[0].q10_hat > 0.5);
    CHECK(res.records[0].q10_hat < 4.0);
    CHECK(fs::exists(dir / "a" / "q10_records.csv"));
    CHECK(fs::exists(dir / "a" / "q10_summary.csv"));
    CHECK(fs::exists(dir / "a" / "q10_chart_1.5.svg"));
    CHECK(fs::exists(dir / "a" / "config_echo.txt"));

    // identical config, fresh dir: byte-identical records
    cfg.output_dir = (dir / "b").string();
    auto res2 = run_q10_simulation(cfg);
    CHECK(slurp(dir / "a" / "q10_records.csv") == slurp(dir / "b" / "q10_records.csv"));

    // resume: keep cell files, delete the tables, rerun
    cfg.resume = true;
    fs::remove(dir / "b" / "q10_records.csv");
    auto res3 = run_q10_simulation(cfg);
    CHECK(slurp(dir / "a" / "q10_records.csv") == slurp(dir / "b" / "q10_records.csv"));
    fs::remove_all(dir);
}

TEST_CASE("q10-sim: jobs parallelism yields identical outputs") {
    auto dir = fresh_dir("chm_q10_jobs");
    ExperimentConfig cfg;
    cfg.experiment = "q10-sim";
    cfg.methods = {"dml-gbt", "gdhm"};
    cfg.sample_sizes = {250};
    cfg.replications = 2;
    cfg.seed = 9;
    cfg.output_dir = (dir / "j1").string();
    // keep the gdhm cheap
    cfg.jobs = 1;
    run_q10_simulation(cfg);
    cfg.jobs = 2;
    cfg.output_dir = (dir / "j2").string();
    run_q10_simulation(cfg);
    CHECK(slurp(dir / "j1" / "q10_records.csv") == slurp(dir / "j2" / "q10_records.csv"));
    fs::remove_all(dir);
}

TEST_CASE("q10-sim records failures and continues") {
    auto dir = fresh_dir("chm_q10_fail");
    ExperimentConfig cfg;
    cfg.experiment = "q10-sim";
    cfg.methods = {"dml-gbt"};
    cfg.sample_sizes = {250, 100000}; // second size exceeds the generated year
    cfg.replications = 1;
    cfg.output_dir = (dir / "o").string();
    auto res = run_q10_simulation(cfg);
    REQUIRE(res.records.size() == 2);
    CHECK(res.failures == 1);
    CHECK(res.records[1].status != "ok");
    CHECK(res.records[0].status == "ok");
    fs::remove_all(dir);
}

TEST_CASE("run mode: end-to-end Q10 recovery from a generated CSV") {
    auto dir = fresh_dir("chm_run_mode");
    // write a synthetic Q10 dataset to CSV
    auto drivers = synth::synthetic_drivers({2003, 365, 47.0, 77});
    synth::Q10GenConfig gen;
    gen.seed = 3;
    auto frame = synth::gen_q10(drivers, gen);
    std::vector<double> logy = frame.col("R_eco_syn");
    for (double& v : logy) v = std::log(v);
    frame.add_column("log_R_eco", logy);
    const auto csv = dir / "q10.csv";
    write_csv(frame, csv.string());

    ExperimentConfig cfg;
    cfg.experiment = "run";
    cfg.csv_path = csv.string();
    cfg.y_col = "log_R_eco";
    cfg.t_col = "TA";
    cfg.w_cols = {"SW_POT_sm", "SW_POT_sm_diff"};
    cfg.f_spec = "affine:15:10";
    cfg.learner = "rf";
    cfg.folds = 5;
    cfg.output_dir = (dir / "out").string();
    CHECK(run_on_csv(cfg) == 0);

    const auto summary_text = slurp(dir / "out" / "dml_summary.txt");
    auto summary = dml::parse_summary(summary_text);
    CHECK(std::exp(summary.effect.theta) >= 1.45);
    CHECK(std::exp(summary.effect.theta) <= 1.55);
    CHECK(fs::exists(dir / "out" / "predictions.csv"));

    // --folds 2 vs --folds 5 agree to 0.02 on exp(theta)
    cfg.folds = 2;
    cfg.output_dir = (dir / "out2").string();
    CHECK(run_on_csv(cfg) == 0);
    auto summary2 = dml::parse_summary(slurp(dir / "out2" / "dml_summary.txt"));
    CHECK(std::abs(std::exp(summary2.effect.theta) - std::exp(summary.effect.theta)) <= 0.02);
    fs::remove_all(dir);
}

TEST_CASE("CLI: exit codes and missing-column reporting") {
    auto dir = fresh_dir("chm_cli_test");
    // config error: bad key
    const auto bad_cfg = write_config(dir, "nonsense = 1\n");
    CHECK(run_cli("q10-sim --config " + bad_cfg) == 2);

    // run with a role referencing an absent column: exit 2 and name the column
    auto drivers = synth::synthetic_drivers({2003, 30, 47.0, 1});
    const auto csv = dir / "d.csv";
    write_csv(drivers, csv.string());
    const auto cfg_path = write_config(dir, "csv = " + csv.string() +
                                                "\ny = TA\nt = SW_IN\nx = NOPE\n");
    const std::string cmd = std::string(CHM_CLI_PATH) + " run --config " + cfg_path + " --out " +
                            (dir / "o").string() + " 2> " + (dir / "err.txt").string();
    const int rc = WEXITSTATUS(std::system(cmd.c_str()));
    CHECK(rc != 0);
    CHECK(slurp(dir / "err.txt").find("NOPE") != std::string::npos);

    // a tiny valid q10-sim run exits 0
    const auto ok_cfg = write_config(dir,
                                     "methods = dml-gbt\nsample_sizes = 250\nreplications = 1\n");
    CHECK(run_cli("q10-sim --config " + ok_cfg + " --out " + (dir / "sweep").string()) == 0);
    fs::remove_all(dir);
}

TEST_CASE("lue-sim: single cheap replication produces sane scores") {
    auto dir = fresh_dir("chm_lue_test");
    ExperimentConfig cfg;
    cfg.experiment = "lue-sim";
    cfg.sigma_grid = {0.0};
    cfg.replications = 1;
    cfg.output_dir = (dir / "o").string();
    auto res = run_lue_simulation(cfg);
    REQUIRE(res.records.size() == 1);
    CHECK(res.failures == 0);
    const auto& r = res.records[0];
    CHECK(r.r2_gpp > 0.9);
    CHECK(r.r2_reco > 0.5);
    CHECK(r.r2_nee_clean > 0.9);
    CHECK(fs::exists(dir / "o" / "lue_records.csv"));
    CHECK(fs::exists(dir / "o" / "lue_summary.csv"));
    fs::remove_all(dir);
}
