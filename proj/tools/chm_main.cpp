#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chm/experiments.hpp"

// chm: causal hybrid modeling experiments.
//   chm q10-sim --config cfg [--jobs N] [--resume] [--paper-scale] [--seed S] [--out DIR]
//   chm lue-sim --config cfg [...]
//   chm run     --config cfg [...]
// Exit codes: 0 success, 2 config error, 3 partial failures recorded.

namespace {

struct CommonOpts {
    std::string config_path;
    int jobs = -1;
    bool resume = false;
    bool paper_scale = false;
    std::int64_t seed = -1;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "flat key=value experiment config")->required();
    cmd->add_option("--jobs", o.jobs, "max concurrent replications");
    cmd->add_flag("--resume", o.resume, "skip cells whose output file already exists");
    cmd->add_flag("--paper-scale", o.paper_scale, "restore 100 replications");
    cmd->add_option("--seed", o.seed, "override base seed");
    cmd->add_option("--out", o.out_dir, "override output directory");
}

chm::experiments::ExperimentConfig resolve(const CommonOpts& o, const std::string& experiment) {
    auto cfg = chm::experiments::load_config(o.config_path);
    cfg.experiment = experiment;
    if (o.jobs > 0) cfg.jobs = o.jobs;
    if (o.resume) cfg.resume = true;
    if (o.paper_scale) {
        cfg.paper_scale = true;
        cfg.replications = std::max(cfg.replications, 100);
    }
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"causal hybrid modeling: DML effect estimation and flux partitioning experiments"};
    app.require_subcommand(1);

    CommonOpts q10_opts, lue_opts, run_opts;
    auto* q10 = app.add_subcommand("q10-sim", "Q10 recovery simulation sweep");
    add_common(q10, q10_opts);
    auto* lue = app.add_subcommand("lue-sim", "flux-partitioning noise sweep");
    add_common(lue, lue_opts);
    auto* run = app.add_subcommand("run", "DML on a user CSV");
    add_common(run, run_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (q10->parsed()) {
            auto cfg = resolve(q10_opts, "q10-sim");
            const auto res = chm::experiments::run_q10_simulation(cfg);
            std::cout << "q10-sim: " << res.records.size() << " cells, " << res.failures
                      << " failures\n"
                      << "records: " << res.records_path << "\nsummary: " << res.summary_path
                      << "\n";
            return res.failures > 0 ? 3 : 0;
        }
        if (lue->parsed()) {
            auto cfg = resolve(lue_opts, "lue-sim");
            const auto res = chm::experiments::run_lue_simulation(cfg);
            std::cout << "lue-sim: " << res.records.size() << " cells, " << res.failures
                      << " failures\n"
                      << "records: " << res.records_path << "\nsummary: " << res.summary_path
                      << "\n";
            return res.failures > 0 ? 3 : 0;
        }
        auto cfg = resolve(run_opts, "run");
        const int failures = chm::experiments::run_on_csv(cfg);
        std::cout << "run: wrote " << cfg.output_dir << "/dml_summary.txt and predictions.csv\n";
        return failures > 0 ? 3 : 0;
    } catch (const chm::experiments::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
