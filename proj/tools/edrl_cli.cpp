// edrl: train, evaluate and compare RAN slicing policies.
//
//   edrl run     --config cfg.json [--seed N] [--out DIR] [--mode edrl|drl|eval-only]
//   edrl eval    --config cfg.json --checkpoint actor.net [--seed N] [--out DIR]
//   edrl compare --edrl a/metrics.csv [b/metrics.csv ...] --drl c/metrics.csv [...]
//
// Exit status: 0 success, 1 runtime failure, 2 configuration or usage error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edrl/common.hpp"
#include "edrl/experiment.hpp"

namespace ex = edrl::experiment;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string mode;
    std::string checkpoint;
};

ex::RunConfig resolve(const Overrides& o, std::optional<ex::Mode> forced) {
    ex::RunConfig cfg = o.config.empty() ? ex::parse_config("{}", false) : ex::load_config(o.config, false);
    if (o.seed) cfg.edrl.seed = *o.seed;
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (!o.mode.empty()) cfg.mode = ex::parse_mode(o.mode);
    if (forced) cfg.mode = *forced;
    if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON configuration file")->envname("EDRL_CONFIG");
    cmd->add_option("--seed", o.seed, "master seed")->envname("EDRL_SEED");
    cmd->add_option("--out", o.out, "output directory")->envname("EDRL_OUT");
}

int compare(const std::vector<std::string>& edrl_files, const std::vector<std::string>& drl_files,
            const std::string& metric) {
    if (edrl_files.size() != drl_files.size())
        throw edrl::ConfigError("--edrl and --drl need the same number of files", "compare");
    std::vector<double> ratios;
    for (std::size_t i = 0; i < edrl_files.size(); ++i) {
        const auto e = ex::read_metrics(edrl_files[i]);
        const auto d = ex::read_metrics(drl_files[i]);
        const auto c = ex::compare_runs(e, d, metric);
        std::printf("%s vs %s: edrl %.6g, drl %.6g, ratio %+.4f\n", edrl_files[i].c_str(), drl_files[i].c_str(),
                    c.edrl_final, c.drl_final, c.ratio);
        if (c.warning) std::fprintf(stderr, "warning: %s\n", c.warning->c_str());
        ratios.push_back(c.ratio);
    }
    if (ratios.size() > 1) {
        const auto s = ex::summarize(ratios);
        std::printf("ratio median %+.4f, IQR [%+.4f, %+.4f] over %zu runs\n", s.median, s.q1, s.q3, ratios.size());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evolutionary deep RL for RAN slicing"};
    app.require_subcommand(1);

    Overrides run_opts;
    auto* run_cmd = app.add_subcommand("run", "train with the hybrid or the baseline learner");
    add_common(run_cmd, run_opts);
    run_cmd->add_option("--mode", run_opts.mode, "edrl, drl or eval-only")->envname("EDRL_MODE");
    run_cmd->add_option("--checkpoint", run_opts.checkpoint, "checkpoint for eval-only mode");

    Overrides eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved actor without training");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "actor.net or agent.ckpt")->required();

    std::vector<std::string> edrl_files, drl_files;
    std::string metric = "return";
    auto* cmp_cmd = app.add_subcommand("compare", "final-window comparison of two metrics files");
    cmp_cmd->add_option("--edrl", edrl_files, "hybrid run metrics.csv")->required();
    cmp_cmd->add_option("--drl", drl_files, "baseline run metrics.csv")->required();
    cmp_cmd->add_option("--metric", metric, "metric to compare");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*cmp_cmd) return compare(edrl_files, drl_files, metric);
        const bool is_eval = static_cast<bool>(*eval_cmd);
        const auto cfg = is_eval ? resolve(eval_opts, ex::Mode::eval_only) : resolve(run_opts, std::nullopt);
        ex::run(cfg, &std::cerr);
        std::cerr << "wrote " << cfg.output_dir << "/metrics.csv\n";
        return 0;
    } catch (const edrl::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
