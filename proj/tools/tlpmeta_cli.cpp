// Experiment runner for the task-language-pair meta-learning library.
//
// Verbs:
//   run         train + fine-tune + evaluate per the config; writes CSVs
//   eval        evaluation-only replay of a finished run directory
//   export-tau  dataset proportions per TLP for a list of temperatures
//   compare     per-TLP metric deltas of models vs the best baseline

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "tlpmeta/experiment.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tlpmeta: meta-learning over a grid of task-language pairs"};
    app.require_subcommand(1);

    std::string config_path, out_dir, stage = "all";
    std::uint64_t seed_override = 0;
    bool has_seed = false;
    std::size_t threads = 0;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        cmd->add_option("--config", config_path, "experiment config file (key=value)")
            ->required(config_required);
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option_function<std::uint64_t>(
               "--seed", [&](std::uint64_t s) { seed_override = s; has_seed = true; },
               "master seed override");
        cmd->add_option("--threads", threads, "inner-loop thread count override");
    };

    CLI::App* run = app.add_subcommand("run", "execute a full experiment");
    add_common(run, true);
    run->add_option("--stage", stage, "all | train | eval")
        ->check(CLI::IsMember({"all", "train", "eval"}));

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluation-only replay of a run directory");
    std::string run_dir;
    eval_cmd->add_option("run_dir", run_dir, "finished run directory")->required();

    CLI::App* tau_cmd = app.add_subcommand("export-tau", "dataset proportion per TLP and tau");
    std::vector<std::string> tau_list = {"1", "2", "5", "inf"};
    std::string tau_out;
    tau_cmd->add_option("--config", config_path, "config supplying the grid");
    tau_cmd->add_option("--tau", tau_list, "temperatures (number or 'inf')");
    tau_cmd->add_option("--out", tau_out, "output CSV path (default stdout)");

    CLI::App* cmp_cmd = app.add_subcommand("compare", "delta table across run directories");
    std::vector<std::string> run_dirs;
    std::string cmp_out;
    cmp_cmd->add_option("run_dirs", run_dirs, "run directories with results.csv")->required();
    cmp_cmd->add_option("--out", cmp_out, "output CSV path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            std::string text = read_file(config_path);
            std::istringstream in(text);
            tlpmeta::ExperimentConfig cfg = tlpmeta::parse_experiment_config(in);
            if (has_seed) {
                cfg.seed = seed_override;
                cfg.resolve();
            }
            if (threads) {
                cfg.threads = threads;
                cfg.meta.threads = threads;
            }
            std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
            tlpmeta::RunStage rs = stage == "train" ? tlpmeta::RunStage::Train
                                   : stage == "eval" ? tlpmeta::RunStage::Eval
                                                     : tlpmeta::RunStage::All;
            return tlpmeta::run_experiment(cfg, text, dir, rs);
        }
        if (eval_cmd->parsed()) {
            std::string cfg_path = run_dir + "/config.cfg";
            std::string text = read_file(cfg_path);
            std::istringstream in(text);
            tlpmeta::ExperimentConfig cfg = tlpmeta::parse_experiment_config(in);
            return tlpmeta::run_experiment(cfg, text, run_dir, tlpmeta::RunStage::Eval);
        }
        if (tau_cmd->parsed()) {
            tlpmeta::TlpGrid grid = tlpmeta::default_grid();
            if (!config_path.empty()) grid = tlpmeta::load_experiment_config(config_path).grid;
            std::vector<double> taus;
            for (const std::string& t : tau_list)
                taus.push_back(t == "inf" ? tlpmeta::kInfiniteTau : std::stod(t));
            auto rows = tlpmeta::export_tau_table(grid, taus);
            if (tau_out.empty()) {
                tlpmeta::write_tau_table_csv(std::cout, rows);
            } else {
                std::ofstream out(tau_out, std::ios::binary);
                tlpmeta::write_tau_table_csv(out, rows);
            }
            return 0;
        }
        if (cmp_cmd->parsed()) {
            auto deltas = tlpmeta::compare_runs(run_dirs);
            if (cmp_out.empty()) {
                tlpmeta::write_delta_csv(std::cout, deltas);
            } else {
                std::ofstream out(cmp_out, std::ios::binary);
                tlpmeta::write_delta_csv(out, deltas);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
