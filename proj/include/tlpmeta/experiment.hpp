#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlpmeta/config.hpp"
#include "tlpmeta/data_store.hpp"
#include "tlpmeta/finetune_eval.hpp"
#include "tlpmeta/io.hpp"
#include "tlpmeta/meta.hpp"

namespace tlpmeta {

enum class RunStage { All, Train, Eval };

constexpr std::size_t kExternalTrainSize = 16;  // generated but never read

inline DatasetStore build_store(const ExperimentConfig& cfg) {
    std::uint64_t data_seed = substream_seed(cfg.seed, "data");
    DatasetStore store(cfg.grid, cfg.gen, data_seed);
    for (const std::string& lang : cfg.external_languages) {
        for (std::size_t c = 0; c < cfg.grid.languages.size(); ++c)
            if (cfg.grid.languages[c] == lang)
                throw std::invalid_argument("external language '" + lang + "' is in the grid");
        for (const TaskId& task : cfg.grid.tasks)
            store.add(task.name + "-" + lang,
                      generate_tlp_dataset(task, lang, kExternalTrainSize, cfg.gen, data_seed));
    }
    return store;
}

inline std::vector<std::string> selection_languages(const TlpGrid& grid,
                                                    const TlpSelection& sel) {
    std::vector<std::string> langs;
    for (std::size_t i : sel.resolved) {
        const std::string& l = grid.language_of(i);
        bool seen = false;
        for (const std::string& x : langs) seen |= x == l;
        if (!seen) langs.push_back(l);
    }
    return langs;
}

// Full experiment pipeline: generate data, train the configured model
// family, fine-tune and evaluate, write CSV artifacts plus a manifest.
inline int run_experiment(const ExperimentConfig& cfg, const std::string& config_text,
                          const std::string& out_dir, RunStage stage = RunStage::All) {
    namespace fs = std::filesystem;
    auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);
    auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    {
        std::ofstream cfg_out(path("config.cfg"), std::ios::binary);
        cfg_out << config_text;
    }

    RunManifest manifest;
    manifest.config_hash = hash_label(config_text);
    manifest.seed = cfg.seed;
    write_manifest(path("manifest.txt"), manifest);  // preliminary, finalized below

    DatasetStore store = build_store(cfg);
    Model model(cfg.model, cfg.grid.tasks);
    std::vector<ResultRow> results;
    std::vector<std::string> files = {"config.cfg", "manifest.txt", "results.csv"};

    switch (cfg.run_model) {
        case RunModel::Meta: {
            ParameterVector theta;
            if (stage == RunStage::Eval) {
                theta.values = load_param_values(path("params.bin"));
                theta.segments = model.segments();
                if (theta.size() != model.num_params())
                    throw std::runtime_error("params.bin does not match the configured model");
            } else {
                MetaResult mr = meta_train(model, cfg.grid, store, cfg.meta);
                theta = mr.theta;
                write_sampler_trace_csv(path("sampler_trace.csv"), mr.sampler_trace);
                write_inner_loss_csv(path("inner_loss.csv"), mr.inner_losses);
                save_params(path("params.bin"), path("params.seg"), theta);
            }
            files.insert(files.end(),
                         {"sampler_trace.csv", "inner_loss.csv", "params.bin", "params.seg"});
            if (stage == RunStage::Train) break;

            for (std::size_t i : cfg.meta.selection.resolved) {
                const TaskId& task = cfg.grid.task_of(i);
                std::string key = cfg.grid.tlp_name(i);
                ParameterVector final_params = theta;
                if (cfg.finetune_enabled) {
                    FinetuneResult fr = finetune(model, store, theta, key, task, cfg.finetune);
                    final_params = std::move(fr.params);
                }
                results.push_back(make_result_row(
                    "meta", cfg.meta.selection.name(), cfg.sampler_name(),
                    evaluate(model, store, final_params, key, task, Split::Dev)));
                results.push_back(make_result_row(
                    "meta", cfg.meta.selection.name(), cfg.sampler_name(),
                    evaluate(model, store, final_params, key, task, Split::Test)));
            }
            if (cfg.zero_shot) {
                std::vector<std::string> train_langs =
                    selection_languages(cfg.grid, cfg.meta.selection);
                for (const std::string& lang : cfg.external_languages) {
                    for (const TaskId& task : cfg.grid.tasks) {
                        EvalReport rep = zero_shot_eval(model, store, theta,
                                                        task.name + "-" + lang, task, lang,
                                                        train_langs);
                        results.push_back(make_result_row("meta", cfg.meta.selection.name(),
                                                          cfg.sampler_name(), rep));
                    }
                }
            }
            break;
        }
        case RunModel::Baseline: {
            for (std::size_t i : cfg.meta.selection.resolved) {
                const TaskId& task = cfg.grid.task_of(i);
                std::string key = cfg.grid.tlp_name(i);
                ParameterVector params = train_baseline(model, store, key, task, cfg.baseline);
                results.push_back(make_result_row(
                    "baseline", cfg.meta.selection.name(), "-",
                    evaluate(model, store, params, key, task, Split::Dev)));
                results.push_back(make_result_row(
                    "baseline", cfg.meta.selection.name(), "-",
                    evaluate(model, store, params, key, task, Split::Test)));
            }
            break;
        }
        case RunModel::Mtl: {
            ParameterVector params =
                train_mtl_baseline(model, cfg.grid, store, cfg.meta.selection, cfg.mtl);
            save_params(path("params.bin"), path("params.seg"), params);
            files.insert(files.end(), {"params.bin", "params.seg"});
            for (std::size_t i : cfg.meta.selection.resolved) {
                const TaskId& task = cfg.grid.task_of(i);
                std::string key = cfg.grid.tlp_name(i);
                results.push_back(make_result_row(
                    "mtl", cfg.meta.selection.name(), "-",
                    evaluate(model, store, params, key, task, Split::Dev)));
                results.push_back(make_result_row(
                    "mtl", cfg.meta.selection.name(), "-",
                    evaluate(model, store, params, key, task, Split::Test)));
            }
            break;
        }
    }

    write_results_csv(path("results.csv"), results);

    // zero-shot purity audit: external train splits must never be read
    for (const std::string& lang : cfg.external_languages)
        for (const TaskId& task : cfg.grid.tasks)
            if (store.read_count(task.name + "-" + lang, Split::Train) != 0)
                throw std::logic_error("audit failure: external train split was read: " +
                                       task.name + "-" + lang);

    manifest.status = "complete";
    manifest.files = files;
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(path("manifest.txt"), manifest);
    return 0;
}

struct TauTableRow {
    std::string tlp;
    double tau = 1.0;
    double prob = 0.0;
};

// One row per (TLP, tau) with the temperature sampling probability.
inline std::vector<TauTableRow> export_tau_table(const TlpGrid& grid,
                                                 const std::vector<double>& taus) {
    std::vector<double> q = grid.fractions();
    std::vector<TauTableRow> rows;
    for (double tau : taus) {
        std::vector<double> p = temperature_probs(q, tau);
        for (std::size_t i = 0; i < p.size(); ++i)
            rows.push_back({grid.tlp_name(i), tau, p[i]});
    }
    return rows;
}

inline void write_tau_table_csv(std::ostream& out, const std::vector<TauTableRow>& rows) {
    out << "# schema=" << kCsvSchemaVersion << "\n";
    out << "tlp,tau,prob\n";
    for (const TauTableRow& r : rows) {
        out << r.tlp << ',';
        if (std::isinf(r.tau))
            out << "inf";
        else
            out << format_value(r.tau);
        out << ',' << format_value(r.prob) << '\n';
    }
}

struct DeltaRow {
    std::string model, selection, sampler, tlp, metric;
    double delta = 0.0;
};

// Per-TLP deltas of each model against the best baseline-family value,
// mirroring the delta-table presentation. When no baseline or MTL rows
// exist, the first run directory serves as the reference.
inline std::vector<DeltaRow> compare_runs(const std::vector<std::string>& run_dirs) {
    namespace fs = std::filesystem;
    if (run_dirs.empty()) throw std::invalid_argument("compare_runs: no run directories");

    struct Tagged {
        ResultRow row;
        std::size_t dir = 0;
    };
    std::vector<Tagged> rows;
    for (std::size_t d = 0; d < run_dirs.size(); ++d)
        for (ResultRow& r : read_results_csv((fs::path(run_dirs[d]) / "results.csv").string()))
            rows.push_back({std::move(r), d});

    // comparison uses non-zero-shot test rows; falls back to dev rows
    bool has_test = false;
    for (const Tagged& t : rows) has_test |= t.row.split == "test" && !t.row.zero_shot;
    std::string split = has_test ? "test" : "dev";
    auto in_scope = [&](const ResultRow& r) { return r.split == split && !r.zero_shot; };
    auto is_baseline = [](const ResultRow& r) { return r.model == "baseline" || r.model == "mtl"; };

    bool any_baseline = false;
    for (const Tagged& t : rows) any_baseline |= in_scope(t.row) && is_baseline(t.row);

    std::map<std::string, double> reference;
    for (const Tagged& t : rows) {
        if (!in_scope(t.row)) continue;
        bool is_ref = any_baseline ? is_baseline(t.row) : t.dir == 0;
        if (!is_ref) continue;
        auto it = reference.find(t.row.tlp);
        if (it == reference.end() || t.row.value > it->second) reference[t.row.tlp] = t.row.value;
    }

    std::vector<DeltaRow> deltas;
    bool single_dir = run_dirs.size() == 1;
    for (const Tagged& t : rows) {
        if (!in_scope(t.row)) continue;
        bool emit = any_baseline ? !is_baseline(t.row) : (single_dir || t.dir > 0);
        if (!emit) continue;
        auto it = reference.find(t.row.tlp);
        if (it == reference.end())
            throw std::runtime_error("compare_runs: mismatched grids, no reference for TLP " +
                                     t.row.tlp);
        deltas.push_back({t.row.model, t.row.selection, t.row.sampler, t.row.tlp, t.row.metric,
                          t.row.value - it->second});
    }
    return deltas;
}

inline void write_delta_csv(std::ostream& out, const std::vector<DeltaRow>& rows) {
    out << "# schema=" << kCsvSchemaVersion << "\n";
    out << "model,selection,sampler,tlp,metric,delta\n";
    for (const DeltaRow& r : rows)
        out << r.model << ',' << r.selection << ',' << r.sampler << ',' << r.tlp << ',' << r.metric
            << ',' << format_value(r.delta) << '\n';
}

}  // namespace tlpmeta
