#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlpmeta/finetune_eval.hpp"
#include "tlpmeta/grid.hpp"
#include "tlpmeta/meta.hpp"
#include "tlpmeta/model.hpp"
#include "tlpmeta/sampling.hpp"
#include "tlpmeta/synth.hpp"

namespace tlpmeta {

enum class RunModel { Meta, Baseline, Mtl };

// Everything one experiment run needs, assembled from a flat key=value
// config file. Unknown keys are rejected.
struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::size_t threads = 1;
    std::string out_dir = "out";
    RunModel run_model = RunModel::Meta;

    TlpGrid grid = default_grid();
    GeneratorSpec gen;
    ModelSpec model;

    // meta training
    MetaConfig meta;  // selection/strategy filled by resolve()
    SelectionMode select_mode = SelectionMode::All;
    std::string select_anchor;
    SamplingStrategy strategy = SamplingStrategy::Temperature;
    double tau = 5.0;
    double psi_lr = 0.1;
    char mdds_setting = 'd';
    std::string target_task = "QA";
    std::string target_language = "en";

    bool finetune_enabled = true;
    FinetuneConfig finetune;
    BaselineConfig baseline;
    MtlConfig mtl;

    bool zero_shot = true;
    std::vector<std::string> external_languages = {"xa", "xb", "xc"};

    // fills meta.selection / strategy / dev binding from the fields above
    void resolve() {
        model.d_in = gen.dim;  // the encoder consumes generated tokens directly
        meta.selection = select_tlps(grid, select_mode, select_anchor);
        meta.strategy = strategy;
        meta.tau = tau;
        meta.psi_lr = psi_lr;
        meta.seed = seed;
        meta.threads = threads;
        meta.dev_tlps.clear();
        if (strategy == SamplingStrategy::MultiDds) {
            MddsSetting s = resolve_mdds_setting(mdds_setting, grid, target_task, target_language);
            meta.selection = s.train;
            meta.dev_tlps = s.dev_tlps;
        }
        finetune.seed = seed;
        baseline.seed = seed;
        mtl.seed = seed;
    }

    std::string sampler_name() const {
        if (strategy == SamplingStrategy::Temperature) {
            std::ostringstream os;
            os << "temp-";
            if (std::isinf(tau))
                os << "inf";
            else
                os << tau;
            return os.str();
        }
        switch (mdds_setting) {
            case 'c': return "mdds-lang";
            case 'd': return "mdds-task";
            default: return "mdds";
        }
    }
};

namespace detail {

struct KvFile {
    std::map<std::string, std::string> entries;
    std::vector<std::string> order;

    void set(const std::string& k, const std::string& v) {
        if (!entries.count(k)) order.push_back(k);
        entries[k] = v;
    }
};

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline KvFile parse_kv_text(std::istream& in) {
    KvFile kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value, got '" + t + "'");
        kv.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return kv;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "infinity") return kInfiniteTau;
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': bad number '" + v + "'");
    }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return u;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': bad integer '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': bad bool '" + v + "'");
}

inline TaskId parse_task_decl(const std::string& decl) {
    // name:kind[:classes[:metric]]
    std::vector<std::string> parts;
    std::stringstream ss(decl);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() < 2) throw std::invalid_argument("grid.tasks: bad task '" + decl + "'");
    TaskId t;
    t.name = parts[0];
    if (parts[1] == "shallow") {
        t.kind = TaskKind::Shallow;
        t.target = TargetKind::TokenClasses;
    } else if (parts[1] == "deep") {
        t.kind = TaskKind::Deep;
        t.target = TargetKind::SequenceClass;
    } else if (parts[1] == "deep_value") {
        t.kind = TaskKind::Deep;
        t.target = TargetKind::SequenceValue;
    } else {
        throw std::invalid_argument("grid.tasks: unknown kind '" + parts[1] + "'");
    }
    if (parts.size() > 2) t.num_classes = static_cast<int>(parse_uint("grid.tasks", parts[2]));
    if (parts.size() > 3) {
        if (parts[3] == "f1")
            t.metric = MetricKind::F1;
        else if (parts[3] == "accuracy")
            t.metric = MetricKind::Accuracy;
        else
            throw std::invalid_argument("grid.tasks: unknown metric '" + parts[3] + "'");
    }
    return t;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(std::istream& in) {
    detail::KvFile kv = detail::parse_kv_text(in);
    ExperimentConfig cfg;

    // custom grid declaration, assembled after the scan
    std::vector<std::string> task_decls, lang_decls;
    std::map<std::pair<std::string, std::string>, std::size_t> cell_sizes;
    bool custom_grid = false;

    for (const std::string& key : kv.order) {
        const std::string& v = kv.entries.at(key);
        if (key == "seed") cfg.seed = detail::parse_uint(key, v);
        else if (key == "threads") cfg.threads = detail::parse_uint(key, v);
        else if (key == "out.dir") cfg.out_dir = v;
        else if (key == "run.model") {
            if (v == "meta") cfg.run_model = RunModel::Meta;
            else if (v == "baseline") cfg.run_model = RunModel::Baseline;
            else if (v == "mtl") cfg.run_model = RunModel::Mtl;
            else throw std::invalid_argument("config key 'run.model': unknown value '" + v + "'");
        } else if (key == "grid.preset") {
            if (v != "table1")
                throw std::invalid_argument("config key 'grid.preset': unknown preset '" + v + "'");
            cfg.grid = default_grid();
        } else if (key == "grid.tasks") {
            task_decls = detail::split_list(v);
            custom_grid = true;
        } else if (key == "grid.languages") {
            lang_decls = detail::split_list(v);
            custom_grid = true;
        } else if (key.rfind("grid.size.", 0) == 0) {
            std::string rest = key.substr(10);
            std::size_t dot = rest.find('.');
            if (dot == std::string::npos)
                throw std::invalid_argument("config key '" + key + "': expected grid.size.TASK.LANG");
            cell_sizes[{rest.substr(0, dot), rest.substr(dot + 1)}] = detail::parse_uint(key, v);
            custom_grid = true;
        } else if (key == "gen.dim") cfg.gen.dim = detail::parse_uint(key, v);
        else if (key == "gen.len_shallow") cfg.gen.len_shallow = detail::parse_uint(key, v);
        else if (key == "gen.len_deep") cfg.gen.len_deep = detail::parse_uint(key, v);
        else if (key == "gen.noise") cfg.gen.noise = detail::parse_double(key, v);
        else if (key == "gen.rotation") cfg.gen.rotation_strength = detail::parse_double(key, v);
        else if (key == "gen.shift") cfg.gen.shift_strength = detail::parse_double(key, v);
        else if (key == "gen.scale") cfg.gen.scale_strength = detail::parse_double(key, v);
        else if (key == "gen.dev_size") cfg.gen.dev_size = detail::parse_uint(key, v);
        else if (key == "gen.test_size") cfg.gen.test_size = detail::parse_uint(key, v);
        else if (key == "model.hidden1") cfg.model.hidden1 = detail::parse_uint(key, v);
        else if (key == "model.hidden2") cfg.model.hidden2 = detail::parse_uint(key, v);
        else if (key == "meta.m") cfg.meta.m = detail::parse_uint(key, v);
        else if (key == "meta.k") cfg.meta.k = detail::parse_uint(key, v);
        else if (key == "meta.beta") cfg.meta.beta = detail::parse_double(key, v);
        else if (key == "meta.epochs") cfg.meta.epochs = detail::parse_uint(key, v);
        else if (key == "meta.iterations_per_epoch")
            cfg.meta.iterations_per_epoch = detail::parse_uint(key, v);
        else if (key == "meta.batch_size") cfg.meta.batch_size = detail::parse_uint(key, v);
        else if (key == "meta.inner_lr") cfg.meta.inner.lr = detail::parse_double(key, v);
        else if (key == "meta.weight_decay")
            cfg.meta.inner.weight_decay = detail::parse_double(key, v);
        else if (key == "meta.dropout") cfg.meta.inner.dropout = detail::parse_double(key, v);
        else if (key == "meta.inner_opt") {
            if (v == "adamw") cfg.meta.inner.kind = InnerOptKind::AdamW;
            else if (v == "sgd") cfg.meta.inner.kind = InnerOptKind::Sgd;
            else throw std::invalid_argument("config key 'meta.inner_opt': unknown value '" + v + "'");
        } else if (key == "select.mode") {
            if (v == "all") cfg.select_mode = SelectionMode::All;
            else if (v == "task_limited") cfg.select_mode = SelectionMode::TaskLimited;
            else if (v == "lang_limited") cfg.select_mode = SelectionMode::LangLimited;
            else throw std::invalid_argument("config key 'select.mode': unknown value '" + v + "'");
        } else if (key == "select.anchor") cfg.select_anchor = v;
        else if (key == "sampler.strategy") {
            if (v == "temperature") cfg.strategy = SamplingStrategy::Temperature;
            else if (v == "mdds") cfg.strategy = SamplingStrategy::MultiDds;
            else throw std::invalid_argument("config key 'sampler.strategy': unknown value '" + v + "'");
        } else if (key == "sampler.tau") cfg.tau = detail::parse_double(key, v);
        else if (key == "sampler.psi_lr") cfg.psi_lr = detail::parse_double(key, v);
        else if (key == "sampler.mdds_setting") {
            if (v.size() != 1 || v[0] < 'a' || v[0] > 'd')
                throw std::invalid_argument("config key 'sampler.mdds_setting': expected a/b/c/d");
            cfg.mdds_setting = v[0];
        } else if (key == "sampler.target_task") cfg.target_task = v;
        else if (key == "sampler.target_language") cfg.target_language = v;
        else if (key == "finetune.enabled") cfg.finetune_enabled = detail::parse_bool(key, v);
        else if (key == "finetune.lr_large") cfg.finetune.lr_large = detail::parse_double(key, v);
        else if (key == "finetune.lr_small") cfg.finetune.lr_small = detail::parse_double(key, v);
        else if (key == "finetune.epochs_shallow")
            cfg.finetune.epochs_shallow = detail::parse_uint(key, v);
        else if (key == "finetune.epochs_deep") cfg.finetune.epochs_deep = detail::parse_uint(key, v);
        else if (key == "finetune.batch_size") cfg.finetune.batch_size = detail::parse_uint(key, v);
        else if (key == "baseline.lr") cfg.baseline.lr = detail::parse_double(key, v);
        else if (key == "baseline.epochs_shallow")
            cfg.baseline.epochs_shallow = detail::parse_uint(key, v);
        else if (key == "baseline.epochs_deep")
            cfg.baseline.epochs_deep = detail::parse_uint(key, v);
        else if (key == "baseline.batch_size") cfg.baseline.batch_size = detail::parse_uint(key, v);
        else if (key == "mtl.lr") cfg.mtl.lr = detail::parse_double(key, v);
        else if (key == "mtl.epochs") cfg.mtl.epochs = detail::parse_uint(key, v);
        else if (key == "mtl.batch_size") cfg.mtl.batch_size = detail::parse_uint(key, v);
        else if (key == "eval.zero_shot") cfg.zero_shot = detail::parse_bool(key, v);
        else if (key == "eval.external_languages")
            cfg.external_languages = detail::split_list(v);
        else throw std::invalid_argument("unknown config key '" + key + "'");
    }

    if (custom_grid) {
        if (task_decls.empty() || lang_decls.empty())
            throw std::invalid_argument("custom grid needs grid.tasks and grid.languages");
        std::vector<TaskId> tasks;
        for (const std::string& d : task_decls) tasks.push_back(detail::parse_task_decl(d));
        std::vector<std::vector<bool>> avail(tasks.size(),
                                             std::vector<bool>(lang_decls.size(), false));
        std::vector<std::vector<std::size_t>> sizes(tasks.size(),
                                                    std::vector<std::size_t>(lang_decls.size(), 0));
        for (const auto& [cell, size] : cell_sizes) {
            std::size_t r = tasks.size(), c = lang_decls.size();
            for (std::size_t i = 0; i < tasks.size(); ++i)
                if (tasks[i].name == cell.first) r = i;
            for (std::size_t i = 0; i < lang_decls.size(); ++i)
                if (lang_decls[i] == cell.second) c = i;
            if (r == tasks.size() || c == lang_decls.size())
                throw std::invalid_argument("grid.size." + cell.first + "." + cell.second +
                                            ": unknown task or language");
            avail[r][c] = true;
            sizes[r][c] = size;
        }
        cfg.grid = build_grid(std::move(tasks), lang_decls, avail, sizes);
    }

    cfg.resolve();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file: " + path);
    return parse_experiment_config(in);
}

}  // namespace tlpmeta
