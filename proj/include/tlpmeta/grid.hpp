#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlpmeta {

enum class TaskKind { Shallow, Deep };

enum class MetricKind { Accuracy, F1 };

// Deep tasks predict one sequence-level target; it is either a class
// label (cross-entropy) or a real value (squared error).
enum class TargetKind { TokenClasses, SequenceClass, SequenceValue };

struct TaskId {
    std::string name;
    TaskKind kind = TaskKind::Shallow;
    int num_classes = 3;  // ignored for SequenceValue targets
    MetricKind metric = MetricKind::Accuracy;
    TargetKind target = TargetKind::TokenClasses;
};

using LanguageId = std::string;

struct TlpId {
    std::size_t task = 0;      // row in the grid
    std::size_t language = 0;  // column in the grid
    std::size_t index = 0;     // position in the linearized TLP list
};

// Availability matrix of task rows by language columns with per-cell
// training-set sizes. Missing cells are structurally absent: they get
// no TlpId and can never be sampled.
class TlpGrid {
public:
    std::vector<TaskId> tasks;
    std::vector<LanguageId> languages;
    std::vector<std::vector<bool>> available;       // [task][language]
    std::vector<std::vector<std::size_t>> sizes;    // [task][language], 0 where missing
    std::vector<TlpId> tlps;                        // row-major linearization

    std::size_t num_tlps() const { return tlps.size(); }

    std::size_t total_examples() const {
        std::size_t total = 0;
        for (const TlpId& t : tlps) total += sizes[t.task][t.language];
        return total;
    }

    std::size_t tlp_size(std::size_t i) const {
        const TlpId& t = at(i);
        return sizes[t.task][t.language];
    }

    const TlpId& at(std::size_t i) const {
        if (i >= tlps.size()) throw std::out_of_range("TlpGrid: bad TLP index");
        return tlps[i];
    }

    const TaskId& task_of(std::size_t i) const { return tasks[at(i).task]; }
    const LanguageId& language_of(std::size_t i) const { return languages[at(i).language]; }

    std::string tlp_name(std::size_t i) const {
        const TlpId& t = at(i);
        return tasks[t.task].name + "-" + languages[t.language];
    }

    // index of the TLP for (task, language), or npos if unavailable
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t find(const std::string& task, const std::string& language) const {
        for (const TlpId& t : tlps)
            if (tasks[t.task].name == task && languages[t.language] == language) return t.index;
        return npos;
    }

    std::size_t task_index(const std::string& name) const {
        for (std::size_t r = 0; r < tasks.size(); ++r)
            if (tasks[r].name == name) return r;
        throw std::invalid_argument("unknown task: " + name);
    }

    std::size_t language_index(const std::string& name) const {
        for (std::size_t c = 0; c < languages.size(); ++c)
            if (languages[c] == name) return c;
        throw std::invalid_argument("unknown language: " + name);
    }

    double dataset_fraction(std::size_t i) const {
        return static_cast<double>(tlp_size(i)) / static_cast<double>(total_examples());
    }

    std::vector<double> fractions() const {
        std::vector<double> q(tlps.size());
        for (std::size_t i = 0; i < tlps.size(); ++i) q[i] = dataset_fraction(i);
        return q;
    }
};

inline TlpGrid build_grid(std::vector<TaskId> tasks, std::vector<LanguageId> languages,
                          const std::vector<std::vector<bool>>& availability,
                          const std::vector<std::vector<std::size_t>>& sizes) {
    if (availability.size() != tasks.size() || sizes.size() != tasks.size())
        throw std::invalid_argument("build_grid: matrix row count != task count");
    for (std::size_t r = 0; r < tasks.size(); ++r)
        if (availability[r].size() != languages.size() || sizes[r].size() != languages.size())
            throw std::invalid_argument("build_grid: matrix column count != language count");

    for (std::size_t r = 0; r < tasks.size(); ++r)
        for (std::size_t s = r + 1; s < tasks.size(); ++s)
            if (tasks[r].name == tasks[s].name)
                throw std::invalid_argument("build_grid: duplicate task " + tasks[r].name);
    for (std::size_t c = 0; c < languages.size(); ++c)
        for (std::size_t d = c + 1; d < languages.size(); ++d)
            if (languages[c] == languages[d])
                throw std::invalid_argument("build_grid: duplicate language " + languages[c]);

    TlpGrid grid;
    grid.tasks = std::move(tasks);
    grid.languages = std::move(languages);
    grid.available = availability;
    grid.sizes.assign(grid.tasks.size(), std::vector<std::size_t>(grid.languages.size(), 0));

    for (std::size_t r = 0; r < grid.tasks.size(); ++r) {
        for (std::size_t c = 0; c < grid.languages.size(); ++c) {
            if (!availability[r][c]) continue;
            if (sizes[r][c] == 0)
                throw std::invalid_argument("build_grid: nonpositive size for available cell " +
                                            grid.tasks[r].name + "-" + grid.languages[c]);
            grid.sizes[r][c] = sizes[r][c];
            grid.tlps.push_back(TlpId{r, c, grid.tlps.size()});
        }
    }
    if (grid.tlps.empty()) throw std::invalid_argument("build_grid: zero available cells");
    return grid;
}

enum class SelectionMode { LangLimited, TaskLimited, All };

inline std::string selection_mode_name(SelectionMode m) {
    switch (m) {
        case SelectionMode::LangLimited: return "lang_limited";
        case SelectionMode::TaskLimited: return "task_limited";
        case SelectionMode::All: return "all";
    }
    return "?";
}

struct TlpSelection {
    SelectionMode mode = SelectionMode::All;
    std::string anchor;                   // task or language name, empty for All
    std::vector<std::size_t> resolved;    // TLP indices in grid linearization order

    std::string name() const {
        return anchor.empty() ? selection_mode_name(mode)
                              : selection_mode_name(mode) + "(" + anchor + ")";
    }
};

inline TlpSelection select_tlps(const TlpGrid& grid, SelectionMode mode,
                                const std::string& anchor = "") {
    TlpSelection sel;
    sel.mode = mode;
    sel.anchor = anchor;
    switch (mode) {
        case SelectionMode::All:
            for (const TlpId& t : grid.tlps) sel.resolved.push_back(t.index);
            break;
        case SelectionMode::TaskLimited: {
            std::size_t r = grid.task_index(anchor);
            for (const TlpId& t : grid.tlps)
                if (t.task == r) sel.resolved.push_back(t.index);
            break;
        }
        case SelectionMode::LangLimited: {
            std::size_t c = grid.language_index(anchor);
            for (const TlpId& t : grid.tlps)
                if (t.language == c) sel.resolved.push_back(t.index);
            break;
        }
    }
    if (sel.resolved.empty())
        throw std::invalid_argument("select_tlps: empty selection for " + sel.name());
    return sel;
}

// The default desk-scale grid: 5 tasks (2 shallow, 3 deep) by 6 languages
// with 6 unavailable cells, training sizes scaled down 1000x.
inline TlpGrid default_grid() {
    std::vector<TaskId> tasks = {
        {"NLI", TaskKind::Deep, 3, MetricKind::Accuracy, TargetKind::SequenceClass},
        {"QA", TaskKind::Deep, 2, MetricKind::Accuracy, TargetKind::SequenceClass},
        {"POS", TaskKind::Shallow, 4, MetricKind::Accuracy, TargetKind::TokenClasses},
        {"NER", TaskKind::Shallow, 3, MetricKind::Accuracy, TargetKind::TokenClasses},
        {"PA", TaskKind::Deep, 2, MetricKind::Accuracy, TargetKind::SequenceClass},
    };
    std::vector<LanguageId> langs = {"en", "hi", "es", "de", "fr", "zh"};
    const std::size_t X = 0;  // unavailable
    std::vector<std::vector<std::size_t>> sizes = {
        // en   hi   es   de   fr   zh
        {392, X, 392, 392, 392, X},   // NLI
        {88, 82, 82, 80, X, X},       // QA
        {21, 13, 28, 166, X, 8},      // POS
        {20, 5, 20, 20, 20, 20},      // NER
        {49, X, 49, 49, 49, 49},      // PA
    };
    std::vector<std::vector<bool>> avail(tasks.size(), std::vector<bool>(langs.size(), false));
    for (std::size_t r = 0; r < tasks.size(); ++r)
        for (std::size_t c = 0; c < langs.size(); ++c) avail[r][c] = sizes[r][c] != X;
    return build_grid(std::move(tasks), std::move(langs), avail, sizes);
}

}  // namespace tlpmeta
