#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlpmeta/grid.hpp"
#include "tlpmeta/model.hpp"
#include "tlpmeta/rng.hpp"
#include "tlpmeta/synth.hpp"

namespace tlpmeta {

enum class Split { Train, Dev, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
    }
    return "?";
}

// Owns every TLP dataset (grid cells plus external-language TLPs) and
// counts example reads per (tlp, split). The counters back the audit
// that zero-shot evaluation never touches external train data and that
// per-TLP baselines never read other TLPs.
class DatasetStore {
public:
    DatasetStore() = default;

    DatasetStore(const TlpGrid& grid, const GeneratorSpec& spec, std::uint64_t data_seed) {
        for (const TlpId& t : grid.tlps) {
            const TaskId& task = grid.tasks[t.task];
            const std::string& lang = grid.languages[t.language];
            add(task.name + "-" + lang,
                generate_tlp_dataset(task, lang, grid.sizes[t.task][t.language], spec, data_seed));
        }
    }

    void add(const std::string& key, TlpDataset ds) {
        if (data_.count(key)) throw std::invalid_argument("DatasetStore: duplicate TLP " + key);
        data_.emplace(key, std::move(ds));
    }

    bool has(const std::string& key) const { return data_.count(key) != 0; }

    std::size_t train_size(const std::string& key) const { return dataset(key).train.size(); }

    // n draws with replacement from the train split; counted
    Batch sample_train_batch(const std::string& key, std::size_t n, Rng& rng) const {
        const std::vector<Example>& ex = dataset(key).train;
        if (ex.empty()) throw std::invalid_argument("DatasetStore: empty train split for " + key);
        Batch b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = &ex[rng.uniform_index(ex.size())];
        record(key, Split::Train, n);
        return b;
    }

    Batch sample_batch(const std::string& key, Split split, std::size_t n, Rng& rng) const {
        const std::vector<Example>& ex = split_of(dataset(key), split);
        if (ex.empty()) throw std::invalid_argument("DatasetStore: empty split for " + key);
        Batch b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = &ex[rng.uniform_index(ex.size())];
        record(key, split, n);
        return b;
    }

    // specific train examples by index (MTL shuffled-concatenation path); counted
    Batch train_subset(const std::string& key, const std::vector<std::size_t>& idxs) const {
        const std::vector<Example>& ex = dataset(key).train;
        Batch b(idxs.size());
        for (std::size_t i = 0; i < idxs.size(); ++i) b[i] = &ex.at(idxs[i]);
        record(key, Split::Train, idxs.size());
        return b;
    }

    // whole split as a batch; counted
    Batch full_split(const std::string& key, Split split) const {
        const std::vector<Example>& ex = split_of(dataset(key), split);
        Batch b(ex.size());
        for (std::size_t i = 0; i < ex.size(); ++i) b[i] = &ex[i];
        record(key, split, ex.size());
        return b;
    }

    std::size_t read_count(const std::string& key, Split split) const {
        std::lock_guard<std::mutex> lock(*mu_);
        auto it = counts_.find({key, split});
        return it == counts_.end() ? 0 : it->second;
    }

    void reset_counts() {
        std::lock_guard<std::mutex> lock(*mu_);
        counts_.clear();
    }

private:
    const TlpDataset& dataset(const std::string& key) const {
        auto it = data_.find(key);
        if (it == data_.end()) throw std::invalid_argument("DatasetStore: unknown TLP " + key);
        return it->second;
    }

    static const std::vector<Example>& split_of(const TlpDataset& ds, Split s) {
        switch (s) {
            case Split::Train: return ds.train;
            case Split::Dev: return ds.dev;
            case Split::Test: return ds.test;
        }
        throw std::logic_error("bad split");
    }

    void record(const std::string& key, Split split, std::size_t n) const {
        std::lock_guard<std::mutex> lock(*mu_);
        counts_[{key, split}] += n;
    }

    std::map<std::string, TlpDataset> data_;
    // behind a pointer so the store stays movable
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
    mutable std::map<std::pair<std::string, Split>, std::size_t> counts_;
};

}  // namespace tlpmeta
