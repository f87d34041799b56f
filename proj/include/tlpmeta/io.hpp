#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlpmeta/finetune_eval.hpp"
#include "tlpmeta/meta.hpp"
#include "tlpmeta/model.hpp"
#include "tlpmeta/rng.hpp"

namespace tlpmeta {

constexpr int kCsvSchemaVersion = 1;
constexpr const char* kCodeVersion = "tlpmeta 0.1.0";

// fixed-width float formatting so identical runs produce identical bytes
inline std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct ResultRow {
    std::string model;      // meta | baseline | mtl
    std::string selection;  // all / task_limited(QA) / ...
    std::string sampler;    // temp-5 / mdds-task / - for baselines
    std::string tlp;
    std::string split;
    std::string metric;  // accuracy | f1
    double value = 0.0;
    std::size_t examples = 0;
    bool zero_shot = false;
};

inline ResultRow make_result_row(const std::string& model, const std::string& selection,
                                 const std::string& sampler, const EvalReport& rep) {
    ResultRow row;
    row.model = model;
    row.selection = selection;
    row.sampler = sampler;
    row.tlp = rep.tlp;
    row.split = split_name(rep.split);
    row.metric = rep.metric == MetricKind::F1 ? "f1" : "accuracy";
    row.value = rep.value;
    row.examples = rep.examples;
    row.zero_shot = rep.zero_shot;
    return row;
}

inline void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# schema=" << kCsvSchemaVersion << "\n";
    out << "model,selection,sampler,tlp,split,metric,value,examples,zero_shot\n";
    for (const ResultRow& r : rows)
        out << r.model << ',' << r.selection << ',' << r.sampler << ',' << r.tlp << ',' << r.split
            << ',' << r.metric << ',' << format_value(r.value) << ',' << r.examples << ','
            << (r.zero_shot ? 1 : 0) << '\n';
}

inline std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<ResultRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // column header
            continue;
        }
        std::stringstream ss(line);
        std::string f;
        std::vector<std::string> fields;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 9) throw std::runtime_error(path + ": malformed row: " + line);
        ResultRow r;
        r.model = fields[0];
        r.selection = fields[1];
        r.sampler = fields[2];
        r.tlp = fields[3];
        r.split = fields[4];
        r.metric = fields[5];
        r.value = std::stod(fields[6]);
        r.examples = std::stoull(fields[7]);
        r.zero_shot = fields[8] == "1";
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void write_sampler_trace_csv(const std::string& path,
                                    const std::vector<SamplerTraceRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# schema=" << kCsvSchemaVersion << "\n";
    out << "iteration,tlp,psi,prob,reward\n";
    for (const SamplerTraceRow& r : rows)
        out << r.iteration << ',' << r.tlp << ',' << format_value(r.psi) << ','
            << format_value(r.prob) << ',' << format_value(r.reward) << '\n';
}

inline void write_inner_loss_csv(const std::string& path, const std::vector<InnerLossRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# schema=" << kCsvSchemaVersion << "\n";
    out << "iteration,slot,tlp,step,loss\n";
    for (const InnerLossRow& r : rows)
        out << r.iteration << ',' << r.slot << ',' << r.tlp << ',' << r.step << ','
            << format_value(r.loss) << '\n';
}

// parameter snapshot: flat little-endian doubles plus a text segment table
inline void save_params(const std::string& bin_path, const std::string& seg_path,
                        const ParameterVector& params) {
    static_assert(sizeof(double) == 8);
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + bin_path);
    for (double v : params.values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
        bin.write(bytes, 8);
    }
    std::ofstream seg(seg_path, std::ios::binary);
    if (!seg) throw std::runtime_error("cannot write " + seg_path);
    for (const Segment& s : *params.segments)
        seg << s.name << ' ' << s.offset << ' ' << s.size << '\n';
}

inline std::vector<double> load_param_values(const std::string& bin_path) {
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + bin_path);
    std::vector<double> values;
    char bytes[8];
    while (bin.read(bytes, 8)) {
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        values.push_back(v);
    }
    return values;
}

struct RunManifest {
    std::uint64_t config_hash = 0;
    std::string code_version = kCodeVersion;
    std::uint64_t seed = 0;
    std::string status = "running";
    double wall_clock_seconds = 0.0;
    std::vector<std::string> files;
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "schema=" << kCsvSchemaVersion << '\n';
    out << "config_hash=" << std::hex << m.config_hash << std::dec << '\n';
    out << "code_version=" << m.code_version << '\n';
    out << "seed=" << m.seed << '\n';
    out << "status=" << m.status << '\n';
    out << "wall_clock_seconds=" << format_value(m.wall_clock_seconds) << '\n';
    out << "files=";
    for (std::size_t i = 0; i < m.files.size(); ++i) out << (i ? "," : "") << m.files[i];
    out << '\n';
}

inline std::uint64_t hash_file_contents(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return hash_label(ss.str());
}

}  // namespace tlpmeta
