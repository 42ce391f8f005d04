#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "imix/error.hpp"
#include "imix/rng.hpp"
#include "imix/tensor.hpp"
#include "imix/types.hpp"

namespace imix {

// One aligned feature table: n_samples rows by dim columns, row-major.
struct ModalityTable {
    std::string name;
    std::size_t dim = 0;
    std::vector<double> data;

    double at(std::size_t row, std::size_t col) const { return data[row * dim + col]; }
    std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
};

// Aligned per-modality feature tables plus targets. Targets are stored as
// one row per sample: class index (multiclass), 0/1 per class
// (multilabel) or a single real value (regression). Interaction tags are
// present only for synthetic mixtures.
struct MultimodalDataset {
    std::string name = "dataset";
    TaskKind task = TaskKind::Multiclass;
    std::size_t num_classes = 2;
    std::vector<ModalityTable> modalities;
    std::vector<double> targets;  // n_samples x target_dim, row-major
    std::vector<ExpertId> tags;   // empty unless synthetic mixture

    std::size_t n_samples() const {
        return modalities.empty() ? 0 : modalities[0].rows();
    }

    std::size_t target_dim() const {
        switch (task) {
            case TaskKind::Multilabel: return num_classes;
            default: return 1;
        }
    }

    std::vector<std::size_t> input_dims() const {
        std::vector<std::size_t> d;
        for (const auto& m : modalities) d.push_back(m.dim);
        return d;
    }

    void validate() const {
        const std::size_t n = n_samples();
        for (const auto& m : modalities)
            if (m.rows() != n)
                throw ContractError("dataset: modality " + m.name + " has " +
                                    std::to_string(m.rows()) + " rows, expected " + std::to_string(n));
        if (targets.size() != n * target_dim())
            throw ContractError("dataset: targets length mismatch");
        if (!tags.empty() && tags.size() != n)
            throw ContractError("dataset: tags length mismatch");
    }

    // Features of modality m for a row subset, as a [B x dim] tensor.
    Tensor batch_features(std::size_t m, const std::vector<std::size_t>& rows) const {
        const ModalityTable& t = modalities[m];
        Tensor out(rows.size(), t.dim);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < t.dim; ++c) out.at(r, c) = t.at(rows[r], c);
        return out;
    }

    // Targets for a row subset in task-loss form: one-hot (multiclass),
    // 0/1 matrix (multilabel) or a [B x 1] column (regression).
    Tensor batch_targets(const std::vector<std::size_t>& rows) const {
        if (task == TaskKind::Multiclass) {
            Tensor out(rows.size(), num_classes, 0.0);
            for (std::size_t r = 0; r < rows.size(); ++r)
                out.at(r, static_cast<std::size_t>(targets[rows[r]])) = 1.0;
            return out;
        }
        const std::size_t d = target_dim();
        Tensor out(rows.size(), d);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < d; ++c) out.at(r, c) = targets[rows[r] * d + c];
        return out;
    }
};

enum class GenKind { Unique, Redundant, SynergyXor, Mixture };

inline std::string to_string(GenKind k) {
    switch (k) {
        case GenKind::Unique: return "unique";
        case GenKind::Redundant: return "redundant";
        case GenKind::SynergyXor: return "synergy-xor";
        case GenKind::Mixture: return "mixture";
    }
    return "?";
}

struct GenSpec {
    GenKind kind = GenKind::SynergyXor;
    std::size_t n_samples = 2000;
    std::vector<std::size_t> dims = {8, 8};
    double noise_sigma = 0.2;
    std::uint64_t seed = 0;
    int unique_k = 1;                   // for kind == Unique
    std::vector<double> proportions;    // for kind == Mixture; order uni1..unin, syn, red

    void validate() const {
        if (n_samples == 0) throw ConfigError("gen: n_samples must be >= 1");
        if (dims.size() < 2) throw ConfigError("gen: need >= 2 modalities");
        for (std::size_t d : dims)
            if (d == 0) throw ConfigError("gen: dims must be >= 1");
        if (noise_sigma < 0.0) throw ConfigError("gen: noise_sigma must be >= 0");
        if (kind == GenKind::Unique &&
            (unique_k < 1 || unique_k > static_cast<int>(dims.size())))
            throw ConfigError("gen: unique_k out of range");
        if (kind == GenKind::Mixture) {
            if (proportions.size() != dims.size() + 2)
                throw ConfigError("gen: mixture needs " + std::to_string(dims.size() + 2) +
                                  " proportions (uni per modality, syn, red)");
            double s = 0.0;
            for (double p : proportions) {
                if (p < 0.0) throw ConfigError("gen: proportions must be >= 0");
                s += p;
            }
            if (std::abs(s - 1.0) > 1e-9) throw ConfigError("gen: proportions must sum to 1");
        }
    }
};

namespace detail {

// Latent factors of one sample: one bit per modality plus the label.
// Informative bit goes to the first coordinate; the rest is unit noise.
inline void emit_sample(const GenSpec& spec, const ExpertId& tag, Rng& rng,
                        std::vector<ModalityTable>& mods, std::vector<double>& targets) {
    const std::size_t n = spec.dims.size();
    std::vector<double> bits(n, 0.0);  // per-modality informative value, 0 = pure noise
    double label = 0.0;
    switch (tag.kind) {
        case ExpertKind::Uniqueness: {
            const double z = rng.below(2) == 0 ? -1.0 : 1.0;
            bits[static_cast<std::size_t>(tag.modality) - 1] = z;
            label = z > 0.0 ? 1.0 : 0.0;
            break;
        }
        case ExpertKind::Redundancy: {
            const double z = rng.below(2) == 0 ? -1.0 : 1.0;
            for (auto& b : bits) b = z;
            label = z > 0.0 ? 1.0 : 0.0;
            break;
        }
        case ExpertKind::Synergy: {
            int parity = 0;
            for (auto& b : bits) {
                b = rng.below(2) == 0 ? -1.0 : 1.0;
                if (b > 0.0) parity ^= 1;
            }
            label = static_cast<double>(parity);
            break;
        }
    }
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t c = 0; c < spec.dims[m]; ++c) {
            double v;
            if (c == 0 && bits[m] != 0.0)
                v = bits[m] + spec.noise_sigma * rng.normal();
            else
                v = rng.normal();
            mods[m].data.push_back(v);
        }
    }
    targets.push_back(label);
}

inline ExpertId pick_component(const GenSpec& spec, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    const std::size_t n = spec.dims.size();
    for (std::size_t i = 0; i < spec.proportions.size(); ++i) {
        cum += spec.proportions[i];
        if (u < cum || i + 1 == spec.proportions.size()) {
            if (i < n) return ExpertId::uniqueness(static_cast<int>(i) + 1);
            if (i == n) return ExpertId::synergy();
            return ExpertId::redundancy();
        }
    }
    return ExpertId::redundancy();
}

}  // namespace detail

// Draws a dataset from the spec. Binary labels, sign of the latent
// factor(s); fixed seed gives a bit-identical dataset on any platform.
inline MultimodalDataset generate(const GenSpec& spec) {
    spec.validate();
    Rng rng = make_stream(spec.seed, RngStream::Data);
    MultimodalDataset ds;
    ds.task = TaskKind::Multiclass;
    ds.num_classes = 2;
    ds.name = to_string(spec.kind);
    for (std::size_t m = 0; m < spec.dims.size(); ++m) {
        ModalityTable t;
        t.name = "m" + std::to_string(m + 1);
        t.dim = spec.dims[m];
        t.data.reserve(spec.n_samples * t.dim);
        ds.modalities.push_back(std::move(t));
    }
    for (std::size_t s = 0; s < spec.n_samples; ++s) {
        ExpertId tag;
        switch (spec.kind) {
            case GenKind::Unique: tag = ExpertId::uniqueness(spec.unique_k); break;
            case GenKind::Redundant: tag = ExpertId::redundancy(); break;
            case GenKind::SynergyXor: tag = ExpertId::synergy(); break;
            case GenKind::Mixture: tag = detail::pick_component(spec, rng); break;
        }
        detail::emit_sample(spec, tag, rng, ds.modalities, ds.targets);
        if (spec.kind == GenKind::Mixture) ds.tags.push_back(tag);
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------
// Dataset directory I/O.
// Layout: manifest.json, one CSV per modality, labels.csv, tags.csv?
// Numbers are written with 17 significant digits so round-trips are
// value-exact for finite doubles.
// ---------------------------------------------------------------------

namespace detail {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::vector<std::vector<double>> read_csv(const std::filesystem::path& path,
                                                 std::size_t expected_cols,
                                                 const std::string& what) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + what + " file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(what + " file is empty: " + path.string());
    const std::size_t header_cols = split_csv_line(line).size();
    if (expected_cols != 0 && header_cols != expected_cols)
        throw IoError(what + " file " + path.string() + " has " + std::to_string(header_cols) +
                      " columns, manifest declares " + std::to_string(expected_cols));
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header_cols)
            throw IoError(what + " file " + path.string() + ": ragged row " +
                          std::to_string(rows.size() + 1));
        std::vector<double> row;
        for (const auto& c : cells) {
            try {
                row.push_back(std::stod(c));
            } catch (const std::exception&) {
                throw IoError(what + " file " + path.string() + ": bad number '" + c + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

inline void write_dataset(const MultimodalDataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["name"] = ds.name;
    manifest["task_kind"] = to_string(ds.task);
    manifest["num_classes"] = ds.num_classes;
    manifest["labels_file"] = "labels.csv";
    for (const auto& m : ds.modalities) {
        manifest["modalities"].push_back(
            {{"name", m.name}, {"file", m.name + ".csv"}, {"dim", m.dim}});
        std::ofstream out(dir / (m.name + ".csv"));
        for (std::size_t c = 0; c < m.dim; ++c) out << (c ? "," : "") << "f" << c;
        out << "\n";
        for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.dim; ++c)
                out << (c ? "," : "") << detail::fmt17(m.at(r, c));
            out << "\n";
        }
    }
    {
        std::ofstream out(dir / "labels.csv");
        const std::size_t d = ds.target_dim();
        if (ds.task == TaskKind::Multiclass) out << "label\n";
        else if (ds.task == TaskKind::Regression) out << "target\n";
        else {
            for (std::size_t c = 0; c < d; ++c) out << (c ? "," : "") << "c" << c;
            out << "\n";
        }
        for (std::size_t r = 0; r < ds.n_samples(); ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                const double v = ds.targets[r * d + c];
                out << (c ? "," : "");
                if (ds.task == TaskKind::Regression) out << detail::fmt17(v);
                else out << static_cast<long long>(v);
            }
            out << "\n";
        }
    }
    if (!ds.tags.empty()) {
        manifest["tags_file"] = "tags.csv";
        std::ofstream out(dir / "tags.csv");
        out << "tag\n";
        for (const auto& t : ds.tags) out << t.label() << "\n";
    }
    std::ofstream mout(dir / "manifest.json");
    mout << manifest.dump(2) << "\n";
}

inline MultimodalDataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream min(dir / "manifest.json");
    if (!min) throw IoError("missing manifest.json in " + dir.string());
    nlohmann::json manifest;
    try {
        min >> manifest;
    } catch (const std::exception& e) {
        throw IoError("bad manifest.json in " + dir.string() + ": " + e.what());
    }
    MultimodalDataset ds;
    ds.name = manifest.value("name", "dataset");
    ds.task = task_kind_from_string(manifest.at("task_kind").get<std::string>());
    ds.num_classes = manifest.at("num_classes").get<std::size_t>();
    for (const auto& jm : manifest.at("modalities")) {
        ModalityTable t;
        t.name = jm.at("name").get<std::string>();
        t.dim = jm.at("dim").get<std::size_t>();
        auto rows = detail::read_csv(dir / jm.at("file").get<std::string>(), t.dim,
                                     "modality " + t.name);
        for (const auto& r : rows) t.data.insert(t.data.end(), r.begin(), r.end());
        ds.modalities.push_back(std::move(t));
    }
    if (ds.modalities.empty()) throw IoError("manifest declares no modalities: " + dir.string());
    {
        auto rows = detail::read_csv(dir / manifest.at("labels_file").get<std::string>(),
                                     ds.target_dim(), "labels");
        for (const auto& r : rows) ds.targets.insert(ds.targets.end(), r.begin(), r.end());
    }
    if (manifest.contains("tags_file")) {
        std::ifstream in(dir / manifest.at("tags_file").get<std::string>());
        if (!in) throw IoError("missing tags file in " + dir.string());
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            ds.tags.push_back(expert_id_from_label(line));
        }
    }
    ds.validate();
    return ds;
}

}  // namespace imix
