#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "imix/error.hpp"
#include "imix/model.hpp"
#include "imix/types.hpp"

namespace imix {

inline nlohmann::json model_config_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["input_dims"] = cfg.input_dims;
    j["output_dim"] = cfg.output_dim;
    j["task_kind"] = to_string(cfg.task);
    j["hidden_dim"] = cfg.hidden_dim;
    j["num_layers_enc"] = cfg.num_layers_enc;
    j["num_layers_fus"] = cfg.num_layers_fus;
    j["num_layers_pred"] = cfg.num_layers_pred;
    j["num_heads"] = cfg.num_heads;
    j["fusion"] = cfg.fusion == FusionKind::Attention ? "attention" : "mlp";
    j["hidden_dim_rw"] = cfg.hidden_dim_rw;
    j["num_layer_rw"] = cfg.num_layer_rw;
    j["temperature_rw"] = cfg.temperature_rw;
    j["simple_weight"] = cfg.simple_weight;
    std::vector<std::string> experts;
    for (const auto& e : cfg.expert_roster()) experts.push_back(e.label());
    j["experts"] = experts;
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.input_dims = j.at("input_dims").get<std::vector<std::size_t>>();
    cfg.output_dim = j.at("output_dim").get<std::size_t>();
    cfg.task = task_kind_from_string(j.at("task_kind").get<std::string>());
    cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    cfg.num_layers_enc = j.at("num_layers_enc").get<std::size_t>();
    cfg.num_layers_fus = j.at("num_layers_fus").get<std::size_t>();
    cfg.num_layers_pred = j.at("num_layers_pred").get<std::size_t>();
    cfg.num_heads = j.at("num_heads").get<std::size_t>();
    cfg.fusion = fusion_kind_from_string(j.at("fusion").get<std::string>());
    cfg.hidden_dim_rw = j.at("hidden_dim_rw").get<std::size_t>();
    cfg.num_layer_rw = j.at("num_layer_rw").get<std::size_t>();
    cfg.temperature_rw = j.at("temperature_rw").get<double>();
    cfg.simple_weight = j.at("simple_weight").get<bool>();
    cfg.experts.clear();
    for (const auto& s : j.at("experts")) cfg.experts.push_back(expert_id_from_label(s));
    return cfg;
}

// Value-exact JSON snapshot of a trained model.
inline nlohmann::json checkpoint_json(const MoeModel& model) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = model_config_json(model.config());
    j["parameters"] = nlohmann::json::array();
    const ParamStore& ps = model.params();
    for (std::size_t i = 0; i < ps.count(); ++i) {
        const Tensor& v = ps.value(i);
        j["parameters"].push_back({{"name", ps.name(i)},
                                   {"shape", {v.rows(), v.cols()}},
                                   {"data", v.data()}});
    }
    return j;
}

inline void save_checkpoint(const MoeModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out << checkpoint_json(model).dump(2) << "\n";
}

inline MoeModel model_from_checkpoint_json(const nlohmann::json& j) {
    if (j.value("format_version", 0) != 1)
        throw IoError("checkpoint: unsupported format_version");
    MoeModel model = MoeModel::create(model_config_from_json(j.at("config")), /*seed=*/0);
    const auto& params = j.at("parameters");
    if (params.size() != model.params().count())
        throw IoError("checkpoint: expected " + std::to_string(model.params().count()) +
                      " parameter tensors, found " + std::to_string(params.size()));
    for (std::size_t i = 0; i < model.params().count(); ++i) {
        const auto& jp = params[i];
        Tensor& v = model.params().value(i);
        if (jp.at("name").get<std::string>() != model.params().name(i))
            throw IoError("checkpoint: parameter " + std::to_string(i) + " is '" +
                          jp.at("name").get<std::string>() + "', expected '" +
                          model.params().name(i) + "'");
        const auto shape = jp.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2 || shape[0] != v.rows() || shape[1] != v.cols())
            throw IoError("checkpoint: shape mismatch for " + model.params().name(i));
        const auto data = jp.at("data").get<std::vector<double>>();
        if (data.size() != v.size())
            throw IoError("checkpoint: data length mismatch for " + model.params().name(i));
        for (std::size_t k = 0; k < data.size(); ++k) v[k] = data[k];
    }
    return model;
}

inline MoeModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("bad checkpoint " + path.string() + ": " + e.what());
    }
    return model_from_checkpoint_json(j);
}

}  // namespace imix
