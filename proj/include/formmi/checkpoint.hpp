#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "formmi/errors.hpp"
#include "formmi/model.hpp"

namespace formmi {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    return nlohmann::json{{"embedding_dim", c.embedding_dim},
                          {"hidden_dim", c.hidden_dim},
                          {"layers", c.layers},
                          {"dropout", c.dropout},
                          {"conditional", c.conditional},
                          {"batch_size", c.batch_size},
                          {"max_epochs", c.max_epochs},
                          {"patience", c.patience},
                          {"init_scale", c.init_scale},
                          {"init_proj_scale", c.init_proj_scale},
                          {"learning_rate", c.optimizer.learning_rate},
                          {"beta1", c.optimizer.beta1},
                          {"beta2", c.optimizer.beta2},
                          {"eps", c.optimizer.eps},
                          {"weight_decay", c.optimizer.weight_decay},
                          {"init_proj_lr_scale", c.optimizer.init_proj_lr_scale}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.layers = j.at("layers").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.conditional = j.at("conditional").get<bool>();
    c.batch_size = j.value("batch_size", 32);
    c.max_epochs = j.value("max_epochs", 100);
    c.patience = j.value("patience", 5);
    c.init_scale = j.value("init_scale", 0.1);
    c.init_proj_scale = j.value("init_proj_scale", 0.01);
    c.optimizer.learning_rate = j.value("learning_rate", 1e-3);
    c.optimizer.beta1 = j.value("beta1", 0.9);
    c.optimizer.beta2 = j.value("beta2", 0.999);
    c.optimizer.eps = j.value("eps", 1e-8);
    c.optimizer.weight_decay = j.value("weight_decay", 0.01);
    c.optimizer.init_proj_lr_scale = j.value("init_proj_lr_scale", 1.0);
    return c;
}

inline nlohmann::json checkpoint_to_json(const TrainedModel& m) {
    nlohmann::json j;
    j["format"] = "formmi-checkpoint";
    j["version"] = kCheckpointVersion;
    j["alphabet_hash"] = m.alphabet_hash;
    j["concept_count"] = m.concept_count;
    j["fold_scheme"] = m.fold_scheme;
    j["fold_id"] = m.fold_id;
    j["seed"] = m.seed;
    j["validation_xent"] = m.validation_xent;
    j["config"] = model_config_to_json(m.config);
    j["shapes"] = {{"vocab", m.params.vocab},
                   {"embed_dim", m.params.embed_dim},
                   {"hidden_dim", m.params.hidden_dim},
                   {"num_layers", m.params.num_layers},
                   {"num_concepts", m.params.num_concepts}};
    nlohmann::json tensors = nlohmann::json::object();
    m.params.for_each_tensor([&](const std::string& name, const double* data, std::size_t n) {
        tensors[name] = std::vector<double>(data, data + n);
    });
    j["tensors"] = std::move(tensors);
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& s : m.training_curve) {
        curve.push_back({{"epoch", s.epoch},
                         {"train_loss_bits_per_word", s.train_loss_bits_per_word},
                         {"train_xent_bits_per_phone", s.train_xent_bits_per_phone},
                         {"validation_xent_bits_per_phone", s.validation_xent_bits_per_phone}});
    }
    j["training_curve"] = std::move(curve);
    return j;
}

inline TrainedModel checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "formmi-checkpoint") throw data_error("not a formmi checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
        throw data_error("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    }
    TrainedModel m;
    m.alphabet_hash = j.at("alphabet_hash").get<std::uint64_t>();
    m.concept_count = j.at("concept_count").get<int>();
    m.fold_scheme = j.at("fold_scheme").get<std::string>();
    m.fold_id = j.at("fold_id").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.validation_xent = j.at("validation_xent").get<double>();
    m.config = model_config_from_json(j.at("config"));
    const auto& sh = j.at("shapes");
    m.params = LstmParams::create(sh.at("vocab").get<int>(), sh.at("embed_dim").get<int>(), sh.at("hidden_dim").get<int>(),
                                  sh.at("num_layers").get<int>(), sh.at("num_concepts").get<int>());
    const auto& tensors = j.at("tensors");
    m.params.for_each_tensor([&](const std::string& name, double* data, std::size_t n) {
        const auto& arr = tensors.at(name);
        if (arr.size() != n) throw data_error("checkpoint tensor " + name + " has wrong size");
        for (std::size_t i = 0; i < n; ++i) data[i] = arr[i].get<double>();
    });
    for (const auto& s : j.value("training_curve", nlohmann::json::array())) {
        EpochStats es;
        es.epoch = s.at("epoch").get<int>();
        es.train_loss_bits_per_word = s.at("train_loss_bits_per_word").get<double>();
        es.train_xent_bits_per_phone = s.at("train_xent_bits_per_phone").get<double>();
        es.validation_xent_bits_per_phone = s.at("validation_xent_bits_per_phone").get<double>();
        m.training_curve.push_back(es);
    }
    return m;
}

inline void save_checkpoint(const TrainedModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write checkpoint to " + path);
    out << checkpoint_to_json(m).dump();
    out << '\n';
    if (!out) throw data_error("failed writing checkpoint to " + path);
}

inline TrainedModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read checkpoint from " + path);
    nlohmann::json j;
    in >> j;
    return checkpoint_from_json(j);
}

}  // namespace formmi
