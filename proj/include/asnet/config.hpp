#pragma once

#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "asnet/losses.hpp"
#include "asnet/model.hpp"

// JSON configuration: a single document with optional "model" and "loss"
// sections that may set any field. Unknown keys are rejected so typos do not
// silently fall back to defaults. Command-line flags override file values.

namespace asnet {

namespace detail {

inline void check_known_keys(const nlohmann::json& j, const std::set<std::string>& known,
                             const std::string& section) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw std::runtime_error("config: unknown key \"" + key + "\" in " + section);
}

}  // namespace detail

inline void apply_model_config(const nlohmann::json& j, ModelConfig& cfg) {
    detail::check_known_keys(j,
                             {"d", "n_enc_layers", "n_dec_layers", "heads", "d_ff",
                              "n_instance_queries", "n_interaction_queries",
                              "n_object_classes", "n_verb_classes", "embed_dim",
                              "ia_attention_layers"},
                             "model");
    if (j.contains("d")) cfg.d = j["d"].get<std::size_t>();
    if (j.contains("n_enc_layers")) cfg.n_enc_layers = j["n_enc_layers"].get<std::size_t>();
    if (j.contains("n_dec_layers")) cfg.n_dec_layers = j["n_dec_layers"].get<std::size_t>();
    if (j.contains("heads")) cfg.heads = j["heads"].get<std::size_t>();
    if (j.contains("d_ff")) cfg.d_ff = j["d_ff"].get<std::size_t>();
    if (j.contains("n_instance_queries"))
        cfg.n_instance_queries = j["n_instance_queries"].get<std::size_t>();
    if (j.contains("n_interaction_queries"))
        cfg.n_interaction_queries = j["n_interaction_queries"].get<std::size_t>();
    if (j.contains("n_object_classes"))
        cfg.n_object_classes = j["n_object_classes"].get<std::size_t>();
    if (j.contains("n_verb_classes"))
        cfg.n_verb_classes = j["n_verb_classes"].get<std::size_t>();
    if (j.contains("embed_dim")) cfg.embed_dim = j["embed_dim"].get<std::size_t>();
    if (j.contains("ia_attention_layers"))
        cfg.ia_attention_layers = j["ia_attention_layers"].get<std::vector<std::size_t>>();
    else if (j.contains("n_dec_layers"))
        cfg.ia_attention_layers = ia_layers_for_mode(IaAttentionMode::all, cfg.n_dec_layers);
}

inline void apply_loss_config(const nlohmann::json& j, LossConfig& cfg) {
    detail::check_known_keys(j,
                             {"lambda_cls", "lambda_reg", "lambda_emb", "lambda_l1_box",
                              "lambda_giou_box", "focal_alpha", "focal_gamma",
                              "push_margin_t"},
                             "loss");
    if (j.contains("lambda_cls")) cfg.lambda_cls = j["lambda_cls"].get<double>();
    if (j.contains("lambda_reg")) cfg.lambda_reg = j["lambda_reg"].get<double>();
    if (j.contains("lambda_emb")) cfg.lambda_emb = j["lambda_emb"].get<double>();
    if (j.contains("lambda_l1_box")) cfg.lambda_l1_box = j["lambda_l1_box"].get<double>();
    if (j.contains("lambda_giou_box")) cfg.lambda_giou_box = j["lambda_giou_box"].get<double>();
    if (j.contains("focal_alpha")) cfg.focal_alpha = j["focal_alpha"].get<double>();
    if (j.contains("focal_gamma")) cfg.focal_gamma = j["focal_gamma"].get<double>();
    if (j.contains("push_margin_t")) cfg.push_margin_t = j["push_margin_t"].get<double>();
    if (cfg.lambda_cls < 0 || cfg.lambda_reg < 0 || cfg.lambda_emb < 0 ||
        cfg.lambda_l1_box < 0 || cfg.lambda_giou_box < 0 || !(cfg.push_margin_t > 0))
        throw std::runtime_error("config: loss weights must be >= 0 and push_margin_t > 0");
}

inline void apply_config_document(const nlohmann::json& j, ModelConfig& model,
                                  LossConfig& loss) {
    detail::check_known_keys(j, {"model", "loss"}, "document root");
    if (j.contains("model")) apply_model_config(j["model"], model);
    if (j.contains("loss")) apply_loss_config(j["loss"], loss);
}

}  // namespace asnet
