#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "asnet/assignment.hpp"
#include "asnet/dataio.hpp"
#include "asnet/losses.hpp"
#include "asnet/model.hpp"
#include "asnet/types.hpp"

// Glue between annotations, the model and the matching losses: ground-truth
// conversion, per-scene loss reports, synthetic feature grids and the raw
// model-output schema shared by the infer/match/post commands.

namespace asnet {

inline std::vector<GtInstance> scene_gt_instances(const SceneAnnotation& scene) {
    std::vector<GtInstance> out;
    out.reserve(scene.instances.size());
    for (const auto& inst : scene.instances) out.push_back({inst.box, inst.cls});
    return out;
}

// Groups the scene's HOI triplets by (human, object) pair: one ground-truth
// interaction per pair, carrying every verb annotated on it.
inline std::vector<GtInteraction> scene_gt_interactions(const SceneAnnotation& scene) {
    std::vector<GtInteraction> out;
    std::map<std::pair<int, int>, std::size_t> by_pair;
    for (const auto& hoi : scene.hois) {
        const auto key = std::make_pair(hoi.human, hoi.object);
        auto it = by_pair.find(key);
        if (it == by_pair.end()) {
            GtInteraction gi;
            gi.human_index = hoi.human;
            gi.object_index = hoi.object;
            gi.vector =
                interaction_vector(scene.instances[static_cast<std::size_t>(hoi.human)].box,
                                   scene.instances[static_cast<std::size_t>(hoi.object)].box);
            gi.verbs = {hoi.verb};
            by_pair.emplace(key, out.size());
            out.push_back(std::move(gi));
        } else {
            out[it->second].verbs.push_back(hoi.verb);
        }
    }
    return out;
}

struct SceneLossReport {
    Assignment instance_assignment;
    Assignment interaction_assignment;
    double instance = 0.0;
    double interaction = 0.0;
    double push = 0.0;
    double pull = 0.0;
    double total = 0.0;
};

// Hungarian matching for both branches followed by the full loss stack.
inline SceneLossReport scene_losses(const SceneAnnotation& scene,
                                    const std::vector<InstancePrediction>& instances,
                                    const std::vector<InteractionPrediction>& interactions,
                                    const LossConfig& cfg) {
    const auto gt_instances = scene_gt_instances(scene);
    const auto gt_interactions = scene_gt_interactions(scene);

    SceneLossReport report;
    report.instance_assignment =
        hungarian_solve(instance_cost_matrix(gt_instances, instances, cfg));
    report.instance =
        instance_loss(gt_instances, instances, report.instance_assignment.col_of_row, cfg);

    std::vector<std::vector<double>> matched_embeddings;
    for (std::size_t col : report.instance_assignment.col_of_row)
        matched_embeddings.push_back(instances[col].embedding);
    report.push = push_loss(matched_embeddings, cfg);

    report.interaction_assignment =
        hungarian_solve(interaction_cost_matrix(gt_interactions, interactions));
    report.interaction = interaction_loss(gt_interactions, interactions,
                                          report.interaction_assignment.col_of_row, cfg);

    std::vector<std::pair<std::vector<double>, std::vector<double>>> pull_pairs;
    for (std::size_t i = 0; i < gt_interactions.size(); ++i) {
        const auto& pred = interactions[report.interaction_assignment.col_of_row[i]];
        const std::size_t h = static_cast<std::size_t>(gt_interactions[i].human_index);
        const std::size_t o = static_cast<std::size_t>(gt_interactions[i].object_index);
        pull_pairs.emplace_back(pred.embedding_h,
                                instances[report.instance_assignment.col_of_row[h]].embedding);
        pull_pairs.emplace_back(pred.embedding_o,
                                instances[report.instance_assignment.col_of_row[o]].embedding);
    }
    report.pull = pull_loss(pull_pairs);
    report.total = total_loss(report.instance, report.interaction, report.push, report.pull, cfg);
    return report;
}

// synthetic stand-in for the CNN feature map, deterministic per (seed, image)
inline FeatureGrid make_feature_grid(std::size_t width, std::size_t height,
                                     std::size_t channels, std::uint64_t seed, int image_id) {
    FeatureGrid grid(width, height, channels);
    RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(image_id));
    for (double& v : grid.data) v = rng.uniform(-1.0, 1.0);
    return grid;
}

// ---------------------------------------------------------------------------
// raw model outputs, the file between infer and match/post

struct ImageRawOutput {
    int image_id = 0;
    std::vector<InstancePrediction> instances;
    std::vector<InteractionPrediction> interactions;

    bool operator==(const ImageRawOutput&) const = default;
};

inline nlohmann::json raw_outputs_to_json(const std::vector<ImageRawOutput>& outputs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& img : outputs) {
        nlohmann::json instances = nlohmann::json::array();
        for (const auto& p : img.instances)
            instances.push_back({{"box", {p.box.cx, p.box.cy, p.box.w, p.box.h}},
                                 {"scores", p.class_scores},
                                 {"emb", p.embedding}});
        nlohmann::json interactions = nlohmann::json::array();
        for (const auto& p : img.interactions)
            interactions.push_back(
                {{"vector", {p.vector.xh, p.vector.yh, p.vector.xo, p.vector.yo}},
                 {"verb_scores", p.verb_scores},
                 {"verb_logits", p.verb_logits},
                 {"emb_h", p.embedding_h},
                 {"emb_o", p.embedding_o}});
        out.push_back({{"image_id", img.image_id},
                       {"instances", instances},
                       {"interactions", interactions}});
    }
    return out;
}

inline std::vector<ImageRawOutput> raw_outputs_from_json(const nlohmann::json& j) {
    std::vector<ImageRawOutput> outputs;
    try {
        for (const auto& img : j) {
            ImageRawOutput out;
            out.image_id = img.at("image_id").get<int>();
            for (const auto& p : img.at("instances")) {
                InstancePrediction inst;
                const auto& box = p.at("box");
                inst.box = {box.at(0).get<double>(), box.at(1).get<double>(),
                            box.at(2).get<double>(), box.at(3).get<double>()};
                inst.class_scores = p.at("scores").get<std::vector<double>>();
                inst.embedding = p.at("emb").get<std::vector<double>>();
                out.instances.push_back(std::move(inst));
            }
            for (const auto& p : img.at("interactions")) {
                InteractionPrediction inter;
                const auto& vec = p.at("vector");
                inter.vector = {vec.at(0).get<double>(), vec.at(1).get<double>(),
                                vec.at(2).get<double>(), vec.at(3).get<double>()};
                inter.verb_scores = p.at("verb_scores").get<std::vector<double>>();
                inter.verb_logits = p.at("verb_logits").get<std::vector<double>>();
                inter.embedding_h = p.at("emb_h").get<std::vector<double>>();
                inter.embedding_o = p.at("emb_o").get<std::vector<double>>();
                out.interactions.push_back(std::move(inter));
            }
            outputs.push_back(std::move(out));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("raw outputs: malformed document: ") + e.what());
    }
    return outputs;
}

}  // namespace asnet
