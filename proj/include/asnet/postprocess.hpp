#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "asnet/geometry.hpp"
#include "asnet/losses.hpp"
#include "asnet/types.hpp"

// Matches detected instances to interaction predictions and emits scored HOI
// triplets.

namespace asnet {

enum class MatchStrategy { vector, embedding, combined };

inline MatchStrategy match_strategy_from_string(const std::string& s) {
    if (s == "vector") return MatchStrategy::vector;
    if (s == "embedding") return MatchStrategy::embedding;
    if (s == "combined") return MatchStrategy::combined;
    throw std::invalid_argument("unknown matching strategy: " + s);
}

// product over the four coordinate offsets of (|delta| + 1); 1 at exact match
inline double vector_distance_D(const CenterPair& v_hat, double human_cx, double human_cy,
                                double object_cx, double object_cy) {
    return (std::abs(human_cx - v_hat.xh) + 1.0) * (std::abs(human_cy - v_hat.yh) + 1.0) *
           (std::abs(object_cx - v_hat.xo) + 1.0) * (std::abs(object_cy - v_hat.yo) + 1.0);
}

// (||eps_h - eps_h_hat|| + 1) * (||eps_o - eps_o_hat|| + 1); 1 at exact match
inline double embedding_distance_R(const std::vector<double>& eps_h,
                                   const std::vector<double>& eps_o,
                                   const std::vector<double>& eps_h_hat,
                                   const std::vector<double>& eps_o_hat) {
    return (l2_distance(eps_h, eps_h_hat) + 1.0) * (l2_distance(eps_o, eps_o_hat) + 1.0);
}

struct TripletAssembly {
    std::vector<TripletPrediction> triplets;
    // per interaction, the instance indices of the chosen (human, object) pair
    std::vector<std::pair<std::size_t, std::size_t>> pair_of_interaction;
    std::string diagnostic;  // nonempty when no candidate pair existed
};

// Scored triplet assembly. Instances whose argmax class is no-object are
// dropped; human candidates are the instances whose argmax class equals
// human_class, object candidates are all retained instances. Every
// interaction picks the pair minimizing D*R / (s_h * s_o), then each verb at
// or above score_floor becomes one triplet scored verb * s_h * s_o, and the
// global top_n by score survive.
inline TripletAssembly assemble_triplets(const std::vector<InstancePrediction>& instances,
                                         const std::vector<InteractionPrediction>& interactions,
                                         MatchStrategy strategy, int human_class,
                                         std::size_t top_n, double score_floor = 0.0) {
    if (top_n < 1) throw std::invalid_argument("assemble_triplets: top_n must be >= 1");
    if (human_class < 0) throw std::invalid_argument("assemble_triplets: bad human class");

    struct Candidate {
        std::size_t index;
        int cls;
        double score;       // argmax-class score (object side)
        double human_score; // human-class score, meaningful for humans only
    };
    std::vector<Candidate> objects;
    std::vector<Candidate> humans;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& scores = instances[i].class_scores;
        if (scores.size() < 2)
            throw std::invalid_argument("assemble_triplets: class scores too short");
        const std::size_t argmax = static_cast<std::size_t>(
            std::max_element(scores.begin(), scores.end()) - scores.begin());
        if (argmax + 1 == scores.size()) continue;  // no-object
        Candidate c{i, static_cast<int>(argmax), scores[argmax],
                    static_cast<std::size_t>(human_class) < scores.size() - 1
                        ? scores[static_cast<std::size_t>(human_class)]
                        : 0.0};
        objects.push_back(c);
        if (c.cls == human_class) humans.push_back(c);
    }
    TripletAssembly out;
    if (humans.empty()) {
        out.diagnostic = "no instance with argmax class == human class survived";
        return out;
    }
    if (objects.empty()) {
        out.diagnostic = "no instance survived the no-object filter";
        return out;
    }

    struct Scored {
        TripletPrediction triplet;
        std::size_t interaction_index;
        int verb;
    };
    std::vector<Scored> scored;
    for (std::size_t r = 0; r < interactions.size(); ++r) {
        const auto& pred = interactions[r];
        double best_cost = 0.0;
        const Candidate* best_h = nullptr;
        const Candidate* best_o = nullptr;
        for (const auto& h : humans)
            for (const auto& o : objects) {
                const auto& hbox = instances[h.index].box;
                const auto& obox = instances[o.index].box;
                const double d = strategy == MatchStrategy::embedding
                                     ? 1.0
                                     : vector_distance_D(pred.vector, hbox.cx, hbox.cy,
                                                         obox.cx, obox.cy);
                const double rr = strategy == MatchStrategy::vector
                                      ? 1.0
                                      : embedding_distance_R(instances[h.index].embedding,
                                                             instances[o.index].embedding,
                                                             pred.embedding_h,
                                                             pred.embedding_o);
                const double cost = d * rr / (h.human_score * o.score);
                if (!best_h || cost < best_cost) {
                    best_cost = cost;
                    best_h = &h;
                    best_o = &o;
                }
            }
        out.pair_of_interaction.emplace_back(best_h->index, best_o->index);
        for (std::size_t l = 0; l < pred.verb_scores.size(); ++l) {
            if (pred.verb_scores[l] < score_floor) continue;
            TripletPrediction t;
            t.human_box = instances[best_h->index].box;
            t.human_score = best_h->human_score;
            t.object_box = instances[best_o->index].box;
            t.object_class = best_o->cls;
            t.object_score = best_o->score;
            t.verb = static_cast<int>(l);
            t.score = pred.verb_scores[l] * t.human_score * t.object_score;
            if (!(t.score > 0.0)) continue;  // fully saturated scores underflow to 0
            scored.push_back({t, r, static_cast<int>(l)});
        }
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.triplet.score != b.triplet.score) return a.triplet.score > b.triplet.score;
        if (a.interaction_index != b.interaction_index)
            return a.interaction_index < b.interaction_index;
        return a.verb < b.verb;
    });
    if (scored.size() > top_n) scored.resize(top_n);
    out.triplets.reserve(scored.size());
    for (auto& s : scored) out.triplets.push_back(std::move(s.triplet));
    return out;
}

}  // namespace asnet
