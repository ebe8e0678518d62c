#pragma once

#include <vector>

#include "asnet/geometry.hpp"

// Value types shared between the model heads, the matching losses and
// post-processing.

namespace asnet {

// one instance slot: box, (L_d+1)-way class scores (last is no-object),
// K-dim semantic embedding
struct InstancePrediction {
    BoxCxCyWH box;
    std::vector<double> class_scores;
    std::vector<double> embedding;

    bool operator==(const InstancePrediction&) const = default;
};

// one interaction slot: endpoint pair, L verb scores (sigmoid) with the
// raw logits kept for the losses, and the two K-dim side embeddings
struct InteractionPrediction {
    CenterPair vector;
    std::vector<double> verb_scores;
    std::vector<double> verb_logits;
    std::vector<double> embedding_h;
    std::vector<double> embedding_o;

    bool operator==(const InteractionPrediction&) const = default;
};

// ground-truth instance as consumed by matching and losses
struct GtInstance {
    BoxCxCyWH box;
    int cls = 0;
};

// ground-truth interaction: endpoint pair, the verb categories active on
// this human-object pair, and the instance indices it connects
struct GtInteraction {
    CenterPair vector;
    std::vector<int> verbs;
    int human_index = 0;
    int object_index = 0;
};

// one scored HOI triplet
struct TripletPrediction {
    BoxCxCyWH human_box;
    double human_score = 0.0;
    BoxCxCyWH object_box;
    int object_class = 0;
    double object_score = 0.0;
    int verb = 0;
    double score = 0.0;  // verb score * human_score * object_score

    bool operator==(const TripletPrediction&) const = default;
};

}  // namespace asnet
