#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "asnet/postprocess.hpp"
#include "asnet/selfcheck.hpp"

using namespace asnet;
using Catch::Approx;

TEST_CASE("vector matching distance") {
    CHECK(vector_distance_D({0.2, 0.3, 0.6, 0.8}, 0.2, 0.3, 0.6, 0.8) == 1.0);
    CHECK(vector_distance_D({0.2, 0.3, 0.6, 0.8}, 0.3, 0.3, 0.7, 0.8) ==
          Approx(1.21).margin(1e-12));

    // monotone in each absolute offset
    RngStream rng(3);
    for (int i = 0; i < 50; ++i) {
        const CenterPair v{rng.next_double(), rng.next_double(), rng.next_double(),
                           rng.next_double()};
        const double base = vector_distance_D(v, 0.5, 0.5, 0.5, 0.5);
        const double grown = vector_distance_D(
            {v.xh + 0.1 * (v.xh >= 0.5 ? 1 : -1), v.yh, v.xo, v.yo}, 0.5, 0.5, 0.5, 0.5);
        CHECK(grown >= base);
    }
}

TEST_CASE("embedding matching distance") {
    const std::vector<double> zero{0, 0, 0};
    CHECK(embedding_distance_R(zero, zero, zero, zero) == 1.0);
    CHECK(embedding_distance_R({1, 0, 0}, {0, 1, 0}, zero, zero) == Approx(4.0).margin(1e-12));
    // symmetric under swapping which side carries the same distance
    CHECK(embedding_distance_R({1, 0, 0}, zero, zero, zero) ==
          embedding_distance_R(zero, {1, 0, 0}, zero, zero));
}

namespace {

InstancePrediction instance_with(const BoxCxCyWH& box, std::vector<double> scores,
                                 std::vector<double> embedding = {0, 0}) {
    InstancePrediction p;
    p.box = box;
    p.class_scores = std::move(scores);
    p.embedding = std::move(embedding);
    return p;
}

InteractionPrediction interaction_at(const CenterPair& v, std::vector<double> verb_scores,
                                     std::vector<double> emb_h = {0, 0},
                                     std::vector<double> emb_o = {0, 0}) {
    InteractionPrediction p;
    p.vector = v;
    p.verb_scores = std::move(verb_scores);
    p.verb_logits.resize(p.verb_scores.size(), 0.0);
    p.embedding_h = std::move(emb_h);
    p.embedding_o = std::move(emb_o);
    return p;
}

}  // namespace

TEST_CASE("triplet assembly hand case") {
    // classes: 0 = person, 1 = thing, 2 = no-object
    const std::vector<InstancePrediction> instances = {
        instance_with({0.3, 0.3, 0.2, 0.2}, {0.8, 0.15, 0.05}),
        instance_with({0.7, 0.7, 0.2, 0.2}, {0.2, 0.5, 0.3}),
    };
    const std::vector<InteractionPrediction> interactions = {
        interaction_at({0.3, 0.3, 0.7, 0.7}, {0.9}),
    };
    const TripletAssembly out =
        assemble_triplets(instances, interactions, MatchStrategy::combined, 0, 100);
    REQUIRE(out.diagnostic.empty());
    REQUIRE(out.triplets.size() == 1);
    const auto& t = out.triplets[0];
    CHECK(t.human_score == 0.8);
    CHECK(t.object_score == 0.5);
    CHECK(t.object_class == 1);
    CHECK(t.score == Approx(0.36).margin(1e-12));
    CHECK(std::abs(t.score - 0.9 * t.human_score * t.object_score) <= 1e-12);
    CHECK(out.pair_of_interaction == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
}

TEST_CASE("closer interaction endpoints win in vector and combined modes") {
    const std::vector<InstancePrediction> instances = {
        instance_with({0.3, 0.3, 0.2, 0.2}, {0.8, 0.1, 0.1}),
        instance_with({0.7, 0.7, 0.2, 0.2}, {0.1, 0.8, 0.1}),   // exact endpoint
        instance_with({0.8, 0.7, 0.2, 0.2}, {0.1, 0.8, 0.1}),   // offset 0.1 in x
    };
    const std::vector<InteractionPrediction> interactions = {
        interaction_at({0.3, 0.3, 0.7, 0.7}, {0.9}),
    };
    for (MatchStrategy mode : {MatchStrategy::vector, MatchStrategy::combined}) {
        const TripletAssembly out = assemble_triplets(instances, interactions, mode, 0, 100);
        REQUIRE(out.pair_of_interaction.size() == 1);
        CHECK(out.pair_of_interaction[0] == std::pair<std::size_t, std::size_t>{0, 1});
    }
}

TEST_CASE("top-n keeps the maximum-score triplet") {
    const std::vector<InstancePrediction> instances = {
        instance_with({0.3, 0.3, 0.2, 0.2}, {0.9, 0.05, 0.05}),
        instance_with({0.7, 0.7, 0.2, 0.2}, {0.1, 0.8, 0.1}),
    };
    const std::vector<InteractionPrediction> interactions = {
        interaction_at({0.3, 0.3, 0.7, 0.7}, {0.2, 0.9, 0.5}),
        interaction_at({0.3, 0.3, 0.7, 0.7}, {0.7, 0.1, 0.3}),
    };
    const TripletAssembly all =
        assemble_triplets(instances, interactions, MatchStrategy::vector, 0, 100);
    const TripletAssembly top =
        assemble_triplets(instances, interactions, MatchStrategy::vector, 0, 1);
    REQUIRE(top.triplets.size() == 1);
    double best = 0.0;
    for (const auto& t : all.triplets) best = std::max(best, t.score);
    CHECK(top.triplets[0].score == best);
    CHECK(top.triplets[0].verb == 1);
}

TEST_CASE("missing candidates produce a diagnostic, not a crash") {
    SECTION("no human") {
        const std::vector<InstancePrediction> instances = {
            instance_with({0.5, 0.5, 0.2, 0.2}, {0.1, 0.8, 0.1}),
        };
        const auto out = assemble_triplets(instances, {interaction_at({0, 0, 1, 1}, {0.5})},
                                           MatchStrategy::combined, 0, 10);
        CHECK(out.triplets.empty());
        CHECK_FALSE(out.diagnostic.empty());
    }
    SECTION("everything argmax no-object") {
        const std::vector<InstancePrediction> instances = {
            instance_with({0.5, 0.5, 0.2, 0.2}, {0.1, 0.2, 0.7}),
        };
        const auto out = assemble_triplets(instances, {interaction_at({0, 0, 1, 1}, {0.5})},
                                           MatchStrategy::combined, 0, 10);
        CHECK(out.triplets.empty());
        CHECK_FALSE(out.diagnostic.empty());
    }
}

TEST_CASE("combined mode reduces to vector mode when embeddings coincide") {
    RngStream rng(8);
    std::vector<InstancePrediction> instances;
    for (int i = 0; i < 6; ++i)
        instances.push_back(checkgen::random_instance_prediction(rng, 3, 4, 0, i % 2 == 0));
    std::vector<InteractionPrediction> interactions;
    for (int i = 0; i < 4; ++i)
        interactions.push_back(checkgen::random_interaction_prediction(rng, 3, 4));
    // every embedding identical on both sides
    for (auto& inst : instances) inst.embedding.assign(4, 0.25);
    for (auto& inter : interactions) {
        inter.embedding_h.assign(4, 0.25);
        inter.embedding_o.assign(4, 0.25);
    }
    const auto combined =
        assemble_triplets(instances, interactions, MatchStrategy::combined, 0, 50);
    const auto vector_only =
        assemble_triplets(instances, interactions, MatchStrategy::vector, 0, 50);
    CHECK(combined.triplets == vector_only.triplets);
    CHECK(combined.pair_of_interaction == vector_only.pair_of_interaction);
}

TEST_CASE("assembly is invariant to instance order") {
    RngStream rng(15);
    std::vector<InstancePrediction> instances;
    for (int i = 0; i < 8; ++i)
        instances.push_back(checkgen::random_instance_prediction(rng, 4, 4, 0, i % 3 == 0));
    std::vector<InteractionPrediction> interactions;
    for (int i = 0; i < 5; ++i)
        interactions.push_back(checkgen::random_interaction_prediction(rng, 4, 4));

    const auto base =
        assemble_triplets(instances, interactions, MatchStrategy::combined, 0, 200);
    std::vector<InstancePrediction> reversed(instances.rbegin(), instances.rend());
    const auto flipped =
        assemble_triplets(reversed, interactions, MatchStrategy::combined, 0, 200);

    auto sorted = [](std::vector<TripletPrediction> v) {
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            if (a.score != b.score) return a.score < b.score;
            return a.verb < b.verb;
        });
        return v;
    };
    CHECK(sorted(base.triplets) == sorted(flipped.triplets));
}
