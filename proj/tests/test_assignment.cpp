#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asnet/assignment.hpp"
#include "asnet/selfcheck.hpp"

using namespace asnet;
using Catch::Approx;

TEST_CASE("hungarian hand cases") {
    SECTION("dominant diagonal") {
        const Matrix cost = Matrix::from_rows({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
        const Assignment a = hungarian_solve(cost);
        CHECK(a.col_of_row == std::vector<std::size_t>{0, 1, 2});
        CHECK(a.total_cost == 0.0);
    }
    SECTION("anti-diagonal optimum") {
        const Assignment a = hungarian_solve(Matrix::from_rows({{1, 2}, {2, 4}}));
        CHECK(a.col_of_row == std::vector<std::size_t>{1, 0});
        CHECK(a.total_cost == Approx(4.0).margin(1e-12));
    }
    SECTION("empty matrix") {
        const Assignment a = hungarian_solve(Matrix());
        CHECK(a.col_of_row.empty());
        CHECK(a.total_cost == 0.0);
    }
    SECTION("more rows than columns rejected") {
        CHECK_THROWS_AS(hungarian_solve(Matrix(3, 2)), std::invalid_argument);
    }
    SECTION("non-finite entries rejected") {
        Matrix bad(1, 2);
        bad(0, 1) = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(hungarian_solve(bad), std::invalid_argument);
    }
}

TEST_CASE("hungarian ties break to the lexicographically smallest optimum") {
    SECTION("all-equal entries") {
        const Assignment a = hungarian_solve(Matrix(3, 5, 2.5));
        CHECK(a.col_of_row == std::vector<std::size_t>{0, 1, 2});
    }
    SECTION("two equal optima") {
        // both permutations cost 2; (0,1) is lexicographically smaller
        const Assignment a = hungarian_solve(Matrix::from_rows({{1, 1}, {1, 1}}));
        CHECK(a.col_of_row == std::vector<std::size_t>{0, 1});
    }
    SECTION("equal-cost diagonals") {
        // both permutations total 4; lexicographic pick fixes row 0 at col 0
        const Matrix cost = Matrix::from_rows({{1, 1}, {3, 3}});
        const Assignment a = hungarian_solve(cost);
        CHECK(a.col_of_row == std::vector<std::size_t>{0, 1});
        CHECK(a.total_cost == Approx(4.0).margin(1e-12));
    }
}

TEST_CASE("hungarian equals the exhaustive oracle on random matrices") {
    RngStream rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const Matrix cost = checkgen::random_cost_matrix(rng);
        const Assignment fast = hungarian_solve(cost);
        const Assignment brute = assignment_bruteforce(cost);
        CHECK(std::abs(fast.total_cost - brute.total_cost) <= 1e-9);
        CHECK(fast.col_of_row == brute.col_of_row);  // lexicographic tie-break agrees
        double sum = 0.0;
        for (std::size_t i = 0; i < cost.rows; ++i) sum += cost(i, fast.col_of_row[i]);
        CHECK(std::abs(sum - fast.total_cost) <= 1e-9);
    }
}

TEST_CASE("hungarian column permutation and row shift properties") {
    RngStream rng(505);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix cost = checkgen::random_cost_matrix(rng);
        const Assignment base = hungarian_solve(cost);

        // rotate columns
        Matrix rotated(cost.rows, cost.cols);
        const std::size_t shift = 1 + rng.next_below(cost.cols);
        for (std::size_t i = 0; i < cost.rows; ++i)
            for (std::size_t j = 0; j < cost.cols; ++j)
                rotated(i, (j + shift) % cost.cols) = cost(i, j);
        const Assignment rot = hungarian_solve(rotated);
        CHECK(rot.total_cost == Approx(base.total_cost).margin(1e-9));
        for (std::size_t i = 0; i < cost.rows; ++i)
            CHECK(rot.col_of_row[i] == (base.col_of_row[i] + shift) % cost.cols);

        // add a constant to one row
        Matrix shifted = cost;
        const std::size_t row = rng.next_below(cost.rows);
        const double c = rng.uniform(-5.0, 5.0);
        for (std::size_t j = 0; j < cost.cols; ++j) shifted(row, j) += c;
        const Assignment moved = hungarian_solve(shifted);
        CHECK(moved.total_cost == Approx(base.total_cost + c).margin(1e-9));
        CHECK(moved.col_of_row == base.col_of_row);
    }
}

namespace {

InstancePrediction scored_instance(const BoxCxCyWH& box, std::vector<double> scores) {
    InstancePrediction p;
    p.box = box;
    p.class_scores = std::move(scores);
    p.embedding = {0.0};
    return p;
}

InteractionPrediction vec_interaction(const CenterPair& v, std::vector<double> logits) {
    InteractionPrediction p;
    p.vector = v;
    p.verb_logits = std::move(logits);
    p.verb_scores.resize(p.verb_logits.size());
    for (std::size_t i = 0; i < p.verb_logits.size(); ++i)
        p.verb_scores[i] = sigmoid(p.verb_logits[i]);
    p.embedding_h = p.embedding_o = {0.0};
    return p;
}

}  // namespace

TEST_CASE("instance cost matrix") {
    const LossConfig cfg;
    const BoxCxCyWH box{0.4, 0.4, 0.2, 0.2};
    const std::vector<GtInstance> gts = {{box, 1}};

    const Matrix cost =
        instance_cost_matrix(gts, {scored_instance(box, {0.1, 0.8, 0.1, 0.0})}, cfg);
    CHECK(cost(0, 0) == Approx(-0.8).margin(1e-12));

    // a certain class strictly beats a zero score at equal box cost
    const Matrix two = instance_cost_matrix(
        gts,
        {scored_instance(box, {0.0, 1.0, 0.0, 0.0}), scored_instance(box, {1.0, 0.0, 0.0, 0.0})},
        cfg);
    CHECK(two(0, 0) < two(0, 1));

    // arbitrary valid boxes stay finite
    const Matrix wild = instance_cost_matrix(
        gts, {scored_instance({0.0, 1.0, 0.5, 0.0}, {0.25, 0.25, 0.25, 0.25})}, cfg);
    CHECK(std::isfinite(wild(0, 0)));

    CHECK_THROWS_AS(
        instance_cost_matrix({{box, 9}}, {scored_instance(box, {0.5, 0.5})}, cfg),
        std::invalid_argument);
}

TEST_CASE("interaction cost matrix") {
    const CenterPair v{0.2, 0.3, 0.6, 0.8};

    SECTION("exact vector, one verb at logit zero") {
        const Matrix cost =
            interaction_cost_matrix({{v, {0}, 0, 1}}, {vec_interaction(v, {0.0, -1.0})});
        CHECK(cost(0, 0) == Approx(-0.5).margin(1e-12));
    }
    SECTION("offset vector against a saturated verb") {
        const CenterPair off{0.3, 0.3, 0.9, 0.8};  // l1 distance 0.4
        const Matrix cost =
            interaction_cost_matrix({{v, {0}, 0, 1}}, {vec_interaction(off, {50.0})});
        CHECK(cost(0, 0) == Approx(-0.6).margin(1e-9));
    }
    SECTION("two saturated verbs, exact vector") {
        const Matrix cost =
            interaction_cost_matrix({{v, {0, 1}, 0, 1}}, {vec_interaction(v, {50.0, 50.0})});
        CHECK(cost(0, 0) == Approx(-2.0).margin(1e-9));
    }
    SECTION("empty verb set rejected") {
        CHECK_THROWS_AS(
            interaction_cost_matrix({{v, {}, 0, 1}}, {vec_interaction(v, {0.0})}),
            std::invalid_argument);
    }
}
