#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "asnet/losses.hpp"
#include "asnet/matrix.hpp"
#include "asnet/types.hpp"

// Optimal bipartite assignment and the two matching-cost constructions.
// Cost matrices are rows = real ground-truth items, cols = predictions,
// rows <= cols.

namespace asnet {

struct Assignment {
    std::vector<std::size_t> col_of_row;  // chosen prediction per ground-truth row
    double total_cost = 0.0;
};

namespace detail {

// Shortest-augmenting-path assignment with potentials, O(rows^2 * cols).
// Returns the optimal total; fills col_of_row when requested.
inline double lsap_optimal(const Matrix& cost, std::vector<std::size_t>* col_of_row) {
    const std::size_t n = cost.rows, m = cost.cols;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based with a virtual row/col 0
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0);  // p[j]: row matched to column j
    std::vector<std::size_t> way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    if (col_of_row) col_of_row->assign(n, 0);
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] == 0) continue;
        total += cost(p[j] - 1, j - 1);
        if (col_of_row) (*col_of_row)[p[j] - 1] = j - 1;
    }
    return total;
}

}  // namespace detail

// Minimum-cost injective row -> column assignment. Among equal-cost optima
// the lexicographically smallest column vector is returned: each row in turn
// is fixed to the smallest column that still admits an optimal completion.
inline Assignment hungarian_solve(const Matrix& cost) {
    if (cost.rows == 0) return {};
    if (cost.rows > cost.cols)
        throw std::invalid_argument("hungarian_solve: more rows than columns (" +
                                    shape_str(cost) + ")");
    for (double v : cost.data)
        if (!std::isfinite(v))
            throw std::invalid_argument("hungarian_solve: non-finite cost entry");

    constexpr double kEps = 1e-9;
    const double optimal = detail::lsap_optimal(cost, nullptr);

    const std::size_t n = cost.rows, m = cost.cols;
    Assignment out;
    out.col_of_row.resize(n);
    std::vector<char> col_taken(m, 0);
    std::vector<std::size_t> free_cols;
    double prefix = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        bool fixed = false;
        for (std::size_t c = 0; c < m && !fixed; ++c) {
            if (col_taken[c]) continue;
            // total with row i pinned to column c and all later rows re-solved
            free_cols.clear();
            for (std::size_t j = 0; j < m; ++j)
                if (!col_taken[j] && j != c) free_cols.push_back(j);
            const std::size_t rem_rows = n - i - 1;
            double rest = 0.0;
            if (rem_rows > 0) {
                Matrix sub(rem_rows, free_cols.size());
                for (std::size_t r = 0; r < rem_rows; ++r)
                    for (std::size_t j = 0; j < free_cols.size(); ++j)
                        sub(r, j) = cost(i + 1 + r, free_cols[j]);
                rest = detail::lsap_optimal(sub, nullptr);
            }
            if (prefix + cost(i, c) + rest <= optimal + kEps) {
                out.col_of_row[i] = c;
                col_taken[c] = 1;
                prefix += cost(i, c);
                fixed = true;
            }
        }
        if (!fixed) throw std::logic_error("hungarian_solve: no optimal completion found");
    }
    out.total_cost = prefix;
    return out;
}

// Instance matching cost: box loss minus the predicted probability of the
// ground-truth class (the probability itself, not its log).
inline Matrix instance_cost_matrix(const std::vector<GtInstance>& gts,
                                   const std::vector<InstancePrediction>& preds,
                                   const LossConfig& cfg) {
    if (preds.empty()) throw std::invalid_argument("instance_cost_matrix: no predictions");
    Matrix cost(gts.size(), preds.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
        const int cls = gts[i].cls;
        for (std::size_t j = 0; j < preds.size(); ++j) {
            const auto& scores = preds[j].class_scores;
            if (cls < 0 || static_cast<std::size_t>(cls) >= scores.size())
                throw std::invalid_argument("instance_cost_matrix: class index " +
                                            std::to_string(cls) + " out of range");
            cost(i, j) = box_loss(gts[i].box, preds[j].box, cfg) -
                         scores[static_cast<std::size_t>(cls)];
        }
    }
    return cost;
}

// Interaction matching cost: vector l1 distance minus the sigmoid of the
// predicted logit for every ground-truth verb of the pair.
inline Matrix interaction_cost_matrix(const std::vector<GtInteraction>& gts,
                                      const std::vector<InteractionPrediction>& preds) {
    if (preds.empty()) throw std::invalid_argument("interaction_cost_matrix: no predictions");
    Matrix cost(gts.size(), preds.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
        if (gts[i].verbs.empty())
            throw std::invalid_argument(
                "interaction_cost_matrix: ground-truth interaction without verbs");
        for (std::size_t j = 0; j < preds.size(); ++j) {
            const auto& logits = preds[j].verb_logits;
            double c = l1_distance(gts[i].vector, preds[j].vector);
            for (int verb : gts[i].verbs) {
                if (verb < 0 || static_cast<std::size_t>(verb) >= logits.size())
                    throw std::invalid_argument("interaction_cost_matrix: verb index " +
                                                std::to_string(verb) + " out of range");
                c -= sigmoid(logits[static_cast<std::size_t>(verb)]);
            }
            cost(i, j) = c;
        }
    }
    return cost;
}

}  // namespace asnet
