#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "asnet/geometry.hpp"
#include "asnet/matrix.hpp"
#include "asnet/types.hpp"

// Training-side loss terms with analytic gradients for finite-difference
// verification, plus the per-branch aggregate losses and their weighted sum.

namespace asnet {

struct LossConfig {
    double lambda_cls = 1.0;       // interaction classification weight
    double lambda_reg = 2.0;       // interaction vector regression weight
    double lambda_emb = 0.1;       // push/pull embedding weight
    double lambda_l1_box = 5.0;    // box l1 sub-weight
    double lambda_giou_box = 2.0;  // box GIoU sub-weight
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
    double push_margin_t = 1.0;    // embedding separation margin
};

constexpr double kLogFloor = 1e-12;  // keeps NLL finite for degenerate scores

// ---------------------------------------------------------------------------
// elementary losses

inline double box_loss(const BoxCxCyWH& b, const BoxCxCyWH& b_hat, const LossConfig& cfg) {
    const double l1 = std::abs(b.cx - b_hat.cx) + std::abs(b.cy - b_hat.cy) +
                      std::abs(b.w - b_hat.w) + std::abs(b.h - b_hat.h);
    return cfg.lambda_l1_box * l1 + cfg.lambda_giou_box * (1.0 - giou(to_xyxy(b), to_xyxy(b_hat)));
}

inline double instance_nll(const std::vector<double>& p_hat, int cls) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= p_hat.size())
        throw std::invalid_argument("instance_nll: class index " + std::to_string(cls) +
                                    " out of range for " + std::to_string(p_hat.size()) +
                                    " scores");
    return -std::log(std::max(p_hat[static_cast<std::size_t>(cls)], kLogFloor));
}

// multi-label focal loss over raw logits; targets are 0/1 per class
inline double focal_loss(const std::vector<double>& logits, const std::vector<int>& targets,
                         const LossConfig& cfg) {
    if (logits.size() != targets.size())
        throw std::invalid_argument("focal_loss: logits/targets length mismatch");
    const double a = cfg.focal_alpha, g = cfg.focal_gamma;
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double x = logits[i];
        const double p = sigmoid(x);
        if (targets[i])
            total += a * std::pow(1.0 - p, g) * softplus(-x);  // -log p
        else
            total += (1.0 - a) * std::pow(p, g) * softplus(x);  // -log(1-p)
    }
    return total;
}

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// hinge separation over all unordered pairs of matched-instance embeddings
inline double push_loss(const std::vector<std::vector<double>>& embeddings,
                        const LossConfig& cfg) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < embeddings.size(); ++i)
        for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
            const double gap = cfg.push_margin_t - l2_distance(embeddings[i], embeddings[j]);
            if (gap > 0.0) total += gap * gap;
        }
    return total;
}

// squared distance between branch embedding and matched instance embedding,
// summed over all (human-side and object-side) pairs
inline double pull_loss(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs) {
    double total = 0.0;
    for (const auto& [a, b] : pairs) {
        const double d = l2_distance(a, b);
        total += d * d;
    }
    return total;
}

// ---------------------------------------------------------------------------
// aggregate set losses

inline int no_object_class(const std::vector<InstancePrediction>& preds) {
    return static_cast<int>(preds.front().class_scores.size()) - 1;
}

// Set-based instance loss for one image. pred_of_gt maps each real
// ground-truth instance to its matched prediction slot; every unmatched
// prediction is implicitly matched to no-object and contributes only its
// no-object score term.
inline double instance_loss(const std::vector<GtInstance>& gts,
                            const std::vector<InstancePrediction>& preds,
                            const std::vector<std::size_t>& pred_of_gt, const LossConfig& cfg) {
    if (preds.empty()) throw std::invalid_argument("instance_loss: no predictions");
    if (pred_of_gt.size() != gts.size())
        throw std::invalid_argument("instance_loss: assignment size mismatch");
    std::vector<char> taken(preds.size(), 0);
    double total = 0.0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
        const std::size_t j = pred_of_gt[i];
        if (j >= preds.size()) throw std::invalid_argument("instance_loss: column out of range");
        if (taken[j]) throw std::invalid_argument("instance_loss: duplicate assignment");
        taken[j] = 1;
        total += instance_nll(preds[j].class_scores, gts[i].cls);
        total += box_loss(gts[i].box, preds[j].box, cfg);
    }
    const int empty = no_object_class(preds);
    for (std::size_t j = 0; j < preds.size(); ++j)
        if (!taken[j]) total += instance_nll(preds[j].class_scores, empty);
    return total;
}

inline double l1_distance(const CenterPair& a, const CenterPair& b) {
    return std::abs(a.xh - b.xh) + std::abs(a.yh - b.yh) + std::abs(a.xo - b.xo) +
           std::abs(a.yo - b.yo);
}

// Interaction loss over the full slot set: matched slots get focal on the
// ground-truth verb set plus the vector l1 term, unmatched slots get focal
// against an all-negative target.
inline double interaction_loss(const std::vector<GtInteraction>& gts,
                               const std::vector<InteractionPrediction>& preds,
                               const std::vector<std::size_t>& pred_of_gt,
                               const LossConfig& cfg) {
    if (preds.empty()) throw std::invalid_argument("interaction_loss: no predictions");
    if (pred_of_gt.size() != gts.size())
        throw std::invalid_argument("interaction_loss: assignment size mismatch");
    const std::size_t n_verbs = preds.front().verb_logits.size();
    std::vector<char> taken(preds.size(), 0);
    double total = 0.0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
        const std::size_t j = pred_of_gt[i];
        if (j >= preds.size())
            throw std::invalid_argument("interaction_loss: column out of range");
        if (taken[j]) throw std::invalid_argument("interaction_loss: duplicate assignment");
        taken[j] = 1;
        std::vector<int> targets(n_verbs, 0);
        for (int v : gts[i].verbs) {
            if (v < 0 || static_cast<std::size_t>(v) >= n_verbs)
                throw std::invalid_argument("interaction_loss: verb index out of range");
            targets[static_cast<std::size_t>(v)] = 1;
        }
        total += cfg.lambda_cls * focal_loss(preds[j].verb_logits, targets, cfg);
        total += cfg.lambda_reg * l1_distance(gts[i].vector, preds[j].vector);
    }
    const std::vector<int> negatives(n_verbs, 0);
    for (std::size_t j = 0; j < preds.size(); ++j)
        if (!taken[j]) total += cfg.lambda_cls * focal_loss(preds[j].verb_logits, negatives, cfg);
    return total;
}

inline double total_loss(double instance, double interaction, double push, double pull,
                         const LossConfig& cfg) {
    return instance + interaction + cfg.lambda_emb * (pull + push);
}

// ---------------------------------------------------------------------------
// analytic gradients
//
// Each loss also exists as a flat probe (value + gradient over one packed
// input vector) so a finite-difference oracle can drive every loss through
// one interface.

namespace detail {

// d giou(a, b) / d b, boxes in xyxy; zero in fully degenerate configurations
inline std::array<double, 4> giou_grad_xyxy(const BoxXYXY& a, const BoxXYXY& b) {
    const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    const bool has_inter = iw > 0.0 && ih > 0.0;
    const double inter = has_inter ? iw * ih : 0.0;
    const double area_b = b.area();
    const double uni = a.area() + area_b - inter;
    const double hw = std::max(a.x1, b.x1) - std::min(a.x0, b.x0);
    const double hh = std::max(a.y1, b.y1) - std::min(a.y0, b.y0);
    const double hull = hw * hh;
    if (uni <= 0.0 || hull <= 0.0) return {0.0, 0.0, 0.0, 0.0};

    const double bw = b.x1 - b.x0, bh = b.y1 - b.y0;
    // d area_b / d (x0, y0, x1, y1)
    const std::array<double, 4> d_area{-bh, -bw, bh, bw};
    // intersection: the min/max picks b's edge when b is interior
    std::array<double, 4> d_inter{0.0, 0.0, 0.0, 0.0};
    if (has_inter) {
        if (b.x0 >= a.x0) d_inter[0] = -ih;
        if (b.y0 >= a.y0) d_inter[1] = -iw;
        if (b.x1 <= a.x1) d_inter[2] = ih;
        if (b.y1 <= a.y1) d_inter[3] = iw;
    }
    // hull: the min/max picks b's edge when b is exterior
    std::array<double, 4> d_hull{0.0, 0.0, 0.0, 0.0};
    if (b.x0 <= a.x0) d_hull[0] = -hh;
    if (b.y0 <= a.y0) d_hull[1] = -hw;
    if (b.x1 >= a.x1) d_hull[2] = hh;
    if (b.y1 >= a.y1) d_hull[3] = hw;

    std::array<double, 4> grad{};
    for (int t = 0; t < 4; ++t) {
        const double d_uni = d_area[t] - d_inter[t];
        grad[t] = (d_inter[t] * uni - inter * d_uni) / (uni * uni) +
                  (d_uni * hull - uni * d_hull[t]) / (hull * hull);
    }
    return grad;
}

// chain an xyxy gradient back to (cx, cy, w, h)
inline std::array<double, 4> xyxy_grad_to_cxcywh(const std::array<double, 4>& g) {
    return {g[0] + g[2], g[1] + g[3], (g[2] - g[0]) / 2.0, (g[3] - g[1]) / 2.0};
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// d box_loss / d b_hat, components (cx, cy, w, h)
inline std::array<double, 4> box_loss_grad_pred(const BoxCxCyWH& b, const BoxCxCyWH& b_hat,
                                                const LossConfig& cfg) {
    const auto g_giou =
        detail::xyxy_grad_to_cxcywh(detail::giou_grad_xyxy(to_xyxy(b), to_xyxy(b_hat)));
    const std::array<double, 4> db{b.cx - b_hat.cx, b.cy - b_hat.cy, b.w - b_hat.w,
                                   b.h - b_hat.h};
    std::array<double, 4> grad{};
    for (int t = 0; t < 4; ++t)
        grad[t] = -cfg.lambda_l1_box * detail::sign(db[t]) - cfg.lambda_giou_box * g_giou[t];
    return grad;
}

// d focal_loss / d logit, per class
inline std::vector<double> focal_loss_grad(const std::vector<double>& logits,
                                           const std::vector<int>& targets,
                                           const LossConfig& cfg) {
    if (logits.size() != targets.size())
        throw std::invalid_argument("focal_loss_grad: logits/targets length mismatch");
    const double a = cfg.focal_alpha, g = cfg.focal_gamma;
    std::vector<double> grad(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double x = logits[i];
        const double p = sigmoid(x);
        const double log_p = -softplus(-x);
        const double log_1mp = -softplus(x);
        if (targets[i])
            grad[i] = a * g * p * std::pow(1.0 - p, g) * log_p - a * std::pow(1.0 - p, g + 1.0);
        else
            grad[i] = -(1.0 - a) * g * std::pow(p, g) * (1.0 - p) * log_1mp +
                      (1.0 - a) * std::pow(p, g + 1.0);
    }
    return grad;
}

inline std::vector<double> instance_nll_grad(const std::vector<double>& p_hat, int cls) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= p_hat.size())
        throw std::invalid_argument("instance_nll_grad: class index out of range");
    std::vector<double> grad(p_hat.size(), 0.0);
    const double p = p_hat[static_cast<std::size_t>(cls)];
    if (p > kLogFloor) grad[static_cast<std::size_t>(cls)] = -1.0 / p;
    return grad;
}

// gradients w.r.t. every embedding, flattened in input order
inline std::vector<double> push_loss_grad(const std::vector<std::vector<double>>& embeddings,
                                          const LossConfig& cfg) {
    const std::size_t k = embeddings.empty() ? 0 : embeddings.front().size();
    std::vector<double> grad(embeddings.size() * k, 0.0);
    for (std::size_t i = 0; i + 1 < embeddings.size(); ++i)
        for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
            const double dist = l2_distance(embeddings[i], embeddings[j]);
            if (dist >= cfg.push_margin_t || dist <= 0.0) continue;
            const double coef = -2.0 * (cfg.push_margin_t - dist) / dist;
            for (std::size_t t = 0; t < k; ++t) {
                const double d = embeddings[i][t] - embeddings[j][t];
                grad[i * k + t] += coef * d;
                grad[j * k + t] -= coef * d;
            }
        }
    return grad;
}

// gradients w.r.t. (a, b) of every pair, flattened as [a0, b0, a1, b1, ...]
inline std::vector<double> pull_loss_grad(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs) {
    const std::size_t k = pairs.empty() ? 0 : pairs.front().first.size();
    std::vector<double> grad(pairs.size() * 2 * k, 0.0);
    for (std::size_t i = 0; i < pairs.size(); ++i)
        for (std::size_t t = 0; t < k; ++t) {
            const double d = pairs[i].first[t] - pairs[i].second[t];
            grad[(2 * i) * k + t] = 2.0 * d;
            grad[(2 * i + 1) * k + t] = -2.0 * d;
        }
    return grad;
}

// ---------------------------------------------------------------------------
// flat probe interface

enum class LossId { box, nll, focal, push, pull };

// One loss instance with its continuous inputs packed into a single vector:
//   box:   [b.cx, b.cy, b.w, b.h, b_hat.cx, b_hat.cy, b_hat.w, b_hat.h]
//   nll:   class scores
//   focal: logits (targets fixed)
//   push:  embeddings back to back (embed_dim each)
//   pull:  pairs back to back, first then second member
struct LossProbe {
    LossId id = LossId::box;
    std::vector<double> x;
    LossConfig cfg;
    int class_index = 0;
    std::vector<int> targets;
    std::size_t embed_dim = 0;
};

namespace detail {

inline BoxCxCyWH unpack_box(const std::vector<double>& x, std::size_t off) {
    return {x[off], x[off + 1], x[off + 2], x[off + 3]};
}

inline std::vector<std::vector<double>> unpack_embeddings(const std::vector<double>& x,
                                                          std::size_t k) {
    if (k == 0 || x.size() % k != 0)
        throw std::invalid_argument("loss probe: input length not a multiple of embed_dim");
    std::vector<std::vector<double>> out(x.size() / k);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i].assign(x.begin() + static_cast<std::ptrdiff_t>(i * k),
                      x.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
    return out;
}

inline std::vector<std::pair<std::vector<double>, std::vector<double>>> unpack_pairs(
    const std::vector<double>& x, std::size_t k) {
    auto flat = unpack_embeddings(x, k);
    if (flat.size() % 2 != 0) throw std::invalid_argument("loss probe: odd pair input");
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs(flat.size() / 2);
    for (std::size_t i = 0; i < pairs.size(); ++i)
        pairs[i] = {std::move(flat[2 * i]), std::move(flat[2 * i + 1])};
    return pairs;
}

}  // namespace detail

inline double loss_value(const LossProbe& probe) {
    switch (probe.id) {
        case LossId::box:
            if (probe.x.size() != 8) throw std::invalid_argument("box probe needs 8 inputs");
            return box_loss(detail::unpack_box(probe.x, 0), detail::unpack_box(probe.x, 4),
                            probe.cfg);
        case LossId::nll:
            return instance_nll(probe.x, probe.class_index);
        case LossId::focal:
            return focal_loss(probe.x, probe.targets, probe.cfg);
        case LossId::push:
            return push_loss(detail::unpack_embeddings(probe.x, probe.embed_dim), probe.cfg);
        case LossId::pull:
            return pull_loss(detail::unpack_pairs(probe.x, probe.embed_dim));
    }
    throw std::invalid_argument("loss_value: unknown loss id");
}

inline std::vector<double> loss_gradient(const LossProbe& probe) {
    switch (probe.id) {
        case LossId::box: {
            if (probe.x.size() != 8) throw std::invalid_argument("box probe needs 8 inputs");
            const BoxCxCyWH b = detail::unpack_box(probe.x, 0);
            const BoxCxCyWH b_hat = detail::unpack_box(probe.x, 4);
            // the loss is symmetric, so the gradient w.r.t. b is the
            // prediction-side gradient with the roles swapped
            const auto gb = box_loss_grad_pred(b_hat, b, probe.cfg);
            const auto gp = box_loss_grad_pred(b, b_hat, probe.cfg);
            return {gb[0], gb[1], gb[2], gb[3], gp[0], gp[1], gp[2], gp[3]};
        }
        case LossId::nll:
            return instance_nll_grad(probe.x, probe.class_index);
        case LossId::focal:
            return focal_loss_grad(probe.x, probe.targets, probe.cfg);
        case LossId::push:
            return push_loss_grad(detail::unpack_embeddings(probe.x, probe.embed_dim), probe.cfg);
        case LossId::pull:
            return pull_loss_grad(detail::unpack_pairs(probe.x, probe.embed_dim));
    }
    throw std::invalid_argument("loss_gradient: unknown loss id");
}

}  // namespace asnet
