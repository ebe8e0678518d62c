#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "asnet/assignment.hpp"
#include "asnet/dataio.hpp"
#include "asnet/evaluation.hpp"
#include "asnet/losses.hpp"
#include "asnet/model.hpp"
#include "asnet/pipeline.hpp"
#include "asnet/postprocess.hpp"

// Independent oracles (brute-force assignment, finite differences,
// quadratic-time PR curves) and the invariant suite built on them. The
// oracles deliberately avoid the code paths they validate.

namespace asnet {

// ---------------------------------------------------------------------------
// oracles

// exhaustive minimum over all injective row -> column maps; feasible for
// rows <= cols <= 7. Enumeration is lexicographic, so the first assignment
// attaining the minimum is the lexicographically smallest optimum.
inline Assignment assignment_bruteforce(const Matrix& cost) {
    Assignment best;
    best.total_cost = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> current(cost.rows, 0);
    std::vector<char> used(cost.cols, 0);
    std::function<void(std::size_t, double)> recurse = [&](std::size_t row, double acc) {
        if (row == cost.rows) {
            if (acc < best.total_cost - 1e-12) {
                best.total_cost = acc;
                best.col_of_row = current;
            }
            return;
        }
        for (std::size_t c = 0; c < cost.cols; ++c) {
            if (used[c]) continue;
            used[c] = 1;
            current[row] = c;
            recurse(row + 1, acc + cost(row, c));
            used[c] = 0;
        }
    };
    if (cost.rows == 0) {
        best.total_cost = 0.0;
        return best;
    }
    recurse(0, 0.0);
    return best;
}

// quadratic-time all-point AP: every hit scores the maximum precision at or
// after its rank, scanned directly
inline double ap_bruteforce(const std::vector<int>& hit_flags, std::size_t n_gt) {
    if (n_gt == 0) return 0.0;
    double ap = 0.0;
    std::size_t cum = 0;
    std::vector<double> precision(hit_flags.size());
    for (std::size_t k = 0; k < hit_flags.size(); ++k) {
        cum += static_cast<std::size_t>(hit_flags[k] != 0);
        precision[k] = static_cast<double>(cum) / static_cast<double>(k + 1);
    }
    for (std::size_t k = 0; k < hit_flags.size(); ++k) {
        if (!hit_flags[k]) continue;
        double p = 0.0;
        for (std::size_t j = k; j < hit_flags.size(); ++j) p = std::max(p, precision[j]);
        ap += p / static_cast<double>(n_gt);
    }
    return ap;
}

// central finite difference of a scalar function of a packed input vector
inline std::vector<double> central_difference_gradient(
    const std::function<double(const std::vector<double>&)>& fn, std::vector<double> x,
    double h) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double hi = fn(x);
        x[i] = keep - h;
        const double lo = fn(x);
        x[i] = keep;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// deterministic random inputs for the checks

namespace checkgen {

inline Matrix random_cost_matrix(RngStream& rng, std::size_t max_dim = 7) {
    const std::size_t rows = static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(max_dim)));
    const std::size_t cols =
        static_cast<std::size_t>(rng.uniform_int(static_cast<int>(rows), static_cast<int>(max_dim)));
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(-10.0, 10.0);
    return m;
}

inline std::vector<double> softmax_vec(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] = std::exp(logits[i] - mx);
    for (double& v : p) v /= sum;
    return p;
}

// kink margin: a probe is discarded when any nonsmooth switch sits within
// this distance of the sample point
constexpr double kKinkMargin = 1e-3;

inline bool box_probe_near_kink(const LossProbe& probe) {
    const BoxCxCyWH b{probe.x[0], probe.x[1], probe.x[2], probe.x[3]};
    const BoxCxCyWH p{probe.x[4], probe.x[5], probe.x[6], probe.x[7]};
    for (int i = 0; i < 4; ++i)
        if (std::abs(probe.x[i] - probe.x[4 + i]) < kKinkMargin) return true;  // l1 kink
    const BoxXYXY a = to_xyxy(b), c = to_xyxy(p);
    // min/max switches in the intersection and hull terms
    if (std::abs(a.x0 - c.x0) < kKinkMargin || std::abs(a.y0 - c.y0) < kKinkMargin ||
        std::abs(a.x1 - c.x1) < kKinkMargin || std::abs(a.y1 - c.y1) < kKinkMargin)
        return true;
    // intersection-existence boundary
    const double iw = std::min(a.x1, c.x1) - std::max(a.x0, c.x0);
    const double ih = std::min(a.y1, c.y1) - std::max(a.y0, c.y0);
    return std::abs(iw) < kKinkMargin || std::abs(ih) < kKinkMargin;
}

inline bool push_probe_near_kink(const LossProbe& probe) {
    const std::size_t k = probe.embed_dim;
    const std::size_t n = probe.x.size() / k;
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                const double d = probe.x[i * k + t] - probe.x[j * k + t];
                s += d * d;
            }
            const double dist = std::sqrt(s);
            if (std::abs(dist - probe.cfg.push_margin_t) < kKinkMargin || dist < kKinkMargin)
                return true;
        }
    return false;
}

// draws probes until one clears the kink margin
inline LossProbe random_probe(LossId id, RngStream& rng) {
    for (;;) {
        LossProbe probe;
        probe.id = id;
        switch (id) {
            case LossId::box: {
                probe.x.resize(8);
                for (int side = 0; side < 2; ++side) {
                    const double w = rng.uniform(0.1, 0.5);
                    const double h = rng.uniform(0.1, 0.5);
                    probe.x[4 * side + 0] = rng.uniform(0.25, 0.75);
                    probe.x[4 * side + 1] = rng.uniform(0.25, 0.75);
                    probe.x[4 * side + 2] = w;
                    probe.x[4 * side + 3] = h;
                }
                if (box_probe_near_kink(probe)) continue;
                return probe;
            }
            case LossId::nll: {
                std::vector<double> logits(6);
                for (double& v : logits) v = rng.uniform(-1.5, 1.5);
                probe.x = softmax_vec(logits);
                probe.class_index = static_cast<int>(rng.next_below(probe.x.size()));
                if (probe.x[static_cast<std::size_t>(probe.class_index)] < 2e-3) continue;
                return probe;
            }
            case LossId::focal: {
                probe.x.resize(8);
                probe.targets.resize(probe.x.size());
                for (double& v : probe.x) v = rng.uniform(-4.0, 4.0);
                for (int& t : probe.targets) t = rng.next_below(2) ? 1 : 0;
                return probe;
            }
            case LossId::push: {
                probe.embed_dim = 8;
                probe.x.resize(4 * probe.embed_dim);
                for (double& v : probe.x) v = rng.uniform(-1.0, 1.0);
                if (push_probe_near_kink(probe)) continue;
                return probe;
            }
            case LossId::pull: {
                probe.embed_dim = 8;
                probe.x.resize(3 * 2 * probe.embed_dim);
                for (double& v : probe.x) v = rng.uniform(-1.0, 1.0);
                return probe;
            }
        }
    }
}

inline InstancePrediction random_instance_prediction(RngStream& rng, std::size_t n_classes,
                                                     std::size_t embed_dim, int human_class,
                                                     bool force_human) {
    InstancePrediction p;
    p.box = detail::random_box(rng);
    std::vector<double> logits(n_classes + 1);
    for (double& v : logits) v = rng.uniform(-2.0, 2.0);
    if (force_human) logits[static_cast<std::size_t>(human_class)] = 4.0;
    p.class_scores = softmax_vec(logits);
    p.embedding.resize(embed_dim);
    for (double& v : p.embedding) v = rng.uniform(-1.0, 1.0);
    return p;
}

inline InteractionPrediction random_interaction_prediction(RngStream& rng, std::size_t n_verbs,
                                                           std::size_t embed_dim) {
    InteractionPrediction p;
    p.vector = {rng.next_double(), rng.next_double(), rng.next_double(), rng.next_double()};
    p.verb_logits.resize(n_verbs);
    for (double& v : p.verb_logits) v = rng.uniform(-3.0, 3.0);
    p.verb_scores.resize(n_verbs);
    for (std::size_t i = 0; i < n_verbs; ++i) p.verb_scores[i] = sigmoid(p.verb_logits[i]);
    p.embedding_h.resize(embed_dim);
    p.embedding_o.resize(embed_dim);
    for (double& v : p.embedding_h) v = rng.uniform(-1.0, 1.0);
    for (double& v : p.embedding_o) v = rng.uniform(-1.0, 1.0);
    return p;
}

}  // namespace checkgen

// ---------------------------------------------------------------------------
// the invariant/oracle suite

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace checks {

inline CheckResult hungarian_optimality() {
    const auto start = std::chrono::steady_clock::now();
    RngStream rng(20240601);
    std::size_t failures = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Matrix cost = checkgen::random_cost_matrix(rng);
        const Assignment fast = hungarian_solve(cost);
        const Assignment brute = assignment_bruteforce(cost);
        const double delta = std::abs(fast.total_cost - brute.total_cost);
        worst = std::max(worst, delta);
        if (delta > 1e-9) ++failures;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream detail;
    detail << "1000 matrices up to 7x7, worst |delta|=" << worst << ", " << seconds << "s";
    return {"hungarian-optimality", failures == 0 && seconds < 10.0, detail.str()};
}

inline CheckResult gradient_checks() {
    constexpr double kH = 1e-4;
    constexpr double kTol = 1e-4;
    std::size_t failures = 0;
    double worst = 0.0;
    for (LossId id : {LossId::box, LossId::nll, LossId::focal, LossId::push, LossId::pull}) {
        RngStream rng(777 + static_cast<std::uint64_t>(id));
        for (int point = 0; point < 100; ++point) {
            const LossProbe probe = checkgen::random_probe(id, rng);
            const std::vector<double> analytic = loss_gradient(probe);
            const std::vector<double> numeric = central_difference_gradient(
                [&probe](const std::vector<double>& x) {
                    LossProbe moved = probe;
                    moved.x = x;
                    return loss_value(moved);
                },
                probe.x, kH);
            for (std::size_t i = 0; i < analytic.size(); ++i) {
                const double denom =
                    std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
                const double rel = std::abs(analytic[i] - numeric[i]) / denom;
                worst = std::max(worst, rel);
                if (rel > kTol) ++failures;
            }
        }
    }
    std::ostringstream detail;
    detail << "5 losses x 100 points, worst rel err=" << worst;
    return {"gradient-checks", failures == 0, detail.str()};
}

inline CheckResult evaluator_oracle() {
    std::ostringstream detail;
    bool ok = true;

    const AnnotationFile dataset = generate_synthetic_dataset(GeneratorParams{}, 200, 11);
    const auto exact = perturb_to_predictions(dataset, 0.0, 1.0, 0.0, 5);
    const EvalReport rd = evaluate(exact, dataset, EvalSetting::default_setting);
    const EvalReport rk = evaluate(exact, dataset, EvalSetting::known_object);
    if (rd.map_full != 1.0 || rk.map_full != 1.0) {
        ok = false;
        detail << "zero-noise mAP not exactly 1 (default=" << rd.map_full
               << ", known-object=" << rk.map_full << "); ";
    }

    // frozen hand cases against the quadratic-time PR oracle
    const double ap1 = average_precision({0, 1}, 1);
    const double ap2 = average_precision({1, 0, 1}, 2);
    if (std::abs(ap1 - 0.5) > 1e-12 || std::abs(ap1 - ap_bruteforce({0, 1}, 1)) > 1e-12) {
        ok = false;
        detail << "AP case {miss,hit} != 0.5; ";
    }
    if (std::abs(ap2 - 5.0 / 6.0) > 1e-12 ||
        std::abs(ap2 - ap_bruteforce({1, 0, 1}, 2)) > 1e-12) {
        ok = false;
        detail << "AP case {hit,miss,hit} != 5/6; ";
    }

    RngStream rng(31);
    std::size_t violations = 0;
    for (int config = 0; config < 50; ++config) {
        const double noise = rng.uniform(0.0, 0.3);
        const double quality = rng.next_double();
        const double fp = rng.uniform(0.0, 3.0);
        const auto preds = perturb_to_predictions(dataset, noise, quality, fp, rng.next_u64());
        const EvalReport d = evaluate(preds, dataset, EvalSetting::default_setting);
        const EvalReport k = evaluate(preds, dataset, EvalSetting::known_object);
        for (const auto& [key, ap] : d.per_category) {
            const auto it = k.per_category.find(key);
            if (it != k.per_category.end() && it->second < ap - 1e-12) ++violations;
        }
    }
    if (violations) {
        ok = false;
        detail << violations << " known-object < default AP violations; ";
    }
    if (ok) detail << "zero-noise mAP exactly 1 in both settings, hand APs match oracle, "
                   << "known-object >= default on 50 configs";
    return {"evaluator-oracle", ok, detail.str()};
}

inline CheckResult postprocess_optimality() {
    const AnnotationFile dataset = generate_synthetic_dataset(GeneratorParams{}, 50, 19);
    const std::size_t n_classes = dataset.manifest.classes.size();
    const std::size_t n_verbs = dataset.manifest.verbs.size();
    const int human_class = dataset.manifest.human_class;
    std::size_t checked = 0, failures = 0;
    for (const auto& scene : dataset.scenes) {
        RngStream rng = RngStream::derive(23, static_cast<std::uint64_t>(scene.image_id));
        std::vector<InstancePrediction> instances;
        for (int i = 0; i < 12; ++i)
            instances.push_back(checkgen::random_instance_prediction(
                rng, n_classes, 8, human_class, i % 3 == 0));
        std::vector<InteractionPrediction> interactions;
        for (int i = 0; i < 8; ++i)
            interactions.push_back(checkgen::random_interaction_prediction(rng, n_verbs, 8));
        for (MatchStrategy strategy :
             {MatchStrategy::vector, MatchStrategy::embedding, MatchStrategy::combined}) {
            const TripletAssembly assembly =
                assemble_triplets(instances, interactions, strategy, human_class, 100);
            if (!assembly.diagnostic.empty()) continue;

            // independent exhaustive pair enumeration with the same tie-break
            std::vector<std::size_t> humans, objects;
            for (std::size_t i = 0; i < instances.size(); ++i) {
                const auto& s = instances[i].class_scores;
                const std::size_t argmax = static_cast<std::size_t>(
                    std::max_element(s.begin(), s.end()) - s.begin());
                if (argmax + 1 == s.size()) continue;
                objects.push_back(i);
                if (static_cast<int>(argmax) == human_class) humans.push_back(i);
            }
            for (std::size_t r = 0; r < interactions.size(); ++r) {
                double best = std::numeric_limits<double>::infinity();
                std::pair<std::size_t, std::size_t> best_pair{0, 0};
                for (std::size_t h : humans)
                    for (std::size_t o : objects) {
                        const auto& hb = instances[h].box;
                        const auto& ob = instances[o].box;
                        const auto& os = instances[o].class_scores;
                        const double so =
                            *std::max_element(os.begin(), os.end());
                        const double sh =
                            instances[h].class_scores[static_cast<std::size_t>(human_class)];
                        double cost = 1.0;
                        if (strategy != MatchStrategy::embedding)
                            cost *= vector_distance_D(interactions[r].vector, hb.cx, hb.cy,
                                                      ob.cx, ob.cy);
                        if (strategy != MatchStrategy::vector)
                            cost *= embedding_distance_R(instances[h].embedding,
                                                         instances[o].embedding,
                                                         interactions[r].embedding_h,
                                                         interactions[r].embedding_o);
                        cost /= sh * so;
                        if (cost < best) {
                            best = cost;
                            best_pair = {h, o};
                        }
                    }
                ++checked;
                if (assembly.pair_of_interaction[r] != best_pair) ++failures;
            }
        }
    }
    std::ostringstream detail;
    detail << checked << " interaction matches equal to exhaustive enumeration, " << failures
           << " mismatches";
    return {"postprocess-optimality", failures == 0 && checked > 0, detail.str()};
}

inline CheckResult adaptivity_scenario() {
    const auto scenes = generate_overlap_scenario(47, 8);
    std::size_t failures = 0;
    double worst = 0.0;
    for (const auto& scene : scenes) {
        const auto gts = scene_gt_interactions(scene);
        if (gts.size() != 2) ++failures;
        // the stress property: both pairs sit on (nearly) the same midpoint
        const double mx1 = (gts[0].vector.xh + gts[0].vector.xo) / 2.0;
        const double my1 = (gts[0].vector.yh + gts[0].vector.yo) / 2.0;
        const double mx2 = (gts[1].vector.xh + gts[1].vector.xo) / 2.0;
        const double my2 = (gts[1].vector.yh + gts[1].vector.yo) / 2.0;
        if (std::hypot(mx1 - mx2, my1 - my2) > 0.01) ++failures;

        RngStream rng = RngStream::derive(53, static_cast<std::uint64_t>(scene.image_id));
        std::vector<InteractionPrediction> preds;
        for (int i = 0; i < 8; ++i)
            preds.push_back(checkgen::random_interaction_prediction(rng, 2, 8));
        const Matrix cost = interaction_cost_matrix(gts, preds);
        const Assignment fast = hungarian_solve(cost);
        const Assignment brute = assignment_bruteforce(cost);
        const double delta = std::abs(fast.total_cost - brute.total_cost);
        worst = std::max(worst, delta);
        if (delta > 1e-9) ++failures;
        if (fast.col_of_row[0] == fast.col_of_row[1]) ++failures;
    }
    std::ostringstream detail;
    detail << scenes.size()
           << " coincident-midpoint scenes assigned to distinct predictions, worst |delta|="
           << worst;
    return {"adaptivity-scenario", failures == 0, detail.str()};
}

inline bool forward_invariants_ok(const ForwardOutput& out, const ModelConfig& cfg,
                                  std::string& problem) {
    if (out.instances.size() != cfg.n_instance_queries ||
        out.interactions.size() != cfg.n_interaction_queries) {
        problem = "prediction set sizes wrong";
        return false;
    }
    for (const auto& p : out.instances) {
        for (double v : {p.box.cx, p.box.cy, p.box.w, p.box.h})
            if (!(v >= 0.0 && v <= 1.0)) {
                problem = "instance box outside [0,1]";
                return false;
            }
        double sum = 0.0;
        for (double s : p.class_scores) sum += s;
        if (std::abs(sum - 1.0) > 1e-6) {
            problem = "class scores do not sum to 1";
            return false;
        }
    }
    for (const auto& p : out.interactions) {
        for (double v : {p.vector.xh, p.vector.yh, p.vector.xo, p.vector.yo})
            if (!(v >= 0.0 && v <= 1.0)) {
                problem = "interaction vector outside [0,1]";
                return false;
            }
        for (double s : p.verb_scores)
            if (!(s > 0.0 && s < 1.0)) {
                problem = "verb score outside (0,1)";
                return false;
            }
    }
    for (const auto& layer : out.layers) {
        if (!layer.ia_applied) continue;
        if (layer.ia_map.rows != cfg.n_interaction_queries ||
            layer.ia_map.cols != cfg.n_instance_queries) {
            problem = "instance-aware map shape wrong";
            return false;
        }
        for (std::size_t i = 0; i < layer.ia_map.rows; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < layer.ia_map.cols; ++j) sum += layer.ia_map(i, j);
            if (std::abs(sum - 1.0) > 1e-9) {
                problem = "instance-aware attention row does not sum to 1";
                return false;
            }
        }
    }
    problem.clear();
    return true;
}

inline CheckResult forward_pass_contract() {
    const auto start = std::chrono::steady_clock::now();
    ModelConfig cfg;  // stock configuration: d=256, 6+6 layers, 100/16 queries, K=8
    cfg.n_object_classes = 5;
    cfg.n_verb_classes = 4;
    const FeatureGrid grid = make_feature_grid(7, 7, 64, 0, 0);
    const ModelWeights weights = init_weights(cfg, 0, grid.channels);
    const ForwardOutput a = forward_full(grid, weights, cfg);
    const ForwardOutput b = forward_full(grid, weights, cfg);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::string problem;
    bool ok = forward_invariants_ok(a, cfg, problem);
    if (ok && !(a.instances == b.instances && a.interactions == b.interactions)) {
        ok = false;
        problem = "two seeded runs differ";
    }
    if (ok) {
        for (std::size_t l = 0; l < a.layers.size(); ++l)
            if (a.layers[l].ia_map.data != b.layers[l].ia_map.data) {
                ok = false;
                problem = "attention records differ between runs";
                break;
            }
    }
    if (ok && seconds >= 30.0) {
        ok = false;
        problem = "runtime over 30s";
    }
    std::ostringstream detail;
    detail << cfg.n_instance_queries << " instances, " << cfg.n_interaction_queries
           << " interactions, bitwise repeatable, " << seconds << "s (two runs)";
    if (!ok) detail << "; " << problem;
    return {"forward-pass-contract", ok, detail.str()};
}

inline CheckResult ia_attention_identity() {
    ModelConfig cfg;
    cfg.d = 64;
    cfg.heads = 4;
    cfg.d_ff = 256;
    cfg.n_enc_layers = 3;
    cfg.n_dec_layers = 4;
    cfg.n_instance_queries = 24;
    cfg.n_interaction_queries = 8;
    cfg.n_object_classes = 5;
    cfg.n_verb_classes = 4;
    cfg.ia_attention_layers = ia_layers_for_mode(IaAttentionMode::all, cfg.n_dec_layers);

    const FeatureGrid grid = make_feature_grid(5, 5, 16, 3, 0);
    ModelWeights weights = init_weights(cfg, 3, grid.channels);
    for (auto& ia : weights.ia_attention) {
        for (double& v : ia.wproj.data) v = 0.0;
        for (double& v : ia.bproj.data) v = 0.0;
    }
    const ForwardOutput with_ia = forward_full(grid, weights, cfg);

    ModelConfig basic = cfg;
    basic.ia_attention_layers.clear();
    const ForwardOutput without_ia = forward_full(grid, weights, basic);

    const bool ok = with_ia.interactions == without_ia.interactions;
    return {"ia-attention-identity", ok,
            ok ? "zeroed value projection reproduces the basic model bitwise"
               : "interaction outputs differ from the basic model"};
}

}  // namespace checks

inline std::vector<CheckResult> run_selfcheck() {
    return {
        checks::hungarian_optimality(),   checks::gradient_checks(),
        checks::evaluator_oracle(),       checks::postprocess_optimality(),
        checks::adaptivity_scenario(),    checks::forward_pass_contract(),
        checks::ia_attention_identity(),
    };
}

}  // namespace asnet
