#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "asnet/dataio.hpp"
#include "asnet/geometry.hpp"
#include "asnet/types.hpp"
#include "asnet/util.hpp"

// HOI mAP under the Default and Known-Object settings with the
// Full/Rare/Non-Rare splits. One AP bucket per (verb, object-class) pair.

namespace asnet {

constexpr std::int64_t kRareThreshold = 10;  // categories seen fewer times are rare

enum class EvalSetting { default_setting, known_object };

inline std::string to_string(EvalSetting s) {
    return s == EvalSetting::default_setting ? "default" : "known-object";
}

struct GtTriplet {
    BoxCxCyWH human_box;
    BoxCxCyWH object_box;
    int verb = 0;
    int object_class = 0;
};

struct EvalReport {
    EvalSetting setting = EvalSetting::default_setting;
    std::map<std::string, double> per_category;  // "verb:object" -> AP
    double map_full = 0.0;
    double map_rare = 0.0;
    double map_nonrare = 0.0;
};

// a prediction counts iff both boxes pass IoU strictly above 0.5 and the
// verb and object class agree
inline bool triplet_correct(const TripletPrediction& pred, const GtTriplet& gt) {
    if (pred.verb != gt.verb || pred.object_class != gt.object_class) return false;
    return iou(to_xyxy(pred.human_box), to_xyxy(gt.human_box)) > 0.5 &&
           iou(to_xyxy(pred.object_box), to_xyxy(gt.object_box)) > 0.5;
}

// All-point interpolated AP (precision envelope) over score-sorted hit/miss
// flags. Each hit advances recall by 1/n_gt and scores the running envelope
// precision. Zero ground truth gives 0; the caller excludes categories that
// are empty on both sides.
inline double average_precision(const std::vector<int>& hit_flags, std::size_t n_gt) {
    if (n_gt == 0) return 0.0;
    const std::size_t n = hit_flags.size();
    std::vector<double> precision(n);
    std::size_t cum = 0;
    for (std::size_t k = 0; k < n; ++k) {
        cum += static_cast<std::size_t>(hit_flags[k] != 0);
        precision[k] = static_cast<double>(cum) / static_cast<double>(k + 1);
    }
    // single division at the end keeps the all-correct case exactly 1
    double running = 0.0, sum = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        running = std::max(running, precision[k]);
        if (hit_flags[k]) sum += running;
    }
    return sum / static_cast<double>(n_gt);
}

namespace detail {

struct PooledPrediction {
    double score;
    int image_id;
    std::size_t index;  // position within its record, the score tie-break
    const TripletPrediction* triplet;
};

// greedy highest-score-first matching; each ground truth credits one hit
inline std::vector<int> greedy_match(std::vector<PooledPrediction>& preds,
                                     const std::map<int, std::vector<GtTriplet>>& gt_by_image) {
    std::stable_sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.image_id != b.image_id) return a.image_id < b.image_id;
        return a.index < b.index;
    });
    std::map<int, std::vector<char>> used;
    for (const auto& [img, gts] : gt_by_image) used[img].assign(gts.size(), 0);
    std::vector<int> flags(preds.size(), 0);
    for (std::size_t k = 0; k < preds.size(); ++k) {
        const auto it = gt_by_image.find(preds[k].image_id);
        if (it == gt_by_image.end()) continue;
        const auto& gts = it->second;
        auto& taken = used[preds[k].image_id];
        double best_overlap = -1.0;
        std::size_t best = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g] || !triplet_correct(*preds[k].triplet, gts[g])) continue;
            const double overlap =
                std::min(iou(to_xyxy(preds[k].triplet->human_box), to_xyxy(gts[g].human_box)),
                         iou(to_xyxy(preds[k].triplet->object_box), to_xyxy(gts[g].object_box)));
            if (overlap > best_overlap) {
                best_overlap = overlap;
                best = g;
            }
        }
        if (best < gts.size()) {
            taken[best] = 1;
            flags[k] = 1;
        }
    }
    return flags;
}

}  // namespace detail

// Pools predictions per category across admissible images, greedy-matches
// them to ground truth and averages the per-category APs. Known-Object
// restricts each category to images whose ground truth contains that
// category's object class. Categories with no ground truth and no
// predictions in scope are excluded from the means.
inline EvalReport evaluate(const std::vector<PredictionRecord>& predictions,
                           const AnnotationFile& gt, EvalSetting setting) {
    std::map<int, const SceneAnnotation*> scene_by_image;
    for (const auto& scene : gt.scenes) {
        if (!scene_by_image.emplace(scene.image_id, &scene).second)
            throw std::runtime_error("evaluate: duplicate image id " +
                                     std::to_string(scene.image_id));
    }
    for (const auto& rec : predictions)
        if (!scene_by_image.count(rec.image_id))
            throw std::runtime_error("evaluate: prediction references unknown image " +
                                     std::to_string(rec.image_id));

    // image -> set of ground-truth object classes, for the Known-Object gate
    std::map<int, std::set<int>> classes_by_image;
    for (const auto& scene : gt.scenes) {
        auto& classes = classes_by_image[scene.image_id];
        for (const auto& inst : scene.instances) classes.insert(inst.cls);
    }
    auto admissible = [&](int image_id, int object_class) {
        if (setting == EvalSetting::default_setting) return true;
        return classes_by_image.at(image_id).count(object_class) > 0;
    };

    struct Category {
        int verb, object_class;
        std::map<int, std::vector<GtTriplet>> gt_by_image;
        std::vector<detail::PooledPrediction> preds;
    };
    std::map<std::pair<int, int>, Category> categories;
    for (const auto& scene : gt.scenes)
        for (const auto& hoi : scene.hois) {
            const auto& human = scene.instances[static_cast<std::size_t>(hoi.human)];
            const auto& object = scene.instances[static_cast<std::size_t>(hoi.object)];
            auto& cat = categories[{hoi.verb, object.cls}];
            cat.verb = hoi.verb;
            cat.object_class = object.cls;
            cat.gt_by_image[scene.image_id].push_back(
                {human.box, object.box, hoi.verb, object.cls});
        }
    for (const auto& rec : predictions)
        for (std::size_t i = 0; i < rec.triplets.size(); ++i) {
            const auto& t = rec.triplets[i];
            if (!admissible(rec.image_id, t.object_class)) continue;
            auto& cat = categories[{t.verb, t.object_class}];
            cat.verb = t.verb;
            cat.object_class = t.object_class;
            cat.preds.push_back({t.score, rec.image_id, i, &t});
        }

    std::vector<Category*> order;
    for (auto& [key, cat] : categories) order.push_back(&cat);

    std::vector<double> aps(order.size(), -1.0);  // -1 marks an excluded category
    parallel_for(order.size(), [&](std::size_t c) {
        Category& cat = *order[c];
        std::size_t n_gt = 0;
        for (const auto& [img, gts] : cat.gt_by_image) n_gt += gts.size();
        if (n_gt == 0 && cat.preds.empty()) return;
        const std::vector<int> flags = detail::greedy_match(cat.preds, cat.gt_by_image);
        aps[c] = average_precision(flags, n_gt);
    });

    EvalReport report;
    report.setting = setting;
    double sum_full = 0.0, sum_rare = 0.0, sum_nonrare = 0.0;
    std::size_t n_full = 0, n_rare = 0, n_nonrare = 0;
    for (std::size_t c = 0; c < order.size(); ++c) {
        if (aps[c] < 0.0) continue;
        const std::string key = hoi_key(order[c]->verb, order[c]->object_class);
        report.per_category[key] = aps[c];
        const auto it = gt.manifest.hoi_counts.find(key);
        const std::int64_t count = it == gt.manifest.hoi_counts.end() ? 0 : it->second;
        sum_full += aps[c];
        ++n_full;
        if (count < kRareThreshold) {
            sum_rare += aps[c];
            ++n_rare;
        } else {
            sum_nonrare += aps[c];
            ++n_nonrare;
        }
    }
    report.map_full = n_full ? sum_full / static_cast<double>(n_full) : 0.0;
    report.map_rare = n_rare ? sum_rare / static_cast<double>(n_rare) : 0.0;
    report.map_nonrare = n_nonrare ? sum_nonrare / static_cast<double>(n_nonrare) : 0.0;
    return report;
}

// ---------------------------------------------------------------------------
// report.json: { setting, per_category, map_full, map_rare, map_nonrare }

inline nlohmann::json report_to_json(const EvalReport& report) {
    return {{"setting", to_string(report.setting)},
            {"per_category", report.per_category},
            {"map_full", report.map_full},
            {"map_rare", report.map_rare},
            {"map_nonrare", report.map_nonrare}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport report;
    try {
        const std::string setting = j.at("setting").get<std::string>();
        if (setting == "default")
            report.setting = EvalSetting::default_setting;
        else if (setting == "known-object")
            report.setting = EvalSetting::known_object;
        else
            throw std::runtime_error("report: unknown setting " + setting);
        report.per_category = j.at("per_category").get<std::map<std::string, double>>();
        report.map_full = j.at("map_full").get<double>();
        report.map_rare = j.at("map_rare").get<double>();
        report.map_nonrare = j.at("map_nonrare").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("report: malformed document: ") + e.what());
    }
    return report;
}

// aligned plain-text summary next to the JSON report
inline std::string report_table(const EvalReport& report, const DatasetManifest& manifest) {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof(line), "%-24s %8s %8s\n", "category", "count", "AP");
    out << "setting: " << to_string(report.setting) << "\n" << line;
    for (const auto& [key, ap] : report.per_category) {
        const auto it = manifest.hoi_counts.find(key);
        const std::int64_t count = it == manifest.hoi_counts.end() ? 0 : it->second;
        std::snprintf(line, sizeof(line), "%-24s %8lld %8.4f\n", key.c_str(),
                      static_cast<long long>(count), ap);
        out << line;
    }
    std::snprintf(line, sizeof(line), "%-24s %8s %8.4f\n", "mAP full", "", report.map_full);
    out << line;
    std::snprintf(line, sizeof(line), "%-24s %8s %8.4f\n", "mAP rare", "", report.map_rare);
    out << line;
    std::snprintf(line, sizeof(line), "%-24s %8s %8.4f\n", "mAP non-rare", "",
                  report.map_nonrare);
    out << line;
    return out.str();
}

}  // namespace asnet
