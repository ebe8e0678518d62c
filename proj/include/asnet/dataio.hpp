#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "asnet/geometry.hpp"
#include "asnet/matrix.hpp"
#include "asnet/types.hpp"

// Annotation and prediction schemas, deterministic synthetic-scene
// generation, and the ground-truth perturbation oracle used to validate the
// evaluator.

namespace asnet {

struct SceneInstance {
    BoxCxCyWH box;
    int cls = 0;

    bool operator==(const SceneInstance&) const = default;
};

struct SceneHoi {
    int human = 0;   // index into instances
    int object = 0;  // index into instances
    int verb = 0;

    bool operator==(const SceneHoi&) const = default;
};

struct SceneAnnotation {
    int image_id = 0;
    std::vector<SceneInstance> instances;
    std::vector<SceneHoi> hois;

    bool operator==(const SceneAnnotation&) const = default;
};

struct DatasetManifest {
    std::vector<std::string> classes;
    std::vector<std::string> verbs;
    int human_class = 0;
    std::map<std::string, std::int64_t> hoi_counts;  // "verb:object" -> occurrences
    std::uint64_t seed = 0;

    bool operator==(const DatasetManifest&) const = default;
};

struct AnnotationFile {
    DatasetManifest manifest;
    std::vector<SceneAnnotation> scenes;

    bool operator==(const AnnotationFile&) const = default;
};

struct PredictionRecord {
    int image_id = 0;
    std::vector<TripletPrediction> triplets;

    bool operator==(const PredictionRecord&) const = default;
};

inline std::string hoi_key(int verb, int object_class) {
    return std::to_string(verb) + ":" + std::to_string(object_class);
}

// ---------------------------------------------------------------------------
// validation

inline void validate_scene(const SceneAnnotation& scene, const DatasetManifest& manifest) {
    const auto context = "image " + std::to_string(scene.image_id);
    for (const auto& inst : scene.instances) {
        if (inst.cls < 0 || static_cast<std::size_t>(inst.cls) >= manifest.classes.size())
            throw std::runtime_error(context + ": instance class out of range");
        const auto& b = inst.box;
        if (!(b.w >= 0.0 && b.h >= 0.0 && b.cx >= 0.0 && b.cx <= 1.0 && b.cy >= 0.0 &&
              b.cy <= 1.0))
            throw std::runtime_error(context + ": invalid instance box");
    }
    for (const auto& hoi : scene.hois) {
        const int n = static_cast<int>(scene.instances.size());
        if (hoi.human < 0 || hoi.human >= n || hoi.object < 0 || hoi.object >= n)
            throw std::runtime_error(context + ": hoi instance index out of range");
        if (hoi.verb < 0 || static_cast<std::size_t>(hoi.verb) >= manifest.verbs.size())
            throw std::runtime_error(context + ": hoi verb out of range");
        if (scene.instances[static_cast<std::size_t>(hoi.human)].cls != manifest.human_class)
            throw std::runtime_error(context + ": hoi human index does not point at a human");
    }
}

inline void validate_annotations(const AnnotationFile& file) {
    if (file.manifest.classes.empty() || file.manifest.verbs.empty())
        throw std::runtime_error("manifest: classes and verbs must be nonempty");
    if (file.manifest.human_class < 0 ||
        static_cast<std::size_t>(file.manifest.human_class) >= file.manifest.classes.size())
        throw std::runtime_error("manifest: human_class out of range");
    for (const auto& scene : file.scenes) validate_scene(scene, file.manifest);
}

// ---------------------------------------------------------------------------
// synthetic generation

struct GeneratorParams {
    std::size_t n_classes = 6;  // including the human class
    std::size_t n_verbs = 5;
    int human_class = 0;
};

namespace detail {

inline BoxCxCyWH random_box(RngStream& rng) {
    const double w = rng.uniform(0.05, 0.4);
    const double h = rng.uniform(0.05, 0.4);
    const double cx = rng.uniform(w / 2.0, 1.0 - w / 2.0);
    const double cy = rng.uniform(h / 2.0, 1.0 - h / 2.0);
    return {cx, cy, w, h};
}

inline DatasetManifest make_manifest(const GeneratorParams& params,
                                     const std::vector<SceneAnnotation>& scenes,
                                     std::uint64_t seed) {
    DatasetManifest manifest;
    manifest.human_class = params.human_class;
    manifest.seed = seed;
    for (std::size_t c = 0; c < params.n_classes; ++c)
        manifest.classes.push_back(static_cast<int>(c) == params.human_class
                                       ? "person"
                                       : "class" + std::to_string(c));
    for (std::size_t v = 0; v < params.n_verbs; ++v)
        manifest.verbs.push_back("verb" + std::to_string(v));
    for (const auto& scene : scenes)
        for (const auto& hoi : scene.hois) {
            const int oclass = scene.instances[static_cast<std::size_t>(hoi.object)].cls;
            ++manifest.hoi_counts[hoi_key(hoi.verb, oclass)];
        }
    return manifest;
}

}  // namespace detail

// Random but valid scenes: 1-4 humans, 1-6 objects and 1-6 distinct HOI
// triplets per image, all boxes inside the unit square. Bitwise identical
// for identical seeds.
inline AnnotationFile generate_synthetic_dataset(const GeneratorParams& params,
                                                 std::size_t n_images, std::uint64_t seed) {
    if (n_images < 1) throw std::invalid_argument("generate_synthetic_dataset: need >= 1 image");
    if (params.n_classes < 2 || params.n_verbs < 1)
        throw std::invalid_argument(
            "generate_synthetic_dataset: need at least two classes and one verb");
    if (params.human_class < 0 ||
        static_cast<std::size_t>(params.human_class) >= params.n_classes)
        throw std::invalid_argument("generate_synthetic_dataset: human_class out of range");

    RngStream rng(seed);
    AnnotationFile file;
    file.scenes.reserve(n_images);
    for (std::size_t img = 0; img < n_images; ++img) {
        SceneAnnotation scene;
        scene.image_id = static_cast<int>(img);
        const std::size_t n_humans = static_cast<std::size_t>(rng.uniform_int(1, 4));
        const std::size_t n_objects = static_cast<std::size_t>(rng.uniform_int(1, 6));
        for (std::size_t i = 0; i < n_humans; ++i)
            scene.instances.push_back({detail::random_box(rng), params.human_class});
        for (std::size_t i = 0; i < n_objects; ++i)
            scene.instances.push_back(
                {detail::random_box(rng),
                 static_cast<int>(rng.next_below(params.n_classes))});
        const std::size_t n_hois = static_cast<std::size_t>(rng.uniform_int(1, 6));
        for (std::size_t i = 0; i < n_hois; ++i) {
            for (int attempt = 0; attempt < 20; ++attempt) {
                SceneHoi hoi;
                hoi.human = static_cast<int>(rng.next_below(n_humans));
                hoi.object = static_cast<int>(n_humans + rng.next_below(n_objects));
                hoi.verb = static_cast<int>(rng.next_below(params.n_verbs));
                if (std::find(scene.hois.begin(), scene.hois.end(), hoi) == scene.hois.end()) {
                    scene.hois.push_back(hoi);
                    break;
                }
            }
        }
        file.scenes.push_back(std::move(scene));
    }
    file.manifest = detail::make_manifest(params, file.scenes, seed);
    validate_annotations(file);
    return file;
}

// Stress scenes for adaptive matching: each scene carries two ground-truth
// interactions with different verbs whose human-object midpoints coincide
// within 0.01 and whose union boxes overlap with IoU above 0.7.
inline std::vector<SceneAnnotation> generate_overlap_scenario(std::uint64_t seed,
                                                              std::size_t n_scenes = 8) {
    RngStream rng(seed);
    std::vector<SceneAnnotation> scenes;
    scenes.reserve(n_scenes);
    for (std::size_t img = 0; img < n_scenes; ++img) {
        auto jitter = [&rng] { return rng.uniform(-0.002, 0.002); };
        const double size = 0.25 + rng.uniform(-0.01, 0.01);
        SceneAnnotation scene;
        scene.image_id = static_cast<int>(img);
        // two humans on the left, two objects on the right, crossed so both
        // pairs share the same midpoint
        scene.instances = {
            {{0.3 + jitter(), 0.35 + jitter(), size, size}, 0},
            {{0.3 + jitter(), 0.65 + jitter(), size, size}, 0},
            {{0.7 + jitter(), 0.65 + jitter(), size, size}, 1},
            {{0.7 + jitter(), 0.35 + jitter(), size, size}, 1},
        };
        scene.hois = {{0, 2, 0}, {1, 3, 1}};
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

inline AnnotationFile generate_overlap_dataset(std::uint64_t seed, std::size_t n_scenes = 8) {
    GeneratorParams params;
    params.n_classes = 2;
    params.n_verbs = 2;
    params.human_class = 0;
    AnnotationFile file;
    file.scenes = generate_overlap_scenario(seed, n_scenes);
    file.manifest = detail::make_manifest(params, file.scenes, seed);
    validate_annotations(file);
    return file;
}

// ---------------------------------------------------------------------------
// perturbation oracle

// Copies every ground-truth triplet with box jitter bounded by box_noise and
// scores interpolated between pure noise (score_quality 0) and certainty
// (score_quality 1); injects fp_rate false positives per image scored low
// when score_quality is high. Zero noise reproduces the ground truth and
// must evaluate to mAP 1.
inline std::vector<PredictionRecord> perturb_to_predictions(const AnnotationFile& gt,
                                                            double box_noise,
                                                            double score_quality, double fp_rate,
                                                            std::uint64_t seed) {
    if (box_noise < 0.0 || fp_rate < 0.0 || score_quality < 0.0 || score_quality > 1.0)
        throw std::invalid_argument("perturb_to_predictions: parameter out of range");
    const double q = score_quality;
    std::vector<PredictionRecord> records;
    records.reserve(gt.scenes.size());
    for (const auto& scene : gt.scenes) {
        RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(scene.image_id));
        auto jitter_box = [&](BoxCxCyWH b) {
            if (box_noise == 0.0) return b;
            b.cx = std::clamp(b.cx + rng.uniform(-box_noise, box_noise), 0.0, 1.0);
            b.cy = std::clamp(b.cy + rng.uniform(-box_noise, box_noise), 0.0, 1.0);
            b.w = std::max(0.0, b.w + rng.uniform(-box_noise, box_noise));
            b.h = std::max(0.0, b.h + rng.uniform(-box_noise, box_noise));
            return b;
        };
        auto good_score = [&] { return std::max(1e-9, q + (1.0 - q) * rng.next_double()); };
        auto bad_score = [&] { return std::max(1e-9, (1.0 - q) * rng.next_double()); };

        PredictionRecord rec;
        rec.image_id = scene.image_id;
        for (const auto& hoi : scene.hois) {
            TripletPrediction t;
            t.human_box = jitter_box(scene.instances[static_cast<std::size_t>(hoi.human)].box);
            t.object_box = jitter_box(scene.instances[static_cast<std::size_t>(hoi.object)].box);
            t.object_class = scene.instances[static_cast<std::size_t>(hoi.object)].cls;
            t.verb = hoi.verb;
            t.human_score = good_score();
            t.object_score = good_score();
            const double verb_score = good_score();
            t.score = verb_score * t.human_score * t.object_score;
            rec.triplets.push_back(t);
        }
        std::size_t n_fp = static_cast<std::size_t>(fp_rate);
        if (rng.next_double() < fp_rate - std::floor(fp_rate)) ++n_fp;
        for (std::size_t i = 0; i < n_fp; ++i) {
            TripletPrediction t;
            t.human_box = detail::random_box(rng);
            t.object_box = detail::random_box(rng);
            t.object_class = static_cast<int>(rng.next_below(gt.manifest.classes.size()));
            t.verb = static_cast<int>(rng.next_below(gt.manifest.verbs.size()));
            t.human_score = bad_score();
            t.object_score = bad_score();
            t.score = bad_score() * t.human_score * t.object_score;
            rec.triplets.push_back(t);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

// ---------------------------------------------------------------------------
// JSON schemas
//
// annotations.json: { manifest: { classes, verbs, human_class, hoi_counts,
//                     seed }, scenes: [ { image_id, instances: [ { box:
//                     [cx,cy,w,h], class } ], hois: [ { h, o, verb } ] } ] }
// predictions.json: [ { image_id, triplets: [ { hbox, hscore, obox, oclass,
//                     oscore, verb, score } ] } ]
// All boxes are normalized (cx, cy, w, h); indices are zero-based.

namespace detail {

inline nlohmann::json box_to_json(const BoxCxCyWH& b) {
    return nlohmann::json::array({b.cx, b.cy, b.w, b.h});
}

inline BoxCxCyWH box_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw std::runtime_error("box must be a 4-array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace detail

inline nlohmann::json annotations_to_json(const AnnotationFile& file) {
    nlohmann::json scenes = nlohmann::json::array();
    for (const auto& scene : file.scenes) {
        nlohmann::json instances = nlohmann::json::array();
        for (const auto& inst : scene.instances)
            instances.push_back({{"box", detail::box_to_json(inst.box)}, {"class", inst.cls}});
        nlohmann::json hois = nlohmann::json::array();
        for (const auto& hoi : scene.hois)
            hois.push_back({{"h", hoi.human}, {"o", hoi.object}, {"verb", hoi.verb}});
        scenes.push_back({{"image_id", scene.image_id},
                          {"instances", instances},
                          {"hois", hois}});
    }
    return {{"manifest",
             {{"classes", file.manifest.classes},
              {"verbs", file.manifest.verbs},
              {"human_class", file.manifest.human_class},
              {"hoi_counts", file.manifest.hoi_counts},
              {"seed", file.manifest.seed}}},
            {"scenes", scenes}};
}

inline AnnotationFile annotations_from_json(const nlohmann::json& j) {
    AnnotationFile file;
    try {
        const auto& m = j.at("manifest");
        file.manifest.classes = m.at("classes").get<std::vector<std::string>>();
        file.manifest.verbs = m.at("verbs").get<std::vector<std::string>>();
        file.manifest.human_class = m.at("human_class").get<int>();
        file.manifest.hoi_counts =
            m.at("hoi_counts").get<std::map<std::string, std::int64_t>>();
        file.manifest.seed = m.at("seed").get<std::uint64_t>();
        for (const auto& s : j.at("scenes")) {
            SceneAnnotation scene;
            scene.image_id = s.at("image_id").get<int>();
            for (const auto& inst : s.at("instances"))
                scene.instances.push_back(
                    {detail::box_from_json(inst.at("box")), inst.at("class").get<int>()});
            for (const auto& hoi : s.at("hois"))
                scene.hois.push_back({hoi.at("h").get<int>(), hoi.at("o").get<int>(),
                                      hoi.at("verb").get<int>()});
            file.scenes.push_back(std::move(scene));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("annotations: malformed document: ") + e.what());
    }
    validate_annotations(file);
    return file;
}

inline nlohmann::json predictions_to_json(const std::vector<PredictionRecord>& records) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& rec : records) {
        nlohmann::json triplets = nlohmann::json::array();
        for (const auto& t : rec.triplets)
            triplets.push_back({{"hbox", detail::box_to_json(t.human_box)},
                                {"hscore", t.human_score},
                                {"obox", detail::box_to_json(t.object_box)},
                                {"oclass", t.object_class},
                                {"oscore", t.object_score},
                                {"verb", t.verb},
                                {"score", t.score}});
        out.push_back({{"image_id", rec.image_id}, {"triplets", triplets}});
    }
    return out;
}

inline std::vector<PredictionRecord> predictions_from_json(const nlohmann::json& j) {
    std::vector<PredictionRecord> records;
    try {
        for (const auto& r : j) {
            PredictionRecord rec;
            rec.image_id = r.at("image_id").get<int>();
            for (const auto& t : r.at("triplets")) {
                TripletPrediction p;
                p.human_box = detail::box_from_json(t.at("hbox"));
                p.human_score = t.at("hscore").get<double>();
                p.object_box = detail::box_from_json(t.at("obox"));
                p.object_class = t.at("oclass").get<int>();
                p.object_score = t.at("oscore").get<double>();
                p.verb = t.at("verb").get<int>();
                p.score = t.at("score").get<double>();
                if (!(p.score > 0.0 && p.score <= 1.0))
                    throw std::runtime_error("triplet score outside (0,1] on image " +
                                             std::to_string(rec.image_id));
                rec.triplets.push_back(p);
            }
            records.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("predictions: malformed document: ") + e.what());
    }
    return records;
}

}  // namespace asnet
