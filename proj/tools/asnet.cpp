// Command-line front end wiring the pipeline end to end:
//   gen -> infer -> post -> eval, plus match, perturb, overlap and selfcheck.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asnet/config.hpp"
#include "asnet/dataio.hpp"
#include "asnet/evaluation.hpp"
#include "asnet/model.hpp"
#include "asnet/pipeline.hpp"
#include "asnet/postprocess.hpp"
#include "asnet/selfcheck.hpp"
#include "asnet/util.hpp"
#include "asnet/weights_io.hpp"

namespace {

using nlohmann::json;

asnet::AnnotationFile load_annotations(const std::string& path) {
    try {
        return asnet::annotations_from_json(json::parse(asnet::read_file(path)));
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::vector<asnet::ImageRawOutput> load_raw_outputs(const std::string& path) {
    try {
        return asnet::raw_outputs_from_json(json::parse(asnet::read_file(path)));
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::vector<asnet::PredictionRecord> load_predictions(const std::string& path) {
    try {
        return asnet::predictions_from_json(json::parse(asnet::read_file(path)));
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

void write_json(const std::string& path, const json& j) {
    asnet::write_file_atomic(path, j.dump(2) + "\n");
}

struct InferOptions {
    std::string gt_path, out_path, config_path, attn_dir;
    std::string weights_path, save_weights_path;
    std::uint64_t seed = 0;
    std::size_t grid_w = 7, grid_h = 7, channels = 64;
    std::string ia_attn = "all";
    bool zero_ia_projection = false;
    std::size_t max_images = 0;  // 0: all
};

asnet::IaAttentionMode parse_ia_mode(const std::string& s) {
    if (s == "all") return asnet::IaAttentionMode::all;
    if (s == "alternate") return asnet::IaAttentionMode::alternate;
    if (s == "none") return asnet::IaAttentionMode::none;
    throw std::runtime_error("unknown --ia-attn mode: " + s);
}

void dump_attention(const std::string& dir, const asnet::ForwardOutput& out) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto dump = [&](const std::string& stem, const asnet::Matrix& m) {
        if (m.rows == 0) return;
        asnet::write_pgm_row_normalized(dir + "/" + stem + ".pgm", m);
        write_json(dir + "/" + stem + ".json",
                   {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}});
    };
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        const auto& rec = out.layers[l];
        const std::string p = "layer" + std::to_string(l + 1);
        dump(p + "_instance_coattn", rec.instance_co_attention);
        dump(p + "_interaction_coattn", rec.interaction_co_attention);
        if (rec.ia_applied) dump(p + "_ia_map", rec.ia_map);
    }
}

int cmd_infer(const InferOptions& opt, bool ia_attn_given) {
    const asnet::AnnotationFile gt = load_annotations(opt.gt_path);

    asnet::ModelConfig cfg;
    cfg.n_object_classes = gt.manifest.classes.size();
    cfg.n_verb_classes = gt.manifest.verbs.size();
    cfg.ia_attention_layers =
        asnet::ia_layers_for_mode(asnet::IaAttentionMode::all, cfg.n_dec_layers);
    asnet::LossConfig loss_cfg;
    if (!opt.config_path.empty())
        asnet::apply_config_document(json::parse(asnet::read_file(opt.config_path)), cfg,
                                     loss_cfg);
    if (ia_attn_given)
        cfg.ia_attention_layers =
            asnet::ia_layers_for_mode(parse_ia_mode(opt.ia_attn), cfg.n_dec_layers);
    cfg.validate();
    if (cfg.n_object_classes != gt.manifest.classes.size() ||
        cfg.n_verb_classes != gt.manifest.verbs.size())
        throw std::runtime_error("config class/verb counts disagree with " + opt.gt_path);

    asnet::ModelWeights weights =
        opt.weights_path.empty()
            ? asnet::init_weights(cfg, opt.seed, opt.channels)
            : [&] {
                  const json manifest = json::parse(asnet::read_file(opt.weights_path));
                  const auto dir = std::filesystem::path(opt.weights_path).parent_path();
                  const std::string blob =
                      (dir / manifest.at("blob").get<std::string>()).string();
                  return asnet::load_weights(cfg, opt.channels, opt.weights_path, blob);
              }();
    if (opt.zero_ia_projection)
        for (auto& ia : weights.ia_attention) {
            for (double& v : ia.wproj.data) v = 0.0;
            for (double& v : ia.bproj.data) v = 0.0;
        }
    if (!opt.save_weights_path.empty()) {
        std::filesystem::path blob(opt.save_weights_path);
        blob.replace_extension(".bin");
        asnet::save_weights(weights, opt.save_weights_path, blob.string());
    }

    std::vector<asnet::ImageRawOutput> outputs;
    const std::size_t limit =
        opt.max_images == 0 ? gt.scenes.size() : std::min(opt.max_images, gt.scenes.size());
    for (std::size_t i = 0; i < limit; ++i) {
        const auto& scene = gt.scenes[i];
        const asnet::FeatureGrid grid = asnet::make_feature_grid(
            opt.grid_w, opt.grid_h, opt.channels, opt.seed, scene.image_id);
        const asnet::ForwardOutput fwd = asnet::forward_full(grid, weights, cfg);
        if (i == 0 && !opt.attn_dir.empty()) dump_attention(opt.attn_dir, fwd);
        outputs.push_back({scene.image_id, fwd.instances, fwd.interactions});
    }
    write_json(opt.out_path, asnet::raw_outputs_to_json(outputs));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive set-based HOI detection pipeline"};
    app.require_subcommand(1);

    // gen
    std::uint64_t seed = 0;
    std::size_t n_images = 50;
    std::string out_path;
    asnet::GeneratorParams gen_params;
    auto* gen = app.add_subcommand("gen", "generate a synthetic annotated dataset");
    gen->add_option("--seed", seed, "generation seed");
    gen->add_option("--images", n_images, "number of images")->check(CLI::PositiveNumber);
    gen->add_option("--classes", gen_params.n_classes, "object classes including person");
    gen->add_option("--verbs", gen_params.n_verbs, "verb classes");
    gen->add_option("--human-class", gen_params.human_class, "human class index");
    gen->add_option("--out", out_path, "annotations.json path")->required();

    // overlap
    std::size_t n_scenes = 8;
    auto* overlap = app.add_subcommand("overlap", "generate coincident-midpoint stress scenes");
    overlap->add_option("--seed", seed, "generation seed");
    overlap->add_option("--scenes", n_scenes, "number of scenes")->check(CLI::PositiveNumber);
    overlap->add_option("--out", out_path, "annotations.json path")->required();

    // infer
    InferOptions infer_opt;
    auto* infer = app.add_subcommand("infer", "seeded-weight forward pass over a dataset");
    infer->add_option("--gt", infer_opt.gt_path, "annotations.json")->required();
    infer->add_option("--seed", infer_opt.seed, "weight and feature seed");
    infer->add_option("--config", infer_opt.config_path, "JSON config file");
    infer->add_option("--out", infer_opt.out_path, "raw outputs path")->required();
    infer->add_option("--grid-w", infer_opt.grid_w, "feature grid width");
    infer->add_option("--grid-h", infer_opt.grid_h, "feature grid height");
    infer->add_option("--channels", infer_opt.channels, "feature grid channels");
    auto* ia_attn_opt = infer->add_option("--ia-attn", infer_opt.ia_attn,
                                          "instance-aware attention placement")
                            ->check(CLI::IsMember({"all", "alternate", "none"}));
    infer->add_flag("--zero-ia-projection", infer_opt.zero_ia_projection,
                    "zero the instance-aware value projection");
    infer->add_option("--images", infer_opt.max_images, "limit the number of images");
    infer->add_option("--weights", infer_opt.weights_path, "load weights manifest");
    infer->add_option("--save-weights", infer_opt.save_weights_path,
                      "write weights manifest (+ .bin blob)");
    infer->add_option("--attn-dir", infer_opt.attn_dir,
                      "dump first-image attention maps (PGM + JSON) here");

    // match
    std::string gt_path, raw_path, pred_path, config_path;
    auto* match = app.add_subcommand("match", "Hungarian matching and loss report");
    match->add_option("--gt", gt_path, "annotations.json")->required();
    match->add_option("--raw", raw_path, "raw outputs from infer")->required();
    match->add_option("--config", config_path, "JSON config file");
    match->add_option("--out", out_path, "report path")->required();

    // post
    std::string strategy = "combined";
    std::size_t top_n = 100;
    double score_floor = 0.0;
    auto* post = app.add_subcommand("post", "assemble scored triplets from raw outputs");
    post->add_option("--gt", gt_path, "annotations.json (manifest)")->required();
    post->add_option("--raw", raw_path, "raw outputs from infer")->required();
    post->add_option("--strategy", strategy, "matching strategy")
        ->check(CLI::IsMember({"vector", "embedding", "combined"}));
    post->add_option("--top-n", top_n, "triplets kept per image")->check(CLI::PositiveNumber);
    post->add_option("--score-floor", score_floor, "minimum verb score");
    post->add_option("--out", out_path, "predictions.json path")->required();

    // eval
    std::string setting = "default";
    auto* eval = app.add_subcommand("eval", "HOI mAP evaluation");
    eval->add_option("--gt", gt_path, "annotations.json")->required();
    eval->add_option("--pred", pred_path, "predictions.json")->required();
    eval->add_option("--setting", setting, "evaluation setting")
        ->check(CLI::IsMember({"default", "known-object"}));
    eval->add_option("--out", out_path, "report.json path")->required();

    // perturb
    double box_noise = 0.0, score_quality = 1.0, fp_rate = 0.0;
    auto* perturb = app.add_subcommand("perturb", "oracle predictions from perturbed GT");
    perturb->add_option("--gt", gt_path, "annotations.json")->required();
    perturb->add_option("--seed", seed, "perturbation seed");
    perturb->add_option("--box-noise", box_noise, "uniform box jitter bound");
    perturb->add_option("--score-quality", score_quality, "1 ranks true positives first")
        ->check(CLI::Range(0.0, 1.0));
    perturb->add_option("--fp-rate", fp_rate, "false positives per image");
    perturb->add_option("--out", out_path, "predictions.json path")->required();

    // selfcheck
    auto* selfcheck = app.add_subcommand("selfcheck", "run the full invariant/oracle suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto file = asnet::generate_synthetic_dataset(gen_params, n_images, seed);
            write_json(out_path, asnet::annotations_to_json(file));
        } else if (overlap->parsed()) {
            const auto file = asnet::generate_overlap_dataset(seed, n_scenes);
            write_json(out_path, asnet::annotations_to_json(file));
        } else if (infer->parsed()) {
            return cmd_infer(infer_opt, ia_attn_opt->count() > 0);
        } else if (match->parsed()) {
            const auto gt = load_annotations(gt_path);
            const auto raw = load_raw_outputs(raw_path);
            asnet::ModelConfig model_cfg;
            asnet::LossConfig loss_cfg;
            if (!config_path.empty())
                asnet::apply_config_document(json::parse(asnet::read_file(config_path)),
                                             model_cfg, loss_cfg);
            std::map<int, const asnet::SceneAnnotation*> scenes;
            for (const auto& s : gt.scenes) scenes[s.image_id] = &s;
            json images = json::array();
            double total = 0.0;
            for (const auto& img : raw) {
                const auto it = scenes.find(img.image_id);
                if (it == scenes.end())
                    throw std::runtime_error("raw outputs reference unknown image " +
                                             std::to_string(img.image_id));
                const auto report = asnet::scene_losses(*it->second, img.instances,
                                                        img.interactions, loss_cfg);
                total += report.total;
                images.push_back(
                    {{"image_id", img.image_id},
                     {"instance_assignment", report.instance_assignment.col_of_row},
                     {"instance_matching_cost", report.instance_assignment.total_cost},
                     {"interaction_assignment", report.interaction_assignment.col_of_row},
                     {"interaction_matching_cost", report.interaction_assignment.total_cost},
                     {"losses",
                      {{"instance", report.instance},
                       {"interaction", report.interaction},
                       {"push", report.push},
                       {"pull", report.pull},
                       {"total", report.total}}}});
            }
            write_json(out_path,
                       {{"images", images},
                        {"mean_total", raw.empty() ? 0.0 : total / static_cast<double>(raw.size())}});
        } else if (post->parsed()) {
            const auto gt = load_annotations(gt_path);
            const auto raw = load_raw_outputs(raw_path);
            const auto mode = asnet::match_strategy_from_string(strategy);
            std::vector<asnet::PredictionRecord> records(raw.size());
            std::vector<std::string> diagnostics(raw.size());
            asnet::parallel_for(raw.size(), [&](std::size_t i) {
                const auto assembly =
                    asnet::assemble_triplets(raw[i].instances, raw[i].interactions, mode,
                                             gt.manifest.human_class, top_n, score_floor);
                records[i] = {raw[i].image_id, assembly.triplets};
                diagnostics[i] = assembly.diagnostic;
            });
            for (std::size_t i = 0; i < diagnostics.size(); ++i)
                if (!diagnostics[i].empty())
                    std::cerr << "image " << records[i].image_id << ": " << diagnostics[i]
                              << "\n";
            write_json(out_path, asnet::predictions_to_json(records));
        } else if (eval->parsed()) {
            const auto gt = load_annotations(gt_path);
            const auto preds = load_predictions(pred_path);
            const auto mode = setting == "default" ? asnet::EvalSetting::default_setting
                                                   : asnet::EvalSetting::known_object;
            const auto report = asnet::evaluate(preds, gt, mode);
            std::cout << asnet::report_table(report, gt.manifest);
            write_json(out_path, asnet::report_to_json(report));
        } else if (perturb->parsed()) {
            const auto gt = load_annotations(gt_path);
            const auto records =
                asnet::perturb_to_predictions(gt, box_noise, score_quality, fp_rate, seed);
            write_json(out_path, asnet::predictions_to_json(records));
        } else if (selfcheck->parsed()) {
            bool all_ok = true;
            for (const auto& result : asnet::run_selfcheck()) {
                std::cout << (result.passed ? "[PASS] " : "[FAIL] ") << result.name << ": "
                          << result.detail << "\n";
                all_ok = all_ok && result.passed;
            }
            return all_ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
