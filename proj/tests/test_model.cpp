#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "asnet/config.hpp"
#include "asnet/model.hpp"
#include "asnet/pipeline.hpp"
#include "asnet/weights_io.hpp"

using namespace asnet;
using Catch::Approx;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.d = 32;
    cfg.heads = 4;
    cfg.d_ff = 64;
    cfg.n_enc_layers = 2;
    cfg.n_dec_layers = 3;
    cfg.n_instance_queries = 20;
    cfg.n_interaction_queries = 8;
    cfg.n_object_classes = 5;
    cfg.n_verb_classes = 4;
    cfg.embed_dim = 8;
    cfg.ia_attention_layers = {1, 2, 3};
    return cfg;
}

}  // namespace

TEST_CASE("positional encoding basics") {
    const Matrix a = positional_encoding_2d(7, 5, 16);
    const Matrix b = positional_encoding_2d(7, 5, 16);
    CHECK(a == b);
    CHECK(a.rows == 35);
    CHECK(a.cols == 16);
    for (double v : a.data) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(positional_encoding_2d(4, 4, 10), std::invalid_argument);
}

TEST_CASE("positional encoding rows are distinct up to 64x64") {
    for (std::size_t d : {16u, 256u}) {
        const Matrix pe = positional_encoding_2d(64, 64, d);
        std::vector<std::size_t> order(pe.rows);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::lexicographical_compare(pe.row(a), pe.row(a) + pe.cols, pe.row(b),
                                                pe.row(b) + pe.cols);
        });
        for (std::size_t i = 0; i + 1 < order.size(); ++i)
            REQUIRE(!std::equal(pe.row(order[i]), pe.row(order[i]) + pe.cols,
                                pe.row(order[i + 1])));
    }
}

TEST_CASE("project and flatten") {
    SECTION("identity projection flattens only") {
        FeatureGrid grid(2, 2, 3);
        RngStream rng(2);
        for (double& v : grid.data) v = rng.uniform(-1.0, 1.0);
        Matrix identity(3, 3);
        for (int i = 0; i < 3; ++i) identity(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
        const Matrix seq = project_and_flatten(grid, identity, Matrix(1, 3));
        REQUIRE(seq.rows == 4);
        for (std::size_t p = 0; p < 4; ++p)
            for (std::size_t c = 0; c < 3; ++c) CHECK(seq(p, c) == grid.data[p * 3 + c]);
    }
    SECTION("zero projection gives zeros") {
        FeatureGrid grid(3, 2, 4);
        for (double& v : grid.data) v = 1.5;
        const Matrix seq = project_and_flatten(grid, Matrix(4, 8), Matrix(1, 8));
        CHECK(seq == Matrix(6, 8));
    }
    SECTION("hand-computed 2x1 grid with a 2->2 projection") {
        FeatureGrid grid(2, 1, 2);
        grid.at(0, 0, 0) = 1.0;
        grid.at(0, 0, 1) = 2.0;
        grid.at(1, 0, 0) = 3.0;
        grid.at(1, 0, 1) = 4.0;
        const Matrix w = Matrix::from_rows({{1, -1}, {2, 0.5}});
        const Matrix b = Matrix::from_rows({{10, 20}});
        const Matrix seq = project_and_flatten(grid, w, b);
        // row 0: [1*1 + 2*2 + 10, 1*(-1) + 2*0.5 + 20]
        CHECK(seq(0, 0) == Approx(15.0).margin(1e-12));
        CHECK(seq(0, 1) == Approx(20.0).margin(1e-12));
        CHECK(seq(1, 0) == Approx(21.0).margin(1e-12));
        CHECK(seq(1, 1) == Approx(19.0).margin(1e-12));
    }
    SECTION("channel mismatch rejected") {
        CHECK_THROWS_AS(project_and_flatten(FeatureGrid(2, 2, 3), Matrix(4, 8), Matrix(1, 8)),
                        std::invalid_argument);
    }
}

namespace {

// scalar re-computation of one encoder layer on a single token with the FFN
// weights zeroed: attention reduces to the projected value path
std::vector<double> hand_single_token_encoder(const std::vector<double>& x,
                                              const EncoderLayerWeights& w, double eps) {
    const std::size_t d = x.size();
    std::vector<double> value(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < d; ++i) value[j] += x[i] * w.self_attn.wv(i, j);
        value[j] += w.self_attn.bv(0, j);
    }
    std::vector<double> attn(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < d; ++i) attn[j] += value[i] * w.self_attn.wo(i, j);
        attn[j] += w.self_attn.bo(0, j);
    }
    std::vector<double> summed(d);
    for (std::size_t j = 0; j < d; ++j) summed[j] = x[j] + attn[j];
    auto normalize = [&](const std::vector<double>& v) {
        double mean = 0.0;
        for (double t : v) mean += t;
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double t : v) var += (t - mean) * (t - mean);
        var /= static_cast<double>(d);
        std::vector<double> out(d);
        for (std::size_t j = 0; j < d; ++j) out[j] = (v[j] - mean) / std::sqrt(var + eps);
        return out;
    };
    // zero FFN output: the second sublayer is layer-norm of the unchanged row
    return normalize(normalize(summed));
}

}  // namespace

TEST_CASE("encoder single-token forward matches scalar evaluation") {
    ModelConfig cfg = small_config();
    cfg.d = 4;
    cfg.heads = 1;
    cfg.d_ff = 8;
    cfg.n_enc_layers = 1;
    ModelWeights w = init_weights(cfg, 5, 4);
    for (double& v : w.encoder[0].ffn.w1.data) v = 0.0;
    for (double& v : w.encoder[0].ffn.b1.data) v = 0.0;
    for (double& v : w.encoder[0].ffn.w2.data) v = 0.0;
    for (double& v : w.encoder[0].ffn.b2.data) v = 0.0;

    const Matrix seq = Matrix::from_rows({{0.4, -0.3, 0.8, 0.1}});
    const Matrix pe(1, 4);  // zero positional encoding isolates the value path
    const Matrix out = encoder_forward(seq, pe, w.encoder, cfg);
    const auto expected =
        hand_single_token_encoder({0.4, -0.3, 0.8, 0.1}, w.encoder[0], 1e-5);
    for (std::size_t j = 0; j < 4; ++j) CHECK(out(0, j) == Approx(expected[j]).margin(1e-12));
}

TEST_CASE("encoder keeps shape and is deterministic") {
    const ModelConfig cfg = small_config();
    const ModelWeights w = init_weights(cfg, 1, 16);
    const Matrix pe = positional_encoding_2d(4, 3, cfg.d);
    RngStream rng(6);
    Matrix seq(12, cfg.d);
    for (double& v : seq.data) v = rng.uniform(-1.0, 1.0);
    const Matrix out = encoder_forward(seq, pe, w.encoder, cfg);
    CHECK(out.rows == seq.rows);
    CHECK(out.cols == seq.cols);
    CHECK(encoder_forward(seq, pe, w.encoder, cfg) == out);
}

TEST_CASE("decoder layer shape and single-query hand case") {
    ModelConfig cfg = small_config();

    SECTION("shapes for both branch sizes") {
        const ModelWeights w = init_weights(cfg, 7, 16);
        const Matrix memory = positional_encoding_2d(3, 3, cfg.d);
        for (std::size_t n : {cfg.n_instance_queries, cfg.n_interaction_queries}) {
            Matrix queries(n, cfg.d);
            Matrix qpe(n, cfg.d, 0.25);
            const Matrix out = decoder_layer_forward(queries, qpe, memory, memory,
                                                     w.instance_decoder[0], cfg);
            CHECK(out.rows == n);
            CHECK(out.cols == cfg.d);
        }
    }

    SECTION("single query over a single memory token, scalar check") {
        cfg.d = 4;
        cfg.heads = 1;
        cfg.d_ff = 8;
        ModelWeights w = init_weights(cfg, 11, 4);
        DecoderLayerWeights& layer = w.instance_decoder[0];
        for (Matrix* m : {&layer.ffn.w1, &layer.ffn.b1, &layer.ffn.w2, &layer.ffn.b2})
            for (double& v : m->data) v = 0.0;

        const Matrix queries(1, 4);                            // first layer starts from zeros
        const Matrix qpe = Matrix::from_rows({{0.3, -0.2, 0.7, 0.05}});
        const Matrix memory = Matrix::from_rows({{0.9, 0.2, -0.4, 0.6}});
        const Matrix mpe(1, 4);
        const Matrix out =
            decoder_layer_forward(queries, qpe, memory, mpe, layer, cfg);

        // self-attention on the zero query: value path is the bias-projected zero row
        auto project = [](const std::vector<double>& x, const Matrix& wm, const Matrix& bm) {
            std::vector<double> y(wm.cols, 0.0);
            for (std::size_t j = 0; j < wm.cols; ++j) {
                for (std::size_t i = 0; i < wm.rows; ++i) y[j] += x[i] * wm(i, j);
                y[j] += bm(0, j);
            }
            return y;
        };
        auto normalize = [](const std::vector<double>& v) {
            double mean = 0.0;
            for (double t : v) mean += t;
            mean /= static_cast<double>(v.size());
            double var = 0.0;
            for (double t : v) var += (t - mean) * (t - mean);
            var /= static_cast<double>(v.size());
            std::vector<double> out(v.size());
            for (std::size_t j = 0; j < v.size(); ++j)
                out[j] = (v[j] - mean) / std::sqrt(var + 1e-5);
            return out;
        };
        const std::vector<double> zero{0, 0, 0, 0};
        const auto sa =
            project(project(zero, layer.self_attn.wv, layer.self_attn.bv),
                    layer.self_attn.wo, layer.self_attn.bo);
        auto t = normalize(sa);  // queries_in is zero, residual adds nothing
        const auto ca =
            project(project({0.9, 0.2, -0.4, 0.6}, layer.cross_attn.wv, layer.cross_attn.bv),
                    layer.cross_attn.wo, layer.cross_attn.bo);
        std::vector<double> t2(4);
        for (std::size_t j = 0; j < 4; ++j) t2[j] = t[j] + ca[j];
        t = normalize(t2);
        t = normalize(t);  // zeroed FFN
        for (std::size_t j = 0; j < 4; ++j) CHECK(out(0, j) == Approx(t[j]).margin(1e-12));
    }
}

TEST_CASE("instance-aware attention") {
    RngStream rng(13);
    Matrix f_r(3, 8), f_d(5, 8);
    for (Matrix* m : {&f_r, &f_d})
        for (double& v : m->data) v = rng.uniform(-1.0, 1.0);
    IaAttentionWeights w;
    w.wr = w.wd = w.wproj = Matrix(8, 8);
    w.br = w.bd = w.bproj = Matrix(1, 8);
    for (Matrix* m : {&w.wr, &w.wd, &w.wproj})
        for (double& v : m->data) v = rng.uniform(-0.5, 0.5);

    SECTION("zero value projection is the exact identity") {
        IaAttentionWeights zero = w;
        zero.wproj = Matrix(8, 8);
        zero.bproj = Matrix(1, 8);
        const Matrix out = instance_aware_attention(f_r, f_d, zero);
        CHECK(out == f_r);
    }
    SECTION("attention rows sum to one") {
        Matrix map;
        instance_aware_attention(f_r, f_d, w, &map);
        REQUIRE(map.rows == 3);
        REQUIRE(map.cols == 5);
        for (std::size_t i = 0; i < map.rows; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < map.cols; ++j) sum += map(i, j);
            CHECK(sum == Approx(1.0).margin(1e-9));
        }
    }
    SECTION("single instance broadcasts its projected features") {
        Matrix one_inst(1, 8);
        for (double& v : one_inst.data) v = rng.uniform(-1.0, 1.0);
        Matrix map;
        const Matrix out = instance_aware_attention(f_r, one_inst, w, &map);
        for (double v : map.data) CHECK(v == 1.0);
        const Matrix projected = linear(one_inst, w.wproj, w.bproj);
        for (std::size_t i = 0; i < f_r.rows; ++i)
            for (std::size_t j = 0; j < 8; ++j)
                CHECK(out(i, j) == Approx(f_r(i, j) + projected(0, j)).margin(1e-12));
    }
}

TEST_CASE("prediction heads") {
    const ModelConfig cfg = small_config();

    SECTION("zero weights center everything") {
        const ModelWeights zero = make_weights(cfg, 16);
        Matrix f(4, cfg.d, 0.7);
        const auto instances = instance_head(f, zero);
        for (const auto& p : instances) {
            CHECK(p.box.cx == 0.5);
            CHECK(p.box.cy == 0.5);
            CHECK(p.box.w == 0.5);
            CHECK(p.box.h == 0.5);
            for (double s : p.class_scores)
                CHECK(s == Approx(1.0 / static_cast<double>(cfg.n_object_classes + 1))
                               .margin(1e-12));
        }
        const auto interactions = interaction_head(f, zero);
        for (const auto& p : interactions) {
            CHECK(p.vector.xh == 0.5);
            CHECK(p.vector.yo == 0.5);
            for (double s : p.verb_scores) CHECK(s == 0.5);
        }
    }

    SECTION("seeded weights keep ranges and separate the two embeddings") {
        const ModelWeights w = init_weights(cfg, 17, 16);
        RngStream rng(18);
        Matrix f(6, cfg.d);
        for (double& v : f.data) v = rng.uniform(-2.0, 2.0);
        const auto instances = instance_head(f, w);
        for (const auto& p : instances) {
            double sum = 0.0;
            for (double s : p.class_scores) sum += s;
            CHECK(std::abs(sum - 1.0) <= 1e-6);
            for (double v : {p.box.cx, p.box.cy, p.box.w, p.box.h}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
        const auto interactions = interaction_head(f, w);
        for (const auto& p : interactions) {
            for (double s : p.verb_scores) {
                CHECK(s > 0.0);
                CHECK(s < 1.0);
            }
            CHECK(p.embedding_h != p.embedding_o);
        }
    }
}

TEST_CASE("weight initialization is reproducible and bounded") {
    const ModelConfig cfg = small_config();
    const ModelWeights a = init_weights(cfg, 23, 16);
    const ModelWeights b = init_weights(cfg, 23, 16);
    const ModelWeights c = init_weights(cfg, 24, 16);

    bool identical = true, different = false;
    for_each_tensor(a, [&](const std::string& name, const Matrix& m, TensorKind kind) {
        const double bound = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
        for (double v : m.data) {
            if (kind == TensorKind::weight) {
                REQUIRE(std::abs(v) <= bound);
            } else if (kind == TensorKind::bias) {
                REQUIRE(v == 0.0);
            } else {
                REQUIRE(v == 1.0);
            }
        }
        // compare against the two other draws by name
        for_each_tensor(b, [&](const std::string& other, const Matrix& mb, TensorKind) {
            if (other == name && !(mb == m)) identical = false;
        });
        for_each_tensor(c, [&](const std::string& other, const Matrix& mc, TensorKind) {
            if (other == name && !(mc == m)) different = true;
        });
    });
    CHECK(identical);
    CHECK(different);
}

TEST_CASE("full forward pass structure and ablations") {
    const ModelConfig cfg = small_config();
    const FeatureGrid grid = make_feature_grid(7, 7, 16, 29, 0);
    const ModelWeights w = init_weights(cfg, 29, 16);

    const ForwardOutput out = forward_full(grid, w, cfg);
    CHECK(out.instances.size() == 20);
    CHECK(out.interactions.size() == 8);
    REQUIRE(out.layers.size() == 3);
    for (const auto& layer : out.layers) {
        CHECK(layer.instance_co_attention.rows == 20);
        CHECK(layer.instance_co_attention.cols == 49);
        CHECK(layer.interaction_co_attention.rows == 8);
        CHECK(layer.ia_applied);
        CHECK(layer.ia_map.rows == 8);
        CHECK(layer.ia_map.cols == 20);
    }

    SECTION("bitwise repeatable") {
        const ForwardOutput again = forward_full(grid, w, cfg);
        CHECK(again.instances == out.instances);
        CHECK(again.interactions == out.interactions);
    }

    SECTION("disabling instance-aware attention changes interactions only") {
        ModelConfig basic = cfg;
        basic.ia_attention_layers.clear();
        const ForwardOutput plain = forward_full(grid, w, basic);
        CHECK(plain.instances == out.instances);
        CHECK(plain.interactions != out.interactions);
        for (const auto& layer : plain.layers) CHECK_FALSE(layer.ia_applied);
    }

    SECTION("zeroed value projection reproduces the basic model bitwise") {
        ModelWeights zeroed = w;
        for (auto& ia : zeroed.ia_attention) {
            for (double& v : ia.wproj.data) v = 0.0;
            for (double& v : ia.bproj.data) v = 0.0;
        }
        ModelConfig basic = cfg;
        basic.ia_attention_layers.clear();
        const ForwardOutput with_ia = forward_full(grid, zeroed, cfg);
        const ForwardOutput without = forward_full(grid, zeroed, basic);
        CHECK(with_ia.interactions == without.interactions);
    }

    SECTION("query rows can be permuted and un-permuted") {
        ModelWeights permuted = w;
        const std::size_t n = cfg.n_interaction_queries;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < cfg.d; ++j)
                permuted.interaction_queries((i + 1) % n, j) = w.interaction_queries(i, j);
        const ForwardOutput rotated = forward_full(grid, permuted, cfg);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& expect = out.interactions[i];
            const auto& got = rotated.interactions[(i + 1) % n];
            CHECK(got.vector.xh == Approx(expect.vector.xh).margin(1e-9));
            CHECK(got.vector.yh == Approx(expect.vector.yh).margin(1e-9));
            CHECK(got.vector.xo == Approx(expect.vector.xo).margin(1e-9));
            CHECK(got.vector.yo == Approx(expect.vector.yo).margin(1e-9));
            for (std::size_t l = 0; l < expect.verb_scores.size(); ++l)
                CHECK(got.verb_scores[l] == Approx(expect.verb_scores[l]).margin(1e-9));
        }
    }
}

TEST_CASE("attention placement modes") {
    CHECK(ia_layers_for_mode(IaAttentionMode::all, 6) ==
          std::vector<std::size_t>{1, 2, 3, 4, 5, 6});
    CHECK(ia_layers_for_mode(IaAttentionMode::alternate, 6) ==
          std::vector<std::size_t>{2, 4, 6});
    CHECK(ia_layers_for_mode(IaAttentionMode::none, 6).empty());

    ModelConfig cfg;
    cfg.ia_attention_layers = {7};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("config documents set fields and reject typos") {
    ModelConfig model;
    LossConfig loss;
    apply_config_document(nlohmann::json::parse(R"({
        "model": {"d": 128, "n_dec_layers": 4, "embed_dim": 16},
        "loss": {"lambda_emb": 0.5, "push_margin_t": 2.0}
    })"),
                          model, loss);
    CHECK(model.d == 128);
    CHECK(model.embed_dim == 16);
    // attention placement follows an explicit layer-count change
    CHECK(model.ia_attention_layers == std::vector<std::size_t>{1, 2, 3, 4});
    CHECK(loss.lambda_emb == 0.5);
    CHECK(loss.push_margin_t == 2.0);

    CHECK_THROWS_WITH(
        apply_config_document(nlohmann::json::parse(R"({"model": {"dd": 1}})"), model, loss),
        Catch::Matchers::ContainsSubstring("unknown key"));
    CHECK_THROWS_WITH(
        apply_config_document(nlohmann::json::parse(R"({"loss": {"lambda_emb": -1}})"), model,
                              loss),
        Catch::Matchers::ContainsSubstring(">= 0"));
}

TEST_CASE("weights round-trip through the manifest and blob") {
    namespace fs = std::filesystem;
    const ModelConfig cfg = small_config();
    const ModelWeights w = init_weights(cfg, 31, 16);
    const fs::path dir = fs::temp_directory_path() / "asnet_weights_test";
    fs::create_directories(dir);
    const std::string manifest = (dir / "w.json").string();
    const std::string blob = (dir / "w.bin").string();
    save_weights(w, manifest, blob);

    const ModelWeights loaded = load_weights(cfg, 16, manifest, blob);
    bool equal = true;
    for_each_tensor(w, [&](const std::string& name, const Matrix& m, TensorKind) {
        for_each_tensor(loaded, [&](const std::string& other, const Matrix& lm, TensorKind) {
            if (other == name && !(lm == m)) equal = false;
        });
    });
    CHECK(equal);

    const FeatureGrid grid = make_feature_grid(5, 5, 16, 31, 1);
    CHECK(forward_full(grid, w, cfg).instances == forward_full(grid, loaded, cfg).instances);

    SECTION("shape mismatches are rejected") {
        ModelConfig other = cfg;
        other.embed_dim = 4;
        CHECK_THROWS_WITH(load_weights(other, 16, manifest, blob),
                          Catch::Matchers::ContainsSubstring("shape"));
    }
    SECTION("wrong channel count is rejected") {
        CHECK_THROWS_WITH(load_weights(cfg, 8, manifest, blob),
                          Catch::Matchers::ContainsSubstring("input_proj.w"));
    }
    fs::remove_all(dir);
}
