#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "asnet/matrix.hpp"
#include "asnet/types.hpp"

// The set-prediction forward pass: feature projection, encoder, the two
// decoder stacks with instance-aware attention between them, and the
// prediction heads.

namespace asnet {

struct ModelConfig {
    std::size_t d = 256;             // model width
    std::size_t n_enc_layers = 6;
    std::size_t n_dec_layers = 6;
    std::size_t heads = 8;
    std::size_t d_ff = 2048;
    std::size_t n_instance_queries = 100;     // N_d
    std::size_t n_interaction_queries = 16;   // N_r
    std::size_t n_object_classes = 80;        // L_d, no-object slot excluded
    std::size_t n_verb_classes = 117;         // L
    std::size_t embed_dim = 8;                // K
    // 1-based decoder layer indices after which instance-aware attention runs
    std::vector<std::size_t> ia_attention_layers = {1, 2, 3, 4, 5, 6};

    void validate() const {
        if (d == 0 || n_enc_layers == 0 || n_dec_layers == 0 || heads == 0 || d_ff == 0 ||
            n_instance_queries == 0 || n_interaction_queries == 0 || n_object_classes == 0 ||
            n_verb_classes == 0 || embed_dim == 0)
            throw std::invalid_argument("ModelConfig: all counts must be >= 1");
        if (d % heads != 0)
            throw std::invalid_argument("ModelConfig: width " + std::to_string(d) +
                                        " not divisible by " + std::to_string(heads) + " heads");
        if (d % 4 != 0)
            throw std::invalid_argument("ModelConfig: width must be divisible by 4 "
                                        "for the 2d positional encoding");
        for (std::size_t layer : ia_attention_layers)
            if (layer < 1 || layer > n_dec_layers)
                throw std::invalid_argument("ModelConfig: ia_attention_layers entry " +
                                            std::to_string(layer) + " outside 1.." +
                                            std::to_string(n_dec_layers));
    }

    bool ia_applied_at(std::size_t layer_1based) const {
        return std::find(ia_attention_layers.begin(), ia_attention_layers.end(), layer_1based) !=
               ia_attention_layers.end();
    }
};

enum class IaAttentionMode { all, alternate, none };

inline std::vector<std::size_t> ia_layers_for_mode(IaAttentionMode mode,
                                                   std::size_t n_dec_layers) {
    std::vector<std::size_t> layers;
    switch (mode) {
        case IaAttentionMode::all:
            for (std::size_t i = 1; i <= n_dec_layers; ++i) layers.push_back(i);
            break;
        case IaAttentionMode::alternate:
            for (std::size_t i = 2; i <= n_dec_layers; i += 2) layers.push_back(i);
            break;
        case IaAttentionMode::none:
            break;
    }
    return layers;
}

struct FeatureGrid {
    std::size_t width = 0, height = 0, channels = 0;
    std::vector<double> data;  // (y, x, channel) order, length width*height*channels

    FeatureGrid() = default;
    FeatureGrid(std::size_t w, std::size_t h, std::size_t c)
        : width(w), height(h), channels(c), data(w * h * c, 0.0) {}

    double& at(std::size_t x, std::size_t y, std::size_t c) {
        return data[(y * width + x) * channels + c];
    }
};

// ---------------------------------------------------------------------------
// weights

struct LayerNormParams {
    Matrix gain, bias;  // 1 x d each
};

struct FfnWeights {
    Matrix w1, b1;  // d x d_ff, 1 x d_ff
    Matrix w2, b2;  // d_ff x d, 1 x d
};

struct EncoderLayerWeights {
    AttentionWeights self_attn;
    LayerNormParams norm1;
    FfnWeights ffn;
    LayerNormParams norm2;
};

struct DecoderLayerWeights {
    AttentionWeights self_attn;
    LayerNormParams norm1;
    AttentionWeights cross_attn;
    LayerNormParams norm2;
    FfnWeights ffn;
    LayerNormParams norm3;
};

struct IaAttentionWeights {
    Matrix wr, br;      // interaction-side projection
    Matrix wd, bd;      // instance-side projection
    Matrix wproj, bproj;  // value projection added through the residual
};

struct MlpHeadWeights {
    Matrix w1, b1, w2, b2, w3, b3;
};

struct LinearHead {
    Matrix w, b;
};

struct ModelWeights {
    Matrix input_proj_w, input_proj_b;  // C x d, 1 x d
    std::vector<EncoderLayerWeights> encoder;
    Matrix instance_queries;     // N_d x d
    Matrix interaction_queries;  // N_r x d
    std::vector<DecoderLayerWeights> instance_decoder;
    std::vector<DecoderLayerWeights> interaction_decoder;
    std::vector<IaAttentionWeights> ia_attention;  // one per decoder layer
    MlpHeadWeights instance_box_head;       // d -> d -> d -> 4
    LinearHead instance_class_head;         // d -> L_d + 1
    LinearHead instance_embed_head;         // d -> K
    MlpHeadWeights interaction_vector_head; // d -> d -> d -> 4
    LinearHead verb_head;                   // d -> L
    LinearHead embed_h_head;                // d -> K
    LinearHead embed_o_head;                // d -> K
};

enum class TensorKind { weight, bias, gain };

namespace detail {

template <class F>
void visit_attention(const std::string& prefix, auto& a, F&& f) {
    f(prefix + ".wq", a.wq, TensorKind::weight);
    f(prefix + ".bq", a.bq, TensorKind::bias);
    f(prefix + ".wk", a.wk, TensorKind::weight);
    f(prefix + ".bk", a.bk, TensorKind::bias);
    f(prefix + ".wv", a.wv, TensorKind::weight);
    f(prefix + ".bv", a.bv, TensorKind::bias);
    f(prefix + ".wo", a.wo, TensorKind::weight);
    f(prefix + ".bo", a.bo, TensorKind::bias);
}

template <class F>
void visit_norm(const std::string& prefix, auto& n, F&& f) {
    f(prefix + ".gain", n.gain, TensorKind::gain);
    f(prefix + ".bias", n.bias, TensorKind::bias);
}

template <class F>
void visit_ffn(const std::string& prefix, auto& w, F&& f) {
    f(prefix + ".w1", w.w1, TensorKind::weight);
    f(prefix + ".b1", w.b1, TensorKind::bias);
    f(prefix + ".w2", w.w2, TensorKind::weight);
    f(prefix + ".b2", w.b2, TensorKind::bias);
}

template <class F>
void visit_mlp_head(const std::string& prefix, auto& w, F&& f) {
    f(prefix + ".w1", w.w1, TensorKind::weight);
    f(prefix + ".b1", w.b1, TensorKind::bias);
    f(prefix + ".w2", w.w2, TensorKind::weight);
    f(prefix + ".b2", w.b2, TensorKind::bias);
    f(prefix + ".w3", w.w3, TensorKind::weight);
    f(prefix + ".b3", w.b3, TensorKind::bias);
}

template <class F>
void visit_linear_head(const std::string& prefix, auto& w, F&& f) {
    f(prefix + ".w", w.w, TensorKind::weight);
    f(prefix + ".b", w.b, TensorKind::bias);
}

}  // namespace detail

// Enumerates every tensor in a fixed canonical order. This order defines the
// weight manifest layout and the RNG consumption order of init_weights.
template <class Weights, class F>
void for_each_tensor(Weights& w, F&& f) {
    f("input_proj.w", w.input_proj_w, TensorKind::weight);
    f("input_proj.b", w.input_proj_b, TensorKind::bias);
    for (std::size_t i = 0; i < w.encoder.size(); ++i) {
        const std::string p = "encoder." + std::to_string(i);
        detail::visit_attention(p + ".self_attn", w.encoder[i].self_attn, f);
        detail::visit_norm(p + ".norm1", w.encoder[i].norm1, f);
        detail::visit_ffn(p + ".ffn", w.encoder[i].ffn, f);
        detail::visit_norm(p + ".norm2", w.encoder[i].norm2, f);
    }
    f("instance_queries", w.instance_queries, TensorKind::weight);
    f("interaction_queries", w.interaction_queries, TensorKind::weight);
    for (std::size_t i = 0; i < w.instance_decoder.size(); ++i) {
        const std::string p = "instance_decoder." + std::to_string(i);
        detail::visit_attention(p + ".self_attn", w.instance_decoder[i].self_attn, f);
        detail::visit_norm(p + ".norm1", w.instance_decoder[i].norm1, f);
        detail::visit_attention(p + ".cross_attn", w.instance_decoder[i].cross_attn, f);
        detail::visit_norm(p + ".norm2", w.instance_decoder[i].norm2, f);
        detail::visit_ffn(p + ".ffn", w.instance_decoder[i].ffn, f);
        detail::visit_norm(p + ".norm3", w.instance_decoder[i].norm3, f);
    }
    for (std::size_t i = 0; i < w.interaction_decoder.size(); ++i) {
        const std::string p = "interaction_decoder." + std::to_string(i);
        detail::visit_attention(p + ".self_attn", w.interaction_decoder[i].self_attn, f);
        detail::visit_norm(p + ".norm1", w.interaction_decoder[i].norm1, f);
        detail::visit_attention(p + ".cross_attn", w.interaction_decoder[i].cross_attn, f);
        detail::visit_norm(p + ".norm2", w.interaction_decoder[i].norm2, f);
        detail::visit_ffn(p + ".ffn", w.interaction_decoder[i].ffn, f);
        detail::visit_norm(p + ".norm3", w.interaction_decoder[i].norm3, f);
    }
    for (std::size_t i = 0; i < w.ia_attention.size(); ++i) {
        const std::string p = "ia_attention." + std::to_string(i);
        f(p + ".wr", w.ia_attention[i].wr, TensorKind::weight);
        f(p + ".br", w.ia_attention[i].br, TensorKind::bias);
        f(p + ".wd", w.ia_attention[i].wd, TensorKind::weight);
        f(p + ".bd", w.ia_attention[i].bd, TensorKind::bias);
        f(p + ".wproj", w.ia_attention[i].wproj, TensorKind::weight);
        f(p + ".bproj", w.ia_attention[i].bproj, TensorKind::bias);
    }
    detail::visit_mlp_head("instance_box_head", w.instance_box_head, f);
    detail::visit_linear_head("instance_class_head", w.instance_class_head, f);
    detail::visit_linear_head("instance_embed_head", w.instance_embed_head, f);
    detail::visit_mlp_head("interaction_vector_head", w.interaction_vector_head, f);
    detail::visit_linear_head("verb_head", w.verb_head, f);
    detail::visit_linear_head("embed_h_head", w.embed_h_head, f);
    detail::visit_linear_head("embed_o_head", w.embed_o_head, f);
}

// Allocates zero weights with the shapes implied by the config.
// input_channels is the grid channel count fed to the 1x1 projection.
inline ModelWeights make_weights(const ModelConfig& cfg, std::size_t input_channels) {
    cfg.validate();
    if (input_channels == 0) throw std::invalid_argument("make_weights: zero input channels");
    const std::size_t d = cfg.d;
    ModelWeights w;
    w.input_proj_w = Matrix(input_channels, d);
    w.input_proj_b = Matrix(1, d);
    auto attn = [d] {
        AttentionWeights a;
        a.wq = a.wk = a.wv = a.wo = Matrix(d, d);
        a.bq = a.bk = a.bv = a.bo = Matrix(1, d);
        return a;
    };
    auto norm = [d] { return LayerNormParams{Matrix(1, d), Matrix(1, d)}; };
    auto ffn = [&] {
        FfnWeights f;
        f.w1 = Matrix(d, cfg.d_ff);
        f.b1 = Matrix(1, cfg.d_ff);
        f.w2 = Matrix(cfg.d_ff, d);
        f.b2 = Matrix(1, d);
        return f;
    };
    w.encoder.resize(cfg.n_enc_layers);
    for (auto& l : w.encoder) l = {attn(), norm(), ffn(), norm()};
    w.instance_queries = Matrix(cfg.n_instance_queries, d);
    w.interaction_queries = Matrix(cfg.n_interaction_queries, d);
    w.instance_decoder.resize(cfg.n_dec_layers);
    w.interaction_decoder.resize(cfg.n_dec_layers);
    for (auto* dec : {&w.instance_decoder, &w.interaction_decoder})
        for (auto& l : *dec) l = {attn(), norm(), attn(), norm(), ffn(), norm()};
    w.ia_attention.resize(cfg.n_dec_layers);
    for (auto& ia : w.ia_attention) {
        ia.wr = ia.wd = ia.wproj = Matrix(d, d);
        ia.br = ia.bd = ia.bproj = Matrix(1, d);
    }
    auto mlp4 = [&] {
        MlpHeadWeights h;
        h.w1 = Matrix(d, d);
        h.b1 = Matrix(1, d);
        h.w2 = Matrix(d, d);
        h.b2 = Matrix(1, d);
        h.w3 = Matrix(d, 4);
        h.b3 = Matrix(1, 4);
        return h;
    };
    w.instance_box_head = mlp4();
    w.instance_class_head = {Matrix(d, cfg.n_object_classes + 1), Matrix(1, cfg.n_object_classes + 1)};
    w.instance_embed_head = {Matrix(d, cfg.embed_dim), Matrix(1, cfg.embed_dim)};
    w.interaction_vector_head = mlp4();
    w.verb_head = {Matrix(d, cfg.n_verb_classes), Matrix(1, cfg.n_verb_classes)};
    w.embed_h_head = {Matrix(d, cfg.embed_dim), Matrix(1, cfg.embed_dim)};
    w.embed_o_head = {Matrix(d, cfg.embed_dim), Matrix(1, cfg.embed_dim)};
    return w;
}

// Deterministic initialization: weights uniform within the per-matrix bound
// sqrt(6 / (rows + cols)), biases zero, layer-norm gains one. The stream is
// consumed entry by entry in for_each_tensor order, so identical seeds give
// bitwise identical weights everywhere.
inline ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed,
                                 std::size_t input_channels) {
    ModelWeights w = make_weights(cfg, input_channels);
    RngStream rng(seed);
    for_each_tensor(w, [&rng](const std::string&, Matrix& m, TensorKind kind) {
        switch (kind) {
            case TensorKind::weight: {
                const double bound =
                    std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
                for (double& v : m.data) v = rng.uniform(-bound, bound);
                break;
            }
            case TensorKind::bias:
                for (double& v : m.data) v = 0.0;
                break;
            case TensorKind::gain:
                for (double& v : m.data) v = 1.0;
                break;
        }
    });
    return w;
}

// ---------------------------------------------------------------------------
// forward pass

// 1x1 channel projection followed by a row-major flatten to (W*H x d)
inline Matrix project_and_flatten(const FeatureGrid& grid, const Matrix& proj_w,
                                  const Matrix& proj_b) {
    if (grid.channels != proj_w.rows)
        throw std::invalid_argument("project_and_flatten: grid channels " +
                                    std::to_string(grid.channels) + " vs projection " +
                                    shape_str(proj_w));
    if (grid.data.size() != grid.width * grid.height * grid.channels)
        throw std::invalid_argument("project_and_flatten: grid data length mismatch");
    Matrix positions(grid.width * grid.height, grid.channels);
    positions.data = grid.data;
    return linear(positions, proj_w, proj_b);
}

// Fixed 2d sinusoidal encoding, d/2 dims per axis (y block then x block),
// sin/cos interleaved over the standard 10000^(2i/d_axis) frequency ladder.
inline Matrix positional_encoding_2d(std::size_t width, std::size_t height, std::size_t d) {
    if (d % 4 != 0)
        throw std::invalid_argument("positional_encoding_2d: width " + std::to_string(d) +
                                    " not divisible by 4");
    const std::size_t axis_dims = d / 2;
    std::vector<double> inv_freq(axis_dims);
    for (std::size_t j = 0; j < axis_dims; ++j)
        inv_freq[j] = std::pow(10000.0, 2.0 * static_cast<double>(j / 2) /
                                            static_cast<double>(axis_dims));
    Matrix pe(width * height, d);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            double* row = pe.row(y * width + x);
            for (std::size_t j = 0; j < axis_dims; ++j) {
                const double ay = static_cast<double>(y) / inv_freq[j];
                const double ax = static_cast<double>(x) / inv_freq[j];
                row[j] = (j % 2 == 0) ? std::sin(ay) : std::cos(ay);
                row[axis_dims + j] = (j % 2 == 0) ? std::sin(ax) : std::cos(ax);
            }
        }
    return pe;
}

namespace detail {

inline Matrix ffn_forward(const Matrix& x, const FfnWeights& w) {
    return linear(relu(linear(x, w.w1, w.b1)), w.w2, w.b2);
}

inline Matrix mlp_head_forward(const Matrix& x, const MlpHeadWeights& w) {
    return linear(relu(linear(relu(linear(x, w.w1, w.b1)), w.w2, w.b2)), w.w3, w.b3);
}

}  // namespace detail

// One post-norm encoder layer: self-attention with the positional encoding
// added to queries and keys, then the feed-forward block.
inline Matrix encoder_layer_forward(const Matrix& x, const Matrix& pe,
                                    const EncoderLayerWeights& w, const ModelConfig& cfg) {
    const Matrix qk = add(x, pe);
    Matrix out = layer_norm_rows(add(x, multi_head_attention(qk, qk, x, w.self_attn, cfg.heads)),
                                 w.norm1.gain, w.norm1.bias);
    out = layer_norm_rows(add(out, detail::ffn_forward(out, w.ffn)), w.norm2.gain, w.norm2.bias);
    return out;
}

inline Matrix encoder_forward(const Matrix& seq, const Matrix& pe,
                              const std::vector<EncoderLayerWeights>& layers,
                              const ModelConfig& cfg) {
    if (!seq.same_shape(pe))
        throw std::invalid_argument("encoder_forward: sequence " + shape_str(seq) +
                                    " vs positional encoding " + shape_str(pe));
    Matrix x = seq;
    for (const auto& layer : layers) x = encoder_layer_forward(x, pe, layer, cfg);
    return x;
}

// Shared decoder layer: query self-attention, co-attention over the encoder
// memory, feed-forward. Both branches run this with their own weights and
// query embeddings. co_attn_out receives the head-averaged co-attention map.
inline Matrix decoder_layer_forward(const Matrix& queries_in, const Matrix& query_pe,
                                    const Matrix& memory, const Matrix& memory_pe,
                                    const DecoderLayerWeights& w, const ModelConfig& cfg,
                                    Matrix* co_attn_out = nullptr) {
    if (!queries_in.same_shape(query_pe))
        throw std::invalid_argument("decoder_layer_forward: queries " + shape_str(queries_in) +
                                    " vs query embedding " + shape_str(query_pe));
    if (!memory.same_shape(memory_pe))
        throw std::invalid_argument("decoder_layer_forward: memory " + shape_str(memory) +
                                    " vs positional encoding " + shape_str(memory_pe));
    const Matrix qk = add(queries_in, query_pe);
    Matrix t = layer_norm_rows(
        add(queries_in, multi_head_attention(qk, qk, queries_in, w.self_attn, cfg.heads)),
        w.norm1.gain, w.norm1.bias);
    const Matrix cross = multi_head_attention(add(t, query_pe), add(memory, memory_pe), memory,
                                              w.cross_attn, cfg.heads, co_attn_out);
    t = layer_norm_rows(add(t, cross), w.norm2.gain, w.norm2.bias);
    t = layer_norm_rows(add(t, detail::ffn_forward(t, w.ffn)), w.norm3.gain, w.norm3.bias);
    return t;
}

// Cross-branch aggregation: affinity between projected interaction and
// instance features, row-softmax, projected instance values added through a
// residual. With a zero value projection this is exactly the identity on the
// interaction features.
inline Matrix instance_aware_attention(const Matrix& interaction_features,
                                       const Matrix& instance_features,
                                       const IaAttentionWeights& w, Matrix* map_out = nullptr) {
    if (interaction_features.cols != instance_features.cols)
        throw std::invalid_argument("instance_aware_attention: width mismatch " +
                                    shape_str(interaction_features) + " vs " +
                                    shape_str(instance_features));
    const double scale = 1.0 / std::sqrt(static_cast<double>(interaction_features.cols));
    const Matrix pr = linear(interaction_features, w.wr, w.br);
    const Matrix pd = linear(instance_features, w.wd, w.bd);
    Matrix affinity = matmul(pr, transpose(pd));
    for (double& v : affinity.data) v *= scale;
    const Matrix weights = softmax_rows(affinity);
    Matrix out = add(matmul(weights, linear(instance_features, w.wproj, w.bproj)),
                     interaction_features);
    if (map_out) *map_out = weights;
    return out;
}

inline std::vector<InstancePrediction> instance_head(const Matrix& features,
                                                     const ModelWeights& w) {
    const Matrix box_logits = detail::mlp_head_forward(features, w.instance_box_head);
    const Matrix class_scores =
        softmax_rows(linear(features, w.instance_class_head.w, w.instance_class_head.b));
    const Matrix embeddings =
        linear(features, w.instance_embed_head.w, w.instance_embed_head.b);
    std::vector<InstancePrediction> out(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        out[i].box = {sigmoid(box_logits(i, 0)), sigmoid(box_logits(i, 1)),
                      sigmoid(box_logits(i, 2)), sigmoid(box_logits(i, 3))};
        out[i].class_scores.assign(class_scores.row(i), class_scores.row(i) + class_scores.cols);
        out[i].embedding.assign(embeddings.row(i), embeddings.row(i) + embeddings.cols);
    }
    return out;
}

inline std::vector<InteractionPrediction> interaction_head(const Matrix& features,
                                                           const ModelWeights& w) {
    const Matrix vec_logits = detail::mlp_head_forward(features, w.interaction_vector_head);
    const Matrix verb_logits = linear(features, w.verb_head.w, w.verb_head.b);
    const Matrix emb_h = linear(features, w.embed_h_head.w, w.embed_h_head.b);
    const Matrix emb_o = linear(features, w.embed_o_head.w, w.embed_o_head.b);
    std::vector<InteractionPrediction> out(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        out[i].vector = {sigmoid(vec_logits(i, 0)), sigmoid(vec_logits(i, 1)),
                         sigmoid(vec_logits(i, 2)), sigmoid(vec_logits(i, 3))};
        out[i].verb_logits.assign(verb_logits.row(i), verb_logits.row(i) + verb_logits.cols);
        out[i].verb_scores.resize(verb_logits.cols);
        for (std::size_t l = 0; l < verb_logits.cols; ++l)
            out[i].verb_scores[l] = sigmoid(out[i].verb_logits[l]);
        out[i].embedding_h.assign(emb_h.row(i), emb_h.row(i) + emb_h.cols);
        out[i].embedding_o.assign(emb_o.row(i), emb_o.row(i) + emb_o.cols);
    }
    return out;
}

struct DecoderLayerRecord {
    Matrix instance_co_attention;     // N_d x WH
    Matrix interaction_co_attention;  // N_r x WH
    Matrix instance_features;         // N_d x d
    Matrix interaction_features;      // N_r x d, after instance-aware attention when applied
    Matrix ia_map;                    // N_r x N_d when applied, else empty
    bool ia_applied = false;
};

struct ForwardOutput {
    std::vector<InstancePrediction> instances;
    std::vector<InteractionPrediction> interactions;
    std::vector<DecoderLayerRecord> layers;
};

// Full forward pass. Both decoder stacks run layer by layer; after each
// interaction layer listed in ia_attention_layers, instance-aware attention
// mixes in that layer's instance features. Heads decode the final layer.
inline ForwardOutput forward_full(const FeatureGrid& grid, const ModelWeights& w,
                                  const ModelConfig& cfg) {
    cfg.validate();
    const Matrix seq = project_and_flatten(grid, w.input_proj_w, w.input_proj_b);
    const Matrix pe = positional_encoding_2d(grid.width, grid.height, cfg.d);
    const Matrix memory = encoder_forward(seq, pe, w.encoder, cfg);

    Matrix f_d(cfg.n_instance_queries, cfg.d);
    Matrix f_r(cfg.n_interaction_queries, cfg.d);
    ForwardOutput out;
    out.layers.resize(cfg.n_dec_layers);
    for (std::size_t layer = 0; layer < cfg.n_dec_layers; ++layer) {
        DecoderLayerRecord& rec = out.layers[layer];
        f_d = decoder_layer_forward(f_d, w.instance_queries, memory, pe,
                                    w.instance_decoder[layer], cfg, &rec.instance_co_attention);
        f_r = decoder_layer_forward(f_r, w.interaction_queries, memory, pe,
                                    w.interaction_decoder[layer], cfg,
                                    &rec.interaction_co_attention);
        if (cfg.ia_applied_at(layer + 1)) {
            f_r = instance_aware_attention(f_r, f_d, w.ia_attention[layer], &rec.ia_map);
            rec.ia_applied = true;
        }
        rec.instance_features = f_d;
        rec.interaction_features = f_r;
    }
    out.instances = instance_head(f_d, w);
    out.interactions = interaction_head(f_r, w);
    return out;
}

}  // namespace asnet
