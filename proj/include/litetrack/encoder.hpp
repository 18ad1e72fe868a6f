#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "litetrack/config.hpp"
#include "litetrack/errors.hpp"
#include "litetrack/tensor.hpp"
#include "litetrack/weights.hpp"

namespace litetrack {

enum class Origin { Template, Search, Joint };

// A token matrix [N x C] tagged with the branch it came from.
struct TokenSeq {
    Tensor tokens;
    Origin origin = Origin::Search;
};

// Counts block executions per forward call; used to check the layer
// schedule (template: fe+ai self blocks, search: fe self + ai asym).
struct EncoderTrace {
    int self_blocks = 0;
    int asym_blocks = 0;
};

// Non-owning view of one encoder layer's parameters.
struct LayerWeights {
    const Tensor* norm1_gamma;
    const Tensor* norm1_beta;
    const Tensor* q_w;
    const Tensor* q_b;
    const Tensor* k_w;
    const Tensor* k_b;
    const Tensor* v_w;
    const Tensor* v_b;
    const Tensor* proj_w;
    const Tensor* proj_b;
    const Tensor* norm2_gamma;
    const Tensor* norm2_beta;
    const Tensor* fc1_w;
    const Tensor* fc1_b;
    const Tensor* fc2_w;
    const Tensor* fc2_b;
};

inline LayerWeights layer_weights(const WeightStore& w, int layer) {
    const std::string p = "encoder." + std::to_string(layer) + ".";
    return LayerWeights{
        &w.get(p + "norm1.gamma"),   &w.get(p + "norm1.beta"),
        &w.get(p + "attn.q.weight"), &w.get(p + "attn.q.bias"),
        &w.get(p + "attn.k.weight"), &w.get(p + "attn.k.bias"),
        &w.get(p + "attn.v.weight"), &w.get(p + "attn.v.bias"),
        &w.get(p + "attn.proj.weight"), &w.get(p + "attn.proj.bias"),
        &w.get(p + "norm2.gamma"),   &w.get(p + "norm2.beta"),
        &w.get(p + "mlp.fc1.weight"), &w.get(p + "mlp.fc1.bias"),
        &w.get(p + "mlp.fc2.weight"), &w.get(p + "mlp.fc2.bias")};
}

namespace detail {

// Scaled dot-product attention over pre-projected Q [Nq x C], K, V
// [M x C], split into `heads` heads. Returns the concatenated per-head
// mixes [Nq x C]. When mean_probs is non-null it receives the softmaxed
// attention averaged over heads, shape [Nq x M].
inline Tensor attention_mix(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                            MacCounter* counter, Tensor* mean_probs = nullptr) {
    const std::int64_t nq = q.extent(0), c = q.extent(1), m = k.extent(0);
    const std::int64_t d = c / heads;
    const float inv_scale = static_cast<float>(1.0 / std::sqrt(double(d)));
    Tensor out({nq, c});
    if (mean_probs) *mean_probs = Tensor({nq, m});
    for (int h = 0; h < heads; ++h) {
        const std::int64_t col0 = static_cast<std::int64_t>(h) * d;
        Tensor qh({nq, d});
        for (std::int64_t i = 0; i < nq; ++i)
            for (std::int64_t j = 0; j < d; ++j) qh(i, j) = q(i, col0 + j);
        Tensor kht({d, m}); // K head slice, pre-transposed
        Tensor vh({m, d});
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < d; ++j) {
                kht(j, i) = k(i, col0 + j);
                vh(i, j) = v(i, col0 + j);
            }
        Tensor scores = matmul(qh, kht, counter);
        Tensor probs = softmax_rows(scale(scores, inv_scale));
        Tensor mixed = matmul(probs, vh, counter);
        for (std::int64_t i = 0; i < nq; ++i)
            for (std::int64_t j = 0; j < d; ++j) out(i, col0 + j) = mixed(i, j);
        if (mean_probs) {
            float* acc = mean_probs->data();
            const float* p = probs.data();
            const float w = 1.0f / static_cast<float>(heads);
            for (std::int64_t i = 0; i < nq * m; ++i) acc[i] += p[i] * w;
        }
    }
    return out;
}

// Pre-norm transformer block on the x rows. When z is non-null its rows
// extend the keys/values ([K_x; K_z], [V_x; V_z]) while queries, residual
// and MLP stay on x only; z itself is never modified.
inline Tensor encoder_block(const Tensor& x, const Tensor* z, const ModelConfig& cfg,
                            const LayerWeights& lw, MacCounter* counter,
                            Tensor* mean_probs = nullptr) {
    if (z && z->extent(1) != x.extent(1))
        throw DimensionError("asym block: channel width mismatch " + shape_str(x.shape()) +
                             " vs " + shape_str(z->shape()));
    Tensor u = layer_norm(x, *lw.norm1_gamma, *lw.norm1_beta);
    Tensor q = add_bias_rows(matmul(u, *lw.q_w, counter), *lw.q_b);
    Tensor kv_src = z ? concat_rows(u, layer_norm(*z, *lw.norm1_gamma, *lw.norm1_beta))
                      : std::move(u);
    Tensor k = add_bias_rows(matmul(kv_src, *lw.k_w, counter), *lw.k_b);
    Tensor v = add_bias_rows(matmul(kv_src, *lw.v_w, counter), *lw.v_b);
    Tensor ctx = attention_mix(q, k, v, cfg.num_heads, counter, mean_probs);
    Tensor x1 = add(x, add_bias_rows(matmul(ctx, *lw.proj_w, counter), *lw.proj_b));
    Tensor u2 = layer_norm(x1, *lw.norm2_gamma, *lw.norm2_beta);
    Tensor hidden = gelu(add_bias_rows(matmul(u2, *lw.fc1_w, counter), *lw.fc1_b));
    Tensor mlp = add_bias_rows(matmul(hidden, *lw.fc2_w, counter), *lw.fc2_b);
    return add(x1, mlp);
}

} // namespace detail

// Patchify + linear projection + that branch's positional table.
inline TokenSeq patch_embed(const Tensor& image, const ModelConfig& cfg, const WeightStore& w,
                            Origin branch, MacCounter* counter = nullptr) {
    int want_h, want_w;
    const char* pos_name;
    if (branch == Origin::Template) {
        want_h = cfg.template_h;
        want_w = cfg.template_w;
        pos_name = "pos_embed.template";
    } else if (branch == Origin::Search) {
        want_h = cfg.search_h;
        want_w = cfg.search_w;
        pos_name = "pos_embed.search";
    } else {
        throw InputError("patch_embed: branch must be template or search");
    }
    if (image.rank() != 3 || image.extent(0) != 3 || image.extent(1) != want_h ||
        image.extent(2) != want_w)
        throw ConfigError("patch_embed: image " + shape_str(image.shape()) + " does not match " +
                          (branch == Origin::Template ? "template" : "search") + " size 3x" +
                          std::to_string(want_h) + "x" + std::to_string(want_w));
    Tensor patches = patchify(image, cfg.patch_size);
    Tensor tokens = add_bias_rows(matmul(patches, w.get("patch_embed.weight"), counter),
                                  w.get("patch_embed.bias"));
    return TokenSeq{add(tokens, w.get(pos_name)), branch};
}

// Plain self-attention block; template and search branches both use this
// during feature extraction.
inline TokenSeq self_block(const TokenSeq& x, const ModelConfig& cfg, const LayerWeights& lw,
                           MacCounter* counter = nullptr) {
    if (x.origin == Origin::Joint)
        throw InputError("self_block: expects a template or search sequence");
    return TokenSeq{detail::encoder_block(x.tokens, nullptr, cfg, lw, counter), x.origin};
}

// Interaction block: queries from the search tokens only, keys/values
// from [search; cached template]. The cached template rows receive no
// residual or MLP update and are not returned. An empty cache degenerates
// to self_block.
inline TokenSeq asym_block(const TokenSeq& x, const TokenSeq& z_cached, const ModelConfig& cfg,
                           const LayerWeights& lw, MacCounter* counter = nullptr) {
    if (x.origin != Origin::Search)
        throw InputError("asym_block: queries must come from the search sequence");
    if (z_cached.tokens.empty())
        return TokenSeq{detail::encoder_block(x.tokens, nullptr, cfg, lw, counter),
                        Origin::Search};
    if (z_cached.origin != Origin::Template)
        throw InputError("asym_block: cached keys/values must come from the template sequence");
    return TokenSeq{detail::encoder_block(x.tokens, &z_cached.tokens, cfg, lw, counter),
                    Origin::Search};
}

inline Tensor final_norm(const Tensor& tokens, const WeightStore& w) {
    return layer_norm(tokens, w.get("encoder_norm.gamma"), w.get("encoder_norm.beta"));
}

// Runs the template through every encoder layer in pure self-attention
// mode and returns the last layer's tokens after the final norm. This is
// the matrix a tracking sequence caches once.
inline Tensor extract_template(const Tensor& template_image, const ModelConfig& cfg,
                               const WeightStore& w, MacCounter* counter = nullptr,
                               EncoderTrace* trace = nullptr) {
    TokenSeq seq = patch_embed(template_image, cfg, w, Origin::Template, counter);
    for (int i = 0; i < cfg.total_layers(); ++i) {
        seq = self_block(seq, cfg, layer_weights(w, i), counter);
        if (trace) ++trace->self_blocks;
    }
    return final_norm(seq.tokens, w);
}

// Search-branch forward pass: fe_layers self blocks, then ai_layers
// interaction blocks against the cached template features, then the final
// norm. Only the search rows come back.
inline Tensor forward_search(const Tensor& search_image, const Tensor& template_features,
                             const ModelConfig& cfg, const WeightStore& w,
                             MacCounter* counter = nullptr, EncoderTrace* trace = nullptr) {
    if (cfg.ai_layers > 0) {
        if (template_features.rank() != 2 ||
            template_features.extent(0) != cfg.template_tokens() ||
            template_features.extent(1) != cfg.embed_dim)
            throw ConfigError("forward_search: template features " +
                              shape_str(template_features.shape()) + " do not match config (" +
                              std::to_string(cfg.template_tokens()) + "x" +
                              std::to_string(cfg.embed_dim) + ")");
    }
    TokenSeq seq = patch_embed(search_image, cfg, w, Origin::Search, counter);
    const TokenSeq cache{template_features, Origin::Template};
    for (int i = 0; i < cfg.fe_layers; ++i) {
        seq = self_block(seq, cfg, layer_weights(w, i), counter);
        if (trace) ++trace->self_blocks;
    }
    for (int i = cfg.fe_layers; i < cfg.total_layers(); ++i) {
        seq = asym_block(seq, cache, cfg, layer_weights(w, i), counter);
        if (trace) ++trace->asym_blocks;
    }
    return final_norm(seq.tokens, w);
}

namespace detail {
inline void check_ai_layer(const ModelConfig& cfg, int layer_index) {
    if (layer_index < cfg.fe_layers || layer_index >= cfg.total_layers())
        throw RangeError("layer " + std::to_string(layer_index) +
                         " is not an interaction layer; valid: " +
                         std::to_string(cfg.fe_layers) + ".." +
                         std::to_string(cfg.total_layers() - 1));
}
} // namespace detail

// Head-averaged attention probabilities of one interaction layer,
// shape [N_x x (N_x + N_z)]; each row sums to 1.
inline Tensor attention_rows(const Tensor& search_image, const Tensor& template_features,
                             const ModelConfig& cfg, const WeightStore& w, int layer_index) {
    detail::check_ai_layer(cfg, layer_index);
    TokenSeq seq = patch_embed(search_image, cfg, w, Origin::Search);
    const TokenSeq cache{template_features, Origin::Template};
    for (int i = 0; i < cfg.fe_layers; ++i)
        seq = self_block(seq, cfg, layer_weights(w, i));
    Tensor probs;
    for (int i = cfg.fe_layers; i <= layer_index; ++i) {
        Tensor* want = (i == layer_index) ? &probs : nullptr;
        seq.tokens = detail::encoder_block(seq.tokens, &cache.tokens, cfg,
                                           layer_weights(w, i), nullptr, want);
    }
    return probs;
}

// The per-search-token attention mass on the template: mean over heads
// and over template key columns, reshaped to the search grid. Values lie
// in [0, 1].
inline Tensor attention_probe(const Tensor& search_image, const Tensor& template_features,
                              const ModelConfig& cfg, const WeightStore& w, int layer_index) {
    Tensor rows = attention_rows(search_image, template_features, cfg, w, layer_index);
    const std::int64_t nx = rows.extent(0);
    const std::int64_t nz = rows.extent(1) - nx;
    const std::int64_t gy = cfg.search_h / cfg.patch_size;
    const std::int64_t gx = cfg.search_w / cfg.patch_size;
    Tensor map({gy, gx});
    for (std::int64_t i = 0; i < nx; ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < nz; ++j) s += rows(i, nx + j);
        map(i / gx, i % gx) = static_cast<float>(s / double(nz));
    }
    return map;
}

} // namespace litetrack
