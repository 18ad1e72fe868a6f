#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "litetrack/config.hpp"
#include "litetrack/cost.hpp"
#include "litetrack/encoder.hpp"
#include "litetrack/head.hpp"
#include "litetrack/loss.hpp"
#include "litetrack/runtime.hpp"
#include "litetrack/synthetic.hpp"
#include "litetrack/tensor.hpp"
#include "litetrack/weights.hpp"

namespace litetrack {

struct VerifyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace verify_detail {

inline Tensor rand_tensor(std::vector<std::int64_t> shape, SplitMix64& rng, double lo,
                          double hi) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<float>(lo + (hi - lo) * rng.next_uniform());
    return t;
}

// ---- naive reference block, coded independently of encoder.hpp ----

inline Tensor ref_layer_norm(const Tensor& x, const Tensor& g, const Tensor& b) {
    const std::int64_t m = x.extent(0), c = x.extent(1);
    Tensor out({m, c});
    for (std::int64_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::int64_t j = 0; j < c; ++j) mean += x(i, j);
        mean /= double(c);
        double var = 0.0;
        for (std::int64_t j = 0; j < c; ++j) {
            const double d = double(x(i, j)) - mean;
            var += d * d;
        }
        var /= double(c);
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        for (std::int64_t j = 0; j < c; ++j)
            out(i, j) = static_cast<float>(double(g[j]) * ((double(x(i, j)) - mean) * inv) +
                                           double(b[j]));
    }
    return out;
}

inline Tensor ref_linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::int64_t m = x.extent(0), k = x.extent(1), n = w.extent(1);
    Tensor out({m, n});
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::int64_t kk = 0; kk < k; ++kk) acc += double(x(i, kk)) * double(w(kk, j));
            out(i, j) = static_cast<float>(acc) + b[j];
        }
    return out;
}

// Full joint self-attention block on the concatenated [search; template]
// rows; the slice-equivalence oracle for the interaction block.
inline Tensor ref_joint_block(const Tensor& joint, const ModelConfig& cfg,
                              const LayerWeights& lw) {
    const std::int64_t m = joint.extent(0), c = joint.extent(1);
    const int heads = cfg.num_heads;
    const std::int64_t d = c / heads;
    Tensor u = ref_layer_norm(joint, *lw.norm1_gamma, *lw.norm1_beta);
    Tensor q = ref_linear(u, *lw.q_w, *lw.q_b);
    Tensor k = ref_linear(u, *lw.k_w, *lw.k_b);
    Tensor v = ref_linear(u, *lw.v_w, *lw.v_b);
    const float inv_scale = static_cast<float>(1.0 / std::sqrt(double(d)));
    Tensor ctx({m, c});
    std::vector<float> row(static_cast<std::size_t>(m));
    for (int hh = 0; hh < heads; ++hh) {
        const std::int64_t c0 = static_cast<std::int64_t>(hh) * d;
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < m; ++j) {
                double s = 0.0;
                for (std::int64_t t = 0; t < d; ++t)
                    s += double(q(i, c0 + t)) * double(k(j, c0 + t));
                row[static_cast<std::size_t>(j)] = static_cast<float>(s);
                row[static_cast<std::size_t>(j)] *= inv_scale;
            }
            float mx = row[0];
            for (std::int64_t j = 1; j < m; ++j)
                mx = std::max(mx, row[static_cast<std::size_t>(j)]);
            double sum = 0.0;
            for (std::int64_t j = 0; j < m; ++j) {
                const double e = std::exp(double(row[static_cast<std::size_t>(j)]) - double(mx));
                row[static_cast<std::size_t>(j)] = static_cast<float>(e);
                sum += e;
            }
            const double inv = 1.0 / sum;
            for (std::int64_t j = 0; j < m; ++j)
                row[static_cast<std::size_t>(j)] =
                    static_cast<float>(double(row[static_cast<std::size_t>(j)]) * inv);
            for (std::int64_t t = 0; t < d; ++t) {
                double acc = 0.0;
                for (std::int64_t j = 0; j < m; ++j)
                    acc += double(row[static_cast<std::size_t>(j)]) * double(v(j, c0 + t));
                ctx(i, c0 + t) = static_cast<float>(acc);
            }
        }
    }
    Tensor x1 = add(joint, ref_linear(ctx, *lw.proj_w, *lw.proj_b));
    Tensor u2 = ref_layer_norm(x1, *lw.norm2_gamma, *lw.norm2_beta);
    Tensor hidden = ref_linear(u2, *lw.fc1_w, *lw.fc1_b);
    for (std::int64_t i = 0; i < hidden.size(); ++i) {
        const double xv = hidden[i];
        hidden[i] = static_cast<float>(xv * 0.5 * (1.0 + std::erf(xv * 0.7071067811865475244)));
    }
    return add(x1, ref_linear(hidden, *lw.fc2_w, *lw.fc2_b));
}

// The box terms are piecewise (min/max corners, |.| in the l1 term); a
// central difference straddling one of those boundaries averages two
// regimes and matches neither one-sided derivative. Instances for the FD
// check keep every boundary at least `margin` away, which dwarfs the
// 1e-3 step.
inline bool fd_well_conditioned(const ScoreMaps& maps, const BBox& gt, double margin = 0.02) {
    const auto [row, col] = target_cell(gt, maps.grid());
    const BBox p = box_at_cell(maps, row, col);
    const double px[2] = {p.x1(), p.x2()}, py[2] = {p.y1(), p.y2()};
    const double gx[2] = {gt.x1(), gt.x2()}, gy[2] = {gt.y1(), gt.y2()};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            if (std::abs(px[i] - gx[j]) < margin || std::abs(py[i] - gy[j]) < margin)
                return false;
    const double iw = std::min(px[1], gx[1]) - std::max(px[0], gx[0]);
    const double ih = std::min(py[1], gy[1]) - std::max(py[0], gy[0]);
    if (std::abs(iw) < margin || std::abs(ih) < margin) return false;
    return std::abs(double(p.cx) - gt.cx) >= margin &&
           std::abs(double(p.cy) - gt.cy) >= margin &&
           std::abs(double(p.w) - gt.w) >= margin && std::abs(double(p.h) - gt.h) >= margin;
}

// Central finite difference of the double-precision total loss w.r.t. one
// score-map entry, using the actually representable step.
inline double fd_loss(ScoreMaps& maps, Tensor& map, std::int64_t idx, const BBox& gt,
                      const LossConfig& cfg, double step) {
    const float orig = map[idx];
    const float hi = static_cast<float>(double(orig) + step);
    const float lo = static_cast<float>(double(orig) - step);
    map[idx] = hi;
    const double f_hi = total_loss_value(maps, gt, cfg);
    map[idx] = lo;
    const double f_lo = total_loss_value(maps, gt, cfg);
    map[idx] = orig;
    return (f_hi - f_lo) / (double(hi) - double(lo));
}

} // namespace verify_detail

// ---- individual checks (toy dims, deterministic in `seed`) ----

inline VerifyResult check_slice_equivalence(std::uint64_t seed, int trials = 20,
                                            double tol = 1e-6) {
    using namespace verify_detail;
    ModelConfig cfg = toy_variant_config(Variant::B6);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        WeightStore w = WeightStore::random(cfg, seed + static_cast<std::uint64_t>(t));
        SplitMix64 rng(seed * 31 + static_cast<std::uint64_t>(t));
        Tensor x = rand_tensor({cfg.search_tokens(), cfg.embed_dim}, rng, -1.0, 1.0);
        Tensor z = rand_tensor({cfg.template_tokens(), cfg.embed_dim}, rng, -1.0, 1.0);
        const LayerWeights lw = layer_weights(w, cfg.fe_layers);
        TokenSeq got = asym_block(TokenSeq{x, Origin::Search}, TokenSeq{z, Origin::Template},
                                  cfg, lw);
        Tensor joint = ref_joint_block(concat_rows(x, z), cfg, lw);
        for (std::int64_t i = 0; i < x.extent(0); ++i)
            for (std::int64_t j = 0; j < x.extent(1); ++j)
                worst = std::max(worst, std::abs(double(got.tokens(i, j)) - double(joint(i, j))));
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max |asym - joint slice| = %.3g over %d trials", worst,
                  trials);
    return {"slice-equivalence", worst <= tol, buf};
}

inline VerifyResult check_cache_soundness(std::uint64_t seed, int n_frames = 8,
                                          double tol = 1e-6) {
    ModelConfig cfg = toy_variant_config(Variant::B4);
    WeightStore w = WeightStore::random(cfg, seed);
    SyntheticSequence seq = synthetic_sequence(96, 96, n_frames, seed);
    TrackState cached = init_track(seq.frames[0], seq.boxes[0], cfg, w);
    TrackState fresh = init_track(seq.frames[0], seq.boxes[0], cfg, w);
    double worst = 0.0;
    for (int i = 1; i < n_frames; ++i) {
        // reference path recomputes the template features every frame
        fresh.template_cache.features = extract_template(fresh.template_crop, cfg, w);
        TrackResult a = track_frame(cached, seq.frames[static_cast<std::size_t>(i)]);
        TrackResult b = track_frame(fresh, seq.frames[static_cast<std::size_t>(i)]);
        worst = std::max({worst, std::abs(double(a.box.cx) - b.box.cx),
                          std::abs(double(a.box.cy) - b.box.cy),
                          std::abs(double(a.box.w) - b.box.w),
                          std::abs(double(a.box.h) - b.box.h)});
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max coord diff cached vs recomputed = %.3g over %d frames",
                  worst, n_frames - 1);
    return {"cache-soundness", worst <= tol, buf};
}

inline VerifyResult check_cost_oracle(std::uint64_t seed, int random_configs = 5) {
    std::vector<ModelConfig> configs;
    for (Variant v : kAllVariants) configs.push_back(toy_variant_config(v));
    SplitMix64 rng(seed);
    while (static_cast<int>(configs.size()) < 4 + random_configs) {
        ModelConfig cfg;
        cfg.embed_dim = 8 * (1 + static_cast<int>(rng.next_u64() % 6));     // 8..48
        cfg.num_heads = (cfg.embed_dim % 16 == 0 && rng.next_u64() % 2) ? 4 : 2;
        cfg.mlp_ratio = 1 + static_cast<int>(rng.next_u64() % 3);
        cfg.patch_size = 8;
        cfg.template_h = cfg.template_w = 16;
        cfg.search_h = cfg.search_w = 8 * (3 + static_cast<int>(rng.next_u64() % 2)); // 24/32
        cfg.fe_layers = static_cast<int>(rng.next_u64() % 3);
        cfg.ai_layers = static_cast<int>(rng.next_u64() % 3);
        if (cfg.fe_layers + cfg.ai_layers == 0) cfg.ai_layers = 1;
        configs.push_back(cfg);
    }
    for (const ModelConfig& cfg : configs) {
        WeightStore w = WeightStore::random(cfg, seed ^ 0xabcdef);
        if (count_params(cfg).total_params != w.element_count())
            return {"cost-oracle", false, "param count != weight element count"};
        SplitMix64 trng(seed + 99);
        Tensor timg = verify_detail::rand_tensor({3, cfg.template_h, cfg.template_w}, trng, 0.0, 1.0);
        Tensor simg = verify_detail::rand_tensor({3, cfg.search_h, cfg.search_w}, trng, 0.0, 1.0);
        MacCounter tmpl_counter;
        Tensor feats = extract_template(timg, cfg, w, &tmpl_counter);
        MacCounter frame_counter;
        Tensor tokens = forward_search(simg, feats, cfg, w, &frame_counter);
        head_forward(tokens, cfg, w, &frame_counter);
        if (count_macs(cfg, false).total_macs != frame_counter.total)
            return {"cost-oracle", false, "per-frame MACs mismatch (analytic vs instrumented)"};
        if (count_macs(cfg, true).total_macs != frame_counter.total + tmpl_counter.total)
            return {"cost-oracle", false, "template-pass MACs mismatch"};
    }
    return {"cost-oracle", true,
            std::to_string(configs.size()) + " configs, analytic == instrumented exactly"};
}

inline VerifyResult check_gradients(std::uint64_t seed, int instances = 10, double tol = 1e-4) {
    using namespace verify_detail;
    const int s = 8;
    double worst = 0.0;
    SplitMix64 rng(seed + 5);
    for (int t = 0; t < instances; ++t) {
        // mid-range probabilities: the h^2 truncation error of the central
        // difference grows as 1/p^2 near the ends of the log terms
        ScoreMaps maps;
        BBox gt;
        int guard = 0;
        do {
            maps = ScoreMaps{rand_tensor({s, s}, rng, 0.15, 0.85),
                             rand_tensor({2, s, s}, rng, 0.15, 0.85),
                             rand_tensor({2, s, s}, rng, 0.15, 0.85)};
            gt = BBox{static_cast<float>(0.2 + 0.6 * rng.next_uniform()),
                      static_cast<float>(0.2 + 0.6 * rng.next_uniform()),
                      static_cast<float>(0.1 + 0.4 * rng.next_uniform()),
                      static_cast<float>(0.1 + 0.4 * rng.next_uniform())};
        } while (!fd_well_conditioned(maps, gt) && ++guard < 500);
        LossConfig cfg;
        LossGrad grad = loss_grad(maps, gt, cfg);
        auto compare = [&](Tensor& map, const Tensor& analytic) {
            for (std::int64_t i = 0; i < map.size(); ++i) {
                const double fd = fd_loss(maps, map, i, gt, cfg, 1e-3);
                const double a = analytic[i];
                const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
                worst = std::max(worst, std::abs(a - fd) / denom);
            }
        };
        compare(maps.center, grad.d_center);
        compare(maps.offset, grad.d_offset);
        compare(maps.size, grad.d_size);
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max rel err analytic vs central FD = %.3g over %d maps",
                  worst, instances);
    return {"gradient-check", worst <= tol, buf};
}

inline VerifyResult check_loss_identities(std::uint64_t seed, int pairs = 2000) {
    SplitMix64 rng(seed + 17);
    auto rand_box = [&]() {
        return BBox{static_cast<float>(rng.next_uniform()),
                    static_cast<float>(rng.next_uniform()),
                    static_cast<float>(0.05 + 0.9 * rng.next_uniform()),
                    static_cast<float>(0.05 + 0.9 * rng.next_uniform())};
    };
    for (int i = 0; i < pairs; ++i) {
        const BBox a = rand_box(), b = rand_box();
        const double g = giou(a, b);
        if (g < -1.0 || g > 1.0) return {"loss-identities", false, "giou out of [-1,1]"};
        if (std::abs(g - giou(b, a)) > 1e-12)
            return {"loss-identities", false, "giou not symmetric"};
        if (giou(a, a) != 1.0) return {"loss-identities", false, "giou(a,a) != 1"};
    }
    // composition is exact in float arithmetic
    ScoreMaps maps{Tensor::full({4, 4}, 0.3f), Tensor::full({2, 4, 4}, 0.5f),
                   Tensor::full({2, 4, 4}, 0.25f)};
    const BBox gt{0.5f, 0.5f, 0.2f, 0.2f};
    const LossConfig lc;
    const LossBreakdown bd = total_loss(maps, gt, lc);
    if (bd.total != bd.focal + lc.lambda_giou * bd.giou + lc.lambda_l1 * bd.l1)
        return {"loss-identities", false, "total != focal + 2*giou + 5*l1"};
    if (bd.focal < 0.0f) return {"loss-identities", false, "negative focal loss"};
    return {"loss-identities", true, std::to_string(pairs) + " box pairs + composition"};
}

inline VerifyResult check_numeric_invariants(std::uint64_t seed) {
    using namespace verify_detail;
    SplitMix64 rng(seed + 23);
    // softmax rows sum to 1
    Tensor logits = rand_tensor({32, 24}, rng, -50.0, 50.0);
    Tensor probs = softmax_rows(logits);
    for (std::int64_t i = 0; i < probs.extent(0); ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < probs.extent(1); ++j) s += probs(i, j);
        if (std::abs(s - 1.0) > 1e-6)
            return {"numeric-invariants", false, "softmax row sum off by > 1e-6"};
    }
    // attention rows sum to 1
    ModelConfig cfg = toy_variant_config(Variant::B4);
    WeightStore w = WeightStore::random(cfg, seed);
    Tensor timg = rand_tensor({3, cfg.template_h, cfg.template_w}, rng, 0.0, 1.0);
    Tensor simg = rand_tensor({3, cfg.search_h, cfg.search_w}, rng, 0.0, 1.0);
    Tensor feats = extract_template(timg, cfg, w);
    Tensor rows = attention_rows(simg, feats, cfg, w, cfg.fe_layers);
    for (std::int64_t i = 0; i < rows.extent(0); ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < rows.extent(1); ++j) s += rows(i, j);
        if (std::abs(s - 1.0) > 1e-6)
            return {"numeric-invariants", false, "attention row sum off by > 1e-6"};
    }
    // hanning2d(3) is a one-hot center
    Tensor han = hanning2d(3);
    for (std::int64_t i = 0; i < 9; ++i)
        if (han[i] != (i == 4 ? 1.0f : 0.0f))
            return {"numeric-invariants", false, "hanning2d(3) is not one-hot"};
    // patchify round-trip is bit-exact
    Tensor img = rand_tensor({3, 32, 32}, rng, -2.0, 2.0);
    Tensor back = unpatchify(patchify(img, 16), 16, 3, 32, 32);
    for (std::int64_t i = 0; i < img.size(); ++i)
        if (img[i] != back[i])
            return {"numeric-invariants", false, "patchify round-trip not bit-exact"};
    return {"numeric-invariants", true, "softmax, attention rows, hanning, patchify"};
}

inline VerifyResult check_layer_counts(std::uint64_t seed) {
    for (Variant v : kAllVariants) {
        ModelConfig cfg = toy_variant_config(v);
        WeightStore w = WeightStore::random(cfg, seed);
        SplitMix64 rng(seed + 3);
        Tensor timg = verify_detail::rand_tensor({3, cfg.template_h, cfg.template_w}, rng, 0.0, 1.0);
        Tensor simg = verify_detail::rand_tensor({3, cfg.search_h, cfg.search_w}, rng, 0.0, 1.0);
        EncoderTrace ttrace;
        Tensor feats = extract_template(timg, cfg, w, nullptr, &ttrace);
        if (ttrace.self_blocks != cfg.total_layers() || ttrace.asym_blocks != 0)
            return {"layer-counts", false, "template pass block schedule wrong"};
        EncoderTrace strace;
        forward_search(simg, feats, cfg, w, nullptr, &strace);
        if (strace.self_blocks != cfg.fe_layers || strace.asym_blocks != cfg.ai_layers)
            return {"layer-counts", false, "search pass block schedule wrong"};
    }
    // the sweep enumerates exactly the layer-budget grid
    ModelConfig base = toy_variant_config(Variant::B9);
    base.fe_layers = 6;
    base.ai_layers = 3;
    WeightStore w = WeightStore::random(base, seed);
    auto rows = pruning_sweep(base, w, nullptr);
    if (rows.size() != kSweepGrid.size())
        return {"layer-counts", false, "sweep row count wrong"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& [total, fe, ai] = kSweepGrid[i];
        if (rows[i].total_layers != total || rows[i].fe != fe || rows[i].ai != ai ||
            rows[i].failed)
            return {"layer-counts", false, "sweep enumeration mismatch"};
    }
    return {"layer-counts", true, "block schedules and sweep grid as configured"};
}

inline VerifyResult check_weight_roundtrip(std::uint64_t seed, const std::string& tmp_path) {
    ModelConfig cfg = toy_variant_config(Variant::B4);
    WeightStore a = WeightStore::random(cfg, seed);
    a.save(tmp_path);
    WeightStore b = WeightStore::load(tmp_path);
    std::remove(tmp_path.c_str());
    if (a.digest() != b.digest()) return {"weights-roundtrip", false, "digest changed"};
    if (!(b.config() == cfg)) return {"weights-roundtrip", false, "config echo changed"};
    if (a.element_count() != b.element_count())
        return {"weights-roundtrip", false, "element count changed"};
    return {"weights-roundtrip", true, "save/load preserves digest and config"};
}

// Runs the whole suite at toy dims, printing one line per check.
inline bool run_verify(std::ostream& os, std::uint64_t seed,
                       const std::string& tmp_weight_path = "/tmp/litetrack_verify.ltw") {
    std::vector<VerifyResult> results;
    results.push_back(check_slice_equivalence(seed));
    results.push_back(check_cache_soundness(seed));
    results.push_back(check_cost_oracle(seed));
    results.push_back(check_gradients(seed));
    results.push_back(check_loss_identities(seed));
    results.push_back(check_numeric_invariants(seed));
    results.push_back(check_layer_counts(seed));
    results.push_back(check_weight_roundtrip(seed, tmp_weight_path));
    bool all = true;
    for (const auto& r : results) {
        os << (r.passed ? "[ok]   " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        all = all && r.passed;
    }
    os << (all ? "verify: all checks passed\n" : "verify: FAILURES\n");
    return all;
}

} // namespace litetrack
