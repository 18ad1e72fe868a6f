#pragma once

// Shared helpers for the unit and acceptance suites. The reference
// implementations here are deliberately independent re-statements of the
// math (plain scalar loops), not calls into the code they check.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "litetrack/litetrack.hpp"

namespace ts {

using litetrack::BBox;
using litetrack::LayerWeights;
using litetrack::ModelConfig;
using litetrack::ScoreMaps;
using litetrack::SplitMix64;
using litetrack::Tensor;

inline Tensor rand_tensor(std::vector<std::int64_t> shape, SplitMix64& rng, double lo = -1.0,
                          double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<float>(lo + (hi - lo) * rng.next_uniform());
    return t;
}

// Toy config matching the desk-scale acceptance dims: C=64, 4 heads,
// 16 search tokens, 4 template tokens.
inline ModelConfig toy_config(int fe = 2, int ai = 2) {
    ModelConfig cfg;
    cfg.embed_dim = 64;
    cfg.num_heads = 4;
    cfg.mlp_ratio = 4;
    cfg.patch_size = 16;
    cfg.template_h = cfg.template_w = 32;
    cfg.search_h = cfg.search_w = 64;
    cfg.fe_layers = fe;
    cfg.ai_layers = ai;
    return cfg;
}

// ---- reference transformer block (full self-attention on all rows) ----

inline Tensor ref_layer_norm(const Tensor& x, const Tensor& g, const Tensor& b,
                             double eps = 1e-5) {
    const std::int64_t m = x.extent(0), c = x.extent(1);
    Tensor out({m, c});
    for (std::int64_t i = 0; i < m; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::int64_t j = 0; j < c; ++j) mean += x(i, j);
        mean /= double(c);
        for (std::int64_t j = 0; j < c; ++j) {
            const double d = double(x(i, j)) - mean;
            var += d * d;
        }
        var /= double(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::int64_t j = 0; j < c; ++j)
            out(i, j) = static_cast<float>(double(g[j]) * (double(x(i, j)) - mean) * inv +
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

// One pre-norm block where every row attends to every row; slicing its
// first rows is the oracle for the asymmetric interaction block.
inline Tensor ref_full_block(const Tensor& x, const ModelConfig& cfg, const LayerWeights& lw) {
    const std::int64_t m = x.extent(0), c = x.extent(1);
    const int heads = cfg.num_heads;
    const std::int64_t d = c / heads;
    const float inv_scale = static_cast<float>(1.0 / std::sqrt(double(d)));
    Tensor u = ref_layer_norm(x, *lw.norm1_gamma, *lw.norm1_beta);
    Tensor q = ref_linear(u, *lw.q_w, *lw.q_b);
    Tensor k = ref_linear(u, *lw.k_w, *lw.k_b);
    Tensor v = ref_linear(u, *lw.v_w, *lw.v_b);
    Tensor ctx({m, c});
    std::vector<float> prob(static_cast<std::size_t>(m));
    for (int hh = 0; hh < heads; ++hh) {
        const std::int64_t c0 = hh * d;
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < m; ++j) {
                double s = 0.0;
                for (std::int64_t t = 0; t < d; ++t)
                    s += double(q(i, c0 + t)) * double(k(j, c0 + t));
                prob[std::size_t(j)] = static_cast<float>(s);
                prob[std::size_t(j)] *= inv_scale;
            }
            float mx = prob[0];
            for (std::int64_t j = 1; j < m; ++j) mx = std::max(mx, prob[std::size_t(j)]);
            double sum = 0.0;
            for (std::int64_t j = 0; j < m; ++j) {
                const double e = std::exp(double(prob[std::size_t(j)]) - double(mx));
                prob[std::size_t(j)] = static_cast<float>(e);
                sum += e;
            }
            for (std::int64_t j = 0; j < m; ++j)
                prob[std::size_t(j)] = static_cast<float>(double(prob[std::size_t(j)]) / sum);
            for (std::int64_t t = 0; t < d; ++t) {
                double acc = 0.0;
                for (std::int64_t j = 0; j < m; ++j)
                    acc += double(prob[std::size_t(j)]) * double(v(j, c0 + t));
                ctx(i, c0 + t) = static_cast<float>(acc);
            }
        }
    }
    Tensor x1 = litetrack::add(x, ref_linear(ctx, *lw.proj_w, *lw.proj_b));
    Tensor u2 = ref_layer_norm(x1, *lw.norm2_gamma, *lw.norm2_beta);
    Tensor hid = ref_linear(u2, *lw.fc1_w, *lw.fc1_b);
    for (std::int64_t i = 0; i < hid.size(); ++i) {
        const double xv = hid[i];
        hid[i] = static_cast<float>(xv * 0.5 * (1.0 + std::erf(xv / std::sqrt(2.0))));
    }
    return litetrack::add(x1, ref_linear(hid, *lw.fc2_w, *lw.fc2_b));
}

// All-zero weights (shape checks, planted setups).
inline litetrack::WeightStore zero_store(const ModelConfig& cfg) {
    std::map<std::string, Tensor> tensors;
    for (const auto& [name, shape] : litetrack::expected_weight_shapes(cfg))
        tensors.emplace(name, Tensor(shape));
    return litetrack::WeightStore::from_tensors(cfg, std::move(tensors));
}

// Seeded random store with selected tensors replaced.
inline litetrack::WeightStore store_with(const ModelConfig& cfg, std::uint64_t seed,
                                         const std::map<std::string, Tensor>& overrides) {
    litetrack::WeightStore base = litetrack::WeightStore::random(cfg, seed);
    std::map<std::string, Tensor> tensors;
    for (const std::string& name : base.names()) {
        auto it = overrides.find(name);
        tensors.emplace(name, it != overrides.end() ? it->second : base.get(name));
    }
    return litetrack::WeightStore::from_tensors(cfg, std::move(tensors));
}

// ---- finite differences against the double-precision loss ----

// The box loss is piecewise (min/max corners, |.| terms); a central
// difference straddling a boundary is not a derivative estimate. Keep
// every boundary at least `margin` away from the evaluation point.
inline bool fd_well_conditioned(const ScoreMaps& maps, const BBox& gt, double margin = 0.02) {
    const auto [row, col] = litetrack::target_cell(gt, maps.grid());
    const BBox p = litetrack::box_at_cell(maps, row, col);
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

inline double fd_total_loss(ScoreMaps& maps, Tensor& map, std::int64_t idx, const BBox& gt,
                            const litetrack::LossConfig& cfg, double step) {
    const float orig = map[idx];
    const float hi = static_cast<float>(double(orig) + step);
    const float lo = static_cast<float>(double(orig) - step);
    map[idx] = hi;
    const double f_hi = litetrack::total_loss_value(maps, gt, cfg);
    map[idx] = lo;
    const double f_lo = litetrack::total_loss_value(maps, gt, cfg);
    map[idx] = orig;
    return (f_hi - f_lo) / (double(hi) - double(lo));
}

// ---- scratch directories / synthetic sequence on disk ----

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("litetrack_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// Writes frames + groundtruth.txt in the directory layout `track` expects.
inline void write_sequence(const std::string& dir, const litetrack::SyntheticSequence& seq) {
    char name[32];
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        std::snprintf(name, sizeof(name), "%08zu.ppm", i);
        litetrack::write_ppm(dir + "/" + name, seq.frames[i]);
    }
    std::ofstream gt(dir + "/groundtruth.txt");
    const BBox& b = seq.boxes[0];
    gt << b.x1() << "," << b.y1() << "," << b.w << "," << b.h << "\n";
}

} // namespace ts
