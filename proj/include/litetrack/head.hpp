#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "litetrack/config.hpp"
#include "litetrack/errors.hpp"
#include "litetrack/tensor.hpp"
#include "litetrack/weights.hpp"

namespace litetrack {

// Center-size box. Units depend on context: normalized to the search
// crop when decoded from score maps, absolute pixels in the tracker loop.
struct BBox {
    float cx = 0.0f;
    float cy = 0.0f;
    float w = 0.0f;
    float h = 0.0f;

    float x1() const { return cx - 0.5f * w; }
    float y1() const { return cy - 0.5f * h; }
    float x2() const { return cx + 0.5f * w; }
    float y2() const { return cy + 0.5f * h; }
    float area() const { return w * h; }

    static BBox from_xyxy(float x1, float y1, float x2, float y2) {
        return BBox{0.5f * (x1 + x2), 0.5f * (y1 + y2), x2 - x1, y2 - y1};
    }
    // top-left + size, the convention of ground-truth and result files
    static BBox from_xywh(float x, float y, float w, float h) {
        return BBox{x + 0.5f * w, y + 0.5f * h, w, h};
    }
};

// Head outputs on the S x S search grid: center is a [S x S] confidence
// map in (0,1); offset [2 x S x S] holds the sub-cell (x, y) correction;
// size [2 x S x S] holds normalized (w, h).
struct ScoreMaps {
    Tensor center;
    Tensor offset;
    Tensor size;

    int grid() const { return static_cast<int>(center.extent(0)); }
};

namespace detail {

// 3x3 same-padding convolution as im2col + matmul, so its
// multiply-accumulates run through the instrumented kernel: exactly
// S*S*9*in*out per call.
inline Tensor conv3x3(const Tensor& fmap, const Tensor& weight, const Tensor& bias,
                      MacCounter* counter) {
    const std::int64_t in_ch = fmap.extent(0), sy = fmap.extent(1), sx = fmap.extent(2);
    const std::int64_t out_ch = weight.extent(0);
    if (weight.extent(1) != in_ch || weight.extent(2) != 3 || weight.extent(3) != 3)
        throw DimensionError("conv3x3: weight " + shape_str(weight.shape()) +
                             " does not match input " + shape_str(fmap.shape()));
    Tensor cols({sy * sx, in_ch * 9});
    for (std::int64_t y = 0; y < sy; ++y)
        for (std::int64_t x = 0; x < sx; ++x) {
            float* row = cols.data() + (y * sx + x) * cols.extent(1);
            std::int64_t k = 0;
            for (std::int64_t c = 0; c < in_ch; ++c)
                for (std::int64_t dy = -1; dy <= 1; ++dy)
                    for (std::int64_t dx = -1; dx <= 1; ++dx) {
                        const std::int64_t yy = y + dy, xx = x + dx;
                        row[k++] = (yy < 0 || yy >= sy || xx < 0 || xx >= sx)
                                       ? 0.0f
                                       : fmap(c, yy, xx);
                    }
        }
    Tensor wmat({in_ch * 9, out_ch});
    for (std::int64_t o = 0; o < out_ch; ++o)
        for (std::int64_t c = 0; c < in_ch; ++c)
            for (std::int64_t dy = 0; dy < 3; ++dy)
                for (std::int64_t dx = 0; dx < 3; ++dx)
                    wmat(c * 9 + dy * 3 + dx, o) = weight(o, c, dy, dx);
    Tensor flat = matmul(cols, wmat, counter);
    Tensor out({out_ch, sy, sx});
    const float* b = bias.data();
    for (std::int64_t o = 0; o < out_ch; ++o)
        for (std::int64_t y = 0; y < sy; ++y)
            for (std::int64_t x = 0; x < sx; ++x)
                out(o, y, x) = flat(y * sx + x, o) + b[o];
    return out;
}

// Batch-free per-channel normalization over spatial positions, with
// affine parameters. Single-sample inference; no running statistics.
inline Tensor channel_norm(const Tensor& fmap, const Tensor& gamma, const Tensor& beta,
                           float eps = 1e-5f) {
    const std::int64_t ch = fmap.extent(0), n = fmap.extent(1) * fmap.extent(2);
    Tensor out(fmap.shape());
    for (std::int64_t c = 0; c < ch; ++c) {
        const float* in = fmap.data() + c * n;
        float* o = out.data() + c * n;
        double mean = 0.0;
        for (std::int64_t i = 0; i < n; ++i) mean += in[i];
        mean /= double(n);
        double var = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            double d = double(in[i]) - mean;
            var += d * d;
        }
        var /= double(n);
        const double inv = 1.0 / std::sqrt(var + double(eps));
        const double g = gamma[c], b = beta[c];
        for (std::int64_t i = 0; i < n; ++i)
            o[i] = static_cast<float>(g * ((double(in[i]) - mean) * inv) + b);
    }
    return out;
}

inline void relu_inplace(Tensor& t) {
    float* p = t.data();
    for (std::int64_t i = 0; i < t.size(); ++i)
        if (p[i] < 0.0f) p[i] = 0.0f;
}

inline void logistic_inplace(Tensor& t) {
    float* p = t.data();
    for (std::int64_t i = 0; i < t.size(); ++i)
        p[i] = static_cast<float>(1.0 / (1.0 + std::exp(-double(p[i]))));
}

// One head branch: three conv-norm-relu stages halving the channel count,
// then an output conv squashed by the logistic.
inline Tensor head_branch(const Tensor& fmap, const WeightStore& w, const std::string& branch,
                          MacCounter* counter) {
    const std::string p = "head." + branch + ".";
    Tensor t = fmap;
    for (int k = 1; k <= 3; ++k) {
        t = conv3x3(t, w.get(p + "conv" + std::to_string(k) + ".weight"),
                    w.get(p + "conv" + std::to_string(k) + ".bias"), counter);
        t = channel_norm(t, w.get(p + "norm" + std::to_string(k) + ".gamma"),
                         w.get(p + "norm" + std::to_string(k) + ".beta"));
        relu_inplace(t);
    }
    t = conv3x3(t, w.get(p + "conv4.weight"), w.get(p + "conv4.bias"), counter);
    logistic_inplace(t);
    return t;
}

} // namespace detail

// Reshapes search tokens [N x C] to a C x S x S map and runs the three
// prediction branches. N must be a perfect square.
inline ScoreMaps head_forward(const Tensor& search_tokens, const ModelConfig& cfg,
                              const WeightStore& w, MacCounter* counter = nullptr) {
    if (search_tokens.rank() != 2 || search_tokens.extent(1) != cfg.embed_dim)
        throw DimensionError("head_forward: tokens " + shape_str(search_tokens.shape()) +
                             " do not match embed_dim " + std::to_string(cfg.embed_dim));
    const std::int64_t n = search_tokens.extent(0);
    const std::int64_t s = static_cast<std::int64_t>(std::llround(std::sqrt(double(n))));
    if (s * s != n)
        throw DimensionError("head_forward: token count " + std::to_string(n) +
                             " is not a perfect square");
    const std::int64_t c = cfg.embed_dim;
    Tensor fmap({c, s, s});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch)
            fmap(ch, i / s, i % s) = search_tokens(i, ch);

    Tensor center3 = detail::head_branch(fmap, w, "center", counter);
    Tensor offset = detail::head_branch(fmap, w, "offset", counter);
    Tensor size = detail::head_branch(fmap, w, "size", counter);
    Tensor center({s, s});
    for (std::int64_t y = 0; y < s; ++y)
        for (std::int64_t x = 0; x < s; ++x) center(y, x) = center3(0, y, x);
    return ScoreMaps{std::move(center), std::move(offset), std::move(size)};
}

struct Detection {
    BBox box;     // normalized to the search crop
    float score;  // raw center confidence at the chosen cell
    int row;
    int col;
};

// Picks the cell maximizing center (times the penalty when given) and
// assembles the box from the offset and size maps at that cell. Ties go
// to the smallest flat index, which matters for even-sized Hann windows.
inline Detection decode_box(const ScoreMaps& maps, const Tensor* penalty = nullptr) {
    const std::int64_t s = maps.center.extent(0);
    if (penalty) {
        if (penalty->rank() != 2 || penalty->extent(0) != s || penalty->extent(1) != s)
            throw DimensionError("decode_box: penalty " + shape_str(penalty->shape()) +
                                 " does not match score map " + shape_str(maps.center.shape()));
        for (std::int64_t i = 0; i < penalty->size(); ++i)
            if ((*penalty)[i] < 0.0f)
                throw InputError("decode_box: penalty has negative entries");
    }
    std::int64_t best = 0;
    float best_val = -1.0f;
    for (std::int64_t i = 0; i < s * s; ++i) {
        const float v = penalty ? maps.center[i] * (*penalty)[i] : maps.center[i];
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    const std::int64_t row = best / s, col = best % s;
    BBox box;
    box.cx = (static_cast<float>(col) + maps.offset(0, row, col)) / static_cast<float>(s);
    box.cy = (static_cast<float>(row) + maps.offset(1, row, col)) / static_cast<float>(s);
    box.w = maps.size(0, row, col);
    box.h = maps.size(1, row, col);
    return Detection{box, maps.center(row, col), static_cast<int>(row), static_cast<int>(col)};
}

} // namespace litetrack
