#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "litetrack/errors.hpp"

namespace litetrack {

// Counts multiply-accumulate operations issued by matmul (and nothing
// else: softmax, normalization and elementwise work are excluded by
// convention, matching how transformer MAC tables are computed).
// One counter per worker; merge by summing totals.
struct MacCounter {
    bool enabled = true;
    std::uint64_t total = 0;

    void add(std::uint64_t macs) {
        if (enabled) total += macs;
    }
};

inline std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

// Dense row-major float32 array. The single numeric currency of the
// library: images, token matrices, score maps and weights are all Tensors.
// Treat instances as immutable once filled; every operation below returns
// a fresh Tensor and never writes through its inputs.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape)
        : shape_(std::move(shape)) {
        data_.assign(check_extents(shape_), 0.0f);
    }

    Tensor(std::vector<std::int64_t> shape, std::vector<float> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        if (check_extents(shape_) != static_cast<std::int64_t>(data_.size()))
            throw DimensionError("tensor: " + shape_str(shape_) + " needs " +
                                 std::to_string(check_extents(shape_)) +
                                 " values, got " + std::to_string(data_.size()));
    }

    static Tensor full(std::vector<std::int64_t> shape, float value) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    float& operator()(std::int64_t i, std::int64_t j) {
        return data_[static_cast<std::size_t>(i * shape_[1] + j)];
    }
    float operator()(std::int64_t i, std::int64_t j) const {
        return data_[static_cast<std::size_t>(i * shape_[1] + j)];
    }
    float& operator()(std::int64_t c, std::int64_t y, std::int64_t x) {
        return data_[static_cast<std::size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }
    float operator()(std::int64_t c, std::int64_t y, std::int64_t x) const {
        return data_[static_cast<std::size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }
    float& operator()(std::int64_t o, std::int64_t i, std::int64_t y, std::int64_t x) {
        return data_[static_cast<std::size_t>(((o * shape_[1] + i) * shape_[2] + y) * shape_[3] + x)];
    }
    float operator()(std::int64_t o, std::int64_t i, std::int64_t y, std::int64_t x) const {
        return data_[static_cast<std::size_t>(((o * shape_[1] + i) * shape_[2] + y) * shape_[3] + x)];
    }

private:
    static std::int64_t check_extents(const std::vector<std::int64_t>& shape) {
        if (shape.empty())
            throw DimensionError("tensor: rank-0 shape");
        std::int64_t n = 1;
        for (std::int64_t e : shape) {
            if (e < 1)
                throw DimensionError("tensor: non-positive extent in " + shape_str(shape));
            n *= e;
        }
        return n;
    }

    std::vector<std::int64_t> shape_;
    std::vector<float> data_;
};

namespace detail {

// Inner kernel: C[M x N] = A[M x K] * B[K x N] with 64-bit accumulation.
// Each output element sums its K products in ascending-k order; float
// products are exact in double, so the result is bit-identical across
// vectorization levels and platforms. Blocked over j for cache reuse.
inline void matmul_kernel(const float* a, const float* b, float* c,
                          std::int64_t m, std::int64_t k_extent, std::int64_t n) {
    constexpr std::int64_t kJBlock = 512;
    std::vector<double> acc(static_cast<std::size_t>(std::min(n, kJBlock)));
    for (std::int64_t i = 0; i < m; ++i) {
        const float* arow = a + i * k_extent;
        for (std::int64_t j0 = 0; j0 < n; j0 += kJBlock) {
            const std::int64_t jn = std::min(kJBlock, n - j0);
            for (std::int64_t j = 0; j < jn; ++j) acc[static_cast<std::size_t>(j)] = 0.0;
            std::int64_t k = 0;
            for (; k + 4 <= k_extent; k += 4) {
                const double a0 = arow[k], a1 = arow[k + 1];
                const double a2 = arow[k + 2], a3 = arow[k + 3];
                const float* b0 = b + k * n + j0;
                const float* b1 = b0 + n;
                const float* b2 = b1 + n;
                const float* b3 = b2 + n;
                for (std::int64_t j = 0; j < jn; ++j) {
                    double s = acc[static_cast<std::size_t>(j)];
                    s += a0 * double(b0[j]);
                    s += a1 * double(b1[j]);
                    s += a2 * double(b2[j]);
                    s += a3 * double(b3[j]);
                    acc[static_cast<std::size_t>(j)] = s;
                }
            }
            for (; k < k_extent; ++k) {
                const double aik = arow[k];
                const float* brow = b + k * n + j0;
                for (std::int64_t j = 0; j < jn; ++j)
                    acc[static_cast<std::size_t>(j)] += aik * double(brow[j]);
            }
            float* crow = c + i * n + j0;
            for (std::int64_t j = 0; j < jn; ++j)
                crow[j] = static_cast<float>(acc[static_cast<std::size_t>(j)]);
        }
    }
}

} // namespace detail

// Matrix product of a [M x K] by b [K x N]. Ticks the counter by exactly
// M*K*N when one is supplied and enabled.
inline Tensor matmul(const Tensor& a, const Tensor& b, MacCounter* counter = nullptr) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));
    const std::int64_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor c({m, n});
    detail::matmul_kernel(a.data(), b.data(), c.data(), m, k, n);
    if (counter)
        counter->add(static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(k) *
                     static_cast<std::uint64_t>(n));
    return c;
}

// Row-wise softmax of a [M x N] matrix, stabilized by per-row max
// subtraction. Sums are accumulated in double.
inline Tensor softmax_rows(const Tensor& logits) {
    if (logits.rank() != 2)
        throw DimensionError("softmax_rows: expected a matrix, got " + shape_str(logits.shape()));
    const std::int64_t m = logits.extent(0), n = logits.extent(1);
    const float* in = logits.data();
    for (std::int64_t i = 0; i < m * n; ++i)
        if (!std::isfinite(in[i]))
            throw NumericError("softmax_rows: non-finite logit at flat index " + std::to_string(i));
    Tensor out({m, n});
    float* o = out.data();
    for (std::int64_t i = 0; i < m; ++i) {
        const float* row = in + i * n;
        float* orow = o + i * n;
        float rowmax = row[0];
        for (std::int64_t j = 1; j < n; ++j) rowmax = std::max(rowmax, row[j]);
        double sum = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            double e = std::exp(double(row[j]) - double(rowmax));
            orow[j] = static_cast<float>(e);
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (std::int64_t j = 0; j < n; ++j)
            orow[j] = static_cast<float>(double(orow[j]) * inv);
    }
    return out;
}

// Per-row layer normalization of x [M x C] followed by the (gamma, beta)
// affine map. Population variance, eps inside the square root.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         float eps = 1e-5f) {
    if (x.rank() != 2)
        throw DimensionError("layer_norm: expected a matrix, got " + shape_str(x.shape()));
    const std::int64_t m = x.extent(0), c = x.extent(1);
    if (gamma.rank() != 1 || beta.rank() != 1 || gamma.extent(0) != c || beta.extent(0) != c)
        throw DimensionError("layer_norm: parameter shapes " + shape_str(gamma.shape()) + ", " +
                             shape_str(beta.shape()) + " do not match row width " +
                             std::to_string(c));
    Tensor out({m, c});
    const float* in = x.data();
    const float* g = gamma.data();
    const float* b = beta.data();
    float* o = out.data();
    for (std::int64_t i = 0; i < m; ++i) {
        const float* row = in + i * c;
        double mean = 0.0;
        for (std::int64_t j = 0; j < c; ++j) mean += row[j];
        mean /= double(c);
        double var = 0.0;
        for (std::int64_t j = 0; j < c; ++j) {
            double d = double(row[j]) - mean;
            var += d * d;
        }
        var /= double(c);
        const double inv = 1.0 / std::sqrt(var + double(eps));
        float* orow = o + i * c;
        for (std::int64_t j = 0; j < c; ++j)
            orow[j] = static_cast<float>(double(g[j]) * ((double(row[j]) - mean) * inv) + double(b[j]));
    }
    return out;
}

// Exact GELU: x * Phi(x) with the erf-based normal CDF.
inline Tensor gelu(const Tensor& x) {
    Tensor out(x.shape());
    const float* in = x.data();
    float* o = out.data();
    const std::int64_t n = x.size();
    for (std::int64_t i = 0; i < n; ++i) {
        const double v = in[i];
        o[i] = static_cast<float>(v * 0.5 * (1.0 + std::erf(v * 0.7071067811865475244)));
    }
    return out;
}

// Splits a [C x H x W] image into non-overlapping patch rows: row i is the
// i-th patch in raster order, flattened channel-major, so the output is
// [(H/P * W/P) x (C * P * P)].
inline Tensor patchify(const Tensor& image, std::int64_t patch) {
    if (image.rank() != 3)
        throw DimensionError("patchify: expected [C x H x W], got " + shape_str(image.shape()));
    const std::int64_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
    if (patch < 1 || h % patch != 0 || w % patch != 0)
        throw DimensionError("patchify: extents " + shape_str(image.shape()) +
                             " not divisible by patch " + std::to_string(patch));
    const std::int64_t gy = h / patch, gx = w / patch;
    Tensor out({gy * gx, c * patch * patch});
    for (std::int64_t py = 0; py < gy; ++py)
        for (std::int64_t px = 0; px < gx; ++px) {
            float* row = out.data() + (py * gx + px) * out.extent(1);
            std::int64_t k = 0;
            for (std::int64_t ch = 0; ch < c; ++ch)
                for (std::int64_t dy = 0; dy < patch; ++dy)
                    for (std::int64_t dx = 0; dx < patch; ++dx)
                        row[k++] = image(ch, py * patch + dy, px * patch + dx);
        }
    return out;
}

// Inverse of patchify; reproduces the original image bit-exactly.
inline Tensor unpatchify(const Tensor& rows, std::int64_t patch, std::int64_t channels,
                         std::int64_t height, std::int64_t width) {
    if (rows.rank() != 2)
        throw DimensionError("unpatchify: expected a matrix, got " + shape_str(rows.shape()));
    if (patch < 1 || height % patch != 0 || width % patch != 0)
        throw DimensionError("unpatchify: target extents not divisible by patch");
    const std::int64_t gy = height / patch, gx = width / patch;
    if (rows.extent(0) != gy * gx || rows.extent(1) != channels * patch * patch)
        throw DimensionError("unpatchify: rows " + shape_str(rows.shape()) +
                             " do not match target " + std::to_string(channels) + "x" +
                             std::to_string(height) + "x" + std::to_string(width));
    Tensor img({channels, height, width});
    for (std::int64_t py = 0; py < gy; ++py)
        for (std::int64_t px = 0; px < gx; ++px) {
            const float* row = rows.data() + (py * gx + px) * rows.extent(1);
            std::int64_t k = 0;
            for (std::int64_t ch = 0; ch < channels; ++ch)
                for (std::int64_t dy = 0; dy < patch; ++dy)
                    for (std::int64_t dx = 0; dx < patch; ++dx)
                        img(ch, py * patch + dy, px * patch + dx) = row[k++];
        }
    return img;
}

// out-of-place row-broadcast add; bias has one entry per column.
inline Tensor add_bias_rows(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 2 || bias.rank() != 1 || bias.extent(0) != x.extent(1))
        throw DimensionError("add_bias_rows: bias " + shape_str(bias.shape()) +
                             " does not match " + shape_str(x.shape()));
    Tensor out = x;
    const std::int64_t m = x.extent(0), n = x.extent(1);
    float* o = out.data();
    const float* b = bias.data();
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) o[i * n + j] += b[j];
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    Tensor out = a;
    float* o = out.data();
    const float* p = b.data();
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) o[i] += p[i];
    return out;
}

inline Tensor scale(const Tensor& a, float s) {
    Tensor out = a;
    float* o = out.data();
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) o[i] *= s;
    return out;
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(1))
        throw DimensionError("concat_rows: column mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    Tensor out({a.extent(0) + b.extent(0), a.extent(1)});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("max_abs_diff: shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    double m = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

} // namespace litetrack
