#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "litetrack/errors.hpp"
#include "litetrack/head.hpp"
#include "litetrack/tensor.hpp"

namespace litetrack {

// Training objective: weighted focal loss on the center map plus
// box terms, total = focal + lambda_giou * (1 - giou) + lambda_l1 * l1.
struct LossConfig {
    float lambda_giou = 2.0f;
    float lambda_l1 = 5.0f;
    float focal_alpha = 2.0f; // exponent on (1-p) for positives / p for negatives
    float focal_beta = 4.0f;  // exponent on (1-y) for negatives
    // Gaussian target spread in cells; <= 0 means auto: max(1, S/16).
    float gaussian_sigma = 0.0f;
};

struct LossBreakdown {
    float focal = 0.0f;
    float giou = 0.0f; // giou *loss*, i.e. 1 - giou
    float l1 = 0.0f;
    float total = 0.0f;
};

// log() arguments are clamped to [kProbClamp, 1-kProbClamp]; loss and
// gradient are constant outside that band.
inline constexpr double kProbClamp = 1e-7;

inline double resolve_sigma(const LossConfig& cfg, int grid) {
    if (cfg.gaussian_sigma > 0.0f) return double(cfg.gaussian_sigma);
    return std::max(1.0, double(grid) / 16.0);
}

// y[r,c] = exp(-((r-row)^2 + (c-col)^2) / (2 sigma^2)), peak exactly 1.
inline Tensor gaussian_target(int row, int col, int grid, double sigma) {
    if (row < 0 || row >= grid || col < 0 || col >= grid)
        throw RangeError("gaussian_target: cell (" + std::to_string(row) + "," +
                         std::to_string(col) + ") outside " + std::to_string(grid) + "x" +
                         std::to_string(grid) + " grid");
    Tensor y({grid, grid});
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int r = 0; r < grid; ++r)
        for (int c = 0; c < grid; ++c) {
            const double d2 = double(r - row) * (r - row) + double(c - col) * (c - col);
            y(r, c) = static_cast<float>(std::exp(-d2 * inv));
        }
    return y;
}

// Positives are the cells where the target is exactly 1. Normalized by
// the positive count (at least 1).
inline double focal_loss(const Tensor& pred, const Tensor& target, float alpha = 2.0f,
                         float beta = 4.0f) {
    if (pred.shape() != target.shape())
        throw DimensionError("focal_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    double loss = 0.0;
    std::int64_t npos = 0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(double(pred[i]), kProbClamp, 1.0 - kProbClamp);
        const double y = target[i];
        if (target[i] == 1.0f) {
            ++npos;
            loss -= std::pow(1.0 - p, double(alpha)) * std::log(p);
        } else {
            loss -= std::pow(1.0 - y, double(beta)) * std::pow(p, double(alpha)) *
                    std::log(1.0 - p);
        }
    }
    return loss / double(std::max<std::int64_t>(npos, 1));
}

namespace detail {

// Double-precision center-size box; all loss geometry runs on these so
// the math stays smooth in the underlying float map entries.
struct DBox {
    double cx, cy, w, h;
    explicit DBox(const BBox& b) : cx(b.cx), cy(b.cy), w(b.w), h(b.h) {}
    DBox(double cx_, double cy_, double w_, double h_) : cx(cx_), cy(cy_), w(w_), h(h_) {}
    double x1() const { return cx - 0.5 * w; }
    double y1() const { return cy - 0.5 * h; }
    double x2() const { return cx + 0.5 * w; }
    double y2() const { return cy + 0.5 * h; }
};

inline double giou_impl(const DBox& a, const DBox& b) {
    // all areas from the same corner values, so identical boxes give
    // exactly 1
    const double ax1 = a.x1(), ay1 = a.y1(), ax2 = a.x2(), ay2 = a.y2();
    const double bx1 = b.x1(), by1 = b.y1(), bx2 = b.x2(), by2 = b.y2();
    const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
    const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
    const double inter = iw * ih;
    const double uni = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
    const double hull = (std::max(ax2, bx2) - std::min(ax1, bx1)) *
                        (std::max(ay2, by2) - std::min(ay1, by1));
    return inter / uni - (hull - uni) / hull;
}

} // namespace detail

// Intersection-over-union minus the normalized hull slack:
// IoU(a,b) - (area(hull) - area(union)) / area(hull). Range [-1, 1],
// equal to 1 iff the boxes coincide.
inline double giou(const BBox& a, const BBox& b) {
    if (a.w <= 0.0f || a.h <= 0.0f || b.w <= 0.0f || b.h <= 0.0f)
        throw DomainError("giou: degenerate box (non-positive extent)");
    return detail::giou_impl(detail::DBox(a), detail::DBox(b));
}

struct GiouGrad {
    double value = 0.0;
    double d_cx = 0.0, d_cy = 0.0, d_w = 0.0, d_h = 0.0; // w.r.t. the first box
};

namespace detail {

// giou plus its partial derivatives with respect to the first box's
// center-size parameters (subgradients at min/max ties).
inline GiouGrad giou_grad_impl(const DBox& pred, const DBox& gt) {
    const double p1x = pred.x1(), p1y = pred.y1(), p2x = pred.x2(), p2y = pred.y2();
    const double g1x = gt.x1(), g1y = gt.y1(), g2x = gt.x2(), g2y = gt.y2();

    const double ix1 = std::max(p1x, g1x), iy1 = std::max(p1y, g1y);
    const double ix2 = std::min(p2x, g2x), iy2 = std::min(p2y, g2y);
    const double iw = ix2 - ix1, ih = iy2 - iy1;
    const bool overlap = iw > 0.0 && ih > 0.0;
    const double inter = overlap ? iw * ih : 0.0;
    const double ap = (p2x - p1x) * (p2y - p1y);
    const double ag = (g2x - g1x) * (g2y - g1y);
    const double uni = ap + ag - inter;
    const double hw = std::max(p2x, g2x) - std::min(p1x, g1x);
    const double hh = std::max(p2y, g2y) - std::min(p1y, g1y);
    const double hull = hw * hh;

    // partials in corner coordinates (p1x, p1y, p2x, p2y)
    double di[4] = {0, 0, 0, 0};
    if (overlap) {
        if (p1x > g1x) di[0] = -ih;
        if (p1y > g1y) di[1] = -iw;
        if (p2x < g2x) di[2] = ih;
        if (p2y < g2y) di[3] = iw;
    }
    const double da[4] = {-(p2y - p1y), -(p2x - p1x), p2y - p1y, p2x - p1x};
    double dh[4] = {0, 0, 0, 0};
    if (p1x < g1x) dh[0] = -hh;
    if (p1y < g1y) dh[1] = -hw;
    if (p2x > g2x) dh[2] = hh;
    if (p2y > g2y) dh[3] = hw;

    GiouGrad out;
    out.value = inter / uni - (hull - uni) / hull;
    double dcorner[4];
    for (int i = 0; i < 4; ++i) {
        const double du = da[i] - di[i];
        dcorner[i] = di[i] / uni - inter * du / (uni * uni) + du / hull -
                     uni * dh[i] / (hull * hull);
    }
    out.d_cx = dcorner[0] + dcorner[2];
    out.d_cy = dcorner[1] + dcorner[3];
    out.d_w = 0.5 * (dcorner[2] - dcorner[0]);
    out.d_h = 0.5 * (dcorner[3] - dcorner[1]);
    return out;
}

} // namespace detail

inline GiouGrad giou_with_grad(const BBox& pred, const BBox& gt) {
    if (pred.w <= 0.0f || pred.h <= 0.0f || gt.w <= 0.0f || gt.h <= 0.0f)
        throw DomainError("giou_with_grad: degenerate box (non-positive extent)");
    return detail::giou_grad_impl(detail::DBox(pred), detail::DBox(gt));
}

// Cell of the S x S grid containing the box center.
inline std::pair<int, int> target_cell(const BBox& gt, int grid) {
    const int row = std::clamp(static_cast<int>(std::floor(gt.cy * grid)), 0, grid - 1);
    const int col = std::clamp(static_cast<int>(std::floor(gt.cx * grid)), 0, grid - 1);
    return {row, col};
}

namespace detail {
inline DBox box_at_cell_d(const ScoreMaps& maps, int row, int col) {
    const double s = maps.grid();
    return DBox{(col + double(maps.offset(0, row, col))) / s,
                (row + double(maps.offset(1, row, col))) / s,
                double(maps.size(0, row, col)), double(maps.size(1, row, col))};
}
} // namespace detail

// Box the maps decode at a given cell (training-time assignment).
inline BBox box_at_cell(const ScoreMaps& maps, int row, int col) {
    const detail::DBox d = detail::box_at_cell_d(maps, row, col);
    return BBox{static_cast<float>(d.cx), static_cast<float>(d.cy), static_cast<float>(d.w),
                static_cast<float>(d.h)};
}

namespace detail {
inline void check_gt_box(const BBox& gt) {
    if (gt.w <= 0.0f || gt.h <= 0.0f)
        throw DomainError("loss: ground-truth box has non-positive extent");
}

inline double l1_term(const DBox& pred, const DBox& gt) {
    return 0.25 * (std::abs(pred.cx - gt.cx) + std::abs(pred.cy - gt.cy) +
                   std::abs(pred.w - gt.w) + std::abs(pred.h - gt.h));
}
} // namespace detail

// Double-precision total; the finite-difference oracle differentiates
// this exact function.
inline double total_loss_value(const ScoreMaps& maps, const BBox& gt, const LossConfig& cfg) {
    detail::check_gt_box(gt);
    const int s = maps.grid();
    const auto [row, col] = target_cell(gt, s);
    const Tensor target = gaussian_target(row, col, s, resolve_sigma(cfg, s));
    const double focal = focal_loss(maps.center, target, cfg.focal_alpha, cfg.focal_beta);
    const detail::DBox pred = detail::box_at_cell_d(maps, row, col);
    const detail::DBox gt_d{gt};
    const double giou_loss = 1.0 - detail::giou_impl(pred, gt_d);
    const double l1 = detail::l1_term(pred, gt_d);
    return focal + double(cfg.lambda_giou) * giou_loss + double(cfg.lambda_l1) * l1;
}

inline LossBreakdown total_loss(const ScoreMaps& maps, const BBox& gt, const LossConfig& cfg) {
    detail::check_gt_box(gt);
    const int s = maps.grid();
    const auto [row, col] = target_cell(gt, s);
    const Tensor target = gaussian_target(row, col, s, resolve_sigma(cfg, s));
    LossBreakdown out;
    out.focal = static_cast<float>(focal_loss(maps.center, target, cfg.focal_alpha,
                                              cfg.focal_beta));
    const detail::DBox pred = detail::box_at_cell_d(maps, row, col);
    const detail::DBox gt_d{gt};
    out.giou = static_cast<float>(1.0 - detail::giou_impl(pred, gt_d));
    out.l1 = static_cast<float>(detail::l1_term(pred, gt_d));
    out.total = out.focal + cfg.lambda_giou * out.giou + cfg.lambda_l1 * out.l1;
    return out;
}

struct LossGrad {
    Tensor d_center; // [S x S]
    Tensor d_offset; // [2 x S x S], non-zero only at the assigned cell
    Tensor d_size;   // [2 x S x S], non-zero only at the assigned cell
};

// Analytic partials of total_loss_value w.r.t. every score-map entry.
inline LossGrad loss_grad(const ScoreMaps& maps, const BBox& gt, const LossConfig& cfg) {
    detail::check_gt_box(gt);
    const int s = maps.grid();
    const auto [row, col] = target_cell(gt, s);
    const Tensor target = gaussian_target(row, col, s, resolve_sigma(cfg, s));

    LossGrad grad;
    grad.d_center = Tensor({s, s});
    grad.d_offset = Tensor({2, s, s});
    grad.d_size = Tensor({2, s, s});

    // focal term
    std::int64_t npos = 0;
    for (std::int64_t i = 0; i < target.size(); ++i)
        if (target[i] == 1.0f) ++npos;
    const double inv_npos = 1.0 / double(std::max<std::int64_t>(npos, 1));
    const double alpha = cfg.focal_alpha, beta = cfg.focal_beta;
    for (std::int64_t i = 0; i < target.size(); ++i) {
        const double p = maps.center[i];
        if (p <= kProbClamp || p >= 1.0 - kProbClamp) continue; // flat under the clamp
        double d;
        if (target[i] == 1.0f) {
            d = alpha * std::pow(1.0 - p, alpha - 1.0) * std::log(p) -
                std::pow(1.0 - p, alpha) / p;
        } else {
            const double y = target[i];
            d = -std::pow(1.0 - y, beta) *
                (alpha * std::pow(p, alpha - 1.0) * std::log(1.0 - p) -
                 std::pow(p, alpha) / (1.0 - p));
        }
        grad.d_center[i] = static_cast<float>(d * inv_npos);
    }

    // box terms touch only the assigned cell
    const detail::DBox pred = detail::box_at_cell_d(maps, row, col);
    const detail::DBox gt_d{gt};
    const GiouGrad gg = detail::giou_grad_impl(pred, gt_d);
    auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    const double lg = cfg.lambda_giou, ll = cfg.lambda_l1;
    const double d_pcx = lg * (-gg.d_cx) + ll * 0.25 * sgn(pred.cx - gt_d.cx);
    const double d_pcy = lg * (-gg.d_cy) + ll * 0.25 * sgn(pred.cy - gt_d.cy);
    const double d_pw = lg * (-gg.d_w) + ll * 0.25 * sgn(pred.w - gt_d.w);
    const double d_ph = lg * (-gg.d_h) + ll * 0.25 * sgn(pred.h - gt_d.h);
    grad.d_offset(0, row, col) = static_cast<float>(d_pcx / double(s));
    grad.d_offset(1, row, col) = static_cast<float>(d_pcy / double(s));
    grad.d_size(0, row, col) = static_cast<float>(d_pw);
    grad.d_size(1, row, col) = static_cast<float>(d_ph);
    return grad;
}

} // namespace litetrack
