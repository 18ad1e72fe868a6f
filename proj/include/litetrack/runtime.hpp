#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "litetrack/config.hpp"
#include "litetrack/encoder.hpp"
#include "litetrack/errors.hpp"
#include "litetrack/head.hpp"
#include "litetrack/tensor.hpp"
#include "litetrack/weights.hpp"

namespace litetrack {

// Geometry of a square crop taken from a frame, enough to map normalized
// crop-space boxes back to absolute pixels.
struct CropSpec {
    double cx = 0.0;     // crop center, image px
    double cy = 0.0;
    double side = 0.0;   // square side, image px
    double scale = 0.0;  // model px per image px (out_size / side)
    bool padded = false; // crop reached outside the frame
};

// Square crop of side factor * sqrt(w*h) centered on the box, bilinearly
// resampled (half-pixel centers) to out_size x out_size. Out-of-frame
// samples read the per-channel frame mean.
inline std::pair<Tensor, CropSpec> make_crop(const Tensor& image, const BBox& box,
                                             double factor, int out_size) {
    if (image.rank() != 3 || image.extent(0) != 3)
        throw InputError("make_crop: expected a [3 x H x W] frame, got " +
                         shape_str(image.shape()));
    if (factor <= 0.0) throw InputError("make_crop: factor must be positive");
    if (box.w <= 0.0f || box.h <= 0.0f)
        throw InputError("make_crop: box has non-positive area");
    const std::int64_t h = image.extent(1), w = image.extent(2);

    double mean[3];
    for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        const float* p = image.data() + c * h * w;
        for (std::int64_t i = 0; i < h * w; ++i) s += p[i];
        mean[c] = s / double(h * w);
    }

    CropSpec spec;
    spec.cx = box.cx;
    spec.cy = box.cy;
    spec.side = factor * std::sqrt(double(box.w) * double(box.h));
    spec.scale = double(out_size) / spec.side;
    const double x0 = spec.cx - 0.5 * spec.side;
    const double y0 = spec.cy - 0.5 * spec.side;
    const double step = spec.side / double(out_size);

    auto sample = [&](int c, std::int64_t yy, std::int64_t xx) -> double {
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) {
            spec.padded = true;
            return mean[c];
        }
        return image(c, yy, xx);
    };

    Tensor crop({3, out_size, out_size});
    for (int oy = 0; oy < out_size; ++oy)
        for (int ox = 0; ox < out_size; ++ox) {
            const double fy = y0 + (oy + 0.5) * step - 0.5;
            const double fx = x0 + (ox + 0.5) * step - 0.5;
            const double fy0 = std::floor(fy), fx0 = std::floor(fx);
            const double wy = fy - fy0, wx = fx - fx0;
            const std::int64_t iy = static_cast<std::int64_t>(fy0);
            const std::int64_t ix = static_cast<std::int64_t>(fx0);
            for (int c = 0; c < 3; ++c) {
                const double v00 = sample(c, iy, ix), v01 = sample(c, iy, ix + 1);
                const double v10 = sample(c, iy + 1, ix), v11 = sample(c, iy + 1, ix + 1);
                crop(c, oy, ox) = static_cast<float>((1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                                                     wy * ((1.0 - wx) * v10 + wx * v11));
            }
        }
    return {std::move(crop), spec};
}

// Outer product of the length-S Hann sequence 0.5*(1 - cos(2*pi*i/(S-1)));
// S=1 degenerates to [[1]].
inline Tensor hanning2d(int grid) {
    if (grid < 1) throw InputError("hanning2d: size must be >= 1");
    std::vector<double> w(static_cast<std::size_t>(grid), 1.0);
    if (grid > 1)
        for (int i = 0; i < grid; ++i)
            w[static_cast<std::size_t>(i)] =
                0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * i / double(grid - 1)));
    Tensor map({grid, grid});
    for (int r = 0; r < grid; ++r)
        for (int c = 0; c < grid; ++c)
            map(r, c) = static_cast<float>(w[static_cast<std::size_t>(r)] *
                                           w[static_cast<std::size_t>(c)]);
    return map;
}

// The once-per-sequence template features plus a fingerprint of the
// config and weights they were computed under.
struct TemplateCache {
    Tensor features;
    std::uint64_t config_hash = 0;
};

inline std::uint64_t cache_key(const ModelConfig& cfg, const WeightStore& weights) {
    std::uint64_t h = cfg.hash();
    const std::uint64_t d = weights.digest();
    return fnv1a64(&d, sizeof(d), h);
}

// Per-sequence tracker state. Weights are borrowed and shared; each
// sequence owns its own state, so independent sequences can run on
// separate threads.
struct TrackState {
    ModelConfig config;
    const WeightStore* weights = nullptr;
    TemplateCache template_cache;
    Tensor template_crop; // kept so a reference tracker can re-extract
    BBox prev_box;        // absolute px
    std::int64_t frame_index = 0;
    int frame_h = 0;
    int frame_w = 0;
};

inline constexpr double kTemplateCropFactor = 2.0;
inline constexpr double kSearchCropFactor = 4.0;

// Clamps a box into the frame rectangle, keeping at least min_side of
// extent, so the result always intersects the frame.
inline BBox clip_to_frame(const BBox& box, int frame_w, int frame_h, float min_side = 1.0f) {
    float x1 = std::clamp(box.x1(), 0.0f, static_cast<float>(frame_w) - min_side);
    float y1 = std::clamp(box.y1(), 0.0f, static_cast<float>(frame_h) - min_side);
    float x2 = std::clamp(box.x2(), x1 + min_side, static_cast<float>(frame_w));
    float y2 = std::clamp(box.y2(), y1 + min_side, static_cast<float>(frame_h));
    return BBox::from_xyxy(x1, y1, x2, y2);
}

// Crops the template around the first-frame box, extracts its features
// once, and fingerprints them against the active config and weights.
inline TrackState init_track(const Tensor& first_frame, const BBox& gt_box,
                             const ModelConfig& cfg, const WeightStore& weights) {
    cfg.validate();
    if (cfg.template_h != cfg.template_w || cfg.search_h != cfg.search_w)
        throw ConfigError("init_track: tracking requires square template and search sizes");
    if (first_frame.rank() != 3 || first_frame.extent(0) != 3)
        throw InputError("init_track: expected a [3 x H x W] frame");
    if (gt_box.w <= 0.0f || gt_box.h <= 0.0f)
        throw InputError("init_track: degenerate ground-truth box");
    const int fh = static_cast<int>(first_frame.extent(1));
    const int fw = static_cast<int>(first_frame.extent(2));
    if (gt_box.cx < 0.0f || gt_box.cx > static_cast<float>(fw) || gt_box.cy < 0.0f ||
        gt_box.cy > static_cast<float>(fh))
        throw InputError("init_track: ground-truth box center outside the frame");

    TrackState state;
    state.config = cfg;
    state.weights = &weights;
    auto [crop, spec] = make_crop(first_frame, gt_box, kTemplateCropFactor, cfg.template_h);
    state.template_crop = crop;
    state.template_cache.features = extract_template(crop, cfg, weights);
    state.template_cache.config_hash = cache_key(cfg, weights);
    state.prev_box = gt_box;
    state.frame_index = 0;
    state.frame_h = fh;
    state.frame_w = fw;
    return state;
}

struct TrackResult {
    BBox box; // absolute px, clipped to the frame
    float score;
};

// One tracking step: crop the search region around the previous box, run
// the encoder against the cached template, decode under the Hann penalty
// and map the box back to frame pixels. The template cache is read-only.
inline TrackResult track_frame(TrackState& state, const Tensor& frame,
                               MacCounter* counter = nullptr) {
    if (!state.weights) throw InputError("track_frame: uninitialized state");
    if (frame.rank() != 3 || frame.extent(0) != 3 ||
        frame.extent(1) != state.frame_h || frame.extent(2) != state.frame_w)
        throw InputError("track_frame: frame " + shape_str(frame.shape()) +
                         " does not match init size 3x" + std::to_string(state.frame_h) + "x" +
                         std::to_string(state.frame_w));
    if (state.template_cache.config_hash != cache_key(state.config, *state.weights))
        throw ConfigError("track_frame: template cache does not match the active config/weights");

    auto [crop, spec] = make_crop(frame, state.prev_box, kSearchCropFactor,
                                  state.config.search_h);
    Tensor tokens = forward_search(crop, state.template_cache.features, state.config,
                                   *state.weights, counter);
    ScoreMaps maps = head_forward(tokens, state.config, *state.weights, counter);
    Tensor penalty = hanning2d(maps.grid());
    Detection det = decode_box(maps, &penalty);

    const double x0 = spec.cx - 0.5 * spec.side;
    const double y0 = spec.cy - 0.5 * spec.side;
    BBox abs_box;
    abs_box.cx = static_cast<float>(x0 + double(det.box.cx) * spec.side);
    abs_box.cy = static_cast<float>(y0 + double(det.box.cy) * spec.side);
    abs_box.w = static_cast<float>(double(det.box.w) * spec.side);
    abs_box.h = static_cast<float>(double(det.box.h) * spec.side);
    abs_box = clip_to_frame(abs_box, state.frame_w, state.frame_h);

    state.prev_box = abs_box;
    ++state.frame_index;
    return TrackResult{abs_box, det.score};
}

// ---- sequence files ----
//
// A sequence is a directory of image frames (sorted by filename) plus a
// one-line ground-truth file "x,y,w,h" in pixels for the first frame.
// Results go out one line per frame: "frame_index,x,y,w,h,score".

inline std::vector<std::string> list_sequence_frames(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw InputError("sequence: '" + dir + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".PPM") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("sequence: no .ppm frames in '" + dir + "'");
    return files;
}

inline BBox read_gt_box(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("sequence: cannot open ground truth '" + path + "'");
    std::string line;
    std::getline(f, line);
    float x, y, w, h;
    char c1, c2, c3;
    std::istringstream is(line);
    if (!(is >> x >> c1 >> y >> c2 >> w >> c3 >> h) || c1 != ',' || c2 != ',' || c3 != ',')
        throw InputError("sequence: ground truth '" + path + "' is not 'x,y,w,h'");
    if (w <= 0.0f || h <= 0.0f)
        throw InputError("sequence: ground-truth box has non-positive size");
    return BBox::from_xywh(x, y, w, h);
}

inline void append_result_line(std::ostream& os, std::int64_t frame_index, const BBox& box,
                               float score) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%lld,%.4f,%.4f,%.4f,%.4f,%.6f\n",
                  static_cast<long long>(frame_index), double(box.x1()), double(box.y1()),
                  double(box.w), double(box.h), double(score));
    os << buf;
}

} // namespace litetrack
