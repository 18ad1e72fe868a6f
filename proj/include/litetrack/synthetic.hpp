#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "litetrack/head.hpp"
#include "litetrack/rng.hpp"
#include "litetrack/tensor.hpp"

namespace litetrack {

// Deterministic synthetic frame: a smooth shaded background with hashed
// speckle plus a bright bordered square at the target box. Used by the
// benchmark harness and by sequence-level tests; content only has to be
// deterministic and non-degenerate, not realistic.
inline Tensor synthetic_frame(int width, int height, const BBox& target, std::uint64_t seed) {
    Tensor img({3, height, width});
    const double phase = double(seed % 977) * 0.13;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double g = 0.35 + 0.15 * std::sin(0.05 * x + phase) +
                             0.15 * std::cos(0.04 * y - phase);
            const std::uint64_t h = SplitMix64(seed ^ (std::uint64_t(y) << 20) ^
                                               std::uint64_t(x)).next_u64();
            const double speckle = double(h & 0xff) / 255.0 * 0.08;
            img(0, y, x) = static_cast<float>(g + speckle);
            img(1, y, x) = static_cast<float>(g * 0.9 + speckle);
            img(2, y, x) = static_cast<float>(g * 0.8 + speckle);
        }
    const int x1 = std::max(0, static_cast<int>(std::lround(target.x1())));
    const int y1 = std::max(0, static_cast<int>(std::lround(target.y1())));
    const int x2 = std::min(width, static_cast<int>(std::lround(target.x2())));
    const int y2 = std::min(height, static_cast<int>(std::lround(target.y2())));
    for (int y = y1; y < y2; ++y)
        for (int x = x1; x < x2; ++x) {
            const bool border = y - y1 < 2 || y2 - y <= 2 || x - x1 < 2 || x2 - x <= 2;
            img(0, y, x) = border ? 0.05f : 0.95f;
            img(1, y, x) = border ? 0.05f : 0.85f;
            img(2, y, x) = border ? 0.05f : 0.20f;
        }
    return img;
}

struct SyntheticSequence {
    std::vector<Tensor> frames;
    std::vector<BBox> boxes; // ground-truth target per frame, absolute px
};

// n_frames frames with the target drifting on a slow sine path (or held
// static), fully determined by the seed.
inline SyntheticSequence synthetic_sequence(int width, int height, int n_frames,
                                            std::uint64_t seed, bool moving = true) {
    SyntheticSequence seq;
    const float side = static_cast<float>(std::min(width, height)) / 8.0f;
    const float cx0 = width / 2.0f, cy0 = height / 2.0f;
    const float swing = moving ? static_cast<float>(std::min(width, height)) / 8.0f : 0.0f;
    for (int i = 0; i < n_frames; ++i) {
        BBox box{cx0 + swing * std::sin(0.35f * i), cy0 + swing * std::cos(0.25f * i),
                 side, side};
        seq.frames.push_back(synthetic_frame(width, height, box, seed + std::uint64_t(i)));
        seq.boxes.push_back(box);
    }
    return seq;
}

} // namespace litetrack
