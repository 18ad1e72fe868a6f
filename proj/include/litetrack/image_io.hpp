#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "litetrack/errors.hpp"
#include "litetrack/tensor.hpp"

namespace litetrack {

namespace detail {
inline int pnm_next_int(std::istream& is, const std::string& path) {
    // skips whitespace and '#' comment lines between header fields
    int c = is.peek();
    while (c == '#' || std::isspace(c)) {
        if (c == '#') is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
        else is.get();
        c = is.peek();
    }
    int value = 0;
    if (!(is >> value)) throw InputError("image: malformed header in '" + path + "'");
    return value;
}
} // namespace detail

// Reads a binary P6 portable pixmap into a [3 x H x W] tensor scaled to
// [0, 1].
inline Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("image: cannot open '" + path + "'");
    std::string magic;
    f >> magic;
    if (magic != "P6") throw InputError("image: '" + path + "' is not a binary PPM (P6)");
    const int w = detail::pnm_next_int(f, path);
    const int h = detail::pnm_next_int(f, path);
    const int maxval = detail::pnm_next_int(f, path);
    if (w < 1 || h < 1 || maxval != 255)
        throw InputError("image: unsupported PPM header in '" + path + "'");
    f.get(); // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw InputError("image: truncated pixel data in '" + path + "'");
    Tensor img({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img(c, y, x) = raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
    return img;
}

// Writes a [3 x H x W] tensor (values clamped to [0, 1]) as binary P6.
inline void write_ppm(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.extent(0) != 3)
        throw DimensionError("write_ppm: expected [3 x H x W], got " + shape_str(img.shape()));
    const std::int64_t h = img.extent(1), w = img.extent(2);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("image: cannot write '" + path + "'");
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            for (std::int64_t c = 0; c < 3; ++c) {
                const float v = std::clamp(img(c, y, x), 0.0f, 1.0f);
                raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw InputError("image: write failed for '" + path + "'");
}

// Writes a matrix as a binary P5 graymap, min-max scaled so the maximum
// maps to 255 (a constant map writes as zeros).
inline void write_pgm(const std::string& path, const Tensor& map) {
    if (map.rank() != 2)
        throw DimensionError("write_pgm: expected a matrix, got " + shape_str(map.shape()));
    const std::int64_t h = map.extent(0), w = map.extent(1);
    float lo = map[0], hi = map[0];
    for (std::int64_t i = 1; i < map.size(); ++i) {
        lo = std::min(lo, map[i]);
        hi = std::max(hi, map[i]);
    }
    const float span = hi - lo;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("image: cannot write '" + path + "'");
    f << "P5\n" << w << " " << h << "\n255\n";
    for (std::int64_t i = 0; i < map.size(); ++i) {
        const float v = span > 0.0f ? (map[i] - lo) / span : 0.0f;
        f.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
    }
    if (!f) throw InputError("image: write failed for '" + path + "'");
}

// Raw float values, one CSV row per matrix row.
inline void write_csv_matrix(const std::string& path, const Tensor& map) {
    if (map.rank() != 2)
        throw DimensionError("write_csv_matrix: expected a matrix, got " + shape_str(map.shape()));
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw InputError("cannot write '" + path + "'");
    f.precision(9);
    for (std::int64_t r = 0; r < map.extent(0); ++r) {
        for (std::int64_t c = 0; c < map.extent(1); ++c) {
            if (c) f << ',';
            f << map(r, c);
        }
        f << '\n';
    }
}

} // namespace litetrack
