#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "litetrack/config.hpp"
#include "litetrack/errors.hpp"
#include "litetrack/runtime.hpp"
#include "litetrack/synthetic.hpp"
#include "litetrack/weights.hpp"

namespace litetrack {

// Reference figures for the full-size variants, used for report-only
// comparison output (their per-layer deltas are not self-consistent, so
// they are printed, never asserted).
inline constexpr std::array<double, 4> kReferenceMacsG = {6.78, 10.09, 12.77, 14.17};   // B4,B6,B8,B9
inline constexpr std::array<double, 4> kReferenceParamsM = {26.18, 38.97, 49.60, 54.92}; // B4,B6,B8,B9

inline int reference_index(Variant v) {
    switch (v) {
        case Variant::B4: return 0;
        case Variant::B6: return 1;
        case Variant::B8: return 2;
        case Variant::B9: return 3;
        default: return -1;
    }
}

struct StageCost {
    std::string name;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
};

struct LayerCost {
    int index = 0;
    bool asym = false;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
};

// Exact integer parameter and MAC counts, broken down per search-path
// layer and per stage. MACs count matrix-product multiply-accumulates
// only (no softmax, normalization or elementwise work), which is exactly
// what the instrumented MacCounter sees.
struct CostReport {
    std::string variant;
    ModelConfig config;
    bool include_template_pass = false;
    std::vector<LayerCost> layers; // search path: fe then ai
    std::vector<StageCost> stages; // patch-embed, fe, ai, head, final-norm (+ template pass)
    std::uint64_t total_params = 0;
    std::uint64_t total_macs = 0;
};

namespace costs {

using u64 = std::uint64_t;

inline u64 layer_params(const ModelConfig& cfg) {
    const u64 c = static_cast<u64>(cfg.embed_dim);
    const u64 hidden = static_cast<u64>(cfg.mlp_hidden());
    u64 p = 0;
    p += 2 * c;                  // norm1
    p += 4 * (c * c + c);        // q, k, v, proj
    p += 2 * c;                  // norm2
    p += c * hidden + hidden;    // fc1
    p += hidden * c + c;         // fc2
    return p;
}

inline u64 patch_embed_params(const ModelConfig& cfg) {
    const u64 c = static_cast<u64>(cfg.embed_dim);
    const u64 patch_in = 3ull * cfg.patch_size * cfg.patch_size;
    return patch_in * c + c + // projection
           static_cast<u64>(cfg.template_tokens()) * c +
           static_cast<u64>(cfg.search_tokens()) * c; // positional tables
}

inline u64 head_params(const ModelConfig& cfg) {
    const u64 c = static_cast<u64>(cfg.embed_dim);
    const u64 widths[4] = {c, c / 2, c / 4, c / 8};
    u64 total = 0;
    for (u64 out_ch : {1ull, 2ull, 2ull}) {
        for (int k = 0; k < 4; ++k) {
            const u64 in = widths[k];
            const u64 out = (k == 3) ? out_ch : widths[k + 1];
            total += out * in * 9 + out; // conv weight + bias
            if (k < 3) total += 2 * out; // channel norm affine
        }
    }
    return total;
}

// self-attention layer on n tokens:
//   qkv 3nC^2 + scores/mix 2n^2C + proj nC^2 + mlp 2nC*hidden
inline u64 self_layer_macs(const ModelConfig& cfg, u64 n) {
    const u64 c = static_cast<u64>(cfg.embed_dim);
    const u64 hidden = static_cast<u64>(cfg.mlp_hidden());
    return 3 * n * c * c + 2 * n * n * c + n * c * c + 2 * n * c * hidden;
}

// interaction layer: queries on n_x only, keys/values on n_x + n_z
inline u64 asym_layer_macs(const ModelConfig& cfg, u64 n_x, u64 n_z) {
    const u64 c = static_cast<u64>(cfg.embed_dim);
    const u64 hidden = static_cast<u64>(cfg.mlp_hidden());
    const u64 m = n_x + n_z;
    return n_x * c * c + 2 * m * c * c + 2 * n_x * m * c + n_x * c * c +
           2 * n_x * c * hidden;
}

inline u64 patch_embed_macs(const ModelConfig& cfg, u64 n_tokens) {
    const u64 c = static_cast<u64>(cfg.embed_dim);
    return n_tokens * 3ull * cfg.patch_size * cfg.patch_size * c;
}

// each conv costs 9 * in * out MACs per spatial position
inline u64 head_macs(const ModelConfig& cfg) {
    const u64 c = static_cast<u64>(cfg.embed_dim);
    const u64 positions = static_cast<u64>(cfg.search_tokens());
    const u64 widths[4] = {c, c / 2, c / 4, c / 8};
    u64 total = 0;
    for (u64 out_ch : {1ull, 2ull, 2ull}) {
        for (int k = 0; k < 4; ++k) {
            const u64 in = widths[k];
            const u64 out = (k == 3) ? out_ch : widths[k + 1];
            total += positions * 9 * in * out;
        }
    }
    return total;
}

inline u64 template_pass_macs(const ModelConfig& cfg) {
    const u64 n_z = static_cast<u64>(cfg.template_tokens());
    return patch_embed_macs(cfg, n_z) +
           static_cast<u64>(cfg.total_layers()) * self_layer_macs(cfg, n_z);
}

} // namespace costs

namespace detail {
inline CostReport build_cost_report(const ModelConfig& cfg, bool include_template_pass,
                                    const std::string& label) {
    cfg.validate();
    CostReport r;
    r.variant = label;
    r.config = cfg;
    r.include_template_pass = include_template_pass;
    const auto n_x = static_cast<std::uint64_t>(cfg.search_tokens());
    const auto n_z = static_cast<std::uint64_t>(cfg.template_tokens());

    StageCost patch{"patch-embed", costs::patch_embed_params(cfg),
                    costs::patch_embed_macs(cfg, n_x)};
    StageCost fe{"fe", 0, 0}, ai{"ai", 0, 0};
    for (int i = 0; i < cfg.fe_layers; ++i) {
        LayerCost lc{i, false, costs::layer_params(cfg), costs::self_layer_macs(cfg, n_x)};
        fe.params += lc.params;
        fe.macs += lc.macs;
        r.layers.push_back(lc);
    }
    for (int i = cfg.fe_layers; i < cfg.total_layers(); ++i) {
        LayerCost lc{i, true, costs::layer_params(cfg), costs::asym_layer_macs(cfg, n_x, n_z)};
        ai.params += lc.params;
        ai.macs += lc.macs;
        r.layers.push_back(lc);
    }
    StageCost final_norm{"final-norm", 2ull * cfg.embed_dim, 0};
    StageCost head{"head", costs::head_params(cfg), costs::head_macs(cfg)};
    r.stages = {patch, fe, ai, final_norm, head};
    if (include_template_pass)
        r.stages.push_back(StageCost{"template-pass", 0, costs::template_pass_macs(cfg)});
    for (const auto& s : r.stages) {
        r.total_params += s.params;
        r.total_macs += s.macs;
    }
    return r;
}
} // namespace detail

// Exact parameter enumeration; equals the element count of a WeightStore
// generated from the same config.
inline CostReport count_params(const ModelConfig& cfg, const std::string& label = "custom") {
    return detail::build_cost_report(cfg, false, label);
}

// Exact per-frame MAC count; equals the instrumented MacCounter total of
// one forward_search + head_forward pass (plus one extract_template pass
// when include_template_pass is set).
inline CostReport count_macs(const ModelConfig& cfg, bool include_template_pass,
                             const std::string& label = "custom") {
    return detail::build_cost_report(cfg, include_template_pass, label);
}

// ---- pruning sweep ----

// The layer-budget ablation grid: (total, fe, ai) rows covering budgets
// of 8, 6 and 4 layers.
inline constexpr std::array<std::tuple<int, int, int>, 7> kSweepGrid = {{
    {8, 6, 2}, {8, 5, 3}, {8, 0, 8}, {6, 4, 2}, {6, 3, 3}, {4, 3, 1}, {4, 2, 2}}};

struct SweepRow {
    int total_layers = 0;
    int fe = 0;
    int ai = 0;
    std::uint64_t macs = 0;
    double median_ms = 0.0; // 0 when latency was not measured
    double p90_ms = 0.0;
    double metric = 0.0;
    bool failed = false;
    std::string error;
};

struct BenchResult {
    std::string variant;
    double median_ms = 0.0;
    double p90_ms = 0.0;
    int runs = 0;
    int warmup = 0;
    int threads = 1;
};

namespace detail {
inline double percentile(std::vector<double> samples, double q) {
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<std::int64_t>(samples.size());
    // nearest-rank
    std::int64_t idx = static_cast<std::int64_t>(std::ceil(q * double(n))) - 1;
    idx = std::clamp<std::int64_t>(idx, 0, n - 1);
    return samples[static_cast<std::size_t>(idx)];
}

inline BenchResult bench_on_frames(const ModelConfig& cfg, const WeightStore& weights,
                                   const SyntheticSequence& seq, int runs, int warmup,
                                   const std::string& label,
                                   const std::function<void(int, bool, double)>& probe) {
    TrackState state = init_track(seq.frames[0], seq.boxes[0], cfg, weights);
    std::vector<double> measured;
    measured.reserve(static_cast<std::size_t>(runs));
    for (int i = 0; i < warmup + runs; ++i) {
        const Tensor& frame = seq.frames[1 + static_cast<std::size_t>(i) %
                                          (seq.frames.size() - 1)];
        const auto t0 = std::chrono::steady_clock::now();
        track_frame(state, frame);
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        const bool is_warmup = i < warmup;
        if (!is_warmup) measured.push_back(ms);
        if (probe) probe(i, is_warmup, ms);
    }
    BenchResult r;
    r.variant = label;
    r.median_ms = percentile(measured, 0.5);
    r.p90_ms = percentile(measured, 0.9);
    r.runs = runs;
    r.warmup = warmup;
    r.threads = 1;
    return r;
}
} // namespace detail

// Median/p90 wall-clock per tracked frame over `runs` measured runs after
// `warmup` excluded ones, on a deterministic synthetic sequence. Single
// worker thread; the probe (when set) sees every run including warmup.
inline BenchResult bench_latency(const ModelConfig& cfg, const WeightStore& weights, int frames,
                                 int runs, int warmup, std::uint64_t seed,
                                 const std::string& label = "custom",
                                 const std::function<void(int, bool, double)>& probe = nullptr) {
    if (runs < 30) throw InputError("bench_latency: need at least 30 measured runs");
    if (frames < 2) frames = 2;
    if (warmup < 0) warmup = 0;
    const int frame_side = std::max(cfg.search_h, cfg.search_w) * 5 / 4;
    SyntheticSequence seq = synthetic_sequence(frame_side, frame_side, frames, seed);
    return detail::bench_on_frames(cfg, weights, seq, runs, warmup, label, probe);
}

// Evaluates the layer-budget grid against a base weight store (top-down
// pruning: each row reuses the first `total` encoder layers). The
// callback supplies the row metric; a throwing callback marks the row
// failed and the sweep continues. latency_runs = 0 skips timing.
inline std::vector<SweepRow> pruning_sweep(
    const ModelConfig& base, const WeightStore& weights,
    const std::function<double(const ModelConfig&, const WeightStore&)>& eval_metric,
    int latency_runs = 0, int latency_warmup = 1, std::uint64_t seed = 1) {
    base.validate();
    int max_total = 0;
    for (const auto& [total, fe, ai] : kSweepGrid) max_total = std::max(max_total, total);
    if (base.total_layers() < max_total)
        throw ConfigError("pruning_sweep: base config has " +
                          std::to_string(base.total_layers()) + " layers, grid needs " +
                          std::to_string(max_total));
    std::vector<SweepRow> rows;
    for (const auto& [total, fe, ai] : kSweepGrid) {
        SweepRow row;
        row.total_layers = total;
        row.fe = fe;
        row.ai = ai;
        ModelConfig cfg = base;
        cfg.fe_layers = fe;
        cfg.ai_layers = ai;
        row.macs = count_macs(cfg, false).total_macs;
        try {
            WeightStore sub = weights.subset_for(cfg);
            if (eval_metric) row.metric = eval_metric(cfg, sub);
            if (latency_runs > 0) {
                const int frame_side = std::max(cfg.search_h, cfg.search_w) * 5 / 4;
                SyntheticSequence seq = synthetic_sequence(frame_side, frame_side, 4, seed);
                BenchResult b = detail::bench_on_frames(
                    cfg, sub, seq, latency_runs, latency_warmup, "sweep", nullptr);
                row.median_ms = b.median_ms;
                row.p90_ms = b.p90_ms;
            }
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---- table output ----

inline std::string csv_header() {
    return "variant,total_layers,fe,ai,params,macs,median_ms,p90_ms";
}

inline void append_csv_row(std::ostream& os, const std::string& variant, int total, int fe,
                           int ai, std::uint64_t params, std::uint64_t macs, double median_ms,
                           double p90_ms) {
    os << variant << ',' << total << ',' << fe << ',' << ai << ',' << params << ',' << macs
       << ',';
    char buf[64];
    if (median_ms > 0.0) {
        std::snprintf(buf, sizeof(buf), "%.3f,%.3f", median_ms, p90_ms);
        os << buf;
    } else {
        os << ',';
    }
    os << '\n';
}

inline void print_cost_table(std::ostream& os, const CostReport& r) {
    os << "variant " << r.variant << ": fe=" << r.config.fe_layers
       << " ai=" << r.config.ai_layers << " embed_dim=" << r.config.embed_dim
       << " heads=" << r.config.num_heads << " tokens " << r.config.search_tokens() << "+"
       << r.config.template_tokens() << (r.include_template_pass ? " (template pass counted)" : "")
       << "\n";
    os << "  " << std::left << std::setw(16) << "stage" << std::right << std::setw(14)
       << "params" << std::setw(16) << "macs" << "\n";
    for (const auto& s : r.stages)
        os << "  " << std::left << std::setw(16) << s.name << std::right << std::setw(14)
           << s.params << std::setw(16) << s.macs << "\n";
    os << "  " << std::left << std::setw(16) << "total" << std::right << std::setw(14)
       << r.total_params << std::setw(16) << r.total_macs << "\n";
    os << "  per layer (search path):\n";
    for (const auto& l : r.layers)
        os << "    layer " << std::setw(2) << l.index << (l.asym ? " [ai]" : " [fe]")
           << "  params " << std::setw(12) << l.params << "  macs " << std::setw(14) << l.macs
           << "\n";
}

// Prints analytic totals next to the published full-size reference
// figures with their relative differences. Report only: the reference
// table's own deltas are inconsistent, so nothing here asserts.
inline void print_reference_comparison(std::ostream& os, Variant v, const CostReport& r) {
    const int idx = reference_index(v);
    if (idx < 0) return;
    const double macs_g = double(r.total_macs) / 1e9;
    const double params_m = double(r.total_params) / 1e6;
    const double ref_g = kReferenceMacsG[static_cast<std::size_t>(idx)];
    const double ref_m = kReferenceParamsM[static_cast<std::size_t>(idx)];
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "  reference %s: MACs %.2fG vs published %.2fG (%+.1f%%), "
                  "params %.2fM vs published %.2fM (%+.1f%%)\n",
                  variant_name(v), macs_g, ref_g, 100.0 * (macs_g - ref_g) / ref_g, params_m,
                  ref_m, 100.0 * (params_m - ref_m) / ref_m);
    os << buf;
}

} // namespace litetrack
