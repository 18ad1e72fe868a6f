#pragma once

#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "litetrack/config.hpp"
#include "litetrack/cost.hpp"
#include "litetrack/encoder.hpp"
#include "litetrack/errors.hpp"
#include "litetrack/image_io.hpp"
#include "litetrack/runtime.hpp"
#include "litetrack/verify.hpp"
#include "litetrack/weights.hpp"

namespace litetrack {

namespace cli_detail {

struct ModelArgs {
    std::string variant;
    std::string config_path;
    std::string weights_path;
    std::uint64_t seed = 1;
};

inline void add_model_options(CLI::App* cmd, ModelArgs& args, bool with_weights = true) {
    cmd->add_option("--variant", args.variant, "model variant: B4, B6, B8, B9 or custom");
    cmd->add_option("--config", args.config_path, "config file (key=value) for --variant custom");
    if (with_weights)
        cmd->add_option("--weights", args.weights_path, "weight file; omitted: seeded random");
    cmd->add_option("--seed", args.seed, "seed for every random choice");
}

inline ModelConfig resolve_config(const ModelArgs& args) {
    if (!args.variant.empty() && args.variant != "custom") {
        if (!args.config_path.empty())
            throw InputError("--config is only valid with --variant custom");
        return variant_config(variant_from_name(args.variant));
    }
    if (!args.config_path.empty()) return load_config_file(args.config_path);
    if (args.variant == "custom")
        throw InputError("custom variant requires a config file (--config)");
    throw InputError("need --variant (B4/B6/B8/B9) or --config");
}

inline std::string resolve_label(const ModelArgs& args) {
    return args.variant.empty() ? std::string("custom") : args.variant;
}

inline WeightStore resolve_weights(const ModelArgs& args, const ModelConfig& cfg) {
    if (args.weights_path.empty()) return WeightStore::random(cfg, args.seed);
    WeightStore store = WeightStore::load(args.weights_path);
    if (!(store.config() == cfg))
        throw InputError("weight file '" + args.weights_path +
                         "' was generated for a different config");
    return store;
}

inline std::vector<Tensor> load_frames(const std::string& dir) {
    std::vector<Tensor> frames;
    for (const std::string& path : list_sequence_frames(dir)) frames.push_back(read_ppm(path));
    return frames;
}

} // namespace cli_detail

// Dispatches one parsed command line. Returns 0 on success, 1 for input
// errors (including unknown flags) and 2 for internal invariant failures.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using cli_detail::ModelArgs;

    CLI::App app{"litetrack: pruned-ViT tracker with cached template features"};
    app.require_subcommand(1);

    // track
    auto* track = app.add_subcommand("track", "track a sequence directory");
    ModelArgs track_args;
    cli_detail::add_model_options(track, track_args);
    std::string track_seq, track_gt, track_out;
    track->add_option("--seq", track_seq, "directory of .ppm frames")->required();
    track->add_option("--gt", track_gt, "first-frame box file 'x,y,w,h' (default <seq>/groundtruth.txt)");
    track->add_option("--out", track_out, "results file, one 'frame,x,y,w,h,score' line per frame")
        ->required();

    // bench
    auto* bench = app.add_subcommand("bench", "per-frame latency on synthetic frames");
    ModelArgs bench_args;
    cli_detail::add_model_options(bench, bench_args);
    int bench_runs = 30, bench_warmup = 2, bench_frames = 4;
    std::string bench_out;
    bench->add_option("--runs", bench_runs, "measured runs (>= 30)");
    bench->add_option("--warmup", bench_warmup, "warmup runs excluded from statistics");
    bench->add_option("--frames", bench_frames, "synthetic frames to cycle through");
    bench->add_option("--out", bench_out, "append a CSV row to this file");

    // count
    auto* count = app.add_subcommand("count", "analytic parameter and MAC table");
    ModelArgs count_args;
    cli_detail::add_model_options(count, count_args, /*with_weights=*/false);
    bool count_template_macs = false;
    std::string count_out;
    count->add_flag("--include-template-macs", count_template_macs,
                    "also count the one-time template pass");
    count->add_option("--out", count_out, "write a CSV row to this file");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "layer-budget pruning sweep");
    ModelArgs sweep_args;
    cli_detail::add_model_options(sweep, sweep_args);
    int sweep_runs = 0, sweep_warmup = 1;
    std::string sweep_out;
    sweep->add_option("--runs", sweep_runs, "latency runs per row (0 = skip timing)");
    sweep->add_option("--warmup", sweep_warmup, "warmup runs per row");
    sweep->add_option("--out", sweep_out, "write the sweep as CSV to this file");

    // verify
    auto* verify = app.add_subcommand("verify", "run the invariant suite");
    bool verify_toy = false;
    std::uint64_t verify_seed = 1;
    verify->add_flag("--toy", verify_toy, "desk-scale dims (the supported mode)");
    verify->add_option("--seed", verify_seed, "seed for every random choice");

    // attn-dump
    auto* attn = app.add_subcommand("attn-dump",
                                    "dump an interaction layer's template-attention map");
    ModelArgs attn_args;
    cli_detail::add_model_options(attn, attn_args);
    std::string attn_seq, attn_gt, attn_out;
    int attn_frame = 1, attn_layer = -1;
    attn->add_option("--seq", attn_seq, "directory of .ppm frames")->required();
    attn->add_option("--gt", attn_gt, "first-frame box file (default <seq>/groundtruth.txt)");
    attn->add_option("--frames", attn_frame, "frame index to probe (default 1)");
    attn->add_option("--layer", attn_layer, "global encoder layer index (interaction stage)")
        ->required();
    attn->add_option("--out", attn_out, "output base path; writes <out>.pgm and <out>.csv")
        ->required();

    // gen-weights
    auto* gen = app.add_subcommand("gen-weights", "write a seeded random weight file");
    ModelArgs gen_args;
    cli_detail::add_model_options(gen, gen_args, /*with_weights=*/false);
    std::string gen_out;
    gen->add_option("--out", gen_out, "weight file path")->required();

    try {
        std::vector<const char*> argv;
        argv.push_back("litetrack");
        for (const std::string& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (track->parsed()) {
            const ModelConfig cfg = cli_detail::resolve_config(track_args);
            const WeightStore weights = cli_detail::resolve_weights(track_args, cfg);
            std::vector<Tensor> frames = cli_detail::load_frames(track_seq);
            const std::string gt_path =
                track_gt.empty() ? track_seq + "/groundtruth.txt" : track_gt;
            const BBox gt = read_gt_box(gt_path);
            std::ofstream ofs(track_out, std::ios::trunc);
            if (!ofs) throw InputError("cannot write '" + track_out + "'");
            TrackState state = init_track(frames[0], gt, cfg, weights);
            append_result_line(ofs, 0, gt, 1.0f);
            for (std::size_t i = 1; i < frames.size(); ++i) {
                TrackResult r = track_frame(state, frames[i]);
                append_result_line(ofs, static_cast<std::int64_t>(i), r.box, r.score);
            }
            out << "tracked " << frames.size() << " frames -> " << track_out << "\n";
            return 0;
        }

        if (bench->parsed()) {
            const ModelConfig cfg = cli_detail::resolve_config(bench_args);
            const WeightStore weights = cli_detail::resolve_weights(bench_args, cfg);
            const std::string label = cli_detail::resolve_label(bench_args);
            BenchResult r = bench_latency(cfg, weights, bench_frames, bench_runs, bench_warmup,
                                          bench_args.seed, label);
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "%s: median %.3f ms/frame, p90 %.3f ms (%d runs, %d warmup, "
                          "%d thread)\n",
                          r.variant.c_str(), r.median_ms, r.p90_ms, r.runs, r.warmup, r.threads);
            out << buf;
            if (!bench_out.empty()) {
                const bool fresh = !std::ifstream(bench_out).good();
                std::ofstream csv(bench_out, std::ios::app);
                if (!csv) throw InputError("cannot write '" + bench_out + "'");
                if (fresh) csv << csv_header() << "\n";
                const CostReport cost = count_macs(cfg, false, label);
                append_csv_row(csv, label, cfg.total_layers(), cfg.fe_layers, cfg.ai_layers,
                               cost.total_params, cost.total_macs, r.median_ms, r.p90_ms);
            }
            return 0;
        }

        if (count->parsed()) {
            const ModelConfig cfg = cli_detail::resolve_config(count_args);
            const std::string label = cli_detail::resolve_label(count_args);
            const CostReport r = count_macs(cfg, count_template_macs, label);
            print_cost_table(out, r);
            if (!count_args.variant.empty() && count_args.variant != "custom")
                print_reference_comparison(out, variant_from_name(count_args.variant), r);
            if (!count_out.empty()) {
                std::ofstream csv(count_out, std::ios::trunc);
                if (!csv) throw InputError("cannot write '" + count_out + "'");
                csv << csv_header() << "\n";
                append_csv_row(csv, label, cfg.total_layers(), cfg.fe_layers, cfg.ai_layers,
                               r.total_params, r.total_macs, 0.0, 0.0);
            }
            return 0;
        }

        if (sweep->parsed()) {
            if (sweep_args.variant.empty() && sweep_args.config_path.empty())
                sweep_args.variant = "B9"; // deepest preset covers the grid
            const ModelConfig base = cli_detail::resolve_config(sweep_args);
            const WeightStore weights = cli_detail::resolve_weights(sweep_args, base);
            auto macs_metric = [](const ModelConfig& cfg, const WeightStore&) {
                return double(count_macs(cfg, false).total_macs);
            };
            auto rows = pruning_sweep(base, weights, macs_metric, sweep_runs, sweep_warmup,
                                      sweep_args.seed);
            out << "total  fe  ai            macs    median_ms       p90_ms         metric\n";
            for (const auto& row : rows) {
                char buf[200];
                if (row.failed) {
                    std::snprintf(buf, sizeof(buf), "%5d %3d %3d  FAILED: %s\n",
                                  row.total_layers, row.fe, row.ai, row.error.c_str());
                } else if (row.median_ms > 0.0) {
                    std::snprintf(buf, sizeof(buf), "%5d %3d %3d %15llu %12.3f %12.3f %14.0f\n",
                                  row.total_layers, row.fe, row.ai,
                                  static_cast<unsigned long long>(row.macs), row.median_ms,
                                  row.p90_ms, row.metric);
                } else {
                    std::snprintf(buf, sizeof(buf), "%5d %3d %3d %15llu %12s %12s %14.0f\n",
                                  row.total_layers, row.fe, row.ai,
                                  static_cast<unsigned long long>(row.macs), "-", "-",
                                  row.metric);
                }
                out << buf;
            }
            if (!sweep_out.empty()) {
                std::ofstream csv(sweep_out, std::ios::trunc);
                if (!csv) throw InputError("cannot write '" + sweep_out + "'");
                csv << csv_header() << "\n";
                for (const auto& row : rows) {
                    if (row.failed) continue;
                    ModelConfig cfg = base;
                    cfg.fe_layers = row.fe;
                    cfg.ai_layers = row.ai;
                    const std::string label = "L" + std::to_string(row.total_layers) + "-FE" +
                                              std::to_string(row.fe) + "-AI" +
                                              std::to_string(row.ai);
                    append_csv_row(csv, label, row.total_layers, row.fe, row.ai,
                                   count_params(cfg).total_params, row.macs, row.median_ms,
                                   row.p90_ms);
                }
            }
            return 0;
        }

        if (verify->parsed()) {
            (void)verify_toy; // the toy suite is the only mode
            return run_verify(out, verify_seed) ? 0 : 2;
        }

        if (attn->parsed()) {
            const ModelConfig cfg = cli_detail::resolve_config(attn_args);
            if (attn_layer < cfg.fe_layers || attn_layer >= cfg.total_layers())
                throw RangeError("layer " + std::to_string(attn_layer) +
                                 " is not an interaction layer; valid layers: " +
                                 std::to_string(cfg.fe_layers) + ".." +
                                 std::to_string(cfg.total_layers() - 1));
            const WeightStore weights = cli_detail::resolve_weights(attn_args, cfg);
            std::vector<Tensor> frames = cli_detail::load_frames(attn_seq);
            if (attn_frame < 0 || attn_frame >= static_cast<int>(frames.size()))
                throw InputError("frame index " + std::to_string(attn_frame) +
                                 " outside sequence of " + std::to_string(frames.size()));
            const std::string gt_path =
                attn_gt.empty() ? attn_seq + "/groundtruth.txt" : attn_gt;
            const BBox gt = read_gt_box(gt_path);
            TrackState state = init_track(frames[0], gt, cfg, weights);
            for (int i = 1; i < attn_frame; ++i)
                track_frame(state, frames[static_cast<std::size_t>(i)]);
            auto [crop, spec] = make_crop(frames[static_cast<std::size_t>(attn_frame)],
                                          state.prev_box, kSearchCropFactor, cfg.search_h);
            Tensor map = attention_probe(crop, state.template_cache.features, cfg, weights,
                                         attn_layer);
            write_pgm(attn_out + ".pgm", map);
            write_csv_matrix(attn_out + ".csv", map);
            out << "wrote " << attn_out << ".pgm and " << attn_out << ".csv ("
                << map.extent(0) << "x" << map.extent(1) << " cells)\n";
            return 0;
        }

        if (gen->parsed()) {
            const ModelConfig cfg = cli_detail::resolve_config(gen_args);
            WeightStore store = WeightStore::random(cfg, gen_args.seed);
            store.save(gen_out);
            char buf[96];
            std::snprintf(buf, sizeof(buf), "wrote %llu tensors, digest %016llx\n",
                          static_cast<unsigned long long>(store.names().size()),
                          static_cast<unsigned long long>(store.digest()));
            out << gen_out << ": " << buf;
            return 0;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace litetrack
