#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "litetrack/config.hpp"
#include "litetrack/errors.hpp"
#include "litetrack/rng.hpp"
#include "litetrack/tensor.hpp"

namespace litetrack {

// Weight file layout (version 1):
//
//   bytes 0..3   magic "LTW1"
//   bytes 4..11  manifest size in bytes, little-endian u64
//   manifest     UTF-8 JSON: {"config": {...}, "tensors": [
//                  {"name": ..., "shape": [...], "offset": bytes into payload}, ...]}
//   payload      raw little-endian float32 data, tensors back to back in
//                manifest order
//
// The config echo lets a loaded store validate itself without external
// context. Offsets are relative to the start of the payload.
inline constexpr char kWeightMagic[4] = {'L', 'T', 'W', '1'};

// Expected tensor names and shapes for a config. One parameter set serves
// both the template and the search branch; only the positional tables
// differ per branch. Linear weights are stored [in x out] so tokens
// multiply on the left.
inline std::map<std::string, std::vector<std::int64_t>>
expected_weight_shapes(const ModelConfig& cfg) {
    cfg.validate();
    const std::int64_t c = cfg.embed_dim;
    const std::int64_t hidden = cfg.mlp_hidden();
    const std::int64_t patch_in = 3LL * cfg.patch_size * cfg.patch_size;
    std::map<std::string, std::vector<std::int64_t>> shapes;
    shapes["patch_embed.weight"] = {patch_in, c};
    shapes["patch_embed.bias"] = {c};
    shapes["pos_embed.template"] = {cfg.template_tokens(), c};
    shapes["pos_embed.search"] = {cfg.search_tokens(), c};
    for (int i = 0; i < cfg.total_layers(); ++i) {
        const std::string p = "encoder." + std::to_string(i) + ".";
        shapes[p + "norm1.gamma"] = {c};
        shapes[p + "norm1.beta"] = {c};
        for (const char* proj : {"q", "k", "v", "proj"}) {
            shapes[p + "attn." + proj + ".weight"] = {c, c};
            shapes[p + "attn." + proj + ".bias"] = {c};
        }
        shapes[p + "norm2.gamma"] = {c};
        shapes[p + "norm2.beta"] = {c};
        shapes[p + "mlp.fc1.weight"] = {c, hidden};
        shapes[p + "mlp.fc1.bias"] = {hidden};
        shapes[p + "mlp.fc2.weight"] = {hidden, c};
        shapes[p + "mlp.fc2.bias"] = {c};
    }
    shapes["encoder_norm.gamma"] = {c};
    shapes["encoder_norm.beta"] = {c};
    // head: three conv branches, channels C -> C/2 -> C/4 -> C/8 -> out
    const std::int64_t widths[5] = {c, c / 2, c / 4, c / 8, 0};
    const std::pair<const char*, std::int64_t> branches[3] = {
        {"center", 1}, {"offset", 2}, {"size", 2}};
    for (const auto& [branch, out_ch] : branches) {
        const std::string p = std::string("head.") + branch + ".";
        for (int k = 0; k < 4; ++k) {
            const std::int64_t in_ch = widths[k];
            const std::int64_t out = (k == 3) ? out_ch : widths[k + 1];
            shapes[p + "conv" + std::to_string(k + 1) + ".weight"] = {out, in_ch, 3, 3};
            shapes[p + "conv" + std::to_string(k + 1) + ".bias"] = {out};
            if (k < 3) {
                shapes[p + "norm" + std::to_string(k + 1) + ".gamma"] = {out};
                shapes[p + "norm" + std::to_string(k + 1) + ".beta"] = {out};
            }
        }
    }
    return shapes;
}

// Immutable named tensor collection. Construct via random(), load() or
// subset_for(); after that only const access.
class WeightStore {
public:
    WeightStore() = default;

    // Seeded Gaussian init (std 0.02) for weights and positional tables,
    // zeros for biases, unit gamma / zero beta for norms. Each tensor gets
    // its own stream keyed by (seed, name), so shared tensors are
    // identical across configs that differ only in layer count.
    static WeightStore random(const ModelConfig& cfg, std::uint64_t seed) {
        WeightStore store;
        store.cfg_ = cfg;
        for (const auto& [name, shape] : expected_weight_shapes(cfg)) {
            Tensor t(shape);
            fill_tensor(t, name, seed);
            store.tensors_.emplace(name, std::move(t));
        }
        store.digest_ = store.compute_digest();
        return store;
    }

    // Builds a store from explicitly supplied tensors (zero or planted
    // initializations, external imports). The set must match the config
    // exactly.
    static WeightStore from_tensors(const ModelConfig& cfg,
                                    std::map<std::string, Tensor> tensors) {
        WeightStore store;
        store.cfg_ = cfg;
        store.tensors_ = std::move(tensors);
        store.validate_against(cfg);
        store.digest_ = store.compute_digest();
        return store;
    }

    static WeightStore load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw InputError("weights: cannot open '" + path + "'");
        char magic[4];
        f.read(magic, 4);
        if (!f || std::memcmp(magic, kWeightMagic, 4) != 0)
            throw InputError("weights: '" + path + "' is not a weight file (bad magic)");
        std::uint64_t manifest_size = 0;
        unsigned char szbuf[8];
        f.read(reinterpret_cast<char*>(szbuf), 8);
        if (!f) throw InputError("weights: truncated header in '" + path + "'");
        for (int i = 7; i >= 0; --i) manifest_size = (manifest_size << 8) | szbuf[i];
        std::string manifest_text(manifest_size, '\0');
        f.read(manifest_text.data(), static_cast<std::streamsize>(manifest_size));
        if (!f) throw InputError("weights: truncated manifest in '" + path + "'");

        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(manifest_text);
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("weights: bad manifest JSON: ") + e.what());
        }

        WeightStore store;
        store.cfg_ = config_from_json(manifest.at("config"));
        const std::streampos payload_start = f.tellg();
        for (const auto& entry : manifest.at("tensors")) {
            const std::string name = entry.at("name").get<std::string>();
            std::vector<std::int64_t> shape = entry.at("shape").get<std::vector<std::int64_t>>();
            const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
            Tensor t(shape);
            f.seekg(payload_start + static_cast<std::streamoff>(offset));
            f.read(reinterpret_cast<char*>(t.data()),
                   static_cast<std::streamsize>(t.size() * sizeof(float)));
            if (!f) throw InputError("weights: truncated payload for '" + name + "'");
            store.tensors_.emplace(name, std::move(t));
        }
        store.validate_against(store.cfg_);
        store.digest_ = store.compute_digest();
        return store;
    }

    void save(const std::string& path) const {
        nlohmann::json manifest;
        manifest["config"] = config_to_json(cfg_);
        nlohmann::json tensor_list = nlohmann::json::array();
        std::uint64_t offset = 0;
        for (const auto& [name, t] : tensors_) {
            tensor_list.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
            offset += static_cast<std::uint64_t>(t.size()) * sizeof(float);
        }
        manifest["tensors"] = std::move(tensor_list);
        const std::string text = manifest.dump();

        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw InputError("weights: cannot write '" + path + "'");
        f.write(kWeightMagic, 4);
        unsigned char szbuf[8];
        std::uint64_t n = text.size();
        for (int i = 0; i < 8; ++i) szbuf[i] = static_cast<unsigned char>((n >> (8 * i)) & 0xff);
        f.write(reinterpret_cast<const char*>(szbuf), 8);
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [name, t] : tensors_)
            f.write(reinterpret_cast<const char*>(t.data()),
                    static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!f) throw InputError("weights: write failed for '" + path + "'");
    }

    const Tensor& get(const std::string& name) const {
        auto it = tensors_.find(name);
        if (it == tensors_.end())
            throw ConfigError("weights: no tensor named '" + name + "'");
        if (access_log_) access_log_->push_back(name);
        return it->second;
    }

    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

    const ModelConfig& config() const { return cfg_; }
    std::uint64_t digest() const { return digest_; }

    std::uint64_t element_count() const {
        std::uint64_t n = 0;
        for (const auto& [name, t] : tensors_) n += static_cast<std::uint64_t>(t.size());
        return n;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(tensors_.size());
        for (const auto& [name, t] : tensors_) out.push_back(name);
        return out;
    }

    // Exact two-way check: every required name present with the right
    // shape, and nothing extra.
    void validate_against(const ModelConfig& cfg) const {
        auto expected = expected_weight_shapes(cfg);
        std::string missing, extra, mismatched;
        for (const auto& [name, shape] : expected) {
            auto it = tensors_.find(name);
            if (it == tensors_.end())
                missing += (missing.empty() ? "" : ", ") + name;
            else if (it->second.shape() != shape)
                mismatched += (mismatched.empty() ? "" : ", ") + name;
        }
        for (const auto& [name, t] : tensors_)
            if (!expected.count(name)) extra += (extra.empty() ? "" : ", ") + name;
        if (!missing.empty() || !extra.empty() || !mismatched.empty()) {
            std::string msg = "weights: store does not match config;";
            if (!missing.empty()) msg += " missing: " + missing + ";";
            if (!extra.empty()) msg += " extra: " + extra + ";";
            if (!mismatched.empty()) msg += " wrong shape: " + mismatched + ";";
            throw ConfigError(msg);
        }
    }

    // Top-down layer pruning: keep the first sub.total_layers() encoder
    // layers plus everything layer-independent. Requires identical dims.
    WeightStore subset_for(const ModelConfig& sub) const {
        sub.validate();
        if (!sub.same_dims(cfg_))
            throw ConfigError("weights: subset config changes tensor dimensions");
        if (sub.total_layers() > cfg_.total_layers())
            throw ConfigError("weights: subset needs " + std::to_string(sub.total_layers()) +
                              " layers, store has " + std::to_string(cfg_.total_layers()));
        WeightStore out;
        out.cfg_ = sub;
        for (const auto& [name, shape] : expected_weight_shapes(sub))
            out.tensors_.emplace(name, get(name));
        out.digest_ = out.compute_digest();
        return out;
    }

    // Test hook: records every name resolved through get().
    void set_access_log(std::vector<std::string>* sink) const { access_log_ = sink; }

    static nlohmann::json config_to_json(const ModelConfig& cfg) {
        return {{"embed_dim", cfg.embed_dim},   {"num_heads", cfg.num_heads},
                {"mlp_ratio", cfg.mlp_ratio},   {"patch_size", cfg.patch_size},
                {"template_h", cfg.template_h}, {"template_w", cfg.template_w},
                {"search_h", cfg.search_h},     {"search_w", cfg.search_w},
                {"fe_layers", cfg.fe_layers},   {"ai_layers", cfg.ai_layers}};
    }

    static ModelConfig config_from_json(const nlohmann::json& j) {
        ModelConfig cfg;
        try {
            cfg.embed_dim = j.at("embed_dim").get<int>();
            cfg.num_heads = j.at("num_heads").get<int>();
            cfg.mlp_ratio = j.at("mlp_ratio").get<int>();
            cfg.patch_size = j.at("patch_size").get<int>();
            cfg.template_h = j.at("template_h").get<int>();
            cfg.template_w = j.at("template_w").get<int>();
            cfg.search_h = j.at("search_h").get<int>();
            cfg.search_w = j.at("search_w").get<int>();
            cfg.fe_layers = j.at("fe_layers").get<int>();
            cfg.ai_layers = j.at("ai_layers").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("weights: bad config echo: ") + e.what());
        }
        cfg.validate();
        return cfg;
    }

private:
    static void fill_tensor(Tensor& t, const std::string& name, std::uint64_t seed) {
        const bool is_bias = name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
        const bool is_gamma = name.size() > 6 && name.compare(name.size() - 6, 6, ".gamma") == 0;
        const bool is_beta = name.size() > 5 && name.compare(name.size() - 5, 5, ".beta") == 0;
        if (is_bias || is_beta) return; // zero-filled already
        if (is_gamma) {
            for (std::int64_t i = 0; i < t.size(); ++i) t[i] = 1.0f;
            return;
        }
        SplitMix64 rng(seed ^ fnv1a64(name));
        for (std::int64_t i = 0; i < t.size(); ++i)
            t[i] = static_cast<float>(rng.next_gaussian() * 0.02);
    }

    std::uint64_t compute_digest() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& [name, t] : tensors_) {
            h = fnv1a64(name, h);
            for (std::int64_t e : t.shape()) h = fnv1a64(&e, sizeof(e), h);
            h = fnv1a64(t.data(), static_cast<std::size_t>(t.size()) * sizeof(float), h);
        }
        return h;
    }

    ModelConfig cfg_;
    std::map<std::string, Tensor> tensors_;
    std::uint64_t digest_ = 0;
    mutable std::vector<std::string>* access_log_ = nullptr;
};

} // namespace litetrack
