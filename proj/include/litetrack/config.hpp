#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "litetrack/errors.hpp"
#include "litetrack/rng.hpp"

namespace litetrack {

enum class Variant { B4, B6, B8, B9, Custom };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::B4: return "B4";
        case Variant::B6: return "B6";
        case Variant::B8: return "B8";
        case Variant::B9: return "B9";
        default: return "custom";
    }
}

inline Variant variant_from_name(const std::string& name) {
    if (name == "B4" || name == "b4") return Variant::B4;
    if (name == "B6" || name == "b6") return Variant::B6;
    if (name == "B8" || name == "b8") return Variant::B8;
    if (name == "B9" || name == "b9") return Variant::B9;
    if (name == "custom") return Variant::Custom;
    throw InputError("unknown variant '" + name + "' (expected B4, B6, B8, B9 or custom)");
}

constexpr std::array<Variant, 4> kAllVariants = {Variant::B4, Variant::B6, Variant::B8,
                                                 Variant::B9};

// Architecture hyperparameters. The encoder splits into a feature
// extraction stage (fe_layers of plain self-attention on the search
// tokens) followed by an interaction stage (ai_layers whose queries come
// from the search tokens only, with keys/values extended by the cached
// template tokens).
struct ModelConfig {
    int embed_dim = 768;
    int num_heads = 12;
    int mlp_ratio = 4;
    int patch_size = 16;
    int template_h = 128;
    int template_w = 128;
    int search_h = 256;
    int search_w = 256;
    int fe_layers = 2;
    int ai_layers = 2;

    int head_dim() const { return embed_dim / num_heads; }
    int mlp_hidden() const { return mlp_ratio * embed_dim; }
    int total_layers() const { return fe_layers + ai_layers; }
    int template_tokens() const { return (template_h / patch_size) * (template_w / patch_size); }
    int search_tokens() const { return (search_h / patch_size) * (search_w / patch_size); }
    // score-map side; the head requires a square search grid
    int score_size() const { return search_h / patch_size; }

    void validate() const {
        if (embed_dim < 8 || num_heads < 1 || mlp_ratio < 1 || patch_size < 1)
            throw ConfigError("config: non-positive dimension field");
        if (embed_dim % num_heads != 0)
            throw ConfigError("config: embed_dim " + std::to_string(embed_dim) +
                              " not divisible by num_heads " + std::to_string(num_heads));
        if (embed_dim % 8 != 0)
            throw ConfigError("config: embed_dim must be divisible by 8 "
                              "(the head halves channels three times)");
        if (template_h % patch_size || template_w % patch_size || search_h % patch_size ||
            search_w % patch_size)
            throw ConfigError("config: image sizes must be divisible by patch_size " +
                              std::to_string(patch_size));
        if (fe_layers < 0 || ai_layers < 0 || fe_layers + ai_layers < 1)
            throw ConfigError("config: need fe_layers >= 0, ai_layers >= 0 and at least one layer");
    }

    // key=value form; doubles as the config-file format and the canonical
    // string fed into hashes.
    std::string canonical() const {
        std::ostringstream os;
        os << "embed_dim=" << embed_dim << "\nnum_heads=" << num_heads
           << "\nmlp_ratio=" << mlp_ratio << "\npatch_size=" << patch_size
           << "\ntemplate_size=" << template_h << "x" << template_w
           << "\nsearch_size=" << search_h << "x" << search_w
           << "\nfe_layers=" << fe_layers << "\nai_layers=" << ai_layers << "\n";
        return os.str();
    }

    std::uint64_t hash() const { return fnv1a64(canonical()); }

    bool same_dims(const ModelConfig& o) const {
        return embed_dim == o.embed_dim && num_heads == o.num_heads &&
               mlp_ratio == o.mlp_ratio && patch_size == o.patch_size &&
               template_h == o.template_h && template_w == o.template_w &&
               search_h == o.search_h && search_w == o.search_w;
    }

    bool operator==(const ModelConfig& o) const {
        return same_dims(o) && fe_layers == o.fe_layers && ai_layers == o.ai_layers;
    }
};

namespace detail {
inline void variant_layer_split(Variant v, int& fe, int& ai) {
    switch (v) {
        case Variant::B9: fe = 6; ai = 3; break;
        case Variant::B8: fe = 6; ai = 2; break;
        case Variant::B6: fe = 3; ai = 3; break;
        case Variant::B4: fe = 2; ai = 2; break;
        default: throw InputError("custom variant requires an explicit config");
    }
}
} // namespace detail

// Full-size preset: ViT-B dims, 128px template, 256px search.
inline ModelConfig variant_config(Variant v) {
    ModelConfig cfg;
    detail::variant_layer_split(v, cfg.fe_layers, cfg.ai_layers);
    cfg.validate();
    return cfg;
}

// Same layer split at desk-test scale: C=64, 4 heads, 32px template
// (4 tokens), 64px search (16 tokens).
inline ModelConfig toy_variant_config(Variant v) {
    ModelConfig cfg;
    cfg.embed_dim = 64;
    cfg.num_heads = 4;
    cfg.template_h = cfg.template_w = 32;
    cfg.search_h = cfg.search_w = 64;
    detail::variant_layer_split(v, cfg.fe_layers, cfg.ai_layers);
    cfg.validate();
    return cfg;
}

namespace detail {
inline void parse_size_pair(const std::string& value, int& h, int& w, const std::string& key) {
    std::size_t x = value.find('x');
    try {
        if (x == std::string::npos) {
            h = w = std::stoi(value);
        } else {
            h = std::stoi(value.substr(0, x));
            w = std::stoi(value.substr(x + 1));
        }
    } catch (const std::exception&) {
        throw InputError("config: bad value '" + value + "' for " + key);
    }
}
} // namespace detail

// Parses the flat key=value config format produced by
// ModelConfig::canonical(). Blank lines and '#' comments are skipped.
inline ModelConfig parse_config_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line.erase(0, start);
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError("config: line " + std::to_string(lineno) + " is not key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto as_int = [&]() {
            try {
                return std::stoi(value);
            } catch (const std::exception&) {
                throw InputError("config: bad value '" + value + "' for " + key);
            }
        };
        if (key == "embed_dim") cfg.embed_dim = as_int();
        else if (key == "num_heads") cfg.num_heads = as_int();
        else if (key == "mlp_ratio") cfg.mlp_ratio = as_int();
        else if (key == "patch_size") cfg.patch_size = as_int();
        else if (key == "template_size") detail::parse_size_pair(value, cfg.template_h, cfg.template_w, key);
        else if (key == "search_size") detail::parse_size_pair(value, cfg.search_h, cfg.search_w, key);
        else if (key == "fe_layers") cfg.fe_layers = as_int();
        else if (key == "ai_layers") cfg.ai_layers = as_int();
        else throw InputError("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

inline ModelConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

} // namespace litetrack
