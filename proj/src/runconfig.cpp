// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#include "geosynth/runconfig.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "geosynth/png_io.hpp"
#include "geosynth/rng.hpp"
#include "geosynth/synth.hpp"

namespace geosynth {
namespace {

std::string join(const std::string& path, const std::string& field) {
    return path.empty() ? field : path + "." + field;
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw config_error(path + ": " + msg);
}

void require_object(const Json& node, const std::string& path) {
    if (!node.is_object()) fail(path, "expected an object");
}

/// Reject unrecognized keys inside a section geosynth owns; typos should be
/// loud, not silently ignored.
void check_keys(const Json& node, const std::string& path,
                std::initializer_list<const char*> allowed) {
    require_object(node, path);
    for (const auto& [key, value] : node.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok) fail(join(path, key), "unknown field");
    }
}

double get_number(const Json& node, const char* field, const std::string& path,
                  double def, double lo, double hi) {
    if (!node.contains(field)) return def;
    const Json& v = node.at(field);
    if (!v.is_number()) fail(join(path, field), "expected a number");
    const double x = v.get<double>();
    if (x < lo || x > hi)
        fail(join(path, field),
             "value " + std::to_string(x) + " outside [" + std::to_string(lo) +
                 ", " + std::to_string(hi) + "]");
    return x;
}

int64_t get_integer(const Json& node, const char* field, const std::string& path,
                    int64_t def, int64_t lo, int64_t hi) {
    if (!node.contains(field)) return def;
    const Json& v = node.at(field);
    if (!v.is_number_integer()) fail(join(path, field), "expected an integer");
    const int64_t x = v.get<int64_t>();
    if (x < lo || x > hi)
        fail(join(path, field),
             "value " + std::to_string(x) + " outside [" + std::to_string(lo) +
                 ", " + std::to_string(hi) + "]");
    return x;
}

uint64_t get_seed(const Json& node, const char* field, const std::string& path,
                  uint64_t def) {
    if (!node.contains(field)) return def;
    const Json& v = node.at(field);
    if (!v.is_number_integer())
        fail(join(path, field), "expected a non-negative integer seed");
    if (!v.is_number_unsigned() && v.get<int64_t>() < 0)
        fail(join(path, field), "expected a non-negative integer seed");
    return v.get<uint64_t>();
}

std::string get_string(const Json& node, const char* field,
                       const std::string& path, const char* def) {
    if (!node.contains(field)) {
        if (def) return def;
        fail(join(path, field), "required field is missing");
    }
    const Json& v = node.at(field);
    if (!v.is_string()) fail(join(path, field), "expected a string");
    return v.get<std::string>();
}

bool get_bool(const Json& node, const char* field, const std::string& path,
              bool def) {
    if (!node.contains(field)) return def;
    const Json& v = node.at(field);
    if (!v.is_boolean()) fail(join(path, field), "expected a boolean");
    return v.get<bool>();
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// --- section resolvers ------------------------------------------------------

Json resolve_schedule(const Json& in, const std::string& path) {
    check_keys(in, path, {"kind", "timesteps", "beta_min", "beta_max"});
    Json out;
    const std::string kind = get_string(in, "kind", path, "linear");
    if (kind != "linear" && kind != "cosine")
        fail(join(path, "kind"), "unknown schedule kind '" + kind +
                                     "' (expected linear or cosine)");
    out["kind"] = kind;
    out["timesteps"] =
        get_integer(in, "timesteps", path, 1000, 2, 100000);
    if (kind == "linear") {
        const double bmin = get_number(in, "beta_min", path, 1e-4, 1e-12, 0.999);
        const double bmax = get_number(in, "beta_max", path, 2e-2, 1e-12, 0.999);
        if (bmin > bmax)
            fail(join(path, "beta_min"), "beta_min exceeds beta_max");
        out["beta_min"] = bmin;
        out["beta_max"] = bmax;
    }
    return out;
}

Json resolve_sampler(const Json& in, const std::string& path,
                     int schedule_timesteps) {
    check_keys(in, path, {"kind", "steps"});
    Json out;
    const std::string kind = get_string(in, "kind", path, "dpm");
    if (kind != "dpm" && kind != "ancestral")
        fail(join(path, "kind"),
             "unknown sampler kind '" + kind + "' (expected dpm or ancestral)");
    out["kind"] = kind;
    const int def_steps = kind == "ancestral" ? schedule_timesteps : 50;
    const int steps = static_cast<int>(
        get_integer(in, "steps", path, def_steps, 1, 100000));
    if (kind == "ancestral" && steps != schedule_timesteps)
        fail(join(path, "steps"),
             "ancestral sampling must use exactly the schedule's timestep "
             "count (" +
                 std::to_string(schedule_timesteps) + ")");
    if (steps > schedule_timesteps)
        fail(join(path, "steps"), "more steps than schedule timesteps");
    out["steps"] = steps;
    return out;
}

Json resolve_tiling(const Json& in, const std::string& path) {
    check_keys(in, path, {"tile", "stride", "std_fraction"});
    Json out;
    const int tile = static_cast<int>(get_integer(in, "tile", path, 128, 1, 65536));
    const int stride =
        static_cast<int>(get_integer(in, "stride", path, tile / 2 > 0 ? tile / 2 : 1,
                                     1, 65536));
    if (stride > tile) fail(join(path, "stride"), "stride exceeds tile");
    out["tile"] = tile;
    out["stride"] = stride;
    out["std_fraction"] = get_number(in, "std_fraction", path, 0.25, 1e-6, 100.0);
    return out;
}

Json resolve_decode(const Json& in, const std::string& path) {
    check_keys(in, path, {"window", "overlap"});
    Json out;
    const int window =
        static_cast<int>(get_integer(in, "window", path, 512, 4, 1 << 20));
    if (window % 4 != 0)
        fail(join(path, "window"), "decode window must be a multiple of 4");
    out["window"] = window;
    out["overlap"] = get_number(in, "overlap", path, 0.25, 0.0, 0.95);
    return out;
}

Json resolve_codec(const Json& in, const std::string& path) {
    const std::string kind = get_string(in, "kind", path, "flat");
    Json out;
    out["kind"] = kind;
    if (kind == "file") {
        check_keys(in, path, {"kind", "path"});
        out["path"] = get_string(in, "path", path, nullptr);
    } else if (kind == "flat") {
        check_keys(in, path,
                   {"kind", "channels", "images", "side", "jitter", "train_seed"});
        out["channels"] =
            get_integer(in, "channels", path, 4, 1, 48);
        out["images"] = get_integer(in, "images", path, 40, 2, 4096);
        const int side =
            static_cast<int>(get_integer(in, "side", path, 64, 4, 4096));
        if (side % 4 != 0) fail(join(path, "side"), "side must be a multiple of 4");
        out["side"] = side;
        out["jitter"] = get_number(in, "jitter", path, 0.02, 0.0, 1.0);
        out["train_seed"] = get_seed(in, "train_seed", path, 7);
    } else if (kind == "synth") {
        check_keys(in, path, {"kind", "channels", "zooms", "side", "max_patches",
                              "train_seed"});
        out["channels"] = get_integer(in, "channels", path, 4, 1, 48);
        Json zooms = Json::array({4, 5, 6});
        if (in.contains("zooms")) {
            if (!in.at("zooms").is_array() || in.at("zooms").empty())
                fail(join(path, "zooms"), "expected a non-empty array");
            zooms = in.at("zooms");
        }
        out["zooms"] = zooms;
        const int side =
            static_cast<int>(get_integer(in, "side", path, 256, 4, 8192));
        if (side % 4 != 0) fail(join(path, "side"), "side must be a multiple of 4");
        out["side"] = side;
        out["max_patches"] = get_integer(in, "max_patches", path, 80000, 64,
                                         100000000);
        out["train_seed"] = get_seed(in, "train_seed", path, 7);
    } else {
        fail(join(path, "kind"), "unknown codec kind '" + kind +
                                     "' (expected file, flat or synth)");
    }
    return out;
}

/// Channel count readable from the codec document without fitting/loading
/// it; 0 when unknown (file-backed codec).
int codec_channels_hint(const Json& codec) {
    if (codec.at("kind") == "file") return 0;
    return codec.at("channels").get<int>();
}

Json resolve_mean(const Json& in, const std::string& path) {
    check_keys(in, path, {"pattern", "value", "amplitude", "bias"});
    Json out;
    const std::string pattern = get_string(in, "pattern", path, "constant");
    out["pattern"] = pattern;
    if (pattern == "constant") {
        out["value"] = get_number(in, "value", path, 0.0, -1e6, 1e6);
    } else if (pattern == "sine") {
        out["amplitude"] = get_number(in, "amplitude", path, 0.5, -1e6, 1e6);
        out["bias"] = get_number(in, "bias", path, 0.0, -1e6, 1e6);
    } else {
        fail(join(path, "pattern"), "unknown mean pattern '" + pattern +
                                        "' (expected constant or sine)");
    }
    return out;
}

Json resolve_denoiser(const Json& in, const std::string& path, int side_default,
                      int channels_hint) {
    const std::string kind = get_string(in, "kind", path, nullptr);
    Json out;
    out["kind"] = kind;
    auto resolve_field = [&](bool with_var) {
        out["side"] = get_integer(in, "side", path, side_default, 1, 1 << 20);
        if (in.contains("channels") || channels_hint > 0) {
            out["channels"] =
                get_integer(in, "channels", path, channels_hint, 1, 1024);
        } else {
            fail(join(path, "channels"),
                 "required field is missing (the codec channel count cannot "
                 "be read from a file-backed codec config)");
        }
        if (with_var)
            out["var"] = get_number(in, "var", path, 1.0, 1e-12, 1e6);
    };
    if (kind == "analytic") {
        check_keys(in, path, {"kind", "side", "channels", "var", "mean"});
        resolve_field(true);
        out["mean"] = resolve_mean(in.contains("mean") ? in.at("mean") : Json::object(),
                                   join(path, "mean"));
    } else if (kind == "mixture") {
        check_keys(in, path, {"kind", "side", "channels", "var", "components"});
        resolve_field(true);
        if (!in.contains("components") || !in.at("components").is_array() ||
            in.at("components").empty())
            fail(join(path, "components"), "expected a non-empty array");
        Json comps = Json::array();
        int i = 0;
        for (const auto& c : in.at("components")) {
            const std::string cpath =
                join(path, "components[" + std::to_string(i++) + "]");
            check_keys(c, cpath, {"weight", "mean"});
            Json rc;
            rc["weight"] = get_number(c, "weight", cpath, 1.0, 1e-12, 1e6);
            rc["mean"] = get_number(c, "mean", cpath, 0.0, -1e6, 1e6);
            comps.push_back(rc);
        }
        out["components"] = comps;
    } else if (kind == "consistency") {
        check_keys(in, path, {"kind"});
    } else if (kind == "linear") {
        check_keys(in, path, {"kind", "path"});
        out["path"] = get_string(in, "path", path, nullptr);
    } else {
        fail(join(path, "kind"),
             "unknown denoiser kind '" + kind +
                 "' (expected analytic, mixture, consistency or linear)");
    }
    return out;
}

Json resolve_stage(const Json& in, const std::string& path, int channels_hint,
                   int side_hint /* 0 = use the stage tile */) {
    check_keys(in, path, {"name", "scale", "denoiser", "negative", "lambda_neg",
                          "label", "schedule", "sampler", "tiling"});
    Json out;
    out["name"] = get_string(in, "name", path, nullptr);
    out["scale"] =
        get_integer(in, "scale", path, 4, 4, 4);  // the cascade factor is fixed
    out["schedule"] =
        resolve_schedule(in.contains("schedule") ? in.at("schedule") : Json::object(),
                         join(path, "schedule"));
    out["sampler"] = resolve_sampler(
        in.contains("sampler") ? in.at("sampler") : Json::object(),
        join(path, "sampler"), out["schedule"].at("timesteps").get<int>());
    out["tiling"] =
        resolve_tiling(in.contains("tiling") ? in.at("tiling") : Json::object(),
                       join(path, "tiling"));
    const int tile = out["tiling"].at("tile").get<int>();
    const int side_default =
        side_hint > 0 ? std::min(side_hint, tile) : tile;
    if (!in.contains("denoiser"))
        fail(join(path, "denoiser"), "required field is missing");
    out["denoiser"] = resolve_denoiser(in.at("denoiser"), join(path, "denoiser"),
                                       side_default, channels_hint);
    const bool has_negative = in.contains("negative");
    if (has_negative)
        out["negative"] = resolve_denoiser(in.at("negative"), join(path, "negative"),
                                           side_default, channels_hint);
    const double lambda_def =
        has_negative ? default_lambda_neg(out["name"].get<std::string>()) : 0.0;
    const double lambda =
        get_number(in, "lambda_neg", path, lambda_def, 0.0, 1e6);
    if (lambda > 0.0 && !has_negative)
        fail(join(path, "lambda_neg"),
             "positive guidance strength requires a 'negative' denoiser");
    out["lambda_neg"] = lambda;
    if (in.contains("label"))
        out["label"] = get_string(in, "label", path, nullptr);
    else if (has_negative)
        out["label"] = kDefaultNegativeLabel;
    return out;
}

Json resolve_extent(const Json& in, const std::string& path) {
    check_keys(in, path, {"tile_x0", "tile_y0", "tiles_w", "tiles_h"});
    Json out;
    out["tile_x0"] = get_integer(in, "tile_x0", path, 0, 0, int64_t(1) << 40);
    out["tile_y0"] = get_integer(in, "tile_y0", path, 0, 0, int64_t(1) << 40);
    out["tiles_w"] = get_integer(in, "tiles_w", path, 1, 1, 1 << 20);
    out["tiles_h"] = get_integer(in, "tiles_h", path, 1, 1, 1 << 20);
    return out;
}

Json resolve_cascade(const Json& in, const std::string& path, int channels_hint) {
    check_keys(in, path, {"base_zoom", "chunk_px", "halo", "extent", "base",
                          "stages"});
    Json out;
    out["base_zoom"] =
        get_integer(in, "base_zoom", path, 10, 1, 30);
    const int chunk_px =
        static_cast<int>(get_integer(in, "chunk_px", path, 1024, 4, 1 << 20));
    if (chunk_px % 4 != 0)
        fail(join(path, "chunk_px"), "chunk_px must be a multiple of 4");
    out["chunk_px"] = chunk_px;
    out["halo"] = get_integer(in, "halo", path, 128, 0, 1 << 20);
    if (!in.contains("extent"))
        fail(join(path, "extent"), "required field is missing");
    out["extent"] = resolve_extent(in.at("extent"), join(path, "extent"));
    if (!in.contains("base"))
        fail(join(path, "base"), "required field is missing");
    out["base"] = resolve_stage(in.at("base"), join(path, "base"), channels_hint, 0);
    Json stages = Json::array();
    if (in.contains("stages")) {
        if (!in.at("stages").is_array())
            fail(join(path, "stages"), "expected an array");
        int i = 0;
        for (const auto& s : in.at("stages"))
            stages.push_back(resolve_stage(
                s, join(path, "stages[" + std::to_string(i++) + "]"),
                channels_hint, 0));
    }
    out["stages"] = stages;
    return out;
}

Json resolve_store(const Json& in, const std::string& path) {
    check_keys(in, path, {"tile_px"});
    Json out;
    out["tile_px"] = get_integer(in, "tile_px", path, 256, 1, 65536);
    return out;
}

Json section(const Json& doc, const char* name) {
    if (!doc.contains(name)) return Json::object();
    const Json& s = doc.at(name);
    require_object(s, name);
    return s;
}

// --- builders helpers -------------------------------------------------------

ImageF mean_field(const Json& mean, int side, int channels) {
    ImageF mu(side, side, channels);
    const std::string pattern = mean.at("pattern").get<std::string>();
    if (pattern == "constant") {
        const float v = mean.at("value").get<float>();
        for (auto& x : mu.data) x = v;
    } else {  // sine
        const float amp = mean.at("amplitude").get<float>();
        const float bias = mean.at("bias").get<float>();
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                for (int c = 0; c < channels; ++c)
                    mu.at(x, y, c) =
                        bias + amp * std::sin(0.37f * float(x) +
                                              0.21f * float(y) + float(c));
    }
    return mu;
}

}  // namespace

// --- public API --------------------------------------------------------------

Json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw io_error("cannot read config file " + path.string());
    return parse_config_text(buf.str());
}

Json parse_config_text(const std::string& text) {
    Json doc = Json::parse(text, nullptr, false);
    if (doc.is_discarded())
        throw config_error("config: not valid JSON");
    if (!doc.is_object())
        throw config_error("config: top level must be a JSON object");
    return doc;
}

void apply_override(Json& doc, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw config_error("--set: expected dotted.path=value, got '" +
                           assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    Json parsed = Json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;  // plain string fallback

    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (part.empty())
            throw config_error("--set: empty path component in '" + key + "'");
        parts.push_back(part);
    }

    Json* node = &doc;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        const std::string& p = parts[i];
        if (!p.empty() && p.find_first_not_of("0123456789") == std::string::npos) {
            const size_t idx = std::stoull(p);
            if (!node->is_array() || idx >= node->size())
                throw config_error("--set: '" + key + "' indexes past element " +
                                   p);
            node = &(*node)[idx];
        } else {
            if (!node->is_object())
                throw config_error("--set: '" + key +
                                   "' descends into a non-object");
            node = &(*node)[p];
            if (node->is_null()) *node = Json::object();
        }
    }
    const std::string& last = parts.back();
    if (!last.empty() &&
        last.find_first_not_of("0123456789") == std::string::npos &&
        node->is_array()) {
        const size_t idx = std::stoull(last);
        if (idx >= node->size())
            throw config_error("--set: '" + key + "' indexes past element " +
                               last);
        (*node)[idx] = parsed;
    } else {
        if (!node->is_object())
            throw config_error("--set: '" + key + "' descends into a non-object");
        (*node)[last] = parsed;
    }
}

double default_lambda_neg(const std::string& stage_name) {
    if (stage_name == "10to12") return 5.0;
    if (stage_name == "12to14") return 2.0;
    if (stage_name == "14to16") return 3.0;
    if (stage_name == "16to18") return 3.0;
    if (stage_name == "18to20") return 4.0;
    return 0.0;
}

const char* const kDefaultNegativeLabel = "blurry, low res, low quality";

std::vector<float> label_embedding(const std::string& label) {
    Rng rng(stable_seed(fnv1a64(label), "label-embed"));
    std::vector<float> e(8);
    for (auto& v : e) v = float(rng.gaussian());
    return e;
}

Json default_config() {
    return parse_config_text(R"({
  "seed": 0,
  "store": {"tile_px": 64},
  "codec": {"kind": "flat", "channels": 4, "images": 40, "side": 64,
            "jitter": 0.02, "train_seed": 7},
  "decode": {"window": 64, "overlap": 0.25},
  "cascade": {
    "base_zoom": 10,
    "chunk_px": 128,
    "halo": 16,
    "extent": {"tile_x0": 300, "tile_y0": 300, "tiles_w": 1, "tiles_h": 1},
    "base": {
      "name": "base",
      "denoiser": {"kind": "analytic", "var": 0.4,
                   "mean": {"pattern": "sine", "amplitude": 0.5}},
      "schedule": {"kind": "linear", "timesteps": 50},
      "sampler": {"kind": "dpm", "steps": 25},
      "tiling": {"tile": 32, "stride": 16}
    },
    "stages": [
      {
        "name": "10to12",
        "denoiser": {"kind": "consistency"},
        "schedule": {"kind": "linear", "timesteps": 50},
        "sampler": {"kind": "dpm", "steps": 8},
        "tiling": {"tile": 32, "stride": 16}
      },
      {
        "name": "12to14",
        "denoiser": {"kind": "consistency"},
        "schedule": {"kind": "linear", "timesteps": 50},
        "sampler": {"kind": "dpm", "steps": 8},
        "tiling": {"tile": 32, "stride": 16}
      }
    ]
  },
  "superres": {
    "stage": {
      "name": "10to12",
      "denoiser": {"kind": "consistency"},
      "schedule": {"kind": "linear", "timesteps": 50},
      "sampler": {"kind": "dpm", "steps": 8},
      "tiling": {"tile": 32, "stride": 16}
    }
  },
  "ablate": {
    "tiling": {
      "width": 96, "height": 96, "channels": 2, "seed": 5,
      "denoiser": {"kind": "mixture", "side": 32, "channels": 2, "var": 0.35,
                   "components": [{"weight": 0.5, "mean": 0.6},
                                  {"weight": 0.5, "mean": -0.6}]},
      "schedule": {"kind": "linear", "timesteps": 50},
      "sampler": {"kind": "ancestral", "steps": 50},
      "layout": {"tile": 32, "stride": 16}
    },
    "direct": {
      "base_width": 32, "base_height": 32,
      "stage": {
        "name": "direct",
        "denoiser": {"kind": "analytic", "var": 0.25},
        "schedule": {"kind": "linear", "timesteps": 50},
        "sampler": {"kind": "dpm", "steps": 25},
        "tiling": {"tile": 32, "stride": 16}
      }
    },
    "guidance": {
      "width": 48, "height": 48, "channels": 2, "seed": 11,
      "stage": {
        "name": "10to12",
        "denoiser": {"kind": "analytic", "side": 32, "channels": 2,
                     "var": 0.4, "mean": {"pattern": "constant", "value": 0.2}},
        "negative": {"kind": "analytic", "side": 32, "channels": 2,
                     "var": 0.4, "mean": {"pattern": "constant", "value": -0.4}},
        "schedule": {"kind": "linear", "timesteps": 50},
        "sampler": {"kind": "dpm", "steps": 25},
        "tiling": {"tile": 32, "stride": 16}
      }
    }
  },
  "metrics": {"subset_size": 49, "n_subsets": 100, "dim": 64, "down": 32,
              "extractor_seed": 17},
  "synth": {"zooms": [3, 4, 5], "side": 256, "tile_px": 64}
})");
}

Json resolve_generate(const Json& doc) {
    require_object(doc, "config");
    Json out;
    out["command"] = "generate";
    out["seed"] = get_seed(doc, "seed", "", 0);
    out["store"] = resolve_store(section(doc, "store"), "store");
    out["codec"] = resolve_codec(section(doc, "codec"), "codec");
    out["decode"] = resolve_decode(section(doc, "decode"), "decode");
    if (!doc.contains("cascade"))
        fail("cascade", "required field is missing");
    out["cascade"] = resolve_cascade(doc.at("cascade"), "cascade",
                                     codec_channels_hint(out["codec"]));
    return out;
}

Json resolve_superres(const Json& doc) {
    require_object(doc, "config");
    Json out;
    out["command"] = "superres";
    out["seed"] = get_seed(doc, "seed", "", 0);
    out["codec"] = resolve_codec(section(doc, "codec"), "codec");
    out["decode"] = resolve_decode(section(doc, "decode"), "decode");
    if (!doc.contains("superres"))
        fail("superres", "required field is missing");
    const Json& s = doc.at("superres");
    check_keys(s, "superres", {"stage", "in"});
    Json sr;
    if (!s.contains("stage"))
        fail("superres.stage", "required field is missing");
    sr["stage"] = resolve_stage(s.at("stage"), "superres.stage",
                                codec_channels_hint(out["codec"]), 0);
    if (s.contains("in"))
        sr["in"] = get_string(s, "in", "superres", nullptr);
    out["superres"] = sr;
    return out;
}

Json resolve_ablate(const Json& doc, const std::string& mode) {
    if (mode != "tiling" && mode != "direct" && mode != "guidance")
        fail("ablate.mode", "unknown mode '" + mode +
                                "' (expected tiling, direct or guidance)");
    require_object(doc, "config");
    Json out;
    out["command"] = "ablate";
    out["mode"] = mode;
    out["seed"] = get_seed(doc, "seed", "", 0);
    out["codec"] = resolve_codec(section(doc, "codec"), "codec");
    out["decode"] = resolve_decode(section(doc, "decode"), "decode");
    const int hint = codec_channels_hint(out["codec"]);
    const Json ab = section(doc, "ablate");

    if (mode == "tiling" || mode == "guidance") {
        if (!ab.contains(mode))
            fail(join("ablate", mode), "required field is missing");
        const Json& t = ab.at(mode);
        const std::string path = join("ablate", mode);
        Json rt;
        if (mode == "tiling") {
            check_keys(t, path, {"width", "height", "channels", "seed",
                                 "denoiser", "schedule", "sampler", "layout"});
            rt["layout"] = resolve_tiling(
                t.contains("layout") ? t.at("layout") : Json::object(),
                join(path, "layout"));
        } else {
            check_keys(t, path, {"width", "height", "channels", "seed", "stage"});
        }
        rt["width"] =
            get_integer(t, "width", path, 96, 4, 1 << 20);
        rt["height"] = get_integer(t, "height", path, 96, 4, 1 << 20);
        rt["channels"] = get_integer(t, "channels", path,
                                     hint > 0 ? hint : 2, 1, 1024);
        rt["seed"] = get_seed(t, "seed", path, out["seed"].get<uint64_t>());
        const int channels = rt["channels"].get<int>();
        if (mode == "tiling") {
            const int tile = rt["layout"].at("tile").get<int>();
            rt["schedule"] = resolve_schedule(
                t.contains("schedule") ? t.at("schedule") : Json::object(),
                join(path, "schedule"));
            rt["sampler"] = resolve_sampler(
                t.contains("sampler") ? t.at("sampler") : Json::object(),
                join(path, "sampler"), rt["schedule"].at("timesteps").get<int>());
            if (!t.contains("denoiser"))
                fail(join(path, "denoiser"), "required field is missing");
            rt["denoiser"] = resolve_denoiser(t.at("denoiser"),
                                              join(path, "denoiser"), tile,
                                              channels);
        } else {
            if (!t.contains("stage"))
                fail(join(path, "stage"), "required field is missing");
            Json stage = t.at("stage");
            Json rstage = resolve_stage(stage, join(path, "stage"), channels, 0);
            if (!rstage.contains("negative"))
                fail(join(path, "stage.negative"),
                     "the guidance ablation needs a negative denoiser");
            rt["stage"] = rstage;
        }
        Json abl;
        abl[mode] = rt;
        out["ablate"] = abl;
        return out;
    }

    // direct: cascade plus the one-shot final-zoom stage.
    if (!doc.contains("cascade"))
        fail("cascade", "required field is missing");
    out["cascade"] = resolve_cascade(doc.at("cascade"), "cascade", hint);
    if (!ab.contains("direct"))
        fail("ablate.direct", "required field is missing");
    const Json& d = ab.at("direct");
    check_keys(d, "ablate.direct", {"base_width", "base_height", "stage"});
    Json rd;
    const int bw = static_cast<int>(
        get_integer(d, "base_width", "ablate.direct", 32, 4, 1 << 20));
    const int bh = static_cast<int>(
        get_integer(d, "base_height", "ablate.direct", 32, 4, 1 << 20));
    if (bw % 4 != 0 || bh % 4 != 0)
        fail("ablate.direct.base_width", "base dims must be multiples of 4");
    rd["base_width"] = bw;
    rd["base_height"] = bh;
    if (!d.contains("stage"))
        fail("ablate.direct.stage", "required field is missing");
    rd["stage"] = resolve_stage(d.at("stage"), "ablate.direct.stage", hint, 0);
    // The cascade base prior must fit the (possibly sub-tile) base canvas.
    {
        Json& base = out["cascade"]["base"];
        const int latent = std::min(bw, bh) / 4;
        const int tile = base.at("tiling").at("tile").get<int>();
        if (latent < tile &&
            (base.at("denoiser").at("kind") == "analytic" ||
             base.at("denoiser").at("kind") == "mixture") &&
            !doc.at("cascade").at("base").at("denoiser").contains("side"))
            base["denoiser"]["side"] = latent;
    }
    Json abl;
    abl["direct"] = rd;
    out["ablate"] = abl;
    return out;
}

Json resolve_metrics(const Json& doc) {
    require_object(doc, "config");
    Json out;
    out["command"] = "metrics";
    out["seed"] = get_seed(doc, "seed", "", 0);
    const Json m = section(doc, "metrics");
    check_keys(m, "metrics",
               {"dir_a", "dir_b", "subset_size", "n_subsets", "dim", "down",
                "extractor_seed"});
    Json rm;
    rm["dir_a"] = get_string(m, "dir_a", "metrics", nullptr);
    rm["dir_b"] = get_string(m, "dir_b", "metrics", nullptr);
    rm["subset_size"] = get_integer(m, "subset_size", "metrics", 1000, 2, 1 << 20);
    rm["n_subsets"] = get_integer(m, "n_subsets", "metrics", 100, 1, 1 << 20);
    rm["dim"] = get_integer(m, "dim", "metrics", 2048, 1, 1 << 16);
    rm["down"] = get_integer(m, "down", "metrics", 64, 1, 4096);
    rm["extractor_seed"] = get_seed(m, "extractor_seed", "metrics", 17);
    out["metrics"] = rm;
    return out;
}

Json resolve_ingest(const Json& doc) {
    require_object(doc, "config");
    Json out;
    out["command"] = "ingest";
    out["seed"] = get_seed(doc, "seed", "", 0);
    out["store"] = resolve_store(section(doc, "store"), "store");
    if (!doc.contains("ingest"))
        fail("ingest", "required field is missing");
    const Json& g = doc.at("ingest");
    check_keys(g, "ingest", {"server", "classify", "stacks"});
    Json rg;
    if (!g.contains("server"))
        fail("ingest.server", "required field is missing");
    const Json& sv = g.at("server");
    check_keys(sv, "ingest.server",
               {"url_template", "api_key", "rate_limit", "retries"});
    Json rsv;
    rsv["url_template"] = get_string(sv, "url_template", "ingest.server", nullptr);
    rsv["api_key"] = get_string(sv, "api_key", "ingest.server", "");
    rsv["rate_limit"] =
        get_integer(sv, "rate_limit", "ingest.server", 10, 1, 100000);
    rsv["retries"] = get_integer(sv, "retries", "ingest.server", 2, 0, 100);
    rg["server"] = rsv;
    rg["classify"] = get_bool(g, "classify", "ingest", true);
    if (!g.contains("stacks") || !g.at("stacks").is_array() ||
        g.at("stacks").empty())
        fail("ingest.stacks", "expected a non-empty array");
    Json stacks = Json::array();
    int i = 0;
    for (const auto& s : g.at("stacks")) {
        const std::string path = "ingest.stacks[" + std::to_string(i) + "]";
        check_keys(s, path, {"lat", "lon", "zooms", "side", "jitter_m", "seed"});
        Json rs;
        rs["lat"] = get_number(s, "lat", path, 0.0, -90.0, 90.0);
        rs["lon"] = get_number(s, "lon", path, 0.0, -180.0, 180.0);
        Json zooms = Json::array();
        if (s.contains("zooms")) {
            if (!s.at("zooms").is_array() || s.at("zooms").empty())
                fail(join(path, "zooms"), "expected a non-empty array");
            zooms = s.at("zooms");
        } else {
            for (int z = 10; z <= 20; ++z) zooms.push_back(z);
        }
        rs["zooms"] = zooms;
        rs["side"] = get_integer(s, "side", path, 2048, 1, 1 << 20);
        rs["jitter_m"] = get_number(s, "jitter_m", path, 0.0, 0.0, 1e9);
        rs["seed"] = get_seed(
            s, "seed", path,
            stable_seed(out["seed"].get<uint64_t>(), "ingest-stack",
                        static_cast<uint64_t>(i)));
        stacks.push_back(rs);
        ++i;
    }
    rg["stacks"] = stacks;
    out["ingest"] = rg;
    return out;
}

Json resolve_synth(const Json& doc) {
    require_object(doc, "config");
    Json out;
    out["command"] = "synth";
    out["seed"] = get_seed(doc, "seed", "", 0);
    const Json s = section(doc, "synth");
    check_keys(s, "synth", {"zooms", "side", "tile_px"});
    Json rs;
    Json zooms = Json::array({3, 4, 5});
    if (s.contains("zooms")) {
        if (!s.at("zooms").is_array() || s.at("zooms").empty())
            fail("synth.zooms", "expected a non-empty array");
        zooms = s.at("zooms");
    }
    rs["zooms"] = zooms;
    const int side =
        static_cast<int>(get_integer(s, "side", "synth", 256, 4, 1 << 20));
    const int tile_px =
        static_cast<int>(get_integer(s, "tile_px", "synth", 64, 1, 65536));
    if (side % 4 != 0) fail("synth.side", "side must be a multiple of 4");
    if (side % tile_px != 0)
        fail("synth.side", "side must be a multiple of tile_px");
    rs["side"] = side;
    rs["tile_px"] = tile_px;
    out["synth"] = rs;
    return out;
}

std::shared_ptr<NoiseSchedule> build_schedule(const Json& node,
                                              const std::string& path) {
    const std::string kind = node.at("kind").get<std::string>();
    const int T = node.at("timesteps").get<int>();
    try {
        if (kind == "cosine")
            return std::make_shared<NoiseSchedule>(
                NoiseSchedule::make(NoiseSchedule::Kind::cosine, T));
        return std::make_shared<NoiseSchedule>(NoiseSchedule::make(
            NoiseSchedule::Kind::linear, T, node.at("beta_min").get<double>(),
            node.at("beta_max").get<double>()));
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
}

SamplerConfig build_sampler(const Json& node, const std::string& path) {
    SamplerConfig s;
    try {
        s.kind = sampler_kind_from_string(node.at("kind").get<std::string>());
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    s.steps = node.at("steps").get<int>();
    return s;
}

TilingConfig build_tiling(const Json& node, const std::string& path) {
    (void)path;
    TilingConfig t;
    t.tile = node.at("tile").get<int>();
    t.stride = node.at("stride").get<int>();
    t.std_fraction = node.at("std_fraction").get<double>();
    return t;
}

DecodeTiling build_decode(const Json& node, const std::string& path) {
    (void)path;
    DecodeTiling d;
    d.window = node.at("window").get<int>();
    d.overlap = node.at("overlap").get<double>();
    return d;
}

std::shared_ptr<LinearLatentCodec> build_codec(const Json& node,
                                               const std::string& path) {
    const std::string kind = node.at("kind").get<std::string>();
    if (kind == "file") {
        const std::string p = node.at("path").get<std::string>();
        return std::make_shared<LinearLatentCodec>(LinearLatentCodec::load(p));
    }
    if (kind == "flat") {
        const int channels = node.at("channels").get<int>();
        const int images = node.at("images").get<int>();
        const int side = node.at("side").get<int>();
        const float jitter = node.at("jitter").get<float>();
        const uint64_t train_seed = node.at("train_seed").get<uint64_t>();
        Rng rng(stable_seed(train_seed, "codec-flat"));
        std::vector<ImageF> train;
        train.reserve(size_t(images));
        for (int i = 0; i < images; ++i) {
            ImageF img(side, side, 3);
            float base[3];
            for (auto& b : base) b = float(rng.uniform(0.1, 0.9));
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x)
                    for (int c = 0; c < 3; ++c)
                        img.at(x, y, c) =
                            base[c] + jitter * float(rng.gaussian());
            train.push_back(std::move(img));
        }
        try {
            return std::make_shared<LinearLatentCodec>(
                fit_codec(train, channels, 200000, train_seed));
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
    }
    if (kind == "synth") {
        const int channels = node.at("channels").get<int>();
        std::vector<int> zooms;
        for (const auto& z : node.at("zooms")) zooms.push_back(z.get<int>());
        const int side = node.at("side").get<int>();
        const size_t max_patches = node.at("max_patches").get<size_t>();
        const uint64_t train_seed = node.at("train_seed").get<uint64_t>();
        try {
            const SynthStack stack = synth_pyramid(train_seed, zooms, side);
            std::vector<ImageF> train;
            train.reserve(stack.levels.size());
            for (const auto& level : stack.levels)
                train.push_back(dequantize(level));
            return std::make_shared<LinearLatentCodec>(
                fit_codec(train, channels, max_patches, train_seed));
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
    }
    fail(path, "unknown codec kind '" + kind + "'");
}

std::shared_ptr<Denoiser> build_denoiser(
    const Json& node, const std::shared_ptr<const NoiseSchedule>& schedule,
    const std::shared_ptr<const LinearLatentCodec>& codec,
    const std::string& path) {
    const std::string kind = node.at("kind").get<std::string>();
    try {
        if (kind == "analytic") {
            const int side = node.at("side").get<int>();
            const int channels = node.at("channels").get<int>();
            const float var = node.at("var").get<float>();
            return std::make_shared<AnalyticGaussianDenoiser>(
                schedule, mean_field(node.at("mean"), side, channels),
                ImageF(side, side, channels, var));
        }
        if (kind == "mixture") {
            const int side = node.at("side").get<int>();
            const int channels = node.at("channels").get<int>();
            const double var = node.at("var").get<double>();
            std::vector<GaussianMixtureDenoiser::Component> comps;
            for (const auto& c : node.at("components")) {
                GaussianMixtureDenoiser::Component comp;
                comp.weight = c.at("weight").get<double>();
                comp.mu = ImageF(side, side, channels, c.at("mean").get<float>());
                comp.var = var;
                comps.push_back(std::move(comp));
            }
            return std::make_shared<GaussianMixtureDenoiser>(schedule,
                                                             std::move(comps));
        }
        if (kind == "consistency") {
            if (!codec || !codec->valid())
                fail(path, "the consistency denoiser needs a fitted codec");
            return std::make_shared<ConsistencyDenoiser>(schedule, codec);
        }
        if (kind == "linear") {
            const std::string p = node.at("path").get<std::string>();
            auto den = std::make_shared<LinearDenoiser>(LinearDenoiser::load(p));
            if (!den->valid()) fail(path, "invalid linear denoiser file " + p);
            return den;
        }
    } catch (const config_error&) {
        throw;
    } catch (const io_error&) {
        throw;
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    fail(path, "unknown denoiser kind '" + kind + "'");
}

StageConfig build_stage(const Json& node,
                        const std::shared_ptr<const LinearLatentCodec>& codec,
                        const std::string& path) {
    StageConfig s;
    s.name = node.at("name").get<std::string>();
    s.scale = node.at("scale").get<int>();
    s.schedule = build_schedule(node.at("schedule"), join(path, "schedule"));
    s.sampler = build_sampler(node.at("sampler"), join(path, "sampler"));
    s.tiling = build_tiling(node.at("tiling"), join(path, "tiling"));
    s.denoiser = build_denoiser(node.at("denoiser"), s.schedule, codec,
                                join(path, "denoiser"));
    if (node.contains("negative"))
        s.negative = build_denoiser(node.at("negative"), s.schedule, codec,
                                    join(path, "negative"));
    s.lambda_neg = node.at("lambda_neg").get<double>();
    if (node.contains("label"))
        s.label = std::make_shared<const std::vector<float>>(
            label_embedding(node.at("label").get<std::string>()));
    return s;
}

CascadeConfig build_cascade(const Json& resolved) {
    CascadeConfig cfg;
    const Json& c = resolved.at("cascade");
    cfg.base_zoom = c.at("base_zoom").get<int>();
    cfg.seed = resolved.at("seed").get<uint64_t>();
    cfg.chunk_px = c.at("chunk_px").get<int>();
    cfg.halo = c.at("halo").get<int>();
    cfg.codec = build_codec(resolved.at("codec"), "codec");
    cfg.decode = build_decode(resolved.at("decode"), "decode");
    cfg.base = build_stage(c.at("base"), cfg.codec, "cascade.base");
    int i = 0;
    for (const auto& s : c.at("stages"))
        cfg.stages.push_back(build_stage(
            s, cfg.codec, "cascade.stages[" + std::to_string(i++) + "]"));
    return cfg;
}

WorldExtent build_extent(const Json& node, const std::string& path) {
    (void)path;
    WorldExtent e;
    e.tile_x0 = node.at("tile_x0").get<int64_t>();
    e.tile_y0 = node.at("tile_y0").get<int64_t>();
    e.tiles_w = node.at("tiles_w").get<int>();
    e.tiles_h = node.at("tiles_h").get<int>();
    return e;
}

TileServerSpec build_server_spec(const Json& node, const std::string& path) {
    (void)path;
    TileServerSpec s;
    s.url_template = node.at("url_template").get<std::string>();
    s.api_key = node.at("api_key").get<std::string>();
    s.rate_limit = node.at("rate_limit").get<int>();
    s.retries = node.at("retries").get<int>();
    return s;
}

PyramidSpec build_pyramid_spec(const Json& node, const std::string& path) {
    (void)path;
    PyramidSpec p;
    p.center_lat = node.at("lat").get<double>();
    p.center_lon = node.at("lon").get<double>();
    p.zooms.clear();
    for (const auto& z : node.at("zooms")) p.zooms.push_back(z.get<int>());
    p.side = node.at("side").get<int>();
    p.jitter_m = node.at("jitter_m").get<double>();
    p.seed = node.at("seed").get<uint64_t>();
    return p;
}

}  // namespace geosynth
