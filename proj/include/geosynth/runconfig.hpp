// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "geosynth/cascade.hpp"
#include "geosynth/codec.hpp"
#include "geosynth/denoise.hpp"
#include "geosynth/ingest.hpp"
#include "geosynth/schedule.hpp"
#include "geosynth/tiling.hpp"

namespace geosynth {

/// Malformed or invalid run configuration. The message always starts with
/// the dotted path of the offending field ("cascade.stages[0].denoiser.kind:
/// ...") so errors are actionable from the command line.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

using Json = nlohmann::ordered_json;

/// Read and parse a JSON config file. Throws io_error when the file cannot
/// be read and config_error when it does not parse.
Json load_config_file(const std::filesystem::path& path);

/// Parse config text. Throws config_error on malformed JSON.
Json parse_config_text(const std::string& text);

/// Apply one "--set dotted.path=value" override in place. Path components
/// are separated by '.'; a decimal component indexes into an array. The
/// value is parsed as JSON when possible and falls back to a plain string,
/// so `--set seed=7`, `--set cascade.extent.tile_x0=300` and
/// `--set codec.path=model.bin` all do the expected thing.
void apply_override(Json& doc, const std::string& assignment);

/// The stage-wise default negative-guidance strengths for the five named
/// cascade stages 10to12, 12to14, 14to16, 16to18 and 18to20 (5, 2, 3, 3, 4);
/// 0 for any other name.
double default_lambda_neg(const std::string& stage_name);

/// Default negative-conditioning prompt carried by guided stages.
extern const char* const kDefaultNegativeLabel;

/// Deterministic opaque embedding of a label string (8 seeded floats). The
/// models here treat labels as tokens; only equality/identity matters.
std::vector<float> label_embedding(const std::string& label);

/// A complete, self-contained run document: a one-base-tile extent, an
/// analytic Gaussian base layer and two identity-consistency x4 stages over
/// a flat-field codec. Every command can run against (a subset of) it.
Json default_config();

// --- Resolution -----------------------------------------------------------
// Each resolver takes the user document, fills every default the command
// would use into an explicit field, validates field types and ranges, and
// returns the trimmed document containing exactly the sections the command
// consumes. A run is reproducible from the resolved document alone, and
// resolving a resolved document is the identity.

Json resolve_generate(const Json& doc);
Json resolve_superres(const Json& doc);
Json resolve_ablate(const Json& doc, const std::string& mode);
Json resolve_metrics(const Json& doc);
Json resolve_ingest(const Json& doc);
Json resolve_synth(const Json& doc);

// --- Builders --------------------------------------------------------------
// Builders construct module objects from *resolved* documents; `path` is the
// dotted location of `node` in the document, used for error messages.

std::shared_ptr<NoiseSchedule> build_schedule(const Json& node,
                                              const std::string& path);
SamplerConfig build_sampler(const Json& node, const std::string& path);
TilingConfig build_tiling(const Json& node, const std::string& path);
DecodeTiling build_decode(const Json& node, const std::string& path);

/// Codec kinds: {"kind":"file","path":...} loads a saved codec;
/// {"kind":"flat", "channels","images","side","jitter","train_seed"} fits on
/// seeded jittered constant-colour fields (exactly invertible on flat
/// patches); {"kind":"synth", "channels","zooms","side","max_patches",
/// "train_seed"} fits on procedural terrain imagery.
std::shared_ptr<LinearLatentCodec> build_codec(const Json& node,
                                               const std::string& path);

/// Denoiser kinds: "analytic" (per-pixel Gaussian prior with a constant or
/// sine mean pattern), "mixture" (isotropic Gaussian mixture with constant
/// component means), "consistency" (pins the trajectory to the encoded x4
/// upsample of the conditioning) and "linear" (a trained LinearDenoiser
/// loaded from a file).
std::shared_ptr<Denoiser> build_denoiser(
    const Json& node, const std::shared_ptr<const NoiseSchedule>& schedule,
    const std::shared_ptr<const LinearLatentCodec>& codec,
    const std::string& path);

StageConfig build_stage(const Json& node,
                        const std::shared_ptr<const LinearLatentCodec>& codec,
                        const std::string& path);

/// Cascade assembly from a resolved generate document (codec, decode, seed,
/// cascade.* sections).
CascadeConfig build_cascade(const Json& resolved);
WorldExtent build_extent(const Json& node, const std::string& path);

TileServerSpec build_server_spec(const Json& node, const std::string& path);
PyramidSpec build_pyramid_spec(const Json& node, const std::string& path);

}  // namespace geosynth
