// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geosynth/image.hpp"

namespace geosynth {

/// I/O failure (missing file, malformed stream, permissions, ...).
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Read an 8-bit PNG. Grey/palette/alpha inputs are expanded to RGB.
ImageU8 read_png(const std::filesystem::path& path);

/// Write an 8-bit PNG (1 = grey or 3 = RGB channels).
void write_png(const std::filesystem::path& path, const ImageU8& img);

/// In-memory variants (used by the tile client and the mock tile server).
std::vector<uint8_t> encode_png(const ImageU8& img);
ImageU8 decode_png(const uint8_t* bytes, size_t len);

}  // namespace geosynth
