// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geosynth/image.hpp"
#include "geosynth/png_io.hpp"

namespace geosynth {

/// Web Mercator tile address (slippy-map convention: x grows east, y grows
/// south, 2^zoom tiles per axis).
struct TileCoord {
    int zoom = 0;
    int64_t x = 0;
    int64_t y = 0;

    bool valid() const {
        return zoom >= 0 && zoom <= 30 && x >= 0 && y >= 0 &&
               x < (int64_t{1} << zoom) && y < (int64_t{1} << zoom);
    }
    auto operator<=>(const TileCoord&) const = default;
};

/// Metres per pixel of a 256-px Web Mercator tile at the given latitude.
/// Throws std::invalid_argument outside zoom [0, 30] or the Mercator
/// latitude range (|lat| <= 85.05112878).
double ground_resolution(int zoom, double latitude_deg);

/// Quadkey of a tile: one base-4 digit per zoom level, most significant
/// first; digit = 2*y_bit + x_bit. Throws for zoom 0 (empty key) or an
/// invalid tile.
std::string to_quadkey(const TileCoord& t);
TileCoord from_quadkey(const std::string& key);

/// The four children of t at zoom+1, in row-major order
/// (2x, 2y), (2x+1, 2y), (2x, 2y+1), (2x+1, 2y+1).
std::vector<TileCoord> children(const TileCoord& t);
TileCoord parent(const TileCoord& t);

/// Continuous global pixel position of (lon, lat) at a zoom level
/// (256-px tiles; tile index = floor(pixel / 256)).
void lonlat_to_global_pixel(int zoom, double lon_deg, double lat_deg,
                            double* px, double* py);

/// Multi-resolution tile store: PNGs under <root>/<zoom>/<x>/<y>.png plus a
/// generated manifest.json. Writes go through a temp file and an atomic
/// rename, so readers never observe partial tiles and concurrent writers
/// cannot corrupt the store. The constructor scans the tree, so a missing or
/// stale manifest heals on open.
class PyramidMap {
public:
    explicit PyramidMap(std::filesystem::path root, int tile_px = 256);
    ~PyramidMap();

    PyramidMap(const PyramidMap&) = delete;
    PyramidMap& operator=(const PyramidMap&) = delete;

    int tile_px() const { return tile_px_; }
    const std::filesystem::path& root() const { return root_; }

    /// Store one tile (must be tile_px x tile_px RGB).
    void put(const TileCoord& t, const ImageU8& img);
    /// Load a tile; nullopt if absent.
    std::optional<ImageU8> get(const TileCoord& t) const;
    bool contains(const TileCoord& t) const;
    size_t tile_count() const;
    /// All stored tiles, sorted by (zoom, y, x).
    std::vector<TileCoord> tiles() const;
    std::filesystem::path tile_path(const TileCoord& t) const;

    /// Rewrite manifest.json to match the in-memory index.
    void flush_manifest() const;

private:
    std::filesystem::path root_;
    int tile_px_;
    mutable std::mutex mu_;
    std::set<TileCoord> index_;
};

}  // namespace geosynth
