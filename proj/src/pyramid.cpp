// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/pyramid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <tuple>

#include "json.hpp"

namespace geosynth {

namespace {

constexpr double kEarthRadiusM = 6378137.0;
// Metres per pixel at zoom 0 for 256-px tiles: 2*pi*R / 256.
constexpr double kZoom0Resolution = 2.0 * 3.14159265358979323846 * kEarthRadiusM / 256.0;
// Web Mercator covers latitudes up to atan(sinh(pi)).
constexpr double kMaxLatitude = 85.05112878;

void require_valid(const TileCoord& t, const char* who) {
    if (!t.valid())
        throw std::invalid_argument(std::string(who) + ": invalid tile (" +
                                    std::to_string(t.zoom) + "/" +
                                    std::to_string(t.x) + "/" +
                                    std::to_string(t.y) + ")");
}

std::atomic<uint64_t> g_tmp_counter{0};

}  // namespace

double ground_resolution(int zoom, double latitude_deg) {
    if (zoom < 0 || zoom > 30)
        throw std::invalid_argument("ground_resolution: zoom out of range [0, 30]");
    if (!(latitude_deg >= -kMaxLatitude && latitude_deg <= kMaxLatitude))
        throw std::invalid_argument("ground_resolution: latitude outside Mercator range");
    const double lat_rad = latitude_deg * 3.14159265358979323846 / 180.0;
    return kZoom0Resolution * std::cos(lat_rad) / static_cast<double>(int64_t{1} << zoom);
}

std::string to_quadkey(const TileCoord& t) {
    require_valid(t, "to_quadkey");
    if (t.zoom == 0)
        throw std::invalid_argument("to_quadkey: zoom 0 has an empty key");
    std::string key;
    key.reserve(t.zoom);
    for (int k = t.zoom - 1; k >= 0; --k) {
        const int digit = static_cast<int>(((t.y >> k) & 1) * 2 + ((t.x >> k) & 1));
        key.push_back(static_cast<char>('0' + digit));
    }
    return key;
}

TileCoord from_quadkey(const std::string& key) {
    if (key.empty() || key.size() > 30)
        throw std::invalid_argument("from_quadkey: key length out of range");
    TileCoord t{static_cast<int>(key.size()), 0, 0};
    for (const char ch : key) {
        if (ch < '0' || ch > '3')
            throw std::invalid_argument("from_quadkey: invalid digit");
        const int digit = ch - '0';
        t.x = (t.x << 1) | (digit & 1);
        t.y = (t.y << 1) | (digit >> 1);
    }
    return t;
}

std::vector<TileCoord> children(const TileCoord& t) {
    require_valid(t, "children");
    if (t.zoom >= 30)
        throw std::invalid_argument("children: zoom 30 is the deepest level");
    return {{t.zoom + 1, 2 * t.x, 2 * t.y},
            {t.zoom + 1, 2 * t.x + 1, 2 * t.y},
            {t.zoom + 1, 2 * t.x, 2 * t.y + 1},
            {t.zoom + 1, 2 * t.x + 1, 2 * t.y + 1}};
}

TileCoord parent(const TileCoord& t) {
    require_valid(t, "parent");
    if (t.zoom == 0) throw std::invalid_argument("parent: zoom 0 has no parent");
    return {t.zoom - 1, t.x / 2, t.y / 2};
}

void lonlat_to_global_pixel(int zoom, double lon_deg, double lat_deg,
                            double* px, double* py) {
    if (zoom < 0 || zoom > 30)
        throw std::invalid_argument("lonlat_to_global_pixel: zoom out of range");
    if (!(lat_deg >= -kMaxLatitude && lat_deg <= kMaxLatitude))
        throw std::invalid_argument("lonlat_to_global_pixel: latitude outside Mercator range");
    if (!(lon_deg >= -180.0 && lon_deg <= 180.0))
        throw std::invalid_argument("lonlat_to_global_pixel: longitude outside [-180, 180]");
    const double pi = 3.14159265358979323846;
    const double map_px = 256.0 * static_cast<double>(int64_t{1} << zoom);
    const double lat_rad = lat_deg * pi / 180.0;
    *px = (lon_deg + 180.0) / 360.0 * map_px;
    const double siny = std::sin(lat_rad);
    *py = (0.5 - std::log((1.0 + siny) / (1.0 - siny)) / (4.0 * pi)) * map_px;
}

PyramidMap::PyramidMap(std::filesystem::path root, int tile_px)
    : root_(std::move(root)), tile_px_(tile_px) {
    if (tile_px_ <= 0)
        throw std::invalid_argument("PyramidMap: tile_px must be positive");
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw io_error("PyramidMap: cannot create " + root_.string());

    // The directory tree is authoritative; the manifest is regenerated from
    // it, so a missing or stale manifest heals here.
    for (const auto& zoom_dir : std::filesystem::directory_iterator(root_)) {
        if (!zoom_dir.is_directory()) continue;
        int zoom;
        try {
            zoom = std::stoi(zoom_dir.path().filename().string());
        } catch (...) {
            continue;
        }
        for (const auto& x_dir : std::filesystem::directory_iterator(zoom_dir)) {
            if (!x_dir.is_directory()) continue;
            int64_t x;
            try {
                x = std::stoll(x_dir.path().filename().string());
            } catch (...) {
                continue;
            }
            for (const auto& f : std::filesystem::directory_iterator(x_dir)) {
                if (!f.is_regular_file() || f.path().extension() != ".png") continue;
                try {
                    const TileCoord t{zoom, x, std::stoll(f.path().stem().string())};
                    if (t.valid()) index_.insert(t);
                } catch (...) {
                    continue;
                }
            }
        }
    }
    flush_manifest();
}

PyramidMap::~PyramidMap() {
    try {
        flush_manifest();
    } catch (...) {
        // Destructor: the manifest is regenerable, losing it is harmless.
    }
}

std::filesystem::path PyramidMap::tile_path(const TileCoord& t) const {
    return root_ / std::to_string(t.zoom) / std::to_string(t.x) /
           (std::to_string(t.y) + ".png");
}

void PyramidMap::put(const TileCoord& t, const ImageU8& img) {
    require_valid(t, "PyramidMap::put");
    if (img.width != tile_px_ || img.height != tile_px_ || img.channels != 3)
        throw std::invalid_argument("PyramidMap::put: tile must be " +
                                    std::to_string(tile_px_) + "x" +
                                    std::to_string(tile_px_) + " RGB");
    const auto path = tile_path(t);
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw io_error("PyramidMap::put: cannot create " +
                           path.parent_path().string());
    // Unique temp name per write, then an atomic rename into place.
    const auto tmp = path.parent_path() /
                     ("." + path.filename().string() + ".tmp" +
                      std::to_string(g_tmp_counter.fetch_add(1)));
    write_png(tmp, img);
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw io_error("PyramidMap::put: rename failed for " + path.string());
    }
    std::lock_guard lock(mu_);
    index_.insert(t);
}

std::optional<ImageU8> PyramidMap::get(const TileCoord& t) const {
    require_valid(t, "PyramidMap::get");
    {
        std::lock_guard lock(mu_);
        if (!index_.count(t)) return std::nullopt;
    }
    return read_png(tile_path(t));
}

bool PyramidMap::contains(const TileCoord& t) const {
    std::lock_guard lock(mu_);
    return index_.count(t) > 0;
}

size_t PyramidMap::tile_count() const {
    std::lock_guard lock(mu_);
    return index_.size();
}

std::vector<TileCoord> PyramidMap::tiles() const {
    std::lock_guard lock(mu_);
    std::vector<TileCoord> out(index_.begin(), index_.end());
    std::sort(out.begin(), out.end(), [](const TileCoord& a, const TileCoord& b) {
        return std::tie(a.zoom, a.y, a.x) < std::tie(b.zoom, b.y, b.x);
    });
    return out;
}

void PyramidMap::flush_manifest() const {
    nlohmann::json zooms = nlohmann::json::object();
    {
        std::lock_guard lock(mu_);
        for (const auto& t : index_) {
            auto& arr = zooms[std::to_string(t.zoom)];
            arr.push_back({t.x, t.y});
        }
    }
    nlohmann::json manifest = {
        {"format", "geosynth-pyramid"},
        {"version", 1},
        {"tile_px", tile_px_},
        {"zooms", zooms},
    };
    const auto path = root_ / "manifest.json";
    const auto tmp = root_ / (".manifest.json.tmp" +
                              std::to_string(g_tmp_counter.fetch_add(1)));
    {
        std::ofstream out(tmp);
        if (!out) throw io_error("flush_manifest: cannot write " + tmp.string());
        out << manifest.dump(1) << "\n";
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error("flush_manifest: rename failed");
}

}  // namespace geosynth
