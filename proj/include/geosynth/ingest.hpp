// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "geosynth/image.hpp"
#include "geosynth/pyramid.hpp"

namespace geosynth {

/// Remote tile endpoint. The template must contain exactly one placeholder
/// scheme: either "{quadkey}" or all three of "{z}", "{x}", "{y}". An
/// optional "{key}" placeholder is replaced with api_key.
struct TileServerSpec {
    std::string url_template;  // e.g. "http://host:1234/tiles/{z}/{x}/{y}.png"
    std::string api_key;
    int rate_limit = 10;  // max requests per second, > 0
    int retries = 2;      // extra attempts on transient failures (5xx, I/O)
};

/// Throws std::invalid_argument unless the template follows the placeholder
/// contract above.
void validate_server_spec(const TileServerSpec& spec);

/// One concentric multi-zoom stack request. Every zoom covers the same
/// ground center with the same pixel side, so each level doubles the
/// resolution of the one before.
struct PyramidSpec {
    double center_lat = 0.0;  // degrees, must lie within [-66, 66]
    double center_lon = 0.0;
    std::vector<int> zooms = {10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    int side = 2048;           // pixels, positive multiple of the tile side
    double jitter_m = 0.0;     // positional jitter radius, capped at 5 km
    uint64_t seed = 0;         // drives the jitter draw
};

/// Sliding-window rate limiter: at most `per_second` grants inside any
/// 1000 ms window. reserve() returns the timestamp (ms) at which the caller
/// may proceed — it never sleeps, so schedules are exact and testable under
/// a mock clock. Thread-safe.
class RateLimiter {
public:
    using Clock = std::function<int64_t()>;  // monotonic milliseconds

    /// Default clock: std::chrono::steady_clock.
    explicit RateLimiter(int per_second, Clock clock = {});

    /// Reserve the next request slot; returns its scheduled time (ms).
    int64_t reserve();

private:
    int per_second_;
    Clock clock_;
    std::mutex mu_;
    std::deque<int64_t> grants_;  // scheduled times of the last per_second_ grants
};

/// Availability classes of §-style probing: the maximum zoom a location
/// serves, bucketed at the three protocol zooms.
enum class AvailabilityClass { coarse13, mid19, high20, unknown };
const char* availability_name(AvailabilityClass c);

/// Outcome of one stack fetch. Partial failures are recorded, not thrown.
struct StackManifest {
    struct Level {
        int zoom = 0;
        int64_t origin_px = 0, origin_py = 0;  // global pixel of image (0,0)
        int fetched = 0;   // tiles downloaded this run
        int reused = 0;    // tiles already present in the store
        int failed = 0;    // tiles that never arrived
        std::vector<std::string> errors;  // one entry per failed tile
        ImageU8 image;     // assembled side x side stack level (RGB);
                           // empty when any tile of the level failed
    };
    double lat = 0.0, lon = 0.0;  // effective center after jitter
    std::vector<Level> levels;
    bool complete() const {
        for (const auto& l : levels)
            if (l.failed > 0) return false;
        return true;
    }
    /// JSON document: center, per-level counts, errors and image checksums.
    std::string to_json() const;
};

/// Fetch one concentric stack through the rate limiter, reusing tiles
/// already present in `store` (re-running completes the missing ones and
/// changes nothing else). Tiles land in `store`; assembled levels land in
/// the manifest. Throws std::invalid_argument for a bad spec (including
/// |center_lat| > 66); network failures are per-tile manifest entries.
/// `sleep_until` (optional) is called with each reserved timestamp; the
/// default sleeps on the real clock.
StackManifest fetch_pyramid(const TileServerSpec& server, const PyramidSpec& spec,
                            PyramidMap& store, RateLimiter& limiter,
                            const std::function<void(int64_t)>& sleep_until = {});

/// Probe the protocol zooms {13, 19, 20} at a location and classify the
/// maximum available zoom. Non-404 failures (after retries) make the result
/// unknown rather than guessing a class.
AvailabilityClass classify_availability(const TileServerSpec& server,
                                        double lat, double lon,
                                        RateLimiter& limiter);

/// Local tile server for tests and offline runs: serves deterministic
/// pattern tiles whose pixel at global position (gx, gy, zoom) is
///   R = (gx ^ gy) & 255, G = (gx + gy + z) & 255,
///   B = (3 gx + 5 gy + 7 z) & 255
/// under both "/tiles/{z}/{x}/{y}.png" and "/qk/{quadkey}.png" routes.
/// Zooms above max_zoom return 404, emulating the availability classes.
class MockTileServer {
public:
    /// Starts listening on 127.0.0.1 at a free port.
    explicit MockTileServer(int max_zoom = 20);
    ~MockTileServer();

    MockTileServer(const MockTileServer&) = delete;
    MockTileServer& operator=(const MockTileServer&) = delete;

    int port() const;
    std::string url_template(bool quadkey = false) const;
    /// Total requests served (including failures), for resumability tests.
    int64_t request_count() const;
    /// Make the next n tile requests fail with HTTP 500 (retry testing).
    void fail_next(int n);
    /// The exact tile payload the server would produce.
    static ImageU8 pattern_tile(const TileCoord& t, int tile_px = 256);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace geosynth
