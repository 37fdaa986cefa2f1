// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#include "geosynth/ingest.hpp"

#include <zlib.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "geosynth/png_io.hpp"
#include "geosynth/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace geosynth {

namespace {

constexpr double kLatClampDeg = 66.0;
constexpr double kMaxJitterM = 5000.0;
constexpr double kMetersPerDegree = 111320.0;
constexpr double kPi = 3.14159265358979323846;

int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

bool contains(const std::string& s, const std::string& needle) {
    return s.find(needle) != std::string::npos;
}

std::string replace_all(std::string s, const std::string& from,
                        const std::string& to) {
    for (size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos;
         pos += to.size())
        s.replace(pos, from.size(), to);
    return s;
}

/// Split "http://host:port/path..." into the client base and the path.
void split_url(const std::string& url, std::string* base, std::string* path) {
    const size_t scheme = url.find("://");
    if (scheme == std::string::npos)
        throw std::invalid_argument("tile URL must start with http://");
    const size_t slash = url.find('/', scheme + 3);
    if (slash == std::string::npos)
        throw std::invalid_argument("tile URL has no path component");
    *base = url.substr(0, slash);
    *path = url.substr(slash);
}

std::string url_for(const TileServerSpec& spec, const TileCoord& t) {
    std::string url = spec.url_template;
    if (contains(url, "{quadkey}")) {
        url = replace_all(url, "{quadkey}", to_quadkey(t));
    } else {
        url = replace_all(url, "{z}", std::to_string(t.zoom));
        url = replace_all(url, "{x}", std::to_string(t.x));
        url = replace_all(url, "{y}", std::to_string(t.y));
    }
    return replace_all(url, "{key}", spec.api_key);
}

enum class FetchStatus { ok, missing, error };

struct FetchResult {
    FetchStatus status = FetchStatus::error;
    ImageU8 image;
    std::string error;
};

/// One tile request with retries on transient failures. 404 is a definite
/// "tile does not exist" and is never retried.
FetchResult fetch_tile(const TileServerSpec& spec, const TileCoord& t,
                       RateLimiter& limiter,
                       const std::function<void(int64_t)>& sleep_until) {
    std::string base, path;
    split_url(url_for(spec, t), &base, &path);
    FetchResult out;
    for (int attempt = 0; attempt <= spec.retries; ++attempt) {
        sleep_until(limiter.reserve());
        httplib::Client client(base);
        auto res = client.Get(path);
        if (!res) {
            out.error = "connection failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 404) {
            out.status = FetchStatus::missing;
            out.error = "404";
            return out;
        }
        if (res->status >= 500) {  // transient server error
            out.error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {  // permanent client error
            out.error = "HTTP " + std::to_string(res->status);
            return out;
        }
        try {
            out.image = decode_png(
                reinterpret_cast<const uint8_t*>(res->body.data()),
                res->body.size());
        } catch (const std::exception& e) {
            out.error = std::string("bad tile payload: ") + e.what();
            continue;
        }
        out.status = FetchStatus::ok;
        return out;
    }
    return out;
}

void default_sleep_until(int64_t ts) {
    const int64_t now = steady_ms();
    if (ts > now) std::this_thread::sleep_for(std::chrono::milliseconds(ts - now));
}

void validate_pyramid_spec(const PyramidSpec& spec, int tile_px) {
    if (std::abs(spec.center_lat) > kLatClampDeg)
        throw std::invalid_argument(
            "fetch_pyramid: center latitude outside the +-66 degree clamp");
    if (spec.zooms.empty())
        throw std::invalid_argument("fetch_pyramid: no zooms requested");
    for (size_t i = 0; i < spec.zooms.size(); ++i) {
        if (spec.zooms[i] < 1 || spec.zooms[i] > 30)
            throw std::invalid_argument("fetch_pyramid: zoom outside [1, 30]");
        if (i > 0 && spec.zooms[i] != spec.zooms[i - 1] + 1)
            throw std::invalid_argument(
                "fetch_pyramid: zooms must be contiguous ascending");
    }
    if (spec.side <= 0 || spec.side % tile_px != 0)
        throw std::invalid_argument(
            "fetch_pyramid: side must be a positive multiple of the tile side");
    if (spec.jitter_m < 0)
        throw std::invalid_argument("fetch_pyramid: negative jitter radius");
}

}  // namespace

void validate_server_spec(const TileServerSpec& spec) {
    const bool qk = contains(spec.url_template, "{quadkey}");
    const bool zxy = contains(spec.url_template, "{z}") &&
                     contains(spec.url_template, "{x}") &&
                     contains(spec.url_template, "{y}");
    if (qk == zxy)
        throw std::invalid_argument(
            "tile URL template needs exactly one placeholder scheme: "
            "{quadkey} or {z}/{x}/{y}");
    if (spec.rate_limit <= 0)
        throw std::invalid_argument("rate_limit must be positive");
    if (spec.retries < 0) throw std::invalid_argument("retries must be >= 0");
}

RateLimiter::RateLimiter(int per_second, Clock clock)
    : per_second_(per_second), clock_(std::move(clock)) {
    if (per_second_ <= 0)
        throw std::invalid_argument("RateLimiter: per_second must be positive");
    if (!clock_) clock_ = steady_ms;
}

int64_t RateLimiter::reserve() {
    std::lock_guard<std::mutex> lock(mu_);
    const int64_t now = clock_();
    int64_t at = now;
    if (static_cast<int>(grants_.size()) == per_second_) {
        // The new grant may start once the oldest of the last per_second_
        // grants has left the 1-second window.
        at = std::max(now, grants_.front() + 1000);
        grants_.pop_front();
    }
    grants_.push_back(at);
    return at;
}

const char* availability_name(AvailabilityClass c) {
    switch (c) {
        case AvailabilityClass::coarse13: return "coarse13";
        case AvailabilityClass::mid19: return "mid19";
        case AvailabilityClass::high20: return "high20";
        case AvailabilityClass::unknown: return "unknown";
    }
    return "unknown";
}

std::string StackManifest::to_json() const {
    nlohmann::json doc;
    doc["lat"] = lat;
    doc["lon"] = lon;
    doc["complete"] = complete();
    doc["levels"] = nlohmann::json::array();
    for (const Level& l : levels) {
        nlohmann::json jl;
        jl["zoom"] = l.zoom;
        jl["origin_px"] = l.origin_px;
        jl["origin_py"] = l.origin_py;
        jl["fetched"] = l.fetched;
        jl["reused"] = l.reused;
        jl["failed"] = l.failed;
        jl["errors"] = l.errors;
        if (!l.image.data.empty()) {
            const uLong crc = crc32(
                0L, reinterpret_cast<const Bytef*>(l.image.data.data()),
                static_cast<uInt>(l.image.data.size()));
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
            jl["crc32"] = buf;
        }
        doc["levels"].push_back(std::move(jl));
    }
    return doc.dump(2);
}

StackManifest fetch_pyramid(const TileServerSpec& server, const PyramidSpec& spec,
                            PyramidMap& store, RateLimiter& limiter,
                            const std::function<void(int64_t)>& sleep_until) {
    validate_server_spec(server);
    validate_pyramid_spec(spec, store.tile_px());
    const auto sleeper =
        sleep_until ? sleep_until : std::function<void(int64_t)>(default_sleep_until);

    double lat = spec.center_lat, lon = spec.center_lon;
    if (spec.jitter_m > 0.0) {
        Rng rng(stable_seed(spec.seed, "ingest-jitter"));
        const double radius = std::min(spec.jitter_m, kMaxJitterM);
        const double angle = rng.uniform(0.0, 2.0 * kPi);
        const double dist = radius * std::sqrt(rng.uniform());
        lat += dist * std::cos(angle) / kMetersPerDegree;
        lon += dist * std::sin(angle) /
               (kMetersPerDegree * std::cos(lat * kPi / 180.0));
        lat = std::clamp(lat, -kLatClampDeg, kLatClampDeg);
        if (lon > 180.0) lon -= 360.0;
        if (lon < -180.0) lon += 360.0;
    }

    const int tile_px = store.tile_px();
    StackManifest manifest;
    manifest.lat = lat;
    manifest.lon = lon;
    for (const int zoom : spec.zooms) {
        StackManifest::Level level;
        level.zoom = zoom;
        double px = 0, py = 0;
        lonlat_to_global_pixel(zoom, lon, lat, &px, &py);
        const int64_t world = int64_t{tile_px} << zoom;
        level.origin_px = std::clamp<int64_t>(std::llround(px) - spec.side / 2,
                                              0, world - spec.side);
        level.origin_py = std::clamp<int64_t>(std::llround(py) - spec.side / 2,
                                              0, world - spec.side);

        ImageU8 mosaic(spec.side, spec.side, 3);
        const int64_t tx0 = level.origin_px / tile_px;
        const int64_t ty0 = level.origin_py / tile_px;
        const int64_t tx1 = (level.origin_px + spec.side - 1) / tile_px;
        const int64_t ty1 = (level.origin_py + spec.side - 1) / tile_px;
        for (int64_t ty = ty0; ty <= ty1; ++ty) {
            for (int64_t tx = tx0; tx <= tx1; ++tx) {
                const TileCoord t{zoom, tx, ty};
                ImageU8 tile;
                if (auto present = store.get(t)) {
                    tile = std::move(*present);
                    ++level.reused;
                } else {
                    FetchResult r = fetch_tile(server, t, limiter, sleeper);
                    if (r.status != FetchStatus::ok) {
                        ++level.failed;
                        level.errors.push_back("z" + std::to_string(zoom) + "/" +
                                               std::to_string(tx) + "/" +
                                               std::to_string(ty) + ": " + r.error);
                        continue;
                    }
                    if (r.image.width != tile_px || r.image.height != tile_px ||
                        r.image.channels != 3) {
                        ++level.failed;
                        level.errors.push_back("z" + std::to_string(zoom) + "/" +
                                               std::to_string(tx) + "/" +
                                               std::to_string(ty) +
                                               ": wrong tile dimensions");
                        continue;
                    }
                    store.put(t, r.image);
                    tile = std::move(r.image);
                    ++level.fetched;
                }
                // Intersect the tile with the stack window and paste.
                const int64_t gx0 = std::max(tx * tile_px, level.origin_px);
                const int64_t gy0 = std::max(ty * tile_px, level.origin_py);
                const int64_t gx1 =
                    std::min((tx + 1) * tile_px, level.origin_px + spec.side);
                const int64_t gy1 =
                    std::min((ty + 1) * tile_px, level.origin_py + spec.side);
                const ImageU8 part = crop(
                    tile, static_cast<int>(gx0 - tx * tile_px),
                    static_cast<int>(gy0 - ty * tile_px),
                    static_cast<int>(gx1 - gx0), static_cast<int>(gy1 - gy0));
                paste(mosaic, part, static_cast<int>(gx0 - level.origin_px),
                      static_cast<int>(gy0 - level.origin_py));
            }
        }
        if (level.failed == 0) level.image = std::move(mosaic);
        manifest.levels.push_back(std::move(level));
    }
    store.flush_manifest();
    return manifest;
}

AvailabilityClass classify_availability(const TileServerSpec& server, double lat,
                                        double lon, RateLimiter& limiter) {
    validate_server_spec(server);
    if (std::abs(lat) > kLatClampDeg)
        throw std::invalid_argument(
            "classify_availability: latitude outside the +-66 degree clamp");
    const std::function<void(int64_t)> sleeper(default_sleep_until);
    // Probe finest first: the first zoom that answers fixes the class.
    const struct {
        int zoom;
        AvailabilityClass cls;
    } probes[] = {{20, AvailabilityClass::high20},
                  {19, AvailabilityClass::mid19},
                  {13, AvailabilityClass::coarse13}};
    for (const auto& probe : probes) {
        double px = 0, py = 0;
        lonlat_to_global_pixel(probe.zoom, lon, lat, &px, &py);
        const TileCoord t{probe.zoom, static_cast<int64_t>(px) / 256,
                          static_cast<int64_t>(py) / 256};
        const FetchResult r = fetch_tile(server, t, limiter, sleeper);
        if (r.status == FetchStatus::ok) return probe.cls;
        if (r.status != FetchStatus::missing)
            return AvailabilityClass::unknown;  // ambiguous, do not guess
    }
    return AvailabilityClass::unknown;
}

struct MockTileServer::Impl {
    httplib::Server server;
    std::thread worker;
    std::atomic<int64_t> requests{0};
    std::atomic<int> fail_remaining{0};
    int max_zoom = 20;
    int port = 0;
};

ImageU8 MockTileServer::pattern_tile(const TileCoord& t, int tile_px) {
    ImageU8 img(tile_px, tile_px, 3);
    for (int j = 0; j < tile_px; ++j) {
        const int64_t gy = t.y * tile_px + j;
        for (int i = 0; i < tile_px; ++i) {
            const int64_t gx = t.x * tile_px + i;
            img.at(i, j, 0) = static_cast<uint8_t>((gx ^ gy) & 255);
            img.at(i, j, 1) = static_cast<uint8_t>((gx + gy + t.zoom) & 255);
            img.at(i, j, 2) = static_cast<uint8_t>((3 * gx + 5 * gy + 7 * t.zoom) & 255);
        }
    }
    return img;
}

MockTileServer::MockTileServer(int max_zoom) : impl_(std::make_unique<Impl>()) {
    impl_->max_zoom = max_zoom;
    auto respond = [this](const TileCoord& t, httplib::Response& res) {
        ++impl_->requests;
        int expected = impl_->fail_remaining.load();
        while (expected > 0 && !impl_->fail_remaining.compare_exchange_weak(
                                   expected, expected - 1)) {
        }
        if (expected > 0) {
            res.status = 500;
            return;
        }
        if (!t.valid() || t.zoom > impl_->max_zoom) {
            res.status = 404;
            return;
        }
        const std::vector<uint8_t> png = encode_png(pattern_tile(t));
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    };
    impl_->server.Get(R"(/tiles/(\d+)/(\d+)/(\d+)\.png)",
                      [respond](const httplib::Request& req, httplib::Response& res) {
                          TileCoord t;
                          t.zoom = std::stoi(req.matches[1]);
                          t.x = std::stoll(req.matches[2]);
                          t.y = std::stoll(req.matches[3]);
                          respond(t, res);
                      });
    impl_->server.Get(R"(/qk/([0-3]+)\.png)",
                      [respond](const httplib::Request& req, httplib::Response& res) {
                          respond(from_quadkey(req.matches[1]), res);
                      });
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    if (impl_->port <= 0)
        throw std::runtime_error("MockTileServer: could not bind a port");
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockTileServer::~MockTileServer() {
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

int MockTileServer::port() const { return impl_->port; }

std::string MockTileServer::url_template(bool quadkey) const {
    const std::string base = "http://127.0.0.1:" + std::to_string(impl_->port);
    return quadkey ? base + "/qk/{quadkey}.png" : base + "/tiles/{z}/{x}/{y}.png";
}

int64_t MockTileServer::request_count() const { return impl_->requests.load(); }

void MockTileServer::fail_next(int n) { impl_->fail_remaining.store(n); }

}  // namespace geosynth
