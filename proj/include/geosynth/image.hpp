// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace geosynth {

/// Dense row-major raster with interleaved channels.
/// Pixel (x, y) channel c lives at data[(y * width + x) * channels + c].
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c, T fill = T(0))
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {
        if (w < 0 || h < 0 || c <= 0)
            throw std::invalid_argument("Image: non-positive dimensions");
    }

    size_t size() const { return data.size(); }
    size_t idx(int x, int y, int c = 0) const {
        return (static_cast<size_t>(y) * width + x) * channels + c;
    }
    T& at(int x, int y, int c = 0) { return data[idx(x, y, c)]; }
    const T& at(int x, int y, int c = 0) const { return data[idx(x, y, c)]; }

    T* row(int y) { return data.data() + static_cast<size_t>(y) * width * channels; }
    const T* row(int y) const {
        return data.data() + static_cast<size_t>(y) * width * channels;
    }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

using ImageF = Image<float>;
using ImageU8 = Image<uint8_t>;
using ImageD = Image<double>;

/// u8 -> float, values scaled to [0, 1].
ImageF dequantize(const ImageU8& img);

/// float -> u8: v * 255, rounded half away from zero, clamped to [0, 255].
ImageU8 quantize(const ImageF& img);

/// Copy-out a sub-rectangle. Throws if the rectangle leaves the image.
template <typename T>
Image<T> crop(const Image<T>& src, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > src.width ||
        y0 + h > src.height)
        throw std::invalid_argument("crop: rectangle out of bounds");
    Image<T> out(w, h, src.channels);
    const size_t rowbytes = static_cast<size_t>(w) * src.channels;
    for (int y = 0; y < h; ++y) {
        const T* s = src.row(y0 + y) + static_cast<size_t>(x0) * src.channels;
        std::copy(s, s + rowbytes, out.row(y));
    }
    return out;
}

/// Paste src into dst with src's top-left corner at (x0, y0).
template <typename T>
void paste(Image<T>& dst, const Image<T>& src, int x0, int y0) {
    if (src.channels != dst.channels)
        throw std::invalid_argument("paste: channel mismatch");
    if (x0 < 0 || y0 < 0 || x0 + src.width > dst.width ||
        y0 + src.height > dst.height)
        throw std::invalid_argument("paste: rectangle out of bounds");
    const size_t rowbytes = static_cast<size_t>(src.width) * src.channels;
    for (int y = 0; y < src.height; ++y) {
        const T* s = src.row(y);
        std::copy(s, s + rowbytes, dst.row(y0 + y) + static_cast<size_t>(x0) * dst.channels);
    }
}

/// Integer box filter over factor x factor blocks with round-half-up:
/// out = (sum + blocksize/2) / blocksize in exact integer arithmetic.
/// This is the reference downsample used to relate adjacent pyramid levels.
ImageU8 box_downsample_u8(const ImageU8& img, int factor);

/// Float box filter over factor x factor blocks (plain mean).
ImageF box_downsample(const ImageF& img, int factor);

/// Nearest-neighbour upsample by an integer factor.
template <typename T>
Image<T> upsample_nearest(const Image<T>& src, int factor) {
    if (factor < 1) throw std::invalid_argument("upsample_nearest: factor < 1");
    Image<T> out(src.width * factor, src.height * factor, src.channels);
    for (int y = 0; y < out.height; ++y) {
        const T* s = src.row(y / factor);
        T* d = out.row(y);
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < src.channels; ++c)
                d[static_cast<size_t>(x) * src.channels + c] =
                    s[static_cast<size_t>(x / factor) * src.channels + c];
    }
    return out;
}

/// Bilinear resize (align-corners = false, i.e. half-pixel centres).
ImageF resize_bilinear(const ImageF& src, int out_w, int out_h);

}  // namespace geosynth
