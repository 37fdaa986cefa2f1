// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/image.hpp"

#include <cmath>

#include "geosynth/kernels.hpp"

namespace geosynth {

ImageF dequantize(const ImageU8& img) {
    ImageF out(img.width, img.height, img.channels);
    kern::ops().dequantize_u8(img.data.data(), out.data.data(), img.size());
    return out;
}

ImageU8 quantize(const ImageF& img) {
    ImageU8 out(img.width, img.height, img.channels);
    kern::ops().quantize_u8(img.data.data(), out.data.data(), img.size());
    return out;
}

ImageU8 box_downsample_u8(const ImageU8& img, int factor) {
    if (factor < 1 || img.width % factor || img.height % factor)
        throw std::invalid_argument("box_downsample_u8: size not divisible by factor");
    ImageU8 out(img.width / factor, img.height / factor, img.channels);
    const unsigned block = static_cast<unsigned>(factor) * factor;
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                unsigned s = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        s += img.at(x * factor + dx, y * factor + dy, c);
                out.at(x, y, c) = static_cast<uint8_t>((s + block / 2) / block);
            }
    return out;
}

ImageF box_downsample(const ImageF& img, int factor) {
    if (factor < 1 || img.width % factor || img.height % factor)
        throw std::invalid_argument("box_downsample: size not divisible by factor");
    ImageF out(img.width / factor, img.height / factor, img.channels);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        s += img.at(x * factor + dx, y * factor + dy, c);
                out.at(x, y, c) = static_cast<float>(s * inv);
            }
    return out;
}

ImageF resize_bilinear(const ImageF& src, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0)
        throw std::invalid_argument("resize_bilinear: non-positive output size");
    ImageF out(out_w, out_h, src.channels);
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        int y1 = y0 + 1;
        y0 = y0 < 0 ? 0 : (y0 >= src.height ? src.height - 1 : y0);
        y1 = y1 < 0 ? 0 : (y1 >= src.height ? src.height - 1 : y1);
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            int x1 = x0 + 1;
            x0 = x0 < 0 ? 0 : (x0 >= src.width ? src.width - 1 : x0);
            x1 = x1 < 0 ? 0 : (x1 >= src.width ? src.width - 1 : x1);
            for (int c = 0; c < src.channels; ++c) {
                const double v00 = src.at(x0, y0, c), v10 = src.at(x1, y0, c);
                const double v01 = src.at(x0, y1, c), v11 = src.at(x1, y1, c);
                const double top = v00 + (v10 - v00) * wx;
                const double bot = v01 + (v11 - v01) * wx;
                out.at(x, y, c) = static_cast<float>(top + (bot - top) * wy);
            }
        }
    }
    return out;
}

}  // namespace geosynth
