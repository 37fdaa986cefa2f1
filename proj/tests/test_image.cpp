// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "geosynth/image.hpp"
#include "geosynth/rng.hpp"

using namespace geosynth;

TEST_SUITE("image") {

TEST_CASE("quantize round-trips every byte value") {
    ImageU8 u(16, 16, 1);
    for (int i = 0; i < 256; ++i) u.data[i] = static_cast<uint8_t>(i);
    const ImageU8 back = quantize(dequantize(u));
    CHECK(back.data == u.data);
}

TEST_CASE("integer box downsample rounds half up") {
    ImageU8 img(2, 2, 1);
    img.data = {0, 1, 1, 1};
    CHECK(box_downsample_u8(img, 2).data[0] == 1);  // (3+2)/4
    img.data = {0, 0, 0, 1};
    CHECK(box_downsample_u8(img, 2).data[0] == 0);  // (1+2)/4
    img.data = {255, 254, 254, 253};
    CHECK(box_downsample_u8(img, 2).data[0] == 254);
    CHECK_THROWS_AS(box_downsample_u8(ImageU8(3, 3, 1), 2), std::invalid_argument);
}

TEST_CASE("crop and paste round-trip") {
    ImageF img(12, 9, 2);
    Rng rng(1);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    const ImageF sub = crop(img, 3, 2, 6, 5);
    ImageF dst(12, 9, 2, 0.0f);
    paste(dst, sub, 3, 2);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 2; ++c) {
                CHECK(sub.at(x, y, c) == img.at(3 + x, 2 + y, c));
                CHECK(dst.at(3 + x, 2 + y, c) == img.at(3 + x, 2 + y, c));
            }
    CHECK_THROWS_AS(crop(img, 8, 0, 6, 5), std::invalid_argument);
    CHECK_THROWS_AS(paste(dst, sub, 8, 8), std::invalid_argument);
}

TEST_CASE("nearest upsample replicates blocks") {
    ImageF img(2, 1, 1);
    img.data = {1.0f, 2.0f};
    const ImageF up = upsample_nearest(img, 4);
    CHECK(up.width == 8);
    CHECK(up.height == 4);
    CHECK(up.at(0, 3, 0) == 1.0f);
    CHECK(up.at(3, 0, 0) == 1.0f);
    CHECK(up.at(4, 2, 0) == 2.0f);
}

TEST_CASE("bilinear resize at identity scale is exact") {
    ImageF img(7, 5, 3);
    Rng rng(2);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform(-4.0, 4.0));
    const ImageF same = resize_bilinear(img, 7, 5);
    CHECK(same.data == img.data);
    const ImageF half = resize_bilinear(img, 3, 2);
    CHECK(half.width == 3);
    CHECK(half.height == 2);
}

TEST_CASE("float box downsample averages blocks") {
    ImageF img(2, 2, 1);
    img.data = {1.0f, 2.0f, 3.0f, 6.0f};
    CHECK(box_downsample(img, 2).data[0] == 3.0f);
}

}  // TEST_SUITE
