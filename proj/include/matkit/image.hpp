// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace matkit {

/// 8-bit RGB image, row-major interleaved.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels; // size = width * height * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

    uint8_t* at(int x, int y) { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }
    const uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
    bool empty() const { return pixels.empty(); }
};

/// Per-pixel boolean region mask. Stored as {0, 255} so it round-trips
/// losslessly through a single-channel PNG.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bitmap; // values 0 or 255

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bitmap(static_cast<size_t>(w) * h, 0) {}

    bool at(int x, int y) const { return bitmap[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool fg) {
        bitmap[static_cast<size_t>(y) * width + x] = fg ? 255 : 0;
    }
    size_t foreground_count() const;
    double foreground_fraction() const;
    bool empty_mask() const { return foreground_count() == 0; }
};

Image load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image& img);
std::vector<uint8_t> encode_png(const Image& img);
Image decode_image(const std::vector<uint8_t>& bytes);

BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const BinaryMask& mask);
std::vector<uint8_t> encode_png(const BinaryMask& mask);
BinaryMask decode_mask(const std::vector<uint8_t>& bytes);

/// Bilinear resize; used to bring images to an encoder's native resolution.
Image resize_bilinear(const Image& img, int out_w, int out_h);

/// Nearest-neighbour resize; keeps masks strictly binary.
BinaryMask resize_nearest(const BinaryMask& mask, int out_w, int out_h);

} // namespace matkit
