// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "matkit/errors.hpp"

namespace matkit {

size_t BinaryMask::foreground_count() const {
    return static_cast<size_t>(std::count_if(bitmap.begin(), bitmap.end(),
                                             [](uint8_t v) { return v != 0; }));
}

double BinaryMask::foreground_fraction() const {
    if (bitmap.empty()) return 0.0;
    return static_cast<double>(foreground_count()) / static_cast<double>(bitmap.size());
}

namespace {

cv::Mat to_bgr(const Image& img) {
    cv::Mat bgr(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        uint8_t* dst = bgr.ptr(y);
        const uint8_t* src = img.at(0, y);
        for (int x = 0; x < img.width; ++x, src += 3, dst += 3) {
            dst[0] = src[2];
            dst[1] = src[1];
            dst[2] = src[0];
        }
    }
    return bgr;
}

Image from_bgr(const cv::Mat& bgr) {
    Image img(bgr.cols, bgr.rows);
    for (int y = 0; y < bgr.rows; ++y) {
        const uint8_t* src = bgr.ptr(y);
        uint8_t* dst = img.at(0, y);
        for (int x = 0; x < bgr.cols; ++x, src += 3, dst += 3) {
            dst[0] = src[2];
            dst[1] = src[1];
            dst[2] = src[0];
        }
    }
    return img;
}

} // namespace

Image load_image(const std::filesystem::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot read image: " + path.string());
    return from_bgr(bgr);
}

void save_image(const std::filesystem::path& path, const Image& img) {
    if (img.empty()) throw PreconditionError("refusing to write empty image");
    if (!cv::imwrite(path.string(), to_bgr(img))) {
        throw IoError("cannot write image: " + path.string());
    }
}

std::vector<uint8_t> encode_png(const Image& img) {
    std::vector<uint8_t> buf;
    if (!cv::imencode(".png", to_bgr(img), buf)) throw IoError("png encode failed");
    return buf;
}

Image decode_image(const std::vector<uint8_t>& bytes) {
    cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot decode image bytes");
    return from_bgr(bgr);
}

namespace {

BinaryMask mask_from_gray(const cv::Mat& gray) {
    BinaryMask mask(gray.cols, gray.rows);
    for (int y = 0; y < gray.rows; ++y)
        for (int x = 0; x < gray.cols; ++x)
            mask.set(x, y, gray.at<uint8_t>(y, x) >= 128);
    return mask;
}

} // namespace

BinaryMask load_mask(const std::filesystem::path& path) {
    cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (gray.empty()) throw IoError("cannot read mask: " + path.string());
    return mask_from_gray(gray);
}

BinaryMask decode_mask(const std::vector<uint8_t>& bytes) {
    cv::Mat gray = cv::imdecode(bytes, cv::IMREAD_GRAYSCALE);
    if (gray.empty()) throw IoError("cannot decode mask bytes");
    return mask_from_gray(gray);
}

void save_mask(const std::filesystem::path& path, const BinaryMask& mask) {
    cv::Mat gray(mask.height, mask.width, CV_8UC1, const_cast<uint8_t*>(mask.bitmap.data()));
    if (!cv::imwrite(path.string(), gray)) {
        throw IoError("cannot write mask: " + path.string());
    }
}

std::vector<uint8_t> encode_png(const BinaryMask& mask) {
    cv::Mat gray(mask.height, mask.width, CV_8UC1, const_cast<uint8_t*>(mask.bitmap.data()));
    std::vector<uint8_t> buf;
    if (!cv::imencode(".png", gray, buf)) throw IoError("png encode failed");
    return buf;
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
    if (img.empty() || out_w <= 0 || out_h <= 0) throw PreconditionError("resize on empty image");
    Image out(out_w, out_h);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = std::clamp(fx - x0, 0.0, 1.0);
            const uint8_t* p00 = img.at(x0, y0);
            const uint8_t* p10 = img.at(x1, y0);
            const uint8_t* p01 = img.at(x0, y1);
            const uint8_t* p11 = img.at(x1, y1);
            uint8_t* dst = out.at(x, y);
            for (int c = 0; c < 3; ++c) {
                const double top = p00[c] * (1.0 - wx) + p10[c] * wx;
                const double bot = p01[c] * (1.0 - wx) + p11[c] * wx;
                dst[c] = static_cast<uint8_t>(std::lround(top * (1.0 - wy) + bot * wy));
            }
        }
    }
    return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int out_w, int out_h) {
    if (mask.bitmap.empty() || out_w <= 0 || out_h <= 0) {
        throw PreconditionError("resize on empty mask");
    }
    BinaryMask out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * mask.height / out_h), mask.height - 1);
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * mask.width / out_w), mask.width - 1);
            out.set(x, y, mask.at(sx, sy));
        }
    }
    return out;
}

} // namespace matkit
