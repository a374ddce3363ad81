// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/mocks.hpp"

#include <algorithm>
#include <cmath>

#include "matkit/errors.hpp"
#include "matkit/hashing.hpp"
#include "matkit/rng.hpp"

namespace matkit {

namespace {

// 6-dim patch statistics shared by the mock encoders: channel means and
// channel mean-absolute-deviations ("texture energy"), all in [0, 1].
void region_stats(const Image& img, int x0, int y0, int w, int h, double* out6) {
    double mean[3] = {0, 0, 0};
    const double n = static_cast<double>(w) * h;
    for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
            const uint8_t* p = img.at(x, y);
            for (int c = 0; c < 3; ++c) mean[c] += p[c];
        }
    }
    for (int c = 0; c < 3; ++c) mean[c] /= n * 255.0;
    double energy[3] = {0, 0, 0};
    for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
            const uint8_t* p = img.at(x, y);
            for (int c = 0; c < 3; ++c) energy[c] += std::abs(p[c] / 255.0 - mean[c]);
        }
    }
    for (int c = 0; c < 3; ++c) {
        out6[c] = mean[c];
        out6[3 + c] = energy[c] / n;
    }
}

Eigen::MatrixXd seeded_projection(int dim, uint64_t seed) {
    SplitMix64 rng(hash_combine(seed, 0x9504f0ULL));
    Eigen::MatrixXd p(dim, 6);
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < 6; ++c) p(r, c) = rng.gaussian();
    }
    return p / std::sqrt(6.0);
}

void hsv_to_rgb(double h, double s, double v, uint8_t* rgb) {
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    rgb[0] = static_cast<uint8_t>(std::lround((r + m) * 255.0));
    rgb[1] = static_cast<uint8_t>(std::lround((g + m) * 255.0));
    rgb[2] = static_cast<uint8_t>(std::lround((b + m) * 255.0));
}

const std::vector<std::string>& object_vocabulary() {
    static const std::vector<std::string> kObjects = {
        "vase",  "bucket", "chair", "panel",  "bowl", "jacket",   "tile",  "block",
        "sheet", "lamp",   "boot",  "pitcher", "tray", "figurine", "crate", "bench"};
    return kObjects;
}

} // namespace

std::vector<std::pair<std::string, std::string>> MockTripletProposer::propose(
    const std::string& material, const std::vector<std::string>& sub_materials, size_t count) {
    const auto& objects = object_vocabulary();
    const uint64_t offset = hash_combine(seed_, fnv1a64(material));
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        const std::string& object = objects[(offset + i) % objects.size()];
        const std::string qualifier =
            sub_materials.empty() ? "plain" : sub_materials[i % sub_materials.size()];
        out.emplace_back(object, qualifier);
    }
    return out;
}

MockGenerationBackend::MockGenerationBackend(std::vector<std::string> palette_words,
                                             double object_extent)
    : object_extent_(object_extent) {
    palette_words_.reserve(palette_words.size());
    for (const auto& w : palette_words) palette_words_.push_back(normalize_token(w));
}

Image MockGenerationBackend::generate(const std::string& prompt, int64_t seed, int width,
                                      int height) {
    if (width <= 0 || height <= 0) throw BackendError("mock generator: bad resolution");
    const std::string norm_prompt = normalize_token(prompt);

    uint8_t object_rgb[3];
    bool matched = false;
    for (size_t i = 0; i < palette_words_.size(); ++i) {
        if (norm_prompt.find(palette_words_[i]) != std::string::npos) {
            // evenly spaced hues, one per palette word
            const double hue = 360.0 * static_cast<double>(i) /
                               static_cast<double>(palette_words_.size());
            hsv_to_rgb(hue, 0.75, 0.85, object_rgb);
            matched = true;
            break;
        }
    }
    if (!matched) {
        SplitMix64 color_rng(fnv1a64(norm_prompt));
        hsv_to_rgb(color_rng.uniform(0.0, 360.0), 0.7, 0.8, object_rgb);
    }

    SplitMix64 rng(hash_combine(fnv1a64(prompt), static_cast<uint64_t>(seed)));
    Image img(width, height);
    const int ox0 = static_cast<int>(width * (1.0 - object_extent_) / 2.0);
    const int oy0 = static_cast<int>(height * (1.0 - object_extent_) / 2.0);
    const int ox1 = width - ox0;
    const int oy1 = height - oy0;
    const double stripes = 2.0 + static_cast<double>(rng.below(6)); // per-prompt texture period
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            uint8_t* p = img.at(x, y);
            const bool inside = x >= ox0 && x < ox1 && y >= oy0 && y < oy1;
            const double wobble = 6.0 * std::sin(stripes * 2.0 * M_PI * x / width);
            for (int c = 0; c < 3; ++c) {
                const double base = inside ? object_rgb[c] : 96.0;
                const double noise = rng.uniform(-10.0, 10.0);
                p[c] = static_cast<uint8_t>(std::clamp(base + wobble + noise, 0.0, 255.0));
            }
        }
    }
    return img;
}

BinaryMask MockSegmentationBackend::segment(const Image& image, const std::string& phrase) {
    (void)phrase;
    BinaryMask mask(image.width, image.height);
    if (box_scale_ <= 0.0) return mask;
    const double scale = std::min(box_scale_, 1.0);
    const int bw = static_cast<int>(std::lround(image.width * scale));
    const int bh = static_cast<int>(std::lround(image.height * scale));
    const int x0 = (image.width - bw) / 2;
    const int y0 = (image.height - bh) / 2;
    for (int y = y0; y < y0 + bh; ++y) {
        for (int x = x0; x < x0 + bw; ++x) mask.set(x, y, true);
    }
    return mask;
}

MockVisionEncoder::MockVisionEncoder(int resolution, int grid, int dim, uint64_t seed)
    : resolution_(resolution), grid_(grid), dim_(dim),
      projection_(seeded_projection(dim, hash_combine(seed, 0xd1a0ULL))) {
    if (resolution_ % grid_ != 0) {
        throw ConfigError("mock vision encoder: resolution must be a multiple of the grid size");
    }
}

PatchGrid MockVisionEncoder::encode(const Image& image) {
    if (image.width != resolution_ || image.height != resolution_) {
        throw PreconditionError("mock vision encoder: wrong input resolution");
    }
    const int cell = resolution_ / grid_;
    PatchGrid grid;
    grid.grid = grid_;
    grid.dim = dim_;
    grid.features.resize(static_cast<Eigen::Index>(grid_) * grid_, dim_);
    Eigen::VectorXd stats(6);
    for (int i = 0; i < grid_; ++i) {
        for (int j = 0; j < grid_; ++j) {
            region_stats(image, j * cell, i * cell, cell, cell, stats.data());
            grid.features.row(static_cast<Eigen::Index>(i) * grid_ + j) =
                (projection_ * stats).transpose();
        }
    }
    return grid;
}

TextEmbedding MockTextEncoder::encode(const std::string& text) {
    SplitMix64 rng(hash_combine(seed_, fnv1a64(text)));
    TextEmbedding v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = rng.uniform(-1.0, 1.0);
    return v;
}

MockDescriptorGenerator::MockDescriptorGenerator(std::string instruction)
    : instruction_(std::move(instruction)) {}

std::string MockDescriptorGenerator::describe(const Image& image, const BinaryMask& mask) {
    const std::string digest = sha256_hex(sha256_hex(image.pixels) + sha256_hex(mask.bitmap));
    return "mock material description " + digest.substr(0, 12);
}

MockMaterialVlm::MockMaterialVlm(std::vector<std::string> class_names)
    : class_names_(std::move(class_names)) {
    if (class_names_.empty()) throw ConfigError("mock vlm: class list is empty");
}

std::string MockMaterialVlm::ask(const Image& image, const BinaryMask& mask,
                                 const std::string& prompt) {
    (void)mask;
    (void)prompt;
    const uint64_t h = fnv1a64(sha256_hex(image.pixels));
    const auto& cls = class_names_[h % class_names_.size()];
    return "The material appears to be " + cls + ".";
}

MockJointEmbedder::MockJointEmbedder(int dim, uint64_t seed)
    : dim_(dim), seed_(seed), projection_(seeded_projection(dim, hash_combine(seed, 0x701e7ULL))) {}

Eigen::VectorXd MockJointEmbedder::embed_image(const Image& image) {
    if (image.empty()) throw PreconditionError("embed_image: empty image");
    Eigen::VectorXd stats(6);
    region_stats(image, 0, 0, image.width, image.height, stats.data());
    return projection_ * stats;
}

Eigen::VectorXd MockJointEmbedder::embed_text(const std::string& text) {
    SplitMix64 rng(hash_combine(seed_, fnv1a64("joint:" + text)));
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = rng.uniform(-1.0, 1.0);
    return v;
}

} // namespace matkit
