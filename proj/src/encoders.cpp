// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/encoders.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "matkit/errors.hpp"
#include "matkit/hashing.hpp"

namespace matkit {

using json = nlohmann::json;

PatchGrid encode_patches(const Image& image, VisionEncoder& encoder) {
    const int res = encoder.input_resolution();
    if (image.width != res || image.height != res) {
        throw PreconditionError("encode_patches: image is " + std::to_string(image.width) + "x" +
                                std::to_string(image.height) + ", encoder expects " +
                                std::to_string(res) + "x" + std::to_string(res));
    }
    PatchGrid grid = encoder.encode(image);
    if (grid.grid != encoder.grid_size() || grid.dim != encoder.feature_dim() ||
        grid.features.rows() != static_cast<Eigen::Index>(grid.grid) * grid.grid ||
        grid.features.cols() != grid.dim) {
        throw BackendError("vision adapter '" + encoder.id() + "' violated its dimension contract");
    }
    return grid;
}

TextEmbedding encode_text(const std::string& text, TextEncoder& encoder) {
    if (text.empty()) throw PreconditionError("encode_text: empty text");
    TextEmbedding v = encoder.encode(text);
    if (v.size() != encoder.embedding_dim()) {
        throw BackendError("text adapter '" + encoder.id() + "' violated its dimension contract");
    }
    if (!v.allFinite()) {
        throw BackendError("text adapter '" + encoder.id() + "' returned non-finite entries");
    }
    return v;
}

std::string describe_region(const Image& image, const BinaryMask& mask,
                            DescriptorGenerator& generator) {
    if (image.width != mask.width || image.height != mask.height) {
        throw PreconditionError("describe_region: mask dimensions do not match image");
    }
    std::string text = generator.describe(image, mask);
    if (text.empty()) {
        throw BackendError("descriptor adapter '" + generator.id() + "' returned empty text");
    }
    return text;
}

ResponseCache::ResponseCache(std::filesystem::path dir, std::string adapter_id)
    : dir_(std::move(dir)) {
    dir_ /= adapter_id;
    std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    const auto path = dir_ / (key + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    json doc;
    try {
        in >> doc;
    } catch (const json::exception&) {
        return std::nullopt; // unreadable entry behaves like a miss
    }
    if (!doc.contains("response")) return std::nullopt;
    return doc["response"].get<std::string>();
}

void ResponseCache::put(const std::string& key, const std::string& request_digest,
                        const std::string& response) const {
    json doc;
    doc["request"] = request_digest;
    doc["response"] = response;
    const auto path = dir_ / (key + ".json");
    const auto tmp = dir_ / (key + ".tmp");
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write cache entry: " + tmp.string());
        out << doc.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

CachedDescriptorGenerator::CachedDescriptorGenerator(std::shared_ptr<DescriptorGenerator> inner,
                                                     std::filesystem::path cache_dir)
    : inner_(std::move(inner)), cache_(std::move(cache_dir), inner_->id()) {}

std::string CachedDescriptorGenerator::describe(const Image& image, const BinaryMask& mask) {
    const std::string digest = inner_->id() + "\n" + sha256_hex(image.pixels) + "\n" +
                               sha256_hex(mask.bitmap) + "\n" + inner_->instruction();
    const std::string key = sha256_hex(digest);
    if (auto hit = cache_.get(key)) return *hit;
    std::string response = inner_->describe(image, mask);
    cache_.put(key, digest, response);
    return response;
}

} // namespace matkit
