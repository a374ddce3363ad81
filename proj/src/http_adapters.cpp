// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/http_adapters.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

#include "matkit/errors.hpp"
#include "matkit/hashing.hpp"

namespace matkit {

using json = nlohmann::json;

namespace {

struct SplitUrl {
    std::string base; // scheme://host:port
    std::string path; // /route
};

SplitUrl split_endpoint(const std::string& endpoint) {
    if (endpoint.empty()) throw ConfigError("http adapter: empty endpoint");
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos) throw ConfigError("http adapter: endpoint needs a scheme");
    const auto slash = endpoint.find('/', scheme + 3);
    if (slash == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

json post_json(const std::string& endpoint, const json& body) {
    const SplitUrl url = split_endpoint(endpoint);
    httplib::Client client(url.base);
    client.set_read_timeout(300, 0);
    client.set_connection_timeout(10, 0);
    // credentials travel only through the environment
    if (const char* token = std::getenv("MATKIT_API_TOKEN")) {
        client.set_default_headers({{"Authorization", std::string("Bearer ") + token}});
    }
    auto res = client.Post(url.path, body.dump(), "application/json");
    if (!res) {
        throw BackendError("http adapter: no response from " + endpoint);
    }
    if (res->status != 200) {
        throw BackendError("http adapter: " + endpoint + " returned status " +
                           std::to_string(res->status));
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw BackendError("http adapter: invalid JSON from " + endpoint + ": " + e.what());
    }
}

std::string png_b64(const Image& image) { return base64_encode(encode_png(image)); }
std::string png_b64(const BinaryMask& mask) { return base64_encode(encode_png(mask)); }

Eigen::VectorXd vector_field(const json& doc, const char* key, int dim,
                             const std::string& endpoint) {
    if (!doc.contains(key)) {
        throw BackendError("http adapter: " + endpoint + " reply lacks '" + key + "'");
    }
    const auto values = doc[key].get<std::vector<double>>();
    if (static_cast<int>(values.size()) != dim) {
        throw BackendError("http adapter: " + endpoint + " returned dimension " +
                           std::to_string(values.size()) + ", expected " + std::to_string(dim));
    }
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = values[static_cast<size_t>(i)];
    return v;
}

} // namespace

HttpGenerationBackend::HttpGenerationBackend(std::string endpoint,
                                             std::map<std::string, std::string> params)
    : endpoint_(std::move(endpoint)), params_(std::move(params)) {}

Image HttpGenerationBackend::generate(const std::string& prompt, int64_t seed, int width,
                                      int height) {
    json body{{"prompt", prompt}, {"seed", seed}, {"width", width}, {"height", height}};
    if (!params_.empty()) body["params"] = params_;
    const json reply = post_json(endpoint_, body);
    if (!reply.contains("image_png")) {
        throw BackendError("http adapter: generation reply lacks 'image_png'");
    }
    return decode_image(base64_decode(reply["image_png"].get<std::string>()));
}

HttpSegmentationBackend::HttpSegmentationBackend(std::string endpoint)
    : endpoint_(std::move(endpoint)) {}

BinaryMask HttpSegmentationBackend::segment(const Image& image, const std::string& phrase) {
    const json reply =
        post_json(endpoint_, json{{"image_png", png_b64(image)}, {"phrase", phrase}});
    if (!reply.contains("mask_png")) {
        throw BackendError("http adapter: segmentation reply lacks 'mask_png'");
    }
    return decode_mask(base64_decode(reply["mask_png"].get<std::string>()));
}

HttpVisionEncoder::HttpVisionEncoder(std::string endpoint, int resolution, int grid, int dim)
    : endpoint_(std::move(endpoint)), resolution_(resolution), grid_(grid), dim_(dim) {}

PatchGrid HttpVisionEncoder::encode(const Image& image) {
    const json reply = post_json(endpoint_, json{{"image_png", png_b64(image)}});
    if (!reply.contains("features")) {
        throw BackendError("http adapter: vision reply lacks 'features'");
    }
    const auto values = reply["features"].get<std::vector<double>>();
    const size_t expected = static_cast<size_t>(grid_) * grid_ * dim_;
    if (values.size() != expected) {
        throw BackendError("http adapter: vision reply has " + std::to_string(values.size()) +
                           " values, expected " + std::to_string(expected));
    }
    PatchGrid grid;
    grid.grid = grid_;
    grid.dim = dim_;
    grid.features.resize(static_cast<Eigen::Index>(grid_) * grid_, dim_);
    for (Eigen::Index cell = 0; cell < grid.features.rows(); ++cell) {
        for (int d = 0; d < dim_; ++d) {
            grid.features(cell, d) = values[static_cast<size_t>(cell) * dim_ + d];
        }
    }
    return grid;
}

HttpTextEncoder::HttpTextEncoder(std::string endpoint, int dim)
    : endpoint_(std::move(endpoint)), dim_(dim) {}

TextEmbedding HttpTextEncoder::encode(const std::string& text) {
    const json reply = post_json(endpoint_, json{{"text", text}});
    return vector_field(reply, "embedding", dim_, endpoint_);
}

HttpDescriptorGenerator::HttpDescriptorGenerator(std::string endpoint, std::string instruction)
    : endpoint_(std::move(endpoint)), instruction_(std::move(instruction)) {}

std::string HttpDescriptorGenerator::describe(const Image& image, const BinaryMask& mask) {
    const json reply = post_json(endpoint_, json{{"image_png", png_b64(image)},
                                                 {"mask_png", png_b64(mask)},
                                                 {"instruction", instruction_}});
    if (!reply.contains("text")) {
        throw BackendError("http adapter: descriptor reply lacks 'text'");
    }
    return reply["text"].get<std::string>();
}

HttpMaterialVlm::HttpMaterialVlm(std::string endpoint) : endpoint_(std::move(endpoint)) {}

std::string HttpMaterialVlm::ask(const Image& image, const BinaryMask& mask,
                                 const std::string& prompt) {
    const json reply = post_json(endpoint_, json{{"image_png", png_b64(image)},
                                                 {"mask_png", png_b64(mask)},
                                                 {"prompt", prompt}});
    if (!reply.contains("response")) {
        throw BackendError("http adapter: vlm reply lacks 'response'");
    }
    return reply["response"].get<std::string>();
}

HttpJointEmbedder::HttpJointEmbedder(std::string endpoint, int dim)
    : endpoint_(std::move(endpoint)), dim_(dim) {}

Eigen::VectorXd HttpJointEmbedder::embed_image(const Image& image) {
    const json reply = post_json(endpoint_, json{{"image_png", png_b64(image)}});
    return vector_field(reply, "embedding", dim_, endpoint_);
}

Eigen::VectorXd HttpJointEmbedder::embed_text(const std::string& text) {
    const json reply = post_json(endpoint_, json{{"text", text}});
    return vector_field(reply, "embedding", dim_, endpoint_);
}

} // namespace matkit
