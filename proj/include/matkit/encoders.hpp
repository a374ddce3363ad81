// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "matkit/image.hpp"

namespace matkit {

using TextEmbedding = Eigen::VectorXd;

/// Dense per-patch features: grid x grid cells, each a dim-vector.
/// Cell (i, j) = row i * grid + j of `features` (row-major cells).
struct PatchGrid {
    int grid = 0;
    int dim = 0;
    Eigen::MatrixXd features; // (grid*grid) x dim

    Eigen::VectorXd cell(int i, int j) const { return features.row(i * grid + j); }
};

// Adapter interfaces for the frozen foundation-model roles. Adapters are
// referentially transparent per instance: equal inputs give equal outputs
// (mocks exactly, remote adapters through the response cache). Output
// dimensions are instance constants; downstream code reads them from the
// adapter instead of hard-coding.

class VisionEncoder {
public:
    virtual ~VisionEncoder() = default;
    virtual std::string id() const = 0;
    virtual int input_resolution() const = 0;
    virtual int grid_size() const = 0;
    virtual int feature_dim() const = 0;
    /// Whether the backbone can be unfrozen for "full" training.
    virtual bool supports_finetune() const { return false; }
    virtual PatchGrid encode(const Image& image) = 0;
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual std::string id() const = 0;
    virtual int embedding_dim() const = 0;
    virtual TextEmbedding encode(const std::string& text) = 0;
};

/// Region-appearance describer in the role of a vision-language model.
class DescriptorGenerator {
public:
    virtual ~DescriptorGenerator() = default;
    virtual std::string id() const = 0;
    virtual std::string instruction() const = 0;
    virtual std::string describe(const Image& image, const BinaryMask& mask) = 0;
};

/// Free-form VLM chat over an (image, mask) pair; used by the prompting
/// baseline.
class MaterialVlm {
public:
    virtual ~MaterialVlm() = default;
    virtual std::string id() const = 0;
    virtual std::string ask(const Image& image, const BinaryMask& mask,
                            const std::string& prompt) = 0;
};

/// Checks the adapter's resolution contract, then encodes.
PatchGrid encode_patches(const Image& image, VisionEncoder& encoder);

/// Rejects empty text, then encodes.
TextEmbedding encode_text(const std::string& text, TextEncoder& encoder);

/// Non-empty appearance description of the masked region.
std::string describe_region(const Image& image, const BinaryMask& mask,
                            DescriptorGenerator& generator);

/// Content-addressed response store: <dir>/<adapter-id>/<sha256>.json holding
/// the request digest and the response. Writes are atomic
/// (write-temp-then-rename) so concurrent workers can share a cache.
class ResponseCache {
public:
    ResponseCache(std::filesystem::path dir, std::string adapter_id);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& request_digest,
             const std::string& response) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

/// Wraps a DescriptorGenerator with the mandatory response cache. The key is
/// sha256 over (model id, image hash, mask hash, instruction).
class CachedDescriptorGenerator : public DescriptorGenerator {
public:
    CachedDescriptorGenerator(std::shared_ptr<DescriptorGenerator> inner,
                              std::filesystem::path cache_dir);

    std::string id() const override { return inner_->id(); }
    std::string instruction() const override { return inner_->instruction(); }
    std::string describe(const Image& image, const BinaryMask& mask) override;

private:
    std::shared_ptr<DescriptorGenerator> inner_;
    ResponseCache cache_;
};

} // namespace matkit
