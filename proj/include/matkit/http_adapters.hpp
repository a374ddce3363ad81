// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <map>
#include <string>

#include "matkit/baselines.hpp"
#include "matkit/encoders.hpp"
#include "matkit/generation.hpp"
#include "matkit/labeling.hpp"

// Adapters that delegate to a model server speaking a small JSON contract
// (documented in the README). Images and masks travel as base64 PNG. These
// adapters carry no model state; determinism is the server's contract, and
// descriptor traffic is additionally pinned by the response cache.

namespace matkit {

class HttpGenerationBackend : public GenerationBackend {
public:
    HttpGenerationBackend(std::string endpoint, std::map<std::string, std::string> params);
    std::string id() const override { return "http-generate"; }
    bool deterministic() const override { return false; }
    bool concurrent_safe() const override { return false; }
    Image generate(const std::string& prompt, int64_t seed, int width, int height) override;

private:
    std::string endpoint_;
    std::map<std::string, std::string> params_;
};

class HttpSegmentationBackend : public SegmentationBackend {
public:
    explicit HttpSegmentationBackend(std::string endpoint);
    std::string id() const override { return "http-segment"; }
    bool concurrent_safe() const override { return false; }
    BinaryMask segment(const Image& image, const std::string& phrase) override;

private:
    std::string endpoint_;
};

class HttpVisionEncoder : public VisionEncoder {
public:
    HttpVisionEncoder(std::string endpoint, int resolution, int grid, int dim);
    std::string id() const override { return "http-vision"; }
    int input_resolution() const override { return resolution_; }
    int grid_size() const override { return grid_; }
    int feature_dim() const override { return dim_; }
    PatchGrid encode(const Image& image) override;

private:
    std::string endpoint_;
    int resolution_;
    int grid_;
    int dim_;
};

class HttpTextEncoder : public TextEncoder {
public:
    HttpTextEncoder(std::string endpoint, int dim);
    std::string id() const override { return "http-text"; }
    int embedding_dim() const override { return dim_; }
    TextEmbedding encode(const std::string& text) override;

private:
    std::string endpoint_;
    int dim_;
};

class HttpDescriptorGenerator : public DescriptorGenerator {
public:
    HttpDescriptorGenerator(std::string endpoint, std::string instruction);
    std::string id() const override { return "http-descriptor"; }
    std::string instruction() const override { return instruction_; }
    std::string describe(const Image& image, const BinaryMask& mask) override;

private:
    std::string endpoint_;
    std::string instruction_;
};

class HttpMaterialVlm : public MaterialVlm {
public:
    explicit HttpMaterialVlm(std::string endpoint);
    std::string id() const override { return "http-vlm"; }
    std::string ask(const Image& image, const BinaryMask& mask,
                    const std::string& prompt) override;

private:
    std::string endpoint_;
};

class HttpJointEmbedder : public JointEmbedder {
public:
    HttpJointEmbedder(std::string endpoint, int dim);
    std::string id() const override { return "http-joint"; }
    int dim() const override { return dim_; }
    Eigen::VectorXd embed_image(const Image& image) override;
    Eigen::VectorXd embed_text(const std::string& text) override;

private:
    std::string endpoint_;
    int dim_;
};

} // namespace matkit
