// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matkit/baselines.hpp"
#include "matkit/encoders.hpp"
#include "matkit/generation.hpp"
#include "matkit/labeling.hpp"
#include "matkit/prompts.hpp"

// Deterministic in-process stand-ins for every adapter role. They make the
// whole pipeline runnable and byte-reproducible without model weights: equal
// inputs always produce equal outputs, across runs and processes.

namespace matkit {

/// Emits object/qualifier candidates from a fixed vocabulary, rotated by
/// class so different classes get different objects.
class MockTripletProposer : public TripletProposer {
public:
    explicit MockTripletProposer(uint64_t seed = 0) : seed_(seed) {}
    std::string id() const override { return "mock-proposer"; }
    std::vector<std::pair<std::string, std::string>> propose(
        const std::string& material, const std::vector<std::string>& sub_materials,
        size_t count) override;

private:
    uint64_t seed_;
};

/// Procedural texture generator. The canvas is keyed by hash(prompt, seed);
/// when a palette word (normally the material class name) occurs in the
/// prompt, the central object region is painted in that word's signature
/// color, which gives images of one material a shared visual statistic.
class MockGenerationBackend : public GenerationBackend {
public:
    explicit MockGenerationBackend(std::vector<std::string> palette_words = {},
                                   double object_extent = 0.7);
    std::string id() const override { return "mock-diffusion"; }
    bool deterministic() const override { return true; }
    bool concurrent_safe() const override { return true; }
    Image generate(const std::string& prompt, int64_t seed, int width, int height) override;

private:
    std::vector<std::string> palette_words_; // normalized
    double object_extent_;
};

/// Returns the centered rectangle covering `box_scale` of each dimension
/// (scale 0.5 -> foreground fraction 0.25). Scale 0 yields an empty mask,
/// scale 1 a full one. The phrase is accepted but does not move the box.
class MockSegmentationBackend : public SegmentationBackend {
public:
    explicit MockSegmentationBackend(double box_scale = 0.5) : box_scale_(box_scale) {}
    std::string id() const override { return "mock-grounded-sam"; }
    bool concurrent_safe() const override { return true; }
    BinaryMask segment(const Image& image, const std::string& phrase) override;

private:
    double box_scale_;
};

/// Per-patch feature = seeded random projection of the patch's mean color and
/// texture energy. Patch statistics are strictly local, so two images that
/// differ in one patch differ in exactly one grid cell.
class MockVisionEncoder : public VisionEncoder {
public:
    MockVisionEncoder(int resolution = 448, int grid = 32, int dim = 768, uint64_t seed = 0);
    std::string id() const override { return "mock-dino"; }
    int input_resolution() const override { return resolution_; }
    int grid_size() const override { return grid_; }
    int feature_dim() const override { return dim_; }
    PatchGrid encode(const Image& image) override;

private:
    int resolution_;
    int grid_;
    int dim_;
    Eigen::MatrixXd projection_; // dim x 6
};

/// Embedding = seeded hash stream of the text; reproducible across processes.
class MockTextEncoder : public TextEncoder {
public:
    explicit MockTextEncoder(int dim = 512, uint64_t seed = 0) : dim_(dim), seed_(seed) {}
    std::string id() const override { return "mock-clip-text"; }
    int embedding_dim() const override { return dim_; }
    TextEmbedding encode(const std::string& text) override;

private:
    int dim_;
    uint64_t seed_;
};

/// Deterministic descriptor text keyed by the (image, mask) content hash.
class MockDescriptorGenerator : public DescriptorGenerator {
public:
    explicit MockDescriptorGenerator(std::string instruction);
    std::string id() const override { return "mock-vlm-descriptor"; }
    std::string instruction() const override { return instruction_; }
    std::string describe(const Image& image, const BinaryMask& mask) override;

private:
    std::string instruction_;
};

/// Answers material-naming prompts with a class picked by image hash.
class MockMaterialVlm : public MaterialVlm {
public:
    explicit MockMaterialVlm(std::vector<std::string> class_names);
    std::string id() const override { return "mock-vlm-chat"; }
    std::string ask(const Image& image, const BinaryMask& mask,
                    const std::string& prompt) override;

private:
    std::vector<std::string> class_names_;
};

/// Joint space built from two unrelated deterministic projections; enough to
/// exercise the zero-shot protocol end to end.
class MockJointEmbedder : public JointEmbedder {
public:
    explicit MockJointEmbedder(int dim = 512, uint64_t seed = 0);
    std::string id() const override { return "mock-clip-joint"; }
    int dim() const override { return dim_; }
    Eigen::VectorXd embed_image(const Image& image) override;
    Eigen::VectorXd embed_text(const std::string& text) override;

private:
    int dim_;
    uint64_t seed_;
    Eigen::MatrixXd projection_; // dim x 6
};

} // namespace matkit
