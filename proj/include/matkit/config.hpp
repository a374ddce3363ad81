// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "matkit/baselines.hpp"
#include "matkit/classifier.hpp"
#include "matkit/encoders.hpp"
#include "matkit/generation.hpp"
#include "matkit/labeling.hpp"
#include "matkit/prompts.hpp"
#include "matkit/taxonomy.hpp"

namespace matkit {

/// One declarative document drives every command; CLI flags override keys
/// one-to-one. Unknown keys are rejected so typos cannot silently change a
/// run. All randomness derives from the single `seed`.
struct RunConfig {
    uint64_t seed = 0;

    MaterialTaxonomy taxonomy;

    struct Prompt {
        std::string templ = kDefaultPromptTemplate;
        size_t objects_per_class = 3;
        std::string deny_list; // optional path
        std::string proposer = "mock";
    } prompt;

    struct Generation {
        std::string backend = "mock";
        std::string endpoint;
        size_t images_per_prompt = 5;
        int width = 512;
        int height = 512;
        int retries = 0;
        std::map<std::string, std::string> params; // passed through opaquely
    } generation;

    struct Labeling {
        std::string backend = "mock";
        std::string endpoint;
        double min_area_fraction = 0.02;
        double mock_box_scale = 0.5;
    } labeling;

    struct VisionCfg {
        std::string backend = "mock";
        std::string endpoint;
        int resolution = 448;
        int grid = 32;
        int dim = 768;
    } vision;

    struct TextCfg {
        std::string backend = "mock";
        std::string endpoint;
        int dim = 512;
    } text;

    struct DescriptorCfg {
        std::string backend = "mock";
        std::string endpoint;
        std::string instruction =
            "Describe the visual appearance of the material in the unmasked region: "
            "texture, gloss, color and surface structure.";
        std::string cache_dir = "cache";
    } descriptor;

    struct VlmCfg {
        std::string backend = "mock";
        std::string endpoint;
        std::string prompt = kDefaultVlmPrompt;
    } vlm;

    struct JointCfg {
        std::string backend = "mock";
        std::string endpoint;
        int dim = 512;
    } joint;

    TrainConfig train;
    size_t test_holdout_per_class = 0;

    std::map<std::string, std::string> descriptors; // per-class bank texts

    struct Eval {
        std::vector<std::string> class_set; // empty = full taxonomy
        std::string dataset_id = "dataset";
        bool with_iou = true;
    } eval;

    struct Analyze {
        std::array<double, 2> axis_range{-40.0, 40.0};
        std::vector<double> fractions{0.2, 0.4, 0.6, 0.8, 1.0};
    } analyze;

    std::filesystem::path config_dir; // directory of the loaded file

    /// Evaluation taxonomy: the configured class subset, or the full one.
    MaterialTaxonomy eval_taxonomy() const;
    std::string class_set_id() const;
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& config_dir = {});

// Adapter factories. Backend ids come from the config; "mock" needs no
// weights or network, "http" talks to a model server (see README).
std::unique_ptr<TripletProposer> make_triplet_proposer(const RunConfig& cfg);
std::unique_ptr<GenerationBackend> make_generation_backend(const RunConfig& cfg);
std::unique_ptr<SegmentationBackend> make_segmentation_backend(const RunConfig& cfg);
std::shared_ptr<VisionEncoder> make_vision_encoder(const RunConfig& cfg);
std::shared_ptr<TextEncoder> make_text_encoder(const RunConfig& cfg);
std::shared_ptr<DescriptorGenerator> make_descriptor_generator(const RunConfig& cfg);
std::shared_ptr<MaterialVlm> make_material_vlm(const RunConfig& cfg);
std::shared_ptr<JointEmbedder> make_joint_embedder(const RunConfig& cfg);

} // namespace matkit
