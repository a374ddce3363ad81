// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "matkit/encoders.hpp"
#include "matkit/manifest.hpp"
#include "matkit/taxonomy.hpp"

namespace matkit {

/// Region mask at patch-grid resolution.
struct PatchMask {
    int grid = 0;
    std::vector<uint8_t> active; // grid*grid, row-major

    PatchMask() = default;
    explicit PatchMask(int g) : grid(g), active(static_cast<size_t>(g) * g, 0) {}
    bool at(int i, int j) const { return active[static_cast<size_t>(i) * grid + j] != 0; }
    void set(int i, int j, bool v) { active[static_cast<size_t>(i) * grid + j] = v ? 1 : 0; }
    size_t active_count() const;
};

/// Pixel mask -> grid cells; a cell is active iff at least one foreground
/// pixel maps into it. Mask dimensions must divide evenly into grid cells.
PatchMask downsample_mask(const BinaryMask& mask, int grid);

enum class Pooling { kMax, kAverage };

/// Elementwise pooling over the active cells. A mask with no active cell
/// falls back to pooling over all cells.
Eigen::VectorXd masked_pool(const PatchGrid& grid, const PatchMask& pmask, Pooling pooling);
Eigen::VectorXd masked_max_pool(const PatchGrid& grid, const PatchMask& pmask);

/// Concatenation, vision first.
Eigen::VectorXd fuse(const Eigen::VectorXd& vision, const Eigen::VectorXd& text);

/// One hidden layer (GELU) followed by a linear map to class logits.
struct MlpHead {
    Eigen::MatrixXd w1; // hidden x input
    Eigen::VectorXd b1; // hidden
    Eigen::MatrixXd w2; // classes x hidden
    Eigen::VectorXd b2; // classes

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    int num_classes() const { return static_cast<int>(w2.rows()); }

    /// Kaiming-uniform weights, zero biases; deterministic in seed.
    static MlpHead kaiming(int input, int hidden, int classes, uint64_t seed);
    static MlpHead zeros(int input, int hidden, int classes);

    Eigen::VectorXd logits(const Eigen::VectorXd& x) const;

    bool operator==(const MlpHead& other) const;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Class probabilities for a fused feature; rejects non-finite input.
Eigen::VectorXd forward(const MlpHead& head, const Eigen::VectorXd& fused);

struct HeadGradients {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;

    static HeadGradients zeros_like(const MlpHead& head);
    void scale(double s);
};

/// Cross-entropy loss of one sample, with gradients accumulated into `grads`.
double head_loss_and_gradients(const MlpHead& head, const Eigen::VectorXd& x, int label,
                               HeadGradients& grads);

struct TrainConfig {
    std::string optimizer = "adamw";
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    int batch_size = 64;
    int epochs = 20;
    uint64_t seed = 0;
    int hidden = 512;
    std::string head_mode = "head";             // "head" | "full"
    Pooling pooling = Pooling::kMax;
    std::string descriptor_mode = "class_bank"; // "class_bank" | "per_image"
};

/// One appearance description + embedding per taxonomy class, canonical order.
struct ClassDescriptorBank {
    std::vector<std::string> texts;
    std::vector<TextEmbedding> embeddings;
};

/// Builds the bank from per-class texts (a class without an override uses its
/// own name as descriptor text).
ClassDescriptorBank build_class_bank(const MaterialTaxonomy& taxonomy,
                                     const std::map<std::string, std::string>& texts,
                                     TextEncoder& encoder);

struct FusedSample {
    Eigen::VectorXd features;
    int label = 0;
};

struct TrainEpoch {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    MlpHead head;
    std::vector<TrainEpoch> log;
    double final_loss = 0.0;     // full pass with the trained head
    double final_accuracy = 0.0; // ditto
};

/// AdamW training of the head on pre-fused features; encoders stay frozen by
/// construction (they are not visible here). Deterministic in cfg.seed.
TrainResult train_head(const std::vector<FusedSample>& data, int num_classes,
                       const TrainConfig& cfg);

/// Frozen-encoder feature path: resize to the encoder's native resolution
/// (bilinear for images, nearest for masks), encode, downsample the mask,
/// pool.
class FeaturePipeline {
public:
    FeaturePipeline(std::shared_ptr<VisionEncoder> encoder, Pooling pooling);

    Eigen::VectorXd vision_feature(const Image& image, const BinaryMask& mask) const;
    VisionEncoder& encoder() const { return *encoder_; }
    Pooling pooling() const { return pooling_; }

private:
    std::shared_ptr<VisionEncoder> encoder_;
    Pooling pooling_;
};

/// Fuses every manifest sample with its language prior: the ground-truth
/// class embedding from the bank, or, when a descriptor generator is given,
/// the embedding of a descriptor generated for that sample's region.
std::vector<FusedSample> extract_training_features(const DatasetManifest& manifest,
                                                   const ClassDescriptorBank& bank,
                                                   const FeaturePipeline& pipeline, int jobs,
                                                   DescriptorGenerator* descriptor = nullptr,
                                                   TextEncoder* text_encoder = nullptr);

/// Full training entry point used by the CLI. cfg.descriptor_mode selects the
/// language prior: "class_bank" (ground-truth class embedding) or "per_image"
/// (descriptor generated per sample, requires the two optional adapters).
TrainResult train_classifier(const DatasetManifest& manifest, const ClassDescriptorBank& bank,
                             const FeaturePipeline& pipeline, const TrainConfig& cfg, int jobs,
                             const std::function<void(const std::string&)>& warn = {},
                             DescriptorGenerator* descriptor = nullptr,
                             TextEncoder* text_encoder = nullptr);

enum class PredictMode { kClassBank, kPerImageDescriptor };

struct Prediction {
    int label_index = 0;
    std::string label;
    Eigen::VectorXd scores; // class-bank: diagonal scores s_k; per-image: softmax
    bool used_fallback = false;
};

/// Class-bank mode scores every class k by the k-th probability of a forward
/// pass fused with that class's embedding; per-image mode embeds a generated
/// region descriptor and takes the argmax of a single forward pass. Exact
/// ties resolve to the lowest class index. Descriptor failures fall back to
/// class-bank mode with a warning.
Prediction predict(const Image& image, const BinaryMask& mask, const MlpHead& head,
                   const ClassDescriptorBank& bank, const MaterialTaxonomy& taxonomy,
                   const FeaturePipeline& pipeline, PredictMode mode,
                   DescriptorGenerator* descriptor = nullptr, TextEncoder* text_encoder = nullptr,
                   const std::function<void(const std::string&)>& warn = {});

/// Everything needed to reload and run a trained classifier.
struct Checkpoint {
    int schema_version = 1;
    MlpHead head;
    std::vector<std::string> classes;
    std::string vision_adapter_id;
    int vision_resolution = 0;
    int vision_grid = 0;
    int vision_dim = 0;
    std::string text_adapter_id;
    int text_dim = 0;
    TrainConfig train_config;
    std::vector<std::string> bank_texts; // canonical class order
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::filesystem::path& path);

const char* pooling_name(Pooling p);
Pooling pooling_from_name(const std::string& name);

} // namespace matkit
