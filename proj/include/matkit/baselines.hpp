// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "matkit/encoders.hpp"
#include "matkit/image.hpp"
#include "matkit/taxonomy.hpp"

namespace matkit {

/// Image and text encoders sharing one embedding space.
class JointEmbedder {
public:
    virtual ~JointEmbedder() = default;
    virtual std::string id() const = 0;
    virtual int dim() const = 0;
    virtual Eigen::VectorXd embed_image(const Image& image) = 0;
    virtual Eigen::VectorXd embed_text(const std::string& text) = 0;
};

/// Cosine similarity; zero-norm operands are a numeric error.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Index of the candidate with maximal cosine similarity to the query;
/// exact ties resolve to the lowest index.
int nearest_by_cosine(const Eigen::VectorXd& query,
                      const std::vector<Eigen::VectorXd>& candidates);

/// Zero-shot protocol: embed every candidate class text and the image in the
/// joint space, predict the class whose text is nearest. Needs >= 2 texts.
int zeroshot_nn_classify(const Image& image, const std::vector<std::string>& class_texts,
                         JointEmbedder& embedder);

inline constexpr const char* kDefaultVlmPrompt =
    "Please identify the material of the non-masked area.";

/// A response names a class iff it contains the class name, case-insensitive
/// substring match; the first contained class in taxonomy order wins.
std::optional<std::string> match_class_in_response(const std::string& response,
                                                   const MaterialTaxonomy& taxonomy);

/// VLM prompting protocol. Backend failures propagate as BackendError so the
/// harness can count the sample as unevaluated.
std::optional<std::string> vlm_prompt_classify(const Image& image, const BinaryMask& mask,
                                               MaterialVlm& vlm,
                                               const MaterialTaxonomy& taxonomy,
                                               const std::string& prompt = kDefaultVlmPrompt);

/// Externally supplied per-image descriptor vectors plus ground-truth labels.
struct DescriptorVectorSet {
    Eigen::MatrixXd features; // n x d, uniform dimension
    std::vector<int> labels;
    std::vector<std::string> ids;

    size_t size() const { return labels.size(); }
};

/// Retrieval protocol: each image is predicted as the label of its nearest
/// neighbour (by cosine) among all other images; the image itself is never a
/// candidate. Needs >= 2 images.
std::vector<int> retrieval_classify(const DescriptorVectorSet& set);

} // namespace matkit
