// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/baselines.hpp"

#include <algorithm>
#include <cctype>

#include "matkit/errors.hpp"

namespace matkit {

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw PreconditionError("cosine: dimension mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw NumericError("cosine: zero-norm embedding");
    return a.dot(b) / (na * nb);
}

int nearest_by_cosine(const Eigen::VectorXd& query,
                      const std::vector<Eigen::VectorXd>& candidates) {
    if (candidates.empty()) throw PreconditionError("nearest_by_cosine: no candidates");
    int best = 0;
    double best_sim = cosine_similarity(query, candidates[0]);
    for (size_t i = 1; i < candidates.size(); ++i) {
        const double sim = cosine_similarity(query, candidates[i]);
        if (sim > best_sim) {
            best_sim = sim;
            best = static_cast<int>(i);
        }
    }
    return best;
}

int zeroshot_nn_classify(const Image& image, const std::vector<std::string>& class_texts,
                         JointEmbedder& embedder) {
    if (class_texts.size() < 2) {
        throw PreconditionError("zeroshot_nn_classify: need at least 2 class texts");
    }
    std::vector<Eigen::VectorXd> text_embs;
    text_embs.reserve(class_texts.size());
    for (const auto& text : class_texts) text_embs.push_back(embedder.embed_text(text));
    return nearest_by_cosine(embedder.embed_image(image), text_embs);
}

namespace {

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::optional<std::string> match_class_in_response(const std::string& response,
                                                   const MaterialTaxonomy& taxonomy) {
    const std::string haystack = lowercase(response);
    for (const auto& cls : taxonomy.classes()) {
        if (haystack.find(lowercase(cls)) != std::string::npos) return cls;
    }
    return std::nullopt;
}

std::optional<std::string> vlm_prompt_classify(const Image& image, const BinaryMask& mask,
                                               MaterialVlm& vlm,
                                               const MaterialTaxonomy& taxonomy,
                                               const std::string& prompt) {
    const std::string response = vlm.ask(image, mask, prompt);
    return match_class_in_response(response, taxonomy);
}

std::vector<int> retrieval_classify(const DescriptorVectorSet& set) {
    const size_t n = set.size();
    if (n < 2) throw PreconditionError("retrieval_classify: need at least 2 images");
    if (set.features.rows() != static_cast<Eigen::Index>(n)) {
        throw PreconditionError("retrieval_classify: feature row count does not match labels");
    }
    std::vector<double> norms(n);
    for (size_t i = 0; i < n; ++i) {
        norms[i] = set.features.row(i).norm();
        if (norms[i] == 0.0) throw NumericError("retrieval_classify: zero-norm feature vector");
    }
    std::vector<int> predictions(n);
    for (size_t i = 0; i < n; ++i) {
        int best = -1;
        double best_sim = 0.0;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue; // self never matches
            const double sim = set.features.row(i).dot(set.features.row(j)) /
                               (norms[i] * norms[j]);
            if (best < 0 || sim > best_sim) {
                best_sim = sim;
                best = static_cast<int>(j);
            }
        }
        predictions[i] = set.labels[static_cast<size_t>(best)];
    }
    return predictions;
}

} // namespace matkit
