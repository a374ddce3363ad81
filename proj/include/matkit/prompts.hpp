// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "matkit/taxonomy.hpp"

namespace matkit {

/// (object, material, sub-material-or-adjective) generation unit.
struct PromptTriplet {
    std::string object;
    std::string material;  // must be a taxonomy class
    std::string qualifier; // sub-material or adjective
    bool validated = false;

    bool operator==(const PromptTriplet&) const = default;
};

/// Rejected (object, material) combinations. Matching is exact on
/// lowercased, whitespace-trimmed strings.
class DenyList {
public:
    DenyList() = default;

    void add(const std::string& object, const std::string& material);
    bool contains(const std::string& object, const std::string& material) const;
    size_t size() const { return pairs_.size(); }

    /// Parses "object,material" lines; '#' starts a comment, blank lines ignored.
    static DenyList parse(const std::string& text);
    static DenyList load(const std::filesystem::path& path);

private:
    std::set<std::pair<std::string, std::string>> pairs_;
};

/// Adapter proposing candidate (object, qualifier) pairs for one material
/// class, in the role of an instructable language model.
class TripletProposer {
public:
    virtual ~TripletProposer() = default;
    virtual std::string id() const = 0;
    /// At least `count` candidates for the class; qualifier drawn from or
    /// consistent with the class's sub-material vocabulary.
    virtual std::vector<std::pair<std::string, std::string>> propose(
        const std::string& material, const std::vector<std::string>& sub_materials,
        size_t count) = 0;
};

/// Candidate triplets for every class, unvalidated. Requires
/// objects_per_class >= 1; adapter failures surface as BackendError naming
/// the class.
std::vector<PromptTriplet> propose_triplets(const MaterialTaxonomy& taxonomy,
                                            size_t objects_per_class,
                                            TripletProposer& proposer);

/// Keeps exactly the candidates whose (object, material) pair is not denied,
/// preserving order, and marks survivors validated.
std::vector<PromptTriplet> filter_triplets(const std::vector<PromptTriplet>& candidates,
                                           const DenyList& deny);

inline constexpr const char* kDefaultPromptTemplate =
    "a photo of a {qualifier} {material} {object}";

/// Substitutes {object}, {material}, {qualifier}. The template must contain
/// all three placeholders and the triplet must be validated.
std::string render_prompt(const PromptTriplet& triplet, const std::string& templ);

} // namespace matkit
