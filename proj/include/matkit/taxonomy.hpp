// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace matkit {

/// Ordered material class list plus per-class sub-material vocabulary.
/// The class order is canonical: it defines label indices everywhere
/// (manifests, confusion matrices, checkpoints).
class MaterialTaxonomy {
public:
    MaterialTaxonomy() = default;
    MaterialTaxonomy(std::vector<std::string> classes,
                     std::map<std::string, std::vector<std::string>> sub_materials);

    const std::vector<std::string>& classes() const { return classes_; }
    size_t size() const { return classes_.size(); }

    bool contains(const std::string& cls) const;
    /// Index of a class in canonical order; nullopt when unknown.
    std::optional<int> index_of(const std::string& cls) const;
    const std::string& name_of(int index) const { return classes_.at(index); }

    const std::vector<std::string>& sub_materials(const std::string& cls) const;

    /// Taxonomy restricted to a class subset, keeping relative order.
    MaterialTaxonomy restrict_to(const std::vector<std::string>& subset) const;

private:
    std::vector<std::string> classes_;
    std::map<std::string, std::vector<std::string>> sub_materials_;
    std::map<std::string, int> index_;
};

/// The 21-class default taxonomy used throughout the toolkit.
MaterialTaxonomy default_taxonomy();

/// The classic 10-class benchmark subset (fabric, foliage, glass, leather,
/// metal, paper, plastic, stone, water, wood).
std::vector<std::string> fmd_class_names();

/// lowercase + trim; the normal form for name matching.
std::string normalize_token(const std::string& s);

} // namespace matkit
