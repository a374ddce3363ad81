// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "matkit/errors.hpp"

namespace matkit {

std::string normalize_token(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

MaterialTaxonomy::MaterialTaxonomy(std::vector<std::string> classes,
                                   std::map<std::string, std::vector<std::string>> sub_materials)
    : classes_(std::move(classes)), sub_materials_(std::move(sub_materials)) {
    for (size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].empty()) throw ConfigError("taxonomy: empty class name");
        if (!index_.emplace(classes_[i], static_cast<int>(i)).second) {
            throw ConfigError("taxonomy: duplicate class name '" + classes_[i] + "'");
        }
    }
    // every sub-material belongs to exactly one class
    std::set<std::string> seen;
    for (const auto& [cls, subs] : sub_materials_) {
        if (!index_.count(cls)) {
            throw ConfigError("taxonomy: sub-materials listed for unknown class '" + cls + "'");
        }
        for (const auto& sub : subs) {
            if (!seen.insert(normalize_token(sub)).second) {
                throw ConfigError("taxonomy: sub-material '" + sub + "' mapped to more than one class");
            }
        }
    }
}

bool MaterialTaxonomy::contains(const std::string& cls) const {
    return index_.count(cls) > 0;
}

std::optional<int> MaterialTaxonomy::index_of(const std::string& cls) const {
    auto it = index_.find(cls);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::vector<std::string>& MaterialTaxonomy::sub_materials(const std::string& cls) const {
    static const std::vector<std::string> kEmpty;
    auto it = sub_materials_.find(cls);
    return it == sub_materials_.end() ? kEmpty : it->second;
}

MaterialTaxonomy MaterialTaxonomy::restrict_to(const std::vector<std::string>& subset) const {
    std::set<std::string> wanted(subset.begin(), subset.end());
    std::vector<std::string> classes;
    std::map<std::string, std::vector<std::string>> subs;
    for (const auto& cls : classes_) {
        if (!wanted.count(cls)) continue;
        classes.push_back(cls);
        auto it = sub_materials_.find(cls);
        if (it != sub_materials_.end()) subs[cls] = it->second;
        wanted.erase(cls);
    }
    if (!wanted.empty()) {
        throw ConfigError("class subset contains unknown class '" + *wanted.begin() + "'");
    }
    return MaterialTaxonomy(std::move(classes), std::move(subs));
}

MaterialTaxonomy default_taxonomy() {
    std::vector<std::string> classes = {
        "plastic", "metal",  "leather",  "fabric",   "wood",  "stone", "ceramic",
        "water",   "sponge", "bone",     "cardboard", "concrete", "foliage",
        "fur",     "gemstone", "glass",  "paper",    "soil",  "wax",   "wicker",
        "rubber"};
    std::map<std::string, std::vector<std::string>> subs = {
        {"plastic", {"polypropylene", "polystyrene", "ABS", "silicone"}},
        {"metal", {"stainless-steel", "steel", "nickel", "tin"}},
        {"leather", {"deerskin", "vegetable-tanned", "cowhide"}},
        {"fabric", {"woven", "jute", "cashmere", "cotton"}},
        {"wood", {"mahogany", "oak", "cedar", "hickory"}},
        {"stone", {"marble", "granite", "slate", "mosaic"}},
        {"ceramic", {"porcelain", "stoneware", "celadon"}},
        {"water", {"clear", "rippled"}},
        {"sponge", {"yellow", "porous"}},
        {"bone", {"aged", "carved"}},
        {"cardboard", {"fluted", "corrugated"}},
        {"concrete", {"reinforced", "poured"}},
        {"foliage", {"moss", "leafy"}},
        {"fur", {"soft", "short-haired"}},
        {"gemstone", {"polished", "faceted"}},
        {"glass", {"blown", "frosted"}},
        {"paper", {"towel", "crumpled"}},
        {"soil", {"eroded", "loamy"}},
        {"wax", {"smooth", "dripping"}},
        {"wicker", {"open-weave", "rattan"}},
        {"rubber", {"natural", "neoprene", "butyl"}},
    };
    return MaterialTaxonomy(std::move(classes), std::move(subs));
}

std::vector<std::string> fmd_class_names() {
    return {"fabric", "foliage", "glass", "leather", "metal",
            "paper",  "plastic", "stone", "water",   "wood"};
}

} // namespace matkit
