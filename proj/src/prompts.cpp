// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/prompts.hpp"

#include <fstream>
#include <sstream>

#include "matkit/errors.hpp"

namespace matkit {

void DenyList::add(const std::string& object, const std::string& material) {
    pairs_.emplace(normalize_token(object), normalize_token(material));
}

bool DenyList::contains(const std::string& object, const std::string& material) const {
    return pairs_.count({normalize_token(object), normalize_token(material)}) > 0;
}

DenyList DenyList::parse(const std::string& text) {
    DenyList deny;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (normalize_token(line).empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ConfigError("deny list line " + std::to_string(lineno) +
                              ": expected 'object,material'");
        }
        deny.add(line.substr(0, comma), line.substr(comma + 1));
    }
    return deny;
}

DenyList DenyList::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open deny list: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::vector<PromptTriplet> propose_triplets(const MaterialTaxonomy& taxonomy,
                                            size_t objects_per_class,
                                            TripletProposer& proposer) {
    if (objects_per_class < 1) {
        throw PreconditionError("propose_triplets: objects_per_class must be >= 1");
    }
    std::vector<PromptTriplet> out;
    out.reserve(taxonomy.size() * objects_per_class);
    for (const auto& cls : taxonomy.classes()) {
        std::vector<std::pair<std::string, std::string>> candidates;
        try {
            candidates = proposer.propose(cls, taxonomy.sub_materials(cls), objects_per_class);
        } catch (const Error& e) {
            throw BackendError("triplet proposal failed for class '" + cls + "': " + e.what());
        }
        if (candidates.size() < objects_per_class) {
            throw BackendError("triplet proposal for class '" + cls + "' returned " +
                               std::to_string(candidates.size()) + " < " +
                               std::to_string(objects_per_class) + " candidates");
        }
        for (const auto& [object, qualifier] : candidates) {
            if (object.empty() || qualifier.empty()) {
                throw BackendError("triplet proposal for class '" + cls +
                                   "' produced an empty field");
            }
            out.push_back(PromptTriplet{object, cls, qualifier, false});
        }
    }
    return out;
}

std::vector<PromptTriplet> filter_triplets(const std::vector<PromptTriplet>& candidates,
                                           const DenyList& deny) {
    std::vector<PromptTriplet> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (deny.contains(c.object, c.material)) continue;
        PromptTriplet kept = c;
        kept.validated = true;
        out.push_back(std::move(kept));
    }
    return out;
}

namespace {

void substitute_all(std::string& text, const std::string& key, const std::string& value,
                    bool& found) {
    size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        found = true;
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
}

} // namespace

std::string render_prompt(const PromptTriplet& triplet, const std::string& templ) {
    if (!triplet.validated) {
        throw PreconditionError("render_prompt: triplet (" + triplet.object + ", " +
                                triplet.material + ") is unvalidated");
    }
    std::string out = templ;
    bool has_object = false;
    bool has_material = false;
    bool has_qualifier = false;
    substitute_all(out, "{object}", triplet.object, has_object);
    substitute_all(out, "{material}", triplet.material, has_material);
    substitute_all(out, "{qualifier}", triplet.qualifier, has_qualifier);
    if (!has_object || !has_material || !has_qualifier) {
        throw ConfigError("prompt template must contain {object}, {material} and {qualifier}");
    }
    return out;
}

} // namespace matkit
