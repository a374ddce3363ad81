// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "matkit/errors.hpp"
#include "matkit/hashing.hpp"
#include "matkit/rng.hpp"

namespace matkit {

using json = nlohmann::json;

std::filesystem::path DatasetManifest::resolve(const std::string& rel_path) const {
    const std::filesystem::path p(rel_path);
    if (p.is_absolute() || base_dir_.empty()) return p;
    return base_dir_ / p;
}

void DatasetManifest::append(MaskedSample sample) {
    if (sample.id.empty()) throw PreconditionError("append: sample id is empty");
    if (!taxonomy_.contains(sample.label)) {
        throw PreconditionError("append: label '" + sample.label + "' is not a taxonomy class");
    }
    if (!ids_.insert(sample.id).second) {
        throw ConflictError("append: duplicate sample id '" + sample.id + "'");
    }
    entries_.push_back(std::move(sample));
}

void DatasetManifest::validate_files() const {
    for (const auto& e : entries_) {
        if (!std::filesystem::exists(resolve(e.image_path))) {
            throw IoError("manifest entry " + e.id + ": missing image " + e.image_path);
        }
        if (!e.mask_path.empty() && !std::filesystem::exists(resolve(e.mask_path))) {
            throw IoError("manifest entry " + e.id + ": missing mask " + e.mask_path);
        }
    }
}

ClassStats DatasetManifest::class_stats() const {
    ClassStats stats;
    for (const auto& cls : taxonomy_.classes()) stats.per_class[cls] = 0;
    for (const auto& e : entries_) {
        ++stats.per_class[e.label];
        ++stats.total;
    }
    return stats;
}

std::map<std::string, std::vector<size_t>> DatasetManifest::indices_by_class() const {
    std::map<std::string, std::vector<size_t>> by_class;
    for (size_t i = 0; i < entries_.size(); ++i) by_class[entries_[i].label].push_back(i);
    return by_class;
}

namespace {

json sample_to_json(const MaskedSample& s) {
    return json{{"id", s.id},
                {"image_path", s.image_path},
                {"mask_path", s.mask_path},
                {"object", s.object},
                {"material", s.label},
                {"qualifier", s.qualifier},
                {"prompt", s.prompt},
                {"backend_id", s.backend_id},
                {"seed", s.seed},
                {"source", s.source},
                {"split", s.split}};
}

MaskedSample sample_from_json(const json& j) {
    MaskedSample s;
    s.id = j.at("id").get<std::string>();
    s.image_path = j.at("image_path").get<std::string>();
    s.mask_path = j.at("mask_path").get<std::string>();
    s.object = j.at("object").get<std::string>();
    s.label = j.at("material").get<std::string>();
    s.qualifier = j.at("qualifier").get<std::string>();
    s.prompt = j.at("prompt").get<std::string>();
    s.backend_id = j.at("backend_id").get<std::string>();
    s.seed = j.at("seed").get<int64_t>();
    s.source = j.at("source").get<std::string>();
    s.split = j.at("split").get<std::string>();
    return s;
}

} // namespace

void DatasetManifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    for (const auto& e : entries_) out << sample_to_json(e).dump() << "\n";
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path,
                                      const MaterialTaxonomy& taxonomy) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read manifest: " + path.string());
    DatasetManifest manifest(taxonomy);
    manifest.set_base_dir(path.has_parent_path() ? path.parent_path()
                                                 : std::filesystem::path("."));
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            manifest.append(sample_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IoError("manifest " + path.string() + " line " + std::to_string(lineno) +
                          ": " + e.what());
        }
    }
    return manifest;
}

namespace {

// Deterministic per-class draw without replacement; the class index salts the
// stream so adding a class never perturbs the others.
std::vector<size_t> draw_for_class(const std::vector<size_t>& pool, size_t want,
                                   uint64_t seed, int class_index) {
    std::vector<size_t> shuffled = pool;
    SplitMix64 rng(hash_combine(seed, 0x5eedULL + static_cast<uint64_t>(class_index)));
    deterministic_shuffle(shuffled, rng);
    shuffled.resize(want);
    std::sort(shuffled.begin(), shuffled.end()); // manifest order in the output
    return shuffled;
}

DatasetManifest stratified(const DatasetManifest& manifest,
                           const std::map<std::string, size_t>& want_per_class, uint64_t seed,
                           const std::string& split_flag) {
    const auto by_class = manifest.indices_by_class();
    std::vector<size_t> chosen;
    for (const auto& [cls, want] : want_per_class) {
        if (want == 0) continue;
        auto it = by_class.find(cls);
        const size_t have = it == by_class.end() ? 0 : it->second.size();
        if (want > have) {
            throw InsufficientDataError("class '" + cls + "' has " + std::to_string(have) +
                                        " samples, " + std::to_string(want) + " requested");
        }
        const int cls_index = manifest.taxonomy().index_of(cls).value_or(-1);
        const auto picked = draw_for_class(it->second, want, seed, cls_index);
        chosen.insert(chosen.end(), picked.begin(), picked.end());
    }
    std::sort(chosen.begin(), chosen.end());
    DatasetManifest out(manifest.taxonomy());
    out.set_base_dir(manifest.base_dir());
    for (size_t idx : chosen) {
        MaskedSample s = manifest.entries()[idx];
        if (!split_flag.empty()) s.split = split_flag;
        out.append(std::move(s));
    }
    return out;
}

} // namespace

DatasetManifest sample_subset(const DatasetManifest& manifest, double fraction, uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw PreconditionError("sample_subset: fraction must be in (0, 1]");
    }
    std::map<std::string, size_t> want;
    for (const auto& [cls, indices] : manifest.indices_by_class()) {
        // round half-up per class
        want[cls] = static_cast<size_t>(std::floor(fraction * indices.size() + 0.5));
    }
    return stratified(manifest, want, seed, "");
}

DatasetManifest sample_subset(const DatasetManifest& manifest, size_t per_class, uint64_t seed) {
    std::map<std::string, size_t> want;
    for (const auto& cls : manifest.taxonomy().classes()) want[cls] = per_class;
    return stratified(manifest, want, seed, "");
}

DatasetManifest sample_subset_exact(const DatasetManifest& manifest,
                                    const std::map<std::string, size_t>& per_class,
                                    uint64_t seed) {
    return stratified(manifest, per_class, seed, "");
}

DatasetManifest build_test_split(const DatasetManifest& manifest, size_t per_class,
                                 uint64_t seed) {
    std::map<std::string, size_t> want;
    for (const auto& cls : manifest.taxonomy().classes()) want[cls] = per_class;
    return stratified(manifest, want, seed, "test");
}

DatasetManifest subtract(const DatasetManifest& manifest, const DatasetManifest& exclude,
                         const std::string& split_flag) {
    DatasetManifest out(manifest.taxonomy());
    out.set_base_dir(manifest.base_dir());
    for (const auto& e : manifest.entries()) {
        if (exclude.contains_id(e.id)) continue;
        MaskedSample s = e;
        if (!split_flag.empty()) s.split = split_flag;
        out.append(std::move(s));
    }
    return out;
}

size_t import_external(DatasetManifest& manifest, const std::vector<ExternalSample>& samples,
                       const std::string& source_tag,
                       const std::map<std::string, std::string>& label_aliases) {
    const auto& taxonomy = manifest.taxonomy();
    auto map_label = [&](const std::string& raw) -> std::optional<std::string> {
        auto alias = label_aliases.find(raw);
        const std::string name = normalize_token(alias == label_aliases.end() ? raw
                                                                              : alias->second);
        if (taxonomy.contains(name)) return name;
        return std::nullopt;
    };

    std::set<std::string> offenders;
    for (const auto& s : samples) {
        if (!map_label(s.label)) offenders.insert(s.label);
    }
    if (!offenders.empty()) {
        std::string msg = "unmappable labels:";
        for (const auto& o : offenders) msg += " '" + o + "'";
        throw MappingError(msg);
    }

    size_t imported = 0;
    for (const auto& s : samples) {
        MaskedSample entry;
        entry.id = sha256_hex(s.image_path + "\n" + s.mask_path + "\n" + s.label).substr(0, 16);
        entry.image_path = s.image_path;
        entry.mask_path = s.mask_path;
        entry.label = *map_label(s.label);
        entry.backend_id = source_tag;
        entry.source = "imported";
        entry.split = "none";
        manifest.append(std::move(entry));
        ++imported;
    }
    return imported;
}

} // namespace matkit
