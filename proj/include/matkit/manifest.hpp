// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include "matkit/labeling.hpp"
#include "matkit/taxonomy.hpp"

namespace matkit {

struct ClassStats {
    std::map<std::string, size_t> per_class; // every taxonomy class present
    size_t total = 0;
};

/// Append-only sample collection bound to a taxonomy. Ids are unique and all
/// labels are taxonomy classes. Persisted as JSON Lines, one sample per line,
/// with file paths relative to the manifest's directory.
class DatasetManifest {
public:
    DatasetManifest() = default;
    explicit DatasetManifest(MaterialTaxonomy taxonomy) : taxonomy_(std::move(taxonomy)) {}

    const MaterialTaxonomy& taxonomy() const { return taxonomy_; }
    const std::vector<MaskedSample>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    bool contains_id(const std::string& id) const { return ids_.count(id) > 0; }

    /// Directory used to resolve relative image/mask paths; set by load/save.
    const std::filesystem::path& base_dir() const { return base_dir_; }
    void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }
    std::filesystem::path resolve(const std::string& rel_path) const;

    /// Appends one sample. Duplicate ids conflict; labels outside the
    /// taxonomy are rejected.
    void append(MaskedSample sample);

    /// Confirms every referenced image/mask file exists.
    void validate_files() const;

    ClassStats class_stats() const;

    /// Entries grouped by label, preserving manifest order inside groups.
    std::map<std::string, std::vector<size_t>> indices_by_class() const;

    void save(const std::filesystem::path& path) const;
    static DatasetManifest load(const std::filesystem::path& path,
                                const MaterialTaxonomy& taxonomy);

private:
    MaterialTaxonomy taxonomy_;
    std::vector<MaskedSample> entries_;
    std::unordered_set<std::string> ids_;
    std::filesystem::path base_dir_;
};

/// Serializes concurrent producers onto one manifest (single-writer model).
class ManifestCollector {
public:
    explicit ManifestCollector(DatasetManifest& manifest) : manifest_(manifest) {}
    void append(MaskedSample sample) {
        std::lock_guard lock(mutex_);
        manifest_.append(std::move(sample));
    }

private:
    DatasetManifest& manifest_;
    std::mutex mutex_;
};

/// Stratified subset: each class contributes round-half-up(fraction * count)
/// samples drawn without replacement, deterministic in (manifest, fraction,
/// seed). fraction must be in (0, 1].
DatasetManifest sample_subset(const DatasetManifest& manifest, double fraction, uint64_t seed);

/// Stratified subset with an explicit per-class count; a class with fewer
/// samples than requested is an insufficient-data error naming the class.
DatasetManifest sample_subset(const DatasetManifest& manifest, size_t per_class, uint64_t seed);

/// Stratified subset with an explicit target per class.
DatasetManifest sample_subset_exact(const DatasetManifest& manifest,
                                    const std::map<std::string, size_t>& per_class,
                                    uint64_t seed);

/// Draws per_class samples per class, flagged split=test. The remainder
/// (manifest minus returned ids) is what later train splits draw from.
DatasetManifest build_test_split(const DatasetManifest& manifest, size_t per_class,
                                 uint64_t seed);

/// Entries of `manifest` whose ids are absent from `exclude`, with the given
/// split flag applied.
DatasetManifest subtract(const DatasetManifest& manifest, const DatasetManifest& exclude,
                         const std::string& split_flag);

struct ExternalSample {
    std::string image_path;
    std::string mask_path;
    std::string label;
};

/// Imports pre-extracted (image, mask, label) samples. Labels map onto the
/// taxonomy through optional aliases, then exact normalized match; any
/// unmappable labels abort with the full offender list.
size_t import_external(DatasetManifest& manifest, const std::vector<ExternalSample>& samples,
                       const std::string& source_tag,
                       const std::map<std::string, std::string>& label_aliases = {});

} // namespace matkit
