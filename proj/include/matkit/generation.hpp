// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "matkit/image.hpp"
#include "matkit/prompts.hpp"

namespace matkit {

/// One generated image plus full provenance. `seed` is recorded exactly as
/// passed to the backend; `id` derives from the image content hash and seed,
/// so a deterministic backend reproduces identical records.
struct ImageRecord {
    std::string id;
    std::string image_path; // relative to the records manifest directory
    PromptTriplet triplet;
    std::string prompt_text;
    std::string backend_id;
    int64_t seed = 0;
    int width = 0;
    int height = 0;
};

/// Text-to-image adapter. Must be deterministic for equal (prompt, seed)
/// when `deterministic()` is true, and must declare whether concurrent
/// invocation is safe.
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual std::string id() const = 0;
    virtual bool deterministic() const = 0;
    virtual bool concurrent_safe() const = 0;
    virtual Image generate(const std::string& prompt, int64_t seed, int width, int height) = 0;
};

/// One planned backend call. Seed schedule:
/// seed = base_seed + triplet_index * images_per_prompt + replica_index.
struct GenerationTask {
    size_t triplet_index = 0;
    size_t replica_index = 0;
    std::string prompt_text;
    int64_t seed = 0;
};

/// Expands triplets into the full task list. All triplets must be validated
/// and images_per_prompt >= 1.
std::vector<GenerationTask> plan_generation(const std::vector<PromptTriplet>& triplets,
                                            size_t images_per_prompt,
                                            const std::string& prompt_template,
                                            int64_t base_seed);

struct GenerationOptions {
    size_t images_per_prompt = 5;
    int width = 512;
    int height = 512;
    int64_t base_seed = 0;
    std::string prompt_template = kDefaultPromptTemplate;
    int retries = 0;  // extra attempts per failed backend call
    int jobs = 1;     // honored only when the backend is concurrent-safe
};

struct GenerationResult {
    std::vector<ImageRecord> records;
    size_t failures = 0;
};

/// Runs the plan against a backend, writing one image file per successful
/// task into images_dir. A failed task is skipped and counted; an all-failure
/// run is an error.
GenerationResult generate_images(const std::vector<PromptTriplet>& triplets,
                                 const GenerationOptions& options, GenerationBackend& backend,
                                 const std::filesystem::path& images_dir,
                                 const std::function<void(const std::string&)>& log = {});

/// Records manifest, JSON lines, one record per line, paths relative to the
/// manifest's directory.
void save_records(const std::filesystem::path& path, const std::vector<ImageRecord>& records);
std::vector<ImageRecord> load_records(const std::filesystem::path& path);

} // namespace matkit
