// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/generation.hpp"

#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "matkit/errors.hpp"
#include "matkit/hashing.hpp"
#include "matkit/parallel.hpp"

namespace matkit {

using json = nlohmann::json;

std::vector<GenerationTask> plan_generation(const std::vector<PromptTriplet>& triplets,
                                            size_t images_per_prompt,
                                            const std::string& prompt_template,
                                            int64_t base_seed) {
    if (triplets.empty()) throw PreconditionError("plan_generation: no triplets");
    if (images_per_prompt < 1) {
        throw PreconditionError("plan_generation: images_per_prompt must be >= 1");
    }
    std::vector<GenerationTask> tasks;
    tasks.reserve(triplets.size() * images_per_prompt);
    for (size_t t = 0; t < triplets.size(); ++t) {
        const std::string prompt = render_prompt(triplets[t], prompt_template);
        for (size_t r = 0; r < images_per_prompt; ++r) {
            GenerationTask task;
            task.triplet_index = t;
            task.replica_index = r;
            task.prompt_text = prompt;
            task.seed = base_seed + static_cast<int64_t>(t * images_per_prompt + r);
            tasks.push_back(std::move(task));
        }
    }
    return tasks;
}

GenerationResult generate_images(const std::vector<PromptTriplet>& triplets,
                                 const GenerationOptions& options, GenerationBackend& backend,
                                 const std::filesystem::path& images_dir,
                                 const std::function<void(const std::string&)>& log) {
    const auto tasks =
        plan_generation(triplets, options.images_per_prompt, options.prompt_template,
                        options.base_seed);
    std::filesystem::create_directories(images_dir);

    // Tasks land in index slots so the manifest order is independent of
    // worker scheduling.
    std::vector<std::optional<ImageRecord>> slots(tasks.size());
    const int jobs = backend.concurrent_safe() ? std::max(1, options.jobs) : 1;

    parallel_for(tasks.size(), jobs, [&](size_t i) {
        const GenerationTask& task = tasks[i];
        Image img;
        bool ok = false;
        for (int attempt = 0; attempt <= options.retries && !ok; ++attempt) {
            try {
                img = backend.generate(task.prompt_text, task.seed, options.width,
                                       options.height);
                ok = true;
            } catch (const Error& e) {
                if (attempt == options.retries && log) {
                    log("generation failed for prompt '" + task.prompt_text +
                        "' seed " + std::to_string(task.seed) + ": " + e.what());
                }
            }
        }
        if (!ok) return;
        if (img.width != options.width || img.height != options.height) {
            if (log) log("backend returned wrong resolution for '" + task.prompt_text + "'");
            return;
        }
        ImageRecord rec;
        rec.triplet = triplets[task.triplet_index];
        rec.prompt_text = task.prompt_text;
        rec.backend_id = backend.id();
        rec.seed = task.seed;
        rec.width = img.width;
        rec.height = img.height;
        rec.id = sha256_hex(sha256_hex(img.pixels) + ":" + std::to_string(task.seed)).substr(0, 16);
        rec.image_path = "images/" + rec.id + ".png";
        save_image(images_dir / (rec.id + ".png"), img);
        slots[i] = std::move(rec);
    });

    GenerationResult result;
    for (auto& slot : slots) {
        if (slot) {
            result.records.push_back(std::move(*slot));
        } else {
            ++result.failures;
        }
    }
    if (result.records.empty()) {
        throw BackendError("image generation failed for every prompt (" +
                           std::to_string(result.failures) + " failures)");
    }
    return result;
}

namespace {

json record_to_json(const ImageRecord& rec) {
    return json{{"id", rec.id},
                {"image_path", rec.image_path},
                {"object", rec.triplet.object},
                {"material", rec.triplet.material},
                {"qualifier", rec.triplet.qualifier},
                {"prompt", rec.prompt_text},
                {"backend_id", rec.backend_id},
                {"seed", rec.seed},
                {"width", rec.width},
                {"height", rec.height}};
}

ImageRecord record_from_json(const json& j) {
    ImageRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.image_path = j.at("image_path").get<std::string>();
    rec.triplet.object = j.at("object").get<std::string>();
    rec.triplet.material = j.at("material").get<std::string>();
    rec.triplet.qualifier = j.at("qualifier").get<std::string>();
    rec.triplet.validated = true;
    rec.prompt_text = j.at("prompt").get<std::string>();
    rec.backend_id = j.at("backend_id").get<std::string>();
    rec.seed = j.at("seed").get<int64_t>();
    rec.width = j.at("width").get<int>();
    rec.height = j.at("height").get<int>();
    return rec;
}

} // namespace

void save_records(const std::filesystem::path& path, const std::vector<ImageRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write records manifest: " + path.string());
    for (const auto& rec : records) out << record_to_json(rec).dump() << "\n";
}

std::vector<ImageRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read records manifest: " + path.string());
    std::vector<ImageRecord> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IoError("records manifest " + path.string() + " line " +
                          std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

} // namespace matkit
