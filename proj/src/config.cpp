// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "matkit/errors.hpp"
#include "matkit/http_adapters.hpp"
#include "matkit/mocks.hpp"
#include "matkit/rng.hpp"

namespace matkit {

using json = nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::string& section,
                         const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) {
            throw ConfigError("config: unknown key '" + section + key + "'");
        }
    }
}

std::string resolve_path(const std::string& p, const std::filesystem::path& dir) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    if (path.is_absolute() || dir.empty()) return p;
    return (dir / path).string();
}

} // namespace

MaterialTaxonomy RunConfig::eval_taxonomy() const {
    if (eval.class_set.empty()) return taxonomy;
    return taxonomy.restrict_to(eval.class_set);
}

std::string RunConfig::class_set_id() const {
    if (eval.class_set.empty()) return "full" + std::to_string(taxonomy.size());
    return "subset" + std::to_string(eval.class_set.size());
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& config_dir) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");

    RunConfig cfg;
    cfg.config_dir = config_dir;
    reject_unknown_keys(doc, "",
                        {"seed", "taxonomy", "prompt", "generation", "labeling", "encoders",
                         "train", "descriptors", "eval", "analyze"});

    cfg.seed = doc.value("seed", cfg.seed);

    if (doc.contains("taxonomy")) {
        const auto& t = doc["taxonomy"];
        reject_unknown_keys(t, "taxonomy.", {"classes", "sub_materials"});
        std::vector<std::string> classes =
            t.contains("classes") ? t["classes"].get<std::vector<std::string>>()
                                  : default_taxonomy().classes();
        std::map<std::string, std::vector<std::string>> subs;
        if (t.contains("sub_materials")) {
            subs = t["sub_materials"].get<std::map<std::string, std::vector<std::string>>>();
        }
        cfg.taxonomy = MaterialTaxonomy(std::move(classes), std::move(subs));
    } else {
        cfg.taxonomy = default_taxonomy();
    }

    if (doc.contains("prompt")) {
        const auto& p = doc["prompt"];
        reject_unknown_keys(p, "prompt.",
                            {"template", "objects_per_class", "deny_list", "proposer"});
        cfg.prompt.templ = p.value("template", cfg.prompt.templ);
        cfg.prompt.objects_per_class = p.value("objects_per_class", cfg.prompt.objects_per_class);
        cfg.prompt.deny_list = resolve_path(p.value("deny_list", ""), config_dir);
        cfg.prompt.proposer = p.value("proposer", cfg.prompt.proposer);
    }

    if (doc.contains("generation")) {
        const auto& g = doc["generation"];
        reject_unknown_keys(g, "generation.",
                            {"backend", "endpoint", "images_per_prompt", "width", "height",
                             "retries", "params"});
        cfg.generation.backend = g.value("backend", cfg.generation.backend);
        cfg.generation.endpoint = g.value("endpoint", "");
        cfg.generation.images_per_prompt =
            g.value("images_per_prompt", cfg.generation.images_per_prompt);
        cfg.generation.width = g.value("width", cfg.generation.width);
        cfg.generation.height = g.value("height", cfg.generation.height);
        cfg.generation.retries = g.value("retries", cfg.generation.retries);
        if (g.contains("params")) {
            cfg.generation.params = g["params"].get<std::map<std::string, std::string>>();
        }
    }

    if (doc.contains("labeling")) {
        const auto& l = doc["labeling"];
        reject_unknown_keys(l, "labeling.",
                            {"backend", "endpoint", "min_area_fraction", "mock_box_scale"});
        cfg.labeling.backend = l.value("backend", cfg.labeling.backend);
        cfg.labeling.endpoint = l.value("endpoint", "");
        cfg.labeling.min_area_fraction =
            l.value("min_area_fraction", cfg.labeling.min_area_fraction);
        cfg.labeling.mock_box_scale = l.value("mock_box_scale", cfg.labeling.mock_box_scale);
    }

    if (doc.contains("encoders")) {
        const auto& e = doc["encoders"];
        reject_unknown_keys(e, "encoders.", {"vision", "text", "descriptor", "vlm", "joint"});
        if (e.contains("vision")) {
            const auto& v = e["vision"];
            reject_unknown_keys(v, "encoders.vision.",
                                {"backend", "endpoint", "resolution", "grid", "dim"});
            cfg.vision.backend = v.value("backend", cfg.vision.backend);
            cfg.vision.endpoint = v.value("endpoint", "");
            cfg.vision.resolution = v.value("resolution", cfg.vision.resolution);
            cfg.vision.grid = v.value("grid", cfg.vision.grid);
            cfg.vision.dim = v.value("dim", cfg.vision.dim);
        }
        if (e.contains("text")) {
            const auto& t = e["text"];
            reject_unknown_keys(t, "encoders.text.", {"backend", "endpoint", "dim"});
            cfg.text.backend = t.value("backend", cfg.text.backend);
            cfg.text.endpoint = t.value("endpoint", "");
            cfg.text.dim = t.value("dim", cfg.text.dim);
        }
        if (e.contains("descriptor")) {
            const auto& d = e["descriptor"];
            reject_unknown_keys(d, "encoders.descriptor.",
                                {"backend", "endpoint", "instruction", "cache_dir"});
            cfg.descriptor.backend = d.value("backend", cfg.descriptor.backend);
            cfg.descriptor.endpoint = d.value("endpoint", "");
            cfg.descriptor.instruction = d.value("instruction", cfg.descriptor.instruction);
            cfg.descriptor.cache_dir =
                resolve_path(d.value("cache_dir", cfg.descriptor.cache_dir), config_dir);
        }
        if (e.contains("vlm")) {
            const auto& v = e["vlm"];
            reject_unknown_keys(v, "encoders.vlm.", {"backend", "endpoint", "prompt"});
            cfg.vlm.backend = v.value("backend", cfg.vlm.backend);
            cfg.vlm.endpoint = v.value("endpoint", "");
            cfg.vlm.prompt = v.value("prompt", cfg.vlm.prompt);
        }
        if (e.contains("joint")) {
            const auto& j = e["joint"];
            reject_unknown_keys(j, "encoders.joint.", {"backend", "endpoint", "dim"});
            cfg.joint.backend = j.value("backend", cfg.joint.backend);
            cfg.joint.endpoint = j.value("endpoint", "");
            cfg.joint.dim = j.value("dim", cfg.joint.dim);
        }
    }

    if (doc.contains("train")) {
        const auto& t = doc["train"];
        reject_unknown_keys(t, "train.",
                            {"optimizer", "learning_rate", "weight_decay", "batch_size",
                             "epochs", "hidden", "head_mode", "pooling", "descriptor_mode",
                             "test_holdout_per_class"});
        cfg.train.optimizer = t.value("optimizer", cfg.train.optimizer);
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.hidden = t.value("hidden", cfg.train.hidden);
        cfg.train.head_mode = t.value("head_mode", cfg.train.head_mode);
        if (t.contains("pooling")) {
            cfg.train.pooling = pooling_from_name(t["pooling"].get<std::string>());
        }
        cfg.train.descriptor_mode = t.value("descriptor_mode", cfg.train.descriptor_mode);
        if (cfg.train.descriptor_mode != "class_bank" && cfg.train.descriptor_mode != "per_image") {
            throw ConfigError("config: train.descriptor_mode must be class_bank or per_image");
        }
        cfg.test_holdout_per_class = t.value("test_holdout_per_class", cfg.test_holdout_per_class);
    }
    cfg.train.seed = cfg.seed;

    if (doc.contains("descriptors")) {
        cfg.descriptors = doc["descriptors"].get<std::map<std::string, std::string>>();
        for (const auto& [cls, text] : cfg.descriptors) {
            if (!cfg.taxonomy.contains(cls)) {
                throw ConfigError("config: descriptor text for unknown class '" + cls + "'");
            }
            if (text.empty()) throw ConfigError("config: empty descriptor for class '" + cls + "'");
        }
    }

    if (doc.contains("eval")) {
        const auto& e = doc["eval"];
        reject_unknown_keys(e, "eval.", {"class_set", "dataset_id", "with_iou"});
        if (e.contains("class_set")) {
            cfg.eval.class_set = e["class_set"].get<std::vector<std::string>>();
        }
        cfg.eval.dataset_id = e.value("dataset_id", cfg.eval.dataset_id);
        cfg.eval.with_iou = e.value("with_iou", cfg.eval.with_iou);
    }

    if (doc.contains("analyze")) {
        const auto& a = doc["analyze"];
        reject_unknown_keys(a, "analyze.", {"axis_range", "fractions"});
        if (a.contains("axis_range")) {
            const auto range = a["axis_range"].get<std::vector<double>>();
            if (range.size() != 2 || range[0] >= range[1]) {
                throw ConfigError("config: analyze.axis_range must be [lo, hi]");
            }
            cfg.analyze.axis_range = {range[0], range[1]};
        }
        if (a.contains("fractions")) {
            cfg.analyze.fractions = a["fractions"].get<std::vector<double>>();
        }
    }

    // referential checks
    if (cfg.vision.resolution % cfg.vision.grid != 0) {
        throw ConfigError("config: vision resolution must be a multiple of the grid size");
    }
    if (!cfg.prompt.deny_list.empty() && !std::filesystem::exists(cfg.prompt.deny_list)) {
        throw ConfigError("config: deny list not found: " + cfg.prompt.deny_list);
    }
    if (!(cfg.labeling.min_area_fraction >= 0.0)) {
        throw ConfigError("config: labeling.min_area_fraction must be >= 0");
    }
    for (const auto& cls : cfg.eval.class_set) {
        if (!cfg.taxonomy.contains(cls)) {
            throw ConfigError("config: eval.class_set contains unknown class '" + cls + "'");
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.has_parent_path() ? path.parent_path()
                                                          : std::filesystem::path("."));
}

namespace {

// role-salted sub-seeds so one --seed drives independent streams
uint64_t role_seed(const RunConfig& cfg, const char* role) {
    return hash_combine(cfg.seed, fnv1a64(role));
}

[[noreturn]] void unknown_backend(const std::string& section, const std::string& backend) {
    throw ConfigError("config: unknown " + section + " backend '" + backend + "'");
}

} // namespace

std::unique_ptr<TripletProposer> make_triplet_proposer(const RunConfig& cfg) {
    if (cfg.prompt.proposer == "mock") {
        return std::make_unique<MockTripletProposer>(role_seed(cfg, "proposer"));
    }
    unknown_backend("prompt.proposer", cfg.prompt.proposer);
}

std::unique_ptr<GenerationBackend> make_generation_backend(const RunConfig& cfg) {
    if (cfg.generation.backend == "mock") {
        return std::make_unique<MockGenerationBackend>(cfg.taxonomy.classes());
    }
    if (cfg.generation.backend == "http") {
        return std::make_unique<HttpGenerationBackend>(cfg.generation.endpoint,
                                                       cfg.generation.params);
    }
    unknown_backend("generation", cfg.generation.backend);
}

std::unique_ptr<SegmentationBackend> make_segmentation_backend(const RunConfig& cfg) {
    if (cfg.labeling.backend == "mock") {
        return std::make_unique<MockSegmentationBackend>(cfg.labeling.mock_box_scale);
    }
    if (cfg.labeling.backend == "http") {
        return std::make_unique<HttpSegmentationBackend>(cfg.labeling.endpoint);
    }
    unknown_backend("labeling", cfg.labeling.backend);
}

std::shared_ptr<VisionEncoder> make_vision_encoder(const RunConfig& cfg) {
    if (cfg.vision.backend == "mock") {
        return std::make_shared<MockVisionEncoder>(cfg.vision.resolution, cfg.vision.grid,
                                                   cfg.vision.dim, role_seed(cfg, "vision"));
    }
    if (cfg.vision.backend == "http") {
        return std::make_shared<HttpVisionEncoder>(cfg.vision.endpoint, cfg.vision.resolution,
                                                   cfg.vision.grid, cfg.vision.dim);
    }
    unknown_backend("encoders.vision", cfg.vision.backend);
}

std::shared_ptr<TextEncoder> make_text_encoder(const RunConfig& cfg) {
    if (cfg.text.backend == "mock") {
        return std::make_shared<MockTextEncoder>(cfg.text.dim, role_seed(cfg, "text"));
    }
    if (cfg.text.backend == "http") {
        return std::make_shared<HttpTextEncoder>(cfg.text.endpoint, cfg.text.dim);
    }
    unknown_backend("encoders.text", cfg.text.backend);
}

std::shared_ptr<DescriptorGenerator> make_descriptor_generator(const RunConfig& cfg) {
    std::shared_ptr<DescriptorGenerator> inner;
    if (cfg.descriptor.backend == "mock") {
        inner = std::make_shared<MockDescriptorGenerator>(cfg.descriptor.instruction);
    } else if (cfg.descriptor.backend == "http") {
        inner = std::make_shared<HttpDescriptorGenerator>(cfg.descriptor.endpoint,
                                                          cfg.descriptor.instruction);
    } else {
        unknown_backend("encoders.descriptor", cfg.descriptor.backend);
    }
    // remote descriptor responses must be replayable; mocks share the path
    return std::make_shared<CachedDescriptorGenerator>(std::move(inner),
                                                       cfg.descriptor.cache_dir);
}

std::shared_ptr<MaterialVlm> make_material_vlm(const RunConfig& cfg) {
    if (cfg.vlm.backend == "mock") {
        return std::make_shared<MockMaterialVlm>(cfg.taxonomy.classes());
    }
    if (cfg.vlm.backend == "http") {
        return std::make_shared<HttpMaterialVlm>(cfg.vlm.endpoint);
    }
    unknown_backend("encoders.vlm", cfg.vlm.backend);
}

std::shared_ptr<JointEmbedder> make_joint_embedder(const RunConfig& cfg) {
    if (cfg.joint.backend == "mock") {
        return std::make_shared<MockJointEmbedder>(cfg.joint.dim, role_seed(cfg, "joint"));
    }
    if (cfg.joint.backend == "http") {
        return std::make_shared<HttpJointEmbedder>(cfg.joint.endpoint, cfg.joint.dim);
    }
    unknown_backend("encoders.joint", cfg.joint.backend);
}

} // namespace matkit
