// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "matkit/errors.hpp"
#include "matkit/parallel.hpp"

namespace matkit {

using json = nlohmann::json;

namespace {

void log_line(const CommandOptions& opt, const std::string& msg) {
    if (opt.log) opt.log(msg);
}

std::string fraction_tag(double fraction) {
    std::ostringstream out;
    out << fraction;
    std::string tag = out.str();
    std::replace(tag.begin(), tag.end(), '.', 'p');
    return tag;
}

} // namespace

GenerateOutputs cmd_generate(const RunConfig& cfg, const CommandOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);

    auto proposer = make_triplet_proposer(cfg);
    const auto candidates =
        propose_triplets(cfg.taxonomy, cfg.prompt.objects_per_class, *proposer);
    DenyList deny;
    if (!cfg.prompt.deny_list.empty()) deny = DenyList::load(cfg.prompt.deny_list);
    const auto triplets = filter_triplets(candidates, deny);
    log_line(opt, "triplets: " + std::to_string(candidates.size()) + " proposed, " +
                      std::to_string(triplets.size()) + " after deny filter");
    if (triplets.empty()) {
        throw PreconditionError("generate: no validated triplets survive the deny list");
    }

    auto backend = make_generation_backend(cfg);
    GenerationOptions gen_opt;
    gen_opt.images_per_prompt = cfg.generation.images_per_prompt;
    gen_opt.width = cfg.generation.width;
    gen_opt.height = cfg.generation.height;
    gen_opt.base_seed = static_cast<int64_t>(cfg.seed);
    gen_opt.prompt_template = cfg.prompt.templ;
    gen_opt.retries = cfg.generation.retries;
    gen_opt.jobs = opt.jobs;

    const auto result = generate_images(triplets, gen_opt, *backend, opt.out_dir / "images",
                                        [&](const std::string& m) { log_line(opt, m); });

    GenerateOutputs out;
    out.records_path = opt.out_dir / "records.jsonl";
    out.records = result.records.size();
    out.failures = result.failures;
    save_records(out.records_path, result.records);
    log_line(opt, "generated " + std::to_string(out.records) + " images (" +
                      std::to_string(out.failures) + " failures)");
    return out;
}

LabelOutputs cmd_label(const RunConfig& cfg, const std::filesystem::path& records_path,
                       const CommandOptions& opt) {
    const auto records = load_records(records_path);
    if (records.empty()) throw PreconditionError("label: records manifest is empty");
    const auto records_dir =
        records_path.has_parent_path() ? records_path.parent_path() : std::filesystem::path(".");
    std::filesystem::create_directories(opt.out_dir / "masks");

    auto backend = make_segmentation_backend(cfg);
    const int jobs = backend->concurrent_safe() ? std::max(1, opt.jobs) : 1;

    // keep image references valid even when the dataset lands elsewhere
    auto rel_image_path = [&](const std::string& recorded) {
        const auto absolute = std::filesystem::absolute(records_dir / recorded);
        std::error_code ec;
        const auto rel = std::filesystem::relative(absolute,
                                                   std::filesystem::absolute(opt.out_dir), ec);
        return ec || rel.empty() ? absolute.string() : rel.string();
    };

    std::vector<std::optional<LabelOutcome>> slots(records.size());
    parallel_for(records.size(), jobs, [&](size_t i) {
        const ImageRecord& rec = records[i];
        const Image image = load_image(records_dir / rec.image_path);
        const BinaryMask mask = segment_object(image, rec, *backend);
        LabelOutcome outcome = assign_label(rec, mask, cfg.labeling.min_area_fraction);
        if (std::holds_alternative<MaskedSample>(outcome)) {
            save_mask(opt.out_dir / "masks" / (rec.id + ".png"), mask);
            std::get<MaskedSample>(outcome).image_path = rel_image_path(rec.image_path);
        }
        slots[i] = std::move(outcome);
    });

    DatasetManifest manifest(cfg.taxonomy);
    manifest.set_base_dir(opt.out_dir);
    size_t rejected = 0;
    std::map<std::string, size_t> rejected_by_reason;
    for (auto& slot : slots) {
        if (std::holds_alternative<MaskedSample>(*slot)) {
            manifest.append(std::get<MaskedSample>(std::move(*slot)));
        } else {
            ++rejected;
            ++rejected_by_reason[std::get<Rejection>(*slot).reason];
        }
    }

    LabelOutputs out;
    out.dataset_path = opt.out_dir / "dataset.jsonl";
    out.summary_path = opt.out_dir / "label_summary.json";
    out.accepted = manifest.size();
    out.rejected = rejected;
    manifest.save(out.dataset_path);
    {
        json summary{{"records", records.size()},
                     {"accepted", out.accepted},
                     {"rejected", out.rejected},
                     {"rejected_by_reason", rejected_by_reason},
                     {"min_area_fraction", cfg.labeling.min_area_fraction}};
        std::ofstream s(out.summary_path);
        if (!s) throw IoError("cannot write label summary");
        s << summary.dump(2) << "\n";
    }
    log_line(opt, "labeled " + std::to_string(out.accepted) + " samples, rejected " +
                      std::to_string(out.rejected));
    return out;
}

TrainOutputs cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset_path,
                       const CommandOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);
    DatasetManifest manifest = DatasetManifest::load(dataset_path, cfg.taxonomy);

    TrainOutputs out;
    DatasetManifest train_manifest(cfg.taxonomy);
    if (cfg.test_holdout_per_class > 0) {
        const DatasetManifest test =
            build_test_split(manifest, cfg.test_holdout_per_class, cfg.seed);
        train_manifest = subtract(manifest, test, "train");
        out.test_manifest_path = opt.out_dir / "dataset_test.jsonl";
        out.train_manifest_path = opt.out_dir / "dataset_train.jsonl";
        test.save(*out.test_manifest_path);
        train_manifest.save(*out.train_manifest_path);
    } else {
        // keep everything not explicitly flagged as test
        train_manifest.set_base_dir(manifest.base_dir());
        for (const auto& e : manifest.entries()) {
            if (e.split != "test") train_manifest.append(e);
        }
    }
    if (train_manifest.size() == 0) throw PreconditionError("train: no training samples");

    auto vision = make_vision_encoder(cfg);
    auto text = make_text_encoder(cfg);
    const FeaturePipeline pipeline(vision, cfg.train.pooling);
    const ClassDescriptorBank bank = build_class_bank(cfg.taxonomy, cfg.descriptors, *text);
    std::shared_ptr<DescriptorGenerator> descriptor;
    if (cfg.train.descriptor_mode == "per_image") descriptor = make_descriptor_generator(cfg);

    const TrainResult result =
        train_classifier(train_manifest, bank, pipeline, cfg.train, opt.jobs,
                         [&](const std::string& m) { log_line(opt, m); }, descriptor.get(),
                         text.get());

    Checkpoint cp;
    cp.head = result.head;
    cp.classes = cfg.taxonomy.classes();
    cp.vision_adapter_id = vision->id();
    cp.vision_resolution = vision->input_resolution();
    cp.vision_grid = vision->grid_size();
    cp.vision_dim = vision->feature_dim();
    cp.text_adapter_id = text->id();
    cp.text_dim = text->embedding_dim();
    cp.train_config = cfg.train;
    cp.bank_texts = bank.texts;

    out.checkpoint_path = opt.out_dir / "checkpoint.json";
    out.log_path = opt.out_dir / "train_log.json";
    save_checkpoint(out.checkpoint_path, cp);
    {
        json epochs = json::array();
        for (const auto& e : result.log) {
            epochs.push_back(json{{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
        }
        json doc{{"epochs", epochs},
                 {"final_loss", result.final_loss},
                 {"final_accuracy", result.final_accuracy},
                 {"train_samples", train_manifest.size()}};
        std::ofstream lg(out.log_path);
        if (!lg) throw IoError("cannot write train log");
        lg << doc.dump(2) << "\n";
    }
    out.final_loss = result.final_loss;
    out.final_accuracy = result.final_accuracy;
    out.epochs = result.log;
    log_line(opt, "trained head: final loss " + std::to_string(result.final_loss) +
                      ", train accuracy " + std::to_string(result.final_accuracy));
    return out;
}

namespace {

struct EvalContext {
    MaterialTaxonomy eval_tax;       // restricted candidate set
    std::vector<int> truths;         // indices into eval_tax
    std::vector<size_t> sample_idx;  // positions in the manifest
    size_t skipped_outside_class_set = 0;
};

EvalContext collect_eval_samples(const RunConfig& cfg, const DatasetManifest& manifest) {
    EvalContext ctx;
    ctx.eval_tax = cfg.eval_taxonomy();
    for (size_t i = 0; i < manifest.entries().size(); ++i) {
        const auto idx = ctx.eval_tax.index_of(manifest.entries()[i].label);
        if (!idx) {
            ++ctx.skipped_outside_class_set;
            continue;
        }
        ctx.truths.push_back(*idx);
        ctx.sample_idx.push_back(i);
    }
    if (ctx.truths.empty()) {
        throw PreconditionError("eval: no test samples inside the evaluation class set");
    }
    return ctx;
}

DescriptorVectorSet load_feature_dump(const std::filesystem::path& path,
                                      const MaterialTaxonomy& taxonomy) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read feature dump: " + path.string());
    std::vector<std::vector<double>> rows;
    DescriptorVectorSet set;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("feature dump line " + std::to_string(lineno) + ": " + e.what());
        }
        const std::string label = j.at("label").get<std::string>();
        const auto idx = taxonomy.index_of(label);
        if (!idx) continue; // outside the evaluation class set
        rows.push_back(j.at("vector").get<std::vector<double>>());
        set.labels.push_back(*idx);
        set.ids.push_back(j.at("id").get<std::string>());
    }
    if (rows.empty()) throw PreconditionError("feature dump has no usable rows");
    const size_t dim = rows.front().size();
    set.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != dim) throw PreconditionError("feature dump has mixed dimensions");
        for (size_t c = 0; c < dim; ++c) {
            set.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return set;
}

} // namespace

EvalOutputs cmd_eval(const RunConfig& cfg, const std::string& method,
                     const std::filesystem::path& test_manifest_path,
                     const std::filesystem::path& checkpoint_path,
                     const std::filesystem::path& features_path, const CommandOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);

    EvalReport report;
    if (method == "retrieval") {
        const MaterialTaxonomy eval_tax = cfg.eval_taxonomy();
        const DescriptorVectorSet set = load_feature_dump(features_path, eval_tax);
        const auto preds = retrieval_classify(set);
        const auto cm = confusion(preds, set.labels, static_cast<int>(eval_tax.size()));
        report = EvalReport::from_confusion(cm, eval_tax.classes(), "retrieval",
                                            cfg.eval.dataset_id, cfg.class_set_id(),
                                            cfg.eval.with_iou);
    } else {
        DatasetManifest manifest = DatasetManifest::load(test_manifest_path, cfg.taxonomy);
        EvalContext ctx = collect_eval_samples(cfg, manifest);
        if (ctx.skipped_outside_class_set > 0) {
            log_line(opt, "eval: skipped " + std::to_string(ctx.skipped_outside_class_set) +
                              " samples outside the class set");
        }
        const int k = static_cast<int>(ctx.eval_tax.size());
        std::vector<int> preds(ctx.truths.size(), -1);
        size_t unevaluated = 0;

        if (method == "ours") {
            const Checkpoint cp = load_checkpoint(checkpoint_path);
            auto vision = make_vision_encoder(cfg);
            auto text = make_text_encoder(cfg);
            if (cp.vision_adapter_id != vision->id() || cp.vision_dim != vision->feature_dim() ||
                cp.vision_grid != vision->grid_size() ||
                cp.vision_resolution != vision->input_resolution()) {
                throw ConfigError("eval: configured vision adapter does not match checkpoint (" +
                                  cp.vision_adapter_id + ")");
            }
            if (cp.text_adapter_id != text->id() || cp.text_dim != text->embedding_dim()) {
                throw ConfigError("eval: configured text adapter does not match checkpoint");
            }
            if (cp.classes != cfg.taxonomy.classes()) {
                throw ConfigError("eval: checkpoint class list does not match the taxonomy");
            }
            // bank embeddings recomputed from the checkpointed texts
            std::vector<TextEmbedding> bank(cp.bank_texts.size());
            for (size_t i = 0; i < cp.bank_texts.size(); ++i) {
                bank[i] = encode_text(cp.bank_texts[i], *text);
            }
            const FeaturePipeline pipeline(vision, cp.train_config.pooling);
            std::shared_ptr<DescriptorGenerator> descriptor;
            const bool per_image = cp.train_config.descriptor_mode == "per_image";
            if (per_image) descriptor = make_descriptor_generator(cfg);

            // full-taxonomy index per restricted candidate
            std::vector<int> full_index(ctx.eval_tax.size());
            for (size_t i = 0; i < ctx.eval_tax.size(); ++i) {
                full_index[i] = *cfg.taxonomy.index_of(ctx.eval_tax.classes()[i]);
            }

            for (size_t s = 0; s < ctx.sample_idx.size(); ++s) {
                const MaskedSample& sample = manifest.entries()[ctx.sample_idx[s]];
                const Image image = load_image(manifest.resolve(sample.image_path));
                const BinaryMask mask = load_mask(manifest.resolve(sample.mask_path));
                const Eigen::VectorXd vision_feat = pipeline.vision_feature(image, mask);

                std::optional<Eigen::VectorXd> per_image_probs;
                if (per_image) {
                    try {
                        const std::string text_desc = describe_region(image, mask, *descriptor);
                        per_image_probs =
                            forward(cp.head, fuse(vision_feat, encode_text(text_desc, *text)));
                    } catch (const BackendError& e) {
                        log_line(opt, std::string("descriptor backend failed (") + e.what() +
                                          "); class-bank fallback for sample " + sample.id);
                    }
                }
                int best = 0;
                double best_score = 0.0;
                for (int c = 0; c < k; ++c) {
                    double score;
                    if (per_image_probs) {
                        score = (*per_image_probs)(full_index[static_cast<size_t>(c)]);
                    } else {
                        const Eigen::VectorXd probs = forward(
                            cp.head,
                            fuse(vision_feat, bank[static_cast<size_t>(
                                                  full_index[static_cast<size_t>(c)])]));
                        score = probs(full_index[static_cast<size_t>(c)]);
                    }
                    if (c == 0 || score > best_score) {
                        best_score = score;
                        best = c;
                    }
                }
                preds[s] = best;
            }
        } else if (method == "zeroshot") {
            auto embedder = make_joint_embedder(cfg);
            for (size_t s = 0; s < ctx.sample_idx.size(); ++s) {
                const MaskedSample& sample = manifest.entries()[ctx.sample_idx[s]];
                const Image image = load_image(manifest.resolve(sample.image_path));
                preds[s] = zeroshot_nn_classify(image, ctx.eval_tax.classes(), *embedder);
            }
        } else if (method == "vlm") {
            auto vlm = make_material_vlm(cfg);
            for (size_t s = 0; s < ctx.sample_idx.size(); ++s) {
                const MaskedSample& sample = manifest.entries()[ctx.sample_idx[s]];
                const Image image = load_image(manifest.resolve(sample.image_path));
                const BinaryMask mask = load_mask(manifest.resolve(sample.mask_path));
                try {
                    const auto matched =
                        vlm_prompt_classify(image, mask, *vlm, ctx.eval_tax, cfg.vlm.prompt);
                    if (matched) {
                        preds[s] = *ctx.eval_tax.index_of(*matched);
                    } else {
                        // a response naming no class is a miss; only row
                        // statistics feed this accuracy-only protocol
                        preds[s] = (ctx.truths[s] + 1) % k;
                    }
                } catch (const BackendError&) {
                    preds[s] = -2; // unevaluated, excluded from the denominator
                    ++unevaluated;
                }
            }
        } else {
            throw ConfigError("eval: unknown method '" + method + "'");
        }

        ConfusionMatrix cm(k);
        for (size_t s = 0; s < preds.size(); ++s) {
            if (preds[s] >= 0) cm.add(ctx.truths[s], preds[s]);
        }
        const bool with_iou = cfg.eval.with_iou && method != "vlm";
        report = EvalReport::from_confusion(cm, ctx.eval_tax.classes(), method,
                                            cfg.eval.dataset_id, cfg.class_set_id(), with_iou);
        report.unevaluated = unevaluated;
    }

    EvalOutputs out;
    out.report = report;
    out.report_json = opt.out_dir / ("eval_" + method + ".json");
    out.report_txt = opt.out_dir / ("eval_" + method + ".txt");
    out.report_csv = opt.out_dir / ("eval_" + method + ".csv");
    save_report_json(out.report_json, report);
    {
        std::ofstream t(out.report_txt);
        if (!t) throw IoError("cannot write report text");
        t << report_text(report);
        std::ofstream c(out.report_csv);
        if (!c) throw IoError("cannot write report csv");
        c << per_class_table_csv(report.class_names, {report.method_id}, {report.per_class});
    }
    log_line(opt, "eval " + method + ": " +
                      (report.miou ? format_miou_macc(*report.miou, report.macc)
                                   : "mAcc " + truncate2(report.macc)));
    return out;
}

FeatureDumpOutputs cmd_analyze_features(const RunConfig& cfg,
                                        const std::filesystem::path& dataset_path,
                                        const std::string& dump_name, const CommandOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);
    DatasetManifest manifest = DatasetManifest::load(dataset_path, cfg.taxonomy);
    if (manifest.size() == 0) throw PreconditionError("analyze features: empty manifest");

    auto vision = make_vision_encoder(cfg);
    const FeaturePipeline pipeline(vision, cfg.train.pooling);

    std::vector<std::string> lines(manifest.size());
    parallel_for(manifest.size(), opt.jobs, [&](size_t i) {
        const MaskedSample& s = manifest.entries()[i];
        const Image image = load_image(manifest.resolve(s.image_path));
        const BinaryMask mask = load_mask(manifest.resolve(s.mask_path));
        const Eigen::VectorXd f = pipeline.vision_feature(image, mask);
        json j{{"id", s.id}, {"label", s.label}};
        json vec = json::array();
        for (Eigen::Index d = 0; d < f.size(); ++d) vec.push_back(f(d));
        j["vector"] = std::move(vec);
        lines[i] = j.dump();
    });

    FeatureDumpOutputs out;
    out.features_path = opt.out_dir / (dump_name + ".jsonl");
    out.count = lines.size();
    std::ofstream f(out.features_path);
    if (!f) throw IoError("cannot write feature dump");
    for (const auto& line : lines) f << line << "\n";
    return out;
}

PcaOutputs cmd_analyze_pca(const RunConfig& cfg,
                           const std::vector<std::pair<std::string, std::filesystem::path>>& dumps,
                           const std::vector<std::string>& class_names, const CommandOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);
    if (dumps.empty()) throw PreconditionError("analyze pca: no feature dumps given");

    // dataset id -> class -> vectors
    std::map<std::string, std::map<std::string, std::vector<Eigen::VectorXd>>> by_dataset;
    for (const auto& [dataset_id, path] : dumps) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read feature dump: " + path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            const auto values = j.at("vector").get<std::vector<double>>();
            Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
            for (size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
            by_dataset[dataset_id][j.at("label").get<std::string>()].push_back(std::move(v));
        }
    }

    const std::vector<std::string> wanted =
        class_names.empty() ? cfg.eval_taxonomy().classes() : class_names;

    PcaOutputs out;
    for (const auto& cls : wanted) {
        std::map<std::string, std::vector<Eigen::VectorXd>> sets;
        for (const auto& [dataset_id, classes] : by_dataset) {
            auto it = classes.find(cls);
            if (it != classes.end()) sets[dataset_id] = it->second;
        }
        if (sets.empty()) {
            log_line(opt, "pca: no features for class '" + cls + "', skipped");
            continue;
        }
        PcaOverlaySet overlay;
        try {
            overlay = pca_overlay(sets, cfg.analyze.axis_range,
                                  [&](const std::string& m) { log_line(opt, m); });
        } catch (const PreconditionError& e) {
            log_line(opt, "pca: class '" + cls + "' skipped: " + e.what());
            continue;
        }
        const auto csv = opt.out_dir / ("pca_" + cls + ".csv");
        const auto svg = opt.out_dir / ("pca_" + cls + ".svg");
        write_pca_csv(csv, overlay);
        write_pca_svg(svg, overlay);
        out.csv_paths.push_back(csv);
        out.svg_paths.push_back(svg);
    }
    if (out.csv_paths.empty()) throw PreconditionError("analyze pca: nothing to plot");
    return out;
}

ScaleOutputs cmd_analyze_scale(const RunConfig& cfg, const std::filesystem::path& dataset_path,
                               const std::filesystem::path& test_manifest_path,
                               const CommandOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);
    DatasetManifest manifest = DatasetManifest::load(dataset_path, cfg.taxonomy);

    auto vision = make_vision_encoder(cfg);
    auto text = make_text_encoder(cfg);
    const FeaturePipeline pipeline(vision, cfg.train.pooling);
    const ClassDescriptorBank bank = build_class_bank(cfg.taxonomy, cfg.descriptors, *text);

    std::optional<DatasetManifest> test;
    if (!test_manifest_path.empty()) {
        test = DatasetManifest::load(test_manifest_path, cfg.taxonomy);
    }

    ScaleOutputs out;
    auto train_eval = [&](const DatasetManifest& subset, double fraction)
        -> std::pair<double, double> {
        const TrainResult trained =
            train_classifier(subset, bank, pipeline, cfg.train, opt.jobs,
                             [&](const std::string& m) { log_line(opt, m); });
        out.train_accuracies.push_back(trained.final_accuracy);
        const DatasetManifest& eval_set = test ? *test : subset;
        const MaterialTaxonomy eval_tax = cfg.eval_taxonomy();
        std::vector<int> preds;
        std::vector<int> truths;
        for (const auto& sample : eval_set.entries()) {
            const auto idx = eval_tax.index_of(sample.label);
            if (!idx) continue;
            const Image image = load_image(eval_set.resolve(sample.image_path));
            const BinaryMask mask = load_mask(eval_set.resolve(sample.mask_path));
            const Eigen::VectorXd vision_feat = pipeline.vision_feature(image, mask);
            int best = 0;
            double best_score = 0.0;
            for (size_t c = 0; c < eval_tax.size(); ++c) {
                const int full = *cfg.taxonomy.index_of(eval_tax.classes()[c]);
                const Eigen::VectorXd probs =
                    forward(trained.head,
                            fuse(vision_feat, bank.embeddings[static_cast<size_t>(full)]));
                const double score = probs(full);
                if (c == 0 || score > best_score) {
                    best_score = score;
                    best = static_cast<int>(c);
                }
            }
            preds.push_back(best);
            truths.push_back(*idx);
        }
        const auto cm = confusion(preds, truths, static_cast<int>(eval_tax.size()));
        EvalReport report = EvalReport::from_confusion(
            cm, eval_tax.classes(), "ours", cfg.eval.dataset_id, cfg.class_set_id(), true);
        const auto report_path =
            opt.out_dir / ("scale_" + fraction_tag(fraction) + ".json");
        save_report_json(report_path, report);
        out.report_paths.push_back(report_path);
        return {report.miou.value_or(0.0), report.macc};
    };

    out.curve = scale_ablation(manifest, cfg.analyze.fractions, train_eval, cfg.seed);
    out.curve_csv = opt.out_dir / "scale_curve.csv";
    write_scale_csv(out.curve_csv, out.curve);
    return out;
}

TableOutputs cmd_analyze_table(const std::vector<std::filesystem::path>& report_paths,
                               const CommandOptions& opt) {
    if (report_paths.empty()) throw PreconditionError("analyze table: no reports given");
    std::filesystem::create_directories(opt.out_dir);
    std::vector<std::string> methods;
    std::vector<std::vector<std::optional<double>>> columns;
    std::vector<std::string> classes;
    for (const auto& path : report_paths) {
        const EvalReport report = load_report_json(path);
        if (classes.empty()) {
            classes = report.class_names;
        } else if (classes != report.class_names) {
            throw PreconditionError("analyze table: reports cover different class lists (" +
                                    path.string() + ")");
        }
        methods.push_back(report.method_id);
        columns.push_back(report.per_class);
    }
    TableOutputs out;
    out.text = per_class_table(classes, methods, columns);
    out.table_txt = opt.out_dir / "combined_table.txt";
    out.table_csv = opt.out_dir / "combined_table.csv";
    {
        std::ofstream t(out.table_txt);
        if (!t) throw IoError("cannot write combined table");
        t << out.text;
        std::ofstream c(out.table_csv);
        if (!c) throw IoError("cannot write combined table csv");
        c << per_class_table_csv(classes, methods, columns);
    }
    return out;
}

StatsOutputs cmd_stats(const RunConfig& cfg, const std::filesystem::path& dataset_path) {
    const DatasetManifest manifest = DatasetManifest::load(dataset_path, cfg.taxonomy);
    StatsOutputs out;
    out.stats = manifest.class_stats();
    std::ostringstream text;
    size_t name_w = std::string("total").size();
    for (const auto& [cls, n] : out.stats.per_class) name_w = std::max(name_w, cls.size());
    for (const auto& cls : cfg.taxonomy.classes()) {
        text << std::left << std::setw(static_cast<int>(name_w)) << cls << "  "
             << out.stats.per_class.at(cls) << "\n";
    }
    text << std::left << std::setw(static_cast<int>(name_w)) << "total" << "  "
         << out.stats.total << "\n";
    out.text = text.str();
    return out;
}

} // namespace matkit
