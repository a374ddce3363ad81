// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "matkit/config.hpp"
#include "matkit/eval.hpp"
#include "matkit/manifest.hpp"

// Library-level command implementations. The CLI binary is a thin argument
// parser over these, so tests exercise the same code paths. Commands are
// idempotent: re-running with identical config and seed rewrites identical
// bytes (logs carrying wall-clock time go to the log callback, never into
// artifacts).

namespace matkit {

struct CommandOptions {
    std::filesystem::path out_dir = "out";
    int jobs = 1;
    std::function<void(const std::string&)> log; // human status; may be empty
};

struct GenerateOutputs {
    std::filesystem::path records_path;
    size_t records = 0;
    size_t failures = 0;
};

/// prompts -> deny filter -> image generation -> records manifest.
GenerateOutputs cmd_generate(const RunConfig& cfg, const CommandOptions& opt);

struct LabelOutputs {
    std::filesystem::path dataset_path;
    std::filesystem::path summary_path;
    size_t accepted = 0;
    size_t rejected = 0;
};

/// records -> segmentation -> label assignment -> dataset manifest.
/// The records manifest and the output directory must coincide so that
/// relative image paths stay valid.
LabelOutputs cmd_label(const RunConfig& cfg, const std::filesystem::path& records_path,
                       const CommandOptions& opt);

struct TrainOutputs {
    std::filesystem::path checkpoint_path;
    std::filesystem::path log_path;
    std::optional<std::filesystem::path> train_manifest_path; // with holdout
    std::optional<std::filesystem::path> test_manifest_path;
    double final_loss = 0.0;
    double final_accuracy = 0.0;
    std::vector<TrainEpoch> epochs;
};

/// dataset -> frozen-encoder features -> trained head -> checkpoint.
TrainOutputs cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset_path,
                       const CommandOptions& opt);

struct EvalOutputs {
    std::filesystem::path report_json;
    std::filesystem::path report_txt;
    std::filesystem::path report_csv;
    EvalReport report;
};

/// Evaluation methods: "ours" (checkpoint required), "zeroshot", "vlm",
/// "retrieval" (features file required).
EvalOutputs cmd_eval(const RunConfig& cfg, const std::string& method,
                     const std::filesystem::path& test_manifest_path,
                     const std::filesystem::path& checkpoint_path,
                     const std::filesystem::path& features_path, const CommandOptions& opt);

struct FeatureDumpOutputs {
    std::filesystem::path features_path;
    size_t count = 0;
};

/// Pooled vision feature per sample, as JSON lines {id, label, vector};
/// the input format of the retrieval baseline and the PCA overlays.
FeatureDumpOutputs cmd_analyze_features(const RunConfig& cfg,
                                        const std::filesystem::path& dataset_path,
                                        const std::string& dump_name, const CommandOptions& opt);

struct PcaOutputs {
    std::vector<std::filesystem::path> csv_paths;
    std::vector<std::filesystem::path> svg_paths;
};

/// One overlay set per class across the named feature dumps.
PcaOutputs cmd_analyze_pca(const RunConfig& cfg,
                           const std::vector<std::pair<std::string, std::filesystem::path>>& dumps,
                           const std::vector<std::string>& class_names, const CommandOptions& opt);

struct ScaleOutputs {
    std::filesystem::path curve_csv;
    std::vector<std::filesystem::path> report_paths; // one per fraction
    std::vector<ScalePoint> curve;
    std::vector<double> train_accuracies; // post-training full-pass accuracy per fraction
};

/// Fraction schedule from the config: stratified subset -> train -> eval,
/// once per fraction. Evaluates on the test manifest when given, otherwise on
/// the training subset itself.
ScaleOutputs cmd_analyze_scale(const RunConfig& cfg, const std::filesystem::path& dataset_path,
                               const std::filesystem::path& test_manifest_path,
                               const CommandOptions& opt);

struct TableOutputs {
    std::filesystem::path table_txt;
    std::filesystem::path table_csv;
    std::string text;
};

/// Side-by-side per-class table over several evaluation reports (one method
/// column each); all reports must share one class list.
TableOutputs cmd_analyze_table(const std::vector<std::filesystem::path>& report_paths,
                               const CommandOptions& opt);

struct StatsOutputs {
    ClassStats stats;
    std::string text;
};

StatsOutputs cmd_stats(const RunConfig& cfg, const std::filesystem::path& dataset_path);

} // namespace matkit
