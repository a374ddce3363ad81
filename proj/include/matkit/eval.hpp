// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matkit/manifest.hpp"

namespace matkit {

/// KxK counts; rows are true classes, columns predictions.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k) : k_(k), counts_(static_cast<size_t>(k) * k, 0) {}

    int num_classes() const { return k_; }
    int64_t at(int truth, int pred) const { return counts_[index(truth, pred)]; }
    void add(int truth, int pred, int64_t n = 1);

    int64_t row_sum(int truth) const;
    int64_t col_sum(int pred) const;
    int64_t total() const;

private:
    size_t index(int truth, int pred) const;
    int k_ = 0;
    std::vector<int64_t> counts_;
};

/// Tallies (truth, prediction) pairs; labels must lie in [0, K).
ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truths, int k);

/// Mean per-class recall over classes with at least one test sample.
double mean_accuracy(const ConfusionMatrix& cm);

/// Mean over classes of TP / (TP + FP + FN); classes with zero denominator
/// are excluded.
double mean_iou(const ConfusionMatrix& cm);

/// Per-class recall; nullopt for classes without test samples.
std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm);

/// Truncation (not rounding) to two decimals: 0.896 -> "0.89", 1.0 -> "1.00".
std::string truncate2(double v);

/// "mIoU|mAcc" rendering, e.g. "0.52|0.67".
std::string format_miou_macc(double miou, double macc);

/// Per-class accuracy table, one column per method, with a final Average row.
/// Values are truncated to two decimals; classes without samples print "-".
std::string per_class_table(const std::vector<std::string>& class_names,
                            const std::vector<std::string>& method_ids,
                            const std::vector<std::vector<std::optional<double>>>& columns);
std::string per_class_table(const ConfusionMatrix& cm,
                            const std::vector<std::string>& class_names);
std::string per_class_table_csv(const std::vector<std::string>& class_names,
                                const std::vector<std::string>& method_ids,
                                const std::vector<std::vector<std::optional<double>>>& columns);

struct EvalReport {
    std::string method_id;
    std::string dataset_id;
    std::string class_set_id;
    std::vector<std::string> class_names;
    ConfusionMatrix cm;
    std::vector<std::optional<double>> per_class;
    double macc = 0.0;
    std::optional<double> miou;  // omitted for accuracy-only protocols
    size_t unevaluated = 0;      // backend failures excluded from the denominator

    static EvalReport from_confusion(const ConfusionMatrix& cm,
                                     const std::vector<std::string>& class_names,
                                     const std::string& method_id,
                                     const std::string& dataset_id,
                                     const std::string& class_set_id, bool with_iou = true);
};

void save_report_json(const std::filesystem::path& path, const EvalReport& report);
EvalReport load_report_json(const std::filesystem::path& path);
std::string report_text(const EvalReport& report);

/// One dataset's 2-D footprint under the shared projection.
struct PcaOverlay {
    std::string dataset_id;
    std::vector<std::array<double, 2>> points;
    std::array<double, 2> mean{0.0, 0.0};
    double semi_major = 0.0; // 2 standard deviations along the principal axes
    double semi_minor = 0.0;
    double angle_rad = 0.0;  // orientation of the major axis
    bool degenerate = false; // zero-variance cloud collapses to a point
};

struct PcaOverlaySet {
    std::vector<PcaOverlay> overlays;
    std::array<double, 2> axis_range{-40.0, 40.0};
    Eigen::MatrixXd basis;  // D x 2, fitted once on the union of all datasets
    Eigen::VectorXd center; // shared mean
    std::vector<std::string> skipped; // datasets with < 2 points
};

/// Fits one PCA basis across all datasets, projects every dataset onto it and
/// fits a 2-sigma covariance ellipse per dataset. Axis range is fixed.
PcaOverlaySet pca_overlay(const std::map<std::string, std::vector<Eigen::VectorXd>>& feature_sets,
                          std::array<double, 2> axis_range = {-40.0, 40.0},
                          const std::function<void(const std::string&)>& warn = {});

void write_pca_csv(const std::filesystem::path& path, const PcaOverlaySet& set);
void write_pca_svg(const std::filesystem::path& path, const PcaOverlaySet& set);

struct ScalePoint {
    double fraction = 0.0;
    size_t train_size = 0;
    double miou = 0.0;
    double macc = 0.0;
};

/// Runs one full train+eval per fraction on stratified subsets. Fractions are
/// taken relative to optional per-class baseline counts (default: the
/// manifest itself), which is how schedules above 1x stay feasible on a
/// larger corpus.
std::vector<ScalePoint> scale_ablation(
    const DatasetManifest& manifest, const std::vector<double>& fractions,
    const std::function<std::pair<double, double>(const DatasetManifest&, double)>& train_eval,
    uint64_t seed, const std::map<std::string, size_t>& baseline_per_class = {});

void write_scale_csv(const std::filesystem::path& path, const std::vector<ScalePoint>& curve);

} // namespace matkit
