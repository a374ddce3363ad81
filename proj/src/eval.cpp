// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/eval.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "matkit/errors.hpp"

namespace matkit {

using json = nlohmann::json;

size_t ConfusionMatrix::index(int truth, int pred) const {
    if (truth < 0 || truth >= k_ || pred < 0 || pred >= k_) {
        throw PreconditionError("confusion matrix: label out of range");
    }
    return static_cast<size_t>(truth) * k_ + pred;
}

void ConfusionMatrix::add(int truth, int pred, int64_t n) { counts_[index(truth, pred)] += n; }

int64_t ConfusionMatrix::row_sum(int truth) const {
    int64_t s = 0;
    for (int p = 0; p < k_; ++p) s += at(truth, p);
    return s;
}

int64_t ConfusionMatrix::col_sum(int pred) const {
    int64_t s = 0;
    for (int t = 0; t < k_; ++t) s += at(t, pred);
    return s;
}

int64_t ConfusionMatrix::total() const {
    int64_t s = 0;
    for (int64_t c : counts_) s += c;
    return s;
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truths, int k) {
    if (preds.size() != truths.size()) {
        throw PreconditionError("confusion: prediction/truth length mismatch");
    }
    ConfusionMatrix cm(k);
    for (size_t i = 0; i < preds.size(); ++i) cm.add(truths[i], preds[i]);
    return cm;
}

double mean_accuracy(const ConfusionMatrix& cm) {
    double sum = 0.0;
    int classes = 0;
    for (int t = 0; t < cm.num_classes(); ++t) {
        const int64_t row = cm.row_sum(t);
        if (row == 0) continue;
        sum += static_cast<double>(cm.at(t, t)) / static_cast<double>(row);
        ++classes;
    }
    if (classes == 0) throw PreconditionError("mean_accuracy: empty confusion matrix");
    return sum / classes;
}

double mean_iou(const ConfusionMatrix& cm) {
    double sum = 0.0;
    int classes = 0;
    for (int k = 0; k < cm.num_classes(); ++k) {
        const int64_t tp = cm.at(k, k);
        const int64_t fn = cm.row_sum(k) - tp;
        const int64_t fp = cm.col_sum(k) - tp;
        const int64_t denom = tp + fp + fn;
        if (denom == 0) continue;
        sum += static_cast<double>(tp) / static_cast<double>(denom);
        ++classes;
    }
    if (classes == 0) throw PreconditionError("mean_iou: empty confusion matrix");
    return sum / classes;
}

std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm) {
    std::vector<std::optional<double>> out(static_cast<size_t>(cm.num_classes()));
    for (int t = 0; t < cm.num_classes(); ++t) {
        const int64_t row = cm.row_sum(t);
        if (row > 0) {
            out[static_cast<size_t>(t)] =
                static_cast<double>(cm.at(t, t)) / static_cast<double>(row);
        }
    }
    return out;
}

std::string truncate2(double v) {
    // The 1e-9 nudge only absorbs binary representation error on values that
    // are exact hundredths (0.29 stored as 0.28999...); it is far below the
    // spacing of any ratio of realistic test counts.
    const double floored = std::floor(v * 100.0 + 1e-9);
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << floored / 100.0;
    return out.str();
}

std::string format_miou_macc(double miou, double macc) {
    return truncate2(miou) + "|" + truncate2(macc);
}

namespace {

// shortest representation that round-trips; keeps data files byte-stable
std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string cell_text(const std::optional<double>& v) { return v ? truncate2(*v) : "-"; }

std::optional<double> column_average(const std::vector<std::optional<double>>& col) {
    double sum = 0.0;
    int n = 0;
    for (const auto& v : col) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

} // namespace

std::string per_class_table(const std::vector<std::string>& class_names,
                            const std::vector<std::string>& method_ids,
                            const std::vector<std::vector<std::optional<double>>>& columns) {
    if (columns.size() != method_ids.size()) {
        throw PreconditionError("per_class_table: one column per method required");
    }
    for (const auto& col : columns) {
        if (col.size() != class_names.size()) {
            throw PreconditionError("per_class_table: column length does not match class list");
        }
    }
    size_t name_w = std::string("Average").size();
    for (const auto& n : class_names) name_w = std::max(name_w, n.size());
    std::vector<size_t> col_w(method_ids.size());
    for (size_t c = 0; c < method_ids.size(); ++c) {
        col_w[c] = std::max<size_t>(method_ids[c].size(), 4);
    }

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_w)) << "Class";
    for (size_t c = 0; c < method_ids.size(); ++c) {
        out << " | " << std::setw(static_cast<int>(col_w[c])) << method_ids[c];
    }
    out << "\n";
    out << std::string(name_w, '-');
    for (size_t c = 0; c < method_ids.size(); ++c) {
        out << "-+-" << std::string(col_w[c], '-');
    }
    out << "\n";
    for (size_t r = 0; r < class_names.size(); ++r) {
        out << std::left << std::setw(static_cast<int>(name_w)) << class_names[r];
        for (size_t c = 0; c < method_ids.size(); ++c) {
            out << " | " << std::setw(static_cast<int>(col_w[c])) << cell_text(columns[c][r]);
        }
        out << "\n";
    }
    out << std::string(name_w, '-');
    for (size_t c = 0; c < method_ids.size(); ++c) {
        out << "-+-" << std::string(col_w[c], '-');
    }
    out << "\n";
    out << std::left << std::setw(static_cast<int>(name_w)) << "Average";
    for (size_t c = 0; c < method_ids.size(); ++c) {
        out << " | " << std::setw(static_cast<int>(col_w[c])) << cell_text(column_average(columns[c]));
    }
    out << "\n";
    return out.str();
}

std::string per_class_table(const ConfusionMatrix& cm,
                            const std::vector<std::string>& class_names) {
    if (static_cast<int>(class_names.size()) != cm.num_classes()) {
        throw PreconditionError("per_class_table: class list does not match matrix");
    }
    return per_class_table(class_names, {"accuracy"}, {per_class_accuracy(cm)});
}

std::string per_class_table_csv(const std::vector<std::string>& class_names,
                                const std::vector<std::string>& method_ids,
                                const std::vector<std::vector<std::optional<double>>>& columns) {
    std::ostringstream out;
    out << "class";
    for (const auto& m : method_ids) out << "," << m;
    out << "\n";
    for (size_t r = 0; r < class_names.size(); ++r) {
        out << class_names[r];
        for (const auto& col : columns) out << "," << cell_text(col[r]);
        out << "\n";
    }
    out << "Average";
    for (const auto& col : columns) out << "," << cell_text(column_average(col));
    out << "\n";
    return out.str();
}

EvalReport EvalReport::from_confusion(const ConfusionMatrix& cm,
                                      const std::vector<std::string>& class_names,
                                      const std::string& method_id, const std::string& dataset_id,
                                      const std::string& class_set_id, bool with_iou) {
    EvalReport report;
    report.method_id = method_id;
    report.dataset_id = dataset_id;
    report.class_set_id = class_set_id;
    report.class_names = class_names;
    report.cm = cm;
    report.per_class = per_class_accuracy(cm);
    report.macc = mean_accuracy(cm);
    if (with_iou) report.miou = mean_iou(cm);
    return report;
}

void save_report_json(const std::filesystem::path& path, const EvalReport& report) {
    json cm_rows = json::array();
    for (int t = 0; t < report.cm.num_classes(); ++t) {
        json row = json::array();
        for (int p = 0; p < report.cm.num_classes(); ++p) row.push_back(report.cm.at(t, p));
        cm_rows.push_back(std::move(row));
    }
    json per_class = json::array();
    for (const auto& v : report.per_class) {
        if (v) per_class.push_back(*v);
        else per_class.push_back(nullptr);
    }
    json doc{{"method_id", report.method_id},
             {"dataset_id", report.dataset_id},
             {"class_set_id", report.class_set_id},
             {"classes", report.class_names},
             {"confusion", cm_rows},
             {"per_class_accuracy", per_class},
             {"macc", report.macc},
             {"unevaluated", report.unevaluated}};
    if (report.miou) doc["miou"] = *report.miou;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path.string());
    out << doc.dump(2) << "\n";
}

EvalReport load_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read report: " + path.string());
    json doc;
    in >> doc;
    EvalReport report;
    report.method_id = doc.at("method_id").get<std::string>();
    report.dataset_id = doc.at("dataset_id").get<std::string>();
    report.class_set_id = doc.at("class_set_id").get<std::string>();
    report.class_names = doc.at("classes").get<std::vector<std::string>>();
    const auto& cm_rows = doc.at("confusion");
    ConfusionMatrix cm(static_cast<int>(cm_rows.size()));
    for (int t = 0; t < cm.num_classes(); ++t) {
        for (int p = 0; p < cm.num_classes(); ++p) {
            const int64_t n = cm_rows.at(t).at(p).get<int64_t>();
            if (n != 0) cm.add(t, p, n);
        }
    }
    report.cm = cm;
    for (const auto& v : doc.at("per_class_accuracy")) {
        if (v.is_null()) report.per_class.push_back(std::nullopt);
        else report.per_class.push_back(v.get<double>());
    }
    report.macc = doc.at("macc").get<double>();
    if (doc.contains("miou")) report.miou = doc.at("miou").get<double>();
    report.unevaluated = doc.at("unevaluated").get<size_t>();
    return report;
}

std::string report_text(const EvalReport& report) {
    std::ostringstream out;
    out << "method: " << report.method_id << "\n";
    out << "dataset: " << report.dataset_id << "\n";
    out << "classes: " << report.class_set_id << " (" << report.class_names.size() << ")\n";
    if (report.miou) {
        out << "mIoU|mAcc: " << format_miou_macc(*report.miou, report.macc) << "\n";
    } else {
        out << "mAcc: " << truncate2(report.macc) << "\n";
    }
    if (report.unevaluated > 0) {
        out << "unevaluated samples: " << report.unevaluated << "\n";
    }
    out << per_class_table(report.cm, report.class_names);
    return out.str();
}

PcaOverlaySet pca_overlay(const std::map<std::string, std::vector<Eigen::VectorXd>>& feature_sets,
                          std::array<double, 2> axis_range,
                          const std::function<void(const std::string&)>& warn) {
    PcaOverlaySet result;
    result.axis_range = axis_range;

    std::map<std::string, std::vector<Eigen::VectorXd>> usable;
    Eigen::Index dim = -1;
    size_t total = 0;
    for (const auto& [id, feats] : feature_sets) {
        if (feats.size() < 2) {
            result.skipped.push_back(id);
            if (warn) warn("pca_overlay: dataset '" + id + "' has fewer than 2 points, skipped");
            continue;
        }
        for (const auto& f : feats) {
            if (dim < 0) dim = f.size();
            if (f.size() != dim) throw PreconditionError("pca_overlay: mixed feature dimensions");
        }
        usable[id] = feats;
        total += feats.size();
    }
    if (usable.empty()) throw PreconditionError("pca_overlay: no dataset with >= 2 points");

    // one shared basis fitted on the union
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& [id, feats] : usable) {
        for (const auto& f : feats) mean += f;
    }
    mean /= static_cast<double>(total);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& [id, feats] : usable) {
        for (const auto& f : feats) {
            const Eigen::VectorXd d = f - mean;
            cov.noalias() += d * d.transpose();
        }
    }
    cov /= static_cast<double>(total > 1 ? total - 1 : 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("pca_overlay: eigensolver failed");
    // eigenvalues ascend; take the top two columns, sign-fixed for determinism
    Eigen::MatrixXd basis(dim, 2);
    basis.col(0) = solver.eigenvectors().col(dim - 1);
    if (dim >= 2) {
        basis.col(1) = solver.eigenvectors().col(dim - 2);
    } else {
        basis.col(1).setZero();
    }
    for (int c = 0; c < 2; ++c) {
        Eigen::Index top;
        basis.col(c).cwiseAbs().maxCoeff(&top);
        if (basis(top, c) < 0.0) basis.col(c) = -basis.col(c);
    }
    result.basis = basis;
    result.center = mean;

    for (const auto& [id, feats] : usable) {
        PcaOverlay overlay;
        overlay.dataset_id = id;
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(feats.size()), 2);
        for (size_t i = 0; i < feats.size(); ++i) {
            pts.row(static_cast<Eigen::Index>(i)) = ((feats[i] - mean).transpose() * basis);
            overlay.points.push_back({pts(static_cast<Eigen::Index>(i), 0),
                                      pts(static_cast<Eigen::Index>(i), 1)});
        }
        const Eigen::RowVector2d m = pts.colwise().mean();
        overlay.mean = {m(0), m(1)};
        Eigen::MatrixXd centered = pts.rowwise() - m;
        Eigen::Matrix2d c2 =
            centered.transpose() * centered / static_cast<double>(feats.size() - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c2);
        const double lo = std::max(0.0, es.eigenvalues()(0));
        const double hi = std::max(0.0, es.eigenvalues()(1));
        overlay.semi_major = 2.0 * std::sqrt(hi);
        overlay.semi_minor = 2.0 * std::sqrt(lo);
        const Eigen::Vector2d major = es.eigenvectors().col(1);
        overlay.angle_rad = std::atan2(major(1), major(0));
        overlay.degenerate = hi <= 0.0;
        if (overlay.degenerate && warn) {
            warn("pca_overlay: dataset '" + id + "' has zero variance, ellipse degenerates to a point");
        }
        result.overlays.push_back(std::move(overlay));
    }
    return result;
}

void write_pca_csv(const std::filesystem::path& path, const PcaOverlaySet& set) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write pca csv: " + path.string());
    out << "# axis_range," << format_double(set.axis_range[0]) << ","
        << format_double(set.axis_range[1]) << "\n";
    out << "dataset,kind,x,y,extra\n";
    for (const auto& o : set.overlays) {
        out << o.dataset_id << ",ellipse," << format_double(o.mean[0]) << ","
            << format_double(o.mean[1]) << "," << format_double(o.semi_major) << ";"
            << format_double(o.semi_minor) << ";" << format_double(o.angle_rad) << "\n";
        for (const auto& p : o.points) {
            out << o.dataset_id << ",point," << format_double(p[0]) << ","
                << format_double(p[1]) << ",\n";
        }
    }
}

void write_pca_svg(const std::filesystem::path& path, const PcaOverlaySet& set) {
    static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b"};
    const double lo = set.axis_range[0];
    const double hi = set.axis_range[1];
    const double size = 480.0;
    auto sx = [&](double x) { return (x - lo) / (hi - lo) * size; };
    auto sy = [&](double y) { return size - (y - lo) / (hi - lo) * size; };

    std::ofstream out(path);
    if (!out) throw IoError("cannot write pca svg: " + path.string());
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size << "' height='" << size
        << "' viewBox='0 0 " << size << " " << size << "'>\n";
    out << "<rect width='100%' height='100%' fill='white' stroke='black'/>\n";
    size_t color_i = 0;
    for (const auto& o : set.overlays) {
        const char* color = kColors[color_i++ % 6];
        for (const auto& p : o.points) {
            out << "<circle cx='" << sx(p[0]) << "' cy='" << sy(p[1])
                << "' r='1.5' fill='" << color << "' fill-opacity='0.5'/>\n";
        }
        const double deg = -o.angle_rad * 180.0 / M_PI;
        out << "<ellipse cx='" << sx(o.mean[0]) << "' cy='" << sy(o.mean[1]) << "' rx='"
            << o.semi_major / (hi - lo) * size << "' ry='" << o.semi_minor / (hi - lo) * size
            << "' transform='rotate(" << deg << " " << sx(o.mean[0]) << " " << sy(o.mean[1])
            << ")' fill='none' stroke='" << color << "' stroke-width='1.5'/>\n";
    }
    out << "</svg>\n";
}

std::vector<ScalePoint> scale_ablation(
    const DatasetManifest& manifest, const std::vector<double>& fractions,
    const std::function<std::pair<double, double>(const DatasetManifest&, double)>& train_eval,
    uint64_t seed, const std::map<std::string, size_t>& baseline_per_class) {
    if (fractions.empty()) throw PreconditionError("scale_ablation: no fractions");

    std::map<std::string, size_t> baseline = baseline_per_class;
    if (baseline.empty()) {
        for (const auto& [cls, n] : manifest.class_stats().per_class) baseline[cls] = n;
    }

    std::vector<ScalePoint> curve;
    for (double fraction : fractions) {
        if (!(fraction > 0.0)) throw PreconditionError("scale_ablation: fraction must be > 0");
        // per-class target relative to the baseline counts, round half-up
        DatasetManifest subset(manifest.taxonomy());
        {
            std::map<std::string, size_t> want;
            for (const auto& [cls, base] : baseline) {
                want[cls] = static_cast<size_t>(std::floor(fraction * base + 0.5));
            }
            subset = sample_subset_exact(manifest, want, seed);
        }
        ScalePoint point;
        point.fraction = fraction;
        point.train_size = subset.size();
        const auto [miou, macc] = train_eval(subset, fraction);
        point.miou = miou;
        point.macc = macc;
        curve.push_back(point);
    }
    return curve;
}

void write_scale_csv(const std::filesystem::path& path, const std::vector<ScalePoint>& curve) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scale csv: " + path.string());
    out << "fraction,train_size,miou,macc\n";
    for (const auto& p : curve) {
        out << format_double(p.fraction) << "," << p.train_size << "," << format_double(p.miou)
            << "," << format_double(p.macc) << "\n";
    }
}

} // namespace matkit
