// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "matkit/commands.hpp"
#include "matkit/errors.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    int64_t seed = -1; // < 0 means "use the config's seed"
    int jobs = 0;
    std::string out_dir = "out";
};

matkit::RunConfig load_with_overrides(const GlobalArgs& args) {
    matkit::RunConfig cfg = matkit::load_config(args.config_path);
    if (args.seed >= 0) {
        cfg.seed = static_cast<uint64_t>(args.seed);
        cfg.train.seed = cfg.seed;
    }
    return cfg;
}

matkit::CommandOptions make_options(const GlobalArgs& args) {
    matkit::CommandOptions opt;
    opt.out_dir = args.out_dir;
    opt.jobs = args.jobs > 0 ? args.jobs
                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    opt.log = [](const std::string& msg) { std::cerr << "[matkit] " << msg << "\n"; };
    return opt;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"material dataset generation, auto-labeling, training and evaluation"};
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "run configuration file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--seed", args.seed, "override the config seed");
    app.add_option("--jobs", args.jobs, "worker count (default: logical cores)");
    app.add_option("--out", args.out_dir, "output directory");

    auto* generate = app.add_subcommand("generate", "propose prompts and generate images");

    std::string records_path;
    auto* label = app.add_subcommand("label", "segment objects and assign material labels");
    label->add_option("--records", records_path, "records manifest (default: <out>/records.jsonl)");

    std::string dataset_path;
    auto* train = app.add_subcommand("train", "train the fusion head on a labeled dataset");
    train->add_option("--dataset", dataset_path, "dataset manifest (default: <out>/dataset.jsonl)");

    std::string method = "ours";
    std::string checkpoint_path;
    std::string test_path;
    std::string features_path;
    auto* eval = app.add_subcommand("eval", "evaluate a method on a test manifest");
    eval->add_option("--method", method, "ours | zeroshot | vlm | retrieval")
        ->check(CLI::IsMember({"ours", "zeroshot", "vlm", "retrieval"}));
    eval->add_option("--checkpoint", checkpoint_path,
                     "trained checkpoint (default: <out>/checkpoint.json)");
    eval->add_option("--test", test_path, "test manifest (default: <out>/dataset.jsonl)");
    eval->add_option("--features", features_path, "descriptor vectors for --method retrieval");

    auto* analyze = app.add_subcommand("analyze", "feature dumps, PCA overlays, scale curves");
    analyze->require_subcommand(1);

    std::string feat_dataset;
    std::string dump_name = "features";
    auto* analyze_features = analyze->add_subcommand("features", "dump pooled vision features");
    analyze_features->add_option("--dataset", feat_dataset,
                                 "dataset manifest (default: <out>/dataset.jsonl)");
    analyze_features->add_option("--name", dump_name, "dump file name (without extension)");

    std::vector<std::string> pca_dumps;
    std::vector<std::string> pca_classes;
    auto* analyze_pca = analyze->add_subcommand("pca", "PCA overlays with covariance ellipses");
    analyze_pca
        ->add_option("--features", pca_dumps, "feature dumps as name=path (repeatable)")
        ->required();
    analyze_pca->add_option("--classes", pca_classes, "class subset (default: all)");

    std::string scale_dataset;
    std::string scale_test;
    auto* analyze_scale = analyze->add_subcommand("scale", "train/eval across dataset fractions");
    analyze_scale->add_option("--dataset", scale_dataset,
                              "dataset manifest (default: <out>/dataset.jsonl)");
    analyze_scale->add_option("--test", scale_test, "test manifest (default: the subset itself)");

    std::vector<std::string> table_reports;
    auto* analyze_table =
        analyze->add_subcommand("table", "side-by-side per-class table from report JSONs");
    analyze_table->add_option("--reports", table_reports, "evaluation reports (repeatable)")
        ->required();

    std::string stats_dataset;
    auto* stats = app.add_subcommand("stats", "per-class sample statistics");
    stats->add_option("--dataset", stats_dataset,
                      "dataset manifest (default: <out>/dataset.jsonl)");

    CLI11_PARSE(app, argc, argv);

    try {
        const matkit::RunConfig cfg = load_with_overrides(args);
        const matkit::CommandOptions opt = make_options(args);
        const auto default_dataset = (opt.out_dir / "dataset.jsonl").string();

        if (generate->parsed()) {
            const auto out = matkit::cmd_generate(cfg, opt);
            std::cout << out.records_path.string() << "\n";
        } else if (label->parsed()) {
            if (records_path.empty()) records_path = (opt.out_dir / "records.jsonl").string();
            const auto out = matkit::cmd_label(cfg, records_path, opt);
            std::cout << out.dataset_path.string() << "\n";
        } else if (train->parsed()) {
            if (dataset_path.empty()) dataset_path = default_dataset;
            const auto out = matkit::cmd_train(cfg, dataset_path, opt);
            std::cout << out.checkpoint_path.string() << "\n";
        } else if (eval->parsed()) {
            if (checkpoint_path.empty()) {
                checkpoint_path = (opt.out_dir / "checkpoint.json").string();
            }
            if (test_path.empty()) test_path = default_dataset;
            const auto out = matkit::cmd_eval(cfg, method, test_path, checkpoint_path,
                                              features_path, opt);
            std::cout << matkit::report_text(out.report);
        } else if (analyze_features->parsed()) {
            if (feat_dataset.empty()) feat_dataset = default_dataset;
            const auto out = matkit::cmd_analyze_features(cfg, feat_dataset, dump_name, opt);
            std::cout << out.features_path.string() << "\n";
        } else if (analyze_pca->parsed()) {
            std::vector<std::pair<std::string, std::filesystem::path>> dumps;
            for (const auto& spec : pca_dumps) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos) {
                    throw matkit::ConfigError("--features expects name=path, got '" + spec + "'");
                }
                dumps.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
            }
            const auto out = matkit::cmd_analyze_pca(cfg, dumps, pca_classes, opt);
            for (const auto& p : out.csv_paths) std::cout << p.string() << "\n";
        } else if (analyze_scale->parsed()) {
            if (scale_dataset.empty()) scale_dataset = default_dataset;
            const auto out = matkit::cmd_analyze_scale(cfg, scale_dataset, scale_test, opt);
            std::cout << out.curve_csv.string() << "\n";
        } else if (analyze_table->parsed()) {
            std::vector<std::filesystem::path> paths(table_reports.begin(), table_reports.end());
            const auto out = matkit::cmd_analyze_table(paths, opt);
            std::cout << out.text;
        } else if (stats->parsed()) {
            if (stats_dataset.empty()) stats_dataset = default_dataset;
            const auto out = matkit::cmd_stats(cfg, stats_dataset);
            std::cout << out.text;
        }
    } catch (const matkit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
