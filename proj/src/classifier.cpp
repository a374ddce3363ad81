// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "matkit/errors.hpp"
#include "matkit/hashing.hpp"
#include "matkit/parallel.hpp"
#include "matkit/rng.hpp"

namespace matkit {

using json = nlohmann::json;

size_t PatchMask::active_count() const {
    return static_cast<size_t>(
        std::count_if(active.begin(), active.end(), [](uint8_t v) { return v != 0; }));
}

PatchMask downsample_mask(const BinaryMask& mask, int grid) {
    if (grid <= 0) throw PreconditionError("downsample_mask: grid must be positive");
    if (mask.width % grid != 0 || mask.height % grid != 0) {
        throw PreconditionError("downsample_mask: mask " + std::to_string(mask.width) + "x" +
                                std::to_string(mask.height) + " does not divide into " +
                                std::to_string(grid) + "x" + std::to_string(grid) + " cells");
    }
    const int cell_w = mask.width / grid;
    const int cell_h = mask.height / grid;
    PatchMask pmask(grid);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y)) pmask.set(y / cell_h, x / cell_w, true);
        }
    }
    return pmask;
}

Eigen::VectorXd masked_pool(const PatchGrid& grid, const PatchMask& pmask, Pooling pooling) {
    if (pmask.grid != grid.grid) {
        throw PreconditionError("masked_pool: patch mask grid does not match feature grid");
    }
    const bool use_all = pmask.active_count() == 0; // empty-mask fallback
    Eigen::VectorXd pooled;
    size_t count = 0;
    for (Eigen::Index cell = 0; cell < grid.features.rows(); ++cell) {
        if (!use_all && pmask.active[static_cast<size_t>(cell)] == 0) continue;
        const auto row = grid.features.row(cell).transpose();
        if (count == 0) {
            pooled = row;
        } else if (pooling == Pooling::kMax) {
            pooled = pooled.cwiseMax(row);
        } else {
            pooled += row;
        }
        ++count;
    }
    if (count == 0) throw PreconditionError("masked_pool: feature grid has no cells");
    if (pooling == Pooling::kAverage) pooled /= static_cast<double>(count);
    return pooled;
}

Eigen::VectorXd masked_max_pool(const PatchGrid& grid, const PatchMask& pmask) {
    return masked_pool(grid, pmask, Pooling::kMax);
}

Eigen::VectorXd fuse(const Eigen::VectorXd& vision, const Eigen::VectorXd& text) {
    if (vision.size() == 0 || text.size() == 0) {
        throw PreconditionError("fuse: empty operand");
    }
    Eigen::VectorXd fused(vision.size() + text.size());
    fused << vision, text;
    return fused;
}

MlpHead MlpHead::kaiming(int input, int hidden, int classes, uint64_t seed) {
    if (input <= 0 || hidden <= 0 || classes <= 0) {
        throw PreconditionError("MlpHead: dimensions must be positive");
    }
    MlpHead head;
    SplitMix64 rng(hash_combine(seed, 0x4169ULL));
    const double bound1 = std::sqrt(6.0 / input);
    head.w1 = Eigen::MatrixXd::NullaryExpr(hidden, input,
                                           [&]() { return rng.uniform(-bound1, bound1); });
    head.b1 = Eigen::VectorXd::Zero(hidden);
    const double bound2 = std::sqrt(6.0 / hidden);
    head.w2 = Eigen::MatrixXd::NullaryExpr(classes, hidden,
                                           [&]() { return rng.uniform(-bound2, bound2); });
    head.b2 = Eigen::VectorXd::Zero(classes);
    return head;
}

MlpHead MlpHead::zeros(int input, int hidden, int classes) {
    MlpHead head;
    head.w1 = Eigen::MatrixXd::Zero(hidden, input);
    head.b1 = Eigen::VectorXd::Zero(hidden);
    head.w2 = Eigen::MatrixXd::Zero(classes, hidden);
    head.b2 = Eigen::VectorXd::Zero(classes);
    return head;
}

bool MlpHead::operator==(const MlpHead& other) const {
    return w1 == other.w1 && b1 == other.b1 && w2 == other.w2 && b2 == other.b2;
}

namespace {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return cdf + x * pdf;
}

} // namespace

Eigen::VectorXd MlpHead::logits(const Eigen::VectorXd& x) const {
    if (x.size() != w1.cols()) {
        throw PreconditionError("MlpHead: input has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(w1.cols()));
    }
    Eigen::VectorXd z1 = w1 * x + b1;
    Eigen::VectorXd h = z1.unaryExpr([](double v) { return gelu(v); });
    return w2 * h + b2;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

Eigen::VectorXd forward(const MlpHead& head, const Eigen::VectorXd& fused) {
    if (!fused.allFinite()) throw NumericError("forward: non-finite input feature");
    return softmax(head.logits(fused));
}

HeadGradients HeadGradients::zeros_like(const MlpHead& head) {
    HeadGradients g;
    g.w1 = Eigen::MatrixXd::Zero(head.w1.rows(), head.w1.cols());
    g.b1 = Eigen::VectorXd::Zero(head.b1.size());
    g.w2 = Eigen::MatrixXd::Zero(head.w2.rows(), head.w2.cols());
    g.b2 = Eigen::VectorXd::Zero(head.b2.size());
    return g;
}

void HeadGradients::scale(double s) {
    w1 *= s;
    b1 *= s;
    w2 *= s;
    b2 *= s;
}

double head_loss_and_gradients(const MlpHead& head, const Eigen::VectorXd& x, int label,
                               HeadGradients& grads) {
    if (label < 0 || label >= head.num_classes()) {
        throw PreconditionError("loss: label out of range");
    }
    const Eigen::VectorXd z1 = head.w1 * x + head.b1;
    const Eigen::VectorXd h = z1.unaryExpr([](double v) { return gelu(v); });
    const Eigen::VectorXd z2 = head.w2 * h + head.b2;

    // loss via log-sum-exp; stable for any logit magnitude
    const double m = z2.maxCoeff();
    const double lse = m + std::log((z2.array() - m).exp().sum());
    const double loss = lse - z2(label);

    Eigen::VectorXd dz2 = (z2.array() - lse).exp(); // = softmax(z2)
    dz2(label) -= 1.0;
    grads.w2.noalias() += dz2 * h.transpose();
    grads.b2 += dz2;
    Eigen::VectorXd dh = head.w2.transpose() * dz2;
    Eigen::VectorXd dz1 =
        dh.array() * z1.unaryExpr([](double v) { return gelu_grad(v); }).array();
    grads.w1.noalias() += dz1 * x.transpose();
    grads.b1 += dz1;
    return loss;
}

namespace {

struct AdamWState {
    Eigen::MatrixXd m_w1, v_w1, m_w2, v_w2;
    Eigen::VectorXd m_b1, v_b1, m_b2, v_b2;
    int64_t step = 0;

    static AdamWState zeros_like(const MlpHead& head) {
        AdamWState s;
        s.m_w1 = Eigen::MatrixXd::Zero(head.w1.rows(), head.w1.cols());
        s.v_w1 = s.m_w1;
        s.m_w2 = Eigen::MatrixXd::Zero(head.w2.rows(), head.w2.cols());
        s.v_w2 = s.m_w2;
        s.m_b1 = Eigen::VectorXd::Zero(head.b1.size());
        s.v_b1 = s.m_b1;
        s.m_b2 = Eigen::VectorXd::Zero(head.b2.size());
        s.v_b2 = s.m_b2;
        return s;
    }
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

template <typename P, typename G, typename M>
void adamw_update(P& param, const G& grad, M& m, M& v, int64_t step, double lr, double wd) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
    // decoupled weight decay
    if (wd != 0.0) param -= lr * wd * param;
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

} // namespace

TrainResult train_head(const std::vector<FusedSample>& data, int num_classes,
                       const TrainConfig& cfg) {
    if (data.empty()) throw PreconditionError("train_head: empty training set");
    if (cfg.learning_rate <= 0.0) throw PreconditionError("train_head: learning_rate must be > 0");
    if (cfg.epochs < 0) throw PreconditionError("train_head: epochs must be >= 0");
    if (cfg.optimizer != "adamw") {
        throw ConfigError("train_head: unsupported optimizer '" + cfg.optimizer + "'");
    }
    const int input_dim = static_cast<int>(data.front().features.size());
    for (const auto& s : data) {
        if (s.features.size() != input_dim) {
            throw PreconditionError("train_head: inconsistent feature dimensions");
        }
        if (s.label < 0 || s.label >= num_classes) {
            throw PreconditionError("train_head: label out of range");
        }
    }

    TrainResult result;
    result.head = MlpHead::kaiming(input_dim, cfg.hidden, num_classes, cfg.seed);
    AdamWState opt = AdamWState::zeros_like(result.head);
    SplitMix64 shuffle_rng(hash_combine(cfg.seed, 0x0e70c5ULL));
    const size_t batch = std::max(1, cfg.batch_size);

    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        deterministic_shuffle(order, shuffle_rng);
        double loss_sum = 0.0;
        size_t correct = 0;
        for (size_t start = 0; start < order.size(); start += batch) {
            const size_t end = std::min(order.size(), start + batch);
            HeadGradients grads = HeadGradients::zeros_like(result.head);
            for (size_t i = start; i < end; ++i) {
                const FusedSample& s = data[order[i]];
                const double loss = head_loss_and_gradients(result.head, s.features, s.label, grads);
                loss_sum += loss;
                Eigen::Index pred;
                result.head.logits(s.features).maxCoeff(&pred);
                if (static_cast<int>(pred) == s.label) ++correct;
            }
            if (!std::isfinite(loss_sum)) {
                throw NumericError("train_head: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", sample offset " +
                                   std::to_string(start));
            }
            grads.scale(1.0 / static_cast<double>(end - start));
            ++opt.step;
            adamw_update(result.head.w1, grads.w1, opt.m_w1, opt.v_w1, opt.step,
                         cfg.learning_rate, cfg.weight_decay);
            adamw_update(result.head.b1, grads.b1, opt.m_b1, opt.v_b1, opt.step,
                         cfg.learning_rate, 0.0);
            adamw_update(result.head.w2, grads.w2, opt.m_w2, opt.v_w2, opt.step,
                         cfg.learning_rate, cfg.weight_decay);
            adamw_update(result.head.b2, grads.b2, opt.m_b2, opt.v_b2, opt.step,
                         cfg.learning_rate, 0.0);
        }
        TrainEpoch entry;
        entry.epoch = epoch;
        entry.loss = loss_sum / static_cast<double>(data.size());
        entry.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
        result.log.push_back(entry);
    }

    // full pass with the final parameters
    double final_loss = 0.0;
    size_t final_correct = 0;
    HeadGradients scratch = HeadGradients::zeros_like(result.head);
    for (const auto& s : data) {
        final_loss += head_loss_and_gradients(result.head, s.features, s.label, scratch);
        Eigen::Index pred;
        result.head.logits(s.features).maxCoeff(&pred);
        if (static_cast<int>(pred) == s.label) ++final_correct;
    }
    result.final_loss = final_loss / static_cast<double>(data.size());
    result.final_accuracy = static_cast<double>(final_correct) / static_cast<double>(data.size());
    return result;
}

ClassDescriptorBank build_class_bank(const MaterialTaxonomy& taxonomy,
                                     const std::map<std::string, std::string>& texts,
                                     TextEncoder& encoder) {
    ClassDescriptorBank bank;
    for (const auto& cls : taxonomy.classes()) {
        auto it = texts.find(cls);
        const std::string text = it == texts.end() ? cls : it->second;
        bank.texts.push_back(text);
        bank.embeddings.push_back(encode_text(text, encoder));
    }
    return bank;
}

FeaturePipeline::FeaturePipeline(std::shared_ptr<VisionEncoder> encoder, Pooling pooling)
    : encoder_(std::move(encoder)), pooling_(pooling) {}

Eigen::VectorXd FeaturePipeline::vision_feature(const Image& image,
                                                const BinaryMask& mask) const {
    if (image.width != mask.width || image.height != mask.height) {
        throw PreconditionError("vision_feature: mask dimensions do not match image");
    }
    const int res = encoder_->input_resolution();
    const Image resized =
        (image.width == res && image.height == res) ? image : resize_bilinear(image, res, res);
    const BinaryMask mask_resized =
        (mask.width == res && mask.height == res) ? mask : resize_nearest(mask, res, res);
    PatchGrid grid = encode_patches(resized, *encoder_);
    const PatchMask pmask = downsample_mask(mask_resized, encoder_->grid_size());
    return masked_pool(grid, pmask, pooling_);
}

std::vector<FusedSample> extract_training_features(const DatasetManifest& manifest,
                                                   const ClassDescriptorBank& bank,
                                                   const FeaturePipeline& pipeline, int jobs,
                                                   DescriptorGenerator* descriptor,
                                                   TextEncoder* text_encoder) {
    if (descriptor != nullptr && text_encoder == nullptr) {
        throw PreconditionError("per-image descriptors need a text encoder");
    }
    const auto& entries = manifest.entries();
    std::vector<FusedSample> out(entries.size());
    parallel_for(entries.size(), jobs, [&](size_t i) {
        const MaskedSample& s = entries[i];
        const Image image = load_image(manifest.resolve(s.image_path));
        const BinaryMask mask = load_mask(manifest.resolve(s.mask_path));
        const auto label = manifest.taxonomy().index_of(s.label);
        const Eigen::VectorXd vision = pipeline.vision_feature(image, mask);
        if (descriptor != nullptr) {
            const std::string text = describe_region(image, mask, *descriptor);
            out[i].features = fuse(vision, encode_text(text, *text_encoder));
        } else {
            out[i].features = fuse(vision, bank.embeddings.at(static_cast<size_t>(*label)));
        }
        out[i].label = *label;
    });
    return out;
}

TrainResult train_classifier(const DatasetManifest& manifest, const ClassDescriptorBank& bank,
                             const FeaturePipeline& pipeline, const TrainConfig& cfg, int jobs,
                             const std::function<void(const std::string&)>& warn,
                             DescriptorGenerator* descriptor, TextEncoder* text_encoder) {
    if (manifest.size() == 0) throw PreconditionError("train: empty training manifest");
    if (cfg.head_mode == "full" && !pipeline.encoder().supports_finetune() && warn) {
        warn("head_mode=full requested but adapter '" + pipeline.encoder().id() +
             "' cannot be unfrozen; training head only");
    }
    if (cfg.descriptor_mode == "per_image" && descriptor == nullptr) {
        throw ConfigError("train: descriptor_mode=per_image needs a descriptor adapter");
    }
    const auto data = extract_training_features(
        manifest, bank, pipeline, jobs,
        cfg.descriptor_mode == "per_image" ? descriptor : nullptr, text_encoder);
    return train_head(data, static_cast<int>(manifest.taxonomy().size()), cfg);
}

namespace {

int argmax_lowest_tie(const Eigen::VectorXd& scores) {
    int best = 0;
    for (int k = 1; k < scores.size(); ++k) {
        if (scores(k) > scores(best)) best = k;
    }
    return best;
}

} // namespace

Prediction predict(const Image& image, const BinaryMask& mask, const MlpHead& head,
                   const ClassDescriptorBank& bank, const MaterialTaxonomy& taxonomy,
                   const FeaturePipeline& pipeline, PredictMode mode,
                   DescriptorGenerator* descriptor, TextEncoder* text_encoder,
                   const std::function<void(const std::string&)>& warn) {
    const size_t k = taxonomy.size();
    if (bank.embeddings.size() != k) {
        throw PreconditionError("predict: descriptor bank does not cover the taxonomy");
    }
    const Eigen::VectorXd vision = pipeline.vision_feature(image, mask);

    Prediction pred;
    if (mode == PredictMode::kPerImageDescriptor) {
        try {
            if (descriptor == nullptr || text_encoder == nullptr) {
                throw BackendError("per-image descriptor mode needs a descriptor generator and "
                                   "a text encoder");
            }
            const std::string text = describe_region(image, mask, *descriptor);
            const TextEmbedding emb = encode_text(text, *text_encoder);
            pred.scores = forward(head, fuse(vision, emb));
            pred.label_index = argmax_lowest_tie(pred.scores);
            pred.label = taxonomy.name_of(pred.label_index);
            return pred;
        } catch (const BackendError& e) {
            if (warn) warn(std::string("descriptor backend failed (") + e.what() +
                           "); falling back to class-bank mode");
            pred.used_fallback = true;
        }
    }

    // class-bank mode: diagonal score s_k from the pass fused with class k
    Eigen::VectorXd scores(static_cast<Eigen::Index>(k));
    for (size_t i = 0; i < k; ++i) {
        const Eigen::VectorXd probs = forward(head, fuse(vision, bank.embeddings[i]));
        scores(static_cast<Eigen::Index>(i)) = probs(static_cast<Eigen::Index>(i));
    }
    pred.scores = scores;
    pred.label_index = argmax_lowest_tie(scores);
    pred.label = taxonomy.name_of(pred.label_index);
    return pred;
}

const char* pooling_name(Pooling p) { return p == Pooling::kMax ? "max" : "average"; }

Pooling pooling_from_name(const std::string& name) {
    if (name == "max") return Pooling::kMax;
    if (name == "average" || name == "avg") return Pooling::kAverage;
    throw ConfigError("unknown pooling '" + name + "'");
}

namespace {

std::string encode_matrix(const Eigen::MatrixXd& m) {
    return base64_encode(std::span<const uint8_t>(
        reinterpret_cast<const uint8_t*>(m.data()), sizeof(double) * static_cast<size_t>(m.size())));
}

std::string encode_vector(const Eigen::VectorXd& v) {
    return base64_encode(std::span<const uint8_t>(
        reinterpret_cast<const uint8_t*>(v.data()), sizeof(double) * static_cast<size_t>(v.size())));
}

Eigen::MatrixXd decode_matrix(const std::string& b64, Eigen::Index rows, Eigen::Index cols) {
    const auto bytes = base64_decode(b64);
    if (bytes.size() != sizeof(double) * static_cast<size_t>(rows * cols)) {
        throw IoError("checkpoint: matrix payload size mismatch");
    }
    Eigen::MatrixXd m(rows, cols);
    std::memcpy(m.data(), bytes.data(), bytes.size());
    return m;
}

Eigen::VectorXd decode_vector(const std::string& b64, Eigen::Index size) {
    const auto bytes = base64_decode(b64);
    if (bytes.size() != sizeof(double) * static_cast<size_t>(size)) {
        throw IoError("checkpoint: vector payload size mismatch");
    }
    Eigen::VectorXd v(size);
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

json train_config_to_json(const TrainConfig& cfg) {
    return json{{"optimizer", cfg.optimizer},
                {"learning_rate", cfg.learning_rate},
                {"weight_decay", cfg.weight_decay},
                {"batch_size", cfg.batch_size},
                {"epochs", cfg.epochs},
                {"seed", cfg.seed},
                {"hidden", cfg.hidden},
                {"head_mode", cfg.head_mode},
                {"pooling", pooling_name(cfg.pooling)},
                {"descriptor_mode", cfg.descriptor_mode}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.optimizer = j.at("optimizer").get<std::string>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.head_mode = j.at("head_mode").get<std::string>();
    cfg.pooling = pooling_from_name(j.at("pooling").get<std::string>());
    cfg.descriptor_mode = j.at("descriptor_mode").get<std::string>();
    return cfg;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
    json doc;
    doc["schema_version"] = cp.schema_version;
    doc["classes"] = cp.classes;
    doc["head"] = json{{"input_dim", cp.head.input_dim()},
                       {"hidden_dim", cp.head.hidden_dim()},
                       {"num_classes", cp.head.num_classes()},
                       {"activation", "gelu"},
                       {"w1", encode_matrix(cp.head.w1)},
                       {"b1", encode_vector(cp.head.b1)},
                       {"w2", encode_matrix(cp.head.w2)},
                       {"b2", encode_vector(cp.head.b2)}};
    doc["vision"] = json{{"adapter_id", cp.vision_adapter_id},
                         {"resolution", cp.vision_resolution},
                         {"grid", cp.vision_grid},
                         {"dim", cp.vision_dim}};
    doc["text"] = json{{"adapter_id", cp.text_adapter_id}, {"dim", cp.text_dim}};
    doc["train_config"] = train_config_to_json(cp.train_config);
    doc["bank"] = json{{"texts", cp.bank_texts}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out << doc.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("checkpoint " + path.string() + ": " + e.what());
    }
    Checkpoint cp;
    cp.schema_version = doc.at("schema_version").get<int>();
    if (cp.schema_version != 1) {
        throw IoError("checkpoint schema version " + std::to_string(cp.schema_version) +
                      " not supported");
    }
    cp.classes = doc.at("classes").get<std::vector<std::string>>();
    const auto& h = doc.at("head");
    const auto input = h.at("input_dim").get<Eigen::Index>();
    const auto hidden = h.at("hidden_dim").get<Eigen::Index>();
    const auto classes = h.at("num_classes").get<Eigen::Index>();
    cp.head.w1 = decode_matrix(h.at("w1").get<std::string>(), hidden, input);
    cp.head.b1 = decode_vector(h.at("b1").get<std::string>(), hidden);
    cp.head.w2 = decode_matrix(h.at("w2").get<std::string>(), classes, hidden);
    cp.head.b2 = decode_vector(h.at("b2").get<std::string>(), classes);
    cp.vision_adapter_id = doc.at("vision").at("adapter_id").get<std::string>();
    cp.vision_resolution = doc.at("vision").at("resolution").get<int>();
    cp.vision_grid = doc.at("vision").at("grid").get<int>();
    cp.vision_dim = doc.at("vision").at("dim").get<int>();
    cp.text_adapter_id = doc.at("text").at("adapter_id").get<std::string>();
    cp.text_dim = doc.at("text").at("dim").get<int>();
    cp.train_config = train_config_from_json(doc.at("train_config"));
    cp.bank_texts = doc.at("bank").at("texts").get<std::vector<std::string>>();
    return cp;
}

} // namespace matkit
