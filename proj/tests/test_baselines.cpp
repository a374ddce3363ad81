// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include <doctest.h>

#include <cmath>

#include "matkit/baselines.hpp"
#include "matkit/errors.hpp"
#include "matkit/mocks.hpp"
#include "matkit/rng.hpp"
#include "oracles.hpp"

using namespace matkit;

namespace {

/// Joint embedder with a programmable image embedding and per-text table.
class StubEmbedder : public JointEmbedder {
public:
    StubEmbedder(Eigen::VectorXd image_emb, std::vector<Eigen::VectorXd> text_embs)
        : image_emb_(std::move(image_emb)), text_embs_(std::move(text_embs)) {}
    std::string id() const override { return "stub-joint"; }
    int dim() const override { return static_cast<int>(image_emb_.size()); }
    Eigen::VectorXd embed_image(const Image&) override { return image_emb_; }
    Eigen::VectorXd embed_text(const std::string& text) override {
        return text_embs_.at(static_cast<size_t>(std::stoi(text.substr(text.size() - 1))));
    }

private:
    Eigen::VectorXd image_emb_;
    std::vector<Eigen::VectorXd> text_embs_;
};

Eigen::VectorXd vec2(double x, double y) {
    Eigen::VectorXd v(2);
    v << x, y;
    return v;
}

} // namespace

TEST_CASE("cosine similarity basics") {
    CHECK(cosine_similarity(vec2(1, 0), vec2(1, 0)) == doctest::Approx(1.0));
    CHECK(cosine_similarity(vec2(1, 0), vec2(0, 1)) == doctest::Approx(0.0));
    CHECK(cosine_similarity(vec2(1, 0), vec2(-2, 0)) == doctest::Approx(-1.0));
    CHECK(cosine_similarity(vec2(3, 0), vec2(7, 0)) == doctest::Approx(1.0)); // scale free
    CHECK_THROWS_AS(cosine_similarity(vec2(0, 0), vec2(1, 0)), NumericError);
}

TEST_CASE("zeroshot: image embedding equal to a class text wins") {
    const auto class2 = vec2(0.3, -0.8);
    StubEmbedder embedder(class2, {vec2(1, 0), vec2(0, 1), class2});
    const Image img = oracles::solid_image(8, 8, 0, 0, 0);
    CHECK(zeroshot_nn_classify(img, {"text0", "text1", "text2"}, embedder) == 2);
}

TEST_CASE("zeroshot: scaling the image embedding preserves the argmax") {
    const auto base = vec2(0.3, -0.8);
    StubEmbedder a(base, {vec2(1, 0), vec2(0, 1), vec2(0.35, -0.75)});
    StubEmbedder b(base * 5.0, {vec2(1, 0), vec2(0, 1), vec2(0.35, -0.75)});
    const Image img = oracles::solid_image(8, 8, 0, 0, 0);
    CHECK(zeroshot_nn_classify(img, {"text0", "text1", "text2"}, a) ==
          zeroshot_nn_classify(img, {"text0", "text1", "text2"}, b));
}

TEST_CASE("zeroshot: hand-computed angles decide the winner") {
    // query at 10 degrees; candidates at 0, 45, 90 degrees -> nearest is 0
    auto at_angle = [](double deg) {
        return vec2(std::cos(deg * M_PI / 180.0), std::sin(deg * M_PI / 180.0));
    };
    StubEmbedder embedder(at_angle(10), {at_angle(0), at_angle(45), at_angle(90)});
    const Image img = oracles::solid_image(8, 8, 0, 0, 0);
    CHECK(zeroshot_nn_classify(img, {"text0", "text1", "text2"}, embedder) == 0);

    // hand check: cos(10) > cos(35) > cos(80)
    CHECK(cosine_similarity(at_angle(10), at_angle(0)) ==
          doctest::Approx(std::cos(10 * M_PI / 180.0)));
    CHECK(cosine_similarity(at_angle(10), at_angle(45)) ==
          doctest::Approx(std::cos(35 * M_PI / 180.0)));
}

TEST_CASE("zeroshot requires at least two candidate texts") {
    StubEmbedder embedder(vec2(1, 0), {vec2(1, 0)});
    const Image img = oracles::solid_image(8, 8, 0, 0, 0);
    CHECK_THROWS_AS(zeroshot_nn_classify(img, {"text0"}, embedder), PreconditionError);
}

TEST_CASE("nearest_by_cosine ties resolve to the lowest index") {
    const auto q = vec2(1, 0);
    CHECK(nearest_by_cosine(q, {vec2(2, 0), vec2(3, 0), vec2(0, 1)}) == 0);
}

TEST_CASE("response containment: the documented protocol examples") {
    const auto tax = default_taxonomy();
    CHECK(match_class_in_response("This looks like polished metal.", tax) == "metal");
    CHECK(match_class_in_response("wooden table", tax) == "wood"); // substring rule
    CHECK_FALSE(match_class_in_response("I cannot tell what this is.", tax).has_value());
}

TEST_CASE("response containment: first class in taxonomy order wins") {
    const auto tax = default_taxonomy(); // metal precedes wood
    CHECK(match_class_in_response("a wood table with a metal leg", tax) == "metal");
    CHECK(match_class_in_response("METAL!", tax) == "metal"); // case-insensitive
}

TEST_CASE("vlm_prompt_classify is deterministic given a fixed backend") {
    const auto tax = default_taxonomy();
    MockMaterialVlm vlm(tax.classes());
    const Image img = oracles::solid_image(16, 16, 42, 42, 42);
    BinaryMask mask(16, 16);
    mask.set(0, 0, true);
    const auto a = vlm_prompt_classify(img, mask, vlm, tax);
    const auto b = vlm_prompt_classify(img, mask, vlm, tax);
    REQUIRE(a.has_value());
    CHECK(*a == *b);
    CHECK(tax.contains(*a));
}

TEST_CASE("retrieval: two identical-feature images of one class match each other") {
    DescriptorVectorSet set;
    set.features.resize(2, 3);
    set.features << 1, 2, 3, 1, 2, 3;
    set.labels = {1, 1};
    set.ids = {"a", "b"};
    const auto preds = retrieval_classify(set);
    CHECK(preds == std::vector<int>{1, 1});
}

TEST_CASE("retrieval: hand-enumerated 4-image fixture") {
    // class 0 near the x axis, class 1 near the y axis
    DescriptorVectorSet set;
    set.features.resize(4, 2);
    set.features << 1.0, 0.0,   // 0: nearest is 1
        0.9, 0.1,               // 1: nearest is 0
        0.0, 1.0,               // 2: nearest is 3
        0.1, 0.9;               // 3: nearest is 2
    set.labels = {0, 0, 1, 1};
    set.ids = {"a", "b", "c", "d"};

    // oracle: full pairwise cosine table by hand
    auto cos_of = [&](int i, int j) {
        const Eigen::VectorXd a = set.features.row(i);
        const Eigen::VectorXd b = set.features.row(j);
        return a.dot(b) / (a.norm() * b.norm());
    };
    for (int i = 0; i < 4; ++i) {
        int best = -1;
        double best_sim = -2;
        for (int j = 0; j < 4; ++j) {
            if (j == i) continue;
            if (cos_of(i, j) > best_sim) {
                best_sim = cos_of(i, j);
                best = j;
            }
        }
        CHECK(retrieval_classify(set)[static_cast<size_t>(i)] ==
              set.labels[static_cast<size_t>(best)]);
    }
    CHECK(retrieval_classify(set) == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("retrieval never selects the image itself") {
    // the duplicate of image 0 under a different id must be chosen, not self
    DescriptorVectorSet set;
    set.features.resize(3, 2);
    set.features << 1.0, 0.0, 1.0, 0.0, -1.0, 0.0;
    set.labels = {0, 1, 2};
    set.ids = {"self", "twin", "far"};
    const auto preds = retrieval_classify(set);
    CHECK(preds[0] == 1); // twin's label, not its own
    CHECK(preds[1] == 0);
}

TEST_CASE("retrieval predictions only depend on directions, not scales") {
    SplitMix64 rng(64);
    DescriptorVectorSet set;
    set.features.resize(12, 4);
    for (int i = 0; i < 12; ++i) {
        for (int d = 0; d < 4; ++d) set.features(i, d) = rng.uniform(-1.0, 1.0);
        set.labels.push_back(i % 3);
        set.ids.push_back("v" + std::to_string(i));
    }
    const auto base = retrieval_classify(set);
    DescriptorVectorSet scaled = set;
    for (int i = 0; i < 12; ++i) {
        scaled.features.row(i) *= 1.0 + rng.uniform() * 5.0; // positive per-row scales
    }
    CHECK(retrieval_classify(scaled) == base);
}

TEST_CASE("retrieval preconditions") {
    DescriptorVectorSet tiny;
    tiny.features.resize(1, 2);
    tiny.features << 1, 0;
    tiny.labels = {0};
    tiny.ids = {"only"};
    CHECK_THROWS_AS(retrieval_classify(tiny), PreconditionError);

    DescriptorVectorSet zero;
    zero.features.resize(2, 2);
    zero.features << 0, 0, 1, 0;
    zero.labels = {0, 1};
    zero.ids = {"z", "x"};
    CHECK_THROWS_AS(retrieval_classify(zero), NumericError);
}
