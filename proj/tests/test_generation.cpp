// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include <doctest.h>

#include <set>

#include "matkit/errors.hpp"
#include "matkit/generation.hpp"
#include "matkit/mocks.hpp"
#include "oracles.hpp"

using namespace matkit;

namespace {

std::vector<PromptTriplet> validated_triplets(size_t n) {
    std::vector<PromptTriplet> out;
    for (size_t i = 0; i < n; ++i) {
        out.push_back({"object" + std::to_string(i), "metal", "steel", true});
    }
    return out;
}

/// Fails for prompts containing the given marker.
class FlakyBackend : public GenerationBackend {
public:
    explicit FlakyBackend(std::string marker) : marker_(std::move(marker)) {}
    std::string id() const override { return "flaky"; }
    bool deterministic() const override { return true; }
    bool concurrent_safe() const override { return true; }
    Image generate(const std::string& prompt, int64_t seed, int w, int h) override {
        if (prompt.find(marker_) != std::string::npos) throw BackendError("injected failure");
        return inner_.generate(prompt, seed, w, h);
    }

private:
    std::string marker_;
    MockGenerationBackend inner_;
};

} // namespace

TEST_CASE("plan covers triplets x replicas with the stated seed schedule") {
    const auto triplets = validated_triplets(3);
    const auto tasks = plan_generation(triplets, 2, kDefaultPromptTemplate, 7);
    REQUIRE(tasks.size() == 6);
    std::set<int64_t> seeds;
    for (const auto& t : tasks) seeds.insert(t.seed);
    CHECK(seeds == std::set<int64_t>{7, 8, 9, 10, 11, 12});
    CHECK(tasks[0].seed == 7);
    CHECK(tasks[5].seed == 12);
    CHECK(tasks[3].prompt_text == render_prompt(triplets[1], kDefaultPromptTemplate));
}

TEST_CASE("plan for the 2448-prompt / 5-replica corpus counts 12240 tasks") {
    const auto triplets = validated_triplets(2448);
    const auto tasks = plan_generation(triplets, 5, kDefaultPromptTemplate, 0);
    CHECK(tasks.size() == 12240);
    std::set<int64_t> seeds;
    for (const auto& t : tasks) seeds.insert(t.seed);
    CHECK(seeds.size() == 12240); // one distinct seed per (triplet, replica)
}

TEST_CASE("plan preconditions") {
    CHECK_THROWS_AS(plan_generation({}, 1, kDefaultPromptTemplate, 0), PreconditionError);
    CHECK_THROWS_AS(plan_generation(validated_triplets(1), 0, kDefaultPromptTemplate, 0),
                    PreconditionError);
    const std::vector<PromptTriplet> unvalidated{{"vase", "ceramic", "porcelain", false}};
    CHECK_THROWS_AS(plan_generation(unvalidated, 1, kDefaultPromptTemplate, 0),
                    PreconditionError);
}

TEST_CASE("single prompt produces the backend's deterministic image") {
    oracles::TempDir tmp("gen_single");
    MockGenerationBackend backend;
    GenerationOptions opt;
    opt.images_per_prompt = 1;
    opt.width = 48;
    opt.height = 48;
    opt.base_seed = 5;
    const auto triplets = validated_triplets(1);
    const auto result = generate_images(triplets, opt, backend, tmp.path / "images");
    REQUIRE(result.records.size() == 1);
    CHECK(result.failures == 0);
    const ImageRecord& rec = result.records[0];
    CHECK(rec.seed == 5);
    CHECK(rec.backend_id == "mock-diffusion");
    CHECK(rec.prompt_text == render_prompt(triplets[0], kDefaultPromptTemplate));
    CHECK(rec.width == 48);

    const Image expected =
        backend.generate(rec.prompt_text, rec.seed, opt.width, opt.height);
    const Image written = load_image(tmp.path / "images" / (rec.id + ".png"));
    CHECK(written.pixels == expected.pixels);
}

TEST_CASE("per-prompt failures are skipped, an all-failure run errors") {
    oracles::TempDir tmp("gen_flaky");
    GenerationOptions opt;
    opt.images_per_prompt = 2;
    opt.width = 32;
    opt.height = 32;

    auto triplets = validated_triplets(3);
    triplets[1].object = "FAILME";
    FlakyBackend flaky("FAILME");
    const auto result = generate_images(triplets, opt, flaky, tmp.path / "images");
    CHECK(result.records.size() == 4);
    CHECK(result.failures == 2);

    FlakyBackend always("a photo"); // every rendered prompt starts with this
    CHECK_THROWS_AS(generate_images(triplets, opt, always, tmp.path / "images2"), BackendError);
}

TEST_CASE("identical inputs and backend reproduce identical records and bytes") {
    GenerationOptions opt;
    opt.images_per_prompt = 2;
    opt.width = 40;
    opt.height = 40;
    opt.base_seed = 11;
    const auto triplets = validated_triplets(2);
    MockGenerationBackend backend;

    oracles::TempDir tmp_a("gen_rep_a");
    oracles::TempDir tmp_b("gen_rep_b");
    const auto a = generate_images(triplets, opt, backend, tmp_a.path / "images");
    const auto b = generate_images(triplets, opt, backend, tmp_b.path / "images");
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].id == b.records[i].id); // ids derive from content hash + seed
        const Image img_a = load_image(tmp_a.path / "images" / (a.records[i].id + ".png"));
        const Image img_b = load_image(tmp_b.path / "images" / (b.records[i].id + ".png"));
        CHECK(img_a.pixels == img_b.pixels);
    }
}

TEST_CASE("records manifest round-trips") {
    oracles::TempDir tmp("gen_records");
    MockGenerationBackend backend;
    GenerationOptions opt;
    opt.images_per_prompt = 2;
    opt.width = 32;
    opt.height = 32;
    const auto result = generate_images(validated_triplets(2), opt, backend, tmp.path / "images");
    save_records(tmp.path / "records.jsonl", result.records);
    const auto loaded = load_records(tmp.path / "records.jsonl");
    REQUIRE(loaded.size() == result.records.size());
    for (size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].id == result.records[i].id);
        CHECK(loaded[i].prompt_text == result.records[i].prompt_text);
        CHECK(loaded[i].seed == result.records[i].seed);
        CHECK(loaded[i].triplet.material == result.records[i].triplet.material);
    }
}

TEST_CASE("mock generator keys the object color to the material word") {
    MockGenerationBackend backend({"metal", "wood"});
    const Image metal_a = backend.generate("a photo of a steel metal wrench", 1, 64, 64);
    const Image metal_b = backend.generate("a photo of a tin metal lamp", 9, 64, 64);
    const Image wood = backend.generate("a photo of an oak wood cabinet", 1, 64, 64);
    // compare center pixels: same material = same base color, despite noise
    auto center = [](const Image& img, int c) { return static_cast<int>(img.at(32, 32)[c]); };
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(center(metal_a, c) - center(metal_b, c)) < 40);
    }
    int diff = 0;
    for (int c = 0; c < 3; ++c) diff += std::abs(center(metal_a, c) - center(wood, c));
    CHECK(diff > 60);
}
