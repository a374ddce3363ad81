// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include <doctest.h>

#include "matkit/errors.hpp"
#include "matkit/labeling.hpp"
#include "matkit/mocks.hpp"
#include "matkit/rng.hpp"
#include "oracles.hpp"

using namespace matkit;

namespace {

ImageRecord record_for(int w, int h, const std::string& object = "vase") {
    ImageRecord rec;
    rec.id = "rec1";
    rec.image_path = "images/rec1.png";
    rec.triplet = {object, "ceramic", "porcelain", true};
    rec.prompt_text = "a photo of a porcelain ceramic " + object;
    rec.backend_id = "mock";
    rec.seed = 1;
    rec.width = w;
    rec.height = h;
    return rec;
}

/// Records the phrase it was asked to segment.
class PhraseProbe : public SegmentationBackend {
public:
    std::string id() const override { return "probe"; }
    bool concurrent_safe() const override { return true; }
    BinaryMask segment(const Image& image, const std::string& phrase) override {
        last_phrase = phrase;
        BinaryMask mask(image.width, image.height);
        mask.set(0, 0, true);
        return mask;
    }
    std::string last_phrase;
};

class WrongSizeBackend : public SegmentationBackend {
public:
    std::string id() const override { return "wrong-size"; }
    bool concurrent_safe() const override { return true; }
    BinaryMask segment(const Image&, const std::string&) override { return BinaryMask(2, 2); }
};

} // namespace

TEST_CASE("mock segmenter: center half-size box covers a quarter of the area") {
    MockSegmentationBackend backend(0.5);
    const Image img = oracles::solid_image(64, 64, 10, 20, 30);
    const BinaryMask mask = backend.segment(img, "vase");
    CHECK(mask.foreground_fraction() == doctest::Approx(0.25));
}

TEST_CASE("segment_object passes the triplet's object as the phrase") {
    PhraseProbe probe;
    const Image img = oracles::solid_image(16, 16, 0, 0, 0);
    segment_object(img, record_for(16, 16, "Cake-pan"), probe);
    CHECK(probe.last_phrase == "Cake-pan");
}

TEST_CASE("single marked pixel yields exactly one foreground pixel") {
    PhraseProbe probe;
    const Image img = oracles::solid_image(64, 64, 0, 0, 0);
    const BinaryMask mask = segment_object(img, record_for(64, 64), probe);
    CHECK(mask.foreground_count() == 1);
    CHECK(mask.at(0, 0));
}

TEST_CASE("segment_object rejects masks of the wrong size") {
    WrongSizeBackend backend;
    const Image img = oracles::solid_image(16, 16, 0, 0, 0);
    CHECK_THROWS_AS(segment_object(img, record_for(16, 16), backend), BackendError);
}

TEST_CASE("assign_label accepts above the area threshold and keeps the material") {
    BinaryMask mask(100, 100);
    for (int y = 0; y < 30; ++y) {
        for (int x = 0; x < 100; ++x) mask.set(x, y, true);
    }
    REQUIRE(mask.foreground_fraction() == doctest::Approx(0.30));
    const auto outcome = assign_label(record_for(100, 100), mask, 0.02);
    REQUIRE(std::holds_alternative<MaskedSample>(outcome));
    const auto& sample = std::get<MaskedSample>(outcome);
    CHECK(sample.label == "ceramic");
    CHECK(sample.source == "generated");
    CHECK(sample.id == "rec1");
}

TEST_CASE("assign_label rejects an empty mask") {
    const BinaryMask mask(100, 100);
    const auto outcome = assign_label(record_for(100, 100), mask, 0.02);
    REQUIRE(std::holds_alternative<Rejection>(outcome));
    CHECK(std::get<Rejection>(outcome).reason == "below-area");
}

TEST_CASE("assign_label fraction arithmetic: 150 px of 100x100 is below 0.02") {
    BinaryMask mask(100, 100);
    int placed = 0;
    for (int y = 0; y < 100 && placed < 150; ++y) {
        for (int x = 0; x < 100 && placed < 150; x += 7) {
            mask.set(x, y, true);
            ++placed;
        }
    }
    REQUIRE(mask.foreground_count() == 150);
    const auto outcome = assign_label(record_for(100, 100), mask, 0.02);
    REQUIRE(std::holds_alternative<Rejection>(outcome));
    CHECK(std::get<Rejection>(outcome).foreground_fraction == doctest::Approx(0.015));
}

TEST_CASE("acceptance is monotone in the area threshold") {
    SplitMix64 rng(31);
    for (int round = 0; round < 30; ++round) {
        BinaryMask mask(20, 20);
        const size_t n = rng.below(400);
        for (size_t i = 0; i < n; ++i) {
            mask.set(static_cast<int>(rng.below(20)), static_cast<int>(rng.below(20)), true);
        }
        const double t1 = rng.uniform();
        const double t2 = t1 + rng.uniform() * (1.0 - t1);
        const bool accepted_low =
            std::holds_alternative<MaskedSample>(assign_label(record_for(20, 20), mask, t1));
        const bool accepted_high =
            std::holds_alternative<MaskedSample>(assign_label(record_for(20, 20), mask, t2));
        if (accepted_high) CHECK(accepted_low); // raising the threshold never accepts more
    }
}

TEST_CASE("filter_regions keeps only components above the pixel threshold") {
    // two blobs: 120x100 = 12000 px and 90x100 = 9000 px, separated by a gap
    BinaryMask mask(300, 120);
    for (int y = 10; y < 110; ++y) {
        for (int x = 0; x < 120; ++x) mask.set(x, y, true);
        for (int x = 150; x < 240; ++x) mask.set(x, y, true);
    }
    const auto regions = filter_regions(mask, 10000);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].foreground_count() == 12000);
}

TEST_CASE("filter_regions of an empty mask is empty") {
    CHECK(filter_regions(BinaryMask(32, 32), 0).empty());
    CHECK(filter_regions(BinaryMask{}, 0).empty());
}

TEST_CASE("checkerboard of 2x2 blocks splits into one component per block") {
    BinaryMask mask(8, 8);
    for (int by = 0; by < 4; ++by) {
        for (int bx = 0; bx < 4; ++bx) {
            if ((bx + by) % 2 != 0) continue;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) mask.set(bx * 2 + dx, by * 2 + dy, true);
            }
        }
    }
    const auto regions = filter_regions(mask, 3);
    CHECK(regions.size() == 8); // 4-connectivity keeps diagonal blocks apart
    for (const auto& r : regions) CHECK(r.foreground_count() == 4);
}

TEST_CASE("filter_regions agrees with a flood-fill oracle on random masks") {
    SplitMix64 rng(77);
    for (int round = 0; round < 15; ++round) {
        BinaryMask mask(24, 24);
        // blobby random masks: a few seed points dilated by random walks
        const size_t walks = 2 + rng.below(5);
        for (size_t w = 0; w < walks; ++w) {
            int x = static_cast<int>(rng.below(24));
            int y = static_cast<int>(rng.below(24));
            for (int step = 0; step < 40; ++step) {
                mask.set(x, y, true);
                x = std::clamp<int>(x + static_cast<int>(rng.below(3)) - 1, 0, 23);
                y = std::clamp<int>(y + static_cast<int>(rng.below(3)) - 1, 0, 23);
            }
        }
        const size_t min_pixels = rng.below(30);
        auto expected = oracles::flood_fill_components(mask);
        std::erase_if(expected,
                      [&](const std::set<size_t>& c) { return c.size() <= min_pixels; });

        const auto regions = filter_regions(mask, min_pixels);
        REQUIRE(regions.size() == expected.size());

        std::set<std::set<size_t>> got;
        std::set<size_t> union_pixels;
        for (const auto& r : regions) {
            const auto pixels = oracles::mask_pixels(r);
            // components are pairwise disjoint
            for (size_t p : pixels) CHECK(union_pixels.insert(p).second);
            got.insert(pixels);
        }
        const std::set<std::set<size_t>> want(expected.begin(), expected.end());
        CHECK(got == want);
        // union of outputs stays inside the input foreground
        const auto input_pixels = oracles::mask_pixels(mask);
        for (size_t p : union_pixels) CHECK(input_pixels.count(p) == 1);
    }
}
