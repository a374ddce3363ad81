// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "matkit/generation.hpp"
#include "matkit/image.hpp"

namespace matkit {

/// Image + region mask + material label, the atom of every dataset.
struct MaskedSample {
    std::string id;
    std::string image_path;
    std::string mask_path;
    std::string label;     // material class
    std::string object;    // provenance; empty allowed for imported samples
    std::string qualifier;
    std::string prompt;
    std::string backend_id;
    int64_t seed = 0;
    std::string source = "generated"; // "generated" | "imported"
    std::string split = "none";       // "train" | "test" | "none"
};

/// Text-grounded segmentation adapter: (image, object phrase) -> mask.
/// The returned mask must match the image dimensions; it may be empty.
/// When the underlying model proposes several candidates, the adapter
/// resolves to the highest-confidence one.
class SegmentationBackend {
public:
    virtual ~SegmentationBackend() = default;
    virtual std::string id() const = 0;
    virtual bool concurrent_safe() const = 0;
    virtual BinaryMask segment(const Image& image, const std::string& phrase) = 0;
};

/// Segments the record's target object; the phrase passed to the backend is
/// exactly the triplet's object field.
BinaryMask segment_object(const Image& image, const ImageRecord& record,
                          SegmentationBackend& backend);

struct Rejection {
    std::string record_id;
    std::string reason; // "below-area"
    double foreground_fraction = 0.0;
};

using LabelOutcome = std::variant<MaskedSample, Rejection>;

/// Assigns the triplet's material to the masked region. The mask is stored
/// untouched; the sample is rejected iff its foreground fraction is below
/// min_area_fraction.
LabelOutcome assign_label(const ImageRecord& record, const BinaryMask& mask,
                          double min_area_fraction);

/// 4-connected components of the foreground with area strictly greater than
/// min_pixels, each returned as a full-size single-component mask, ordered by
/// first pixel in row-major scan.
std::vector<BinaryMask> filter_regions(const BinaryMask& mask, size_t min_pixels);

} // namespace matkit
