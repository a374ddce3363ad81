// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include "matkit/labeling.hpp"

#include <deque>

#include "matkit/errors.hpp"

namespace matkit {

BinaryMask segment_object(const Image& image, const ImageRecord& record,
                          SegmentationBackend& backend) {
    BinaryMask mask;
    try {
        mask = backend.segment(image, record.triplet.object);
    } catch (const Error& e) {
        throw BackendError("segmentation failed for record " + record.id + ": " + e.what());
    }
    if (mask.width != image.width || mask.height != image.height) {
        throw BackendError("segmentation adapter '" + backend.id() +
                           "' returned a mask of wrong dimensions for record " + record.id);
    }
    return mask;
}

LabelOutcome assign_label(const ImageRecord& record, const BinaryMask& mask,
                          double min_area_fraction) {
    if (mask.width != record.width || mask.height != record.height) {
        throw PreconditionError("assign_label: mask dimensions do not match record " + record.id);
    }
    const double fraction = mask.foreground_fraction();
    if (fraction < min_area_fraction) {
        return Rejection{record.id, "below-area", fraction};
    }
    MaskedSample sample;
    sample.id = record.id;
    sample.image_path = record.image_path;
    sample.mask_path = "masks/" + record.id + ".png";
    sample.label = record.triplet.material;
    sample.object = record.triplet.object;
    sample.qualifier = record.triplet.qualifier;
    sample.prompt = record.prompt_text;
    sample.backend_id = record.backend_id;
    sample.seed = record.seed;
    sample.source = "generated";
    sample.split = "none";
    return sample;
}

std::vector<BinaryMask> filter_regions(const BinaryMask& mask, size_t min_pixels) {
    std::vector<BinaryMask> out;
    if (mask.bitmap.empty()) return out;
    const int w = mask.width;
    const int h = mask.height;
    std::vector<uint8_t> visited(static_cast<size_t>(w) * h, 0);

    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            const size_t start = static_cast<size_t>(sy) * w + sx;
            if (!mask.at(sx, sy) || visited[start]) continue;
            // flood fill (BFS, 4-connectivity)
            BinaryMask component(w, h);
            size_t area = 0;
            std::deque<std::pair<int, int>> queue{{sx, sy}};
            visited[start] = 1;
            while (!queue.empty()) {
                const auto [x, y] = queue.front();
                queue.pop_front();
                component.set(x, y, true);
                ++area;
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
                    const size_t idx = static_cast<size_t>(ny[k]) * w + nx[k];
                    if (visited[idx] || !mask.at(nx[k], ny[k])) continue;
                    visited[idx] = 1;
                    queue.emplace_back(nx[k], ny[k]);
                }
            }
            if (area > min_pixels) out.push_back(std::move(component));
        }
    }
    return out;
}

} // namespace matkit
