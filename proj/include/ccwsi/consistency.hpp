#pragma once

#include "ccwsi/tiling.hpp"

#include <json.hpp>

#include <vector>

namespace ccwsi {

struct CompositeSpec {
    int tile_size = 256;
    int center_size = 192;

    void validate() const;
    [[nodiscard]] Region center() const noexcept {
        const int off = (tile_size - center_size) / 2;
        return {off, off, center_size, center_size};
    }
};

/// Synthesized center, ground-truth surround.
RasterImage make_composite(const RasterImage& synth, const RasterImage& truth, const CompositeSpec& spec = {});

struct SeamOptions {
    /// Distance of the two reference boundaries on either side of a seam.
    int baseline_offset = 3;
    /// Shifts the core grid; seams sit at origin + k * output_size, k >= 1.
    int origin_x = 0;
    int origin_y = 0;
};

struct SeamValue {
    int position = 0;           // column (vertical seam) or row (horizontal seam)
    double discontinuity = 0.0; // mean |I(c) - I(c-1)| over the seam, all channels
    double baseline = 0.0;      // same statistic averaged at c - offset and c + offset
    double value = 0.0;         // max(0, discontinuity - baseline)
};

struct SeamReport {
    std::vector<SeamValue> vertical_seams;
    std::vector<SeamValue> horizontal_seams;
    double global_index = 0.0; // mean value over all seams, 0 when there are none
    double baseline = 0.0;     // mean baseline over all seams
};

SeamReport seam_discontinuity(const RasterImage& stitched, const TilePlan& plan, const SeamOptions& options = {});

nlohmann::json seam_report_to_json(const SeamReport& report);

} // namespace ccwsi
