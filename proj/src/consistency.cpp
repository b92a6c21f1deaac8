#include "ccwsi/consistency.hpp"

#include <algorithm>
#include <cmath>

namespace ccwsi {

namespace {

// Mean absolute difference between column c and c-1 (all rows, channels).
double column_step(const RasterImage& img, int c) {
    std::uint64_t sum = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int ch = 0; ch < 3; ++ch)
            sum += std::uint64_t(std::abs(int(img.at(c, y, ch)) - int(img.at(c - 1, y, ch))));
    return double(sum) / (3.0 * img.height());
}

double row_step(const RasterImage& img, int r) {
    std::uint64_t sum = 0;
    const auto cur = img.row(r);
    const auto prev = img.row(r - 1);
    for (std::size_t i = 0; i < cur.size(); ++i)
        sum += std::uint64_t(std::abs(int(cur[i]) - int(prev[i])));
    return double(sum) / (3.0 * img.width());
}

template <typename StepFn>
std::vector<SeamValue> measure(int extent, int first, int spacing, int offset, StepFn step) {
    std::vector<SeamValue> seams;
    if (extent < 2)
        return seams;
    // Step statistics are defined for boundaries 1..extent-1.
    auto clamp_boundary = [&](int c) { return std::clamp(c, 1, extent - 1); };
    while (first < 1)
        first += spacing;
    for (int c = first; c < extent; c += spacing) {
        SeamValue s;
        s.position = c;
        s.discontinuity = step(c);
        s.baseline = 0.5 * (step(clamp_boundary(c - offset)) + step(clamp_boundary(c + offset)));
        s.value = std::max(0.0, s.discontinuity - s.baseline);
        seams.push_back(s);
    }
    return seams;
}

nlohmann::json seams_to_json(const std::vector<SeamValue>& seams) {
    auto arr = nlohmann::json::array();
    for (const auto& s : seams)
        arr.push_back({{"position", s.position},
                       {"discontinuity", s.discontinuity},
                       {"baseline", s.baseline},
                       {"value", s.value}});
    return arr;
}

} // namespace

void CompositeSpec::validate() const {
    if (center_size < 1 || center_size >= tile_size || (tile_size - center_size) % 2 != 0)
        throw ValidationError("composite center must be smaller than the tile with an even margin");
}

RasterImage make_composite(const RasterImage& synth, const RasterImage& truth, const CompositeSpec& spec) {
    spec.validate();
    for (const auto* img : {&synth, &truth})
        if (img->width() != spec.tile_size || img->height() != spec.tile_size)
            throw ValidationError("composite inputs must be tile_size squares");
    const Region center = spec.center();
    return paste(crop(synth, center), truth, center);
}

SeamReport seam_discontinuity(const RasterImage& stitched, const TilePlan& plan, const SeamOptions& options) {
    if (stitched.width() != plan.slide_width || stitched.height() != plan.slide_height)
        throw ValidationError("stitched image does not match tile plan");
    if (options.baseline_offset < 1)
        throw ValidationError("seam baseline offset must be >= 1");
    const int spacing = plan.geometry.output_size;

    SeamReport report;
    report.vertical_seams = measure(stitched.width(), options.origin_x + spacing, spacing, options.baseline_offset,
                                    [&](int c) { return column_step(stitched, c); });
    report.horizontal_seams = measure(stitched.height(), options.origin_y + spacing, spacing,
                                      options.baseline_offset, [&](int r) { return row_step(stitched, r); });

    const std::size_t n = report.vertical_seams.size() + report.horizontal_seams.size();
    if (n > 0) {
        double value_sum = 0.0, baseline_sum = 0.0;
        for (const auto* seams : {&report.vertical_seams, &report.horizontal_seams})
            for (const auto& s : *seams) {
                value_sum += s.value;
                baseline_sum += s.baseline;
            }
        report.global_index = value_sum / double(n);
        report.baseline = baseline_sum / double(n);
    }
    return report;
}

nlohmann::json seam_report_to_json(const SeamReport& report) {
    return {{"vertical_seams", seams_to_json(report.vertical_seams)},
            {"horizontal_seams", seams_to_json(report.horizontal_seams)},
            {"global_index", report.global_index},
            {"baseline", report.baseline}};
}

} // namespace ccwsi
