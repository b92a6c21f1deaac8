#include "ccwsi/translators.hpp"

#include <algorithm>
#include <cmath>

namespace ccwsi {

void Translator::translate_batch(std::span<const TranslationRequest> requests,
                                 const std::function<void(TranslationResult)>& on_result) {
    for (const auto& request : requests)
        on_result(translate(request));
}

TranslationResult IdentityTranslator::translate(const TranslationRequest& request) {
    return {request.tile_id, request.tile};
}

PlaneStats tissue_chroma_stats(const RasterImage& img, const TissueMask& mask, Anchor anchor, double epsilon) {
    PlaneStats s;
    double su = 0.0, sv = 0.0, suu = 0.0, svv = 0.0;
    const auto samples = img.samples();
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        if (mask.bits()[i] == 0)
            continue;
        const std::array<double, 3> rgb = {samples[3 * i] / 255.0, samples[3 * i + 1] / 255.0,
                                           samples[3 * i + 2] / 255.0};
        const double w = std::sqrt(rgb[0] * rgb[0] + rgb[1] * rgb[1] + rgb[2] * rgb[2]);
        const auto [u, v] = log_chroma(rgb, anchor, epsilon);
        s.mass += w;
        su += w * u;
        sv += w * v;
        suu += w * u * u;
        svv += w * v * v;
    }
    if (s.mass <= 0.0)
        return s;
    s.mean_u = su / s.mass;
    s.mean_v = sv / s.mass;
    s.sd_u = std::sqrt(std::max(0.0, suu / s.mass - s.mean_u * s.mean_u));
    s.sd_v = std::sqrt(std::max(0.0, svv / s.mass - s.mean_v * s.mean_v));
    return s;
}

TranslationResult ChromaMatchTranslator::translate(const TranslationRequest& request) {
    if (!request.condition)
        throw ValidationError("empty histogram condition");
    const auto target = chroma_stats(*request.condition)[static_cast<int>(options_.anchor)];
    if (target.mass <= 0.0)
        throw ValidationError("empty histogram condition");

    const double eps = request.condition->epsilon();
    const auto mask = compute_tissue_mask(request.tile, options_.tissue);
    const auto source = tissue_chroma_stats(request.tile, mask, options_.anchor, eps);
    TranslationResult result{request.tile_id, request.tile};
    if (source.mass <= 0.0)
        return result;

    const double scale_u = target.sd_u / std::max(source.sd_u, options_.min_source_sd);
    const double scale_v = target.sd_v / std::max(source.sd_v, options_.min_source_sd);
    const int a = static_cast<int>(options_.anchor);
    const auto [c1, c2] = companion_channels(options_.anchor);

    auto quantize = [](double x) { return std::uint8_t(std::floor(std::clamp(x, 0.0, 1.0) * 255.0 + 0.5)); };

    auto out = result.tile.samples();
    for (std::size_t i = 0; i < result.tile.pixel_count(); ++i) {
        if (mask.bits()[i] == 0)
            continue;
        const std::array<double, 3> rgb = {out[3 * i] / 255.0, out[3 * i + 1] / 255.0, out[3 * i + 2] / 255.0};
        const double intensity = std::sqrt(rgb[0] * rgb[0] + rgb[1] * rgb[1] + rgb[2] * rgb[2]);
        const auto [u, v] = log_chroma(rgb, options_.anchor, eps);
        const double u2 = (u - source.mean_u) * scale_u + target.mean_u;
        const double v2 = (v - source.mean_v) * scale_v + target.mean_v;

        std::array<double, 3> rebuilt{};
        rebuilt[a] = 1.0;
        rebuilt[c1] = std::exp(-u2);
        rebuilt[c2] = std::exp(-v2);
        const double norm = std::sqrt(rebuilt[0] * rebuilt[0] + rebuilt[1] * rebuilt[1] + rebuilt[2] * rebuilt[2]);
        const double s = intensity / norm;
        for (int c = 0; c < 3; ++c)
            out[3 * i + c] = quantize(s * rebuilt[c]);
    }
    return result;
}

} // namespace ccwsi
