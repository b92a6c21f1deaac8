#include "ccwsi/losses.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace ccwsi {

double histogram_loss(std::span<const double> truth, std::span<const double> synthetic) {
    if (truth.size() != synthetic.size())
        throw ValidationError("histogram shapes differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0.0 || synthetic[i] < 0.0)
            throw ValidationError("histogram entries must be non-negative");
        const double d = std::sqrt(truth[i]) - std::sqrt(synthetic[i]);
        sum += d * d;
    }
    return 0.5 * std::sqrt(sum);
}

double histogram_loss(const ChromaHistogram& truth, const ChromaHistogram& synthetic) {
    if (truth.bins() != synthetic.bins())
        throw ValidationError("histogram shapes differ");
    return histogram_loss(truth.values(), synthetic.values());
}

double adaptive_weight(double tissue_portion) {
    if (!(tissue_portion >= 0.0 && tissue_portion <= 1.0))
        throw ValidationError("tissue portion must lie in [0,1]");
    return 1.0 / (1.0 + std::exp(-tissue_portion));
}

double gan_value(const DiscriminatorOutputs& real, const DiscriminatorOutputs& fake) {
    double value = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i) {
        if (!(real[i] > 0.0 && real[i] < 1.0) || !(fake[i] > 0.0 && fake[i] < 1.0))
            throw ValidationError("discriminator outputs must lie strictly inside (0,1)");
        value += std::log(real[i]) + std::log1p(-fake[i]);
    }
    return value;
}

double feature_matching_value(const FeatureMapSet& real, const FeatureMapSet& fake, FeatureReduction reduction) {
    if (real.size() != fake.size())
        throw ValidationError("feature sets have different layer counts");
    if (real.empty())
        return 0.0;
    double total = 0.0;
    for (std::size_t l = 0; l < real.size(); ++l) {
        const auto& a = real[l];
        const auto& b = fake[l];
        if (a.shape != b.shape)
            throw ValidationError("feature layer " + std::to_string(l) + " shapes differ");
        const auto expected =
            std::accumulate(a.shape.begin(), a.shape.end(), std::size_t{1}, std::multiplies<>());
        if (a.values.size() != expected || b.values.size() != expected)
            throw ValidationError("feature layer " + std::to_string(l) + " value count does not match shape");
        if (expected == 0)
            continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < expected; ++i)
            sum += std::abs(a.values[i] - b.values[i]);
        total += sum / double(expected);
    }
    return reduction == FeatureReduction::MeanOverLayers ? total / double(real.size()) : total;
}

double detection_value(const DetectionLossComponents& c) {
    if (!(c.classification >= 0.0) || !(c.localization >= 0.0) || !(c.segmentation >= 0.0))
        throw ValidationError("detection loss components must be non-negative");
    return c.classification + c.localization + c.segmentation;
}

double combined_objective(double gan, double feat, double det, double hist, double tissue_portion,
                          const LossWeights& weights) {
    for (double v : {gan, feat, det, hist, tissue_portion, weights.lambda_feat})
        if (!std::isfinite(v))
            throw ValidationError("objective components must be finite");
    if (weights.lambda_feat < 0.0)
        throw ValidationError("lambda_feat must be non-negative");
    return gan + weights.lambda_feat * feat + det + adaptive_weight(tissue_portion) * hist;
}

} // namespace ccwsi
