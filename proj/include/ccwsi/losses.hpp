#pragma once

#include "ccwsi/histogram.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace ccwsi {

/// Discriminator probabilities, one per scale. Each strictly inside (0,1).
using DiscriminatorOutputs = std::array<double, 2>;

struct FeatureLayer {
    std::vector<std::size_t> shape;
    std::vector<double> values; // row-major, size = product(shape)
};
using FeatureMapSet = std::vector<FeatureLayer>;

struct DetectionLossComponents {
    double classification = 0.0;
    double localization = 0.0;
    double segmentation = 0.0;
};

enum class FeatureReduction { MeanOverLayers, SumOverLayers };

struct LossWeights {
    double lambda_feat = 10.0;
};

/// Half the Euclidean distance between element-wise square roots.
double histogram_loss(const ChromaHistogram& truth, const ChromaHistogram& synthetic);
double histogram_loss(std::span<const double> truth, std::span<const double> synthetic);

/// Logistic sigmoid of the tissue portion; input must lie in [0,1].
double adaptive_weight(double tissue_portion);

/// sum_i ln(real_i) + ln(1 - fake_i). No clamping: 0 or 1 throws.
double gan_value(const DiscriminatorOutputs& real, const DiscriminatorOutputs& fake);

/// Per layer mean |real - fake|, then mean (default) or sum across layers.
double feature_matching_value(const FeatureMapSet& real, const FeatureMapSet& fake,
                              FeatureReduction reduction = FeatureReduction::MeanOverLayers);

double detection_value(const DetectionLossComponents& c);

/// gan + lambda * feat + det + adaptive_weight(tissue_portion) * hist
double combined_objective(double gan, double feat, double det, double hist, double tissue_portion,
                          const LossWeights& weights = {});

} // namespace ccwsi
