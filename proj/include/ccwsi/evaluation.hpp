#pragma once

#include "ccwsi/image.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace ccwsi {

/// Root mean squared difference over all samples, in 8-bit units.
double rmse(const RasterImage& a, const RasterImage& b);

/// PSNR in dB. Identical inputs give an explicit infinite value rather than a cap.
struct Psnr {
    bool infinite = false;
    double db = 0.0;

    static Psnr infinity() { return {true, 0.0}; }
    [[nodiscard]] std::string display() const; // "inf" marker renders as "∞"
};

Psnr psnr(const RasterImage& a, const RasterImage& b, double peak = 255.0);

struct DetectionBox {
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;
    double score = 1.0;

    void validate() const;
    bool operator==(const DetectionBox&) const = default;
};

double iou(const DetectionBox& a, const DetectionBox& b);

struct DetectionMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t n_pred = 0;
    std::size_t n_gt = 0;
};

struct MatchOptions {
    double iou_threshold = 0.5;
    /// No predictions and no ground truth scores P = R = F1 = 1 (else 0).
    bool both_empty_is_perfect = true;
};

/// Score-ordered greedy matching: each prediction, highest score first,
/// takes the unmatched ground truth with the largest IoU >= threshold.
/// Ties are broken on box coordinates so the result does not depend on
/// input order.
DetectionMetrics match_and_score(std::vector<DetectionBox> preds, std::vector<DetectionBox> gts,
                                 const MatchOptions& options = {});

std::vector<DetectionBox> detections_from_json(const nlohmann::json& j);
std::vector<DetectionBox> load_detections(const std::filesystem::path& path);
nlohmann::json detections_to_json(const std::vector<DetectionBox>& boxes);
nlohmann::json metrics_to_json(const DetectionMetrics& m);
nlohmann::json psnr_to_json(const Psnr& p);

} // namespace ccwsi
