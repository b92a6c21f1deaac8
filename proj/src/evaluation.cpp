#include "ccwsi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

namespace ccwsi {

namespace {

double mean_squared_error(const RasterImage& a, const RasterImage& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw ValidationError("dimension mismatch: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                              " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
    const auto sa = a.samples();
    const auto sb = b.samples();
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const std::int64_t d = std::int64_t(sa[i]) - std::int64_t(sb[i]);
        sum += std::uint64_t(d * d);
    }
    return double(sum) / double(sa.size());
}

auto box_key(const DetectionBox& b) { return std::tie(b.x, b.y, b.w, b.h); }

} // namespace

double rmse(const RasterImage& a, const RasterImage& b) { return std::sqrt(mean_squared_error(a, b)); }

Psnr psnr(const RasterImage& a, const RasterImage& b, double peak) {
    if (!(peak > 0.0))
        throw ValidationError("PSNR peak must be positive");
    const double mse = mean_squared_error(a, b);
    if (mse == 0.0)
        return Psnr::infinity();
    return {false, 10.0 * std::log10(peak * peak / mse)};
}

std::string Psnr::display() const {
    if (infinite)
        return "∞";
    std::ostringstream os;
    os.precision(4);
    os << std::fixed << db;
    return os.str();
}

void DetectionBox::validate() const {
    if (!std::isfinite(x) || !std::isfinite(y) || !(w >= 1.0) || !(h >= 1.0) || !std::isfinite(w) ||
        !std::isfinite(h))
        throw ValidationError("detection box needs finite coordinates and w, h >= 1");
    if (!(score >= 0.0 && score <= 1.0))
        throw ValidationError("detection score must lie in [0,1]");
}

double iou(const DetectionBox& a, const DetectionBox& b) {
    const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
    const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0)
        return 0.0;
    const double inter = iw * ih;
    return inter / (a.w * a.h + b.w * b.h - inter);
}

DetectionMetrics match_and_score(std::vector<DetectionBox> preds, std::vector<DetectionBox> gts,
                                 const MatchOptions& options) {
    if (!(options.iou_threshold > 0.0 && options.iou_threshold <= 1.0))
        throw ValidationError("IoU threshold must lie in (0,1]");
    for (const auto& b : preds)
        b.validate();
    for (const auto& b : gts)
        b.validate();

    std::sort(preds.begin(), preds.end(), [](const DetectionBox& l, const DetectionBox& r) {
        if (l.score != r.score)
            return l.score > r.score;
        return box_key(l) < box_key(r);
    });
    std::sort(gts.begin(), gts.end(), [](const DetectionBox& l, const DetectionBox& r) { return box_key(l) < box_key(r); });

    DetectionMetrics m;
    m.n_pred = preds.size();
    m.n_gt = gts.size();
    std::vector<bool> taken(gts.size(), false);
    for (const auto& p : preds) {
        double best = options.iou_threshold;
        std::optional<std::size_t> best_gt;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g])
                continue;
            const double v = iou(p, gts[g]);
            if (v >= best && (!best_gt || v > best)) {
                best = v;
                best_gt = g;
            }
        }
        if (best_gt) {
            taken[*best_gt] = true;
            ++m.true_positives;
        }
    }

    if (m.n_pred == 0 && m.n_gt == 0) {
        const double v = options.both_empty_is_perfect ? 1.0 : 0.0;
        m.precision = m.recall = m.f1 = v;
        return m;
    }
    m.precision = m.n_pred == 0 ? 0.0 : double(m.true_positives) / double(m.n_pred);
    m.recall = m.n_gt == 0 ? 0.0 : double(m.true_positives) / double(m.n_gt);
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

std::vector<DetectionBox> detections_from_json(const nlohmann::json& j) {
    if (!j.is_array())
        throw ValidationError("detections must be a JSON array");
    std::vector<DetectionBox> boxes;
    boxes.reserve(j.size());
    for (const auto& item : j) {
        if (!item.is_object())
            throw ValidationError("detection entries must be objects");
        DetectionBox b;
        try {
            b.x = item.at("x").get<double>();
            b.y = item.at("y").get<double>();
            b.w = item.at("w").get<double>();
            b.h = item.at("h").get<double>();
            b.score = item.value("score", 1.0);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed detection: ") + e.what());
        }
        b.validate();
        boxes.push_back(b);
    }
    return boxes;
}

std::vector<DetectionBox> load_detections(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw RuntimeFailure("cannot read detections " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return detections_from_json(j);
}

nlohmann::json detections_to_json(const std::vector<DetectionBox>& boxes) {
    auto arr = nlohmann::json::array();
    for (const auto& b : boxes)
        arr.push_back({{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"score", b.score}});
    return arr;
}

nlohmann::json metrics_to_json(const DetectionMetrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall},   {"f1", m.f1},
            {"true_positives", m.true_positives}, {"n_pred", m.n_pred}, {"n_gt", m.n_gt}};
}

nlohmann::json psnr_to_json(const Psnr& p) {
    return {{"infinite", p.infinite}, {"db", p.infinite ? nlohmann::json(nullptr) : nlohmann::json(p.db)},
            {"display", p.display()}};
}

} // namespace ccwsi
