#pragma once

#include "ccwsi/evaluation.hpp"
#include "ccwsi/image.hpp"
#include "ccwsi/study.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using ccwsi::RasterImage;

RasterImage random_image(int width, int height, std::mt19937_64& rng);

/// Bilinear value noise on a grid of `cell` pixels, each channel drawn from
/// [lo[c], hi[c]].
RasterImage smooth_texture(int width, int height, int cell, std::array<int, 3> lo, std::array<int, 3> hi,
                           std::uint64_t seed);

/// Pinkish tissue-like field: every pixel saturated enough to be tissue.
RasterImage smooth_tissue(int width, int height, std::uint64_t seed);

/// Unique empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// 25 cases, three reviewers, image paths not checked.
ccwsi::study::StudyDefinition golden_definition(std::uint64_t seed = 20240611);

/// Responses for every (reviewer, position) whose per-method rating counts
/// and identification counts equal the published reader-study tables.
std::vector<ccwsi::study::ReviewResponse> golden_responses(const ccwsi::study::StudyDefinition& def,
                                                           const std::vector<ccwsi::study::ReviewItem>& schedule);

/// Largest number of disjoint (prediction, ground truth) pairs with
/// IoU >= threshold, by exhaustive search.
std::size_t exhaustive_max_matches(const std::vector<ccwsi::DetectionBox>& preds,
                                   const std::vector<ccwsi::DetectionBox>& gts, double threshold);

/// Up to six pairwise-disjoint ground-truth boxes, and up to six predictions
/// jittered from them or placed at random, with random scores.
struct DetectionInstance {
    std::vector<ccwsi::DetectionBox> preds;
    std::vector<ccwsi::DetectionBox> gts;
};
DetectionInstance random_detection_instance(std::mt19937_64& rng);

std::string echo_translator_path();
std::string cli_path();

} // namespace fixtures
