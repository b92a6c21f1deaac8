#pragma once

#include "ccwsi/consistency.hpp"
#include "ccwsi/evaluation.hpp"
#include "ccwsi/histogram.hpp"
#include "ccwsi/tiling.hpp"
#include "ccwsi/translators.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ccwsi {

enum class TranslatorKind { Identity, ChromaMatch, External };

TranslatorKind parse_translator_kind(std::string_view name);
std::string_view translator_name(TranslatorKind kind);

struct PipelineConfig {
    TileGeometry geometry;
    TranslatorKind translator = TranslatorKind::Identity;
    std::string external_command;
    std::chrono::milliseconds external_timeout{60000};
    HistogramOptions histogram;
    /// A sidecar wins over a condition image. With neither, the input slide
    /// itself is the condition image.
    std::optional<std::filesystem::path> condition_hist;
    std::optional<std::filesystem::path> condition_image;
    int condition_factor = 4;
    std::size_t workers = 1;
    TissueCriterion tissue;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> truth;
    SeamOptions seam;

    void validate() const;
};

struct TileTiming {
    int row = 0;
    int col = 0;
    double millis = 0.0;
};

/// Failure while translating a specific tile.
class TileFailure : public RuntimeFailure {
public:
    TileFailure(int row, int col, const std::string& what);
    int row;
    int col;
};

struct ConditionInfo {
    std::string source; // "sidecar", "image" or "input"
    std::optional<std::filesystem::path> path;
    int factor = 1;
};

struct RunReport {
    bool ok = false;
    bool validation_failure = false; // bad configuration or inputs, as opposed to a runtime fault
    std::string error;
    std::filesystem::path input;
    std::filesystem::path output;
    TranslatorKind translator = TranslatorKind::Identity;
    TileGeometry geometry;
    std::size_t workers = 1;
    int slide_width = 0;
    int slide_height = 0;
    std::optional<TilePlan> plan;
    ConditionInfo condition;
    std::vector<TileTiming> tiles; // completed tiles, row-major
    std::optional<SeamReport> seams;
    std::optional<double> rmse;
    std::optional<Psnr> psnr;
    double elapsed_ms = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Computes the condition histogram the pipeline would use for `slide`.
std::shared_ptr<const ChromaHistogram> resolve_condition(const PipelineConfig& config, const RasterImage& slide,
                                                         ConditionInfo* info = nullptr);

std::unique_ptr<Translator> make_translator(const PipelineConfig& config);

/// Tile -> translate -> center crop -> stitch, in memory. Tiles are
/// translated on `config.workers` threads (or pipelined through the
/// translator's batch interface when it is not thread safe); the result does
/// not depend on completion order. Completed tiles are appended to `timings`
/// in row-major order, also on failure.
RasterImage restain_slide(const RasterImage& slide, const PipelineConfig& config, Translator& translator,
                          std::shared_ptr<const ChromaHistogram> condition,
                          std::vector<TileTiming>* timings = nullptr);

/// Full file-to-file run. The output is written to a temporary file and
/// renamed into place only on success. Never throws for processing errors;
/// they are reported with ok = false.
RunReport run_restain(const PipelineConfig& config, const std::filesystem::path& input,
                      const std::filesystem::path& output);

struct EvalInputs {
    std::filesystem::path synthetic;
    std::filesystem::path truth;
    std::optional<std::filesystem::path> detections_pred;
    std::optional<std::filesystem::path> detections_gt;
    MatchOptions match;
};

/// Single images, or directories of same-named files (per-patch entries plus
/// means). Detections follow the same single/directory convention.
nlohmann::json run_eval(const EvalInputs& inputs);

/// Condition histogram of an image after factor downsampling; written as a
/// sidecar (and optionally as JSON).
ChromaHistogram run_histogram(const std::filesystem::path& image, const HistogramOptions& options, int factor,
                              const std::filesystem::path& out,
                              const std::optional<std::filesystem::path>& json_out = std::nullopt);

} // namespace ccwsi
