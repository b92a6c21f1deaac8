#pragma once

#include "ccwsi/error.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ccwsi::study {

enum class Method { Traditional, Synthetic };
enum class Identification { Synthetic, Traditional, CannotTell };

std::string_view to_string(Method m);
std::string_view to_string(Identification id);
Identification parse_identification(std::string_view text);

/// Errors carry the HTTP-facing category.
class StudyError : public Error {
public:
    enum class Kind { Invalid, NotFound, Duplicate, Orphan };
    StudyError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] std::string_view code() const noexcept;

private:
    Kind kind_;
};

struct StudyCase {
    std::string case_id;
    std::filesystem::path he_image;
    std::filesystem::path traditional_sox10;
    std::filesystem::path synthetic_sox10;
};

struct StudyDefinition {
    std::vector<StudyCase> cases;
    std::uint64_t seed = 0;
    std::vector<std::string> reviewers;

    /// Relative image paths are resolved against base_dir. With check_paths
    /// every image must exist.
    static StudyDefinition from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {},
                                     bool check_paths = true);
    static StudyDefinition load(const std::filesystem::path& path, bool check_paths = true);
    [[nodiscard]] nlohmann::json to_json() const;
    void validate(bool check_paths) const;
};

struct ReviewItem {
    int position = 0;
    int block = 1;
    std::string case_id;
    Method method = Method::Traditional;
    std::string blinded_label;
};

/// Two blocks over the same cases. A single splitmix64 stream seeded with the
/// study seed drives, in order: a Fisher-Yates shuffle of block 1 (i from n-1
/// down to 1, j uniform on [0, i] by rejection sampling), one fair coin per
/// block-1 position (top bit of the next draw: 1 = synthetic), then the
/// Fisher-Yates shuffle of block 2. Block 2 gives every case the other method.
/// Labels come from a separate stream and carry no information about method.
std::vector<ReviewItem> generate_schedule(const StudyDefinition& def);

/// Full schedule, including methods. For administrators only.
nlohmann::json schedule_to_json(const std::vector<ReviewItem>& schedule);

/// What a reviewer's client receives: label and position only.
nlohmann::json blinded_item_json(const ReviewItem& item, std::size_t total);

struct ReviewResponse {
    std::string reviewer_id;
    int position = 0;
    int effectiveness = 0; // 1..4
    int quality = 0;       // 1..4
    Identification identification = Identification::CannotTell;
    std::int64_t timestamp = 0; // UTC seconds

    bool operator==(const ReviewResponse&) const = default;
};

nlohmann::json response_to_json(const ReviewResponse& r);
/// Validates field presence, types and rating ranges. A missing timestamp
/// becomes `default_timestamp`.
ReviewResponse response_from_json(const nlohmann::json& j, std::int64_t default_timestamp = 0);

/// Newline-delimited JSON, append-only. A torn final line (no trailing
/// newline) is dropped on load and trimmed from the file before appending.
class ResponseLog {
public:
    explicit ResponseLog(std::filesystem::path path);

    /// Reads every complete line; a corrupt complete line throws.
    std::vector<ReviewResponse> replay();
    /// Writes one line and fsyncs before returning.
    void append(const ReviewResponse& r);

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

struct RatingSummary {
    std::array<std::size_t, 4> counts{};
    std::array<int, 4> percent{}; // of n, rounded half up
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0; // sample (n-1); 0 when n < 2
    std::string mean_display;
    std::string sd_display;
};

struct MethodStats {
    RatingSummary effectiveness;
    RatingSummary quality;
};

struct CountPercent {
    std::size_t n = 0;
    int percent = 0; // of all reviews, rounded half up
};

struct IdentificationTable {
    CountPercent incorrect;
    CountPercent traditional_when_synthetic;
    CountPercent synthetic_when_traditional;
    CountPercent correct;
    CountPercent correct_synthetic;
    CountPercent correct_traditional;
    CountPercent cannot_tell;
};

struct StudyStats {
    std::size_t total_reviews = 0;
    MethodStats traditional;
    MethodStats synthetic;
    IdentificationTable identification;

    [[nodiscard]] nlohmann::json to_json() const;
    /// Plain-text rating and identification tables.
    [[nodiscard]] std::string render() const;
};

/// round(100 * count / total), halves up, in exact integer arithmetic.
int percent_half_up(std::size_t count, std::size_t total);
/// numerator / denominator to one decimal, halves up, exact.
std::string one_decimal_half_up(std::uint64_t numerator, std::uint64_t denominator);

/// Throws StudyError(Orphan) for a response whose position is not scheduled.
StudyStats compute_stats(const std::vector<ReviewResponse>& responses, const std::vector<ReviewItem>& schedule);

struct Progress {
    std::size_t answered = 0;
    std::size_t total = 0;
    [[nodiscard]] bool complete() const noexcept { return answered == total; }
};

/// The running study: immutable schedule plus the durable response log.
/// All operations are safe to call from several threads.
class StudySession {
public:
    StudySession(StudyDefinition def, std::filesystem::path log_path);

    [[nodiscard]] const StudyDefinition& definition() const noexcept { return def_; }
    [[nodiscard]] const std::vector<ReviewItem>& schedule() const noexcept { return schedule_; }

    /// Lowest position this reviewer has not answered; nullopt when done.
    std::optional<ReviewItem> next_item(const std::string& reviewer_id) const;
    /// Validates, appends durably, then acknowledges.
    void record_response(const ReviewResponse& response);
    Progress progress(const std::string& reviewer_id) const;
    [[nodiscard]] std::vector<ReviewResponse> responses() const;
    [[nodiscard]] const ReviewItem* find_label(const std::string& label) const;
    [[nodiscard]] const StudyCase& case_for(const ReviewItem& item) const;
    StudyStats stats() const;

private:
    void require_reviewer(const std::string& reviewer_id) const;
    void check_response(const ReviewResponse& response) const;

    StudyDefinition def_;
    std::vector<ReviewItem> schedule_;
    std::unordered_map<std::string, std::size_t> label_index_;
    std::unordered_map<std::string, std::size_t> case_index_;

    mutable std::mutex mutex_;
    ResponseLog log_;
    std::vector<ReviewResponse> responses_;
    std::unordered_map<std::string, std::vector<bool>> answered_;
};

} // namespace ccwsi::study
