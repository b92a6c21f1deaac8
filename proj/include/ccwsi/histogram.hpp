#pragma once

#include "ccwsi/image.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace ccwsi {

enum class Anchor : int { R = 0, G = 1, B = 2 };

struct HistogramOptions {
    int bins = 64;
    double epsilon = 1e-6;
    /// Both axes span [-axis_limit, +axis_limit] in natural-log chroma units.
    double axis_limit = 3.0;
};

/// Three bins x bins planes of intensity-weighted log-chroma mass, one plane
/// per anchor channel. Plane a holds (u, v) = (ln(a/c1), ln(a/c2)) with
/// (c1, c2) = (G, B), (R, B), (R, G) for a = R, G, B. Mass sums to 1.
class ChromaHistogram {
public:
    /// Validates shape, non-negativity and normalization (|sum - 1| <= 1e-4).
    ChromaHistogram(int bins, std::vector<double> values, double axis_limit = 3.0, double epsilon = 1e-6);

    [[nodiscard]] int bins() const noexcept { return bins_; }
    [[nodiscard]] double axis_limit() const noexcept { return axis_limit_; }
    [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
    [[nodiscard]] double bin_width() const noexcept { return 2.0 * axis_limit_ / bins_; }
    [[nodiscard]] double bin_center(int k) const noexcept { return -axis_limit_ + (k + 0.5) * bin_width(); }
    /// Index of the nearest bin center after clamping to the axis range.
    [[nodiscard]] int bin_of(double coordinate) const noexcept;

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<const double> plane(Anchor anchor) const noexcept;
    [[nodiscard]] double at(Anchor anchor, int u_bin, int v_bin) const noexcept {
        return values_[plane_offset(anchor) + std::size_t(u_bin) * bins_ + v_bin];
    }

    bool operator==(const ChromaHistogram&) const = default;

private:
    [[nodiscard]] std::size_t plane_offset(Anchor anchor) const noexcept {
        return std::size_t(static_cast<int>(anchor)) * bins_ * bins_;
    }

    int bins_;
    double axis_limit_;
    double epsilon_;
    std::vector<double> values_;
};

/// Chroma pair of one RGB sample (channels on [0,1]) for the given anchor.
std::array<double, 2> log_chroma(std::array<double, 3> rgb, Anchor anchor, double epsilon);

/// The two non-anchor channel indices in their fixed order.
std::array<int, 2> companion_channels(Anchor anchor);

/// Raises ValidationError("empty histogram source") when no pixel is counted
/// or the counted pixels carry no intensity.
ChromaHistogram compute_histogram(const RasterImage& img, const HistogramOptions& options = {},
                                  const TissueMask* mask = nullptr);

struct PlaneStats {
    double mass = 0.0;
    double mean_u = 0.0;
    double mean_v = 0.0;
    double sd_u = 0.0; // population (mass-weighted) standard deviation
    double sd_v = 0.0;
};

/// Mass-weighted moments of the bin centers, per anchor plane. A plane with
/// no mass reports zeros.
std::array<PlaneStats, 3> chroma_stats(const ChromaHistogram& h);

// Sidecar: "CCH1" | bins u32le | 8 zero bytes | 3*bins*bins float32le.
// Only the default axis range is representable.
std::vector<std::uint8_t> encode_sidecar(const ChromaHistogram& h);
ChromaHistogram decode_sidecar(std::span<const std::uint8_t> bytes);
void write_sidecar(const ChromaHistogram& h, const std::filesystem::path& path);
ChromaHistogram read_sidecar(const std::filesystem::path& path);

nlohmann::json histogram_to_json(const ChromaHistogram& h);

} // namespace ccwsi
