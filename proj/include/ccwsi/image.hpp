#pragma once

#include "ccwsi/error.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ccwsi {

/// Axis-aligned pixel rectangle. Coordinates may be negative when describing
/// a region that extends past an image (tile context rings); any operation
/// that reads or writes pixels requires it to lie inside the image.
struct Region {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool operator==(const Region&) const = default;
    [[nodiscard]] std::size_t area() const { return std::size_t(w) * std::size_t(h); }
};

/// 8-bit interleaved RGB raster, row-major.
class RasterImage {
public:
    static constexpr int kChannels = 3;

    /// Zero-filled (black) image.
    RasterImage(int width, int height);
    RasterImage(int width, int height, std::uint8_t fill);
    RasterImage(int width, int height, std::vector<std::uint8_t> samples);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] std::size_t pixel_count() const noexcept { return std::size_t(width_) * std::size_t(height_); }

    [[nodiscard]] std::span<const std::uint8_t> samples() const noexcept { return samples_; }
    [[nodiscard]] std::span<std::uint8_t> samples() noexcept { return samples_; }

    [[nodiscard]] std::uint8_t at(int x, int y, int c) const noexcept { return samples_[offset(x, y) + c]; }
    [[nodiscard]] std::uint8_t& at(int x, int y, int c) noexcept { return samples_[offset(x, y) + c]; }

    [[nodiscard]] std::span<const std::uint8_t> row(int y) const noexcept {
        return std::span(samples_).subspan(offset(0, y), std::size_t(width_) * kChannels);
    }
    [[nodiscard]] std::span<std::uint8_t> row(int y) noexcept {
        return std::span(samples_).subspan(offset(0, y), std::size_t(width_) * kChannels);
    }

    void set_pixel(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
        auto o = offset(x, y);
        samples_[o] = r;
        samples_[o + 1] = g;
        samples_[o + 2] = b;
    }

    [[nodiscard]] Region bounds() const noexcept { return {0, 0, width_, height_}; }
    [[nodiscard]] bool contains(const Region& r) const noexcept;

    bool operator==(const RasterImage&) const = default;

private:
    [[nodiscard]] std::size_t offset(int x, int y) const noexcept {
        return (std::size_t(y) * std::size_t(width_) + std::size_t(x)) * kChannels;
    }

    int width_;
    int height_;
    std::vector<std::uint8_t> samples_;
};

/// One flag per pixel, true where the pixel is tissue.
class TissueMask {
public:
    TissueMask(int width, int height, std::vector<std::uint8_t> bits);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] bool at(int x, int y) const noexcept { return bits_[std::size_t(y) * width_ + x] != 0; }
    [[nodiscard]] std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    [[nodiscard]] std::size_t count() const noexcept;

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> bits_;
};

/// Background rejection thresholds, both on [0,1] scales.
struct TissueCriterion {
    double sat_min = 0.05;
    double lum_max = 0.95;
};

/// Raised by load_image / save_image. The message starts with the kind.
class ImageIoError : public RuntimeFailure {
public:
    enum class Kind { Unreadable, UnsupportedFormat, DimensionOverflow };
    ImageIoError(Kind kind, const std::string& detail);
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Decodes PNG (gray, gray+alpha, RGB, RGBA, palette, 16-bit) or binary PPM/PGM.
/// Gray is replicated to RGB, alpha is dropped (not composited), 16-bit is
/// reduced to its high byte. No gamma or ICC handling.
RasterImage load_image(const std::filesystem::path& path);
RasterImage decode_image(std::span<const std::uint8_t> bytes);

/// Format chosen from the extension: .png, .ppm or .pnm.
void save_image(const RasterImage& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const RasterImage& img);
std::vector<std::uint8_t> encode_ppm(const RasterImage& img);

RasterImage crop(const RasterImage& img, const Region& r);
RasterImage paste(const RasterImage& src, RasterImage dst, const Region& at);

/// Mirror padding that does not repeat the edge sample: a left pad of 1
/// places column 1 at position -1. Each pad must be smaller than the
/// corresponding dimension.
RasterImage reflect_pad(const RasterImage& img, int left, int right, int top, int bottom);

/// Maps an arbitrary coordinate onto [0, n) by repeated mirroring about the
/// edge samples (period 2(n-1)). Requires n >= 2 unless i is already in range.
int reflect_index(int i, int n);

TissueMask compute_tissue_mask(const RasterImage& img, const TissueCriterion& criterion = {});
double tissue_portion(const TissueMask& mask);

/// Box-filter mean over factor x factor blocks; edge blocks average only the
/// pixels present. Output rounds half up.
RasterImage downsample(const RasterImage& img, int factor);

} // namespace ccwsi
