#pragma once

#include "ccwsi/image.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ccwsi {

/// Context tile in, center crop out. The ring of width context() around the
/// center is seen by the translator and then discarded.
struct TileGeometry {
    int input_size = 256;
    int output_size = 192;

    [[nodiscard]] int context() const noexcept { return (input_size - output_size) / 2; }
    void validate() const;

    /// Parses "IN:OUT", e.g. "256:192".
    static TileGeometry parse(std::string_view text);

    bool operator==(const TileGeometry&) const = default;
};

struct TileRef {
    int row = 0;
    int col = 0;
    Region core;   // output_size square on the padded canvas
    Region source; // input_size square centered on core; may extend past the canvas
};

struct TilePlan {
    int slide_width = 0;
    int slide_height = 0;
    int rows = 0;
    int cols = 0;
    TileGeometry geometry;
    int padded_width = 0;
    int padded_height = 0;

    [[nodiscard]] std::size_t tile_count() const noexcept { return std::size_t(rows) * std::size_t(cols); }
    [[nodiscard]] std::uint32_t tile_id(int row, int col) const noexcept { return std::uint32_t(row * cols + col); }
    [[nodiscard]] TileRef tile(int row, int col) const;
    /// Row-major.
    [[nodiscard]] std::vector<TileRef> tiles() const;
};

TilePlan plan_tiles(int slide_width, int slide_height, const TileGeometry& geometry = {});

/// Reads the source square of tile (row, col). Coordinates outside the slide
/// are mirrored back into it (repeatedly if the padding exceeds the slide).
/// Requires both slide dimensions to exceed the context width.
RasterImage extract_tile(const RasterImage& slide, const TilePlan& plan, int row, int col);

/// The output_size square at the center of a translated input_size tile.
RasterImage center_crop(const RasterImage& tile, const TileGeometry& geometry);

struct TileCore {
    int row = 0;
    int col = 0;
    RasterImage image;
};

/// Pastes every core onto the padded canvas and crops back to the slide
/// size. Cores may arrive in any order; each (row, col) exactly once.
RasterImage stitch(std::span<const TileCore> cores, const TilePlan& plan);

} // namespace ccwsi
