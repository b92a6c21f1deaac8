#include "ccwsi/tiling.hpp"

#include <charconv>
#include <string>

namespace ccwsi {

void TileGeometry::validate() const {
    if (output_size < 1 || input_size <= output_size)
        throw ValidationError("invalid geometry: input size must exceed output size");
    if ((input_size - output_size) % 2 != 0)
        throw ValidationError("invalid geometry: input - output must be even");
}

TileGeometry TileGeometry::parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos)
        throw ValidationError("geometry must look like IN:OUT");
    TileGeometry g;
    const auto in = text.substr(0, colon);
    const auto out = text.substr(colon + 1);
    auto r1 = std::from_chars(in.data(), in.data() + in.size(), g.input_size);
    auto r2 = std::from_chars(out.data(), out.data() + out.size(), g.output_size);
    if (r1.ec != std::errc{} || r1.ptr != in.data() + in.size() || r2.ec != std::errc{} ||
        r2.ptr != out.data() + out.size())
        throw ValidationError("geometry must look like IN:OUT");
    g.validate();
    return g;
}

TileRef TilePlan::tile(int row, int col) const {
    if (row < 0 || row >= rows || col < 0 || col >= cols)
        throw ValidationError("tile index out of range");
    const int out = geometry.output_size;
    const int ctx = geometry.context();
    TileRef ref;
    ref.row = row;
    ref.col = col;
    ref.core = {col * out, row * out, out, out};
    ref.source = {col * out - ctx, row * out - ctx, geometry.input_size, geometry.input_size};
    return ref;
}

std::vector<TileRef> TilePlan::tiles() const {
    std::vector<TileRef> refs;
    refs.reserve(tile_count());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            refs.push_back(tile(r, c));
    return refs;
}

TilePlan plan_tiles(int slide_width, int slide_height, const TileGeometry& geometry) {
    geometry.validate();
    if (slide_width < 1 || slide_height < 1)
        throw ValidationError("slide dimensions must be positive");
    TilePlan plan;
    plan.slide_width = slide_width;
    plan.slide_height = slide_height;
    plan.geometry = geometry;
    plan.cols = (slide_width + geometry.output_size - 1) / geometry.output_size;
    plan.rows = (slide_height + geometry.output_size - 1) / geometry.output_size;
    plan.padded_width = plan.cols * geometry.output_size;
    plan.padded_height = plan.rows * geometry.output_size;
    return plan;
}

RasterImage extract_tile(const RasterImage& slide, const TilePlan& plan, int row, int col) {
    if (slide.width() != plan.slide_width || slide.height() != plan.slide_height)
        throw ValidationError("slide does not match tile plan");
    const int ctx = plan.geometry.context();
    if (slide.width() <= ctx || slide.height() <= ctx)
        throw ValidationError("slide dimension must exceed the context ring (" + std::to_string(ctx) +
                              " px) for reflection");
    const auto ref = plan.tile(row, col);
    const Region& src = ref.source;

    if (slide.contains(src))
        return crop(slide, src);

    RasterImage tile(src.w, src.h);
    for (int y = 0; y < src.h; ++y) {
        const int sy = reflect_index(src.y + y, slide.height());
        for (int x = 0; x < src.w; ++x) {
            const int sx = reflect_index(src.x + x, slide.width());
            tile.set_pixel(x, y, slide.at(sx, sy, 0), slide.at(sx, sy, 1), slide.at(sx, sy, 2));
        }
    }
    return tile;
}

RasterImage center_crop(const RasterImage& tile, const TileGeometry& geometry) {
    if (tile.width() != geometry.input_size || tile.height() != geometry.input_size)
        throw ValidationError("translated tile does not match geometry input size");
    const int ctx = geometry.context();
    return crop(tile, {ctx, ctx, geometry.output_size, geometry.output_size});
}

RasterImage stitch(std::span<const TileCore> cores, const TilePlan& plan) {
    std::vector<std::uint8_t> seen(plan.tile_count(), 0);
    RasterImage canvas(plan.padded_width, plan.padded_height);
    for (const auto& core : cores) {
        if (core.row < 0 || core.row >= plan.rows || core.col < 0 || core.col >= plan.cols)
            throw ValidationError("tile index out of range");
        if (core.image.width() != plan.geometry.output_size || core.image.height() != plan.geometry.output_size)
            throw ValidationError("wrong core size at tile (" + std::to_string(core.row) + "," +
                                  std::to_string(core.col) + ")");
        auto& flag = seen[plan.tile_id(core.row, core.col)];
        if (flag != 0)
            throw ValidationError("missing/duplicate tile: duplicate (" + std::to_string(core.row) + "," +
                                  std::to_string(core.col) + ")");
        flag = 1;
        canvas = paste(core.image, std::move(canvas), plan.tile(core.row, core.col).core);
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (seen[i] == 0)
            throw ValidationError("missing/duplicate tile: missing (" + std::to_string(i / plan.cols) + "," +
                                  std::to_string(i % plan.cols) + ")");
    if (plan.padded_width == plan.slide_width && plan.padded_height == plan.slide_height)
        return canvas;
    return crop(canvas, {0, 0, plan.slide_width, plan.slide_height});
}

} // namespace ccwsi
