#include "ccwsi/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <string>

namespace ccwsi {

namespace {

// Upper bound on decoded samples (w*h*3); keeps allocation sizes sane.
constexpr std::uint64_t kMaxSamples = std::uint64_t(1) << 36;

std::size_t checked_sample_count(std::uint64_t width, std::uint64_t height) {
    if (width == 0 || height == 0)
        throw ImageIoError(ImageIoError::Kind::Unreadable, "zero image dimension");
    if (width > std::uint64_t(std::numeric_limits<int>::max()) ||
        height > std::uint64_t(std::numeric_limits<int>::max()) ||
        width * height > kMaxSamples / RasterImage::kChannels)
        throw ImageIoError(ImageIoError::Kind::DimensionOverflow,
                           std::to_string(width) + "x" + std::to_string(height));
    return std::size_t(width * height * RasterImage::kChannels);
}

const char* kind_prefix(ImageIoError::Kind kind) {
    switch (kind) {
    case ImageIoError::Kind::Unreadable: return "unreadable file";
    case ImageIoError::Kind::UnsupportedFormat: return "unsupported format";
    case ImageIoError::Kind::DimensionOverflow: return "dimension overflow";
    }
    return "image error";
}

// ---- PNG -------------------------------------------------------------------

struct PngReadState {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    char error[256] = {};

    ~PngReadState() {
        if (png != nullptr)
            png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr);
    }
};

extern "C" void png_read_from_state(png_structp png, png_bytep out, png_size_t length) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->bytes.size() - state->pos < length)
        png_error(png, "truncated stream");
    std::memcpy(out, state->bytes.data() + state->pos, length);
    state->pos += length;
}

extern "C" void png_error_to_state(png_structp png, png_const_charp message) {
    auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
    std::snprintf(state->error, sizeof state->error, "%s", message);
    png_longjmp(png, 1);
}

extern "C" void png_ignore_warning(png_structp, png_const_charp) {}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
    auto state = std::make_unique<PngReadState>();
    state->bytes = bytes;
    state->png = png_create_read_struct(PNG_LIBPNG_VER_STRING, state.get(), png_error_to_state,
                                        png_ignore_warning);
    if (state->png == nullptr)
        throw RuntimeFailure("libpng initialisation failed");
    state->info = png_create_info_struct(state->png);
    if (state->info == nullptr)
        throw RuntimeFailure("libpng initialisation failed");

    if (setjmp(png_jmpbuf(state->png)))
        throw ImageIoError(ImageIoError::Kind::Unreadable, state->error);

    png_set_read_fn(state->png, state.get(), png_read_from_state);
    png_set_user_limits(state->png, 0x7fffffff, 0x7fffffff);
    png_read_info(state->png, state->info);

    state->width = png_get_image_width(state->png, state->info);
    state->height = png_get_image_height(state->png, state->info);
    const auto sample_count = checked_sample_count(state->width, state->height);

    const int color_type = png_get_color_type(state->png, state->info);
    png_set_strip_16(state->png);
    png_set_packing(state->png);
    if (color_type == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(state->png);
    if (color_type == PNG_COLOR_TYPE_GRAY)
        png_set_expand_gray_1_2_4_to_8(state->png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(state->png);
    png_set_strip_alpha(state->png);
    png_set_interlace_handling(state->png);
    png_read_update_info(state->png, state->info);

    if (png_get_channels(state->png, state->info) != 3 || png_get_bit_depth(state->png, state->info) != 8)
        throw ImageIoError(ImageIoError::Kind::UnsupportedFormat, "PNG did not reduce to 8-bit RGB");

    state->pixels.resize(sample_count);
    state->rows.resize(state->height);
    const std::size_t stride = std::size_t(state->width) * RasterImage::kChannels;
    for (png_uint_32 y = 0; y < state->height; ++y)
        state->rows[y] = state->pixels.data() + y * stride;
    png_read_image(state->png, state->rows.data());
    png_read_end(state->png, nullptr);

    return RasterImage(int(state->width), int(state->height), std::move(state->pixels));
}

// ---- PNM -------------------------------------------------------------------

class PnmHeaderReader {
public:
    explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t next_number() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
            throw ImageIoError(ImageIoError::Kind::Unreadable, "malformed PNM header");
        std::uint64_t value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (value > (std::uint64_t(1) << 40))
                throw ImageIoError(ImageIoError::Kind::DimensionOverflow, "PNM header value too large");
        }
        return value;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw ImageIoError(ImageIoError::Kind::Unreadable, "malformed PNM header");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n')
                    ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 2;
};

RasterImage decode_pnm(std::span<const std::uint8_t> bytes) {
    const bool gray = bytes[1] == '5';
    PnmHeaderReader reader(bytes);
    const auto width = reader.next_number();
    const auto height = reader.next_number();
    const auto maxval = reader.next_number();
    const auto offset = reader.raster_offset();
    if (maxval != 255)
        throw ImageIoError(ImageIoError::Kind::UnsupportedFormat, "PNM maxval must be 255");
    const auto sample_count = checked_sample_count(width, height);
    const std::size_t stored = gray ? sample_count / 3 : sample_count;
    if (bytes.size() - offset < stored)
        throw ImageIoError(ImageIoError::Kind::Unreadable, "truncated PNM raster");

    std::vector<std::uint8_t> samples(sample_count);
    const auto raster = bytes.subspan(offset, stored);
    if (gray) {
        for (std::size_t i = 0; i < stored; ++i)
            samples[3 * i] = samples[3 * i + 1] = samples[3 * i + 2] = raster[i];
    } else {
        std::copy(raster.begin(), raster.end(), samples.begin());
    }
    return RasterImage(int(width), int(height), std::move(samples));
}

std::string lower_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return ext;
}

} // namespace

// ---- RasterImage / TissueMask -------------------------------------------------

RasterImage::RasterImage(int width, int height) : RasterImage(width, height, std::uint8_t{0}) {}

RasterImage::RasterImage(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
    if (width < 1 || height < 1)
        throw ValidationError("raster dimensions must be positive");
    samples_.assign(std::size_t(width) * std::size_t(height) * kChannels, fill);
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
    if (width < 1 || height < 1)
        throw ValidationError("raster dimensions must be positive");
    if (samples_.size() != std::size_t(width) * std::size_t(height) * kChannels)
        throw ValidationError("sample count does not match raster dimensions");
}

bool RasterImage::contains(const Region& r) const noexcept {
    return r.w >= 1 && r.h >= 1 && r.x >= 0 && r.y >= 0 && r.x <= width_ - r.w && r.y <= height_ - r.h;
}

TissueMask::TissueMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
    if (width < 1 || height < 1 || bits_.size() != std::size_t(width) * std::size_t(height))
        throw ValidationError("tissue mask dimensions do not match its bits");
}

std::size_t TissueMask::count() const noexcept {
    return std::size_t(std::count_if(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; }));
}

ImageIoError::ImageIoError(Kind kind, const std::string& detail)
    : RuntimeFailure(std::string(kind_prefix(kind)) + (detail.empty() ? "" : ": " + detail)), kind_(kind) {}

// ---- I/O ---------------------------------------------------------------------

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::equal(bytes.begin(), bytes.begin() + 8, kPngSignature))
        return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5'))
        return decode_pnm(bytes);
    if (bytes.size() < 8)
        throw ImageIoError(ImageIoError::Kind::Unreadable, "file too short");
    throw ImageIoError(ImageIoError::Kind::UnsupportedFormat, "expected PNG or binary PPM/PGM");
}

RasterImage load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ImageIoError(ImageIoError::Kind::Unreadable, path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const ImageIoError& e) {
        throw ImageIoError(e.kind(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = png_uint_32(img.width());
    image.height = png_uint_32(img.height());
    image.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    const auto stride = png_int_32(img.width() * RasterImage::kChannels);
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.samples().data(), stride, nullptr))
        throw RuntimeFailure(std::string("PNG encode failed: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.samples().data(), stride, nullptr))
        throw RuntimeFailure(std::string("PNG encode failed: ") + image.message);
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> encode_ppm(const RasterImage& img) {
    const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.samples().begin(), img.samples().end());
    return out;
}

void save_image(const RasterImage& img, const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    std::vector<std::uint8_t> bytes;
    if (ext == ".png")
        bytes = encode_png(img);
    else if (ext == ".ppm" || ext == ".pnm")
        bytes = encode_ppm(img);
    else
        throw ImageIoError(ImageIoError::Kind::UnsupportedFormat, "cannot write '" + ext + "'");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out)
        throw RuntimeFailure("cannot write " + path.string());
}

// ---- region arithmetic ---------------------------------------------------------

RasterImage crop(const RasterImage& img, const Region& r) {
    if (!img.contains(r))
        throw ValidationError("crop region out of bounds");
    RasterImage out(r.w, r.h);
    const std::size_t row_bytes = std::size_t(r.w) * RasterImage::kChannels;
    for (int y = 0; y < r.h; ++y) {
        auto src = img.row(r.y + y).subspan(std::size_t(r.x) * RasterImage::kChannels, row_bytes);
        std::copy(src.begin(), src.end(), out.row(y).begin());
    }
    return out;
}

RasterImage paste(const RasterImage& src, RasterImage dst, const Region& at) {
    if (at.w != src.width() || at.h != src.height())
        throw ValidationError("paste region does not match source dimensions");
    if (!dst.contains(at))
        throw ValidationError("paste region out of bounds");
    for (int y = 0; y < at.h; ++y) {
        auto row = src.row(y);
        std::copy(row.begin(), row.end(), dst.row(at.y + y).begin() + std::ptrdiff_t(at.x) * RasterImage::kChannels);
    }
    return dst;
}

int reflect_index(int i, int n) {
    if (i >= 0 && i < n)
        return i;
    if (n < 2)
        throw ValidationError("cannot reflect a dimension of size 1");
    const long period = 2L * (n - 1);
    long m = i % period;
    if (m < 0)
        m += period;
    return int(m < n ? m : period - m);
}

RasterImage reflect_pad(const RasterImage& img, int left, int right, int top, int bottom) {
    if (left < 0 || right < 0 || top < 0 || bottom < 0)
        throw ValidationError("pad amounts must be non-negative");
    if (left >= img.width() || right >= img.width() || top >= img.height() || bottom >= img.height())
        throw ValidationError("pad must be smaller than the image dimension");

    RasterImage out(img.width() + left + right, img.height() + top + bottom);
    for (int y = 0; y < out.height(); ++y) {
        const int sy = reflect_index(y - top, img.height());
        for (int x = 0; x < out.width(); ++x) {
            const int sx = reflect_index(x - left, img.width());
            for (int c = 0; c < RasterImage::kChannels; ++c)
                out.at(x, y, c) = img.at(sx, sy, c);
        }
    }
    return out;
}

// ---- tissue ------------------------------------------------------------------

TissueMask compute_tissue_mask(const RasterImage& img, const TissueCriterion& criterion) {
    if (criterion.sat_min < 0.0 || criterion.sat_min > 1.0 || criterion.lum_max < 0.0 || criterion.lum_max > 1.0)
        throw ValidationError("tissue thresholds must lie in [0,1]");
    std::vector<std::uint8_t> bits(img.pixel_count());
    const auto samples = img.samples();
    for (std::size_t i = 0; i < bits.size(); ++i) {
        const int r = samples[3 * i];
        const int g = samples[3 * i + 1];
        const int b = samples[3 * i + 2];
        const int hi = std::max({r, g, b});
        const int lo = std::min({r, g, b});
        const double saturation = hi == 0 ? 0.0 : double(hi - lo) / hi;
        const double luminance = (r + g + b) / (3.0 * 255.0);
        bits[i] = saturation > criterion.sat_min && luminance < criterion.lum_max;
    }
    return TissueMask(img.width(), img.height(), std::move(bits));
}

double tissue_portion(const TissueMask& mask) {
    return double(mask.count()) / double(mask.bits().size());
}

RasterImage downsample(const RasterImage& img, int factor) {
    if (factor < 1)
        throw ValidationError("downsample factor must be >= 1");
    if (factor == 1)
        return img;
    const int out_w = (img.width() + factor - 1) / factor;
    const int out_h = (img.height() + factor - 1) / factor;
    RasterImage out(out_w, out_h);
    for (int oy = 0; oy < out_h; ++oy) {
        const int y1 = std::min(img.height(), (oy + 1) * factor);
        for (int ox = 0; ox < out_w; ++ox) {
            const int x1 = std::min(img.width(), (ox + 1) * factor);
            std::uint64_t sum[3] = {0, 0, 0};
            std::uint64_t count = 0;
            for (int y = oy * factor; y < y1; ++y)
                for (int x = ox * factor; x < x1; ++x, ++count)
                    for (int c = 0; c < 3; ++c)
                        sum[c] += img.at(x, y, c);
            for (int c = 0; c < 3; ++c)
                out.at(ox, oy, c) = std::uint8_t((2 * sum[c] + count) / (2 * count));
        }
    }
    return out;
}

} // namespace ccwsi
