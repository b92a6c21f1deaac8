#include "ccwsi/histogram.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace ccwsi {

namespace {

constexpr std::array<std::uint8_t, 4> kSidecarMagic = {'C', 'C', 'H', '1'};
constexpr std::size_t kSidecarHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in) {
    return std::uint32_t(in[0]) | std::uint32_t(in[1]) << 8 | std::uint32_t(in[2]) << 16 |
           std::uint32_t(in[3]) << 24;
}

} // namespace

ChromaHistogram::ChromaHistogram(int bins, std::vector<double> values, double axis_limit, double epsilon)
    : bins_(bins), axis_limit_(axis_limit), epsilon_(epsilon), values_(std::move(values)) {
    if (bins_ < 2)
        throw ValidationError("histogram needs at least 2 bins per axis");
    if (!(axis_limit_ > 0.0) || !(epsilon_ > 0.0))
        throw ValidationError("histogram axis limit and epsilon must be positive");
    if (values_.size() != std::size_t(3) * bins_ * bins_)
        throw ValidationError("histogram value count must be 3*bins*bins");
    double sum = 0.0;
    for (double v : values_) {
        if (!std::isfinite(v) || v < 0.0)
            throw ValidationError("histogram values must be finite and non-negative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-4)
        throw ValidationError("histogram is not normalized");
}

int ChromaHistogram::bin_of(double coordinate) const noexcept {
    const double clamped = std::clamp(coordinate, -axis_limit_, axis_limit_);
    const int k = int(std::floor((clamped + axis_limit_) / bin_width()));
    return std::clamp(k, 0, bins_ - 1);
}

std::span<const double> ChromaHistogram::plane(Anchor anchor) const noexcept {
    return std::span(values_).subspan(plane_offset(anchor), std::size_t(bins_) * bins_);
}

std::array<int, 2> companion_channels(Anchor anchor) {
    switch (anchor) {
    case Anchor::R: return {1, 2};
    case Anchor::G: return {0, 2};
    case Anchor::B: return {0, 1};
    }
    return {1, 2};
}

std::array<double, 2> log_chroma(std::array<double, 3> rgb, Anchor anchor, double epsilon) {
    const auto [c1, c2] = companion_channels(anchor);
    const double a = rgb[static_cast<int>(anchor)] + epsilon;
    return {std::log(a / (rgb[c1] + epsilon)), std::log(a / (rgb[c2] + epsilon))};
}

ChromaHistogram compute_histogram(const RasterImage& img, const HistogramOptions& options, const TissueMask* mask) {
    if (options.bins < 2)
        throw ValidationError("histogram needs at least 2 bins per axis");
    if (!(options.epsilon > 0.0) || !(options.axis_limit > 0.0))
        throw ValidationError("histogram epsilon and axis limit must be positive");
    if (mask != nullptr && (mask->width() != img.width() || mask->height() != img.height()))
        throw ValidationError("tissue mask dimensions do not match image");

    const int bins = options.bins;
    const double width = 2.0 * options.axis_limit / bins;
    auto bin_of = [&](double x) {
        const double clamped = std::clamp(x, -options.axis_limit, options.axis_limit);
        return std::clamp(int(std::floor((clamped + options.axis_limit) / width)), 0, bins - 1);
    };

    // Each 8-bit color maps to fixed bins, so accumulate per distinct color
    // first; the order of additions then no longer depends on pixel order.
    std::vector<std::uint32_t> color_counts;
    std::vector<std::uint32_t> colors;
    {
        std::vector<std::uint32_t> keys;
        keys.reserve(img.pixel_count());
        const auto s = img.samples();
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            if (mask != nullptr && mask->bits()[i] == 0)
                continue;
            keys.push_back(std::uint32_t(s[3 * i]) << 16 | std::uint32_t(s[3 * i + 1]) << 8 | s[3 * i + 2]);
        }
        if (keys.empty())
            throw ValidationError("empty histogram source");
        std::sort(keys.begin(), keys.end());
        for (std::size_t i = 0; i < keys.size();) {
            std::size_t j = i;
            while (j < keys.size() && keys[j] == keys[i])
                ++j;
            colors.push_back(keys[i]);
            color_counts.push_back(std::uint32_t(j - i));
            i = j;
        }
    }

    std::vector<double> values(std::size_t(3) * bins * bins, 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < colors.size(); ++k) {
        const std::array<double, 3> rgb = {(colors[k] >> 16) / 255.0, ((colors[k] >> 8) & 0xff) / 255.0,
                                           (colors[k] & 0xff) / 255.0};
        const double intensity = std::sqrt(rgb[0] * rgb[0] + rgb[1] * rgb[1] + rgb[2] * rgb[2]);
        const double weight = intensity * color_counts[k];
        if (weight == 0.0)
            continue;
        for (int a = 0; a < 3; ++a) {
            const auto [u, v] = log_chroma(rgb, Anchor(a), options.epsilon);
            values[std::size_t(a) * bins * bins + std::size_t(bin_of(u)) * bins + bin_of(v)] += weight;
        }
        total += 3.0 * weight;
    }
    if (total == 0.0)
        throw ValidationError("empty histogram source: counted pixels carry no intensity");
    for (double& v : values)
        v /= total;
    return ChromaHistogram(bins, std::move(values), options.axis_limit, options.epsilon);
}

std::array<PlaneStats, 3> chroma_stats(const ChromaHistogram& h) {
    std::array<PlaneStats, 3> stats{};
    const int bins = h.bins();
    for (int a = 0; a < 3; ++a) {
        const auto plane = h.plane(Anchor(a));
        PlaneStats& s = stats[a];
        double su = 0.0, sv = 0.0;
        for (int i = 0; i < bins; ++i)
            for (int j = 0; j < bins; ++j) {
                const double m = plane[std::size_t(i) * bins + j];
                s.mass += m;
                su += m * h.bin_center(i);
                sv += m * h.bin_center(j);
            }
        if (s.mass <= 0.0)
            continue;
        s.mean_u = su / s.mass;
        s.mean_v = sv / s.mass;
        double vu = 0.0, vv = 0.0;
        for (int i = 0; i < bins; ++i)
            for (int j = 0; j < bins; ++j) {
                const double m = plane[std::size_t(i) * bins + j];
                vu += m * (h.bin_center(i) - s.mean_u) * (h.bin_center(i) - s.mean_u);
                vv += m * (h.bin_center(j) - s.mean_v) * (h.bin_center(j) - s.mean_v);
            }
        s.sd_u = std::sqrt(vu / s.mass);
        s.sd_v = std::sqrt(vv / s.mass);
    }
    return stats;
}

std::vector<std::uint8_t> encode_sidecar(const ChromaHistogram& h) {
    if (h.axis_limit() != HistogramOptions{}.axis_limit)
        throw ValidationError("sidecar format only carries the default axis range");
    std::vector<std::uint8_t> out(kSidecarMagic.begin(), kSidecarMagic.end());
    put_u32(out, std::uint32_t(h.bins()));
    out.resize(kSidecarHeader, 0);
    out.reserve(kSidecarHeader + 4 * h.values().size());
    for (double v : h.values())
        put_u32(out, std::bit_cast<std::uint32_t>(float(v)));
    return out;
}

ChromaHistogram decode_sidecar(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kSidecarHeader || !std::equal(kSidecarMagic.begin(), kSidecarMagic.end(), bytes.begin()))
        throw RuntimeFailure("histogram sidecar: bad magic");
    const auto bins = get_u32(bytes.subspan(4));
    if (bins < 2 || bins > 4096)
        throw RuntimeFailure("histogram sidecar: implausible bin count");
    if (std::any_of(bytes.begin() + 8, bytes.begin() + kSidecarHeader, [](std::uint8_t b) { return b != 0; }))
        throw RuntimeFailure("histogram sidecar: reserved bytes must be zero");
    const std::size_t count = std::size_t(3) * bins * bins;
    if (bytes.size() != kSidecarHeader + 4 * count)
        throw RuntimeFailure("histogram sidecar: length does not match bin count");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i)
        values[i] = std::bit_cast<float>(get_u32(bytes.subspan(kSidecarHeader + 4 * i)));
    try {
        return ChromaHistogram(int(bins), std::move(values));
    } catch (const ValidationError& e) {
        throw RuntimeFailure(std::string("histogram sidecar: ") + e.what());
    }
}

void write_sidecar(const ChromaHistogram& h, const std::filesystem::path& path) {
    const auto bytes = encode_sidecar(h);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out)
        throw RuntimeFailure("cannot write " + path.string());
}

ChromaHistogram read_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw RuntimeFailure("cannot read histogram sidecar " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_sidecar(bytes);
}

nlohmann::json histogram_to_json(const ChromaHistogram& h) {
    return {{"bins", h.bins()},
            {"axis_limit", h.axis_limit()},
            {"epsilon", h.epsilon()},
            {"planes", {"R", "G", "B"}},
            {"values", std::vector<double>(h.values().begin(), h.values().end())}};
}

} // namespace ccwsi
