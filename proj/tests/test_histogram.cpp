#include <doctest.h>

#include "ccwsi/histogram.hpp"
#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

using namespace ccwsi;

namespace {

// Straightforward per-pixel accumulation, in pixel order.
std::vector<double> naive_histogram(const RasterImage& img, int bins, double eps) {
    std::vector<double> h(std::size_t(3) * bins * bins, 0.0);
    const double w = 6.0 / bins;
    auto bin = [&](double x) {
        x = std::min(3.0, std::max(-3.0, x));
        return std::min(bins - 1, int(std::floor((x + 3.0) / w)));
    };
    double total = 0.0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const double r = img.at(x, y, 0) / 255.0, g = img.at(x, y, 1) / 255.0, b = img.at(x, y, 2) / 255.0;
            const double i = std::sqrt(r * r + g * g + b * b);
            const double ch[3] = {r + eps, g + eps, b + eps};
            const int pairs[3][2] = {{1, 2}, {0, 2}, {0, 1}};
            for (int a = 0; a < 3; ++a) {
                const int u = bin(std::log(ch[a] / ch[pairs[a][0]]));
                const int v = bin(std::log(ch[a] / ch[pairs[a][1]]));
                h[std::size_t(a) * bins * bins + std::size_t(u) * bins + v] += i;
            }
            total += 3 * i;
        }
    for (auto& v : h)
        v /= total;
    return h;
}

} // namespace

TEST_CASE("a pure red pixel lands in the clamped corner bins") {
    RasterImage img(1, 1);
    img.set_pixel(0, 0, 255, 0, 0);
    const auto h = compute_histogram(img);
    CHECK(h.bins() == 64);
    CHECK(h.at(Anchor::R, 63, 63) == doctest::Approx(1.0 / 3));
    CHECK(h.at(Anchor::G, 0, 32) == doctest::Approx(1.0 / 3));
    CHECK(h.at(Anchor::B, 0, 32) == doctest::Approx(1.0 / 3));
}

TEST_CASE("histogram matches a naive per-pixel accumulation") {
    std::mt19937_64 rng(21);
    for (int bins : {8, 64}) {
        const auto img = fixtures::random_image(40, 30, rng);
        const auto h = compute_histogram(img, {bins, 1e-6, 3.0});
        const auto ref = naive_histogram(img, bins, 1e-6);
        REQUIRE(h.values().size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i)
            REQUIRE(h.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("histogram is invariant to pixel order and sums to one") {
    std::mt19937_64 rng(5);
    const auto img = fixtures::random_image(50, 20, rng);
    std::vector<std::uint8_t> shuffled(img.samples().begin(), img.samples().end());
    std::vector<std::size_t> order(img.pixel_count());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::uint8_t> permuted(shuffled.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        std::copy_n(shuffled.begin() + 3 * order[i], 3, permuted.begin() + 3 * i);
    const auto a = compute_histogram(img);
    const auto b = compute_histogram(RasterImage(50, 20, permuted));
    CHECK(a == b);
    double sum = 0.0;
    for (double v : a.values())
        sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empty sources are rejected") {
    CHECK_THROWS_AS((void)compute_histogram(RasterImage(3, 3)), ValidationError); // all black, no intensity
    const RasterImage white(3, 3, 255);
    const auto mask = compute_tissue_mask(white);
    CHECK_THROWS_WITH_AS((void)compute_histogram(white, {}, &mask), doctest::Contains("empty histogram source"),
                         ValidationError);
}

TEST_CASE("the mask restricts the histogram to tissue") {
    RasterImage img(2, 1);
    img.set_pixel(0, 0, 255, 255, 255);
    img.set_pixel(1, 0, 200, 100, 100);
    const auto mask = compute_tissue_mask(img);
    const auto h = compute_histogram(img, {}, &mask);
    RasterImage only(1, 1);
    only.set_pixel(0, 0, 200, 100, 100);
    CHECK(h == compute_histogram(only));
}

TEST_CASE("bin geometry") {
    const auto h = compute_histogram(RasterImage(1, 1, 128));
    CHECK(h.bin_width() == doctest::Approx(0.09375));
    CHECK(h.bin_center(0) == doctest::Approx(-3 + 0.046875));
    CHECK(h.bin_of(0.0) == 32);
    CHECK(h.bin_of(-0.01) == 31);
    CHECK(h.bin_of(100.0) == 63);
    CHECK(h.bin_of(-100.0) == 0);
    CHECK(h.at(Anchor::G, 32, 32) == doctest::Approx(1.0 / 3));
}

TEST_CASE("chroma stats are mass-weighted moments of bin centers") {
    std::vector<double> v(3 * 4 * 4, 0.0);
    // plane R: mass at (u=0,v=1) 0.25 and (u=3,v=1) 0.25
    v[0 * 16 + 0 * 4 + 1] = 0.25;
    v[0 * 16 + 3 * 4 + 1] = 0.25;
    v[1 * 16 + 5] = 0.5;
    const ChromaHistogram h(4, v);
    const auto s = chroma_stats(h);
    CHECK(s[0].mass == doctest::Approx(0.5));
    CHECK(s[0].mean_u == doctest::Approx((h.bin_center(0) + h.bin_center(3)) / 2));
    CHECK(s[0].mean_v == doctest::Approx(h.bin_center(1)));
    CHECK(s[0].sd_u == doctest::Approx((h.bin_center(3) - h.bin_center(0)) / 2));
    CHECK(s[0].sd_v == doctest::Approx(0.0));
    CHECK(s[2].mass == 0.0);
}

TEST_CASE("histogram construction validates its input") {
    CHECK_THROWS_AS(ChromaHistogram(4, std::vector<double>(48, 0.0)), ValidationError);
    CHECK_THROWS_AS(ChromaHistogram(4, std::vector<double>(47, 1.0 / 47)), ValidationError);
    std::vector<double> neg(48, 1.0 / 46);
    neg[0] = -1.0 / 46;
    neg[1] = 2.0 / 46 + 1.0 / 46;
    CHECK_THROWS_AS(ChromaHistogram(4, neg), ValidationError);
}

TEST_CASE("sidecar round trip") {
    std::mt19937_64 rng(17);
    const auto h = compute_histogram(fixtures::random_image(30, 30, rng));
    const auto bytes = encode_sidecar(h);
    REQUIRE(bytes.size() == 16 + 4 * 3 * 64 * 64);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CCH1");
    CHECK(bytes[4] == 64);
    for (int i = 8; i < 16; ++i)
        CHECK(bytes[i] == 0);
    const auto back = decode_sidecar(bytes);
    REQUIRE(back.bins() == 64);
    for (std::size_t i = 0; i < h.values().size(); ++i)
        REQUIRE(back.values()[i] == doctest::Approx(h.values()[i]).epsilon(1e-6));

    fixtures::TempDir dir("sidecar");
    write_sidecar(h, dir / "h.cch");
    CHECK(read_sidecar(dir / "h.cch").values().size() == h.values().size());

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS((void)decode_sidecar(bad), Error);
    auto truncated = bytes;
    truncated.resize(truncated.size() - 1);
    CHECK_THROWS_AS((void)decode_sidecar(truncated), Error);
    CHECK_THROWS_AS((void)read_sidecar(dir / "missing.cch"), Error);
}

TEST_CASE("json export") {
    const auto j = histogram_to_json(compute_histogram(RasterImage(1, 1, 100)));
    CHECK(j.at("bins") == 64);
    CHECK(j.contains("planes"));
}
