#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unistd.h>

namespace fixtures {

namespace fs = std::filesystem;
using namespace ccwsi::study;

RasterImage random_image(int width, int height, std::mt19937_64& rng) {
    std::vector<std::uint8_t> samples(std::size_t(width) * height * 3);
    for (auto& s : samples)
        s = std::uint8_t(rng() & 0xff);
    return RasterImage(width, height, std::move(samples));
}

RasterImage smooth_texture(int width, int height, int cell, std::array<int, 3> lo, std::array<int, 3> hi,
                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int gw = width / cell + 2;
    const int gh = height / cell + 2;
    std::vector<double> grid(std::size_t(gw) * gh * 3);
    for (int c = 0; c < 3; ++c) {
        std::uniform_real_distribution<double> dist(lo[c], hi[c]);
        for (int i = 0; i < gw * gh; ++i)
            grid[std::size_t(i) * 3 + c] = dist(rng);
    }
    RasterImage img(width, height);
    for (int y = 0; y < height; ++y) {
        const double fy = double(y) / cell;
        const int y0 = int(fy);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = double(x) / cell;
            const int x0 = int(fx);
            const double tx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                auto g = [&](int gx, int gy) { return grid[(std::size_t(gy) * gw + gx) * 3 + c]; };
                const double top = g(x0, y0) * (1 - tx) + g(x0 + 1, y0) * tx;
                const double bottom = g(x0, y0 + 1) * (1 - tx) + g(x0 + 1, y0 + 1) * tx;
                img.at(x, y, c) = std::uint8_t(std::lround(top * (1 - ty) + bottom * ty));
            }
        }
    }
    return img;
}

RasterImage smooth_tissue(int width, int height, std::uint64_t seed) {
    return smooth_texture(width, height, 48, {170, 90, 130}, {220, 150, 190}, seed);
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("ccwsi-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

StudyDefinition golden_definition(std::uint64_t seed) {
    StudyDefinition def;
    def.seed = seed;
    def.reviewers = {"pathologist-a", "pathologist-b", "pathologist-c"};
    for (int i = 0; i < 25; ++i) {
        const std::string id = "case-" + std::to_string(i + 1);
        def.cases.push_back({id, id + "-he.png", id + "-ihc.png", id + "-virtual.png"});
    }
    return def;
}

namespace {

std::vector<int> expand(std::array<int, 4> counts) {
    std::vector<int> out;
    for (int r = 0; r < 4; ++r)
        out.insert(out.end(), counts[r], r + 1);
    return out;
}

std::vector<Identification> expand_id(int said_synthetic, int said_traditional, int cannot_tell) {
    std::vector<Identification> out;
    out.insert(out.end(), said_synthetic, Identification::Synthetic);
    out.insert(out.end(), said_traditional, Identification::Traditional);
    out.insert(out.end(), cannot_tell, Identification::CannotTell);
    return out;
}

} // namespace

std::vector<ReviewResponse> golden_responses(const StudyDefinition& def, const std::vector<ReviewItem>& schedule) {
    const auto trad_eff = expand({13, 11, 29, 22});
    const auto syn_eff = expand({6, 14, 32, 23});
    const auto trad_quality = expand({2, 1, 21, 51});
    const auto syn_quality = expand({0, 0, 5, 70});
    // Rotated against the rating lists so ratings and identifications are not aligned.
    auto trad_id = expand_id(18, 4, 53);
    auto syn_id = expand_id(8, 19, 48);
    std::rotate(trad_id.begin(), trad_id.begin() + 31, trad_id.end());
    std::rotate(syn_id.begin(), syn_id.begin() + 17, syn_id.end());

    std::vector<ReviewResponse> out;
    std::size_t t = 0, s = 0;
    std::int64_t ts = 1718000000;
    for (const auto& reviewer : def.reviewers) {
        for (const auto& item : schedule) {
            ReviewResponse r;
            r.reviewer_id = reviewer;
            r.position = item.position;
            r.timestamp = ts++;
            if (item.method == Method::Traditional) {
                if (t >= trad_eff.size())
                    throw std::logic_error("schedule has more than 75 traditional reviews");
                r.effectiveness = trad_eff[t];
                r.quality = trad_quality[t];
                r.identification = trad_id[t];
                ++t;
            } else {
                if (s >= syn_eff.size())
                    throw std::logic_error("schedule has more than 75 synthetic reviews");
                r.effectiveness = syn_eff[s];
                r.quality = syn_quality[s];
                r.identification = syn_id[s];
                ++s;
            }
            out.push_back(r);
        }
    }
    return out;
}

namespace {

std::size_t best_from(std::size_t p, const std::vector<std::vector<bool>>& ok, std::vector<bool>& used) {
    if (p == ok.size())
        return 0;
    std::size_t best = best_from(p + 1, ok, used);
    for (std::size_t g = 0; g < used.size(); ++g) {
        if (used[g] || !ok[p][g])
            continue;
        used[g] = true;
        best = std::max(best, 1 + best_from(p + 1, ok, used));
        used[g] = false;
    }
    return best;
}

} // namespace

std::size_t exhaustive_max_matches(const std::vector<ccwsi::DetectionBox>& preds,
                                   const std::vector<ccwsi::DetectionBox>& gts, double threshold) {
    std::vector<std::vector<bool>> ok(preds.size(), std::vector<bool>(gts.size()));
    for (std::size_t p = 0; p < preds.size(); ++p)
        for (std::size_t g = 0; g < gts.size(); ++g)
            ok[p][g] = ccwsi::iou(preds[p], gts[g]) >= threshold;
    std::vector<bool> used(gts.size(), false);
    return best_from(0, ok, used);
}

DetectionInstance random_detection_instance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> count(0, 6);
    DetectionInstance inst;
    const int n_gt = count(rng);
    // Ground truth in distinct cells of a 3x3 grid, so the boxes never overlap.
    std::vector<int> cells = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    std::shuffle(cells.begin(), cells.end(), rng);
    for (int i = 0; i < n_gt; ++i) {
        const double w = 10 + 30 * unit(rng), h = 10 + 30 * unit(rng);
        const double x = (cells[i] % 3) * 50 + (48 - w) * unit(rng);
        const double y = (cells[i] / 3) * 50 + (48 - h) * unit(rng);
        inst.gts.push_back({x, y, w, h, 1.0});
    }
    const int n_pred = count(rng);
    for (int i = 0; i < n_pred; ++i) {
        ccwsi::DetectionBox b;
        if (!inst.gts.empty() && unit(rng) < 0.75) {
            const auto& g = inst.gts[std::size_t(rng() % inst.gts.size())];
            const double jitter = 12 * unit(rng);
            b = {g.x + jitter * (unit(rng) - 0.5), g.y + jitter * (unit(rng) - 0.5),
                 g.w * (0.6 + 0.8 * unit(rng)), g.h * (0.6 + 0.8 * unit(rng)), 0.0};
        } else {
            b = {150 * unit(rng), 150 * unit(rng), 5 + 40 * unit(rng), 5 + 40 * unit(rng), 0.0};
        }
        b.score = unit(rng);
        inst.preds.push_back(b);
    }
    return inst;
}

std::string echo_translator_path() { return CCWSI_ECHO_TRANSLATOR; }
std::string cli_path() { return CCWSI_CLI; }

} // namespace fixtures
