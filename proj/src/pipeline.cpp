#include "ccwsi/pipeline.hpp"

#include "ccwsi/random.hpp"
#include "ccwsi/worker_pool.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <set>

namespace ccwsi {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double millis_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return ext == ".png" || ext == ".ppm" || ext == ".pnm" || ext == ".pgm";
}

fs::path temp_sibling(const fs::path& output) {
    auto name = output.stem().string() + fmt::format(".tmp-{}", ::getpid()) + output.extension().string();
    return output.parent_path() / name;
}

void write_atomically(const RasterImage& img, const fs::path& output) {
    const auto tmp = temp_sibling(output);
    try {
        save_image(img, tmp);
        fs::rename(tmp, output);
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
}

struct TileSlot {
    std::optional<RasterImage> core;
    double millis = 0.0;
};

nlohmann::json eval_pair(const fs::path& synthetic, const fs::path& truth) {
    const auto a = load_image(synthetic);
    const auto b = load_image(truth);
    const double error = rmse(a, b);
    auto peak = psnr_to_json(psnr(a, b));
    return {{"rmse", error}, {"psnr", std::move(peak)}};
}

} // namespace

TranslatorKind parse_translator_kind(std::string_view name) {
    if (name == "identity")
        return TranslatorKind::Identity;
    if (name == "chroma" || name == "chroma_match")
        return TranslatorKind::ChromaMatch;
    if (name == "external")
        return TranslatorKind::External;
    throw ValidationError("unknown translator '" + std::string(name) + "'");
}

std::string_view translator_name(TranslatorKind kind) {
    switch (kind) {
    case TranslatorKind::Identity: return "identity";
    case TranslatorKind::ChromaMatch: return "chroma";
    case TranslatorKind::External: return "external";
    }
    return "unknown";
}

void PipelineConfig::validate() const {
    geometry.validate();
    if (workers < 1)
        throw ValidationError("worker count must be >= 1");
    if (condition_factor < 1)
        throw ValidationError("condition factor must be >= 1");
    if (histogram.bins < 2 || !(histogram.epsilon > 0.0))
        throw ValidationError("histogram bins must be >= 2 and epsilon > 0");
    if (translator == TranslatorKind::External && external_command.empty())
        throw ValidationError("external translator needs --external-cmd");
    if (tissue.sat_min < 0.0 || tissue.sat_min > 1.0 || tissue.lum_max < 0.0 || tissue.lum_max > 1.0)
        throw ValidationError("tissue thresholds must lie in [0,1]");
}

TileFailure::TileFailure(int r, int c, const std::string& what)
    : RuntimeFailure(fmt::format("tile ({},{}): {}", r, c, what)), row(r), col(c) {}

std::shared_ptr<const ChromaHistogram> resolve_condition(const PipelineConfig& config, const RasterImage& slide,
                                                         ConditionInfo* info) {
    ConditionInfo local;
    std::shared_ptr<const ChromaHistogram> hist;
    if (config.condition_hist) {
        if (config.condition_image)
            spdlog::warn("both a condition sidecar and a condition image were given; using the sidecar");
        local = {"sidecar", config.condition_hist, 1};
        hist = std::make_shared<ChromaHistogram>(read_sidecar(*config.condition_hist));
    } else if (config.condition_image) {
        local = {"image", config.condition_image, config.condition_factor};
        const auto img = downsample(load_image(*config.condition_image), config.condition_factor);
        hist = std::make_shared<ChromaHistogram>(compute_histogram(img, config.histogram));
    } else {
        local = {"input", std::nullopt, config.condition_factor};
        hist = std::make_shared<ChromaHistogram>(
            compute_histogram(downsample(slide, config.condition_factor), config.histogram));
    }
    if (info != nullptr)
        *info = local;
    return hist;
}

std::unique_ptr<Translator> make_translator(const PipelineConfig& config) {
    switch (config.translator) {
    case TranslatorKind::Identity: return std::make_unique<IdentityTranslator>();
    case TranslatorKind::ChromaMatch: return std::make_unique<ChromaMatchTranslator>(ChromaMatchOptions{config.tissue});
    case TranslatorKind::External:
        return std::make_unique<ExternalTranslator>(ExternalTranslatorOptions{
            config.external_command, config.external_timeout, std::max<std::size_t>(2, 2 * config.workers)});
    }
    throw ValidationError("unknown translator");
}

RasterImage restain_slide(const RasterImage& slide, const PipelineConfig& config, Translator& translator,
                          std::shared_ptr<const ChromaHistogram> condition, std::vector<TileTiming>* timings) {
    config.validate();
    const auto plan = plan_tiles(slide.width(), slide.height(), config.geometry);
    const int ctx = config.geometry.context();
    if (slide.width() <= ctx || slide.height() <= ctx)
        throw ValidationError(fmt::format("slide {}x{} is too small: each dimension must exceed the {} px context ring",
                                          slide.width(), slide.height(), ctx));

    std::vector<TileSlot> slots(plan.tile_count());
    auto make_request = [&](std::uint32_t id) {
        const int row = int(id) / plan.cols;
        const int col = int(id) % plan.cols;
        return TranslationRequest{id, extract_tile(slide, plan, row, col), condition,
                                  mix64(config.seed ^ (std::uint64_t(id) << 32 | id))};
    };
    auto accept = [&](TranslationResult result, double millis) {
        const int row = int(result.tile_id) / plan.cols;
        const int col = int(result.tile_id) % plan.cols;
        if (result.tile_id >= slots.size() || slots[result.tile_id].core)
            throw TileFailure(row, col, "translator returned an unexpected tile_id");
        try {
            slots[result.tile_id].core = center_crop(result.tile, config.geometry);
        } catch (const Error& e) {
            throw TileFailure(row, col, e.what());
        }
        slots[result.tile_id].millis = millis;
        spdlog::debug("tile ({},{}) done in {:.1f} ms", row, col, millis);
    };
    auto record_timings = [&] {
        if (timings == nullptr)
            return;
        for (std::size_t id = 0; id < slots.size(); ++id)
            if (slots[id].core)
                timings->push_back({int(id) / plan.cols, int(id) % plan.cols, slots[id].millis});
    };

    try {
        if (translator.thread_safe()) {
            WorkerPool pool(config.workers);
            std::vector<std::future<std::pair<TranslationResult, double>>> futures;
            futures.reserve(plan.tile_count());
            for (std::uint32_t id = 0; id < plan.tile_count(); ++id)
                futures.push_back(pool.submit([&, id] {
                    const auto start = Clock::now();
                    try {
                        auto result = translator.translate(make_request(id));
                        return std::pair{std::move(result), millis_since(start)};
                    } catch (const TileFailure&) {
                        throw;
                    } catch (const std::exception& e) {
                        throw TileFailure(int(id) / plan.cols, int(id) % plan.cols, e.what());
                    }
                }));
            std::exception_ptr first_error;
            for (auto& f : futures) {
                try {
                    auto [result, millis] = f.get();
                    accept(std::move(result), millis);
                } catch (...) {
                    if (!first_error)
                        first_error = std::current_exception();
                }
            }
            if (first_error)
                std::rethrow_exception(first_error);
        } else {
            // Pipelined through one translator; bounded chunks keep memory flat.
            const std::size_t chunk = 64;
            for (std::uint32_t begin = 0; begin < plan.tile_count(); begin += chunk) {
                const auto end = std::uint32_t(std::min<std::size_t>(plan.tile_count(), begin + chunk));
                std::vector<TranslationRequest> requests;
                for (std::uint32_t id = begin; id < end; ++id)
                    requests.push_back(make_request(id));
                auto start = Clock::now();
                try {
                    translator.translate_batch(requests, [&](TranslationResult r) {
                        accept(std::move(r), millis_since(start));
                        start = Clock::now();
                    });
                } catch (const TileFailure&) {
                    throw;
                } catch (const std::exception& e) {
                    std::uint32_t pending = begin;
                    while (pending < end && slots[pending].core)
                        ++pending;
                    throw TileFailure(int(pending) / plan.cols, int(pending) % plan.cols, e.what());
                }
            }
        }
    } catch (...) {
        record_timings();
        throw;
    }
    record_timings();

    std::vector<TileCore> cores;
    cores.reserve(slots.size());
    for (std::size_t id = 0; id < slots.size(); ++id)
        cores.push_back({int(id) / plan.cols, int(id) % plan.cols, std::move(*slots[id].core)});
    return stitch(cores, plan);
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json j;
    j["report_version"] = 1;
    j["status"] = ok ? "ok" : "failed";
    if (!ok)
        j["error"] = error;
    j["input"] = input.string();
    j["output"] = output.string();
    j["translator"] = std::string(translator_name(translator));
    j["geometry"] = fmt::format("{}:{}", geometry.input_size, geometry.output_size);
    j["workers"] = workers;
    j["slide"] = {{"width", slide_width}, {"height", slide_height}};
    if (plan) {
        j["plan"] = {{"rows", plan->rows},
                     {"cols", plan->cols},
                     {"padded_width", plan->padded_width},
                     {"padded_height", plan->padded_height}};
        j["tile_count"] = plan->tile_count();
    }
    nlohmann::json cond = {{"source", condition.source}, {"factor", condition.factor}};
    if (condition.path)
        cond["path"] = condition.path->string();
    j["condition"] = cond;
    j["completed_tiles"] = tiles.size();
    auto tile_list = nlohmann::json::array();
    for (const auto& t : tiles)
        tile_list.push_back({{"row", t.row}, {"col", t.col}, {"ms", t.millis}});
    j["tiles"] = tile_list;
    if (seams)
        j["seam_report"] = seam_report_to_json(*seams);
    if (rmse && psnr)
        j["quality"] = {{"rmse", *rmse}, {"psnr", psnr_to_json(*psnr)}};
    j["elapsed_ms"] = elapsed_ms;
    return j;
}

RunReport run_restain(const PipelineConfig& config, const fs::path& input, const fs::path& output) {
    const auto start = Clock::now();
    RunReport report;
    report.input = input;
    report.output = output;
    report.translator = config.translator;
    report.geometry = config.geometry;
    report.workers = config.workers;
    try {
        config.validate();
        const auto slide = load_image(input);
        report.slide_width = slide.width();
        report.slide_height = slide.height();
        report.plan = plan_tiles(slide.width(), slide.height(), config.geometry);
        spdlog::info("restain {} ({}x{}, {} tiles) with {} translator, {} workers", input.string(), slide.width(),
                     slide.height(), report.plan->tile_count(), translator_name(config.translator), config.workers);

        const auto condition = resolve_condition(config, slide, &report.condition);
        auto translator = make_translator(config);
        const auto stitched = restain_slide(slide, config, *translator, condition, &report.tiles);

        report.seams = seam_discontinuity(stitched, *report.plan, config.seam);
        if (config.truth) {
            const auto truth = load_image(*config.truth);
            report.rmse = rmse(stitched, truth);
            report.psnr = psnr(stitched, truth);
        }
        write_atomically(stitched, output);
        report.ok = true;
    } catch (const TileFailure& e) {
        report.error = e.what();
        spdlog::error("restain failed: {}", e.what());
    } catch (const ValidationError& e) {
        report.validation_failure = true;
        report.error = e.what();
        spdlog::error("restain rejected: {}", e.what());
    } catch (const std::exception& e) {
        report.error = e.what();
        spdlog::error("restain failed: {}", e.what());
    }
    report.elapsed_ms = millis_since(start);
    return report;
}

nlohmann::json run_eval(const EvalInputs& inputs) {
    nlohmann::json report;
    report["report_version"] = 1;

    if (fs::is_directory(inputs.synthetic)) {
        if (!fs::is_directory(inputs.truth))
            throw ValidationError("--synthetic is a directory but --truth is not");
        std::set<fs::path> names;
        for (const auto& entry : fs::directory_iterator(inputs.synthetic))
            if (entry.is_regular_file() && is_image_file(entry.path()))
                names.insert(entry.path().filename());
        auto patches = nlohmann::json::array();
        double rmse_sum = 0.0, psnr_sum = 0.0;
        std::size_t finite = 0, infinite = 0;
        for (const auto& name : names) {
            const auto truth = inputs.truth / name;
            if (!fs::exists(truth))
                throw ValidationError("no ground truth for " + name.string());
            auto entry = eval_pair(inputs.synthetic / name, truth);
            entry["name"] = name.string();
            rmse_sum += entry["rmse"].get<double>();
            if (entry["psnr"]["infinite"].get<bool>()) {
                ++infinite;
            } else {
                psnr_sum += entry["psnr"]["db"].get<double>();
                ++finite;
            }
            patches.push_back(std::move(entry));
        }
        if (names.empty())
            throw ValidationError("no images found in " + inputs.synthetic.string());
        report["patches"] = patches;
        report["mean"] = {{"rmse", rmse_sum / double(names.size())},
                          {"psnr_db", finite > 0 ? nlohmann::json(psnr_sum / double(finite)) : nlohmann::json(nullptr)},
                          {"psnr_finite_count", finite},
                          {"psnr_infinite_count", infinite}};
    } else {
        auto pair = eval_pair(inputs.synthetic, inputs.truth);
        report["rmse"] = pair["rmse"];
        report["psnr"] = pair["psnr"];
    }

    if (inputs.detections_pred.has_value() != inputs.detections_gt.has_value())
        throw ValidationError("detection evaluation needs both predicted and ground-truth files");
    if (inputs.detections_pred) {
        const auto& pred = *inputs.detections_pred;
        const auto& gt = *inputs.detections_gt;
        if (fs::is_directory(pred)) {
            std::set<fs::path> names;
            for (const auto& entry : fs::directory_iterator(gt))
                if (entry.is_regular_file() && entry.path().extension() == ".json")
                    names.insert(entry.path().filename());
            auto per_patch = nlohmann::json::array();
            double p = 0.0, r = 0.0, f = 0.0;
            for (const auto& name : names) {
                const auto preds = fs::exists(pred / name) ? load_detections(pred / name) : std::vector<DetectionBox>{};
                const auto m = match_and_score(preds, load_detections(gt / name), inputs.match);
                auto entry = metrics_to_json(m);
                entry["name"] = name.string();
                per_patch.push_back(entry);
                p += m.precision;
                r += m.recall;
                f += m.f1;
            }
            const double n = names.empty() ? 1.0 : double(names.size());
            report["detection"] = {{"patches", per_patch},
                                   {"mean", {{"precision", p / n}, {"recall", r / n}, {"f1", f / n}}},
                                   {"iou_threshold", inputs.match.iou_threshold}};
        } else {
            auto m = metrics_to_json(match_and_score(load_detections(pred), load_detections(gt), inputs.match));
            m["iou_threshold"] = inputs.match.iou_threshold;
            report["detection"] = m;
        }
    }
    return report;
}

ChromaHistogram run_histogram(const fs::path& image, const HistogramOptions& options, int factor, const fs::path& out,
                              const std::optional<fs::path>& json_out) {
    auto hist = compute_histogram(downsample(load_image(image), factor), options);
    write_sidecar(hist, out);
    if (json_out) {
        std::ofstream js(*json_out);
        js << histogram_to_json(hist).dump(2) << '\n';
        if (!js)
            throw RuntimeFailure("cannot write " + json_out->string());
    }
    return hist;
}

} // namespace ccwsi
