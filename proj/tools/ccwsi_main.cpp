// ccwsi: tile-consistent whole-slide restaining, evaluation and the blinded
// reader-study service.
//
// Exit codes: 0 success, 2 validation error, 3 runtime failure.

#include "ccwsi/consistency.hpp"
#include "ccwsi/evaluation.hpp"
#include "ccwsi/pipeline.hpp"
#include "ccwsi/study.hpp"
#include "ccwsi/study_server.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace ccwsi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("ccwsi");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* level = std::getenv("CC_WSI_LOG"); level != nullptr && *level != '\0')
        spdlog::set_level(spdlog::level::from_str(level));
}

void emit_json(const nlohmann::json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out)
        throw RuntimeFailure("cannot write " + path);
}

study::StudyServer* g_server = nullptr;

extern "C" void handle_stop_signal(int) {
    if (g_server != nullptr)
        g_server->stop();
}

} // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Tile-consistent whole-slide virtual restaining toolkit"};
    app.require_subcommand(1);

    // restain ----------------------------------------------------------------
    PipelineConfig config;
    std::string input, output, report_path, translator = "identity", geometry = "256:192";
    std::string condition_image, condition_hist, truth;
    int timeout_ms = 60000;
    auto* restain = app.add_subcommand("restain", "tile, translate, center-crop and stitch a slide");
    restain->add_option("--input", input, "input slide (PNG or PPM)")->required();
    restain->add_option("--output", output, "output slide (.png or .ppm)")->required();
    restain->add_option("--translator", translator, "identity | chroma | external")
        ->check(CLI::IsMember({"identity", "chroma", "external"}));
    restain->add_option("--external-cmd", config.external_command, "translator process command line");
    restain->add_option("--external-timeout-ms", timeout_ms, "per-reply timeout for the external translator");
    restain->add_option("--condition-image", condition_image, "image the condition histogram is computed from");
    restain->add_option("--condition-hist", condition_hist, "precomputed histogram sidecar (wins over --condition-image)");
    restain->add_option("--bins", config.histogram.bins, "histogram bins per axis");
    restain->add_option("--epsilon", config.histogram.epsilon, "log-chroma stabilizer");
    restain->add_option("--factor", config.condition_factor, "condition image downsampling factor");
    restain->add_option("--workers", config.workers, "translation threads")->check(CLI::PositiveNumber);
    restain->add_option("--geometry", geometry, "IN:OUT tile sizes");
    restain->add_option("--report", report_path, "run report JSON (default stdout)");
    restain->add_option("--truth", truth, "ground-truth slide for PSNR/RMSE");
    restain->add_option("--seed", config.seed, "base noise seed");
    restain->add_option("--sat-min", config.tissue.sat_min, "tissue saturation threshold");
    restain->add_option("--lum-max", config.tissue.lum_max, "tissue luminance threshold");

    // eval -------------------------------------------------------------------
    EvalInputs eval_inputs;
    std::string synthetic_path, truth_path, pred_path, gt_path, eval_report;
    auto* eval = app.add_subcommand("eval", "PSNR/RMSE and detection precision/recall/F1");
    eval->add_option("--synthetic", synthetic_path, "synthetic image or directory")->required();
    eval->add_option("--truth", truth_path, "ground-truth image or directory")->required();
    eval->add_option("--pred", pred_path, "predicted detections JSON (file or directory)");
    eval->add_option("--gt", gt_path, "ground-truth detections JSON (file or directory)");
    eval->add_option("--iou", eval_inputs.match.iou_threshold, "IoU threshold");
    eval->add_option("--report", eval_report, "report JSON (default stdout)");

    // histogram --------------------------------------------------------------
    HistogramOptions hist_options;
    std::string hist_image, hist_out, hist_json;
    int hist_factor = 4;
    auto* histogram = app.add_subcommand("histogram", "condition histogram sidecar of an image");
    histogram->add_option("--image", hist_image)->required();
    histogram->add_option("--out", hist_out, "sidecar output path")->required();
    histogram->add_option("--json", hist_json, "also write the histogram as JSON");
    histogram->add_option("--bins", hist_options.bins);
    histogram->add_option("--epsilon", hist_options.epsilon);
    histogram->add_option("--factor", hist_factor, "downsampling factor applied first");

    // seam -------------------------------------------------------------------
    std::string seam_image, seam_geometry = "256:192", seam_report;
    SeamOptions seam_options;
    auto* seam = app.add_subcommand("seam", "tile-seam discontinuity of a stitched slide");
    seam->add_option("--image", seam_image)->required();
    seam->add_option("--geometry", seam_geometry, "IN:OUT tile sizes");
    seam->add_option("--offset", seam_options.baseline_offset, "baseline distance from the seam");
    seam->add_option("--report", seam_report, "report JSON (default stdout)");

    // study ------------------------------------------------------------------
    auto* study_cmd = app.add_subcommand("study", "blinded two-block reader study");
    study_cmd->require_subcommand(1);
    std::string definition_path, log_path, host = "127.0.0.1", admin_token, static_dir;
    int port = 8080;
    bool skip_path_check = false, stats_json = false;
    auto* schedule_cmd = study_cmd->add_subcommand("schedule", "print the full (unblinded) schedule");
    schedule_cmd->add_option("--definition", definition_path)->required();
    schedule_cmd->add_flag("--no-check-paths", skip_path_check, "do not require case images to exist");
    auto* stats_cmd = study_cmd->add_subcommand("stats", "rating and identification tables from a response log");
    stats_cmd->add_option("--definition", definition_path)->required();
    stats_cmd->add_option("--log", log_path)->required();
    stats_cmd->add_flag("--json", stats_json, "print JSON instead of tables");
    stats_cmd->add_flag("--no-check-paths", skip_path_check, "do not require case images to exist");
    auto* serve_cmd = study_cmd->add_subcommand("serve", "run the HTTP API");
    serve_cmd->add_option("--definition", definition_path)->required();
    serve_cmd->add_option("--log", log_path)->required();
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("--port", port);
    serve_cmd->add_option("--admin-token", admin_token)->envname("CC_WSI_ADMIN_TOKEN");
    serve_cmd->add_option("--static-dir", static_dir, "review client assets served at /");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*restain) {
            config.translator = parse_translator_kind(translator);
            config.geometry = TileGeometry::parse(geometry);
            config.external_timeout = std::chrono::milliseconds(timeout_ms);
            if (!condition_image.empty())
                config.condition_image = condition_image;
            if (!condition_hist.empty())
                config.condition_hist = condition_hist;
            if (!truth.empty())
                config.truth = truth;
            const auto report = run_restain(config, input, output);
            emit_json(report.to_json(), report_path);
            if (report.ok)
                return kExitOk;
            return report.validation_failure ? kExitValidation : kExitRuntime;
        }
        if (*eval) {
            eval_inputs.synthetic = synthetic_path;
            eval_inputs.truth = truth_path;
            if (!pred_path.empty())
                eval_inputs.detections_pred = pred_path;
            if (!gt_path.empty())
                eval_inputs.detections_gt = gt_path;
            emit_json(run_eval(eval_inputs), eval_report);
            return kExitOk;
        }
        if (*histogram) {
            std::optional<fs::path> json_out;
            if (!hist_json.empty())
                json_out = hist_json;
            const auto h = run_histogram(hist_image, hist_options, hist_factor, hist_out, json_out);
            spdlog::info("wrote {} ({} bins)", hist_out, h.bins());
            return kExitOk;
        }
        if (*seam) {
            const auto img = load_image(seam_image);
            const auto plan = plan_tiles(img.width(), img.height(), TileGeometry::parse(seam_geometry));
            emit_json(seam_report_to_json(seam_discontinuity(img, plan, seam_options)), seam_report);
            return kExitOk;
        }
        if (*schedule_cmd) {
            const auto def = study::StudyDefinition::load(definition_path, !skip_path_check);
            std::cout << study::schedule_to_json(study::generate_schedule(def)).dump(2) << '\n';
            return kExitOk;
        }
        if (*stats_cmd) {
            const auto def = study::StudyDefinition::load(definition_path, !skip_path_check);
            study::ResponseLog log(log_path);
            const auto stats = study::compute_stats(log.replay(), study::generate_schedule(def));
            if (stats_json)
                std::cout << stats.to_json().dump(2) << '\n';
            else
                std::cout << stats.render();
            return kExitOk;
        }
        if (*serve_cmd) {
            study::StudySession session(study::StudyDefinition::load(definition_path), log_path);
            study::ServerOptions options{admin_token, std::nullopt};
            if (!static_dir.empty())
                options.static_dir = static_dir;
            study::StudyServer server(session, options);
            if (!server.bind(host, port))
                throw RuntimeFailure("cannot bind " + host + ":" + std::to_string(port));
            g_server = &server;
            std::signal(SIGINT, handle_stop_signal);
            std::signal(SIGTERM, handle_stop_signal);
            spdlog::info("study service on http://{}:{} ({} items, {} reviewers)", host, port,
                         session.schedule().size(), session.definition().reviewers.size());
            server.listen_after_bind();
            g_server = nullptr;
            return kExitOk;
        }
    } catch (const ValidationError& e) {
        spdlog::error("{}", e.what());
        return kExitValidation;
    } catch (const study::StudyError& e) {
        spdlog::error("{}", e.what());
        return e.kind() == study::StudyError::Kind::Invalid ? kExitValidation : kExitRuntime;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
