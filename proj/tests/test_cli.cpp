#include <doctest.h>

#include "ccwsi/histogram.hpp"
#include "ccwsi/study.hpp"
#include "fixtures.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

using namespace ccwsi;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = fixtures::cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

} // namespace

TEST_CASE("restain exit codes and report") {
    fixtures::TempDir dir("cli");
    const auto slide = fixtures::smooth_tissue(300, 200, 5);
    save_image(slide, dir / "in.png");
    const auto d = dir.path().string();

    CHECK(run("restain --input " + d + "/in.png --output " + d + "/out.png --report " + d + "/r.json") == 0);
    CHECK(load_image(dir / "out.png") == slide);
    CHECK(read_json(dir / "r.json").at("status") == "ok");

    CHECK(run("restain --input " + d + "/in.png --output " + d + "/chroma.ppm --translator chroma --workers 3 --report " +
              d + "/c.json") == 0);
    CHECK(read_json(dir / "c.json").at("translator") == "chroma");

    CHECK(run("restain --input " + d + "/in.png --output " + d + "/x.png --translator external --external-cmd '" +
              fixtures::echo_translator_path() + "' --report " + d + "/e.json") == 0);
    CHECK(load_image(dir / "x.png") == slide);

    // validation errors
    CHECK(run("restain --input " + d + "/in.png") == 2);
    CHECK(run("restain --input " + d + "/in.png --output " + d + "/o.png --translator magic") == 2);
    CHECK(run("restain --input " + d + "/in.png --output " + d + "/o.png --geometry 256:100:3 --report " + d +
              "/v.json") == 2);
    CHECK(run("restain --input " + d + "/in.png --output " + d + "/o.png --translator external --report " + d +
              "/v.json") == 2);
    CHECK(read_json(dir / "v.json").at("status") == "failed");
    CHECK_FALSE(fs::exists(dir / "o.png"));

    // runtime failures
    CHECK(run("restain --input " + d + "/nope.png --output " + d + "/o.png --report " + d + "/f.json") == 3);
    CHECK(run("restain --input " + d + "/in.png --output " + d + "/o.png --translator external --external-cmd '" +
              fixtures::echo_translator_path() + " --mode wrong-id' --report " + d + "/f.json") == 3);
    CHECK(read_json(dir / "f.json").at("error").get<std::string>().find("tile_id mismatch") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "o.png"));
}

TEST_CASE("histogram, seam and eval subcommands") {
    fixtures::TempDir dir("cli-tools");
    const auto d = dir.path().string();
    const auto img = fixtures::smooth_tissue(400, 250, 8);
    save_image(img, dir / "a.png");
    save_image(RasterImage(400, 250, 0), dir / "b.png");

    CHECK(run("histogram --image " + d + "/a.png --out " + d + "/a.cch --json " + d + "/a.json --factor 2") == 0);
    CHECK(read_sidecar(dir / "a.cch").bins() == 64);
    CHECK(run("histogram --image " + d + "/a.png --out " + d + "/a.cch --bins 1") == 2);

    CHECK(run("restain --input " + d + "/a.png --output " + d + "/o.png --translator chroma --condition-hist " + d +
              "/a.cch") == 0);

    CHECK(run("seam --image " + d + "/a.png --report " + d + "/s.json") == 0);
    CHECK(read_json(dir / "s.json").at("vertical_seams").size() == 2);

    CHECK(run("eval --synthetic " + d + "/a.png --truth " + d + "/a.png --report " + d + "/e.json") == 0);
    CHECK(read_json(dir / "e.json").at("psnr").at("infinite") == true);
    CHECK(run("eval --synthetic " + d + "/a.png --truth " + d + "/small.png") == 3);
    save_image(RasterImage(10, 10), dir / "small.png");
    CHECK(run("eval --synthetic " + d + "/a.png --truth " + d + "/small.png") == 2);
    CHECK(run("frobnicate") == 2);
}

TEST_CASE("study subcommands") {
    fixtures::TempDir dir("cli-study");
    const auto d = dir.path().string();
    const auto def = fixtures::golden_definition();
    std::ofstream(dir / "study.json") << def.to_json().dump();
    study::ResponseLog log(dir / "log.ndjson");
    for (const auto& r : fixtures::golden_responses(def, study::generate_schedule(def)))
        log.append(r);

    CHECK(run("study schedule --definition " + d + "/study.json --no-check-paths") == 0);
    CHECK(run("study schedule --definition " + d + "/study.json") == 2); // images missing
    CHECK(run("study stats --definition " + d + "/study.json --log " + d + "/log.ndjson --no-check-paths") == 0);
    const std::string cmd = fixtures::cli_path() + " study stats --json --no-check-paths --definition " + d +
                            "/study.json --log " + d + "/log.ndjson > " + d + "/stats.json 2>/dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    const auto stats = read_json(dir / "stats.json");
    CHECK(stats.at("identification").at("cannot_tell").at("percent") == 67);
    CHECK(stats.at("synthetic").at("quality").at("mean_display") == "3.9");
}
