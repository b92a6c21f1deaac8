#include <doctest.h>

#include "ccwsi/study_server.hpp"
#include "fixtures.hpp"

#include <httplib.h>

#include <fstream>
#include <thread>

using namespace ccwsi;
using namespace ccwsi::study;

namespace {

struct RunningServer {
    fixtures::TempDir dir{"server"};
    std::unique_ptr<StudySession> session;
    std::unique_ptr<StudyServer> server;
    std::thread thread;
    int port = -1;

    explicit RunningServer(int cases = 4) {
        StudyDefinition def;
        def.seed = 11;
        def.reviewers = {"alice", "bob"};
        for (int i = 0; i < cases; ++i) {
            const std::string id = "c" + std::to_string(i);
            // distinct solid colors tell the served images apart
            save_image(RasterImage(4, 4, std::uint8_t(10 + i)), dir / (id + "-he.png"));
            save_image(RasterImage(4, 4, std::uint8_t(100 + i)), dir / (id + "-trad.png"));
            save_image(RasterImage(4, 4, std::uint8_t(200 + i)), dir / (id + "-syn.png"));
            def.cases.push_back({id, dir / (id + "-he.png"), dir / (id + "-trad.png"), dir / (id + "-syn.png")});
        }
        std::filesystem::create_directories(dir / "static");
        std::ofstream(dir / "static/index.html") << "<!doctype html><title>review</title>";
        session = std::make_unique<StudySession>(def, dir / "log.ndjson");
        server = std::make_unique<StudyServer>(*session, ServerOptions{"s3cret", dir / "static"});
        port = server->bind_any_port();
        REQUIRE(port > 0);
        thread = std::thread([this] { server->listen_after_bind(); });
        for (int i = 0; i < 200 && !server->running(); ++i)
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }

    ~RunningServer() {
        server->stop();
        thread.join();
    }

    httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

nlohmann::json body_of(const httplib::Result& r) { return nlohmann::json::parse(r->body); }

std::string response_body(const std::string& reviewer, int position, int eff = 3, int quality = 4,
                          const char* id = "cannot_tell") {
    return nlohmann::json{{"reviewer_id", reviewer},
                          {"position", position},
                          {"effectiveness", eff},
                          {"quality", quality},
                          {"identification", id}}
        .dump();
}

} // namespace

TEST_CASE("a reviewer walks through the whole study over http") {
    RunningServer rs;
    auto cli = rs.client();
    const auto total = rs.session->schedule().size();
    for (std::size_t i = 0; i < total; ++i) {
        auto next = cli.Get("/api/reviewers/alice/next");
        REQUIRE(next);
        REQUIRE(next->status == 200);
        const auto item = body_of(next);
        CHECK(item.at("complete") == false);
        CHECK(item.at("position") == int(i));
        CHECK_FALSE(item.contains("method"));
        CHECK(next->body.find("synthetic") == std::string::npos);
        CHECK(next->body.find("traditional") == std::string::npos);

        const auto& scheduled = rs.session->schedule()[i];
        auto sox = cli.Get(item.at("sox10_url").get<std::string>());
        REQUIRE(sox);
        CHECK(sox->status == 200);
        CHECK(sox->get_header_value("Content-Type") == "image/png");
        const auto img =
            decode_image(std::span(reinterpret_cast<const std::uint8_t*>(sox->body.data()), sox->body.size()));
        const int case_index = std::stoi(scheduled.case_id.substr(1));
        CHECK(img.at(0, 0, 0) == (scheduled.method == Method::Synthetic ? 200 : 100) + case_index);
        auto he = cli.Get(item.at("he_url").get<std::string>());
        REQUIRE(he);
        CHECK(he->status == 200);

        auto post = cli.Post("/api/responses", response_body("alice", int(i)), "application/json");
        REQUIRE(post);
        CHECK(post->status == 200);
    }
    auto done = cli.Get("/api/reviewers/alice/next");
    CHECK(body_of(done).at("complete") == true);
    auto progress = cli.Get("/api/progress/alice");
    CHECK(body_of(progress).at("answered") == int(total));
    CHECK(body_of(progress).at("complete") == true);
    CHECK(ResponseLog(rs.dir / "log.ndjson").replay().size() == total);
}

TEST_CASE("http error statuses") {
    RunningServer rs;
    auto cli = rs.client();
    REQUIRE(cli.Post("/api/responses", response_body("bob", 0), "application/json")->status == 200);

    auto dup = cli.Post("/api/responses", response_body("bob", 0), "application/json");
    CHECK(dup->status == 409);
    CHECK(body_of(dup).at("code") == "duplicate_response");
    CHECK(body_of(dup).contains("message"));

    CHECK(cli.Post("/api/responses", response_body("bob", 1, 5), "application/json")->status == 400);
    CHECK(cli.Post("/api/responses", "{not json", "application/json")->status == 400);
    CHECK(cli.Post("/api/responses", R"({"reviewer_id":"bob"})", "application/json")->status == 400);
    CHECK(cli.Post("/api/responses", response_body("bob", 99), "application/json")->status == 404);
    CHECK(cli.Post("/api/responses", response_body("mallory", 1), "application/json")->status == 404);
    CHECK(cli.Get("/api/reviewers/mallory/next")->status == 404);
    CHECK(cli.Get("/api/progress/mallory")->status == 404);
    CHECK(cli.Get("/api/items/00000000deadbeef/he")->status == 404);
}

TEST_CASE("stats need the admin token") {
    RunningServer rs;
    auto cli = rs.client();
    REQUIRE(cli.Post("/api/responses", response_body("bob", 0, 2, 3, "synthetic"), "application/json")->status == 200);
    CHECK(cli.Get("/api/stats")->status == 403);
    CHECK(cli.Get("/api/stats", {{"X-Admin-Token", "wrong"}})->status == 403);
    auto ok = cli.Get("/api/stats", {{"X-Admin-Token", "s3cret"}});
    REQUIRE(ok->status == 200);
    CHECK(body_of(ok).at("total_reviews") == 1);
}

TEST_CASE("static client assets") {
    RunningServer rs;
    auto cli = rs.client();
    auto page = cli.Get("/index.html");
    REQUIRE(page);
    CHECK(page->status == 200);
    CHECK(page->body.find("review") != std::string::npos);
}
