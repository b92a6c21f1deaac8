#include "ccwsi/study_server.hpp"

#include "ccwsi/image.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <map>
#include <mutex>

namespace ccwsi::study {

namespace {

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"code", code}, {"message", message}}.dump(), "application/json");
}

int status_for(StudyError::Kind kind) {
    switch (kind) {
    case StudyError::Kind::Invalid: return 400;
    case StudyError::Kind::NotFound: return 404;
    case StudyError::Kind::Duplicate: return 409;
    case StudyError::Kind::Orphan: return 400;
    }
    return 400;
}

void send_json(httplib::Response& res, const nlohmann::json& body) {
    res.status = 200;
    res.set_content(body.dump(), "application/json");
}

std::int64_t now_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace

struct StudyServer::Impl {
    StudySession& session;
    ServerOptions options;
    httplib::Server server;
    std::mutex png_mutex;
    std::map<std::filesystem::path, std::string> png_cache;

    Impl(StudySession& s, ServerOptions o) : session(s), options(std::move(o)) { install_routes(); }

    const std::string& png_for(const std::filesystem::path& path) {
        std::lock_guard lock(png_mutex);
        auto it = png_cache.find(path);
        if (it == png_cache.end()) {
            const auto bytes = encode_png(load_image(path));
            it = png_cache.emplace(path, std::string(bytes.begin(), bytes.end())).first;
        }
        return it->second;
    }

    template <typename Handler>
    auto guarded(Handler handler) {
        return [this, handler](const httplib::Request& req, httplib::Response& res) {
            try {
                handler(req, res);
            } catch (const StudyError& e) {
                send_error(res, status_for(e.kind()), e.code(), e.what());
            } catch (const nlohmann::json::exception& e) {
                send_error(res, 400, "invalid_request", std::string("malformed JSON: ") + e.what());
            } catch (const std::exception& e) {
                spdlog::error("{} {}: {}", req.method, req.path, e.what());
                send_error(res, 500, "internal_error", e.what());
            }
        };
    }

    void install_routes() {
        server.Get(R"(/api/reviewers/([^/]+)/next)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto item = session.next_item(req.matches[1]);
                       if (!item) {
                           send_json(res, {{"complete", true}, {"total", session.schedule().size()}});
                           return;
                       }
                       auto body = blinded_item_json(*item, session.schedule().size());
                       body["complete"] = false;
                       send_json(res, body);
                   }));

        server.Get(R"(/api/items/([0-9a-f]+)/(he|sox10))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto* item = session.find_label(req.matches[1]);
                       if (item == nullptr)
                           throw StudyError(StudyError::Kind::NotFound, "unknown item");
                       const auto& c = session.case_for(*item);
                       const auto& path = req.matches[2] == "he" ? c.he_image
                                          : item->method == Method::Synthetic ? c.synthetic_sox10
                                                                              : c.traditional_sox10;
                       res.status = 200;
                       res.set_content(png_for(path), "image/png");
                   }));

        server.Post("/api/responses", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto response = response_from_json(nlohmann::json::parse(req.body), now_seconds());
                        session.record_response(response);
                        send_json(res, {{"ok", true}, {"position", response.position}});
                    }));

        server.Get(R"(/api/progress/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string reviewer = req.matches[1];
                       const auto p = session.progress(reviewer);
                       send_json(res, {{"reviewer_id", reviewer},
                                       {"answered", p.answered},
                                       {"total", p.total},
                                       {"complete", p.complete()}});
                   }));

        server.Get("/api/stats", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       if (options.admin_token.empty() || req.get_header_value("X-Admin-Token") != options.admin_token) {
                           send_error(res, 403, "forbidden", "admin token required");
                           return;
                       }
                       send_json(res, session.stats().to_json());
                   }));

        if (options.static_dir && !server.set_mount_point("/", options.static_dir->string()))
            throw ValidationError("static directory does not exist: " + options.static_dir->string());
    }
};

StudyServer::StudyServer(StudySession& session, ServerOptions options)
    : impl_(std::make_unique<Impl>(session, std::move(options))) {}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool StudyServer::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

bool StudyServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void StudyServer::stop() {
    if (impl_)
        impl_->server.stop();
}

bool StudyServer::running() const { return impl_->server.is_running(); }

} // namespace ccwsi::study
