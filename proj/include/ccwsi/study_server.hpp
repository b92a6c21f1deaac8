#pragma once

#include "ccwsi/study.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace ccwsi::study {

struct ServerOptions {
    std::string admin_token;
    /// Served at "/" when set (the review client's static assets).
    std::optional<std::filesystem::path> static_dir;
};

/// HTTP/JSON front end over a StudySession.
///
///   GET  /api/reviewers/{id}/next    blinded item, or {"complete": true}
///   GET  /api/items/{label}/he       PNG
///   GET  /api/items/{label}/sox10    PNG (traditional or synthetic, per schedule)
///   POST /api/responses              ReviewResponse body
///   GET  /api/progress/{id}
///   GET  /api/stats                  needs X-Admin-Token
///
/// Errors are {"code", "message"} with status 400, 403, 404 or 409.
class StudyServer {
public:
    StudyServer(StudySession& session, ServerOptions options);
    ~StudyServer();
    StudyServer(const StudyServer&) = delete;
    StudyServer& operator=(const StudyServer&) = delete;

    /// Binds an ephemeral port and returns it (or -1).
    int bind_any_port(const std::string& host = "127.0.0.1");
    bool bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen_after_bind();
    void stop();
    [[nodiscard]] bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ccwsi::study
