#include "ccwsi/translators.hpp"
#include "ccwsi/wire.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>

extern char** environ;

namespace ccwsi {

using wire::ProtocolError;
using Clock = std::chrono::steady_clock;

namespace {

void ignore_sigpipe_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void set_nonblocking(int fd) {
    const int flags = ::fcntl(fd, F_GETFL);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

wire::RequestFrame to_frame(const TranslationRequest& request) {
    if (request.tile.width() > 0xffff || request.tile.height() > 0xffff)
        throw ValidationError("tile too large for the wire protocol");
    wire::RequestFrame frame;
    frame.type = wire::MessageType::Request;
    frame.tile_id = request.tile_id;
    frame.width = std::uint16_t(request.tile.width());
    frame.height = std::uint16_t(request.tile.height());
    if (request.condition) {
        wire::HistogramPayload hist;
        hist.bins = std::uint16_t(request.condition->bins());
        hist.values.reserve(request.condition->values().size());
        for (double v : request.condition->values())
            hist.values.push_back(float(v));
        frame.histogram = std::move(hist);
    }
    frame.pixels.assign(request.tile.samples().begin(), request.tile.samples().end());
    return frame;
}

} // namespace

struct ExternalTranslator::Impl {
    ExternalTranslatorOptions options;
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;
    wire::ResponseDecoder decoder;
    std::optional<ProtocolError> failure;

    explicit Impl(ExternalTranslatorOptions opts) : options(std::move(opts)) {
        ignore_sigpipe_once();
        if (options.command.empty())
            throw ValidationError("external translator command is empty");
        if (options.max_in_flight == 0)
            options.max_in_flight = 1;

        int in_pipe[2];
        int out_pipe[2];
        if (::pipe2(in_pipe, O_CLOEXEC) != 0)
            throw RuntimeFailure(std::string("pipe: ") + std::strerror(errno));
        if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            throw RuntimeFailure(std::string("pipe: ") + std::strerror(errno));
        }

        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
        std::string shell = "/bin/sh";
        std::string dash_c = "-c";
        char* argv[] = {shell.data(), dash_c.data(), options.command.data(), nullptr};
        const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
        posix_spawn_file_actions_destroy(&actions);
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        to_child = in_pipe[1];
        from_child = out_pipe[0];
        if (rc != 0) {
            pid = -1;
            close_pipes();
            throw RuntimeFailure(std::string("cannot spawn translator: ") + std::strerror(rc));
        }
        set_nonblocking(to_child);
        set_nonblocking(from_child);
        handshake();
    }

    ~Impl() {
        close_pipes();
        if (pid > 0) {
            // Give the child a moment to exit on EOF before killing it.
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(pid, nullptr, WNOHANG) == pid)
                    return;
                std::this_thread::sleep_for(std::chrono::milliseconds(10));
            }
            ::kill(pid, SIGKILL);
            ::waitpid(pid, nullptr, 0);
        }
    }

    void close_pipes() {
        if (to_child >= 0)
            ::close(to_child);
        if (from_child >= 0)
            ::close(from_child);
        to_child = from_child = -1;
    }

    [[noreturn]] void fail(ProtocolError error) {
        failure = error;
        throw error;
    }

    void handshake() {
        wire::RequestFrame hello;
        hello.type = wire::MessageType::Handshake;
        std::deque<std::uint8_t> out;
        const auto bytes = wire::encode(hello);
        out.insert(out.end(), bytes.begin(), bytes.end());
        std::optional<wire::ResponseFrame> reply;
        pump(out, [&](wire::ResponseFrame f) { reply = std::move(f); }, 1);
        if (reply->type != wire::MessageType::Handshake || reply->width != 0 || reply->height != 0 ||
            !reply->pixels.empty())
            fail(ProtocolError(ProtocolError::Kind::ProtocolViolation, "bad handshake reply"));
    }

    // Writes `out` and reads until `expected` frames have been delivered.
    template <typename OnFrame>
    void pump(std::deque<std::uint8_t>& out, OnFrame&& on_frame, std::size_t expected) {
        std::size_t received = 0;
        auto deadline = Clock::now() + options.timeout;
        std::vector<std::uint8_t> chunk(1 << 16);
        while (received < expected) {
            try {
                while (auto frame = decoder.next()) {
                    ++received;
                    deadline = Clock::now() + options.timeout;
                    on_frame(std::move(*frame));
                    if (received == expected)
                        break;
                }
            } catch (const ProtocolError& e) {
                fail(e);
            }
            if (received == expected)
                break;

            pollfd fds[2] = {{from_child, POLLIN, 0}, {to_child, POLLOUT, 0}};
            const nfds_t nfds = out.empty() ? 1 : 2;
            const auto remaining =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
            if (remaining <= 0)
                fail(ProtocolError(ProtocolError::Kind::Timeout, "no reply within " +
                                                                     std::to_string(options.timeout.count()) + " ms"));
            const int ready = ::poll(fds, nfds, int(std::min<long long>(remaining, 1000)));
            if (ready < 0) {
                if (errno == EINTR)
                    continue;
                fail(ProtocolError(ProtocolError::Kind::ProcessExit, std::strerror(errno)));
            }
            if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
                // Write as much as the pipe accepts.
                std::vector<std::uint8_t> pending(out.begin(),
                                                  out.begin() + std::ptrdiff_t(std::min<std::size_t>(out.size(), 1 << 16)));
                const ssize_t n = ::write(to_child, pending.data(), pending.size());
                if (n < 0 && errno != EAGAIN && errno != EINTR)
                    fail(ProtocolError(ProtocolError::Kind::ProcessExit, "translator closed its input"));
                if (n > 0)
                    out.erase(out.begin(), out.begin() + n);
            }
            if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
                const ssize_t n = ::read(from_child, chunk.data(), chunk.size());
                if (n == 0)
                    fail(ProtocolError(ProtocolError::Kind::ProcessExit, "translator exited"));
                if (n < 0 && errno != EAGAIN && errno != EINTR)
                    fail(ProtocolError(ProtocolError::Kind::ProcessExit, std::strerror(errno)));
                if (n > 0)
                    decoder.feed(std::span(chunk.data(), std::size_t(n)));
            }
        }
    }

    void batch(std::span<const TranslationRequest> requests, const std::function<void(TranslationResult)>& on_result) {
        if (failure)
            throw *failure;
        try {
            run_batch(requests, on_result);
        } catch (const ProtocolError&) {
            throw;
        } catch (...) {
            // Replies may still be in flight; the stream can no longer be trusted.
            failure = ProtocolError(ProtocolError::Kind::ProtocolViolation, "client abandoned a batch");
            throw;
        }
    }

    void run_batch(std::span<const TranslationRequest> requests,
                   const std::function<void(TranslationResult)>& on_result) {
        struct Pending {
            std::uint16_t width;
            std::uint16_t height;
        };
        std::unordered_map<std::uint32_t, Pending> in_flight;
        std::deque<std::uint8_t> out;
        std::size_t next = 0;
        std::size_t done = 0;

        auto enqueue = [&] {
            while (next < requests.size() && in_flight.size() < options.max_in_flight) {
                const auto frame = to_frame(requests[next]);
                if (!in_flight.emplace(frame.tile_id, Pending{frame.width, frame.height}).second)
                    throw ValidationError("duplicate tile_id " + std::to_string(frame.tile_id) + " in batch");
                const auto bytes = wire::encode(frame);
                out.insert(out.end(), bytes.begin(), bytes.end());
                ++next;
            }
        };

        enqueue();
        while (done < requests.size()) {
            pump(
                out,
                [&](wire::ResponseFrame frame) {
                    if (frame.type != wire::MessageType::Response)
                        fail(ProtocolError(ProtocolError::Kind::ProtocolViolation,
                                           "expected a response frame, got type " +
                                               std::to_string(int(frame.type))));
                    const auto it = in_flight.find(frame.tile_id);
                    if (it == in_flight.end())
                        fail(ProtocolError(ProtocolError::Kind::TileIdMismatch,
                                           "unexpected tile_id " + std::to_string(frame.tile_id)));
                    if (frame.width != it->second.width || frame.height != it->second.height)
                        fail(ProtocolError(ProtocolError::Kind::DimensionMismatch,
                                           "tile " + std::to_string(frame.tile_id) + " came back " +
                                               std::to_string(frame.width) + "x" + std::to_string(frame.height)));
                    in_flight.erase(it);
                    ++done;
                    on_result(TranslationResult{frame.tile_id,
                                                RasterImage(frame.width, frame.height, std::move(frame.pixels))});
                },
                1);
            enqueue();
        }
    }
};

ExternalTranslator::ExternalTranslator(ExternalTranslatorOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

ExternalTranslator::~ExternalTranslator() = default;

TranslationResult ExternalTranslator::translate(const TranslationRequest& request) {
    std::optional<TranslationResult> result;
    impl_->batch(std::span(&request, 1), [&](TranslationResult r) { result = std::move(r); });
    return std::move(*result);
}

void ExternalTranslator::translate_batch(std::span<const TranslationRequest> requests,
                                         const std::function<void(TranslationResult)>& on_result) {
    impl_->batch(requests, on_result);
}

} // namespace ccwsi
