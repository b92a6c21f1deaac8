// Reference translator process for the CCWT wire protocol. Replies with the
// request payload unchanged. Misbehaviour modes exist to exercise the
// client's error handling.

#include "ccwsi/wire.hpp"

#include <CLI11.hpp>

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <thread>
#include <vector>

using namespace ccwsi::wire;

namespace {

bool write_all(const std::vector<std::uint8_t>& bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::write(STDOUT_FILENO, bytes.data() + done, bytes.size() - done);
        if (n <= 0)
            return false;
        done += std::size_t(n);
    }
    return true;
}

ResponseFrame reply_to(const RequestFrame& req) {
    ResponseFrame res;
    res.type = req.type == MessageType::Handshake ? MessageType::Handshake : MessageType::Response;
    res.tile_id = req.tile_id;
    res.width = req.width;
    res.height = req.height;
    res.pixels = req.pixels;
    return res;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"echo translator for the CCWT protocol"};
    std::string mode = "echo";
    int after = 0;
    int delay_ms = 0;
    app.add_option("--mode", mode, "echo | bad-magic | bad-version | wrong-id | bad-dims | swap | exit | hang | bad-handshake")
        ->check(CLI::IsMember({"echo", "bad-magic", "bad-version", "wrong-id", "bad-dims", "swap", "exit", "hang",
                               "bad-handshake"}));
    app.add_option("--after", after, "number of tiles answered normally before misbehaving");
    app.add_option("--delay-ms", delay_ms, "sleep before each reply");
    CLI11_PARSE(app, argc, argv);

    RequestDecoder decoder;
    std::vector<std::uint8_t> chunk(1 << 16);
    std::vector<ResponseFrame> held;
    int answered = 0;
    bool misbehave_now = false;

    for (;;) {
        const ssize_t n = ::read(STDIN_FILENO, chunk.data(), chunk.size());
        if (n <= 0)
            return 0;
        decoder.feed(std::span(chunk.data(), std::size_t(n)));
        try {
            while (auto req = decoder.next()) {
                auto res = reply_to(*req);
                if (req->type == MessageType::Handshake) {
                    if (mode == "bad-handshake")
                        res.type = MessageType::Response;
                    if (!write_all(encode(res)))
                        return 1;
                    continue;
                }
                misbehave_now = answered >= after;
                if (delay_ms > 0)
                    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
                auto bytes = encode(res);
                if (misbehave_now) {
                    if (mode == "bad-magic") {
                        bytes[0] = 'X';
                    } else if (mode == "bad-version") {
                        bytes[4] = 9;
                    } else if (mode == "wrong-id") {
                        res.tile_id ^= 0x80000000u;
                        bytes = encode(res);
                    } else if (mode == "bad-dims") {
                        res.width = std::uint16_t(res.width - 1);
                        res.pixels.resize(std::size_t(res.width) * res.height * 3);
                        bytes = encode(res);
                    } else if (mode == "exit") {
                        return 3;
                    } else if (mode == "hang") {
                        std::this_thread::sleep_for(std::chrono::seconds(20));
                    }
                }
                if (mode == "swap") {
                    // Replies to each pair of requests in reverse order.
                    held.push_back(std::move(res));
                    if (held.size() == 2) {
                        if (!write_all(encode(held[1])) || !write_all(encode(held[0])))
                            return 1;
                        held.clear();
                    }
                } else if (!write_all(bytes)) {
                    return 1;
                }
                ++answered;
            }
        } catch (const ProtocolError& e) {
            std::fprintf(stderr, "echo translator: %s\n", e.what());
            return 2;
        }
    }
}
