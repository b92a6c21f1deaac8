#pragma once

// Framed binary protocol spoken with external translator processes over
// their stdin/stdout. All integers little-endian.
//
//   request : "CCWT" | ver u8 | type u8 | tile_id u32 | w u16 | h u16 | ch u8 = 3
//             | hist_flag u8 | [bins u16 | 3*bins*bins f32] | w*h*3 bytes
//   response: "CCWT" | ver u8 | type u8 | tile_id u32 | w u16 | h u16 | ch u8 = 3
//             | w*h*3 bytes
//
// type 0 is the handshake (zero dims, no payload), 1 a request, 2 a response.

#include "ccwsi/error.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ccwsi::wire {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'C', 'C', 'W', 'T'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kChannels = 3;

enum class MessageType : std::uint8_t { Handshake = 0, Request = 1, Response = 2 };

class ProtocolError : public RuntimeFailure {
public:
    enum class Kind { ProtocolViolation, DimensionMismatch, TileIdMismatch, Timeout, ProcessExit };
    ProtocolError(Kind kind, const std::string& detail);
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct HistogramPayload {
    std::uint16_t bins = 0;
    std::vector<float> values; // 3*bins*bins
};

struct RequestFrame {
    MessageType type = MessageType::Request;
    std::uint32_t tile_id = 0;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::optional<HistogramPayload> histogram;
    std::vector<std::uint8_t> pixels;
};

struct ResponseFrame {
    MessageType type = MessageType::Response;
    std::uint32_t tile_id = 0;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<std::uint8_t> pixels;
};

std::vector<std::uint8_t> encode(const RequestFrame& frame);
std::vector<std::uint8_t> encode(const ResponseFrame& frame);

/// Incremental decoding: feed() appends raw bytes; next() yields a frame once
/// one is complete. Bad magic, version or channel count throw ProtocolError.
class DecoderBuffer {
public:
    void feed(std::span<const std::uint8_t> bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }
    [[nodiscard]] std::size_t buffered() const noexcept { return buffer_.size() - consumed_; }

protected:
    [[nodiscard]] const std::uint8_t* cursor() const noexcept { return buffer_.data() + consumed_; }
    void consume(std::size_t n);

private:
    std::vector<std::uint8_t> buffer_;
    std::size_t consumed_ = 0;
};

class RequestDecoder : public DecoderBuffer {
public:
    std::optional<RequestFrame> next();
};

class ResponseDecoder : public DecoderBuffer {
public:
    std::optional<ResponseFrame> next();
};

} // namespace ccwsi::wire
