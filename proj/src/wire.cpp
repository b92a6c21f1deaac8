#include "ccwsi/wire.hpp"

#include <algorithm>
#include <bit>

namespace ccwsi::wire {

namespace {

constexpr std::size_t kCommonHeader = 15;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint16_t get_u16(const std::uint8_t* p) { return std::uint16_t(p[0] | p[1] << 8); }

std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

void put_header(std::vector<std::uint8_t>& out, MessageType type, std::uint32_t tile_id, std::uint16_t w,
                std::uint16_t h) {
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(type));
    put_u32(out, tile_id);
    put_u16(out, w);
    put_u16(out, h);
    out.push_back(kChannels);
}

struct Header {
    MessageType type;
    std::uint32_t tile_id;
    std::uint16_t width;
    std::uint16_t height;
};

Header check_header(const std::uint8_t* p) {
    if (!std::equal(kMagic.begin(), kMagic.end(), p))
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "bad magic");
    if (p[4] != kVersion)
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "unsupported version " + std::to_string(p[4]));
    if (p[5] > 2)
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "unknown message type " + std::to_string(p[5]));
    if (p[14] != kChannels)
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "channel count must be 3");
    return {MessageType(p[5]), get_u32(p + 6), get_u16(p + 10), get_u16(p + 12)};
}

const char* kind_prefix(ProtocolError::Kind kind) {
    switch (kind) {
    case ProtocolError::Kind::ProtocolViolation: return "protocol violation";
    case ProtocolError::Kind::DimensionMismatch: return "dimension mismatch";
    case ProtocolError::Kind::TileIdMismatch: return "tile_id mismatch";
    case ProtocolError::Kind::Timeout: return "timeout";
    case ProtocolError::Kind::ProcessExit: return "process exit";
    }
    return "protocol error";
}

void check_payload(std::uint16_t w, std::uint16_t h, std::size_t size) {
    if (size != std::size_t(w) * h * kChannels)
        throw ProtocolError(ProtocolError::Kind::DimensionMismatch, "payload size does not match dimensions");
}

} // namespace

ProtocolError::ProtocolError(Kind kind, const std::string& detail)
    : RuntimeFailure(std::string(kind_prefix(kind)) + (detail.empty() ? "" : ": " + detail)), kind_(kind) {}

std::vector<std::uint8_t> encode(const RequestFrame& frame) {
    check_payload(frame.width, frame.height, frame.pixels.size());
    std::vector<std::uint8_t> out;
    const std::size_t hist_bytes =
        frame.histogram ? 2 + 4 * std::size_t(3) * frame.histogram->bins * frame.histogram->bins : 0;
    out.reserve(kCommonHeader + 1 + hist_bytes + frame.pixels.size());
    put_header(out, frame.type, frame.tile_id, frame.width, frame.height);
    out.push_back(frame.histogram ? 1 : 0);
    if (frame.histogram) {
        const auto& h = *frame.histogram;
        if (h.values.size() != std::size_t(3) * h.bins * h.bins)
            throw ValidationError("histogram payload size does not match bins");
        put_u16(out, h.bins);
        for (float v : h.values)
            put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    out.insert(out.end(), frame.pixels.begin(), frame.pixels.end());
    return out;
}

std::vector<std::uint8_t> encode(const ResponseFrame& frame) {
    check_payload(frame.width, frame.height, frame.pixels.size());
    std::vector<std::uint8_t> out;
    out.reserve(kCommonHeader + frame.pixels.size());
    put_header(out, frame.type, frame.tile_id, frame.width, frame.height);
    out.insert(out.end(), frame.pixels.begin(), frame.pixels.end());
    return out;
}

void DecoderBuffer::consume(std::size_t n) {
    consumed_ += n;
    if (consumed_ == buffer_.size()) {
        buffer_.clear();
        consumed_ = 0;
    } else if (consumed_ > (1u << 20) && consumed_ * 2 > buffer_.size()) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + std::ptrdiff_t(consumed_));
        consumed_ = 0;
    }
}

std::optional<RequestFrame> RequestDecoder::next() {
    const std::size_t avail = buffered();
    const std::uint8_t* p = cursor();
    if (avail < kCommonHeader + 1)
        return std::nullopt;
    const Header h = check_header(p);
    std::size_t need = kCommonHeader + 1;
    std::size_t bins = 0;
    if (p[kCommonHeader] > 1)
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "hist_flag must be 0 or 1");
    const bool has_hist = p[kCommonHeader] == 1;
    if (has_hist) {
        if (avail < need + 2)
            return std::nullopt;
        bins = get_u16(p + need);
        need += 2 + 4 * 3 * bins * bins;
    }
    const std::size_t pixel_bytes = std::size_t(h.width) * h.height * kChannels;
    need += pixel_bytes;
    if (avail < need)
        return std::nullopt;

    RequestFrame frame;
    frame.type = h.type;
    frame.tile_id = h.tile_id;
    frame.width = h.width;
    frame.height = h.height;
    const std::uint8_t* cursor = p + kCommonHeader + 1;
    if (has_hist) {
        HistogramPayload hist;
        hist.bins = std::uint16_t(bins);
        cursor += 2;
        hist.values.resize(3 * bins * bins);
        for (auto& v : hist.values) {
            v = std::bit_cast<float>(get_u32(cursor));
            cursor += 4;
        }
        frame.histogram = std::move(hist);
    }
    frame.pixels.assign(cursor, cursor + pixel_bytes);
    consume(need);
    return frame;
}

std::optional<ResponseFrame> ResponseDecoder::next() {
    const std::size_t avail = buffered();
    const std::uint8_t* p = cursor();
    if (avail < kCommonHeader)
        return std::nullopt;
    const Header h = check_header(p);
    const std::size_t pixel_bytes = std::size_t(h.width) * h.height * kChannels;
    if (avail < kCommonHeader + pixel_bytes)
        return std::nullopt;
    ResponseFrame frame;
    frame.type = h.type;
    frame.tile_id = h.tile_id;
    frame.width = h.width;
    frame.height = h.height;
    frame.pixels.assign(p + kCommonHeader, p + kCommonHeader + pixel_bytes);
    consume(kCommonHeader + pixel_bytes);
    return frame;
}

} // namespace ccwsi::wire
