#include <doctest.h>

#include "ccwsi/wire.hpp"

#include <cstring>

using namespace ccwsi;
using namespace ccwsi::wire;

TEST_CASE("request frame layout") {
    RequestFrame f;
    f.tile_id = 0x01020304;
    f.width = 2;
    f.height = 1;
    f.pixels = {1, 2, 3, 4, 5, 6};
    const std::vector<std::uint8_t> expected = {'C', 'C', 'W', 'T', 1, 1, 4, 3, 2, 1, 2, 0, 1, 0, 3, 0,
                                                1, 2, 3, 4, 5, 6};
    CHECK(encode(f) == expected);

    f.histogram = HistogramPayload{1, {1.0f, 0.0f, 0.0f}};
    const auto bytes = encode(f);
    REQUIRE(bytes.size() == 16 + 2 + 12 + 6);
    CHECK(bytes[15] == 1);
    CHECK(bytes[16] == 1);
    CHECK(bytes[17] == 0);
    float one;
    std::memcpy(&one, bytes.data() + 18, 4);
    CHECK(one == 1.0f);
}

TEST_CASE("response frame layout") {
    ResponseFrame f;
    f.tile_id = 7;
    f.width = 1;
    f.height = 1;
    f.pixels = {9, 8, 7};
    const std::vector<std::uint8_t> expected = {'C', 'C', 'W', 'T', 1, 2, 7, 0, 0, 0, 1, 0, 1, 0, 3, 9, 8, 7};
    CHECK(encode(f) == expected);
}

TEST_CASE("decoders reassemble frames from arbitrary chunks") {
    std::vector<std::uint8_t> stream;
    for (std::uint32_t id = 0; id < 5; ++id) {
        RequestFrame f;
        f.tile_id = id;
        f.width = std::uint16_t(id + 1);
        f.height = 3;
        f.pixels.assign(std::size_t(f.width) * 3 * 3, std::uint8_t(id));
        if (id % 2 == 0)
            f.histogram = HistogramPayload{2, std::vector<float>(12, 1.0f / 12)};
        const auto b = encode(f);
        stream.insert(stream.end(), b.begin(), b.end());
    }
    RequestDecoder dec;
    std::vector<RequestFrame> got;
    for (std::size_t i = 0; i < stream.size(); i += 7) {
        dec.feed(std::span(stream).subspan(i, std::min<std::size_t>(7, stream.size() - i)));
        while (auto f = dec.next())
            got.push_back(std::move(*f));
    }
    REQUIRE(got.size() == 5);
    CHECK(dec.buffered() == 0);
    for (std::uint32_t id = 0; id < 5; ++id) {
        CHECK(got[id].tile_id == id);
        CHECK(got[id].width == id + 1);
        CHECK(got[id].histogram.has_value() == (id % 2 == 0));
        CHECK(got[id].pixels.size() == std::size_t(id + 1) * 9);
    }
}

TEST_CASE("malformed headers are protocol violations") {
    ResponseFrame f;
    f.width = 1;
    f.height = 1;
    f.pixels = {0, 0, 0};
    const auto good = encode(f);

    auto expect_violation = [](std::vector<std::uint8_t> bytes, const char* detail) {
        ResponseDecoder dec;
        dec.feed(bytes);
        try {
            (void)dec.next();
            FAIL("expected a protocol error");
        } catch (const ProtocolError& e) {
            CHECK(e.kind() == ProtocolError::Kind::ProtocolViolation);
            CHECK(std::string(e.what()).starts_with("protocol violation"));
            CHECK(std::string(e.what()).find(detail) != std::string::npos);
        }
    };
    auto bad = good;
    bad[1] = 'X';
    expect_violation(bad, "magic");
    bad = good;
    bad[4] = 2;
    expect_violation(bad, "version");
    bad = good;
    bad[5] = 5;
    expect_violation(bad, "type");
    bad = good;
    bad[14] = 4;
    expect_violation(bad, "channel");

    RequestFrame r;
    auto req = encode(r);
    req[15] = 2;
    RequestDecoder dec;
    dec.feed(req);
    CHECK_THROWS_AS((void)dec.next(), ProtocolError);
}

TEST_CASE("encoding checks payload size") {
    ResponseFrame f;
    f.width = 2;
    f.height = 2;
    f.pixels.resize(11);
    try {
        (void)encode(f);
        FAIL("expected a dimension mismatch");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolError::Kind::DimensionMismatch);
    }
}
