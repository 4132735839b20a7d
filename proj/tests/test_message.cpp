#include <doctest.h>

#include <cstdint>
#include <vector>

#include "fedlog/errors.hpp"
#include "fedlog/message.hpp"
#include "fedlog/rng.hpp"

using namespace fedlog;

namespace {

RoundMessage make_message(std::uint32_t id, std::size_t m, std::size_t n_class,
                          std::uint32_t count, const std::vector<double>& vals) {
    RoundMessage msg;
    msg.client_id = id;
    msg.count = count;
    msg.stat_sum.m = m;
    msg.stat_sum.n_class = n_class;
    msg.stat_sum.values = vals;
    return msg;
}

std::size_t parse_offset(const std::vector<std::uint8_t>& bytes) {
    try {
        deserialize_message(bytes);
    } catch (const ParseError& e) {
        return e.offset();
    }
    return static_cast<std::size_t>(-1);
}

}  // namespace

TEST_CASE("wire image matches the declared layout byte for byte") {
    const RoundMessage msg =
        make_message(0x01020304u, 1, 2, 0x0a0b0c0du, {1.0, -2.0});
    const std::vector<std::uint8_t> bytes = serialize_message(msg, 64);
    const std::vector<std::uint8_t> expect = {
        0x04, 0x03, 0x02, 0x01,  // client_id, little endian
        0x0d, 0x0c, 0x0b, 0x0a,  // count
        0x01, 0x00,              // m
        0x02, 0x00,              // n_class
        64,                      // float width
        0, 0, 0, 0, 0, 0, 0xf0, 0x3f,  // 1.0
        0, 0, 0, 0, 0, 0, 0x00, 0xc0,  // -2.0
    };
    CHECK(bytes == expect);
    CHECK(bytes.size() == kMessageHeaderBytes + 2 * 8);
}

TEST_CASE("64-bit round trip is exact") {
    Rng rng(13);
    std::vector<double> vals(12);
    for (auto& v : vals) v = rng.gaussian() * 1e6;
    vals[0] = 0.0;
    vals[1] = -5e-324;  // smallest denormal
    vals[2] = 1e308;
    const RoundMessage msg = make_message(7, 4, 3, 81, vals);

    const RoundMessage back = deserialize_message(serialize_message(msg, 64));
    CHECK(back.client_id == 7);
    CHECK(back.count == 81);
    CHECK(back.stat_sum.m == 4);
    CHECK(back.stat_sum.n_class == 3);
    CHECK(back.stat_sum.values == vals);
}

TEST_CASE("32-bit round trip degrades exactly to float") {
    Rng rng(14);
    std::vector<double> vals(6);
    for (auto& v : vals) v = rng.gaussian();
    vals[0] = 1.5;  // exactly representable
    const RoundMessage msg = make_message(1, 3, 2, 10, vals);

    const RoundMessage back = deserialize_message(serialize_message(msg, 32));
    for (std::size_t i = 0; i < vals.size(); ++i) {
        CHECK(back.stat_sum.values[i] ==
              static_cast<double>(static_cast<float>(vals[i])));
    }
    CHECK(back.stat_sum.values[0] == 1.5);
    CHECK(serialize_message(msg, 32).size() == kMessageHeaderBytes + 6 * 4);
}

TEST_CASE("deserialize pinpoints malformed bytes") {
    const RoundMessage msg = make_message(1, 1, 1, 5, {3.25});
    std::vector<std::uint8_t> good = serialize_message(msg, 32);
    REQUIRE(good.size() == 17);

    std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 12);
    CHECK(parse_offset(short_header) == 12);

    std::vector<std::uint8_t> bad_width = good;
    bad_width[12] = 16;
    CHECK(parse_offset(bad_width) == 12);

    std::vector<std::uint8_t> zero_m = good;
    zero_m[8] = 0;
    zero_m[9] = 0;
    CHECK(parse_offset(zero_m) == 8);

    std::vector<std::uint8_t> trailing = good;
    trailing.push_back(0);
    CHECK(parse_offset(trailing) == 17);

    std::vector<std::uint8_t> cut = serialize_message(msg, 64);
    cut.resize(15);
    CHECK(parse_offset(cut) == 15);
}

TEST_CASE("serialize rejects inconsistent messages") {
    CHECK_THROWS_AS(serialize_message(make_message(1, 0, 1, 1, {}), 64),
                    InputError);
    CHECK_THROWS_AS(serialize_message(make_message(1, 70000, 1, 1, {}), 64),
                    InputError);
    CHECK_THROWS_AS(serialize_message(make_message(1, 2, 2, 1, {1.0}), 64),
                    InputError);
    CHECK_THROWS_AS(serialize_message(make_message(1, 1, 1, 1, {1.0}), 16),
                    InputError);
}

TEST_CASE("value arrays honor offsets and widths") {
    std::vector<std::uint8_t> out = {0xab, 0xcd};  // unrelated prefix
    const std::vector<double> vals = {0.5, -3.0, 1e-3};
    append_values(out, vals, 64);
    CHECK(out.size() == 2 + 3 * 8);
    CHECK(read_values(out, 2, 3, 64) == vals);

    std::vector<std::uint8_t> narrow;
    append_values(narrow, vals, 32);
    const std::vector<double> back = read_values(narrow, 0, 3, 32);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        CHECK(back[i] == static_cast<double>(static_cast<float>(vals[i])));
    }

    CHECK_THROWS_AS(read_values(narrow, 0, 4, 32), ParseError);
    CHECK_THROWS_AS(append_values(narrow, vals, 8), InputError);
}
