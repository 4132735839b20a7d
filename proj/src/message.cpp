#include "fedlog/message.hpp"

#include <cstring>
#include <string>

#include "fedlog/errors.hpp"

namespace fedlog {

namespace {

void check_width(int float_width) {
    if (float_width != 32 && float_width != 64) {
        throw InputError("wire float width must be 32 or 64, got " +
                         std::to_string(float_width));
    }
}

void append_le(std::vector<std::uint8_t>& out, std::uint64_t v,
               std::size_t n_bytes) {
    for (std::size_t i = 0; i < n_bytes; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint64_t read_le(const std::vector<std::uint8_t>& bytes,
                      std::size_t offset, std::size_t n_bytes) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n_bytes; ++i) {
        v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
    }
    return v;
}

}  // namespace

void append_values(std::vector<std::uint8_t>& out,
                   std::span<const double> values, int float_width) {
    check_width(float_width);
    if (float_width == 32) {
        for (double v : values) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, sizeof bits);
            append_le(out, bits, 4);
        }
    } else {
        for (double v : values) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            append_le(out, bits, 8);
        }
    }
}

std::vector<double> read_values(const std::vector<std::uint8_t>& bytes,
                                std::size_t offset, std::size_t count,
                                int float_width) {
    check_width(float_width);
    const std::size_t stride = static_cast<std::size_t>(float_width) / 8;
    if (bytes.size() < offset + count * stride) {
        throw ParseError("value array ends before " + std::to_string(count) +
                             " declared values",
                         bytes.size());
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i, offset += stride) {
        if (float_width == 32) {
            const std::uint32_t bits =
                static_cast<std::uint32_t>(read_le(bytes, offset, 4));
            float f;
            std::memcpy(&f, &bits, sizeof f);
            values[i] = static_cast<double>(f);
        } else {
            const std::uint64_t bits = read_le(bytes, offset, 8);
            double d;
            std::memcpy(&d, &bits, sizeof d);
            values[i] = d;
        }
    }
    return values;
}

std::vector<std::uint8_t> serialize_message(const RoundMessage& msg,
                                            int float_width) {
    check_width(float_width);
    const SufficientStatistic& stat = msg.stat_sum;
    if (stat.m == 0 || stat.n_class == 0 || stat.m > 0xffff ||
        stat.n_class > 0xffff) {
        throw InputError("message dims must fit u16 and be positive");
    }
    if (stat.values.size() != stat.m * stat.n_class) {
        throw InputError("statistic length does not match its dims");
    }
    std::vector<std::uint8_t> bytes;
    bytes.reserve(kMessageHeaderBytes +
                  stat.values.size() * (static_cast<std::size_t>(float_width) / 8));
    append_le(bytes, msg.client_id, 4);
    append_le(bytes, msg.count, 4);
    append_le(bytes, stat.m, 2);
    append_le(bytes, stat.n_class, 2);
    bytes.push_back(static_cast<std::uint8_t>(float_width));
    append_values(bytes, stat.values, float_width);
    return bytes;
}

RoundMessage deserialize_message(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kMessageHeaderBytes) {
        throw ParseError("truncated message header", bytes.size());
    }
    RoundMessage msg;
    msg.client_id = static_cast<std::uint32_t>(read_le(bytes, 0, 4));
    msg.count = static_cast<std::uint32_t>(read_le(bytes, 4, 4));
    const std::size_t m = read_le(bytes, 8, 2);
    const std::size_t n_class = read_le(bytes, 10, 2);
    const int float_width = bytes[12];
    if (float_width != 32 && float_width != 64) {
        throw ParseError("float width byte must be 32 or 64, got " +
                             std::to_string(float_width),
                         12);
    }
    if (m == 0 || n_class == 0) {
        throw ParseError("message dims must be positive", 8);
    }
    const std::size_t stride = static_cast<std::size_t>(float_width) / 8;
    const std::size_t expect = kMessageHeaderBytes + m * n_class * stride;
    if (bytes.size() > expect) {
        throw ParseError("trailing bytes after payload", expect);
    }
    msg.stat_sum.m = m;
    msg.stat_sum.n_class = n_class;
    msg.stat_sum.values =
        read_values(bytes, kMessageHeaderBytes, m * n_class, float_width);
    return msg;
}

}  // namespace fedlog
