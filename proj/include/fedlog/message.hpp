#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedlog/expfam.hpp"

namespace fedlog {

/// One client's upload for a round: summed sufficient statistics plus the
/// point count behind them. Nothing else crosses the client boundary.
struct RoundMessage {
    std::uint32_t client_id = 0;
    SufficientStatistic stat_sum;
    std::uint32_t count = 0;
};

/// Bytes before the payload: client_id u32, count u32, m u16, n_class u16,
/// float width u8.
inline constexpr std::size_t kMessageHeaderBytes = 13;

/// Little-endian wire image of a RoundMessage. float_width must be 32 or 64;
/// payload holds m * n_class IEEE-754 values at that width.
std::vector<std::uint8_t> serialize_message(const RoundMessage& msg,
                                            int float_width);

/// Inverse of serialize_message. Malformed input (bad width byte, truncated
/// or oversized payload) throws ParseError with the offending byte offset.
RoundMessage deserialize_message(const std::vector<std::uint8_t>& bytes);

/// Raw little-endian IEEE-754 value arrays: the message payload encoding,
/// reused by the whole-model baseline for its parameter blobs.
void append_values(std::vector<std::uint8_t>& out,
                   std::span<const double> values, int float_width);
std::vector<double> read_values(const std::vector<std::uint8_t>& bytes,
                                std::size_t offset, std::size_t count,
                                int float_width);

}  // namespace fedlog
