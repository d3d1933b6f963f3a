#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pairsim {

constexpr std::size_t kPairingMessageLen = 2304;

struct ProtocolMessage {
    std::uint16_t index = 0;       // i, 1-based position in the repetition schedule
    std::uint16_t repetitions = 0; // m, total number of copies the sender will emit
    std::vector<std::uint8_t> public_value;
};

// Wire layout: index (2B BE) | repetitions (2B BE) | value length (2B BE) |
// value bytes | zero padding up to total_len.
inline std::vector<std::uint8_t> build_message(std::uint16_t index, std::uint16_t repetitions,
                                               const std::vector<std::uint8_t>& public_value,
                                               std::size_t total_len = kPairingMessageLen) {
    if (index == 0) throw std::invalid_argument("message index must be >= 1");
    if (repetitions == 0) throw std::invalid_argument("message repetition count must be >= 1");
    if (index > repetitions) throw std::invalid_argument("message index exceeds repetition count");
    if (public_value.size() > 0xffff)
        throw std::invalid_argument("public value too large for 16-bit length field");
    if (6 + public_value.size() > total_len)
        throw std::invalid_argument("public value does not fit in message body");
    std::vector<std::uint8_t> out(total_len, 0);
    out[0] = static_cast<std::uint8_t>(index >> 8);
    out[1] = static_cast<std::uint8_t>(index & 0xff);
    out[2] = static_cast<std::uint8_t>(repetitions >> 8);
    out[3] = static_cast<std::uint8_t>(repetitions & 0xff);
    out[4] = static_cast<std::uint8_t>(public_value.size() >> 8);
    out[5] = static_cast<std::uint8_t>(public_value.size() & 0xff);
    std::copy(public_value.begin(), public_value.end(), out.begin() + 6);
    return out;
}

inline ProtocolMessage parse_message(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 6) throw std::invalid_argument("message shorter than fixed header");
    ProtocolMessage msg;
    msg.index = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
    msg.repetitions = static_cast<std::uint16_t>((bytes[2] << 8) | bytes[3]);
    std::size_t len = static_cast<std::size_t>((bytes[4] << 8) | bytes[5]);
    if (6 + len > bytes.size()) throw std::invalid_argument("message value length exceeds body");
    if (msg.index == 0 || msg.repetitions == 0 || msg.index > msg.repetitions)
        throw std::invalid_argument("message header fields inconsistent");
    msg.public_value.assign(bytes.begin() + 6, bytes.begin() + 6 + len);
    return msg;
}

}  // namespace pairsim
