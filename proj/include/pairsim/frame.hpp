#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pairsim/mac_params.hpp"

namespace pairsim {

using StationId = std::uint32_t;

// Audibility is a bitmask over station ids (the engine never hosts more than
// 64 stations; background fleets in the reproduced experiments are <= 30).
using StationSet = std::uint64_t;

inline StationSet station_bit(StationId id) { return StationSet{1} << id; }
inline bool hears(StationSet set, StationId id) { return (set >> id) & 1; }

enum class FrameKind : std::uint8_t {
    data,          // background traffic
    ack,
    key_exchange,  // legitimate protocol frame
    jam,
    forged_data,   // protocol frame injected by the attacker under a spoofed sender
    forged_ack,
};

inline bool is_ack_kind(FrameKind k) {
    return k == FrameKind::ack || k == FrameKind::forged_ack;
}

inline const char* to_string(FrameKind k) {
    switch (k) {
        case FrameKind::data: return "data";
        case FrameKind::ack: return "ack";
        case FrameKind::key_exchange: return "key_exchange";
        case FrameKind::jam: return "jam";
        case FrameKind::forged_data: return "forged_data";
        case FrameKind::forged_ack: return "forged_ack";
    }
    return "?";
}

struct FrameOnAir {
    StationId sender = 0;            // claimed sender (spoofed on forged kinds)
    StationId origin = 0;            // station that actually radiated the energy
    std::optional<StationId> dest;   // absent for jams
    std::uint32_t payload_len = 0;   // bytes; 0 for jams and ACKs
    FrameKind kind = FrameKind::data;
    usec start = 0;
    usec duration = 0;
    StationSet audible_to = 0;
    std::vector<std::uint8_t> payload;  // protocol content when applicable
    std::uint64_t tag = 0;              // engine-assigned id, used for ACK matching

    usec end() const { return start + duration; }
};

}  // namespace pairsim
