#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pairsim {

// Simulation time base: integer microseconds. All MAC constants are integral
// in us, which keeps the event loop exactly deterministic.
using usec = std::uint64_t;

struct MacParams {
    usec slot = 9;
    usec difs = 34;
    usec sifs = 18;
    usec ack_duration = 28;
    std::uint32_t cw_min = 32;       // initial contention window, in slots
    std::uint32_t beta = 6;          // cw_max = 2^beta * cw_min
    std::uint32_t retry_limit = 7;   // failed attempts before the frame is dropped
    std::uint64_t bitrate = 54'000'000;  // bits per second
    usec phy_overhead = 20;          // constant per-frame PHY cost added to air time

    std::uint32_t cw_max() const { return cw_min << beta; }

    // Idle spacing between consecutive frames of a priority burst:
    // SIFS + ACK + DIFS.  Also the extended deferral (EIFS) observers apply
    // after a busy period they could not decode.
    usec ack_gap() const { return sifs + ack_duration + difs; }
    usec eifs() const { return ack_gap(); }

    // No ACK can still arrive once this much time has passed after tx end.
    usec ack_timeout() const { return sifs + ack_duration + slot; }
};

// Air time of a payload: ceil(bits / bitrate) in whole us, plus PHY overhead.
inline usec air_time(std::uint64_t payload_len, const MacParams& p) {
    if (payload_len == 0)
        throw std::invalid_argument("air_time: payload_len must be positive");
    const std::uint64_t bits = payload_len * 8;
    return (bits * 1'000'000 + p.bitrate - 1) / p.bitrate + p.phy_overhead;
}

// Validates a parameter set, throwing with the offending key in the message.
inline void validate(const MacParams& p) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("mac config: " + msg); };
    if (p.slot == 0) fail("mac.slot must be > 0");
    if (p.sifs == 0) fail("mac.sifs must be > 0");
    if (p.difs == 0) fail("mac.difs must be > 0");
    if (p.ack_duration == 0) fail("mac.ack_duration must be > 0");
    if (p.sifs >= p.difs) fail("mac.sifs must be < mac.difs");
    if (p.cw_min < 2) fail("mac.cw_min must be >= 2");
    if (p.beta > 16) fail("mac.beta too large");
    if (p.bitrate == 0) fail("mac.bitrate must be > 0");
    // Smallest data payload in the system is 500 bytes; the ACK must be
    // distinguishable from any data frame by duration alone.
    if (air_time(500, p) <= p.ack_duration)
        fail("mac.ack_duration must be shorter than any data frame's air time");
}

}  // namespace pairsim
