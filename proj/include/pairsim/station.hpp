#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "pairsim/frame.hpp"
#include "pairsim/mac_params.hpp"
#include "pairsim/rng.hpp"

namespace pairsim {

enum class TrafficMode : std::uint8_t { saturated, poisson, silent };

// A frame waiting in a station's transmit queue.
struct PendingFrame {
    std::uint32_t payload_len = 0;
    StationId dest = 0;
    FrameKind kind = FrameKind::data;
    std::vector<std::uint8_t> payload;  // protocol content when applicable
};

struct StationState {
    StationId id = 0;
    std::uint32_t cw = 0;        // current contention window, slots
    std::uint32_t backoff = 0;   // remaining slots
    std::uint32_t retries = 0;
    std::deque<PendingFrame> queue;
    TrafficMode mode = TrafficMode::silent;
};

// DCF reaction to a missing ACK: double the window and retry, or give up.
// Returns true when the head-of-queue frame is retained for retransmission.
inline bool on_tx_failure(StationState& st, const MacParams& params) {
    if (st.retries < params.retry_limit) {
        st.cw = std::min(st.cw * 2, params.cw_max());
        ++st.retries;
        return true;
    }
    if (!st.queue.empty()) st.queue.pop_front();
    st.cw = params.cw_min;
    st.retries = 0;
    return false;
}

inline void on_tx_success(StationState& st, const MacParams& params) {
    if (!st.queue.empty()) st.queue.pop_front();
    st.cw = params.cw_min;
    st.retries = 0;
}

}  // namespace pairsim
