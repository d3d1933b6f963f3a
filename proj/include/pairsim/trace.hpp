#pragma once

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pairsim/frame.hpp"
#include "pairsim/mac_params.hpp"

namespace pairsim {

// What one observer heard: a busy/idle alternation over [t0, t_end].
// Stored as merged busy intervals; segments() materializes the alternation.
struct TraceSegment {
    bool busy;
    usec start;
    usec duration;
};

class ChannelTrace {
  public:
    ChannelTrace() = default;
    ChannelTrace(StationId observer, usec t0) : observer_(observer), t0_(t0), t_end_(t0) {}

    StationId observer() const { return observer_; }
    usec begin_time() const { return t0_; }
    usec end_time() const { return t_end_; }

    // Busy periods must be appended in order and may not touch each other:
    // a zero-length idle gap would merge two physically distinct events.
    void add_busy(usec start, usec end) {
        if (end <= start) throw std::invalid_argument("trace: empty busy period");
        if (!busy_.empty() && start <= busy_.back().second)
            throw std::invalid_argument("trace: busy periods must be disjoint and ordered");
        if (start < t_end_) throw std::invalid_argument("trace: busy period predates frontier");
        busy_.push_back({start, end});
        t_end_ = end;
    }

    void close(usec t_end) {
        if (t_end < t_end_) throw std::invalid_argument("trace: cannot close before frontier");
        t_end_ = t_end;
    }

    const std::vector<std::pair<usec, usec>>& busy_periods() const { return busy_; }

    // Alternating busy/idle segments spanning [t0, t_end], idle gaps filled in.
    std::vector<TraceSegment> segments() const {
        std::vector<TraceSegment> out;
        usec cursor = t0_;
        for (const auto& [s, e] : busy_) {
            if (s > cursor) out.push_back({false, cursor, s - cursor});
            out.push_back({true, s, e - s});
            cursor = e;
        }
        if (t_end_ > cursor) out.push_back({false, cursor, t_end_ - cursor});
        return out;
    }

  private:
    StationId observer_ = 0;
    usec t0_ = 0;
    usec t_end_ = 0;
    std::vector<std::pair<usec, usec>> busy_;
};

}  // namespace pairsim
