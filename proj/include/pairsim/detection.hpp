#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pairsim/dh.hpp"
#include "pairsim/frame.hpp"
#include "pairsim/mac_params.hpp"
#include "pairsim/message.hpp"
#include "pairsim/trace.hpp"

namespace pairsim {

enum class OutcomeKind : std::uint8_t { success, collision, long_collision };

inline const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::success: return "success";
        case OutcomeKind::collision: return "collision";
        case OutcomeKind::long_collision: return "long_collision";
    }
    return "?";
}

struct TransmissionOutcome {
    OutcomeKind kind = OutcomeKind::success;
    usec start = 0;     // start of the data-bearing busy period
    usec duration = 0;  // duration of that busy period (ACK excluded)
    std::optional<StationId> decoded_source;
};

// Busy periods longer than the longest legitimate frame mark overlapping
// transmissions bridged by a jammer.
inline usec long_collision_threshold(const MacParams& params) {
    return air_time(kPairingMessageLen, params) + params.phy_overhead + params.slot;
}

// Incremental occupancy classifier. Feed completed busy periods in order and
// poke settle() as idle time accumulates; emitted outcomes appear exactly when
// they become decidable, which lets a protocol party act on them mid-run.
class StreamingClassifier {
  public:
    explicit StreamingClassifier(const MacParams& params)
        : params_(params), tol_(params.slot), long_thresh_(long_collision_threshold(params)) {}

    // A busy period [start, end) just ended. Returns newly decided outcomes.
    // `decoded_locally` marks a frame this observer's own MAC received and
    // acknowledged: a certain success even though the observer cannot hear
    // the ACK it transmits itself.
    std::vector<TransmissionOutcome> on_busy(usec start, usec end,
                                             std::optional<StationId> decoded_source = {},
                                             bool decoded_locally = false) {
        if (end <= start) throw std::invalid_argument("classifier: empty busy period");
        std::vector<TransmissionOutcome> out;
        const usec dur = end - start;
        if (pending_) {
            const usec gap = start - pending_->end;  // busy periods are disjoint
            const bool ack_sized = dur + tol_ >= params_.ack_duration &&
                                   dur <= params_.ack_duration + tol_;
            const bool sifs_gap = gap + tol_ >= params_.sifs && gap <= params_.sifs + tol_;
            if (!decoded_locally && sifs_gap && ack_sized) {
                out.push_back({OutcomeKind::success, pending_->start, pending_->duration,
                               pending_->decoded_source});
                pending_.reset();
                return out;  // the ack-sized busy is consumed by the pattern
            }
            out.push_back(resolve_collision());
        }
        if (decoded_locally) {
            out.push_back({OutcomeKind::success, start, dur, decoded_source});
        } else if (dur > params_.ack_duration) {
            pending_ = Pending{start, end, dur, decoded_source};
        }
        // else: short busy with no preceding data period — stray, ignored
        return out;
    }

    // Idle has progressed to `now`; resolves a pending period once no ACK can
    // complete it anymore.
    std::vector<TransmissionOutcome> settle(usec now) {
        std::vector<TransmissionOutcome> out;
        if (pending_ && now > pending_->end + params_.sifs + tol_)
            out.push_back(resolve_collision());
        return out;
    }

    // End of trace: anything still pending is an incomplete trailing pattern.
    std::vector<TransmissionOutcome> finish(usec t_end) {
        auto out = settle(t_end);
        pending_.reset();
        return out;
    }

    bool has_pending() const { return pending_.has_value(); }

  private:
    struct Pending {
        usec start;
        usec end;
        usec duration;
        std::optional<StationId> decoded_source;
    };

    TransmissionOutcome resolve_collision() {
        TransmissionOutcome o{pending_->duration > long_thresh_ ? OutcomeKind::long_collision
                                                                : OutcomeKind::collision,
                              pending_->start, pending_->duration, std::nullopt};
        pending_.reset();
        return o;
    }

    MacParams params_;
    usec tol_;
    usec long_thresh_;
    std::optional<Pending> pending_;
};

inline std::vector<TransmissionOutcome> classify_occupancy(const ChannelTrace& trace,
                                                           const MacParams& params) {
    StreamingClassifier cls(params);
    std::vector<TransmissionOutcome> out;
    for (const auto& [s, e] : trace.busy_periods()) {
        auto emitted = cls.on_busy(s, e);
        out.insert(out.end(), emitted.begin(), emitted.end());
    }
    auto tail = cls.finish(trace.end_time());
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

// X_{n+1} = I_n * (X_n + I_n).
inline unsigned detector_update(unsigned x, unsigned i_n) { return i_n * (x + i_n); }

struct DetectorState {
    unsigned x = 0;
    unsigned m = 0;
    unsigned alarm_count = 0;
    std::deque<std::pair<usec, usec>> last_collision_times;  // (start, end), bounded to m

    explicit DetectorState(unsigned threshold = 1) : m(threshold) {
        if (threshold < 1) throw std::invalid_argument("detector threshold must be >= 1");
    }

    // Consumes one observation indicator; true when the counter crossed m
    // (the counter resets to 0 on the spot).
    bool feed(unsigned i_n) {
        x = detector_update(x, i_n);
        if (x >= m) {
            ++alarm_count;
            x = 0;
            return true;
        }
        return false;
    }

    void note_collision(usec start, usec end) {
        last_collision_times.emplace_back(start, end);
        while (last_collision_times.size() > m) last_collision_times.pop_front();
    }
};

// True iff every idle gap between consecutive collisions equals
// sifs + ack + difs within one slot: the signature of a back-to-back
// priority-access burst being jammed.
inline bool interval_pattern_check(const std::deque<std::pair<usec, usec>>& collisions,
                                   const MacParams& params) {
    if (collisions.size() < 2) return false;
    const usec want = params.ack_gap();
    for (std::size_t i = 1; i < collisions.size(); ++i) {
        const usec gap = collisions[i].first - collisions[i - 1].second;
        if (gap + params.slot < want || gap > want + params.slot) return false;
    }
    return true;
}

struct Alarm {
    int rule = 0;  // 1: inconsistent/late key material, 2: m consecutive collisions, 3: long collision
    usec time = 0;
};

struct DhObservation {
    StationId peer = 0;
    u64 value = 0;
    usec time = 0;
};

// Per-party rule evaluator. Observations are fed in time order; the first
// alarm is retained as the verdict while counters keep running.
class DetectionContext {
  public:
    DetectionContext() = default;
    DetectionContext(unsigned m, usec window_start, usec deadline, const MacParams& params,
                     bool use_interval_pattern = false)
        : detector_(m), window_start_(window_start), deadline_(deadline), params_(params),
          use_interval_pattern_(use_interval_pattern) {}

    void on_dh_value(StationId peer, u64 value, usec time) {
        if (time > deadline_) {
            raise(1, time);
            return;
        }
        auto [it, inserted] = first_value_.try_emplace(peer, value);
        if (!inserted && it->second != value) raise(1, time);
    }

    void on_outcome(const TransmissionOutcome& o) {
        if (o.start < window_start_ || o.start >= deadline_) return;
        const bool collided = o.kind != OutcomeKind::success;
        if (collided) detector_.note_collision(o.start, o.start + o.duration);
        if (o.kind == OutcomeKind::long_collision) raise(3, o.start);
        const bool crossed = detector_.feed(collided ? 1 : 0);
        if (crossed &&
            (!use_interval_pattern_ || interval_pattern_check(detector_.last_collision_times, params_)))
            raise(2, o.start);
    }

    std::optional<Alarm> verdict() const { return alarm_; }
    const DetectorState& detector() const { return detector_; }
    usec deadline() const { return deadline_; }
    usec window_start() const { return window_start_; }

  private:
    void raise(int rule, usec time) {
        if (!alarm_) alarm_ = Alarm{rule, time};
    }

    DetectorState detector_{1};
    usec window_start_ = 0;
    usec deadline_ = 0;
    MacParams params_;
    bool use_interval_pattern_ = false;
    std::map<StationId, u64> first_value_;
    std::optional<Alarm> alarm_;
};

// Batch evaluation over a finished run: interleaves the outcome stream and the
// decoded key-material observations by time and returns the first alarm.
inline std::optional<Alarm> evaluate_rules(DetectionContext ctx,
                                           const std::vector<TransmissionOutcome>& outcomes,
                                           const std::vector<DhObservation>& dh_values) {
    std::size_t oi = 0, di = 0;
    while (oi < outcomes.size() || di < dh_values.size()) {
        const bool take_outcome =
            di >= dh_values.size() ||
            (oi < outcomes.size() && outcomes[oi].start <= dh_values[di].time);
        if (take_outcome) {
            ctx.on_outcome(outcomes[oi++]);
        } else {
            const DhObservation& d = dh_values[di++];
            ctx.on_dh_value(d.peer, d.value, d.time);
        }
    }
    return ctx.verdict();
}

}  // namespace pairsim
