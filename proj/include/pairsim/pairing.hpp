#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pairsim/analysis.hpp"
#include "pairsim/detection.hpp"
#include "pairsim/dh.hpp"
#include "pairsim/mac_params.hpp"
#include "pairsim/message.hpp"

namespace pairsim {

struct PairingConfig {
    double T_s = 1.5;          // key exchange timer
    double t_s = 1.0;          // monitoring window
    double target_pfp = 0.005; // acceptable expected false alarms per window
    unsigned safety_margin = 2;
    unsigned forced_m = 0;     // pin the threshold instead of deriving it (0 = derive)

    usec T_us() const { return static_cast<usec>(std::llround(T_s * 1e6)); }
    usec t_us() const { return static_cast<usec>(std::llround(t_s * 1e6)); }
};

inline void validate(const PairingConfig& cfg) {
    if (!(cfg.t_s > 0.0) || !(cfg.T_s > cfg.t_s))
        throw std::invalid_argument("protocol config: need 0 < protocol.t_s < protocol.T_s");
    if (cfg.target_pfp <= 0.0)
        throw std::invalid_argument("protocol config: protocol.target_pfp must be > 0");
}

struct ChannelEstimate {
    double p_ch_hat = 0.0;
    std::uint64_t k_hat = 0;  // expected observations in the detection window
    std::uint64_t observed_success = 0;
    std::uint64_t observed_collision = 0;
    bool low_confidence = false;
};

// Estimate from classified counts over a monitoring window of length t,
// extrapolated to a detection window of the given length.
inline ChannelEstimate estimate_channel(std::uint64_t successes, std::uint64_t collisions,
                                        double window_t_s, double detection_window_s) {
    if (window_t_s <= 0.0) throw std::invalid_argument("estimate_channel: window must be positive");
    ChannelEstimate est;
    est.observed_success = successes;
    est.observed_collision = collisions;
    const std::uint64_t total = successes + collisions;
    if (total == 0) {
        est.low_confidence = true;
        return est;
    }
    est.p_ch_hat = static_cast<double>(collisions) / static_cast<double>(total);
    est.k_hat = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(total) * detection_window_s / window_t_s));
    return est;
}

inline ChannelEstimate estimate_channel(const std::vector<TransmissionOutcome>& outcomes,
                                        double window_t_s, double detection_window_s) {
    std::uint64_t succ = 0, coll = 0;
    for (const auto& o : outcomes) (o.kind == OutcomeKind::success ? succ : coll)++;
    return estimate_channel(succ, coll, window_t_s, detection_window_s);
}

// Smallest m whose expected false-alarm count stays under target, plus margin.
inline unsigned select_m(const ChannelEstimate& est, const PairingConfig& cfg) {
    if (est.p_ch_hat >= 1.0)
        throw std::invalid_argument("select_m: p_ch_hat = 1 admits no finite threshold");
    unsigned m = 1;
    while (false_positive_ratio(est.k_hat, est.p_ch_hat, m) > cfg.target_pfp) {
        ++m;
        if (m > 64) throw std::runtime_error("select_m: threshold search did not terminate");
    }
    return m + cfg.safety_margin;
}

// ---------------------------------------------------------------------------
// Protocol state machines. The surrounding simulator translates these events
// and actions to and from medium activity; the machines themselves are pure.

struct PartyEvent {
    enum class Kind {
        association_done,
        timer_fired,
        frame_delivered,
        ack_received,
        ack_missing,       // retry budget exhausted for the head frame
        outcome_observed,
    };
    Kind kind;
    usec now = 0;
    std::string timer_label;            // timer_fired
    StationId from = 0;                 // frame_delivered: claimed sender
    std::vector<std::uint8_t> payload;  // frame_delivered
    TransmissionOutcome outcome;        // outcome_observed
};

struct PartyAction {
    enum class Kind { arm_timer, send_frame, cancel_sends, raise_alarm, install_key };
    Kind kind;
    usec at = 0;                        // arm_timer: deadline
    std::string timer_label;
    std::vector<std::uint8_t> payload;  // send_frame
    StationId dest = 0;
    bool override_backoff = false;      // send_frame: priority access, zero-slot backoff
    int rule = 0;                       // raise_alarm
    u64 key = 0;                        // install_key
};

enum class PartyPhase : std::uint8_t { idle, monitoring, exchanging, replying, waiting, done };

// State and behavior shared by both ends of the exchange.
struct PartyCore {
    // configuration
    StationId self = 0;
    StationId peer = 0;
    PairingConfig cfg;
    DhGroup group;
    MacParams mac;
    u64 secret = 0;
    u64 public_value = 0;
    unsigned forced_m = 0;  // 0 = derive from the channel estimate
    bool abort_on_alarm = false;
    bool use_interval_pattern = false;

    // live state
    PartyPhase phase = PartyPhase::idle;
    usec assoc_time = 0;
    std::uint64_t mon_success = 0;
    std::uint64_t mon_collision = 0;
    ChannelEstimate estimate;
    unsigned m = 0;            // detector threshold and send-repetition count
    unsigned burst_len = 0;    // how many copies this party sends
    unsigned next_index = 0;   // next copy to send (1-based), 0 = burst not started
    DetectionContext ctx;
    std::optional<u64> peer_value;
    std::optional<Alarm> alarm;
    u64 computed_shared = 0;   // derived key material, recorded even when alarmed
    bool installed = false;

    void init_keys(u64 secret_value) {
        secret = secret_value;
        public_value = dh_public(group, secret);
    }

    std::vector<std::uint8_t> message(unsigned index, unsigned total) const {
        return build_message(static_cast<std::uint16_t>(index), static_cast<std::uint16_t>(total),
                             encode_be(public_value));
    }

    void arm_protocol_timers(usec now, std::vector<PartyAction>& out) {
        assoc_time = now;
        phase = PartyPhase::monitoring;
        out.push_back({PartyAction::Kind::arm_timer, now + cfg.t_us(), "monitor_end", {}, 0, false, 0, 0});
        out.push_back({PartyAction::Kind::arm_timer, now + cfg.T_us(), "exchange_deadline", {}, 0, false, 0, 0});
    }

    void finish_monitoring(usec now) {
        estimate = estimate_channel(mon_success, mon_collision, cfg.t_s, cfg.T_s - cfg.t_s);
        m = forced_m > 0 ? forced_m : select_m(estimate, cfg);
        ctx = DetectionContext(m, now, assoc_time + cfg.T_us(), mac, use_interval_pattern);
    }

    void note_outcome(const TransmissionOutcome& o, std::vector<PartyAction>& out) {
        if (phase == PartyPhase::monitoring) {
            if (o.start >= assoc_time) (o.kind == OutcomeKind::success ? mon_success : mon_collision)++;
            return;
        }
        if (phase == PartyPhase::idle || phase == PartyPhase::done) return;
        const bool had = ctx.verdict().has_value();
        ctx.on_outcome(o);
        if (!had && ctx.verdict()) record_alarm(*ctx.verdict(), out);
    }

    void note_dh_value(StationId from, const std::vector<std::uint8_t>& payload, usec now,
                       std::vector<PartyAction>& out, ProtocolMessage* parsed) {
        ProtocolMessage msg = parse_message(payload);
        u64 value = decode_be(msg.public_value);
        const bool had = ctx.verdict().has_value();
        ctx.on_dh_value(from, value, now);
        if (!had && ctx.verdict()) record_alarm(*ctx.verdict(), out);
        if (!peer_value) peer_value = value;
        if (parsed) *parsed = msg;
    }

    void record_alarm(const Alarm& a, std::vector<PartyAction>& out) {
        if (alarm) return;
        alarm = a;
        out.push_back({PartyAction::Kind::raise_alarm, a.time, {}, {}, 0, false, a.rule, 0});
        if (abort_on_alarm)
            out.push_back({PartyAction::Kind::cancel_sends, a.time, {}, {}, 0, false, 0, 0});
    }

    void conclude(usec now, std::vector<PartyAction>& out) {
        phase = PartyPhase::done;
        if (peer_value) computed_shared = dh_shared(group, secret, *peer_value);
        if (!alarm && !ctx.verdict() && peer_value) {
            installed = true;
            out.push_back({PartyAction::Kind::install_key, now, {}, {}, 0, false, 0, computed_shared});
        }
    }
};

// Initiator: monitors, picks m, sends the M^a burst, then listens until T.
struct AliceMachine {
    PartyCore core;

    std::vector<PartyAction> step(const PartyEvent& ev) {
        std::vector<PartyAction> out;
        auto& c = core;
        switch (ev.kind) {
            case PartyEvent::Kind::association_done:
                c.arm_protocol_timers(ev.now, out);
                break;
            case PartyEvent::Kind::timer_fired:
                if (ev.timer_label == "monitor_end" && c.phase == PartyPhase::monitoring) {
                    c.finish_monitoring(ev.now);
                    c.burst_len = c.m;
                    c.phase = PartyPhase::exchanging;
                    c.next_index = 1;
                    if (!c.alarm)
                        out.push_back({PartyAction::Kind::send_frame, 0, {}, c.message(1, c.burst_len),
                                       c.peer, true, 0, 0});
                } else if (ev.timer_label == "exchange_deadline") {
                    c.conclude(ev.now, out);
                }
                break;
            case PartyEvent::Kind::ack_received:
                if (c.phase == PartyPhase::exchanging && !c.alarm) {
                    if (c.next_index < c.burst_len) {
                        ++c.next_index;
                        out.push_back({PartyAction::Kind::send_frame, ev.now + c.mac.difs, {},
                                       c.message(c.next_index, c.burst_len), c.peer, true, 0, 0});
                    } else {
                        c.phase = PartyPhase::waiting;
                    }
                } else if (c.phase == PartyPhase::exchanging) {
                    c.phase = PartyPhase::waiting;  // aborted mid-burst
                }
                break;
            case PartyEvent::Kind::ack_missing:
                // Retry budget exhausted (heavily jammed or hopeless channel):
                // stay quiet until T; the detector speaks for itself.
                if (c.phase == PartyPhase::exchanging) c.phase = PartyPhase::waiting;
                break;
            case PartyEvent::Kind::frame_delivered:
                if (ev.from == c.peer &&
                    (c.phase == PartyPhase::exchanging || c.phase == PartyPhase::waiting))
                    c.note_dh_value(ev.from, ev.payload, ev.now, out, nullptr);
                break;
            case PartyEvent::Kind::outcome_observed:
                c.note_outcome(ev.outcome, out);
                break;
        }
        return out;
    }
};

// Responder: monitors, receives the M^a burst, answers with the M^b burst.
// An alarm is recorded silently — the reply burst is still sent so the
// attacker cannot distinguish a detecting Bob, but no key is ever installed.
struct BobMachine {
    PartyCore core;

    std::vector<PartyAction> step(const PartyEvent& ev) {
        std::vector<PartyAction> out;
        auto& c = core;
        switch (ev.kind) {
            case PartyEvent::Kind::association_done:
                c.arm_protocol_timers(ev.now, out);
                break;
            case PartyEvent::Kind::timer_fired:
                if (ev.timer_label == "monitor_end" && c.phase == PartyPhase::monitoring) {
                    c.finish_monitoring(ev.now);
                    c.phase = PartyPhase::waiting;  // waiting for the peer burst
                } else if (ev.timer_label == "exchange_deadline") {
                    c.conclude(ev.now, out);
                }
                break;
            case PartyEvent::Kind::frame_delivered: {
                if (ev.from != c.peer ||
                    !(c.phase == PartyPhase::waiting || c.phase == PartyPhase::replying))
                    break;
                ProtocolMessage msg;
                c.note_dh_value(ev.from, ev.payload, ev.now, out, &msg);
                if (c.phase == PartyPhase::waiting && c.next_index == 0 &&
                    msg.index == msg.repetitions) {
                    // Peer burst complete: answer with the same repetition count.
                    c.burst_len = msg.repetitions;
                    c.phase = PartyPhase::replying;
                    c.next_index = 1;
                    out.push_back({PartyAction::Kind::send_frame, 0, {},
                                   c.message(1, c.burst_len), c.peer, true, 0, 0});
                }
                break;
            }
            case PartyEvent::Kind::ack_received:
                if (c.phase == PartyPhase::replying) {
                    if (c.next_index < c.burst_len) {
                        ++c.next_index;
                        out.push_back({PartyAction::Kind::send_frame, ev.now + c.mac.difs, {},
                                       c.message(c.next_index, c.burst_len), c.peer, true, 0, 0});
                    } else {
                        c.phase = PartyPhase::waiting;
                    }
                }
                break;
            case PartyEvent::Kind::ack_missing:
                if (c.phase == PartyPhase::replying) c.phase = PartyPhase::waiting;
                break;
            case PartyEvent::Kind::outcome_observed:
                c.note_outcome(ev.outcome, out);
                break;
        }
        return out;
    }
};

// Pure-transition views of the machines: (state, event) -> (state', actions).
inline std::pair<AliceMachine, std::vector<PartyAction>> alice_step(const AliceMachine& state,
                                                                    const PartyEvent& ev) {
    AliceMachine next = state;
    auto actions = next.step(ev);
    return {std::move(next), std::move(actions)};
}

inline std::pair<BobMachine, std::vector<PartyAction>> bob_step(const BobMachine& state,
                                                                const PartyEvent& ev) {
    BobMachine next = state;
    auto actions = next.step(ev);
    return {std::move(next), std::move(actions)};
}

}  // namespace pairsim
