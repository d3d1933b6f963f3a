#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pairsim/adversary.hpp"
#include "pairsim/detection.hpp"
#include "pairsim/event_log.hpp"
#include "pairsim/frame.hpp"
#include "pairsim/mac_params.hpp"
#include "pairsim/pairing.hpp"
#include "pairsim/rng.hpp"
#include "pairsim/scenario.hpp"
#include "pairsim/station.hpp"
#include "pairsim/trace.hpp"

namespace pairsim {

// Fixed station layout: 0 = initiator (doubling as the silent observer when
// the protocol is disabled), 1 = responder, 2 = attacker, 3.. = background.
constexpr StationId kAlice = 0;
constexpr StationId kBob = 1;
constexpr StationId kAttacker = 2;
constexpr StationId kFirstBackground = 3;

struct FrameSummary {
    usec start = 0;
    usec end = 0;
    FrameKind kind = FrameKind::data;
    StationId origin = 0;
    StationId claimed = 0;
    std::optional<StationId> dest;
    std::uint32_t payload_len = 0;
    bool delivered = false;  // decoded by its destination
};

struct RunOutput {
    std::map<StationId, ChannelTrace> traces;
    std::map<StationId, std::vector<TransmissionOutcome>> outcomes;
    std::vector<FrameSummary> frames;
    EventLog log;
    bool protocol_ran = false;
    AliceMachine alice;
    BobMachine bob;
    AttackerMachine attacker;
};

inline std::uint64_t max_collision_run(const std::vector<TransmissionOutcome>& outcomes,
                                       usec window_start = 0,
                                       usec window_end = std::numeric_limits<usec>::max()) {
    std::uint64_t best = 0, run = 0;
    for (const auto& o : outcomes) {
        if (o.start < window_start || o.start >= window_end) continue;
        if (o.kind == OutcomeKind::success) run = 0;
        else best = std::max(best, ++run);
    }
    return best;
}

class SimEngine {
  public:
    SimEngine(const ScenarioConfig& cfg, std::uint64_t seed, bool record_events = false)
        : cfg_(cfg), rng_(seed), record_(record_events) {
        validate(cfg_);
        setup();
    }

    RunOutput run() {
        loop();
        finish();
        return std::move(out_);
    }

  private:
    // A maximal busy period as heard by one station. Contiguous frames extend
    // it; it closes only once the air this station can hear goes quiet.
    struct Cluster {
        bool open = false;
        bool pending_close = false;  // quiet, but a same-instant frame may extend it
        usec start = 0;
        usec end = 0;
        unsigned frames = 0;
        bool single_ack = false;     // exactly one frame and it is an ACK
        bool undecodable = false;    // joined mid-frame, preamble missed
        bool decoded_by_me = false;  // sole frame was addressed here and decoded
        FrameKind first_kind = FrameKind::data;
        StationId first_claimed = 0;
        int heard_active = 0;
    };

    struct Etherframe {
        FrameOnAir f;
        struct Overlap {
            StationSet audible;
            StationId origin;
        };
        std::vector<Overlap> overlaps;
    };

    struct Sta {
        StationState mac;
        usec anchor = 0;       // contention reference: end of deferral window
        usec count_from = 0;   // when the current backoff was armed
        bool transmitting = false;
        usec tx_end = 0;
        std::uint64_t awaiting_tag = 0;  // outstanding unacknowledged frame
        usec next_arrival = 0;           // poisson; 0 = none scheduled
        Cluster cluster;
        std::optional<usec> scheduled_start;  // pinned start for the queue head
    };

    struct PlannedFrame {
        usec start;
        std::uint64_t seq;
        FrameOnAir f;
        bool operator>(const PlannedFrame& o) const {
            return start != o.start ? start > o.start : seq > o.seq;
        }
    };

    struct Timer {
        usec at;
        std::uint64_t seq;
        int kind;  // 0 = ack timeout, 1 = role timer
        StationId station;
        std::uint64_t tag;
        std::string label;
        bool operator>(const Timer& o) const {
            return at != o.at ? at > o.at : seq > o.seq;
        }
    };

    ScenarioConfig cfg_;
    SimRng rng_;
    bool record_;
    RunOutput out_;

    std::vector<Sta> sta_;
    StationSet all_mask_ = 0;
    usec horizon_ = 0;
    usec now_ = 0;
    std::uint64_t next_tag_ = 1;
    std::uint64_t next_seq_ = 1;

    std::map<std::uint64_t, Etherframe> air_;  // keyed by tag: deterministic order
    std::priority_queue<PlannedFrame, std::vector<PlannedFrame>, std::greater<>> planned_;
    std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
    std::set<std::uint64_t> deaf_;  // (frame tag, station): transmitting at frame start

    std::map<StationId, StreamingClassifier> classifiers_;
    bool attack_on_ = false;

    static std::uint64_t deaf_key(StationId s, std::uint64_t tag) { return (tag << 8) | s; }

    // ---- setup --------------------------------------------------------------

    void setup() {
        horizon_ = cfg_.duration_us();
        const StationId n = kFirstBackground + cfg_.traffic.n_background;
        sta_.resize(n);
        for (StationId i = 0; i < n; ++i) {
            sta_[i].mac.id = i;
            sta_[i].mac.cw = cfg_.mac.cw_min;
            sta_[i].mac.mode = i >= kFirstBackground ? cfg_.traffic.mode : TrafficMode::silent;
            all_mask_ |= station_bit(i);
        }
        attack_on_ = cfg_.attacker.kind != AttackKind::none;

        // Draw order is part of the reproducibility contract: party secrets,
        // attacker secrets, initial backoffs, initial arrivals.
        const u64 a_secret = 1 + rng_.below(cfg_.dh.p - 1);
        const u64 b_secret = 1 + rng_.below(cfg_.dh.p - 1);
        AttackerStrategy strat = cfg_.attacker;
        strat.a_secret = 1 + rng_.below(cfg_.dh.p - 1);
        strat.b_secret = 1 + rng_.below(cfg_.dh.p - 1);

        if (cfg_.protocol_enabled) {
            out_.protocol_ran = true;
            auto init_party = [&](PartyCore& c, StationId self, StationId peer, u64 secret,
                                  bool abort_on_alarm) {
                c.self = self;
                c.peer = peer;
                c.cfg = cfg_.protocol;
                c.group = cfg_.dh;
                c.mac = cfg_.mac;
                c.abort_on_alarm = abort_on_alarm;
                c.forced_m = cfg_.protocol.forced_m;
                c.init_keys(secret);
            };
            init_party(out_.alice.core, kAlice, kBob, a_secret, true);
            init_party(out_.bob.core, kBob, kAlice, b_secret, false);
            timers_.push({cfg_.warmup_us(), next_seq_++, 1, kAlice, 0, "associate"});
            timers_.push({cfg_.warmup_us(), next_seq_++, 1, kBob, 0, "associate"});
        }
        out_.attacker =
            AttackerMachine(strat, cfg_.dh, cfg_.mac, kAttacker, kAlice, kBob, all_mask_);

        for (StationId i = kFirstBackground; i < n; ++i) {
            if (cfg_.traffic.mode == TrafficMode::saturated) {
                enqueue_background(sta_[i]);
                arm_backoff(sta_[i]);
            }
        }
        if (cfg_.traffic.mode == TrafficMode::poisson) {
            for (StationId i = kFirstBackground; i < n; ++i)
                sta_[i].next_arrival = rng_.exp_us(mean_interarrival_us());
        }

        const auto observers = cfg_.protocol_enabled ? std::vector<StationId>{kAlice, kBob}
                                                     : std::vector<StationId>{kAlice};
        for (StationId ob : observers) {
            out_.traces.emplace(ob, ChannelTrace(ob, 0));
            out_.outcomes.emplace(ob, std::vector<TransmissionOutcome>{});
            classifiers_.emplace(ob, StreamingClassifier(cfg_.mac));
        }
    }

    double mean_interarrival_us() const {
        // Offered load is given in bit/s; with the mean 1250-byte payload
        // that works out to rate/10^4 frames per second per station.
        return 1e10 / cfg_.traffic.rate;
    }

    void arm_backoff(Sta& s) {
        // A zero draw would fire exactly when a SIFS-priority continuation is
        // due; the residual slot keeps those starts structurally distinct.
        s.mac.backoff = std::max<std::uint32_t>(1, backoff_draw(s.mac.cw, rng_));
        s.count_from = now_;
    }

    void enqueue_background(Sta& s) {
        PendingFrame pf;
        pf.payload_len = static_cast<std::uint32_t>(500 + rng_.below(1501));
        pf.dest = background_dest(s.mac.id);
        pf.kind = FrameKind::data;
        s.mac.queue.push_back(std::move(pf));
    }

    StationId background_dest(StationId i) const {
        const unsigned n = cfg_.traffic.n_background;
        if (n <= 1) return kBob;
        return kFirstBackground + ((i - kFirstBackground + 1) % n);
    }

    // ---- scheduling algebra ---------------------------------------------------

    usec close_anchor(const Cluster& c) const {
        // A lone decodable ACK carries its own closure; anything else leaves
        // the observer deferring through the ACK exchange it could not read.
        return c.end + (c.single_ack ? 0 : cfg_.mac.sifs + cfg_.mac.ack_duration);
    }

    usec anchor_eff(const Sta& s) const {
        return s.cluster.pending_close ? std::max(s.anchor, close_anchor(s.cluster)) : s.anchor;
    }

    bool contention_eligible(const Sta& s) const {
        return !s.mac.queue.empty() && !s.scheduled_start && !s.transmitting &&
               s.awaiting_tag == 0 && !s.cluster.open;
    }

    usec fire_time(const Sta& s) const {
        const usec lattice = anchor_eff(s) + cfg_.mac.difs;
        usec f = std::max(anchor_eff(s), s.count_from) + cfg_.mac.difs +
                 static_cast<usec>(s.mac.backoff) * cfg_.mac.slot;
        const usec off = (f - lattice) % cfg_.mac.slot;
        if (s.mac.backoff == 0) {
            // Priority access (zero-slot draw): seize the medium a DIFS after
            // the request. Slot boundaries belong to counting stations, so a
            // boundary hit steps off the lattice instead of inviting a tie.
            if (f > lattice && off == 0) ++f;
        } else if (off != 0) {
            // Carrier sense is slot-grained: countdowns begun mid-slot align
            // to the boundary lattice shared by every station.
            f += cfg_.mac.slot - off;
        }
        return f;
    }

    // ---- main loop --------------------------------------------------------------

    void loop() {
        usec dbg_last_t = std::numeric_limits<usec>::max();
        int dbg_same = 0;  // progress guard: same-instant step counter
        while (true) {
            usec t = horizon_;
            for (const auto& s : sta_) {
                if (contention_eligible(s)) t = std::min(t, std::max(fire_time(s), now_));
                if (s.scheduled_start && !s.transmitting)
                    t = std::min(t, std::max(*s.scheduled_start, now_));
                if (s.next_arrival) t = std::min(t, s.next_arrival);
            }
            for (const auto& [tag, ef] : air_) t = std::min(t, ef.f.end());
            if (!planned_.empty()) t = std::min(t, std::max(planned_.top().start, now_));
            if (!timers_.empty()) t = std::min(t, timers_.top().at);
            if (t >= horizon_) break;

            if (t != dbg_last_t) {
                dbg_last_t = t;
                dbg_same = 0;
            } else if (++dbg_same > 4096) {
                // A bounded number of same-instant steps is normal (reactive
                // frames, zero inter-arrival draws); an unbounded run means the
                // scheduling algebra stopped consuming events.
                throw std::logic_error("scheduler made no progress at t=" + std::to_string(t));
            }

            // Decide contention fires against pre-step state: a transmission
            // beginning this same microsecond cannot be carrier-sensed.
            std::vector<StationId> fire_set;
            for (const auto& s : sta_)
                if (contention_eligible(s) && fire_time(s) == t) fire_set.push_back(s.mac.id);

            now_ = t;
            settle_clusters(t);
            process_frame_ends(t);
            process_timers(t);
            start_frames(t, collect_starts(t, fire_set));
        }
    }

    // Phase 0: close busy periods that ended strictly earlier, and let the
    // classifiers resolve anything that elapsed idle time has decided.
    void settle_clusters(usec t) {
        for (auto& s : sta_)
            if (s.cluster.pending_close && s.cluster.end < t) finalize_cluster(s);
        for (auto& [ob, cls] : classifiers_) {
            const Sta& s = sta_[ob];
            if (s.cluster.open || s.cluster.pending_close) continue;  // still busy
            for (auto& o : cls.settle(t)) emit_outcome(ob, o);
        }
    }

    void finalize_cluster(Sta& s) {
        Cluster& c = s.cluster;
        s.anchor = std::max(s.anchor, close_anchor(c));
        auto tr = out_.traces.find(s.mac.id);
        if (tr != out_.traces.end()) {
            tr->second.add_busy(c.start, c.end);
            if (record_) {
                out_.log.add(c.start, "busy_start", s.mac.id, -1, 0, "");
                out_.log.add(c.end, "busy_end", s.mac.id, -1, 0, "");
            }
        }
        auto cl = classifiers_.find(s.mac.id);
        if (cl != classifiers_.end()) {
            std::optional<StationId> src;
            if (c.frames == 1 && !c.undecodable && !is_ack_kind(c.first_kind) &&
                c.first_kind != FrameKind::jam)
                src = c.first_claimed;
            for (auto& o : cl->second.on_busy(c.start, c.end, src, c.decoded_by_me))
                emit_outcome(s.mac.id, o);
        }
        c = Cluster{};
    }

    void emit_outcome(StationId ob, const TransmissionOutcome& o) {
        out_.outcomes[ob].push_back(o);
        if (record_) out_.log.add(o.start, "outcome", ob, -1, o.duration, to_string(o.kind));
        if (!out_.protocol_ran) return;
        PartyEvent ev;
        ev.kind = PartyEvent::Kind::outcome_observed;
        ev.now = now_;
        ev.outcome = o;
        if (ob == kAlice) dispatch(kAlice, out_.alice.step(ev));
        else if (ob == kBob) dispatch(kBob, out_.bob.step(ev));
    }

    // Phase 1: frames leaving the air.
    void process_frame_ends(usec t) {
        std::vector<std::uint64_t> ended;
        for (const auto& [tag, ef] : air_)
            if (ef.f.end() == t) ended.push_back(tag);

        for (auto tag : ended) {
            Etherframe ef = std::move(air_.at(tag));
            air_.erase(tag);
            const FrameOnAir& f = ef.f;

            for (auto& s : sta_) {
                if (!heard(s, f)) continue;
                if (--s.cluster.heard_active == 0) {
                    s.cluster.open = false;
                    s.cluster.pending_close = true;
                    s.cluster.end = t;
                }
            }

            if (f.origin != kAttacker) sender_tx_done(sta_[f.origin], f, tag, t);

            const bool data_class = f.kind == FrameKind::data ||
                                    f.kind == FrameKind::key_exchange ||
                                    f.kind == FrameKind::forged_data;
            const bool delivered =
                f.dest && f.kind != FrameKind::jam && decodable_at(ef, *f.dest);

            if (record_)
                out_.log.add(t, std::string(to_string(f.kind)) + "_end", f.sender,
                             f.dest ? static_cast<std::int64_t>(*f.dest) : -1, f.payload_len,
                             f.kind == FrameKind::jam ? "" : (delivered ? "delivered" : "corrupted"));
            out_.frames.push_back(
                {f.start, t, f.kind, f.origin, f.sender, f.dest, f.payload_len, delivered});

            if (delivered && data_class) {
                // The receiver is about to transmit the ACK and will be deaf to
                // it, so its classifier never sees the data+ACK pattern. Mark
                // the busy period it just heard as a decoded frame instead.
                Sta& d = sta_[*f.dest];
                if (classifiers_.count(*f.dest) && d.cluster.frames == 1 &&
                    (d.cluster.open || d.cluster.pending_close))
                    d.cluster.decoded_by_me = true;
                FrameOnAir ack;  // MAC-level acknowledgement to the claimed sender
                ack.sender = *f.dest;
                ack.origin = *f.dest;
                ack.dest = f.sender;
                ack.kind = FrameKind::ack;
                ack.duration = cfg_.mac.ack_duration;
                ack.audible_to = all_mask_;
                ack.start = t + cfg_.mac.sifs;
                planned_.push({ack.start, next_seq_++, std::move(ack)});
                deliver_to_role(*f.dest, f, t);
            }
            if (delivered && is_ack_kind(f.kind)) accept_ack(*f.dest, t);

            notify_attacker_end(f, t);
        }
    }

    bool heard(const Sta& s, const FrameOnAir& f) const {
        return hears(f.audible_to, s.mac.id) && f.origin != s.mac.id &&
               !deaf_.count(deaf_key(s.mac.id, f.tag));
    }

    void sender_tx_done(Sta& s, const FrameOnAir& f, std::uint64_t tag, usec t) {
        s.transmitting = false;
        s.anchor = std::max(
            s.anchor, t + (is_ack_kind(f.kind) ? 0 : cfg_.mac.sifs + cfg_.mac.ack_duration));

        const bool data_class = f.kind == FrameKind::data ||
                                f.kind == FrameKind::key_exchange ||
                                f.kind == FrameKind::forged_data;
        if (data_class) {
            s.awaiting_tag = tag;
            timers_.push({t + cfg_.mac.ack_timeout(), next_seq_++, 0, s.mac.id, tag, {}});
        }

        // Resume carrier sense: frames that began during our transmission are
        // raw energy to us (no preamble seen), but they still hold the medium.
        int live = 0;
        for (auto& [tag2, ef2] : air_) {
            if (ef2.f.end() <= t) continue;
            if (!hears(ef2.f.audible_to, s.mac.id) || ef2.f.origin == s.mac.id) continue;
            deaf_.erase(deaf_key(s.mac.id, ef2.f.tag));
            ++live;
        }
        if (live > 0) {
            if (s.cluster.pending_close) finalize_cluster(s);
            Cluster& c = s.cluster;
            c.open = true;
            c.start = t;
            c.frames = static_cast<unsigned>(live);
            c.heard_active = live;
            c.single_ack = false;
            c.undecodable = true;
        }
    }

    bool decodable_at(const Etherframe& ef, StationId d) const {
        const FrameOnAir& f = ef.f;
        if (!hears(f.audible_to, d) || f.origin == d) return false;
        if (deaf_.count(deaf_key(d, f.tag))) return false;
        for (const auto& ov : ef.overlaps)
            if (ov.origin == d || hears(ov.audible, d)) return false;
        return true;
    }

    void deliver_to_role(StationId dest, const FrameOnAir& f, usec t) {
        if (!out_.protocol_ran) return;
        if (f.kind != FrameKind::key_exchange && f.kind != FrameKind::forged_data) return;
        if (dest != kAlice && dest != kBob) return;
        PartyEvent ev;
        ev.kind = PartyEvent::Kind::frame_delivered;
        ev.now = t;
        ev.from = f.sender;
        ev.payload = f.payload;
        dispatch(dest, dest == kAlice ? out_.alice.step(ev) : out_.bob.step(ev));
    }

    void accept_ack(StationId dest, usec t) {
        Sta& s = sta_[dest];
        if (s.awaiting_tag == 0) return;
        s.awaiting_tag = 0;
        const bool was_protocol =
            !s.mac.queue.empty() && s.mac.queue.front().kind == FrameKind::key_exchange;
        on_tx_success(s.mac, cfg_.mac);
        after_queue_pop(s);
        if (was_protocol && out_.protocol_ran && (dest == kAlice || dest == kBob)) {
            PartyEvent ev;
            ev.kind = PartyEvent::Kind::ack_received;
            ev.now = t;
            dispatch(dest, dest == kAlice ? out_.alice.step(ev) : out_.bob.step(ev));
        }
    }

    void after_queue_pop(Sta& s) {
        if (s.mac.mode == TrafficMode::saturated && s.mac.queue.empty()) enqueue_background(s);
        if (!s.mac.queue.empty() && !s.scheduled_start) arm_backoff(s);
    }

    // Phase 2: timers and traffic arrivals.
    void process_timers(usec t) {
        while (!timers_.empty() && timers_.top().at == t) {
            Timer tm = timers_.top();
            timers_.pop();
            if (tm.kind == 0) handle_ack_timeout(tm, t);
            else handle_role_timer(tm, t);
        }
        for (auto& s : sta_)
            if (s.next_arrival == t) handle_arrival(s, t);
    }

    void handle_ack_timeout(const Timer& tm, usec t) {
        Sta& s = sta_[tm.station];
        if (s.awaiting_tag != tm.tag) return;  // acknowledged in time
        s.awaiting_tag = 0;
        if (record_) out_.log.add(t, "timer", tm.station, -1, 0, "ack_timeout");
        const bool was_protocol =
            !s.mac.queue.empty() && s.mac.queue.front().kind == FrameKind::key_exchange;
        s.scheduled_start.reset();  // retransmissions contend normally
        if (on_tx_failure(s.mac, cfg_.mac)) {
            arm_backoff(s);
            return;
        }
        after_queue_pop(s);
        if (was_protocol && out_.protocol_ran && (tm.station == kAlice || tm.station == kBob)) {
            PartyEvent ev;
            ev.kind = PartyEvent::Kind::ack_missing;
            ev.now = t;
            dispatch(tm.station,
                     tm.station == kAlice ? out_.alice.step(ev) : out_.bob.step(ev));
        }
    }

    void handle_role_timer(const Timer& tm, usec t) {
        if (!out_.protocol_ran) return;
        if (record_) out_.log.add(t, "timer", tm.station, -1, 0, tm.label);
        PartyEvent ev;
        ev.now = t;
        if (tm.label == "associate") {
            ev.kind = PartyEvent::Kind::association_done;
        } else {
            ev.kind = PartyEvent::Kind::timer_fired;
            ev.timer_label = tm.label;
        }
        dispatch(tm.station, tm.station == kAlice ? out_.alice.step(ev) : out_.bob.step(ev));
    }

    void handle_arrival(Sta& s, usec t) {
        const usec next = t + rng_.exp_us(mean_interarrival_us());
        s.next_arrival = next < horizon_ ? next : 0;

        const bool idle_station = s.mac.queue.empty() && s.awaiting_tag == 0 && !s.transmitting;
        enqueue_background(s);
        if (!idle_station) return;
        if (!s.cluster.open && !s.cluster.pending_close && t > s.anchor + cfg_.mac.difs) {
            // Medium idle past DIFS: send at once. Carrier sense is slot-grained,
            // so the frame leaves at the next boundary of the contention grid;
            // two arrivals inside one slot both see idle and collide.
            const usec base = s.anchor + cfg_.mac.difs;
            const usec k = (t - base + cfg_.mac.slot - 1) / cfg_.mac.slot;
            s.scheduled_start = base + k * cfg_.mac.slot;
        } else {
            arm_backoff(s);
        }
    }

    void dispatch(StationId who, const std::vector<PartyAction>& actions) {
        Sta& s = sta_[who];
        for (const auto& a : actions) {
            switch (a.kind) {
                case PartyAction::Kind::arm_timer:
                    timers_.push({a.at, next_seq_++, 1, who, 0, a.timer_label});
                    break;
                case PartyAction::Kind::send_frame: {
                    PendingFrame pf;
                    pf.payload_len = static_cast<std::uint32_t>(a.payload.size());
                    pf.dest = a.dest;
                    pf.kind = FrameKind::key_exchange;
                    pf.payload = a.payload;
                    if (a.override_backoff) {
                        s.mac.queue.push_front(std::move(pf));
                        s.scheduled_start.reset();
                        s.mac.backoff = 0;  // priority access: no contention slots
                        s.count_from = now_;
                    } else {
                        s.mac.queue.push_back(std::move(pf));
                        if (s.mac.queue.size() == 1 && s.awaiting_tag == 0 && !s.transmitting)
                            arm_backoff(s);
                    }
                    break;
                }
                case PartyAction::Kind::cancel_sends:
                    s.mac.queue.clear();
                    s.scheduled_start.reset();
                    break;
                case PartyAction::Kind::raise_alarm:
                    if (record_)
                        out_.log.add(now_, "alarm", who, -1, 0, "rule" + std::to_string(a.rule));
                    break;
                case PartyAction::Kind::install_key:
                    if (record_) out_.log.add(now_, "key_install", who, -1, 0, "installed");
                    break;
            }
        }
    }

    // Phase 3: everything that begins radiating now.
    std::vector<FrameOnAir> collect_starts(usec t, const std::vector<StationId>& fire_set) {
        std::vector<FrameOnAir> batch;
        while (!planned_.empty() && planned_.top().start <= t) {
            batch.push_back(planned_.top().f);
            batch.back().start = t;
            planned_.pop();
        }
        for (auto& s : sta_) {
            if (s.scheduled_start && *s.scheduled_start <= t && !s.transmitting) {
                s.scheduled_start.reset();
                // Someone seized an earlier slot: a slot-grained sensor sees
                // that busy before its own boundary arrives, so defer.
                if (s.cluster.open || s.cluster.pending_close) arm_backoff(s);
                else batch.push_back(frame_from_queue(s, t));
            }
        }
        for (StationId id : fire_set) {
            Sta& s = sta_[id];
            if (s.mac.queue.empty() || s.transmitting || s.awaiting_tag != 0 ||
                s.scheduled_start)
                continue;
            batch.push_back(frame_from_queue(s, t));
        }
        return batch;
    }

    FrameOnAir frame_from_queue(Sta& s, usec t) {
        const PendingFrame& pf = s.mac.queue.front();
        FrameOnAir f;
        f.sender = s.mac.id;
        f.origin = s.mac.id;
        f.dest = pf.dest;
        f.payload_len = pf.payload_len;
        f.kind = pf.kind;
        f.start = t;
        f.duration = air_time(pf.payload_len, cfg_.mac);
        f.audible_to = all_mask_;
        f.payload = pf.payload;
        return f;
    }

    void start_frames(usec t, std::vector<FrameOnAir> batch) {
        while (!batch.empty()) {
            std::vector<FrameOnAir> round = std::move(batch);
            batch.clear();
            // Transmitters go deaf before anyone resolves what they hear.
            for (auto& f : round) {
                f.tag = next_tag_++;
                if (f.origin != kAttacker) {
                    sta_[f.origin].transmitting = true;
                    sta_[f.origin].tx_end = t + f.duration;
                }
            }
            for (auto& f : round) {
                for (auto& s : sta_) {
                    if (s.mac.id == f.origin || !hears(f.audible_to, s.mac.id)) continue;
                    if (s.transmitting) deaf_.insert(deaf_key(s.mac.id, f.tag));
                    else open_cluster(s, f, t);
                }
                Etherframe ef;
                ef.f = f;
                for (auto& [tag, other] : air_) {
                    other.overlaps.push_back({f.audible_to, f.origin});
                    ef.overlaps.push_back({other.f.audible_to, other.f.origin});
                }
                air_.emplace(f.tag, std::move(ef));
                if (record_)
                    out_.log.add(t, std::string(to_string(f.kind)) + "_start", f.sender,
                                 f.dest ? static_cast<std::int64_t>(*f.dest) : -1,
                                 f.payload_len, "");
            }
            for (std::size_t i = 0; i < round.size(); ++i)
                for (std::size_t j = 0; j < round.size(); ++j)
                    if (i != j)
                        air_.at(round[i].tag)
                            .overlaps.push_back({round[j].audible_to, round[j].origin});
            // The adversary reacts to frame starts instantly; same-instant
            // jams join the air on the next pass of this loop.
            for (auto& f : round) {
                for (auto& r : attacker_reactions(f, t)) {
                    if (r.start <= t) {
                        r.start = t;
                        batch.push_back(std::move(r));
                    } else {
                        planned_.push({r.start, next_seq_++, std::move(r)});
                    }
                }
            }
        }
    }

    void open_cluster(Sta& s, const FrameOnAir& f, usec t) {
        Cluster& c = s.cluster;
        if (c.pending_close && c.end == t) {
            c.open = true;  // contiguous busy: same period
            c.pending_close = false;
            ++c.frames;
            c.single_ack = false;
            ++c.heard_active;
            return;
        }
        if (c.pending_close) finalize_cluster(s);
        if (!c.open) {
            freeze_backoff(s, t);
            c.open = true;
            c.start = t;
            c.frames = 1;
            c.first_kind = f.kind;
            c.first_claimed = f.sender;
            c.single_ack = is_ack_kind(f.kind);
            c.undecodable = false;
            c.heard_active = 1;
        } else {
            ++c.frames;
            c.single_ack = false;
            ++c.heard_active;
        }
    }

    void freeze_backoff(Sta& s, usec busy_start) {
        if (s.mac.queue.empty() || s.transmitting || s.awaiting_tag != 0 || s.scheduled_start)
            return;
        const usec cd_start = std::max(s.anchor, s.count_from) + cfg_.mac.difs;
        if (busy_start <= cd_start) return;
        const usec elapsed = (busy_start - cd_start) / cfg_.mac.slot;
        const std::uint32_t cap = s.mac.backoff > 0 ? s.mac.backoff - 1 : 0;
        s.mac.backoff -= static_cast<std::uint32_t>(std::min<usec>(elapsed, cap));
    }

    // ---- attacker plumbing ----------------------------------------------------

    std::vector<FrameOnAir> attacker_reactions(const FrameOnAir& f, usec t) {
        std::vector<FrameOnAir> out;
        if (!attack_on_ || f.origin == kAttacker) return out;
        AttackerEvent ev;
        ev.kind = AttackerEvent::Kind::frame_start;
        ev.now = t;
        ev.sender = f.sender;
        ev.dest = f.dest;
        ev.fkind = f.kind;
        ev.start = f.start;
        ev.duration = f.duration;
        for (auto& a : out_.attacker.step(ev)) out.push_back(action_to_frame(a));
        return out;
    }

    void notify_attacker_end(const FrameOnAir& f, usec t) {
        if (!attack_on_ || f.origin == kAttacker) return;
        AttackerEvent ev;
        ev.kind = AttackerEvent::Kind::frame_end;
        ev.now = t;
        ev.sender = f.sender;
        ev.dest = f.dest;
        ev.fkind = f.kind;
        ev.start = f.start;
        ev.duration = f.duration;
        ev.payload = f.payload;
        for (auto& a : out_.attacker.step(ev)) {
            auto fr = action_to_frame(a);
            planned_.push({fr.start, next_seq_++, std::move(fr)});
        }
    }

    FrameOnAir action_to_frame(const AttackerAction& a) {
        FrameOnAir f;
        f.sender = a.claimed_sender;
        f.origin = kAttacker;
        f.dest = a.dest;
        f.kind = a.kind;
        f.start = a.start;
        f.payload = a.payload;
        f.payload_len = static_cast<std::uint32_t>(a.payload.size());
        if (a.kind == FrameKind::forged_ack) f.duration = cfg_.mac.ack_duration;
        else if (!a.payload.empty()) f.duration = air_time(f.payload_len, cfg_.mac);
        else f.duration = a.duration;
        f.audible_to = a.audible;
        return f;
    }

    // ---- teardown ---------------------------------------------------------------

    void finish() {
        now_ = horizon_;
        for (auto& s : sta_) {
            if (s.cluster.open) {  // cut mid-frame at the horizon
                s.cluster.end = horizon_;
                s.cluster.pending_close = true;
            }
            if (s.cluster.pending_close) finalize_cluster(s);
        }
        for (auto& [ob, cls] : classifiers_)
            for (auto& o : cls.finish(horizon_)) emit_outcome(ob, o);
        for (auto& [ob, tr] : out_.traces) tr.close(horizon_);
    }
};

inline RunOutput run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                              bool record_events = false) {
    SimEngine engine(cfg, seed, record_events);
    return engine.run();
}

}  // namespace pairsim
