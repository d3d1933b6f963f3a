#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pairsim/dh.hpp"
#include "pairsim/frame.hpp"
#include "pairsim/mac_params.hpp"
#include "pairsim/message.hpp"

namespace pairsim {

enum class AttackKind : std::uint8_t { none, type1, type2, long_jam, partial_jam };

inline const char* to_string(AttackKind k) {
    switch (k) {
        case AttackKind::none: return "none";
        case AttackKind::type1: return "type1";
        case AttackKind::type2: return "type2";
        case AttackKind::long_jam: return "long_jam";
        case AttackKind::partial_jam: return "partial_jam";
    }
    return "?";
}

inline AttackKind attack_kind_from_string(const std::string& s) {
    if (s == "none") return AttackKind::none;
    if (s == "type1") return AttackKind::type1;
    if (s == "type2") return AttackKind::type2;
    if (s == "long_jam") return AttackKind::long_jam;
    if (s == "partial_jam") return AttackKind::partial_jam;
    throw std::invalid_argument("attacker config: unknown attacker.strategy '" + s + "'");
}

struct AttackerStrategy {
    AttackKind kind = AttackKind::none;
    unsigned skip = 3;           // partial_jam: 1-based index of the frame left unjammed
    bool preamble_only = false;  // jam just the first 10 us of a frame
    u64 a_secret = 0;            // impersonates Alice toward Bob with g^a'
    u64 b_secret = 0;            // impersonates Bob toward Alice with g^b'
};

constexpr usec kPreambleJam = 10;

// What the omniscient eavesdropper is told about medium activity. Payload is
// populated on frame_end (content is known once fully transmitted).
struct AttackerEvent {
    enum class Kind { frame_start, frame_end };
    Kind kind;
    usec now = 0;
    StationId sender = 0;  // claimed sender
    std::optional<StationId> dest;
    FrameKind fkind = FrameKind::data;
    usec start = 0;
    usec duration = 0;
    std::vector<std::uint8_t> payload;
};

// A frame the attacker wants on the air at `start` (>= now).
struct AttackerAction {
    FrameKind kind = FrameKind::jam;
    usec start = 0;
    usec duration = 0;  // jams only; other kinds derive duration from payload
    StationId claimed_sender = 0;
    std::optional<StationId> dest;
    std::vector<std::uint8_t> payload;
    StationSet audible = 0;
};

// Event-driven MITM. Phases mirror the numbered attack steps: watch_a jams the
// initiator's burst while forging ACKs back to her, forge_to_bob /
// forge_to_alice feed each victim a fabricated burst, watch_b jams the
// responder's real burst. type1 runs a-side then b-side in message order;
// type2 completes the Alice-facing session before touching Bob.
class AttackerMachine {
  public:
    AttackerMachine() = default;
    AttackerMachine(AttackerStrategy strategy, DhGroup group, MacParams mac, StationId self,
                    StationId alice, StationId bob, StationSet all_stations)
        : strat_(strategy), group_(group), mac_(mac), self_(self), alice_(alice), bob_(bob),
          all_(all_stations) {
        if (strat_.kind != AttackKind::none) {
            forged_to_bob_pub_ = dh_public(group_, strat_.a_secret);
            forged_to_alice_pub_ = dh_public(group_, strat_.b_secret);
        }
        phase_ = strat_.kind == AttackKind::none ? Phase::done : Phase::watch_a;
    }

    std::vector<AttackerAction> step(const AttackerEvent& ev) {
        std::vector<AttackerAction> out;
        if (phase_ == Phase::done) return out;
        if (ev.kind == AttackerEvent::Kind::frame_start) on_start(ev, out);
        else on_end(ev, out);
        return out;
    }

    // Session keys the MITM ends up sharing with each victim (0 until the
    // victim's public value has been observed).
    u64 key_with_alice() const { return g_a_ ? modexp(g_a_, strat_.b_secret, group_.p) : 0; }
    u64 key_with_bob() const { return g_b_ ? modexp(g_b_, strat_.a_secret, group_.p) : 0; }
    unsigned learned_m() const { return m_; }
    bool finished() const { return phase_ == Phase::done; }

  private:
    enum class Phase : std::uint8_t { watch_a, forge_to_alice, forge_to_bob, watch_b, done };

    usec jam_len(usec frame_duration) const {
        return strat_.preamble_only ? std::min(kPreambleJam, frame_duration) : frame_duration;
    }

    void jam(usec start, usec duration, StationSet audible, std::vector<AttackerAction>& out) {
        out.push_back({FrameKind::jam, start, duration, self_, std::nullopt, {}, audible});
    }

    void forged_ack(usec start, StationId to, StationId claimed, std::vector<AttackerAction>& out) {
        out.push_back({FrameKind::forged_ack, start, mac_.ack_duration, claimed, to, {},
                       station_bit(to)});
    }

    void forged_msg(usec start, StationId to, StationId claimed, u64 pub, unsigned index,
                    std::vector<AttackerAction>& out) {
        out.push_back({FrameKind::forged_data, start, 0, claimed, to,
                       build_message(static_cast<std::uint16_t>(index),
                                     static_cast<std::uint16_t>(m_), encode_be(pub)),
                       all_ & ~station_bit(claimed)});
    }

    void on_start(const AttackerEvent& ev, std::vector<AttackerAction>& out) {
        if (ev.fkind == FrameKind::key_exchange && ev.sender == alice_ && phase_ == Phase::watch_a) {
            ++a_started_;
            switch (strat_.kind) {
                case AttackKind::long_jam:
                    if (a_started_ == 1) {
                        // One continuous burst spanning this frame, the
                        // inter-message gap, and the next frame.
                        const usec span = ev.duration + mac_.ack_gap() + ev.duration;
                        jam(ev.now, span, all_ & ~station_bit(alice_), out);
                        forged_ack(ev.now + ev.duration + mac_.sifs, alice_, bob_, out);
                        forged_ack(ev.now + span + mac_.sifs, alice_, bob_, out);
                    }
                    break;
                case AttackKind::partial_jam:
                    if (a_started_ != strat_.skip) {
                        jam(ev.now, jam_len(ev.duration), all_ & ~station_bit(alice_), out);
                        forged_ack(ev.now + ev.duration + mac_.sifs, alice_, bob_, out);
                    }
                    break;
                default:  // type1 / type2
                    jam(ev.now, jam_len(ev.duration), all_ & ~station_bit(alice_), out);
                    forged_ack(ev.now + ev.duration + mac_.sifs, alice_, bob_, out);
                    break;
            }
            return;
        }
        if (ev.fkind == FrameKind::key_exchange && ev.sender == bob_ && phase_ == Phase::watch_b) {
            jam(ev.now, jam_len(ev.duration), all_ & ~station_bit(bob_), out);
            forged_ack(ev.now + ev.duration + mac_.sifs, bob_, alice_, out);
            return;
        }
        // Victims' genuine MAC ACKs answering our forged bursts leak the
        // deception to the impersonated party; suppress them directionally.
        if (ev.fkind == FrameKind::ack && ev.sender == bob_ && phase_ == Phase::forge_to_bob)
            jam(ev.now, jam_len(ev.duration), station_bit(alice_), out);
        if (ev.fkind == FrameKind::ack && ev.sender == alice_ && phase_ == Phase::forge_to_alice)
            jam(ev.now, jam_len(ev.duration), station_bit(bob_), out);
    }

    void on_end(const AttackerEvent& ev, std::vector<AttackerAction>& out) {
        if (ev.fkind == FrameKind::key_exchange) {
            ProtocolMessage msg = parse_message(ev.payload);
            if (ev.sender == alice_) {
                g_a_ = decode_be(msg.public_value);
                m_ = msg.repetitions;
                if (phase_ == Phase::watch_a) a_ended_ = msg.index;
            } else if (ev.sender == bob_) {
                g_b_ = decode_be(msg.public_value);
                if (phase_ == Phase::watch_b) ++b_ended_;
            }
            if (phase_ == Phase::watch_a && strat_.kind == AttackKind::long_jam) {
                if (a_ended_ >= 2) phase_ = Phase::done;
            } else if (phase_ == Phase::watch_a && a_ended_ == m_ && m_ > 0) {
                advance_after_watch_a(ev.now, out);
            } else if (phase_ == Phase::watch_b && b_ended_ == m_) {
                phase_ = (strat_.kind == AttackKind::type1) ? Phase::forge_to_alice : Phase::done;
                if (phase_ == Phase::forge_to_alice) {
                    forge_idx_ = 1;
                    forged_msg(ev.now + mac_.ack_gap(), alice_, bob_, forged_to_alice_pub_, 1, out);
                }
            }
            return;
        }
        if (ev.fkind != FrameKind::ack) return;
        // A victim ACKed one of our forged frames: continue the burst.
        if (phase_ == Phase::forge_to_bob && ev.sender == bob_) {
            if (forge_idx_ < m_) {
                ++forge_idx_;
                forged_msg(ev.now + mac_.difs, bob_, alice_, forged_to_bob_pub_, forge_idx_, out);
            } else {
                phase_ = strat_.kind == AttackKind::partial_jam ? Phase::done : Phase::watch_b;
            }
        } else if (phase_ == Phase::forge_to_alice && ev.sender == alice_) {
            if (forge_idx_ < m_) {
                ++forge_idx_;
                forged_msg(ev.now + mac_.difs, alice_, bob_, forged_to_alice_pub_, forge_idx_, out);
            } else if (strat_.kind == AttackKind::type2) {
                phase_ = Phase::forge_to_bob;
                forge_idx_ = 1;
                forged_msg(ev.now + mac_.difs, bob_, alice_, forged_to_bob_pub_, 1, out);
            } else {
                phase_ = Phase::done;
            }
        }
    }

    void advance_after_watch_a(usec now, std::vector<AttackerAction>& out) {
        switch (strat_.kind) {
            case AttackKind::type2:
                phase_ = Phase::forge_to_alice;
                forge_idx_ = 1;
                forged_msg(now + mac_.ack_gap(), alice_, bob_, forged_to_alice_pub_, 1, out);
                break;
            default:  // type1, partial_jam
                phase_ = Phase::forge_to_bob;
                forge_idx_ = 1;
                forged_msg(now + mac_.ack_gap(), bob_, alice_, forged_to_bob_pub_, 1, out);
                break;
        }
    }

    AttackerStrategy strat_;
    DhGroup group_;
    MacParams mac_;
    StationId self_ = 0, alice_ = 0, bob_ = 0;
    StationSet all_ = 0;
    Phase phase_ = Phase::done;
    unsigned m_ = 0;
    unsigned a_started_ = 0;   // initiator frames seen starting in watch_a
    unsigned a_ended_ = 0;     // highest initiator message index fully read
    unsigned b_ended_ = 0;
    unsigned forge_idx_ = 0;
    u64 g_a_ = 0, g_b_ = 0;
    u64 forged_to_bob_pub_ = 0, forged_to_alice_pub_ = 0;
};

// Pure-transition view: (state, event) -> (state', actions).
inline std::pair<AttackerMachine, std::vector<AttackerAction>> attacker_step(
    const AttackerMachine& state, const AttackerEvent& ev) {
    AttackerMachine next = state;
    auto actions = next.step(ev);
    return {std::move(next), std::move(actions)};
}

}  // namespace pairsim
