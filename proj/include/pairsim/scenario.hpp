#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>

#include <json.hpp>

#include "pairsim/adversary.hpp"
#include "pairsim/dh.hpp"
#include "pairsim/mac_params.hpp"
#include "pairsim/pairing.hpp"
#include "pairsim/station.hpp"

namespace pairsim {

struct TrafficConfig {
    unsigned n_background = 5;
    TrafficMode mode = TrafficMode::saturated;
    double rate = 2e6;  // payload bits per second per station (poisson mode)
};

struct ScenarioConfig {
    MacParams mac;
    TrafficConfig traffic;
    PairingConfig protocol;
    bool protocol_enabled = true;
    DhGroup dh = default_group();
    AttackerStrategy attacker;
    double duration_s = 2.0;
    double warmup_s = 0.1;
    unsigned replications = 1;
    std::uint64_t base_seed = 1;
    unsigned monitor_m = 4;  // detector threshold of the silent observer

    usec duration_us() const { return static_cast<usec>(duration_s * 1e6); }
    usec warmup_us() const { return static_cast<usec>(warmup_s * 1e6); }
};

inline void validate(const ScenarioConfig& cfg) {
    validate(cfg.mac);
    validate(cfg.dh);
    if (cfg.protocol_enabled) {
        validate(cfg.protocol);
        if (cfg.warmup_s + cfg.protocol.T_s >= cfg.duration_s)
            throw std::invalid_argument(
                "scenario config: duration must exceed warmup_s + protocol.T_s");
    }
    if (cfg.duration_s <= 0) throw std::invalid_argument("scenario config: duration must be > 0");
    if (cfg.replications < 1)
        throw std::invalid_argument("scenario config: replications must be >= 1");
    if (cfg.traffic.mode == TrafficMode::poisson && cfg.traffic.rate <= 0)
        throw std::invalid_argument("scenario config: traffic.rate must be > 0");
    if (cfg.monitor_m < 1) throw std::invalid_argument("scenario config: monitor.m must be >= 1");
    if (cfg.traffic.n_background > 60)
        throw std::invalid_argument("scenario config: traffic.n_background must be <= 60");
    if (cfg.attacker.kind == AttackKind::partial_jam && cfg.attacker.skip < 1)
        throw std::invalid_argument("scenario config: attacker.skip must be >= 1");
}

// Reads a JSON config document. Unknown keys are rejected so typos surface as
// config errors instead of silently keeping defaults.
inline ScenarioConfig load_scenario(const nlohmann::json& j) {
    ScenarioConfig cfg;
    auto section = [&](const char* name) -> nlohmann::json {
        return j.contains(name) ? j.at(name) : nlohmann::json::object();
    };
    auto check_keys = [](const nlohmann::json& obj, const std::string& prefix,
                         const std::set<std::string>& allowed) {
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!allowed.count(it.key()))
                throw std::invalid_argument("scenario config: unknown key " + prefix + it.key());
    };

    check_keys(j, "", {"mac", "traffic", "protocol", "dh", "attacker", "monitor", "duration",
                       "warmup_s", "replications", "base_seed"});

    auto mac = section("mac");
    check_keys(mac, "mac.", {"slot", "difs", "sifs", "ack_duration", "cw_min", "beta",
                             "retry_limit", "bitrate", "phy_overhead"});
    if (mac.contains("slot")) cfg.mac.slot = mac.at("slot").get<usec>();
    if (mac.contains("difs")) cfg.mac.difs = mac.at("difs").get<usec>();
    if (mac.contains("sifs")) cfg.mac.sifs = mac.at("sifs").get<usec>();
    if (mac.contains("ack_duration")) cfg.mac.ack_duration = mac.at("ack_duration").get<usec>();
    if (mac.contains("cw_min")) cfg.mac.cw_min = mac.at("cw_min").get<std::uint32_t>();
    if (mac.contains("beta")) cfg.mac.beta = mac.at("beta").get<std::uint32_t>();
    if (mac.contains("retry_limit")) cfg.mac.retry_limit = mac.at("retry_limit").get<std::uint32_t>();
    if (mac.contains("bitrate")) cfg.mac.bitrate = mac.at("bitrate").get<std::uint64_t>();
    if (mac.contains("phy_overhead")) cfg.mac.phy_overhead = mac.at("phy_overhead").get<usec>();

    auto traffic = section("traffic");
    check_keys(traffic, "traffic.", {"n_background", "mode", "rate"});
    if (traffic.contains("n_background"))
        cfg.traffic.n_background = traffic.at("n_background").get<unsigned>();
    if (traffic.contains("mode")) {
        const std::string mode = traffic.at("mode").get<std::string>();
        if (mode == "saturated") cfg.traffic.mode = TrafficMode::saturated;
        else if (mode == "poisson") cfg.traffic.mode = TrafficMode::poisson;
        else throw std::invalid_argument("scenario config: traffic.mode must be saturated|poisson");
    }
    if (traffic.contains("rate")) cfg.traffic.rate = traffic.at("rate").get<double>();

    auto protocol = section("protocol");
    check_keys(protocol, "protocol.",
               {"T_s", "t_s", "target_pfp", "safety_margin", "enabled", "forced_m"});
    if (protocol.contains("T_s")) cfg.protocol.T_s = protocol.at("T_s").get<double>();
    if (protocol.contains("t_s")) cfg.protocol.t_s = protocol.at("t_s").get<double>();
    if (protocol.contains("target_pfp"))
        cfg.protocol.target_pfp = protocol.at("target_pfp").get<double>();
    if (protocol.contains("safety_margin"))
        cfg.protocol.safety_margin = protocol.at("safety_margin").get<unsigned>();
    if (protocol.contains("enabled")) cfg.protocol_enabled = protocol.at("enabled").get<bool>();
    if (protocol.contains("forced_m")) cfg.protocol.forced_m = protocol.at("forced_m").get<unsigned>();

    auto dh = section("dh");
    check_keys(dh, "dh.", {"p", "g"});
    if (dh.contains("p")) cfg.dh.p = dh.at("p").get<u64>();
    if (dh.contains("g")) cfg.dh.g = dh.at("g").get<u64>();
    if (dh.contains("p") || dh.contains("g")) cfg.dh.order = cfg.dh.p - 1;

    auto attacker = section("attacker");
    check_keys(attacker, "attacker.", {"strategy", "preamble_only", "skip"});
    if (attacker.contains("strategy"))
        cfg.attacker.kind = attack_kind_from_string(attacker.at("strategy").get<std::string>());
    if (attacker.contains("preamble_only"))
        cfg.attacker.preamble_only = attacker.at("preamble_only").get<bool>();
    if (attacker.contains("skip")) cfg.attacker.skip = attacker.at("skip").get<unsigned>();

    auto monitor = section("monitor");
    check_keys(monitor, "monitor.", {"m"});
    if (monitor.contains("m")) cfg.monitor_m = monitor.at("m").get<unsigned>();

    if (j.contains("duration")) cfg.duration_s = j.at("duration").get<double>();
    if (j.contains("warmup_s")) cfg.warmup_s = j.at("warmup_s").get<double>();
    if (j.contains("replications")) cfg.replications = j.at("replications").get<unsigned>();
    if (j.contains("base_seed")) cfg.base_seed = j.at("base_seed").get<std::uint64_t>();

    validate(cfg);
    return cfg;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("scenario config: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("scenario config: parse error: ") + e.what());
    }
    return load_scenario(j);
}

struct RunResult {
    std::uint64_t run_id = 0;
    std::uint64_t seed = 0;
    std::uint64_t n_tx = 0;
    std::uint64_t n_success = 0;
    std::uint64_t n_collision = 0;
    std::uint64_t max_consecutive_collisions = 0;
    bool alarm = false;
    std::optional<int> alarm_rule;
    bool detected_by_alice = false;
    bool detected_by_bob = false;
    bool keys_match = false;
};

inline std::string detected_by_string(const RunResult& r) {
    if (r.detected_by_alice && r.detected_by_bob) return "alice|bob";
    if (r.detected_by_alice) return "alice";
    if (r.detected_by_bob) return "bob";
    return "";
}

inline constexpr const char* kRunResultHeader =
    "run_id,seed,n_tx,n_success,n_collision,max_consecutive_collisions,alarm,alarm_rule,"
    "detected_by,keys_match";

inline void write_run_results(std::ostream& os, const std::vector<RunResult>& rows) {
    os << kRunResultHeader << '\n';
    for (const auto& r : rows) {
        os << r.run_id << ',' << r.seed << ',' << r.n_tx << ',' << r.n_success << ','
           << r.n_collision << ',' << r.max_consecutive_collisions << ',' << (r.alarm ? 1 : 0)
           << ',';
        if (r.alarm_rule) os << *r.alarm_rule;
        os << ',' << detected_by_string(r) << ',' << (r.keys_match ? 1 : 0) << '\n';
    }
}

}  // namespace pairsim
