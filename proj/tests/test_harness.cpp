#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include <pairsim/harness.hpp>

using namespace pairsim;
namespace fs = std::filesystem;

TEST_CASE("run result CSV shape is stable") {
    REQUIRE(std::string(kRunResultHeader) ==
            "run_id,seed,n_tx,n_success,n_collision,max_consecutive_collisions,"
            "alarm,alarm_rule,detected_by,keys_match");
    RunResult r;
    r.run_id = 3;
    r.seed = 17;
    r.n_tx = 100;
    r.n_success = 90;
    r.n_collision = 10;
    r.max_consecutive_collisions = 2;
    std::ostringstream os;
    write_run_results(os, {r});
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    REQUIRE(header == kRunResultHeader);
    REQUIRE(row == "3,17,100,90,10,2,0,,,0");

    r.alarm = true;
    r.alarm_rule = 2;
    r.detected_by_alice = true;
    r.detected_by_bob = true;
    std::ostringstream os2;
    write_run_results(os2, {r});
    std::istringstream is2(os2.str());
    std::getline(is2, header);
    std::getline(is2, row);
    REQUIRE(row == "3,17,100,90,10,2,1,2,alice|bob,0");
}

TEST_CASE("normal interval arithmetic") {
    RateEstimate e = normal_interval(21, 1000);
    REQUIRE(e.rate == 0.021);
    REQUIRE(std::abs((e.ci_high - e.ci_low) / 2 - 1.96 * std::sqrt(0.021 * 0.979 / 1000)) <= 1e-12);
    // quadrupling the sample at the same rate halves the width
    RateEstimate big = normal_interval(84, 4000);
    double w1 = e.ci_high - e.ci_low, w2 = big.ci_high - big.ci_low;
    REQUIRE(std::abs(w1 / w2 - 2.0) <= 1e-9);
    // degenerate cases stay in [0, 1]
    RateEstimate zero = normal_interval(0, 50);
    REQUIRE(zero.ci_low == 0.0);
    RateEstimate full = normal_interval(50, 50);
    REQUIRE(full.ci_high == 1.0);
}

TEST_CASE("wilson interval behaves at the edges") {
    RateEstimate zero = wilson_interval(0, 100);
    REQUIRE(zero.ci_low == 0.0);
    REQUIRE(zero.ci_high > 0.0);  // zero observed hits still leave room
    RateEstimate mid = wilson_interval(50, 100);
    REQUIRE(mid.ci_low > 0.3);
    REQUIRE(mid.ci_high < 0.7);
    REQUIRE(mid.ci_low < mid.rate);
    REQUIRE(mid.rate < mid.ci_high);
}

TEST_CASE("fold counts worst runs across rows") {
    std::vector<RunResult> rows(6);
    std::uint64_t runs[] = {0, 3, 4, 4, 5, 9};
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].max_consecutive_collisions = runs[i];
    REQUIRE(fold_count(rows, 4) == 4);
    REQUIRE(fold_count(rows, 5) == 2);
    REQUIRE(fold_count(rows, 10) == 0);
}

TEST_CASE("replication batches are deterministic") {
    ScenarioConfig cfg = poisson_monitor_config(5, 1.5e6, 0.5);
    cfg.monitor_m = 2;
    BatchResult a = run_replications(cfg, 10);
    BatchResult b = run_replications(cfg, 10);
    REQUIRE(a.rows.size() == 10);
    REQUIRE(a.alarm.n == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        REQUIRE(a.rows[i].seed == cfg.base_seed + i);
        REQUIRE(a.rows[i].n_tx == b.rows[i].n_tx);
        REQUIRE(a.rows[i].max_consecutive_collisions == b.rows[i].max_consecutive_collisions);
        REQUIRE(a.rows[i].alarm == b.rows[i].alarm);
    }
}

static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

TEST_CASE("reproduction studies rerun byte-identically") {
    fs::path base = fs::temp_directory_path() / "pairsim_harness_test";
    fs::remove_all(base);
    std::ostringstream sink;
    reproduce("fig9", 0, base / "a", sink);
    reproduce("fig9", 0, base / "b", sink);
    REQUIRE(slurp(base / "a" / "fig9.csv") == slurp(base / "b" / "fig9.csv"));

    reproduce("table2", 25, base / "t2a", sink);
    reproduce("table2", 25, base / "t2b", sink);
    REQUIRE(slurp(base / "t2a" / "table2_runs.csv") == slurp(base / "t2b" / "table2_runs.csv"));
    REQUIRE(slurp(base / "t2a" / "table2.csv") == slurp(base / "t2b" / "table2.csv"));
    // sanity on shape: header + 25 rows
    std::istringstream rows(slurp(base / "t2a" / "table2_runs.csv"));
    std::string line;
    std::getline(rows, line);
    REQUIRE(line == kRunResultHeader);
    std::size_t n = 0;
    while (std::getline(rows, line)) ++n;
    REQUIRE(n == 25);
    fs::remove_all(base);
}

TEST_CASE("unknown reproduction target is rejected") {
    std::ostringstream sink;
    REQUIRE_THROWS_AS(reproduce("fig1", 1, fs::temp_directory_path() / "x", sink),
                      std::invalid_argument);
}

TEST_CASE("event log round-trips and reclassifies identically") {
    ScenarioConfig cfg = poisson_monitor_config(6, 1.5e6, 0.4);
    RunOutput out = run_scenario(cfg, 23, true);

    std::ostringstream os;
    out.log.write_csv(os);
    std::istringstream is(os.str());
    auto rows = read_event_csv(is);
    REQUIRE_FALSE(rows.empty());

    ChannelTrace rebuilt = trace_from_events(rows, kAlice);
    REQUIRE(rebuilt.busy_periods() == out.traces.at(kAlice).busy_periods());

    auto offline = classify_occupancy(rebuilt, cfg.mac);
    const auto& online = out.outcomes.at(kAlice);
    REQUIRE(offline.size() == online.size());
    for (std::size_t i = 0; i < offline.size(); ++i) {
        REQUIRE(offline[i].kind == online[i].kind);
        REQUIRE(offline[i].start == online[i].start);
        REQUIRE(offline[i].duration == online[i].duration);
    }
}

TEST_CASE("scenario configs load from json with strict keys") {
    nlohmann::json j = {
        {"traffic", {{"n_background", 7}, {"mode", "poisson"}, {"rate", 1.25e6}}},
        {"protocol", {{"T_s", 1.5}, {"t_s", 1.0}, {"target_pfp", 0.004}, {"safety_margin", 1}}},
        {"dh", {{"p", 18446744073709550147ull}, {"g", 2}}},
        {"attacker", {{"strategy", "type2"}, {"preamble_only", true}}},
        {"duration", 1.8},
        {"base_seed", 99},
    };
    ScenarioConfig cfg = load_scenario(j);
    REQUIRE(cfg.traffic.n_background == 7);
    REQUIRE(cfg.traffic.mode == TrafficMode::poisson);
    REQUIRE(cfg.traffic.rate == 1.25e6);
    REQUIRE(cfg.protocol.target_pfp == 0.004);
    REQUIRE(cfg.protocol.safety_margin == 1);
    REQUIRE(cfg.attacker.kind == AttackKind::type2);
    REQUIRE(cfg.attacker.preamble_only);
    REQUIRE(cfg.duration_s == 1.8);
    REQUIRE(cfg.base_seed == 99);

    nlohmann::json bad = j;
    bad["protocol"]["tee_s"] = 1.0;
    REQUIRE_THROWS_AS(load_scenario(bad), std::invalid_argument);

    nlohmann::json badmode = j;
    badmode["traffic"]["mode"] = "bursty";
    REQUIRE_THROWS_AS(load_scenario(badmode), std::invalid_argument);

    nlohmann::json badstrat = j;
    badstrat["attacker"]["strategy"] = "loud";
    REQUIRE_THROWS_AS(load_scenario(badstrat), std::invalid_argument);

    nlohmann::json badwin = j;
    badwin["protocol"]["t_s"] = 2.0;  // window inversion
    REQUIRE_THROWS_AS(load_scenario(badwin), std::invalid_argument);
}
