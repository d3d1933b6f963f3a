// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Run with --full to use the 20000-replication table profiles
// (default 2000 with the correspondingly widened tolerance bands).

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <pairsim/harness.hpp>

using namespace pairsim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& label, bool pass, const std::string& detail) {
    std::printf("[%s] %2d. %s: %s\n", pass ? "PASS" : "FAIL", id, label.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// independent evaluation of the stationary alarm probability
double pi_m(double p, unsigned m) {
    return (std::pow(p, m) - std::pow(p, m + 1)) / (1.0 - std::pow(p, m + 1));
}

void criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    double maxd = 0.0;
    int points = 0;
    for (int pc = 1; pc <= 10; ++pc)
        for (unsigned m = 1; m <= 12; ++m) {
            double p = 0.05 * pc;
            MarkovResult mk = solve_markov_bruteforce(p, m);
            maxd = std::max(maxd, std::abs(stationary_alarm_prob(p, m) - mk.stationary.back()));
            ++points;
        }
    double el = seconds_since(t0);
    report(1, "stationary alarm distribution, closed form vs linear solve",
           maxd <= 1e-12 && el < 1.0,
           fmt("max delta %.3g over %d (p, m) points in %.3f s (tol 1e-12, budget 1 s)", maxd,
               points, el));
}

void criterion_2() {
    const double p = 0.25;
    const unsigned m = 4;
    const std::size_t n = 10'000'000;
    std::mt19937_64 gen(20240817);
    std::bernoulli_distribution coll(p);
    DetectorState det(m);
    std::size_t alarms = 0;
    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; ++i)
        if (det.feed(coll(gen) ? 1 : 0)) ++alarms;
    double el = seconds_since(t0);
    const double target = 0.002932551319648094;  // (p^4 - p^5) / (1 - p^5) at p = 1/4
    const double se = std::sqrt(target * (1.0 - target) / static_cast<double>(n));
    const double rate = static_cast<double>(alarms) / static_cast<double>(n);
    report(2, "detector alarm frequency on an i.i.d. Bernoulli(0.25) stream",
           std::abs(rate - target) <= 3.0 * se && el < 10.0,
           fmt("rate %.6g vs %.6g, |delta| = %.2f SE (limit 3 SE), 1e7 feeds in %.2f s", rate,
               target, std::abs(rate - target) / se, el));
}

void criterion_3() {
    bool exact = std::abs(channel_collision_prob(2, 0.5) - 1.0 / 3.0) <= 1e-15 &&
                 channel_collision_prob(1, 0.5) == 0.0;
    double maxd = 0.0;
    for (unsigned n = 2; n <= 4; ++n)
        for (int t = 1; t <= 19; ++t) {
            double tau = 0.05 * t;
            double p_any = 0.0, p_single = 0.0;
            for (unsigned mask = 1; mask < (1u << n); ++mask) {
                unsigned bits = static_cast<unsigned>(__builtin_popcount(mask));
                double prob = std::pow(tau, bits) * std::pow(1.0 - tau, n - bits);
                p_any += prob;
                if (bits == 1) p_single += prob;
            }
            maxd = std::max(maxd,
                            std::abs(channel_collision_prob(n, tau) - (p_any - p_single) / p_any));
        }
    report(3, "conditional collision probability, limits and enumeration",
           exact && maxd <= 1e-12,
           fmt("two-station half-load value exact, enumeration max delta %.3g (tol 1e-12)", maxd));
}

void criterion_4() {
    double worst = 0.0;
    std::uint64_t min_tx = ~0ull;
    for (unsigned n : {5u, 10u, 15u, 20u, 25u, 30u}) {
        Fig7Point pt = fig7_sim_point(n, 2);
        worst = std::max(worst, std::abs(pt.p_ch_sim - pt.p_ch_analytic));
        min_tx = std::min(min_tx, pt.n_tx);
    }
    report(4, "saturated collision probability, simulation vs fixed point",
           worst <= 0.02 && min_tx >= 10000,
           fmt("worst |sim - analytic| = %.4f (tol 0.02), min %llu observed tx per point "
               "(floor 1e4)",
               worst, static_cast<unsigned long long>(min_tx)));
}

void tables(std::size_t reps) {
    // five saturated stations, threshold pinned at 4
    BatchResult t2 = run_replications(table2_config(), reps);
    double n = static_cast<double>(reps);
    std::size_t c4 = fold_count(t2.rows, 4), c5 = fold_count(t2.rows, 5);
    double r4 = c4 / n, r5 = c5 / n;
    bool strict = r4 > 0.0176 && r4 < 0.0270;
    bool widened = r4 >= 0.5 * 0.0223 && r4 <= 2.0 * 0.0223;
    bool pass5 = (reps >= 20000) ? strict : widened;
    report(5, "false-positive rates, five saturated stations",
           pass5 && r5 <= 0.002,
           fmt("m=4 rate %.4f (reference interval 0.0176-0.0270: %s; 2x band 0.0112-0.0446: %s), "
               "m=5 rate %.4f (cap 0.002), %zu runs",
               r4, strict ? "inside" : "outside", widened ? "inside" : "outside", r5, reps));

    BatchResult t3 = run_replications(table3_config(), reps);
    std::size_t d4 = fold_count(t3.rows, 4), d5 = fold_count(t3.rows, 5), d6 = fold_count(t3.rows, 6);
    double s4 = d4 / n, s5 = d5 / n, s6 = d6 / n;
    double se5 = std::sqrt(s5 * (1.0 - s5) / n);
    bool band4 = s4 >= 0.5 * 0.0466 && s4 <= 2.0 * 0.0466;
    bool band5 = s5 >= 0.5 * 0.0063 && s5 <= 2.0 * 0.0063;
    bool cap6 = s6 <= 0.0016;
    bool ordered = d4 > d5 && d5 > d6;
    report(6, "false-positive rates, twelve stations at 1.875 Mbps",
           band4 && band5 && cap6 && ordered,
           fmt("m=4 %.4f (band 0.0233-0.0932), m=5 %.4f +/- %.4f (band 0.00315-0.0126), "
               "m=6 %.4f (cap 0.0016), ordering %s, %zu runs",
               s4, s5, se5, s6, ordered ? "strict" : "violated", reps));
}

void criterion_7() {
    const std::size_t seeds = 1000;
    std::size_t undetected = 0, extra_violations = 0;
    std::string first_bad;
    for (AttackKind kind :
         {AttackKind::type1, AttackKind::type2, AttackKind::long_jam, AttackKind::partial_jam}) {
        ScenarioConfig cfg = case_study_config();
        cfg.attacker.kind = kind;
        for (std::size_t r = 0; r < seeds; ++r) {
            RunOutput out = run_scenario(cfg, cfg.base_seed + r);
            const bool a = out.alice.core.alarm.has_value();
            const bool b = out.bob.core.alarm.has_value();
            if (!a && !b) {
                ++undetected;
                if (first_bad.empty())
                    first_bad = fmt(" first miss: %s seed %zu", to_string(kind), cfg.base_seed + r);
                continue;
            }
            bool ok = true;
            switch (kind) {
                case AttackKind::type1:
                case AttackKind::type2:
                    ok = a && b;
                    break;
                case AttackKind::long_jam:
                    ok = b && out.bob.core.alarm->rule == 3;
                    break;
                case AttackKind::partial_jam:
                    ok = b && out.bob.core.alarm->rule == 1;
                    break;
                default:
                    break;
            }
            if (!ok) {
                ++extra_violations;
                if (first_bad.empty())
                    first_bad = fmt(" first rule miss: %s seed %zu", to_string(kind),
                                    cfg.base_seed + r);
            }
            if (out.alice.core.installed && out.bob.core.installed) ++extra_violations;
        }
    }
    report(7, "attack detection coverage, four strategies x 1000 seeds",
           undetected == 0 && extra_violations == 0,
           fmt("undetected %zu/4000, rule/role mismatches %zu%s", undetected, extra_violations,
               first_bad.c_str()));
}

void criterion_8() {
    const std::size_t seeds = 1000;
    ScenarioConfig cfg = case_study_config();
    const MacParams mac = cfg.mac;
    std::size_t gap_violations = 0, foreign = 0, short_bursts = 0, bob_gap_violations = 0;
    for (std::size_t r = 0; r < seeds; ++r) {
        RunOutput out = run_scenario(cfg, cfg.base_seed + r);
        std::vector<const FrameSummary*> acopies, bcopies;
        for (const auto& f : out.frames) {
            if (f.kind != FrameKind::key_exchange) continue;
            (f.origin == kAlice ? acopies : bcopies).push_back(&f);
        }
        if (acopies.empty()) {
            ++short_bursts;
            continue;
        }
        if (!out.alice.core.alarm && acopies.size() != out.alice.core.m) ++short_bursts;
        for (std::size_t i = 1; i < acopies.size(); ++i)
            if (acopies[i]->start - acopies[i - 1]->end != mac.ack_gap()) ++gap_violations;
        for (std::size_t i = 1; i < bcopies.size(); ++i)
            if (bcopies[i]->start - bcopies[i - 1]->end != mac.ack_gap()) ++bob_gap_violations;
        const usec burst_start = acopies.front()->start;
        const usec burst_end = acopies.back()->end;
        for (const auto& f : out.frames)
            if (f.kind == FrameKind::data && f.origin >= kFirstBackground &&
                f.start >= burst_start && f.start < burst_end)
                ++foreign;
    }
    report(8, "priority burst hygiene over 1000 clean runs",
           gap_violations == 0 && foreign == 0 && short_bursts == 0,
           fmt("initiator gaps != %llu us: %zu, foreign frames inside bursts: %zu, truncated "
               "bursts: %zu (responder gap deviations, informational: %zu)",
               static_cast<unsigned long long>(mac.ack_gap()), gap_violations, foreign,
               short_bursts, bob_gap_violations));
}

void criterion_9() {
    const std::size_t runs = 20;
    ScenarioConfig cfg = case_study_config();
    double p_sum = 0.0;
    std::size_t mismatches = 0;
    unsigned sel_m = 0, min_m = 0;
    double k_mean = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
        RunOutput out = run_scenario(cfg, cfg.base_seed + r);
        const ChannelEstimate& est = out.alice.core.estimate;
        p_sum += est.p_ch_hat;
        k_mean += static_cast<double>(est.k_hat);
        unsigned minimal = 1;
        while (static_cast<double>(est.k_hat) * pi_m(est.p_ch_hat, minimal) > cfg.protocol.target_pfp)
            ++minimal;
        if (out.alice.core.m != minimal + cfg.protocol.safety_margin) ++mismatches;
        sel_m = out.alice.core.m;
        min_m = minimal;
    }
    double p_mean = p_sum / runs;
    k_mean /= runs;
    bool band = p_mean >= 0.025 && p_mean <= 0.045;
    report(9, "adaptive threshold at the ten-station, 2 Mbps operating point",
           band && mismatches == 0,
           fmt("mean p_ch_hat %.4f (band 0.025-0.045), every run selected minimal+margin "
               "(last: %u = %u+2), mean k_hat %.0f",
               p_mean, sel_m, min_m, k_mean));
    std::printf("      note: at this operating point the expected false-positive ratio evaluates\n"
                "      to about %.2f%% at m=4 and %.3f%% at m=5; the 1.36%% / 0.08%% figures\n"
                "      sometimes quoted for these thresholds do not follow from that formula,\n"
                "      so selection and this check are keyed to the formula values.\n",
                100.0 * k_mean * pi_m(p_mean, 4), 100.0 * k_mean * pi_m(p_mean, 5));
}

void criterion_10() {
    bool vectors = modexp(2, 3, 11) == 8 && modexp(2, 4, 11) == 5 && modexp(2, 12, 11) == 4 &&
                   modexp(2, 12345, 18446744073709550147ULL) == 8630062814640669386ULL;
    DhGroup grp = default_group();
    SimRng rng(1);
    std::size_t agree = 0;
    for (int i = 0; i < 1000; ++i) {
        DhKeyPair a = make_keypair(grp, rng);
        DhKeyPair b = make_keypair(grp, rng);
        if (dh_shared(grp, a.secret, b.public_value) == dh_shared(grp, b.secret, a.public_value))
            ++agree;
    }
    bool message_ok = true;
    for (int i = 0; i < 50 && message_ok; ++i) {
        u64 v = rng.raw();
        auto bytes = build_message(2, 6, encode_be(v));
        auto msg = parse_message(bytes);
        message_ok = bytes.size() == 2304 && msg.index == 2 && msg.repetitions == 6 &&
                     decode_be(msg.public_value) == v;
    }
    report(10, "key agreement, exponentiation vectors, and message encoding",
           vectors && agree == 1000 && message_ok,
           fmt("vectors %s, %zu/1000 random pairs agree, 2304-byte round-trip %s",
               vectors ? "ok" : "bad", agree, message_ok ? "ok" : "bad"));
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void criterion_11() {
    fs::path base = fs::temp_directory_path() / "pairsim_acceptance";
    fs::remove_all(base);
    std::ostringstream sink;
    reproduce("table2", 50, base / "ta", sink);
    reproduce("table2", 50, base / "tb", sink);
    reproduce("fig7", 1, base / "fa", sink);
    reproduce("fig7", 1, base / "fb", sink);
    bool same = slurp(base / "ta" / "table2_runs.csv") == slurp(base / "tb" / "table2_runs.csv") &&
                slurp(base / "ta" / "table2.csv") == slurp(base / "tb" / "table2.csv") &&
                slurp(base / "fa" / "fig7_sim.csv") == slurp(base / "fb" / "fig7_sim.csv") &&
                slurp(base / "fa" / "fig7_analytic.csv") == slurp(base / "fb" / "fig7_analytic.csv");
    bool nonempty = !slurp(base / "ta" / "table2_runs.csv").empty();
    fs::remove_all(base);
    report(11, "byte-identical reruns of the canned studies", same && nonempty,
           same ? "table2 (50 runs) and fig7 outputs match byte for byte"
                : "rerun produced differing bytes");
}

}  // namespace

int main(int argc, char** argv) {
    bool full = argc > 1 && std::string(argv[1]) == "--full";
    std::size_t reps = full ? 20000 : 2000;
    auto t0 = std::chrono::steady_clock::now();

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    tables(reps);
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();

    std::printf("%d/11 criteria passed in %.1f s%s\n", 11 - failures, seconds_since(t0),
                full ? " (full table profiles)" : "");
    return failures == 0 ? 0 : 1;
}
