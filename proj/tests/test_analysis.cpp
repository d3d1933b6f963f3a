#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <pairsim/analysis.hpp>

using namespace pairsim;

TEST_CASE("closed-form stationary alarm probability matches brute-force chain") {
    for (int pc = 1; pc <= 10; ++pc) {
        double p = 0.05 * pc;
        for (unsigned m = 1; m <= 12; ++m) {
            double closed = stationary_alarm_prob(p, m);
            MarkovResult mk = solve_markov_bruteforce(p, m);
            REQUIRE(std::abs(closed - mk.stationary.back()) <= 1e-12);
        }
    }
}

TEST_CASE("stationary alarm probability spot values") {
    REQUIRE(std::abs(stationary_alarm_prob(0.5, 1) - 1.0 / 3.0) <= 1e-15);
    REQUIRE(std::abs(stationary_alarm_prob(0.25, 2) - 1.0 / 21.0) <= 1e-15);
    REQUIRE(stationary_alarm_prob(0.0, 4) == 0.0);
}

TEST_CASE("brute-force chain for m=1, p=0.5 gives (2/3, 1/3)") {
    MarkovResult mk = solve_markov_bruteforce(0.5, 1);
    REQUIRE(mk.stationary.size() == 2);
    REQUIRE(std::abs(mk.stationary[0] - 2.0 / 3.0) <= 1e-12);
    REQUIRE(std::abs(mk.stationary[1] - 1.0 / 3.0) <= 1e-12);
    double sum = mk.stationary[0] + mk.stationary[1];
    REQUIRE(std::abs(sum - 1.0) <= 1e-12);
}

// direct enumeration over all transmit subsets of n stations
static double enumerate_p_ch(unsigned n, double tau) {
    double p_any = 0.0, p_single = 0.0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        unsigned k = static_cast<unsigned>(__builtin_popcount(mask));
        double prob = std::pow(tau, k) * std::pow(1.0 - tau, n - k);
        p_any += prob;
        if (k == 1) p_single += prob;
    }
    return (p_any - p_single) / p_any;
}

TEST_CASE("conditional collision probability matches subset enumeration") {
    REQUIRE(channel_collision_prob(1, 0.7) == 0.0);
    REQUIRE(std::abs(channel_collision_prob(2, 0.5) - 1.0 / 3.0) <= 1e-15);
    for (unsigned n = 2; n <= 4; ++n)
        for (int t = 1; t <= 9; ++t) {
            double tau = 0.1 * t;
            REQUIRE(std::abs(channel_collision_prob(n, tau) - enumerate_p_ch(n, tau)) <= 1e-12);
        }
    REQUIRE(channel_collision_prob(5, 0.0) == 0.0);
    REQUIRE(channel_collision_prob(5, 1.0) == 1.0);
}

TEST_CASE("backoff response at zero collision probability") {
    MacParams mac;
    // no retries ever: tau = 2 / (cw_min + 1)
    REQUIRE(std::abs(tau_of_p(0.0, mac) - 2.0 / (mac.cw_min + 1)) <= 1e-15);
}

TEST_CASE("fixed point is consistent and monotone in n") {
    double prev_tau = 1.0, prev_pch = -1.0;
    for (unsigned n = 2; n <= 30; ++n) {
        auto op = bianchi_fixed_point(n);
        REQUIRE(op.tau > 0.0);
        REQUIRE(op.tau < prev_tau);
        REQUIRE(op.p_ch > prev_pch);
        // self-consistency of the two coupled equations
        double p_implied = 1.0 - std::pow(1.0 - op.tau, n - 1);
        REQUIRE(std::abs(p_implied - op.p_cond) <= 1e-9);
        REQUIRE(std::abs(tau_of_p(op.p_cond, MacParams{}) - op.tau) <= 1e-9);
        prev_tau = op.tau;
        prev_pch = op.p_ch;
    }
    auto one = bianchi_fixed_point(1);
    REQUIRE(one.p_cond == 0.0);
    REQUIRE(one.p_ch == 0.0);
    REQUIRE(std::abs(one.tau - 2.0 / 33.0) <= 1e-12);
}

TEST_CASE("expected false-positive count") {
    REQUIRE(std::abs(false_positive_ratio(4000, 0.25, 10) - 2.861e-3) <= 2e-6);
    // monotone: tighter threshold, fewer expected alarms
    for (unsigned m = 4; m < 12; ++m)
        REQUIRE(false_positive_ratio(1500, 0.2, m + 1) < false_positive_ratio(1500, 0.2, m));
    REQUIRE(false_positive_ratio(3000, 0.2, 6) > false_positive_ratio(1500, 0.2, 6));
    REQUIRE(false_positive_ratio(1500, 0.3, 6) > false_positive_ratio(1500, 0.2, 6));
    // deliberately not clamped to 1
    REQUIRE(false_positive_ratio(100000, 0.5, 1) > 1.0);
}

TEST_CASE("protocol cost of a threshold choice") {
    auto c1 = cost_metrics(1, 1.5);
    REQUIRE(c1.extra_messages == 0);
    auto c7 = cost_metrics(7, 1.5);
    REQUIRE(c7.extra_messages == 12);
    REQUIRE(std::abs(c7.key_delay_s - 1.5) <= 1e-15);
}
