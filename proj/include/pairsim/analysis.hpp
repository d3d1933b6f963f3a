#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pairsim/mac_params.hpp"

namespace pairsim {

struct DcfOperatingPoint {
    unsigned n_stations = 0;
    double tau = 0.0;     // per-slot transmit probability
    double p_cond = 0.0;  // conditional collision probability seen by a transmitter
    double p_ch = 0.0;    // P{collision | channel busy with a transmission}
};

struct MarkovResult {
    std::vector<double> stationary;           // pi_0 .. pi_m
    std::vector<std::vector<double>> matrix;  // (m+1) x (m+1), row stochastic
};

// tau as a function of the conditional collision probability for a saturated,
// retry-limited station: attempt stages i = 0..retry_limit, contention window
// W_i = min(2^i, 2^beta) * cw_min, mean backoff (W_i - 1) / 2.
inline double tau_of_p(double p, const MacParams& params) {
    const double W = static_cast<double>(params.cw_min);
    double num = 0.0, den = 0.0, pi = 1.0;  // pi = p^i
    for (unsigned i = 0; i <= params.retry_limit; ++i) {
        double Wi = std::min(std::pow(2.0, static_cast<double>(i)),
                             std::pow(2.0, static_cast<double>(params.beta))) * W;
        num += pi;
        den += pi * (Wi + 1.0) / 2.0;
        pi *= p;
    }
    return num / den;
}

inline double channel_collision_prob(unsigned n_stations, double tau) {
    if (n_stations < 1) throw std::invalid_argument("channel_collision_prob: n_stations must be >= 1");
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("channel_collision_prob: tau out of [0,1]");
    if (tau == 0.0) return 0.0;               // limit: no transmissions, no collisions given one
    if (n_stations == 1) return 0.0;          // a lone transmitter never collides
    if (tau == 1.0) return 1.0;               // limit: everyone always transmits
    const double n = static_cast<double>(n_stations);
    const double q = std::pow(1.0 - tau, n - 1.0);
    const double p_any = 1.0 - (1.0 - tau) * q;          // 1 - (1-tau)^n
    const double p_single = n * tau * q;                 // exactly one transmitter
    return (p_any - p_single) / p_any;
}

inline DcfOperatingPoint bianchi_fixed_point(unsigned n_stations, const MacParams& params = {}) {
    if (n_stations < 1) throw std::invalid_argument("bianchi_fixed_point: n_stations must be >= 1");
    DcfOperatingPoint op;
    op.n_stations = n_stations;
    if (n_stations == 1) {
        op.p_cond = 0.0;
        op.tau = tau_of_p(0.0, params);  // = 2/(cw_min+1)
        op.p_ch = 0.0;
        return op;
    }
    // g(p) = 1 - (1 - tau(p))^(n-1) - p is strictly decreasing in p on [0,1]:
    // tau(p) decreases in p, so the first term decreases while p grows.
    auto g = [&](double p) {
        double tau = tau_of_p(p, params);
        return 1.0 - std::pow(1.0 - tau, static_cast<double>(n_stations - 1)) - p;
    };
    double lo = 0.0, hi = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) lo = mid; else hi = mid;
        if (hi - lo <= 1e-14) break;
    }
    op.p_cond = 0.5 * (lo + hi);
    op.tau = tau_of_p(op.p_cond, params);
    double residual = std::abs(g(op.p_cond));
    if (residual > 1e-10) throw std::runtime_error("bianchi_fixed_point: bisection residual too large");
    op.p_ch = channel_collision_prob(n_stations, op.tau);
    return op;
}

inline double stationary_alarm_prob(double p_ch, unsigned m) {
    if (p_ch < 0.0 || p_ch >= 1.0)
        throw std::invalid_argument("stationary_alarm_prob: p_ch must lie in [0,1)");
    if (m < 1) throw std::invalid_argument("stationary_alarm_prob: m must be >= 1");
    const double pm = std::pow(p_ch, static_cast<double>(m));
    return (pm - pm * p_ch) / (1.0 - pm * p_ch);
}

inline MarkovResult solve_markov_bruteforce(double p_ch, unsigned m) {
    if (p_ch < 0.0 || p_ch >= 1.0)
        throw std::invalid_argument("solve_markov_bruteforce: p_ch must lie in [0,1)");
    if (m < 1) throw std::invalid_argument("solve_markov_bruteforce: m must be >= 1");
    const unsigned d = m + 1;
    MarkovResult res;
    res.matrix.assign(d, std::vector<double>(d, 0.0));
    for (unsigned i = 0; i < m; ++i) {
        res.matrix[i][i + 1] = p_ch;
        res.matrix[i][0] = 1.0 - p_ch;
    }
    res.matrix[m][0] = 1.0;

    // Solve pi (P - I) = 0 with sum(pi) = 1: take A = (P - I)^T, replace the
    // last row by all-ones, rhs = e_last.
    Eigen::MatrixXd A(d, d);
    for (unsigned i = 0; i < d; ++i)
        for (unsigned j = 0; j < d; ++j)
            A(j, i) = res.matrix[i][j] - (i == j ? 1.0 : 0.0);
    for (unsigned j = 0; j < d; ++j) A(d - 1, j) = 1.0;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    b(d - 1) = 1.0;
    Eigen::VectorXd pi = A.partialPivLu().solve(b);
    res.stationary.assign(pi.data(), pi.data() + d);
    return res;
}

// Expected alarm count over k observed transmissions (Bernoulli collision
// model). Deliberately unclamped: callers that need a probability-looking
// ratio clamp when reporting.
inline double false_positive_ratio(std::uint64_t k, double p_ch, unsigned m) {
    return static_cast<double>(k) * stationary_alarm_prob(p_ch, m);
}

struct CostMetrics {
    unsigned extra_messages = 0;
    double key_delay_s = 0.0;
};

inline CostMetrics cost_metrics(unsigned m, double T_s) {
    if (m < 1) throw std::invalid_argument("cost_metrics: m must be >= 1");
    return CostMetrics{2 * (m - 1), T_s};
}

}  // namespace pairsim
