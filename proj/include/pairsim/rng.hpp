#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace pairsim {

// Deterministic draws on top of mt19937_64. Distributions are hand-rolled so
// seeded sequences do not depend on the standard library's implementation of
// std::uniform_int_distribution and friends.
class SimRng {
  public:
    explicit SimRng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // Uniform over {0, ..., n-1}. Contention windows are powers of two, so the
    // modulo is exactly unbiased there; elsewhere the bias is < 2^-50.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("SimRng::below: n must be > 0");
        return eng_() % n;
    }

    // Uniform over {lo, ..., hi} inclusive.
    std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {
        return lo + below(hi - lo + 1);
    }

    // Uniform in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Exponential inter-arrival time with the given mean, rounded to whole us
    // (never zero, so arrival events keep strictly increasing timestamps).
    std::uint64_t exp_us(double mean_us) {
        double d = -std::log1p(-unit()) * mean_us;
        if (d < 1.0) return 1;
        return static_cast<std::uint64_t>(std::llround(std::ceil(d)));
    }

  private:
    std::mt19937_64 eng_;
};

// Backoff counter draw: uniform over {0, ..., cw-1}.
inline std::uint32_t backoff_draw(std::uint32_t cw, SimRng& rng) {
    if (cw == 0) throw std::invalid_argument("backoff_draw: cw must be >= 2");
    return static_cast<std::uint32_t>(rng.below(cw));
}

}  // namespace pairsim
