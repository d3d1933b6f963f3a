#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pairsim/rng.hpp"

namespace pairsim {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

inline u64 mulmod(u64 a, u64 b, u64 m) { return static_cast<u64>(u128(a) * b % m); }

// Square-and-multiply modular exponentiation.
inline u64 modexp(u64 base, u64 exp, u64 mod) {
    if (mod == 0) throw std::invalid_argument("modexp: zero modulus");
    u64 result = 1 % mod;
    base %= mod;
    while (exp) {
        if (exp & 1) result = mulmod(result, base, mod);
        base = mulmod(base, base, mod);
        exp >>= 1;
    }
    return result;
}

// Miller-Rabin with the witness set that is deterministic for all 64-bit n.
inline bool is_probable_prime(u64 n) {
    if (n < 2) return false;
    for (u64 p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        if (n % p == 0) return n == p;
    }
    u64 d = n - 1;
    int r = 0;
    while ((d & 1) == 0) { d >>= 1; ++r; }
    for (u64 a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        u64 x = modexp(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int i = 0; i < r - 1; ++i) {
            x = mulmod(x, x, n);
            if (x == n - 1) { composite = false; break; }
        }
        if (composite) return false;
    }
    return true;
}

struct DhGroup {
    u64 p = 0;      // prime modulus
    u64 g = 0;      // generator
    u64 order = 0;  // multiplicative order of g (p-1 for a primitive root)
};

// Largest 64-bit safe prime (p = 2q+1, q prime); 2 is a primitive root.
inline DhGroup default_group() {
    return DhGroup{18446744073709550147ull, 2, 18446744073709550146ull};
}

inline void validate(const DhGroup& grp) {
    if (!is_probable_prime(grp.p)) throw std::invalid_argument("dh.p must be prime");
    if (grp.g <= 1 || grp.g >= grp.p) throw std::invalid_argument("dh.g must satisfy 1 < g < p");
}

struct DhKeyPair {
    u64 secret = 0;
    u64 public_value = 0;  // g^secret mod p
};

inline u64 dh_public(const DhGroup& grp, u64 secret) {
    if (secret > grp.p - 1) throw std::invalid_argument("dh secret out of range");
    return modexp(grp.g, secret, grp.p);
}

inline u64 dh_shared(const DhGroup& grp, u64 secret, u64 peer_public) {
    if (peer_public == 0 || peer_public >= grp.p)
        throw std::invalid_argument("dh peer public value out of range");
    return modexp(peer_public, secret, grp.p);
}

inline DhKeyPair make_keypair(const DhGroup& grp, SimRng& rng) {
    u64 secret = 1 + rng.below(grp.p - 1);  // uniform over [1, p-1]
    return DhKeyPair{secret, dh_public(grp, secret)};
}

// Minimal big-endian encoding (at least one byte; public values are >= 1).
inline std::vector<std::uint8_t> encode_be(u64 v) {
    std::vector<std::uint8_t> out;
    do {
        out.insert(out.begin(), static_cast<std::uint8_t>(v & 0xff));
        v >>= 8;
    } while (v);
    return out;
}

inline u64 decode_be(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() > 8) throw std::invalid_argument("big-endian value wider than 64 bits");
    u64 v = 0;
    for (auto b : bytes) v = (v << 8) | b;
    return v;
}

}  // namespace pairsim
