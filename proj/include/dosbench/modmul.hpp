#pragma once

#include <array>
#include <cstdint>
#include <string>

// 256-bit modular arithmetic for the CPU payload. The cost model matters more
// than number theory here: one mul_mod is a fixed amount of work, so q chained
// multiplications burn CPU time linear in q.

namespace dosbench {

struct U256 {
    // little-endian 64-bit limbs
    std::array<std::uint64_t, 4> w{0, 0, 0, 0};

    static U256 from_u64(std::uint64_t v) { return U256{{v, 0, 0, 0}}; }
    static U256 from_hex(const std::string& hex); // with or without 0x

    std::uint64_t low64() const { return w[0]; }
    bool is_zero() const { return (w[0] | w[1] | w[2] | w[3]) == 0; }
    bool operator==(const U256&) const = default;
};

bool u256_less(const U256& a, const U256& b);

// (a * b) % m; requires m != 0 and a, b < m
U256 mul_mod(const U256& a, const U256& b, const U256& m);

// acc <- acc * base mod m, repeated `iters` times
U256 chain_mul_mod(U256 acc, const U256& base, const U256& m,
                   std::uint64_t iters);

// base^exp mod m by square-and-multiply (the "true" modular exponentiation,
// Theta(log exp) multiplications)
U256 mod_pow(const U256& base, std::uint64_t exp, const U256& m);

} // namespace dosbench
