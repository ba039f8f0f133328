#include "dosbench/modmul.hpp"

#include <bit>
#include <stdexcept>

namespace dosbench {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

U256 U256::from_hex(const std::string& hex) {
    std::string s = hex;
    if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) s = s.substr(2);
    if (s.empty() || s.size() > 64)
        throw std::invalid_argument("bad 256-bit hex literal");
    U256 out;
    int limb = 0, shift = 0;
    for (auto it = s.rbegin(); it != s.rend(); ++it) {
        char c = *it;
        u64 digit;
        if (c >= '0' && c <= '9') digit = static_cast<u64>(c - '0');
        else if (c >= 'a' && c <= 'f') digit = static_cast<u64>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') digit = static_cast<u64>(c - 'A' + 10);
        else throw std::invalid_argument("bad hex digit");
        out.w[static_cast<std::size_t>(limb)] |= digit << shift;
        shift += 4;
        if (shift == 64) {
            shift = 0;
            ++limb;
        }
    }
    return out;
}

bool u256_less(const U256& a, const U256& b) {
    for (int i = 3; i >= 0; --i) {
        if (a.w[static_cast<std::size_t>(i)] != b.w[static_cast<std::size_t>(i)])
            return a.w[static_cast<std::size_t>(i)] < b.w[static_cast<std::size_t>(i)];
    }
    return false;
}

namespace {

// 4x4 limb schoolbook multiply -> 8 limbs
void mul_full(const U256& a, const U256& b, u64 out[8]) {
    for (int i = 0; i < 8; ++i) out[i] = 0;
    for (int i = 0; i < 4; ++i) {
        u64 carry = 0;
        for (int j = 0; j < 4; ++j) {
            u128 cur = static_cast<u128>(a.w[static_cast<std::size_t>(i)]) *
                           b.w[static_cast<std::size_t>(j)] +
                       out[i + j] + carry;
            out[i + j] = static_cast<u64>(cur);
            carry = static_cast<u64>(cur >> 64);
        }
        out[i + 4] = carry;
    }
}

int top_limb(const u64* v, int n) {
    for (int i = n - 1; i >= 0; --i)
        if (v[i] != 0) return i;
    return -1;
}

// u <- u << s (s in [0,63]), u has n limbs plus one spare at u[n]
void shl_limbs(u64* u, int n, int s) {
    if (s == 0) {
        u[n] = 0;
        return;
    }
    u[n] = u[n - 1] >> (64 - s);
    for (int i = n - 1; i > 0; --i)
        u[i] = (u[i] << s) | (u[i - 1] >> (64 - s));
    u[0] <<= s;
}

void shr_limbs(u64* u, int n, int s) {
    if (s == 0) return;
    for (int i = 0; i < n - 1; ++i)
        u[i] = (u[i] >> s) | (u[i + 1] << (64 - s));
    u[n - 1] >>= s;
}

// Knuth algorithm D remainder: rem = u mod v, in place over normalized copies.
// u: un limbs (un <= 8), v: vn limbs (vn >= 1). Result written to rem[0..vn).
void div_rem(const u64* u_in, int un, const u64* v_in, int vn, u64* rem) {
    // single-limb divisor fast path
    if (vn == 1) {
        u128 r = 0;
        for (int i = un - 1; i >= 0; --i) {
            r = (r << 64) | u_in[i];
            r %= v_in[0];
        }
        rem[0] = static_cast<u64>(r);
        return;
    }

    const int shift = std::countl_zero(v_in[vn - 1]);
    u64 v[8];
    for (int i = 0; i < vn; ++i) v[i] = v_in[i];
    v[vn] = 0;
    shl_limbs(v, vn, shift);

    u64 u[10];
    for (int i = 0; i < un; ++i) u[i] = u_in[i];
    u[un] = 0;
    shl_limbs(u, un, shift); // writes u[un]
    int m = un + 1;          // dividend now has un+1 limbs

    for (int j = m - vn - 1; j >= 0; --j) {
        u128 num = (static_cast<u128>(u[j + vn]) << 64) | u[j + vn - 1];
        u128 qhat = num / v[vn - 1];
        u128 rhat = num % v[vn - 1];
        const u128 limb_max = (static_cast<u128>(1) << 64) - 1;
        while (qhat > limb_max ||
               qhat * v[vn - 2] > ((rhat << 64) | u[j + vn - 2])) {
            --qhat;
            rhat += v[vn - 1];
            if (rhat > limb_max) break;
        }
        // multiply-subtract qhat * v from u[j .. j+vn]
        u128 borrow = 0, carry = 0;
        for (int i = 0; i < vn; ++i) {
            u128 p = qhat * v[i] + carry;
            carry = p >> 64;
            u128 sub = static_cast<u128>(u[i + j]) - static_cast<u64>(p) - borrow;
            u[i + j] = static_cast<u64>(sub);
            borrow = (sub >> 64) & 1;
        }
        u128 sub = static_cast<u128>(u[j + vn]) - static_cast<u64>(carry) - borrow;
        u[j + vn] = static_cast<u64>(sub);
        if ((sub >> 64) & 1) {
            // qhat was one too large: add v back
            u128 c = 0;
            for (int i = 0; i < vn; ++i) {
                u128 sum = static_cast<u128>(u[i + j]) + v[i] + c;
                u[i + j] = static_cast<u64>(sum);
                c = sum >> 64;
            }
            u[j + vn] += static_cast<u64>(c);
        }
    }

    shr_limbs(u, vn, shift);
    for (int i = 0; i < vn; ++i) rem[i] = u[i];
}

} // namespace

U256 mul_mod(const U256& a, const U256& b, const U256& m) {
    if (m.is_zero()) throw std::invalid_argument("modulus must be non-zero");
    u64 prod[8];
    mul_full(a, b, prod);

    const int un = top_limb(prod, 8) + 1;
    const int vn = top_limb(m.w.data(), 4) + 1;
    U256 out;
    if (un == 0) return out; // product is zero
    if (un < vn) {
        for (int i = 0; i < un; ++i) out.w[static_cast<std::size_t>(i)] = prod[i];
        return out;
    }
    u64 rem[4] = {0, 0, 0, 0};
    div_rem(prod, un, m.w.data(), vn, rem);
    for (int i = 0; i < vn; ++i) out.w[static_cast<std::size_t>(i)] = rem[i];
    return out;
}

U256 chain_mul_mod(U256 acc, const U256& base, const U256& m,
                   std::uint64_t iters) {
    for (std::uint64_t i = 0; i < iters; ++i) acc = mul_mod(acc, base, m);
    return acc;
}

U256 mod_pow(const U256& base, std::uint64_t exp, const U256& m) {
    U256 result = U256::from_u64(1);
    // reduce base mod m first
    U256 b = mul_mod(base, U256::from_u64(1), m);
    while (exp > 0) {
        if (exp & 1) result = mul_mod(result, b, m);
        b = mul_mod(b, b, m);
        exp >>= 1;
    }
    return result;
}

} // namespace dosbench
