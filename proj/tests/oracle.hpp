#pragma once

#include <cstdint>
#include <vector>

#include "pnn/posit.hpp"

// Independent reference for posit arithmetic, used only by tests.
//
// Patterns are decoded into exact dyadic rationals by walking the bit fields
// of Eq-style posit decoding, and rounding is resolved by comparing against
// the decision boundaries, which are the values of the (nbits+1)-bit
// patterns 2p+1 in the same es.  Everything is exact integer arithmetic;
// nothing is shared with the library's kernels.

namespace oracle {

// value = mant * 2^exp2 (mant signed, may be zero).
struct Dyadic {
    __int128 mant = 0;
    int exp2 = 0;
};

int cmp(const Dyadic& a, const Dyadic& b);
Dyadic dy_add(const Dyadic& a, const Dyadic& b);
Dyadic dy_mul(const Dyadic& a, const Dyadic& b);
Dyadic dy_neg(const Dyadic& a);

class PositOracle {
public:
    explicit PositOracle(const pnn::PositConfig& cfg);

    const pnn::PositConfig& config() const { return cfg_; }

    bool is_nar(uint64_t bits) const { return bits == nar_; }
    bool is_zero(uint64_t bits) const { return bits == 0; }
    // Exact value of a finite pattern.
    Dyadic value(uint64_t bits) const;

    // Round an exact dyadic to the nearest pattern (bit-pattern ties to
    // even, saturation at maxpos, no underflow below minpos).
    uint64_t round(const Dyadic& x) const;
    // Round num/den (den > 0) without forming the quotient.
    uint64_t round_ratio(Dyadic num, Dyadic den) const;
    // Round sqrt(x) for x > 0 by comparing x against squared grid values
    // and squared boundaries.
    uint64_t round_sqrt(const Dyadic& x) const;

    // op: 0 add, 1 sub, 2 mul, 3 div -- with NaR/zero semantics.
    uint64_t op(int op, uint64_t a, uint64_t b) const;

private:
    struct Entry {
        Dyadic val;       // value of pattern
        Dyadic boundary;  // value of (nbits+1)-pattern 2p+1, boundary to next
        uint64_t pattern;
    };
    // cmp of x against a positive entry value / boundary.
    uint64_t round_positive(const Dyadic& x) const;
    uint64_t round_ratio_positive(const Dyadic& num, const Dyadic& den) const;

    pnn::PositConfig cfg_;
    uint64_t nar_, mask_;
    std::vector<Entry> pos_;  // positive patterns sorted by exact value
};

}  // namespace oracle
