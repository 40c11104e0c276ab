#pragma once

#include <cstdint>
#include <vector>

#include "pnn/posit.hpp"

// Precomputed per-config tables.  Operation tables cover all operand pairs
// for nbits <= kTableMaxBits and are generated from the exact kernel, so
// they are bit-identical to it by construction.  Decode tables cover
// nbits <= 16 and back the fast tensor kernels and the quire.

namespace pnn {

struct OpTables {
    PositConfig cfg;
    int shift = 0;                    // nbits
    std::vector<uint16_t> ops[4];     // add, sub, mul, div

    uint64_t lookup(int op, uint64_t a, uint64_t b) const {
        return ops[op][(a << shift) | b];
    }
};

struct DecodeTables {
    PositConfig cfg;
    // Pattern -> exact double value (NaR as NaN).
    std::vector<double> value;
    // Pattern -> integer significand form: x = (-1)^neg * sig * 2^lsb_scale.
    // Zero is stored as sig = 0 so accumulating it is a no-op.
    struct Fixed {
        int32_t lsb_scale = 0;
        uint32_t sig = 0;
        uint8_t neg = 0;
        uint8_t nar = 0;
    };
    std::vector<Fixed> fixed;
};

const OpTables& op_tables(const PositConfig& cfg);
const DecodeTables& decode_tables(const PositConfig& cfg);

}  // namespace pnn
