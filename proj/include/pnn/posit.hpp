#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Scalar posit arithmetic for arbitrary (nbits, es), nbits in [2, 64],
// es in [0, 4].  Bit patterns are kept right-aligned in a uint64_t with the
// upper bits zero.  Pattern 0 is zero, pattern 1000...0 is NaR, everything
// else is a unique nonzero real.  Rounding is round-to-nearest with ties to
// the even bit pattern, saturating at +-maxpos, never underflowing below
// +-minpos.

namespace pnn {

struct PositConfig {
    int nbits = 32;
    int es = 2;

    static constexpr int kMaxBits = 64;
    static constexpr int kMaxEs = 4;

    bool valid() const {
        return nbits >= 2 && nbits <= kMaxBits && es >= 0 && es <= kMaxEs;
    }
    // useed = 2^(2^es); max_scale = (nbits-2) * 2^es, so maxpos = 2^max_scale.
    int max_scale() const { return (nbits - 2) << es; }
    uint64_t pattern_mask() const {
        return nbits == 64 ? ~uint64_t{0} : ((uint64_t{1} << nbits) - 1);
    }
    uint64_t nar_pattern() const { return uint64_t{1} << (nbits - 1); }
    uint64_t maxpos_pattern() const { return nar_pattern() - 1; }
    uint64_t minpos_pattern() const { return 1; }
    int quire_bits() const { return 4 * (nbits - 2) * (1 << es) + nbits; }
    // Number of guaranteed-exact accumulations: 2^(nbits-1) - 1.
    uint64_t quire_dot_limit() const {
        return (uint64_t{1} << (nbits - 1)) - 1;
    }

    friend bool operator==(const PositConfig&, const PositConfig&) = default;
};

struct PositValue {
    PositConfig config;
    uint64_t bits = 0;

    friend bool operator==(const PositValue&, const PositValue&) = default;
};

enum class PositClass : uint8_t { kZero, kNaR, kFinite };

// Field-level view of a finite pattern: value =
//   (-1)^sign * 2^(2^es * k) * 2^exponent * (1 + fraction / 2^fraction_bits)
struct DecodedPosit {
    PositClass cls = PositClass::kZero;
    int sign = 0;       // 0 positive, 1 negative
    int k = 0;          // regime run-length value
    unsigned exponent = 0;
    uint64_t fraction = 0;
    int fraction_bits = 0;
    int scale = 0;      // 2^es * k + exponent
};

// How scalar add/sub/mul/div are computed.  All paths are bit-identical;
// kExact is the integer-significand reference, kFloat64 uses the double
// round-to-odd fast path (formats with nbits <= 32), kTable uses the
// precomputed per-config tables (nbits <= kTableMaxBits).  kAuto picks the
// fastest eligible path.
enum class ArithMode : uint8_t { kAuto, kExact, kFloat64, kTable };

ArithMode default_arith_mode();
void set_default_arith_mode(ArithMode m);

inline constexpr int kTableMaxBits = 10;
bool float64_path_ok(const PositConfig& cfg);

PositValue make_zero(const PositConfig& cfg);
PositValue make_nar(const PositConfig& cfg);
PositValue make_maxpos(const PositConfig& cfg);
PositValue make_minpos(const PositConfig& cfg);

bool is_zero(const PositValue& v);
bool is_nar(const PositValue& v);

DecodedPosit decode(const PositValue& v);
// Negation is the two's complement of the pattern.
PositValue negate(const PositValue& v);

PositValue add(const PositValue& a, const PositValue& b,
               ArithMode mode = ArithMode::kAuto);
PositValue sub(const PositValue& a, const PositValue& b,
               ArithMode mode = ArithMode::kAuto);
PositValue mul(const PositValue& a, const PositValue& b,
               ArithMode mode = ArithMode::kAuto);
PositValue div(const PositValue& a, const PositValue& b,
               ArithMode mode = ArithMode::kAuto);

PositValue convert(const PositValue& v, const PositConfig& target);

// Exact for nbits <= 32 (every such posit is a binary64).
double to_float64(const PositValue& v);
PositValue from_float64(double x, const PositConfig& cfg);
// Running count of from_float64 calls; used to audit the float->posit
// boundary during training.
uint64_t from_float64_call_count();

// Total order with NaR below every real; equals signed comparison of the
// two's-complement patterns.  Returns <0, 0, >0.
int compare(const PositValue& a, const PositValue& b);

// Exact scaling by 2^k (regime/exponent shift); saturates at +-maxpos and
// +-minpos like every other op.
PositValue ldexp_posit(const PositValue& v, int k);
// Nearest integer-valued posit (ties to even integer); exact field math.
PositValue round_to_int(const PositValue& v);
// Truncated integer readback of an integer-valued posit.
int64_t to_int64(const PositValue& v);

// All 2^nbits patterns with their decoded values (NaR reported as NaN).
std::vector<std::pair<uint64_t, double>> enumerate_values(const PositConfig& cfg);

std::string to_string(const PositConfig& cfg);

namespace detail {

// Internal normalized form of a finite nonzero posit:
// value = (-1)^neg * sig * 2^(scale - 63), sig in [2^63, 2^64).
struct Unpacked {
    PositClass cls = PositClass::kZero;
    bool neg = false;
    int scale = 0;
    uint64_t sig = 0;
};

Unpacked unpack(const PositConfig& cfg, uint64_t bits);
// Round (sign, scale, sig, sticky) into a pattern; sig normalized as above,
// sticky = nonzero value below the last sig bit.
uint64_t pack_round(const PositConfig& cfg, bool neg, int scale, uint64_t sig,
                    bool sticky);

// Double fast path.  decode_f64 is exact for nbits <= 32; round_f64 returns
// the nearest posit value *as a double*.
double decode_f64(const PositConfig& cfg, uint64_t bits);
double round_f64(const PositConfig& cfg, double x);
// Encode a finite nonzero double into a pattern (exact rounding; no
// boundary-counter side effect, unlike from_float64).
uint64_t encode_exact_f64(const PositConfig& cfg, double x);

double add_f64(const PositConfig& cfg, double a, double b);
double sub_f64(const PositConfig& cfg, double a, double b);
double mul_f64(const PositConfig& cfg, double a, double b);
double div_f64(const PositConfig& cfg, double a, double b);

// Single scalar op on raw patterns through one specific path
// (op: 0 add, 1 sub, 2 mul, 3 div).  Exposed for cross-path testing.
uint64_t exact_scalar_op(const PositConfig& cfg, int op, uint64_t a, uint64_t b);
uint64_t f64_scalar_op(const PositConfig& cfg, int op, uint64_t a, uint64_t b);

}  // namespace detail

}  // namespace pnn
