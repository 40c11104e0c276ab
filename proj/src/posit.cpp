#include "pnn/posit.hpp"

#include <atomic>
#include <bit>
#include <cassert>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "pnn/posit_tables.hpp"

namespace pnn {

namespace {

std::atomic<ArithMode> g_mode{ArithMode::kAuto};
std::atomic<uint64_t> g_from_f64_count{0};

void check_config(const PositConfig& cfg) {
    if (!cfg.valid()) {
        throw std::invalid_argument("invalid posit config (" +
                                    std::to_string(cfg.nbits) + "," +
                                    std::to_string(cfg.es) + ")");
    }
}

void check_same_config(const PositValue& a, const PositValue& b) {
    if (!(a.config == b.config)) {
        throw std::invalid_argument(
            "posit config mismatch: " + to_string(a.config) + " vs " +
            to_string(b.config) + "; use convert() for mixed formats");
    }
}

int floor_div(int a, int b) {
    int q = a / b;
    if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

ArithMode default_arith_mode() { return g_mode.load(std::memory_order_relaxed); }
void set_default_arith_mode(ArithMode m) { g_mode.store(m, std::memory_order_relaxed); }

bool float64_path_ok(const PositConfig& cfg) {
    // Every value must be an exact binary64 and products/sums must stay in
    // the normal double range (2 * max_scale plus headroom for error terms).
    return cfg.nbits <= 32 && 2 * cfg.max_scale() + 64 < 1023;
}

PositValue make_zero(const PositConfig& cfg) { check_config(cfg); return {cfg, 0}; }
PositValue make_nar(const PositConfig& cfg) { check_config(cfg); return {cfg, cfg.nar_pattern()}; }
PositValue make_maxpos(const PositConfig& cfg) { check_config(cfg); return {cfg, cfg.maxpos_pattern()}; }
PositValue make_minpos(const PositConfig& cfg) { check_config(cfg); return {cfg, 1}; }

bool is_zero(const PositValue& v) { return v.bits == 0; }
bool is_nar(const PositValue& v) { return v.bits == v.config.nar_pattern(); }

std::string to_string(const PositConfig& cfg) {
    return "posit(" + std::to_string(cfg.nbits) + "," + std::to_string(cfg.es) + ")";
}

namespace detail {

Unpacked unpack(const PositConfig& cfg, uint64_t bits) {
    Unpacked u;
    bits &= cfg.pattern_mask();
    if (bits == 0) { u.cls = PositClass::kZero; return u; }
    if (bits == cfg.nar_pattern()) { u.cls = PositClass::kNaR; return u; }
    u.cls = PositClass::kFinite;
    u.neg = (bits >> (cfg.nbits - 1)) & 1;
    uint64_t mag = u.neg ? ((~bits + 1) & cfg.pattern_mask()) : bits;
    // Payload: nbits-1 bits below the sign, MSB-aligned into a 64-bit word.
    uint64_t p = mag << (64 - (cfg.nbits - 1));
    int run = (p >> 63) ? std::countl_one(p) : std::countl_zero(p);
    int k = (p >> 63) ? run - 1 : -run;
    int used = run + 1;  // regime bits incl. terminator (may overrun payload)
    int rem = (cfg.nbits - 1) - used;
    if (rem < 0) rem = 0;
    uint64_t tail = (used < 64) ? (p << used) : 0;
    int ebits = cfg.es < rem ? cfg.es : rem;
    unsigned exponent = ebits > 0 ? unsigned(tail >> (64 - ebits)) : 0;
    exponent <<= (cfg.es - ebits);  // truncated low exponent bits are zero
    int fbits = rem - ebits;
    uint64_t frac = fbits > 0 ? ((tail << ebits) >> (64 - fbits)) : 0;
    u.scale = (k << cfg.es) + int(exponent);
    u.sig = (uint64_t{1} << 63) | (fbits > 0 ? frac << (63 - fbits) : 0);
    return u;
}

uint64_t pack_round(const PositConfig& cfg, bool neg, int scale, uint64_t sig,
                    bool sticky) {
    const uint64_t mask = cfg.pattern_mask();
    if (sig == 0) return 0;
    assert(sig >> 63);
    const int R = cfg.max_scale();
    uint64_t pat;
    if (scale >= R) {
        pat = cfg.maxpos_pattern();  // saturate, |x| >= maxpos
    } else if (scale < -R) {
        pat = 1;  // no underflow, 0 < |x| < minpos
    } else {
        int k = floor_div(scale, 1 << cfg.es);
        int e = scale - (k << cfg.es);
        int rl = k >= 0 ? k + 2 : 1 - k;  // regime bits incl. terminator
        assert(rl <= cfg.nbits - 1 && rl <= 63);
        // Assemble the unbounded encoding MSB-first in a 128-bit window:
        // [regime rl][exponent es][fraction 63]; cut after nbits-1 payload
        // bits with guard/sticky below the cut.
        uint64_t regime = k >= 0 ? (((uint64_t{1} << (k + 1)) - 1) << 1) : 1;
        unsigned __int128 s = (unsigned __int128)regime << (128 - rl);
        if (cfg.es > 0) {
            s |= (unsigned __int128)(unsigned)e << (128 - rl - cfg.es);
        }
        uint64_t frac = sig & ~(uint64_t{1} << 63);  // 63 bits
        int fsh = 128 - rl - cfg.es - 63;
        if (fsh >= 0) {
            s |= (unsigned __int128)frac << fsh;
        } else {
            s |= (unsigned __int128)frac >> (-fsh);
            sticky = sticky || (frac & ((uint64_t{1} << (-fsh)) - 1)) != 0;
        }
        pat = uint64_t(s >> (128 - (cfg.nbits - 1)));
        int guard = int(s >> (128 - cfg.nbits)) & 1;
        sticky = sticky || (unsigned __int128)(s << cfg.nbits) != 0;
        if (guard && (sticky || (pat & 1))) ++pat;
        assert(pat >= 1 && pat <= cfg.maxpos_pattern());
    }
    return neg ? ((~pat + 1) & mask) : pat;
}

namespace {

struct Wide {
    // value = (-1)^neg * sig * 2^(scale - 63), plus a sticky tail.
    bool neg = false;
    int scale = 0;
    uint64_t sig = 0;
    bool sticky = false;
};

Wide normalize128(bool neg, int scale127, unsigned __int128 v, bool sticky) {
    // value = v * 2^(scale127 - 127), v < 2^128, possibly zero.
    Wide w;
    w.neg = neg;
    w.sticky = sticky;
    if (v == 0) return w;
    uint64_t hi = uint64_t(v >> 64), lo = uint64_t(v);
    int top = hi ? 127 - std::countl_zero(hi) : 63 - std::countl_zero(lo);
    if (top >= 64) {
        int drop = top - 63;  // in [1, 64]
        w.sig = uint64_t(v >> drop);
        w.sticky = w.sticky || (unsigned __int128)(v << (128 - drop)) != 0;
    } else {
        w.sig = lo << (63 - top);
    }
    w.scale = scale127 - 127 + top;
    return w;
}

uint64_t pack_wide(const PositConfig& cfg, const Wide& w) {
    if (w.sig == 0) return 0;
    return pack_round(cfg, w.neg, w.scale, w.sig, w.sticky);
}

}  // namespace

// ---- exact integer kernel ----

static uint64_t mul_exact(const PositConfig& cfg, const Unpacked& a, const Unpacked& b) {
    unsigned __int128 p = (unsigned __int128)a.sig * b.sig;  // [2^126, 2^128)
    Wide w = normalize128(a.neg != b.neg, a.scale + b.scale + 1, p, false);
    return pack_wide(cfg, w);
}

static uint64_t add_exact(const PositConfig& cfg, Unpacked a, Unpacked b,
                          bool negate_b) {
    bool aneg = a.neg;
    bool bneg = b.neg != negate_b;
    if ((b.scale > a.scale) || (b.scale == a.scale && b.sig > a.sig)) {
        std::swap(a, b);
        std::swap(aneg, bneg);
    }
    // Working window: hidden bit of a at bit 126.
    unsigned __int128 SA = (unsigned __int128)a.sig << 63;
    int d = a.scale - b.scale;
    unsigned __int128 SB = 0;
    bool stickyb = false;
    if (d <= 127) {
        unsigned __int128 full = (unsigned __int128)b.sig << 63;
        SB = full >> d;
        if (d > 0) stickyb = (unsigned __int128)(full << (128 - d)) != 0;
    } else {
        stickyb = true;
    }
    unsigned __int128 S;
    if (aneg == bneg) {
        S = SA + SB;
    } else {
        // a - (SB + eps): borrow one ulp into the sticky tail.
        S = SA - SB - (stickyb ? 1 : 0);
    }
    if (S == 0 && !stickyb) return 0;  // exact cancellation
    Wide w = normalize128(aneg, a.scale + 1, S, stickyb);
    return pack_wide(cfg, w);
}

static uint64_t div_exact(const PositConfig& cfg, const Unpacked& a, const Unpacked& b) {
    bool neg = a.neg != b.neg;
    unsigned __int128 num = (unsigned __int128)a.sig << 64;
    unsigned __int128 q = num / b.sig;  // ratio in (1/2, 2) => q in (2^63, 2^65)
    unsigned __int128 rem = num % b.sig;
    int scale = a.scale - b.scale;
    uint64_t q64;
    bool sticky;
    if (q >> 64) {
        q64 = uint64_t(q >> 1);
        sticky = (q & 1) != 0 || rem != 0;
    } else {
        q64 = uint64_t(q);
        sticky = rem != 0;
        scale -= 1;
    }
    assert(q64 >> 63);
    return pack_round(cfg, neg, scale, q64, sticky);
}

// ---- double fast path ----

double decode_f64(const PositConfig& cfg, uint64_t bits) {
    Unpacked u = unpack(cfg, bits);
    if (u.cls == PositClass::kZero) return 0.0;
    if (u.cls == PositClass::kNaR) return std::numeric_limits<double>::quiet_NaN();
    int tz = std::countr_zero(u.sig);
    double m = double(u.sig >> tz);  // exact for nbits <= 32
    double v = std::ldexp(m, u.scale - 63 + tz);
    return u.neg ? -v : v;
}

// from_float64 without the boundary counter; x must be finite nonzero.
uint64_t encode_exact_f64(const PositConfig& cfg, double x) {
    uint64_t b;
    std::memcpy(&b, &x, 8);
    bool neg = b >> 63;
    int be = int((b >> 52) & 0x7FF);
    uint64_t m = b & ((uint64_t{1} << 52) - 1);
    int scale;
    uint64_t sig;
    if (be == 0) {  // subnormal
        int lead = std::countl_zero(m);  // m != 0 for nonzero x
        sig = m << lead;
        scale = -1023 - (lead - 11);
    } else {
        sig = ((uint64_t{1} << 52) | m) << 11;
        scale = be - 1023;
    }
    return pack_round(cfg, neg, scale, sig, false);
}

double round_f64(const PositConfig& cfg, double x) {
    if (x == 0.0) return 0.0;
    if (std::isnan(x)) return x;
    uint64_t b;
    std::memcpy(&b, &x, 8);
    bool neg = b >> 63;
    int be = int((b >> 52) & 0x7FF);
    uint64_t m = b & ((uint64_t{1} << 52) - 1);
    const int R = cfg.max_scale();
    if (be == 0x7FF || be - 1023 >= R) {  // saturate
        double mp = decode_f64(cfg, cfg.maxpos_pattern());
        return neg ? -mp : mp;
    }
    if (be == 0 || be - 1023 < -R) {  // below minpos (incl. subnormals)
        double mp = decode_f64(cfg, 1);
        return neg ? -mp : mp;
    }
    int sc = be - 1023;
    int k = sc >> cfg.es;
    int rl = k >= 0 ? k + 2 : 1 - k;
    int fb = cfg.nbits - 1 - rl - cfg.es;
    if (fb >= 1 && fb <= 51) {
        int drop = 52 - fb;
        uint64_t low = m & ((uint64_t{1} << drop) - 1);
        uint64_t half = uint64_t{1} << (drop - 1);
        uint64_t q = m >> drop;
        if (low > half || (low == half && (q & 1))) ++q;
        if (q >> fb) {  // rounded up into the next binade
            ++sc;
            q = 0;
            if (sc >= R) {
                double mp = decode_f64(cfg, cfg.maxpos_pattern());
                return neg ? -mp : mp;
            }
        }
        uint64_t out = (uint64_t(neg) << 63) | (uint64_t(sc + 1023) << 52) |
                       (q << (52 - fb));
        double r;
        std::memcpy(&r, &out, 8);
        return r;
    }
    // Cut inside the regime/exponent fields: rare, take the exact encoder.
    return decode_f64(cfg, encode_exact_f64(cfg, x));
}

namespace {

// Finish a round-to-odd step: the exact value is s + err with err != 0, so
// force s odd in the direction of err.
inline double nudge_odd(double s, bool err_positive) {
    uint64_t b;
    std::memcpy(&b, &s, 8);
    if (b & 1) return s;
    bool away = err_positive != (s < 0.0);  // toward larger magnitude?
    b += away ? 1 : uint64_t(-1);
    double r;
    std::memcpy(&r, &b, 8);
    return r;
}

}  // namespace

double add_f64(const PositConfig& cfg, double a, double b) {
    double s = a + b;
    if (std::isnan(s)) return s;
    // 2Sum error term (exact; no overflow in the eligible range).
    double ap = s - b;
    double bp = s - ap;
    double err = (a - ap) + (b - bp);
    if (err != 0.0) s = nudge_odd(s, err > 0.0);
    return round_f64(cfg, s);
}

double sub_f64(const PositConfig& cfg, double a, double b) {
    return add_f64(cfg, a, -b);
}

double mul_f64(const PositConfig& cfg, double a, double b) {
    double p = a * b;
    if (std::isnan(p)) return p;
    if (cfg.nbits > 28 && p != 0.0) {  // significand product may exceed 53 bits
        double err = std::fma(a, b, -p);
        if (err != 0.0) p = nudge_odd(p, err > 0.0);
    }
    return round_f64(cfg, p);
}

double div_f64(const PositConfig& cfg, double a, double b) {
    double q = a / b;
    if (std::isnan(q) || q == 0.0) return q;
    double r = std::fma(-q, b, a);  // a - q*b, exact
    if (r != 0.0) q = nudge_odd(q, (r > 0.0) == (b > 0.0));
    return round_f64(cfg, q);
}

}  // namespace detail

DecodedPosit decode(const PositValue& v) {
    check_config(v.config);
    DecodedPosit d;
    uint64_t bits = v.bits & v.config.pattern_mask();
    if (bits == 0) { d.cls = PositClass::kZero; return d; }
    if (bits == v.config.nar_pattern()) { d.cls = PositClass::kNaR; return d; }
    d.cls = PositClass::kFinite;
    d.sign = int((bits >> (v.config.nbits - 1)) & 1);
    uint64_t mag = d.sign ? ((~bits + 1) & v.config.pattern_mask()) : bits;
    uint64_t p = mag << (64 - (v.config.nbits - 1));
    int run = (p >> 63) ? std::countl_one(p) : std::countl_zero(p);
    d.k = (p >> 63) ? run - 1 : -run;
    int used = run + 1;
    int rem = (v.config.nbits - 1) - used;
    if (rem < 0) rem = 0;
    uint64_t tail = (used < 64) ? (p << used) : 0;
    int ebits = v.config.es < rem ? v.config.es : rem;
    d.exponent = ebits > 0 ? unsigned(tail >> (64 - ebits)) : 0;
    d.exponent <<= (v.config.es - ebits);
    d.fraction_bits = rem - ebits;
    d.fraction = d.fraction_bits > 0 ? ((tail << ebits) >> (64 - d.fraction_bits)) : 0;
    d.scale = (d.k << v.config.es) + int(d.exponent);
    return d;
}

PositValue negate(const PositValue& v) {
    check_config(v.config);
    return {v.config, (~v.bits + 1) & v.config.pattern_mask()};
}

namespace {

enum class Op : int { kAdd = 0, kSub = 1, kMul = 2, kDiv = 3 };

uint64_t exact_op(const PositConfig& cfg, Op op, uint64_t ab, uint64_t bb) {
    using namespace detail;
    Unpacked a = unpack(cfg, ab), b = unpack(cfg, bb);
    if (a.cls == PositClass::kNaR || b.cls == PositClass::kNaR)
        return cfg.nar_pattern();
    switch (op) {
        case Op::kAdd:
        case Op::kSub: {
            bool negb = op == Op::kSub;
            if (b.cls == PositClass::kZero) return ab;
            if (a.cls == PositClass::kZero)
                return negb ? ((~bb + 1) & cfg.pattern_mask()) : bb;
            return add_exact(cfg, a, b, negb);
        }
        case Op::kMul:
            if (a.cls == PositClass::kZero || b.cls == PositClass::kZero) return 0;
            return mul_exact(cfg, a, b);
        case Op::kDiv:
            if (b.cls == PositClass::kZero) return cfg.nar_pattern();
            if (a.cls == PositClass::kZero) return 0;
            return div_exact(cfg, a, b);
    }
    return cfg.nar_pattern();
}

uint64_t f64_op(const PositConfig& cfg, Op op, uint64_t ab, uint64_t bb) {
    using namespace detail;
    if (ab == cfg.nar_pattern() || bb == cfg.nar_pattern()) return cfg.nar_pattern();
    double a = decode_f64(cfg, ab), b = decode_f64(cfg, bb);
    double r = 0;
    switch (op) {
        case Op::kAdd: r = add_f64(cfg, a, b); break;
        case Op::kSub: r = sub_f64(cfg, a, b); break;
        case Op::kMul: r = mul_f64(cfg, a, b); break;
        case Op::kDiv:
            if (b == 0.0) return cfg.nar_pattern();
            r = div_f64(cfg, a, b);
            break;
    }
    if (std::isnan(r)) return cfg.nar_pattern();
    if (r == 0.0) return 0;
    return encode_exact_f64(cfg, r);  // r is exactly a posit value
}

uint64_t run_op(const PositConfig& cfg, Op op, uint64_t ab, uint64_t bb,
                ArithMode mode) {
    if (mode == ArithMode::kAuto) mode = default_arith_mode();
    if (mode == ArithMode::kAuto) {
        if (cfg.nbits <= kTableMaxBits) mode = ArithMode::kTable;
        else if (float64_path_ok(cfg)) mode = ArithMode::kFloat64;
        else mode = ArithMode::kExact;
    }
    switch (mode) {
        case ArithMode::kTable:
            if (cfg.nbits <= kTableMaxBits) {
                return op_tables(cfg).lookup(int(op), ab, bb);
            }
            return run_op(cfg, op, ab, bb, ArithMode::kExact);
        case ArithMode::kFloat64:
            if (float64_path_ok(cfg)) return f64_op(cfg, op, ab, bb);
            return exact_op(cfg, op, ab, bb);
        default:
            return exact_op(cfg, op, ab, bb);
    }
}

}  // namespace

namespace detail {
uint64_t exact_scalar_op(const PositConfig& cfg, int op, uint64_t a, uint64_t b) {
    return exact_op(cfg, Op(op), a, b);
}
uint64_t f64_scalar_op(const PositConfig& cfg, int op, uint64_t a, uint64_t b) {
    return f64_op(cfg, Op(op), a, b);
}
}  // namespace detail

PositValue add(const PositValue& a, const PositValue& b, ArithMode mode) {
    check_same_config(a, b);
    return {a.config, run_op(a.config, Op::kAdd, a.bits, b.bits, mode)};
}
PositValue sub(const PositValue& a, const PositValue& b, ArithMode mode) {
    check_same_config(a, b);
    return {a.config, run_op(a.config, Op::kSub, a.bits, b.bits, mode)};
}
PositValue mul(const PositValue& a, const PositValue& b, ArithMode mode) {
    check_same_config(a, b);
    return {a.config, run_op(a.config, Op::kMul, a.bits, b.bits, mode)};
}
PositValue div(const PositValue& a, const PositValue& b, ArithMode mode) {
    check_same_config(a, b);
    return {a.config, run_op(a.config, Op::kDiv, a.bits, b.bits, mode)};
}

PositValue convert(const PositValue& v, const PositConfig& target) {
    check_config(v.config);
    check_config(target);
    using namespace detail;
    Unpacked u = unpack(v.config, v.bits);
    if (u.cls == PositClass::kZero) return {target, 0};
    if (u.cls == PositClass::kNaR) return {target, target.nar_pattern()};
    return {target, pack_round(target, u.neg, u.scale, u.sig, false)};
}

double to_float64(const PositValue& v) {
    check_config(v.config);
    return detail::decode_f64(v.config, v.bits);
}

PositValue from_float64(double x, const PositConfig& cfg) {
    check_config(cfg);
    g_from_f64_count.fetch_add(1, std::memory_order_relaxed);
    if (x == 0.0) return {cfg, 0};
    if (!std::isfinite(x)) return {cfg, cfg.nar_pattern()};
    return {cfg, detail::encode_exact_f64(cfg, x)};
}

uint64_t from_float64_call_count() {
    return g_from_f64_count.load(std::memory_order_relaxed);
}

int compare(const PositValue& a, const PositValue& b) {
    check_same_config(a, b);
    int sh = 64 - a.config.nbits;
    int64_t ia = int64_t(a.bits << sh) >> sh;
    int64_t ib = int64_t(b.bits << sh) >> sh;
    return ia < ib ? -1 : (ia > ib ? 1 : 0);
}

PositValue ldexp_posit(const PositValue& v, int k) {
    check_config(v.config);
    using namespace detail;
    Unpacked u = unpack(v.config, v.bits);
    if (u.cls != PositClass::kFinite) return v;
    long s = long(u.scale) + k;
    int R = v.config.max_scale();
    if (s > R) s = R;
    if (s < -R - 1) s = -R - 1;
    return {v.config, pack_round(v.config, u.neg, int(s), u.sig, false)};
}

PositValue round_to_int(const PositValue& v) {
    check_config(v.config);
    using namespace detail;
    Unpacked u = unpack(v.config, v.bits);
    if (u.cls != PositClass::kFinite) return v;
    if (u.scale >= 63) return v;  // already integral at this magnitude
    if (u.scale < -1) return make_zero(v.config);
    if (u.scale == -1) {
        // |v| in [0.5, 1): ties to even give 0 at exactly one half.
        if (u.sig == (uint64_t{1} << 63)) return make_zero(v.config);
        return {v.config, pack_round(v.config, u.neg, 0, uint64_t{1} << 63, false)};
    }
    int fbits = 63 - u.scale;
    uint64_t ipart = u.sig >> fbits;
    uint64_t rem = u.sig & ((uint64_t{1} << fbits) - 1);
    uint64_t half = uint64_t{1} << (fbits - 1);
    if (rem > half || (rem == half && (ipart & 1))) ++ipart;
    int lead = std::countl_zero(ipart);
    return {v.config, pack_round(v.config, u.neg, 63 - lead, ipart << lead, false)};
}

int64_t to_int64(const PositValue& v) {
    using namespace detail;
    Unpacked u = unpack(v.config, v.bits);
    if (u.cls != PositClass::kFinite) return 0;
    if (u.scale < 0) return 0;
    if (u.scale >= 62) return u.neg ? INT64_MIN : INT64_MAX;
    int64_t mag = int64_t(u.sig >> (63 - u.scale));
    return u.neg ? -mag : mag;
}

std::vector<std::pair<uint64_t, double>> enumerate_values(const PositConfig& cfg) {
    check_config(cfg);
    if (cfg.nbits > 24) {
        throw std::invalid_argument("enumerate_values: nbits too large to enumerate");
    }
    std::vector<std::pair<uint64_t, double>> out;
    uint64_t count = uint64_t{1} << cfg.nbits;
    out.reserve(count);
    for (uint64_t b = 0; b < count; ++b) {
        out.emplace_back(b, detail::decode_f64(cfg, b));
    }
    return out;
}

}  // namespace pnn
