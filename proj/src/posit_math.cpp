#include "pnn/posit_math.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace pnn {

namespace {

constexpr int kExpDegree = 10;
constexpr int kLogTerms = 8;  // atanh series terms t, t^3/3, ..., t^15/15

struct MathConsts {
    PositValue one, two, half, ln2, log2e, three_halves;
    PositValue exp_coeff[kExpDegree + 1];  // 1/k!
    PositValue log_coeff[kLogTerms];       // 1/(2k+1)
};

const MathConsts& consts_for(const PositConfig& cfg) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<MathConsts>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(cfg.nbits, cfg.es);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;
    auto c = std::make_unique<MathConsts>();
    c->one = from_int64(1, cfg);
    c->two = from_int64(2, cfg);
    c->half = from_float64(0.5, cfg);
    c->ln2 = from_float64(0.6931471805599453, cfg);
    c->log2e = from_float64(1.4426950408889634, cfg);
    c->three_halves = from_float64(1.5, cfg);
    double fact = 1.0;
    for (int k = 0; k <= kExpDegree; ++k) {
        if (k > 0) fact *= k;
        c->exp_coeff[k] = from_float64(1.0 / fact, cfg);
    }
    for (int k = 0; k < kLogTerms; ++k) {
        c->log_coeff[k] = from_float64(1.0 / (2 * k + 1), cfg);
    }
    const MathConsts& ref = *c;
    cache.emplace(key, std::move(c));
    return ref;
}

}  // namespace

PositValue from_int64(int64_t v, const PositConfig& cfg) {
    if (v == 0) return make_zero(cfg);
    bool neg = v < 0;
    uint64_t mag = neg ? (~uint64_t(v) + 1) : uint64_t(v);
    int lead = std::countl_zero(mag);
    return {cfg, detail::pack_round(cfg, neg, 63 - lead, mag << lead, false)};
}

bool is_negative(const PositValue& x) {
    return !is_nar(x) && ((x.bits >> (x.config.nbits - 1)) & 1);
}

PositValue abs_posit(const PositValue& x) {
    return is_negative(x) ? negate(x) : x;
}

PositValue exp_posit(const PositValue& x) {
    const PositConfig& cfg = x.config;
    if (is_nar(x)) return x;
    const MathConsts& c = consts_for(cfg);
    if (is_zero(x)) return c.one;
    const int R = cfg.max_scale();
    // k = nearest integer to x / ln 2; the same posit value feeds both the
    // residual and the final scaling so they stay consistent.
    PositValue kp = round_to_int(mul(x, c.log2e));
    int64_t k = to_int64(kp);
    if (k > R) return make_maxpos(cfg);
    if (k < -R - 1) return make_minpos(cfg);
    PositValue r = sub(x, mul(kp, c.ln2));
    PositValue p = c.exp_coeff[kExpDegree];
    for (int i = kExpDegree - 1; i >= 0; --i) {
        p = add(mul(p, r), c.exp_coeff[i]);
    }
    return ldexp_posit(p, int(k));
}

PositValue log_posit(const PositValue& x) {
    const PositConfig& cfg = x.config;
    if (is_nar(x) || is_negative(x) || is_zero(x)) return make_nar(cfg);
    const MathConsts& c = consts_for(cfg);
    DecodedPosit d = decode(x);
    int s = d.scale;
    PositValue m = ldexp_posit(x, -s);  // exact, m in [1, 2)
    if (compare(m, c.three_halves) >= 0) {
        m = ldexp_posit(m, -1);
        s += 1;
    }
    // log m = 2 atanh(t), t = (m-1)/(m+1) in (-1/5, 1/3).
    PositValue t = div(sub(m, c.one), add(m, c.one));
    PositValue u = mul(t, t);
    PositValue inner = c.log_coeff[kLogTerms - 1];
    for (int i = kLogTerms - 2; i >= 0; --i) {
        inner = add(mul(inner, u), c.log_coeff[i]);
    }
    PositValue logm = mul(c.two, mul(t, inner));
    return add(mul(from_int64(s, cfg), c.ln2), logm);
}

PositValue tanh_posit(const PositValue& x) {
    const PositConfig& cfg = x.config;
    if (is_nar(x) || is_zero(x)) return x;
    const MathConsts& c = consts_for(cfg);
    bool neg = is_negative(x);
    PositValue ax = neg ? negate(x) : x;
    PositValue t = exp_posit(negate(ldexp_posit(ax, 1)));  // e^(-2|x|)
    PositValue r = div(sub(c.one, t), add(c.one, t));
    return neg ? negate(r) : r;
}

PositValue sigmoid_posit(const PositValue& x) {
    const PositConfig& cfg = x.config;
    if (is_nar(x)) return x;
    const MathConsts& c = consts_for(cfg);
    if (!is_negative(x)) {
        PositValue t = exp_posit(negate(x));
        return div(c.one, add(c.one, t));
    }
    PositValue t = exp_posit(x);
    return div(t, add(c.one, t));
}

PositValue sqrt_posit(const PositValue& x) {
    const PositConfig& cfg = x.config;
    if (is_nar(x) || is_zero(x)) return x;
    if (is_negative(x)) return make_nar(cfg);
    detail::Unpacked u = detail::unpack(cfg, x.bits);
    // Put the value in the form M * 2^(2q), M in [2^126, 2^128).
    int j = ((u.scale & 1) == 0) ? 63 : 64;
    unsigned __int128 M = (unsigned __int128)u.sig << j;
    int q = (u.scale - 63 - j) / 2;
    // Integer square root of M with remainder; the true root lies in
    // [2^63, 2^64) because M is in [2^126, 2^128).
    const uint64_t lo_bound = uint64_t{1} << 63;
    double seed = std::sqrt(std::ldexp(double(uint64_t(M >> 64)), 64));
    unsigned __int128 r = seed >= 18446744073709551615.0
                              ? ~uint64_t{0}
                              : (unsigned __int128)uint64_t(seed);
    if (r < lo_bound) r = lo_bound;
    for (int it = 0; it < 8; ++it) {
        unsigned __int128 nr = (M / r + r) >> 1;
        if (nr < lo_bound) nr = lo_bound;
        if (nr > ~uint64_t{0}) nr = ~uint64_t{0};
        if (nr == r) break;
        r = nr;
    }
    while (r * r > M) --r;
    while (r < ~uint64_t{0} && (r + 1) * (r + 1) <= M) ++r;
    unsigned __int128 rem = M - r * r;
    return {cfg, detail::pack_round(cfg, false, q + 63, uint64_t(r), rem != 0)};
}

}  // namespace pnn
