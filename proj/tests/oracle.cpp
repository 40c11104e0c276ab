#include "oracle.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace oracle {

namespace {

int bitlen(unsigned __int128 v) {
    int n = 0;
    while (v) { ++n; v >>= 1; }
    return n;
}

// Compare |a| * 2^s with |b|; a, b > 0, magnitudes well below 2^100.
int cmp_shifted(unsigned __int128 a, int s, unsigned __int128 b) {
    int la = bitlen(a), lb = bitlen(b);
    if (la + s > lb + 1) return 1;
    if (la + s < lb - 1) return -1;
    // Now the shift is small; bring both to a common exponent.
    if (s >= 0) a <<= s; else b <<= -s;
    return a < b ? -1 : (a > b ? 1 : 0);
}

// Decode a pattern of `nbits` total bits with exponent size `es` into an
// exact dyadic, walking the bit string explicitly.
bool decode_bits(uint64_t bits, int nbits, int es, Dyadic* out) {
    uint64_t mask = nbits == 64 ? ~uint64_t{0} : ((uint64_t{1} << nbits) - 1);
    bits &= mask;
    if (bits == 0 || bits == (uint64_t{1} << (nbits - 1))) return false;
    bool neg = (bits >> (nbits - 1)) & 1;
    uint64_t mag = neg ? ((~bits + 1) & mask) : bits;
    // Write the payload MSB-first into a bit list.
    std::vector<int> v;
    for (int i = nbits - 2; i >= 0; --i) v.push_back(int((mag >> i) & 1));
    size_t i = 0;
    int first = v[0];
    int run = 0;
    while (i < v.size() && v[i] == first) { ++run; ++i; }
    if (i < v.size()) ++i;  // regime terminator
    int k = first ? run - 1 : -run;
    int e = 0;
    for (int j = 0; j < es; ++j) {
        e <<= 1;
        if (i < v.size()) e |= v[i++];
    }
    __int128 frac = 0;
    int fb = 0;
    while (i < v.size()) { frac = (frac << 1) | v[i++]; ++fb; }
    int scale = k * (1 << es) + e;
    out->mant = ((__int128)1 << fb) + frac;
    if (neg) out->mant = -out->mant;
    out->exp2 = scale - fb;
    return true;
}

}  // namespace

int cmp(const Dyadic& a, const Dyadic& b) {
    bool an = a.mant < 0, bn = b.mant < 0;
    if (a.mant == 0 && b.mant == 0) return 0;
    if (a.mant == 0) return bn ? 1 : -1;
    if (b.mant == 0) return an ? -1 : 1;
    if (an != bn) return an ? -1 : 1;
    unsigned __int128 ma = an ? -(unsigned __int128)a.mant : (unsigned __int128)a.mant;
    unsigned __int128 mb = bn ? -(unsigned __int128)b.mant : (unsigned __int128)b.mant;
    int c = cmp_shifted(ma, a.exp2 - b.exp2, mb);
    return an ? -c : c;
}

Dyadic dy_add(const Dyadic& a, const Dyadic& b) {
    if (a.mant == 0) return b;
    if (b.mant == 0) return a;
    Dyadic r;
    int e = std::min(a.exp2, b.exp2);
    r.mant = (a.mant << (a.exp2 - e)) + (b.mant << (b.exp2 - e));
    r.exp2 = e;
    return r;
}

Dyadic dy_mul(const Dyadic& a, const Dyadic& b) {
    return {a.mant * b.mant, a.exp2 + b.exp2};
}

Dyadic dy_neg(const Dyadic& a) { return {-a.mant, a.exp2}; }

PositOracle::PositOracle(const pnn::PositConfig& cfg) : cfg_(cfg) {
    if (cfg.nbits > 14) {
        throw std::invalid_argument("PositOracle: config too wide for testing");
    }
    nar_ = uint64_t{1} << (cfg.nbits - 1);
    mask_ = (uint64_t{1} << cfg.nbits) - 1;
    for (uint64_t p = 1; p < nar_; ++p) {
        Entry e;
        e.pattern = p;
        if (!decode_bits(p, cfg.nbits, cfg.es, &e.val)) assert(false);
        if (!decode_bits(2 * p + 1, cfg.nbits + 1, cfg.es, &e.boundary)) assert(false);
        pos_.push_back(e);
    }
    std::sort(pos_.begin(), pos_.end(),
              [](const Entry& x, const Entry& y) { return cmp(x.val, y.val) < 0; });
}

Dyadic PositOracle::value(uint64_t bits) const {
    Dyadic d;
    if (!decode_bits(bits, cfg_.nbits, cfg_.es, &d)) return {0, 0};
    return d;
}

uint64_t PositOracle::round_positive(const Dyadic& x) const {
    // x > 0.  Find the largest entry with val <= x; decide with boundary.
    if (cmp(x, pos_.front().val) <= 0) return pos_.front().pattern;  // <= minpos
    if (cmp(x, pos_.back().val) >= 0) return pos_.back().pattern;    // >= maxpos
    size_t lo = 0, hi = pos_.size() - 1;
    while (lo + 1 < hi) {
        size_t mid = (lo + hi) / 2;
        if (cmp(pos_[mid].val, x) <= 0) lo = mid; else hi = mid;
    }
    int c = cmp(pos_[lo].val, x);
    if (c == 0) return pos_[lo].pattern;
    int cb = cmp(x, pos_[lo].boundary);
    if (cb < 0) return pos_[lo].pattern;
    if (cb > 0) return pos_[hi].pattern;
    // Exact tie: even bit pattern wins.
    return (pos_[lo].pattern & 1) == 0 ? pos_[lo].pattern : pos_[hi].pattern;
}

uint64_t PositOracle::round(const Dyadic& x) const {
    if (x.mant == 0) return 0;
    if (x.mant > 0) return round_positive(x);
    uint64_t p = round_positive(dy_neg(x));
    return (~p + 1) & mask_;
}

uint64_t PositOracle::round_ratio_positive(const Dyadic& num, const Dyadic& den) const {
    // num, den > 0; compare num/den against entries by cross multiplication.
    auto cmp_ratio_vs = [&](const Dyadic& c) {
        // num/den ? c <=> num ? c*den
        return cmp({num.mant, num.exp2}, dy_mul(c, den));
    };
    if (cmp_ratio_vs(pos_.front().val) <= 0) return pos_.front().pattern;
    if (cmp_ratio_vs(pos_.back().val) >= 0) return pos_.back().pattern;
    size_t lo = 0, hi = pos_.size() - 1;
    while (lo + 1 < hi) {
        size_t mid = (lo + hi) / 2;
        if (cmp_ratio_vs(pos_[mid].val) >= 0) lo = mid; else hi = mid;
    }
    if (cmp_ratio_vs(pos_[lo].val) == 0) return pos_[lo].pattern;
    int cb = cmp_ratio_vs(pos_[lo].boundary);
    if (cb < 0) return pos_[lo].pattern;
    if (cb > 0) return pos_[hi].pattern;
    return (pos_[lo].pattern & 1) == 0 ? pos_[lo].pattern : pos_[hi].pattern;
}

uint64_t PositOracle::round_ratio(Dyadic num, Dyadic den) const {
    assert(den.mant > 0);
    if (num.mant == 0) return 0;
    bool neg = num.mant < 0;
    if (neg) num = dy_neg(num);
    uint64_t p = round_ratio_positive(num, den);
    return neg ? ((~p + 1) & mask_) : p;
}

uint64_t PositOracle::round_sqrt(const Dyadic& x) const {
    assert(x.mant > 0);
    auto sq = [](const Dyadic& d) { return dy_mul(d, d); };
    if (cmp(x, sq(pos_.front().val)) <= 0) return pos_.front().pattern;
    if (cmp(x, sq(pos_.back().val)) >= 0) return pos_.back().pattern;
    size_t lo = 0, hi = pos_.size() - 1;
    while (lo + 1 < hi) {
        size_t mid = (lo + hi) / 2;
        if (cmp(sq(pos_[mid].val), x) <= 0) lo = mid; else hi = mid;
    }
    if (cmp(sq(pos_[lo].val), x) == 0) return pos_[lo].pattern;
    int cb = cmp(x, sq(pos_[lo].boundary));
    if (cb < 0) return pos_[lo].pattern;
    if (cb > 0) return pos_[hi].pattern;
    return (pos_[lo].pattern & 1) == 0 ? pos_[lo].pattern : pos_[hi].pattern;
}

uint64_t PositOracle::op(int o, uint64_t a, uint64_t b) const {
    a &= mask_; b &= mask_;
    if (a == nar_ || b == nar_) return nar_;
    switch (o) {
        case 0: return round(dy_add(value(a), value(b)));
        case 1: return round(dy_add(value(a), dy_neg(value(b))));
        case 2: {
            if (a == 0 || b == 0) return 0;
            return round(dy_mul(value(a), value(b)));
        }
        case 3: {
            if (b == 0) return nar_;
            if (a == 0) return 0;
            Dyadic db = value(b);
            Dyadic num = value(a);
            if (db.mant < 0) { db = dy_neg(db); num = dy_neg(num); }
            return round_ratio(num, db);
        }
    }
    return nar_;
}

}  // namespace oracle
