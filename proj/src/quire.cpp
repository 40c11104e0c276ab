#include "pnn/quire.hpp"

#include <bit>
#include <cassert>
#include <stdexcept>

namespace pnn {

namespace {

DecodeTables::Fixed fixed_of(const PositValue& v) {
    DecodeTables::Fixed f;
    DecodedPosit d = decode(v);
    if (d.cls == PositClass::kNaR) {
        f.nar = 1;
    } else if (d.cls == PositClass::kFinite) {
        f.neg = uint8_t(d.sign);
        f.sig = uint32_t((uint64_t{1} << d.fraction_bits) | d.fraction);
        f.lsb_scale = d.scale - d.fraction_bits;
    }
    return f;
}

}  // namespace

void Quire::add_magnitude(uint64_t mag, int pos, bool negate) {
    assert(pos >= 0);
    int limb = pos >> 6;
    int off = pos & 63;
    uint64_t lo = mag << off;
    uint64_t hi = off ? (mag >> (64 - off)) : 0;
    if (!negate) {
        unsigned __int128 s = (unsigned __int128)acc_[limb] + lo;
        acc_[limb] = uint64_t(s);
        uint64_t carry = uint64_t(s >> 64);
        for (int i = limb + 1; i < limbs_ && (carry || hi); ++i) {
            s = (unsigned __int128)acc_[i] + hi + carry;
            acc_[i] = uint64_t(s);
            carry = uint64_t(s >> 64);
            hi = 0;
        }
    } else {
        uint64_t borrow = acc_[limb] < lo;
        acc_[limb] -= lo;
        for (int i = limb + 1; i < limbs_ && (borrow || hi); ++i) {
            uint64_t take = hi + borrow;  // hi <= 2^63, no overflow
            borrow = acc_[i] < take;
            acc_[i] -= take;
            hi = 0;
        }
    }
    acc_[limbs_ - 1] &= top_mask_;  // wrap at the exact quire width
}

void Quire::add_magnitude128(unsigned __int128 mag, int pos, bool negate) {
    uint64_t lo = uint64_t(mag), hi = uint64_t(mag >> 64);
    add_magnitude(lo, pos, negate);
    if (hi && pos + 64 < width_) add_magnitude(hi, pos + 64, negate);
}

void Quire::add_posit(const PositValue& v) {
    if (!(v.config == cfg_)) {
        throw std::invalid_argument("quire config mismatch in add_posit");
    }
    accumulate_value(fixed_of(v), false);
}

void Quire::add_product(const PositValue& a, const PositValue& b) {
    if (!(a.config == cfg_) || !(b.config == cfg_)) {
        throw std::invalid_argument("quire config mismatch in add_product");
    }
    // Generic path supports up to 64-bit formats via a 128-bit product.
    DecodedPosit da = decode(a), db = decode(b);
    if (da.cls == PositClass::kNaR || db.cls == PositClass::kNaR) {
        nar_ = true;
        return;
    }
    if (da.cls == PositClass::kZero || db.cls == PositClass::kZero) return;
    uint64_t sa = (uint64_t{1} << da.fraction_bits) | da.fraction;
    uint64_t sb = (uint64_t{1} << db.fraction_bits) | db.fraction;
    unsigned __int128 mag = (unsigned __int128)sa * sb;
    int pos = (da.scale - da.fraction_bits) + (db.scale - db.fraction_bits) +
              frac_offset_;
    add_magnitude128(mag, pos, da.sign != db.sign);
}

void Quire::sub_product(const PositValue& a, const PositValue& b) {
    if (!(a.config == cfg_) || !(b.config == cfg_)) {
        throw std::invalid_argument("quire config mismatch in sub_product");
    }
    DecodedPosit da = decode(a), db = decode(b);
    if (da.cls == PositClass::kNaR || db.cls == PositClass::kNaR) {
        nar_ = true;
        return;
    }
    if (da.cls == PositClass::kZero || db.cls == PositClass::kZero) return;
    uint64_t sa = (uint64_t{1} << da.fraction_bits) | da.fraction;
    uint64_t sb = (uint64_t{1} << db.fraction_bits) | db.fraction;
    unsigned __int128 mag = (unsigned __int128)sa * sb;
    int pos = (da.scale - da.fraction_bits) + (db.scale - db.fraction_bits) +
              frac_offset_;
    add_magnitude128(mag, pos, da.sign == db.sign);
}

PositValue Quire::to_posit() const {
    if (nar_) return make_nar(cfg_);
    int sign_bit = (width_ - 1) & 63;
    bool neg = (acc_[limbs_ - 1] >> sign_bit) & 1;
    uint64_t mag[kMaxLimbs];
    if (neg) {
        uint64_t carry = 1;
        for (int i = 0; i < limbs_; ++i) {
            uint64_t x = ~acc_[i];
            uint64_t s = x + carry;
            carry = (s < x) ? 1 : 0;
            mag[i] = s;
        }
        mag[limbs_ - 1] &= top_mask_;
    } else {
        std::memcpy(mag, acc_, sizeof(uint64_t) * size_t(limbs_));
    }
    int top = -1;
    for (int i = limbs_ - 1; i >= 0; --i) {
        if (mag[i]) {
            top = i * 64 + 63 - std::countl_zero(mag[i]);
            break;
        }
    }
    if (top < 0) return make_zero(cfg_);
    // Normalize: the 64 bits [top-63, top] become the significand, anything
    // below feeds the sticky bit.
    int hi = top >> 6;
    int off = top & 63;
    unsigned __int128 w = (unsigned __int128)mag[hi] << 64;
    if (hi >= 1) w |= mag[hi - 1];
    uint64_t sig = uint64_t(w >> (off + 1));
    bool sticky = false;
    if (hi >= 1) {
        uint64_t low_mask = (off == 63) ? ~uint64_t{0}
                                        : ((uint64_t{1} << (off + 1)) - 1);
        sticky = (mag[hi - 1] & low_mask) != 0;
        for (int i = 0; i < hi - 1 && !sticky; ++i) sticky = mag[i] != 0;
    }
    int scale = top - frac_offset_;
    return {cfg_, detail::pack_round(cfg_, neg, scale, sig, sticky)};
}

PositValue fused_dot(const std::vector<PositValue>& a,
                     const std::vector<PositValue>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("fused_dot: length mismatch");
    }
    if (a.empty()) {
        throw std::invalid_argument("fused_dot: empty operands");
    }
    Quire q(a[0].config);
    for (size_t i = 0; i < a.size(); ++i) {
        q.add_product(a[i], b[i]);
    }
    return q.to_posit();
}

}  // namespace pnn
