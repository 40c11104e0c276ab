#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

#include "pnn/posit.hpp"
#include "pnn/posit_tables.hpp"

// Kulisch-style fixed-point accumulator sized per Table-1 semantics:
// width = 4*(nbits-2)*2^es + nbits bits, two's complement, LSB weight
// 2^-(2*max_scale) so every product of posits lands exactly.  At least
// 2^(nbits-1)-1 accumulations are guaranteed not to touch the carry guard;
// beyond that the accumulator wraps silently (documented, not checked).

namespace pnn {

class Quire {
public:
    static constexpr int kMaxLimbs = 64;

    explicit Quire(const PositConfig& cfg)
        : cfg_(cfg),
          width_(cfg.quire_bits()),
          limbs_((cfg.quire_bits() + 63) / 64),
          frac_offset_(2 * cfg.max_scale()) {
        int top = width_ & 63;
        top_mask_ = top ? ((uint64_t{1} << top) - 1) : ~uint64_t{0};
        clear();
    }

    const PositConfig& config() const { return cfg_; }
    int width_bits() const { return width_; }
    bool nar() const { return nar_; }

    void clear() {
        std::memset(acc_, 0, sizeof(uint64_t) * size_t(limbs_));
        nar_ = false;
    }

    void add_posit(const PositValue& v);
    void add_product(const PositValue& a, const PositValue& b);
    void sub_product(const PositValue& a, const PositValue& b);

    // Round the exact accumulated value into the element format (the single
    // rounding of the whole chain).
    PositValue to_posit() const;

    void set_nar() { nar_ = true; }

    // Hot path used by the tensor kernels: operands in the integer
    // significand form of DecodeTables::Fixed.
    void accumulate_product(const DecodeTables::Fixed& a,
                            const DecodeTables::Fixed& b, bool negate) {
        if (a.nar | b.nar) { nar_ = true; return; }
        if (a.sig == 0 || b.sig == 0) return;
        uint64_t mag = uint64_t(a.sig) * uint64_t(b.sig);
        add_magnitude(mag, a.lsb_scale + b.lsb_scale + frac_offset_,
                      (a.neg ^ b.neg ^ uint8_t(negate)) != 0);
    }

    void accumulate_value(const DecodeTables::Fixed& a, bool negate) {
        if (a.nar) { nar_ = true; return; }
        if (a.sig == 0) return;
        add_magnitude(a.sig, a.lsb_scale + frac_offset_,
                      (a.neg ^ uint8_t(negate)) != 0);
    }

    // mag * 2^(pos - frac_offset) added into the accumulator.
    void add_magnitude(uint64_t mag, int pos, bool negate);
    void add_magnitude128(unsigned __int128 mag, int pos, bool negate);

private:
    PositConfig cfg_;
    int width_;
    int limbs_;
    int frac_offset_;
    uint64_t top_mask_;
    bool nar_ = false;
    uint64_t acc_[kMaxLimbs];
};

// Exact dot product: sum of a[i]*b[i] accumulated in a quire and rounded
// once.  Result is independent of element order.
PositValue fused_dot(const std::vector<PositValue>& a,
                     const std::vector<PositValue>& b);

}  // namespace pnn
