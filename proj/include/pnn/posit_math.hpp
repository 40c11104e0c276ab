#pragma once

#include "pnn/posit.hpp"

// Elementary functions computed inside the posit format itself: range
// reduction plus polynomial evaluation through the scalar ops, with the
// needed constants quantized once per config.  No float arithmetic is
// involved, so the float->posit boundary stays at data ingestion.
// sqrt is exact (integer square root with remainder-driven rounding).

namespace pnn {

PositValue from_int64(int64_t v, const PositConfig& cfg);

PositValue exp_posit(const PositValue& x);
PositValue log_posit(const PositValue& x);   // x <= 0 -> NaR
PositValue tanh_posit(const PositValue& x);
PositValue sigmoid_posit(const PositValue& x);
PositValue sqrt_posit(const PositValue& x);  // x < 0 -> NaR

PositValue abs_posit(const PositValue& x);
bool is_negative(const PositValue& x);

}  // namespace pnn
