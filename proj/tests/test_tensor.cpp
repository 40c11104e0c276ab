#include <cmath>
#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "pnn/tensor_ops.hpp"

using namespace pnn;

namespace {

const PositConfig p80{8, 0};
const PositConfig p82{8, 2};

Tensor rand_tensor(DType dt, std::vector<int64_t> shape, uint64_t seed,
                   double lo = -1.0, double hi = 1.0) {
    Tensor t(dt, std::move(shape));
    std::mt19937_64 rng(seed);
    for (int64_t i = 0; i < t.numel(); ++i) {
        double u = double(rng() >> 11) * 0x1p-53;
        t.set_f64(i, lo + (hi - lo) * u);
    }
    return t;
}

Tensor eye(DType dt, int64_t n) {
    Tensor t(dt, {n, n});
    for (int64_t i = 0; i < n; ++i) t.set_f64(i * n + i, 1.0);
    return t;
}

}  // namespace

TEST_CASE("tensor basics: zeros, reshape, elementwise") {
    Tensor z = Tensor::zeros(posit_dtype(p80), {2, 3});
    CHECK(z.numel() == 6);
    for (int64_t i = 0; i < 6; ++i) CHECK(z.bits_at(i) == 0);
    CHECK(z.strides() == std::vector<int64_t>{3, 1});

    Tensor t = Tensor::from_values(f64_dtype(), {2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor r = t.reshape({3, 2});
    for (int64_t i = 0; i < 6; ++i) CHECK(r.f64_at(i) == t.f64_at(i));
    CHECK(r.index_of({2, 1}) == 5);
    CHECK_THROWS(t.reshape({4, 2}));

    Tensor a = Tensor::from_values(posit_dtype(p82), {2, 2}, {1, 2, 3, 4});
    Tensor sum = ew_add(a, Tensor::zeros(posit_dtype(p82), {2, 2}));
    for (int64_t i = 0; i < 4; ++i) CHECK(sum.bits_at(i) == a.bits_at(i));
    CHECK_THROWS(ew_add(a, Tensor::zeros(posit_dtype(p80), {2, 2})));
}

TEST_CASE("matmul: identity and all-ones quire dot") {
    for (bool quire : {false, true}) {
        Tensor a = rand_tensor(posit_dtype(p82), {4, 4}, 11);
        Tensor y = matmul(eye(posit_dtype(p82), 4), a, quire);
        for (int64_t i = 0; i < 16; ++i) CHECK(y.bits_at(i) == a.bits_at(i));
    }
    // k=16 all-ones row x col -> 16 exactly with quire in posit(8,0).
    Tensor ones_row = Tensor::full(posit_dtype(p80), {1, 16}, 1.0);
    Tensor ones_col = Tensor::full(posit_dtype(p80), {16, 1}, 1.0);
    CHECK(matmul(ones_row, ones_col, true).f64_at(0) == 16.0);
}

TEST_CASE("matmul adversarial cancellation: quire vs sequential") {
    // (64, minpos, -64) . (1, minpos, 1): quire keeps minpos^2 -> minpos;
    // sequential rounding loses it -> 0.
    double minpos = std::ldexp(1.0, -6);
    Tensor a = Tensor::from_values(posit_dtype(p80), {1, 3}, {64, minpos, -64});
    Tensor b = Tensor::from_values(posit_dtype(p80), {3, 1}, {1, minpos, 1});
    Tensor with_quire = matmul(a, b, true);
    Tensor without = matmul(a, b, false);
    CHECK(with_quire.bits_at(0) == p80.minpos_pattern());
    CHECK(without.bits_at(0) == 0);
}

TEST_CASE("quire matmul equals per-element fused_dot oracle") {
    oracle::PositOracle orc(p82);
    std::mt19937_64 rng(5);
    Tensor a = rand_tensor(posit_dtype(p82), {5, 7}, 21, -4, 4);
    Tensor b = rand_tensor(posit_dtype(p82), {7, 6}, 22, -4, 4);
    Tensor c = matmul(a, b, true);
    for (int64_t i = 0; i < 5; ++i) {
        for (int64_t j = 0; j < 6; ++j) {
            oracle::Dyadic sum{0, 0};
            for (int64_t k = 0; k < 7; ++k) {
                sum = dy_add(sum, dy_mul(orc.value(a.bits_at(i * 7 + k)),
                                         orc.value(b.bits_at(k * 6 + j))));
            }
            uint64_t want = sum.mant == 0 ? 0 : orc.round(sum);
            CHECK(c.bits_at(i * 6 + j) == want);
        }
    }
}

TEST_CASE("non-quire paths are bit-identical across arithmetic modes") {
    for (const PositConfig& cfg : {p80, PositConfig{12, 2}}) {
        Tensor a = rand_tensor(posit_dtype(cfg), {9, 13}, 31, -8, 8);
        Tensor b = rand_tensor(posit_dtype(cfg), {13, 11}, 32, -8, 8);
        set_default_arith_mode(ArithMode::kExact);
        Tensor c_exact = matmul(a, b, false);
        set_default_arith_mode(ArithMode::kFloat64);
        Tensor c_fast = matmul(a, b, false);
        set_default_arith_mode(ArithMode::kTable);
        Tensor c_tab = matmul(a, b, false);
        set_default_arith_mode(ArithMode::kAuto);
        for (int64_t i = 0; i < c_exact.numel(); ++i) {
            CHECK(c_exact.bits_at(i) == c_fast.bits_at(i));
            CHECK(c_exact.bits_at(i) == c_tab.bits_at(i));
        }
    }
}

TEST_CASE("par_matmul is worker-count invariant") {
    Tensor a = rand_tensor(posit_dtype(p82), {13, 9}, 41);
    Tensor b = rand_tensor(posit_dtype(p82), {9, 11}, 42);
    for (bool quire : {false, true}) {
        Tensor base = matmul(a, b, quire);
        for (int w : {1, 2, 3, 7, 64}) {
            Tensor c = par_matmul(a, b, quire, w);
            for (int64_t i = 0; i < base.numel(); ++i) {
                CHECK(c.bits_at(i) == base.bits_at(i));
            }
        }
    }
}

TEST_CASE("conv2d: unit kernel identity and all-ones counting") {
    // 1x1x3x3 input, 1x1x1x1 unit kernel -> identity.
    Tensor x = rand_tensor(posit_dtype(p82), {1, 1, 3, 3}, 51);
    Tensor w = Tensor::full(posit_dtype(p82), {1, 1, 1, 1}, 1.0);
    Tensor y = conv2d(x, w, nullptr, 1, 0, false);
    CHECK(y.shape() == x.shape());
    for (int64_t i = 0; i < 9; ++i) CHECK(y.bits_at(i) == x.bits_at(i));

    // All-ones 5x5 kernel over all-ones input: every output is the exact
    // window sum 25 rounded once.  25 is not representable in posit(8,0)
    // (the grid holds 16, 24, 32 there), so the result is 24.
    oracle::PositOracle orc(p80);
    uint64_t want = orc.round(oracle::Dyadic{25, 0});
    CHECK(to_float64({p80, want}) == 24.0);
    Tensor xi = Tensor::full(posit_dtype(p80), {1, 1, 8, 8}, 1.0);
    Tensor k5 = Tensor::full(posit_dtype(p80), {1, 1, 5, 5}, 1.0);
    Tensor out = conv2d(xi, k5, nullptr, 1, 0, true);
    CHECK(out.dim(2) == 4);
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.bits_at(i) == want);
}

TEST_CASE("conv2d float64 matches an independent 6-loop reference") {
    std::mt19937_64 rng(7);
    Tensor x = rand_tensor(f64_dtype(), {2, 3, 7, 6}, 61);
    Tensor w = rand_tensor(f64_dtype(), {4, 3, 3, 3}, 62);
    Tensor bias = rand_tensor(f64_dtype(), {4}, 63);
    int stride = 2, pad = 1;
    Tensor y = conv2d(x, w, &bias, stride, pad, false);
    const int64_t N = 2, C = 3, H = 7, W = 6, F = 4, K = 3;
    const int64_t OH = (H + 2 * pad - K) / stride + 1;
    const int64_t OW = (W + 2 * pad - K) / stride + 1;
    REQUIRE(y.shape() == std::vector<int64_t>{N, F, OH, OW});
    for (int64_t n = 0; n < N; ++n)

        for (int64_t f = 0; f < F; ++f) {
            for (int64_t oy = 0; oy < OH; ++oy) {
                for (int64_t ox = 0; ox < OW; ++ox) {
                    double acc = 0.0;
                    bool first = true;
                    for (int64_t c = 0; c < C; ++c) {
                        for (int64_t ky = 0; ky < K; ++ky) {
                            for (int64_t kx = 0; kx < K; ++kx) {
                                int64_t iy = oy * stride + ky - pad;
                                int64_t ix = ox * stride + kx - pad;
                                double xv = 0.0;
                                if (iy >= 0 && iy < H && ix >= 0 && ix < W) {
                                    xv = x.f64_at(((n * C + c) * H + iy) * W + ix);
                                }
                                double p = xv * w.f64_at(((f * C + c) * K + ky) * K + kx);
                                acc = first ? p : acc + p;
                                first = false;
                            }
                        }
                    }
                    acc += bias.f64_at(f);
                    CHECK(y.f64_at(((n * F + f) * OH + oy) * OW + ox) == acc);
                }
            }
        }
}

TEST_CASE("pooling") {
    Tensor x = Tensor::from_values(posit_dtype(p82), {1, 1, 2, 2}, {1, 2, 3, 4});
    auto mp = maxpool2d(x, 2, 2);
    CHECK(mp.out.numel() == 1);
    CHECK(mp.out.f64_at(0) == 4.0);
    CHECK(mp.argmax[0] == 3);

    // Average of a constant tensor is the constant.
    Tensor c = Tensor::full(posit_dtype(p82), {1, 1, 4, 4}, 0.75);
    uint64_t recip = scalar::from_f64(posit_dtype(p82), 0.25);
    Tensor avg = avgpool2d(c, 2, 2, true, recip);
    for (int64_t i = 0; i < avg.numel(); ++i) CHECK(avg.f64_at(i) == 0.75);

    // posit(8,2) avg of {1,2,3,4} = 2.5 exactly.
    Tensor q = avgpool2d(x, 2, 2, true, recip);
    CHECK(q.f64_at(0) == 2.5);

    // max pooling backward routes gradient to the argmax.
    Tensor dy = Tensor::full(posit_dtype(p82), {1, 1, 1, 1}, 1.0);
    Tensor dx = maxpool2d_backward(dy, mp.argmax, {1, 1, 2, 2});
    CHECK(dx.f64_at(3) == 1.0);
    CHECK(dx.f64_at(0) == 0.0);
}

TEST_CASE("convert_tensor") {
    Tensor a = rand_tensor(posit_dtype(PositConfig{12, 2}), {3, 3}, 71, -100, 100);
    // Same dtype: no copy needed, contents equal.
    Tensor same = convert_tensor(a, posit_dtype(PositConfig{12, 2}));
    for (int64_t i = 0; i < 9; ++i) CHECK(same.bits_at(i) == a.bits_at(i));
    // Narrow then lift equals elementwise convert composition.
    Tensor narrow = convert_tensor(a, posit_dtype(p82));
    Tensor lifted = convert_tensor(narrow, posit_dtype(PositConfig{12, 2}));
    for (int64_t i = 0; i < 9; ++i) {
        PositValue v{PositConfig{12, 2}, a.bits_at(i)};
        CHECK(narrow.bits_at(i) == convert(v, p82).bits);
        CHECK(lifted.bits_at(i) == convert(convert(v, p82), PositConfig{12, 2}).bits);
    }
    // Zero tensor converts to zero tensor.
    Tensor z = convert_tensor(Tensor::zeros(posit_dtype(p80), {4}), posit_dtype(p82));
    for (int64_t i = 0; i < 4; ++i) CHECK(z.bits_at(i) == 0);
}

TEST_CASE("transpose and column_sum") {
    Tensor a = Tensor::from_values(f64_dtype(), {2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor t = transpose2d(a);
    CHECK(t.shape() == std::vector<int64_t>{3, 2});
    CHECK(t.f64_at(0) == 1.0);
    CHECK(t.f64_at(1) == 4.0);
    Tensor cs = column_sum(a, false);
    CHECK(cs.f64_at(0) == 5.0);
    CHECK(cs.f64_at(1) == 7.0);
    CHECK(cs.f64_at(2) == 9.0);
}

TEST_CASE("ldexp_tensor scales posits exactly") {
    Tensor a = rand_tensor(posit_dtype(p82), {16}, 81, -2, 2);
    Tensor up = ldexp_tensor(a, 4);
    Tensor back = ldexp_tensor(up, -4);
    for (int64_t i = 0; i < 16; ++i) {
        if (std::abs(a.f64_at(i)) < 1.0 && std::abs(a.f64_at(i)) > 1e-4) {
            CHECK(back.bits_at(i) == a.bits_at(i));
        }
    }
}
