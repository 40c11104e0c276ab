#include <algorithm>
#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "pnn/quire.hpp"

using namespace pnn;

namespace {

const PositConfig p80{8, 0};
const PositConfig p82{8, 2};

PositValue pf(double x, const PositConfig& cfg) { return from_float64(x, cfg); }

// Shadow accumulator: exact dyadic sum of products via the test oracle.
uint64_t oracle_dot(const oracle::PositOracle& orc,
                    const std::vector<uint64_t>& a,
                    const std::vector<uint64_t>& b) {
    oracle::Dyadic sum{0, 0};
    for (size_t i = 0; i < a.size(); ++i) {
        if (orc.is_nar(a[i]) || orc.is_nar(b[i])) return orc.config().nar_pattern();
        if (orc.is_zero(a[i]) || orc.is_zero(b[i])) continue;
        sum = dy_add(sum, dy_mul(orc.value(a[i]), orc.value(b[i])));
    }
    return orc.round(sum);
}

}  // namespace

TEST_CASE("quire clear and trivial reads") {
    Quire q(p80);
    CHECK(is_zero(q.to_posit()));
    q.clear();
    q.clear();  // idempotent
    CHECK(is_zero(q.to_posit()));
    q.add_product(make_nar(p80), pf(1, p80));
    CHECK(is_nar(q.to_posit()));
    q.add_product(pf(1, p80), pf(1, p80));
    CHECK(is_nar(q.to_posit()));  // sticky until cleared
    q.clear();
    CHECK(is_zero(q.to_posit()));
}

TEST_CASE("exact sums of ones") {
    Quire q(p80);
    for (int i = 0; i < 16; ++i) q.add_product(pf(1, p80), pf(1, p80));
    CHECK(to_float64(q.to_posit()) == 16.0);
    // 127 ones saturate to maxpos = 64 on read-out.
    q.clear();
    for (int i = 0; i < 127; ++i) q.add_product(pf(1, p80), pf(1, p80));
    CHECK(q.to_posit().bits == p80.maxpos_pattern());

    Quire q2(p82);
    q2.add_posit(pf(2, p82));
    CHECK(q2.to_posit().bits == from_float64(2, p82).bits);
}

TEST_CASE("add_product with zero leaves accumulator unchanged") {
    Quire q(p82);
    q.add_posit(pf(3.0, p82));
    uint64_t before = q.to_posit().bits;
    for (uint64_t b = 0; b < 256; ++b) {
        if (b == p82.nar_pattern()) continue;
        q.add_product({p82, b}, make_zero(p82));
    }
    CHECK(q.to_posit().bits == before);
}

TEST_CASE("cancellation keeps sub-resolution products") {
    // 64 + minpos^2 - 64: the quire keeps minpos^2 exactly and rounds it to
    // minpos on read-out; sequential posit adds lose it entirely.
    Quire q(p80);
    q.add_posit(pf(64, p80));
    q.add_product(make_minpos(p80), make_minpos(p80));
    q.add_posit(pf(-64, p80));
    CHECK(q.to_posit().bits == p80.minpos_pattern());

    PositValue seq = add(pf(64, p80), mul(make_minpos(p80), make_minpos(p80)));
    seq = add(seq, pf(-64, p80));
    CHECK(is_zero(seq));
}

TEST_CASE("sub_product mirrors add_product") {
    Quire q(p82);
    q.add_product(pf(3, p82), pf(5, p82));
    q.sub_product(pf(3, p82), pf(5, p82));
    CHECK(is_zero(q.to_posit()));
    q.clear();
    q.sub_product(pf(2, p82), pf(4, p82));
    CHECK(to_float64(q.to_posit()) == -8.0);
}

TEST_CASE("fused_dot basics") {
    std::vector<PositValue> a(16, pf(1, p80)), b(16, pf(1, p80));
    CHECK(to_float64(fused_dot(a, b)) == 16.0);
    std::vector<PositValue> z(16, make_zero(p80));
    CHECK(is_zero(fused_dot(a, z)));
    std::vector<PositValue> short_b(3, pf(1, p80));
    CHECK_THROWS(fused_dot(a, short_b));
}

TEST_CASE("random fused dots equal the dyadic shadow, order independent") {
    std::mt19937_64 rng(42);
    for (const PositConfig& cfg : {p80, p82}) {
        oracle::PositOracle orc(cfg);
        uint64_t mask = cfg.pattern_mask();
        for (int trial = 0; trial < 500; ++trial) {
            int len = 1 + int(rng() % (cfg.es == 0 ? 127 : 500));
            std::vector<uint64_t> a(len), b(len);
            for (int i = 0; i < len; ++i) {
                do { a[i] = rng() & mask; } while (a[i] == cfg.nar_pattern());
                do { b[i] = rng() & mask; } while (b[i] == cfg.nar_pattern());
            }
            Quire q(cfg);
            for (int i = 0; i < len; ++i)
                q.add_product({cfg, a[i]}, {cfg, b[i]});
            uint64_t got = q.to_posit().bits;
            uint64_t want = oracle_dot(orc, a, b);
            if (got != want) { CAPTURE(trial); REQUIRE(got == want); }

            // A few shuffles never change the result.
            std::vector<int> idx(len);
            for (int i = 0; i < len; ++i) idx[i] = i;
            for (int s = 0; s < 4; ++s) {
                std::shuffle(idx.begin(), idx.end(), rng);
                Quire qs(cfg);
                for (int i : idx) qs.add_product({cfg, a[i]}, {cfg, b[i]});
                CHECK(qs.to_posit().bits == got);
            }
        }
    }
}

TEST_CASE("quire width formula") {
    CHECK(Quire(p80).width_bits() == 32);
    CHECK(Quire(PositConfig{16, 1}).width_bits() == 128);
    CHECK(Quire(PositConfig{32, 2}).width_bits() == 512);
    CHECK(Quire(PositConfig{64, 3}).width_bits() == 2048);
    CHECK(Quire(p82).width_bits() == 104);
}

TEST_CASE("quire config mismatch is a usage error") {
    Quire q(p80);
    CHECK_THROWS(q.add_posit(pf(1, p82)));
    CHECK_THROWS(q.add_product(pf(1, p82), pf(1, p82)));
}

TEST_CASE("quire holding exactly 2 reads back as pattern 0x60") {
    Quire q(p80);
    q.add_product(pf(1, p80), pf(2, p80));
    CHECK(q.to_posit().bits == 0x60);
}
