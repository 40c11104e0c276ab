#include "pnn/posit_tables.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace pnn {

namespace detail {
uint64_t exact_scalar_op(const PositConfig& cfg, int op, uint64_t a, uint64_t b);
}

namespace {

constexpr int kSlots = (PositConfig::kMaxBits + 1) * (PositConfig::kMaxEs + 1);

int slot_of(const PositConfig& cfg) {
    return cfg.nbits * (PositConfig::kMaxEs + 1) + cfg.es;
}

std::mutex g_build_mutex;
std::atomic<OpTables*> g_op_tables[kSlots];
std::atomic<DecodeTables*> g_decode_tables[kSlots];

OpTables* build_op_tables(const PositConfig& cfg) {
    auto* t = new OpTables;
    t->cfg = cfg;
    t->shift = cfg.nbits;
    const uint64_t n = uint64_t{1} << cfg.nbits;
    for (int op = 0; op < 4; ++op) {
        t->ops[op].resize(n * n);
        for (uint64_t a = 0; a < n; ++a) {
            uint16_t* row = &t->ops[op][a << cfg.nbits];
            for (uint64_t b = 0; b < n; ++b) {
                row[b] = uint16_t(detail::exact_scalar_op(cfg, op, a, b));
            }
        }
    }
    return t;
}

DecodeTables* build_decode_tables(const PositConfig& cfg) {
    auto* t = new DecodeTables;
    t->cfg = cfg;
    const uint64_t n = uint64_t{1} << cfg.nbits;
    t->value.resize(n);
    t->fixed.resize(n);
    for (uint64_t b = 0; b < n; ++b) {
        t->value[b] = detail::decode_f64(cfg, b);
        DecodeTables::Fixed f;
        PositValue v{cfg, b};
        DecodedPosit d = decode(v);
        if (d.cls == PositClass::kNaR) {
            f.nar = 1;
        } else if (d.cls == PositClass::kFinite) {
            f.neg = uint8_t(d.sign);
            f.sig = uint32_t((uint64_t{1} << d.fraction_bits) | d.fraction);
            f.lsb_scale = d.scale - d.fraction_bits;
        }
        t->fixed[b] = f;
    }
    return t;
}

}  // namespace

const OpTables& op_tables(const PositConfig& cfg) {
    if (!cfg.valid() || cfg.nbits > kTableMaxBits) {
        throw std::invalid_argument("op_tables: config not table-eligible");
    }
    int slot = slot_of(cfg);
    OpTables* t = g_op_tables[slot].load(std::memory_order_acquire);
    if (t) return *t;
    std::lock_guard<std::mutex> lock(g_build_mutex);
    t = g_op_tables[slot].load(std::memory_order_relaxed);
    if (!t) {
        t = build_op_tables(cfg);
        g_op_tables[slot].store(t, std::memory_order_release);
    }
    return *t;
}

const DecodeTables& decode_tables(const PositConfig& cfg) {
    if (!cfg.valid() || cfg.nbits > 16) {
        throw std::invalid_argument("decode_tables: nbits > 16");
    }
    int slot = slot_of(cfg);
    DecodeTables* t = g_decode_tables[slot].load(std::memory_order_acquire);
    if (t) return *t;
    std::lock_guard<std::mutex> lock(g_build_mutex);
    t = g_decode_tables[slot].load(std::memory_order_relaxed);
    if (!t) {
        t = build_decode_tables(cfg);
        g_decode_tables[slot].store(t, std::memory_order_release);
    }
    return *t;
}

}  // namespace pnn
