#include "pnn/tensor_ops.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "pnn/posit_tables.hpp"
#include "pnn/quire.hpp"

namespace pnn {

namespace {

using Fixed = DecodeTables::Fixed;

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void check_same_dtype(const Tensor& a, const Tensor& b, const char* what) {
    if (!(a.dtype() == b.dtype())) {
        throw std::invalid_argument(std::string(what) + ": dtype mismatch (" +
                                    to_string(a.dtype()) + " vs " +
                                    to_string(b.dtype()) + ")");
    }
}

void run_rows(const ThreadPool* pool, int64_t n,
              const std::function<void(int64_t, int64_t)>& fn) {
    if (pool) pool->parallel_for(n, fn);
    else fn(0, n);
}

// ---- sequential-MAC policies over decoded working scalars ----

struct F32Pol {
    using Work = float;
    Work decode(uint64_t b) const { return std::bit_cast<float>(uint32_t(b)); }
    uint64_t encode(Work v) const { return std::bit_cast<uint32_t>(v); }
    Work mul(Work a, Work b) const { return a * b; }
    Work add(Work a, Work b) const { return a + b; }
};

struct F64Pol {
    using Work = double;
    Work decode(uint64_t b) const { return std::bit_cast<double>(b); }
    uint64_t encode(Work v) const { return std::bit_cast<uint64_t>(v); }
    Work mul(Work a, Work b) const { return a * b; }
    Work add(Work a, Work b) const { return a + b; }
};

struct LutPol {
    const OpTables* t;
    int nb;
    using Work = uint64_t;
    Work decode(uint64_t b) const { return b; }
    uint64_t encode(Work v) const { return v; }
    Work mul(Work a, Work b) const { return t->ops[2][(a << nb) | b]; }
    Work add(Work a, Work b) const { return t->ops[0][(a << nb) | b]; }
};

struct FastPol {
    PositConfig cfg;
    using Work = double;
    Work decode(uint64_t b) const { return detail::decode_f64(cfg, b); }
    uint64_t encode(Work v) const {
        if (v == 0.0) return 0;
        if (std::isnan(v)) return cfg.nar_pattern();
        return detail::encode_exact_f64(cfg, v);
    }
    Work mul(Work a, Work b) const { return detail::mul_f64(cfg, a, b); }
    Work add(Work a, Work b) const { return detail::add_f64(cfg, a, b); }
};

struct ExactPol {
    PositConfig cfg;
    using Work = uint64_t;
    Work decode(uint64_t b) const { return b; }
    uint64_t encode(Work v) const { return v; }
    Work mul(Work a, Work b) const { return detail::exact_scalar_op(cfg, 2, a, b); }
    Work add(Work a, Work b) const { return detail::exact_scalar_op(cfg, 0, a, b); }
};

enum class PPath { kLut, kFast, kExact };

PPath pick_path(const PositConfig& cfg) {
    ArithMode m = default_arith_mode();
    if (m == ArithMode::kTable && cfg.nbits <= kTableMaxBits) return PPath::kLut;
    if (m == ArithMode::kFloat64 && float64_path_ok(cfg)) return PPath::kFast;
    if (m == ArithMode::kAuto) {
        if (cfg.nbits <= kTableMaxBits) return PPath::kLut;
        if (float64_path_ok(cfg)) return PPath::kFast;
    }
    return PPath::kExact;
}

template <class P>
std::vector<typename P::Work> decode_all(const P& pol, const Tensor& t) {
    std::vector<typename P::Work> v(size_t(t.numel()));
    const uint64_t* d = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) v[size_t(i)] = pol.decode(d[i]);
    return v;
}

// ---- quire decode access ----

struct FixTab {
    const DecodeTables* dt;
    Fixed get(uint64_t b) const { return dt->fixed[b]; }
};

struct FixGen {
    PositConfig cfg;
    Fixed get(uint64_t b) const {
        Fixed f;
        DecodedPosit d = pnn::decode(PositValue{cfg, b});
        if (d.cls == PositClass::kNaR) {
            f.nar = 1;
        } else if (d.cls == PositClass::kFinite) {
            f.neg = uint8_t(d.sign);
            f.sig = uint32_t((uint64_t{1} << d.fraction_bits) | d.fraction);
            f.lsb_scale = d.scale - d.fraction_bits;
        }
        return f;
    }
};

template <class G>
std::vector<Fixed> decode_fixed(const G& g, const Tensor& t) {
    std::vector<Fixed> v(size_t(t.numel()));
    const uint64_t* d = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) v[size_t(i)] = g.get(d[i]);
    return v;
}

std::vector<Fixed> decode_fixed_auto(const PositConfig& cfg, const Tensor& t) {
    require(cfg.nbits <= 32, "quire kernels support nbits <= 32");
    if (cfg.nbits <= 16) return decode_fixed(FixTab{&decode_tables(cfg)}, t);
    return decode_fixed(FixGen{cfg}, t);
}

// ---- matmul ----

template <class P>
void matmul_seq(const P& pol, const Tensor& A, const Tensor& B, Tensor& C,
                const ThreadPool* pool) {
    const int64_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    auto a = decode_all(pol, A);
    auto b = decode_all(pol, B);
    uint64_t* out = C.data();
    run_rows(pool, m, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            for (int64_t j = 0; j < n; ++j) {
                typename P::Work acc = pol.mul(a[size_t(i * k)], b[size_t(j)]);
                for (int64_t kk = 1; kk < k; ++kk) {
                    acc = pol.add(acc, pol.mul(a[size_t(i * k + kk)],
                                               b[size_t(kk * n + j)]));
                }
                out[i * n + j] = pol.encode(acc);
            }
        }
    });
}

void matmul_quire(const PositConfig& cfg, const Tensor& A, const Tensor& B,
                  Tensor& C, const ThreadPool* pool) {
    const int64_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    auto a = decode_fixed_auto(cfg, A);
    auto b = decode_fixed_auto(cfg, B);
    uint64_t* out = C.data();
    run_rows(pool, m, [&](int64_t r0, int64_t r1) {
        Quire q(cfg);
        for (int64_t i = r0; i < r1; ++i) {
            for (int64_t j = 0; j < n; ++j) {
                q.clear();
                for (int64_t kk = 0; kk < k; ++kk) {
                    q.accumulate_product(a[size_t(i * k + kk)],
                                         b[size_t(kk * n + j)], false);
                }
                out[i * n + j] = q.to_posit().bits;
            }
        }
    });
}

// ---- conv ----

Tensor pad_nchw(const Tensor& x, int pad) {
    if (pad == 0) return x;
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor out(x.dtype(), {N, C, H + 2 * pad, W + 2 * pad});
    const int64_t PW = W + 2 * pad;
    const uint64_t* src = x.data();
    uint64_t* dst = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        for (int64_t y = 0; y < H; ++y) {
            std::memcpy(dst + ((nc * (H + 2 * pad) + y + pad) * PW + pad),
                        src + (nc * H + y) * W, size_t(W) * 8);
        }
    }
    return out;
}

struct ConvDims {
    int64_t N, C, PH, PW, F, KH, KW, OH, OW;
    int stride;
};

ConvDims conv_dims(const Tensor& xp, const Tensor& w, int stride) {
    ConvDims d;
    d.N = xp.dim(0); d.C = xp.dim(1); d.PH = xp.dim(2); d.PW = xp.dim(3);
    d.F = w.dim(0); d.KH = w.dim(2); d.KW = w.dim(3);
    require(w.dim(1) == d.C, "conv2d: channel mismatch");
    require(d.PH >= d.KH && d.PW >= d.KW, "conv2d: kernel larger than input");
    d.stride = stride;
    d.OH = (d.PH - d.KH) / stride + 1;
    d.OW = (d.PW - d.KW) / stride + 1;
    return d;
}

std::vector<int64_t> conv_x_offsets(const ConvDims& d) {
    std::vector<int64_t> off;
    off.reserve(size_t(d.C * d.KH * d.KW));
    for (int64_t c = 0; c < d.C; ++c)
        for (int64_t ky = 0; ky < d.KH; ++ky)
            for (int64_t kx = 0; kx < d.KW; ++kx)
                off.push_back((c * d.PH + ky) * d.PW + kx);
    return off;
}

template <class P>
void conv_seq(const P& pol, const Tensor& xp, const Tensor& w,
              const Tensor* bias, int stride, Tensor& out,
              const ThreadPool* pool) {
    ConvDims d = conv_dims(xp, w, stride);
    auto xv = decode_all(pol, xp);
    auto wv = decode_all(pol, w);
    std::vector<typename P::Work> bv;
    if (bias) bv = decode_all(pol, *bias);
    auto xoff = conv_x_offsets(d);
    const int64_t K = int64_t(xoff.size());
    uint64_t* o = out.data();
    run_rows(pool, d.N * d.F * d.OH, [&](int64_t r0, int64_t r1) {
        for (int64_t r = r0; r < r1; ++r) {
            int64_t oy = r % d.OH;
            int64_t f = (r / d.OH) % d.F;
            int64_t n = r / (d.OH * d.F);
            const int64_t wbase = f * K;
            for (int64_t ox = 0; ox < d.OW; ++ox) {
                int64_t xbase = ((n * d.C) * d.PH + oy * stride) * d.PW +
                                ox * stride;
                typename P::Work acc =
                    pol.mul(xv[size_t(xbase + xoff[0])], wv[size_t(wbase)]);
                for (int64_t t = 1; t < K; ++t) {
                    acc = pol.add(acc, pol.mul(xv[size_t(xbase + xoff[size_t(t)])],
                                               wv[size_t(wbase + t)]));
                }
                if (bias) acc = pol.add(acc, bv[size_t(f)]);
                o[(r * d.OW) + ox] = pol.encode(acc);
            }
        }
    });
}

void conv_quire(const PositConfig& cfg, const Tensor& xp, const Tensor& w,
                const Tensor* bias, int stride, Tensor& out,
                const ThreadPool* pool) {
    ConvDims d = conv_dims(xp, w, stride);
    auto xv = decode_fixed_auto(cfg, xp);
    auto wv = decode_fixed_auto(cfg, w);
    std::vector<Fixed> bv;
    if (bias) bv = decode_fixed_auto(cfg, *bias);
    auto xoff = conv_x_offsets(d);
    const int64_t K = int64_t(xoff.size());
    uint64_t* o = out.data();
    run_rows(pool, d.N * d.F * d.OH, [&](int64_t r0, int64_t r1) {
        Quire q(cfg);
        for (int64_t r = r0; r < r1; ++r) {
            int64_t oy = r % d.OH;
            int64_t f = (r / d.OH) % d.F;
            int64_t n = r / (d.OH * d.F);
            const int64_t wbase = f * K;
            for (int64_t ox = 0; ox < d.OW; ++ox) {
                int64_t xbase = ((n * d.C) * d.PH + oy * stride) * d.PW +
                                ox * stride;
                q.clear();
                for (int64_t t = 0; t < K; ++t) {
                    q.accumulate_product(xv[size_t(xbase + xoff[size_t(t)])],
                                         wv[size_t(wbase + t)], false);
                }
                if (bias) q.accumulate_value(bv[size_t(f)], false);
                o[(r * d.OW) + ox] = q.to_posit().bits;
            }
        }
    });
}

// Generic gather kernels: out[i] = sum over terms(i), in fixed order; quire
// or sequential per the dtype/flag.  The product form enumerates
// (lhs_index, rhs_index) pairs, the sum form plain lhs indices.
template <class P, class TermFn>
void gather_seq(const P& pol, const std::vector<typename P::Work>& lhs,
                const std::vector<typename P::Work>& rhs, uint64_t* out,
                int64_t n_out, const TermFn& terms, const ThreadPool* pool) {
    run_rows(pool, n_out, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            typename P::Work acc{};
            bool first = true;
            terms(i, [&](int64_t li, int64_t ri) {
                typename P::Work p = pol.mul(lhs[size_t(li)], rhs[size_t(ri)]);
                acc = first ? p : pol.add(acc, p);
                first = false;
            });
            out[i] = first ? 0 : pol.encode(acc);
        }
    });
}

template <class P, class TermFn>
void gather_seq_sum(const P& pol, const std::vector<typename P::Work>& lhs,
                    uint64_t* out, int64_t n_out, const TermFn& terms,
                    const ThreadPool* pool) {
    run_rows(pool, n_out, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            typename P::Work acc{};
            bool first = true;
            terms(i, [&](int64_t li) {
                acc = first ? lhs[size_t(li)] : pol.add(acc, lhs[size_t(li)]);
                first = false;
            });
            out[i] = first ? 0 : pol.encode(acc);
        }
    });
}

template <class TermFn>
void gather_quire(const PositConfig& cfg, const std::vector<Fixed>& lhs,
                  const std::vector<Fixed>& rhs, uint64_t* out, int64_t n_out,
                  const TermFn& terms, const ThreadPool* pool) {
    run_rows(pool, n_out, [&](int64_t r0, int64_t r1) {
        Quire q(cfg);
        for (int64_t i = r0; i < r1; ++i) {
            q.clear();
            terms(i, [&](int64_t li, int64_t ri) {
                q.accumulate_product(lhs[size_t(li)], rhs[size_t(ri)], false);
            });
            out[i] = q.to_posit().bits;
        }
    });
}

template <class TermFn>
void gather_quire_sum(const PositConfig& cfg, const std::vector<Fixed>& lhs,
                      uint64_t* out, int64_t n_out, const TermFn& terms,
                      const ThreadPool* pool) {
    run_rows(pool, n_out, [&](int64_t r0, int64_t r1) {
        Quire q(cfg);
        for (int64_t i = r0; i < r1; ++i) {
            q.clear();
            terms(i, [&](int64_t li) { q.accumulate_value(lhs[size_t(li)], false); });
            out[i] = q.to_posit().bits;
        }
    });
}

// Dispatch a gather product-sum over dtype/path.
template <class TermFn>
void dispatch_gather(const Tensor& lhs, const Tensor& rhs, Tensor& out,
                     bool use_quire, const TermFn& terms,
                     const ThreadPool* pool) {
    const DType& dt = lhs.dtype();
    uint64_t* o = out.data();
    int64_t n_out = out.numel();
    switch (dt.kind) {
        case ScalarKind::kF32: {
            F32Pol p;
            gather_seq(p, decode_all(p, lhs), decode_all(p, rhs), o, n_out, terms, pool);
            return;
        }
        case ScalarKind::kF64: {
            F64Pol p;
            gather_seq(p, decode_all(p, lhs), decode_all(p, rhs), o, n_out, terms, pool);
            return;
        }
        case ScalarKind::kPosit: {
            const PositConfig& cfg = dt.cfg;
            if (use_quire) {
                gather_quire(cfg, decode_fixed_auto(cfg, lhs),
                             decode_fixed_auto(cfg, rhs), o, n_out, terms, pool);
                return;
            }
            switch (pick_path(cfg)) {
                case PPath::kLut: {
                    LutPol p{&op_tables(cfg), cfg.nbits};
                    gather_seq(p, decode_all(p, lhs), decode_all(p, rhs), o, n_out, terms, pool);
                    return;
                }
                case PPath::kFast: {
                    FastPol p{cfg};
                    gather_seq(p, decode_all(p, lhs), decode_all(p, rhs), o, n_out, terms, pool);
                    return;
                }
                default: {
                    ExactPol p{cfg};
                    gather_seq(p, decode_all(p, lhs), decode_all(p, rhs), o, n_out, terms, pool);
                    return;
                }
            }
        }
    }
}

// Dispatch a gather plain-sum over dtype/path.
template <class TermFn>
void dispatch_gather_sum(const Tensor& lhs, Tensor& out, bool use_quire,
                         const TermFn& terms, const ThreadPool* pool) {
    const DType& dt = lhs.dtype();
    uint64_t* o = out.data();
    int64_t n_out = out.numel();
    switch (dt.kind) {
        case ScalarKind::kF32: {
            F32Pol p;
            gather_seq_sum(p, decode_all(p, lhs), o, n_out, terms, pool);
            return;
        }
        case ScalarKind::kF64: {
            F64Pol p;
            gather_seq_sum(p, decode_all(p, lhs), o, n_out, terms, pool);
            return;
        }
        case ScalarKind::kPosit: {
            const PositConfig& cfg = dt.cfg;
            if (use_quire) {
                gather_quire_sum(cfg, decode_fixed_auto(cfg, lhs), o, n_out, terms, pool);
                return;
            }
            switch (pick_path(cfg)) {
                case PPath::kLut: {
                    LutPol p{&op_tables(cfg), cfg.nbits};
                    gather_seq_sum(p, decode_all(p, lhs), o, n_out, terms, pool);
                    return;
                }
                case PPath::kFast: {
                    FastPol p{cfg};
                    gather_seq_sum(p, decode_all(p, lhs), o, n_out, terms, pool);
                    return;
                }
                default: {
                    ExactPol p{cfg};
                    gather_seq_sum(p, decode_all(p, lhs), o, n_out, terms, pool);
                    return;
                }
            }
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool use_quire,
              const ThreadPool* pool) {
    require(a.rank() == 2 && b.rank() == 2, "matmul: rank-2 tensors required");
    require(a.dim(1) == b.dim(0), "matmul: inner dimensions disagree");
    check_same_dtype(a, b, "matmul");
    Tensor c(a.dtype(), {a.dim(0), b.dim(1)});
    if (a.dim(1) == 0) return c;
    const DType& dt = a.dtype();
    switch (dt.kind) {
        case ScalarKind::kF32: { F32Pol p; matmul_seq(p, a, b, c, pool); break; }
        case ScalarKind::kF64: { F64Pol p; matmul_seq(p, a, b, c, pool); break; }
        case ScalarKind::kPosit: {
            if (use_quire) { matmul_quire(dt.cfg, a, b, c, pool); break; }
            switch (pick_path(dt.cfg)) {
                case PPath::kLut: {
                    LutPol p{&op_tables(dt.cfg), dt.cfg.nbits};
                    matmul_seq(p, a, b, c, pool);
                    break;
                }
                case PPath::kFast: { FastPol p{dt.cfg}; matmul_seq(p, a, b, c, pool); break; }
                default: { ExactPol p{dt.cfg}; matmul_seq(p, a, b, c, pool); break; }
            }
            break;
        }
    }
    return c;
}

Tensor par_matmul(const Tensor& a, const Tensor& b, bool use_quire, int workers) {
    ThreadPool pool(workers);
    return matmul(a, b, use_quire, &pool);
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride,
              int pad, bool use_quire, const ThreadPool* pool) {
    require(x.rank() == 4 && w.rank() == 4, "conv2d: NCHW/FCKK tensors required");
    require(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
    check_same_dtype(x, w, "conv2d");
    if (bias) {
        check_same_dtype(x, *bias, "conv2d bias");
        require(bias->numel() == w.dim(0), "conv2d: bias size mismatch");
    }
    Tensor xp = pad_nchw(x, pad);
    ConvDims d = conv_dims(xp, w, stride);
    Tensor out(x.dtype(), {d.N, d.F, d.OH, d.OW});
    const DType& dt = x.dtype();
    switch (dt.kind) {
        case ScalarKind::kF32: { F32Pol p; conv_seq(p, xp, w, bias, stride, out, pool); break; }
        case ScalarKind::kF64: { F64Pol p; conv_seq(p, xp, w, bias, stride, out, pool); break; }
        case ScalarKind::kPosit: {
            if (use_quire) { conv_quire(dt.cfg, xp, w, bias, stride, out, pool); break; }
            switch (pick_path(dt.cfg)) {
                case PPath::kLut: {
                    LutPol p{&op_tables(dt.cfg), dt.cfg.nbits};
                    conv_seq(p, xp, w, bias, stride, out, pool);
                    break;
                }
                case PPath::kFast: { FastPol p{dt.cfg}; conv_seq(p, xp, w, bias, stride, out, pool); break; }
                default: { ExactPol p{dt.cfg}; conv_seq(p, xp, w, bias, stride, out, pool); break; }
            }
            break;
        }
    }
    return out;
}

Tensor conv2d_input_grad(const Tensor& dy, const Tensor& w,
                         const std::vector<int64_t>& x_shape, int stride,
                         int pad, bool use_quire, const ThreadPool* pool) {
    require(dy.rank() == 4 && w.rank() == 4, "conv2d_input_grad: bad ranks");
    check_same_dtype(dy, w, "conv2d_input_grad");
    const int64_t N = x_shape[0], C = x_shape[1], H = x_shape[2], W = x_shape[3];
    const int64_t F = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    const int64_t OH = dy.dim(2), OW = dy.dim(3);
    const int64_t PH = H + 2 * pad, PW = W + 2 * pad;
    Tensor dxp(dy.dtype(), {N, C, PH, PW});
    // dxp[n,c,iy,ix] = sum_{f,ky,kx} dy[n,f,oy,ox] * w[f,c,ky,kx]
    // with oy = (iy-ky)/stride, ox = (ix-kx)/stride when divisible/in-range.
    auto terms = [&](int64_t i, auto&& emit) {
        int64_t ix = i % PW;
        int64_t iy = (i / PW) % PH;
        int64_t c = (i / (PW * PH)) % C;
        int64_t n = i / (PW * PH * C);
        for (int64_t f = 0; f < F; ++f) {
            for (int64_t ky = 0; ky < KH; ++ky) {
                int64_t ty = iy - ky;
                if (ty < 0 || ty % stride) continue;
                int64_t oy = ty / stride;
                if (oy >= OH) continue;
                for (int64_t kx = 0; kx < KW; ++kx) {
                    int64_t tx = ix - kx;
                    if (tx < 0 || tx % stride) continue;
                    int64_t ox = tx / stride;
                    if (ox >= OW) continue;
                    emit(((n * F + f) * OH + oy) * OW + ox,
                         ((f * C + c) * KH + ky) * KW + kx);
                }
            }
        }
    };
    dispatch_gather(dy, w, dxp, use_quire, terms, pool);
    if (pad == 0) return dxp;
    // Crop the padding border.
    Tensor dx(dy.dtype(), {N, C, H, W});
    const uint64_t* src = dxp.data();
    uint64_t* dst = dx.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        for (int64_t y = 0; y < H; ++y) {
            std::memcpy(dst + (nc * H + y) * W,
                        src + ((nc * PH + y + pad) * PW + pad), size_t(W) * 8);
        }
    }
    return dx;
}

Tensor conv2d_weight_grad(const Tensor& dy, const Tensor& x,
                          const std::vector<int64_t>& w_shape, int stride,
                          int pad, bool use_quire, const ThreadPool* pool) {
    require(dy.rank() == 4 && x.rank() == 4, "conv2d_weight_grad: bad ranks");
    check_same_dtype(dy, x, "conv2d_weight_grad");
    Tensor xp = pad_nchw(x, pad);
    const int64_t N = xp.dim(0), C = xp.dim(1), PH = xp.dim(2), PW = xp.dim(3);
    const int64_t F = w_shape[0], KH = w_shape[2], KW = w_shape[3];
    const int64_t OH = dy.dim(2), OW = dy.dim(3);
    Tensor dw(dy.dtype(), {F, C, KH, KW});
    auto terms = [&](int64_t i, auto&& emit) {
        int64_t kx = i % KW;
        int64_t ky = (i / KW) % KH;
        int64_t c = (i / (KW * KH)) % C;
        int64_t f = i / (KW * KH * C);
        for (int64_t n = 0; n < N; ++n) {
            for (int64_t oy = 0; oy < OH; ++oy) {
                for (int64_t ox = 0; ox < OW; ++ox) {
                    emit(((n * F + f) * OH + oy) * OW + ox,
                         ((n * C + c) * PH + oy * stride + ky) * PW +
                             ox * stride + kx);
                }
            }
        }
    };
    dispatch_gather(dy, xp, dw, use_quire, terms, pool);
    return dw;
}

Tensor conv2d_bias_grad(const Tensor& dy, bool use_quire) {
    require(dy.rank() == 4, "conv2d_bias_grad: bad rank");
    const int64_t N = dy.dim(0), F = dy.dim(1), OH = dy.dim(2), OW = dy.dim(3);
    Tensor db(dy.dtype(), {F});
    auto terms = [&](int64_t f, auto&& emit) {
        for (int64_t n = 0; n < N; ++n) {
            for (int64_t o = 0; o < OH * OW; ++o) {
                emit((n * F + f) * OH * OW + o);
            }
        }
    };
    dispatch_gather_sum(dy, db, use_quire, terms, nullptr);
    return db;
}

MaxPoolResult maxpool2d(const Tensor& x, int k, int stride,
                        const ThreadPool* pool) {
    require(x.rank() == 4, "maxpool2d: NCHW tensor required");
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(H >= k && W >= k, "maxpool2d: window larger than input");
    const int64_t OH = (H - k) / stride + 1, OW = (W - k) / stride + 1;
    MaxPoolResult res{Tensor(x.dtype(), {N, C, OH, OW}),
                      std::vector<int64_t>(size_t(N * C * OH * OW))};
    const DType& dt = x.dtype();
    const uint64_t* xd = x.data();
    uint64_t* od = res.out.data();
    run_rows(pool, N * C, [&](int64_t r0, int64_t r1) {
        for (int64_t nc = r0; nc < r1; ++nc) {
            const int64_t ibase = nc * H * W;
            const int64_t obase = nc * OH * OW;
            for (int64_t oy = 0; oy < OH; ++oy) {
                for (int64_t ox = 0; ox < OW; ++ox) {
                    int64_t best = ibase + (oy * stride) * W + ox * stride;
                    uint64_t bv = xd[best];
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            int64_t idx = ibase + (oy * stride + ky) * W +
                                          ox * stride + kx;
                            if (scalar::cmp(dt, xd[idx], bv) > 0) {
                                best = idx;
                                bv = xd[idx];
                            }
                        }
                    }
                    od[obase + oy * OW + ox] = bv;
                    res.argmax[size_t(obase + oy * OW + ox)] = best;
                }
            }
        }
    });
    return res;
}

Tensor maxpool2d_backward(const Tensor& dy, const std::vector<int64_t>& argmax,
                          const std::vector<int64_t>& x_shape) {
    require(size_t(dy.numel()) == argmax.size(), "maxpool2d_backward: argmax mismatch");
    Tensor dx(dy.dtype(), x_shape);
    const DType& dt = dy.dtype();
    uint64_t* dxd = dx.data();
    const uint64_t* dyd = dy.data();
    for (int64_t i = 0; i < dy.numel(); ++i) {
        int64_t t = argmax[size_t(i)];
        dxd[t] = scalar::add(dt, dxd[t], dyd[i]);
    }
    return dx;
}

Tensor avgpool2d(const Tensor& x, int k, int stride, bool use_quire,
                 uint64_t recip_bits, const ThreadPool* pool) {
    require(x.rank() == 4, "avgpool2d: NCHW tensor required");
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(H >= k && W >= k, "avgpool2d: window larger than input");
    const int64_t OH = (H - k) / stride + 1, OW = (W - k) / stride + 1;
    Tensor sums(x.dtype(), {N, C, OH, OW});
    auto terms = [&](int64_t i, auto&& emit) {
        int64_t ox = i % OW;
        int64_t oy = (i / OW) % OH;
        int64_t nc = i / (OW * OH);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                emit(nc * H * W + (oy * stride + ky) * W + ox * stride + kx);
            }
        }
    };
    dispatch_gather_sum(x, sums, use_quire, terms, pool);
    return scale(sums, recip_bits);
}

Tensor avgpool2d_backward(const Tensor& dy, int k, int stride,
                          const std::vector<int64_t>& x_shape,
                          uint64_t recip_bits, const ThreadPool* pool) {
    const int64_t N = x_shape[0], C = x_shape[1], H = x_shape[2], W = x_shape[3];
    const int64_t OH = dy.dim(2), OW = dy.dim(3);
    Tensor g = scale(dy, recip_bits);
    Tensor dx(dy.dtype(), x_shape);
    const DType& dt = dy.dtype();
    const uint64_t* gd = g.data();
    uint64_t* dxd = dx.data();
    run_rows(pool, N * C, [&](int64_t r0, int64_t r1) {
        for (int64_t nc = r0; nc < r1; ++nc) {
            for (int64_t oy = 0; oy < OH; ++oy) {
                for (int64_t ox = 0; ox < OW; ++ox) {
                    uint64_t gv = gd[(nc * OH + oy) * OW + ox];
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            int64_t t = nc * H * W + (oy * stride + ky) * W +
                                        ox * stride + kx;
                            dxd[t] = scalar::add(dt, dxd[t], gv);
                        }
                    }
                }
            }
        }
    });
    return dx;
}

Tensor column_sum(const Tensor& x, bool use_quire) {
    require(x.rank() == 2, "column_sum: rank-2 tensor required");
    const int64_t B = x.dim(0), N = x.dim(1);
    Tensor out(x.dtype(), {N});
    auto terms = [&](int64_t j, auto&& emit) {
        for (int64_t i = 0; i < B; ++i) emit(i * N + j);
    };
    dispatch_gather_sum(x, out, use_quire, terms, nullptr);
    return out;
}

Tensor ew_add(const Tensor& a, const Tensor& b) {
    check_same_dtype(a, b, "ew_add");
    require(a.shape() == b.shape(), "ew_add: shape mismatch");
    Tensor c(a.dtype(), a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) {
        c.set_bits(i, scalar::add(a.dtype(), a.bits_at(i), b.bits_at(i)));
    }
    return c;
}

Tensor ew_sub(const Tensor& a, const Tensor& b) {
    check_same_dtype(a, b, "ew_sub");
    require(a.shape() == b.shape(), "ew_sub: shape mismatch");
    Tensor c(a.dtype(), a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) {
        c.set_bits(i, scalar::sub(a.dtype(), a.bits_at(i), b.bits_at(i)));
    }
    return c;
}

Tensor ew_mul(const Tensor& a, const Tensor& b) {
    check_same_dtype(a, b, "ew_mul");
    require(a.shape() == b.shape(), "ew_mul: shape mismatch");
    Tensor c(a.dtype(), a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) {
        c.set_bits(i, scalar::mul(a.dtype(), a.bits_at(i), b.bits_at(i)));
    }
    return c;
}

Tensor scale(const Tensor& a, uint64_t scalar_bits) {
    Tensor c(a.dtype(), a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) {
        c.set_bits(i, scalar::mul(a.dtype(), a.bits_at(i), scalar_bits));
    }
    return c;
}

Tensor ldexp_tensor(const Tensor& a, int k) {
    Tensor c(a.dtype(), a.shape());
    switch (a.dtype().kind) {
        case ScalarKind::kF32:
            for (int64_t i = 0; i < a.numel(); ++i) {
                float v = std::bit_cast<float>(uint32_t(a.bits_at(i)));
                c.set_bits(i, std::bit_cast<uint32_t>(std::ldexp(v, k)));
            }
            break;
        case ScalarKind::kF64:
            for (int64_t i = 0; i < a.numel(); ++i) {
                double v = std::bit_cast<double>(a.bits_at(i));
                c.set_bits(i, std::bit_cast<uint64_t>(std::ldexp(v, k)));
            }
            break;
        case ScalarKind::kPosit:
            for (int64_t i = 0; i < a.numel(); ++i) {
                c.set_bits(i, ldexp_posit({a.dtype().cfg, a.bits_at(i)}, k).bits);
            }
            break;
    }
    return c;
}

Tensor transpose2d(const Tensor& a) {
    require(a.rank() == 2, "transpose2d: rank-2 tensor required");
    const int64_t m = a.dim(0), n = a.dim(1);
    Tensor t(a.dtype(), {n, m});
    const uint64_t* src = a.data();
    uint64_t* dst = t.data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
    }
    return t;
}

Tensor convert_tensor(const Tensor& t, const DType& target) {
    if (t.dtype() == target) return t;
    Tensor out(target, t.shape());
    const DType& src = t.dtype();
    if (src.kind == ScalarKind::kPosit && target.kind == ScalarKind::kPosit) {
        for (int64_t i = 0; i < t.numel(); ++i) {
            out.set_bits(i, convert({src.cfg, t.bits_at(i)}, target.cfg).bits);
        }
        return out;
    }
    for (int64_t i = 0; i < t.numel(); ++i) {
        out.set_bits(i, scalar::from_f64(target, scalar::to_f64(src, t.bits_at(i))));
    }
    return out;
}

}  // namespace pnn
