#pragma once

#include <vector>

#include "pnn/tensor.hpp"
#include "pnn/thread_pool.hpp"

// Tensor kernels.  Posit tensors follow the per-stage semantics: with
// use_quire every output element is one exact accumulation rounded once;
// without it, a sequential multiply-add in ascending inner index, every step
// correctly rounded.  Float tensors always use plain native accumulation
// (the quire flag is ignored).  All kernels partition disjoint output
// regions across workers, so worker count never changes results.

namespace pnn {

Tensor ew_add(const Tensor& a, const Tensor& b);
Tensor ew_sub(const Tensor& a, const Tensor& b);
Tensor ew_mul(const Tensor& a, const Tensor& b);
// Elementwise multiply by one scalar (bit pattern in the tensor's dtype).
Tensor scale(const Tensor& a, uint64_t scalar_bits);
// Elementwise exact scaling by 2^k.
Tensor ldexp_tensor(const Tensor& a, int k);

Tensor transpose2d(const Tensor& a);
Tensor convert_tensor(const Tensor& t, const DType& target);

Tensor matmul(const Tensor& a, const Tensor& b, bool use_quire,
              const ThreadPool* pool = nullptr);
// Row-split wrapper around matmul with an explicit worker count;
// bit-identical to matmul for every count.
Tensor par_matmul(const Tensor& a, const Tensor& b, bool use_quire, int workers);

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride,
              int pad, bool use_quire, const ThreadPool* pool = nullptr);
Tensor conv2d_input_grad(const Tensor& dy, const Tensor& w,
                         const std::vector<int64_t>& x_shape, int stride,
                         int pad, bool use_quire, const ThreadPool* pool = nullptr);
Tensor conv2d_weight_grad(const Tensor& dy, const Tensor& x,
                          const std::vector<int64_t>& w_shape, int stride,
                          int pad, bool use_quire, const ThreadPool* pool = nullptr);
Tensor conv2d_bias_grad(const Tensor& dy, bool use_quire);

struct MaxPoolResult {
    Tensor out;
    std::vector<int64_t> argmax;  // flat input index per output element
};
MaxPoolResult maxpool2d(const Tensor& x, int k, int stride,
                        const ThreadPool* pool = nullptr);
Tensor maxpool2d_backward(const Tensor& dy, const std::vector<int64_t>& argmax,
                          const std::vector<int64_t>& x_shape);

// recip_bits: 1/window_count quantized into the dtype by the caller.
Tensor avgpool2d(const Tensor& x, int k, int stride, bool use_quire,
                 uint64_t recip_bits, const ThreadPool* pool = nullptr);
Tensor avgpool2d_backward(const Tensor& dy, int k, int stride,
                          const std::vector<int64_t>& x_shape,
                          uint64_t recip_bits, const ThreadPool* pool = nullptr);

// [B,N] -> [N], accumulated down each column in ascending row order.
Tensor column_sum(const Tensor& x, bool use_quire);

}  // namespace pnn
