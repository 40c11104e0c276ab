#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pnn/posit.hpp"

// N-dimensional tensor over a flat buffer with row-major strides.  Elements
// are bit patterns stored one per 64-bit slot; the scalar kind is either a
// posit config or a reference float (binary32/binary64).  Tensors share
// buffers on copy and are treated as immutable once handed out; kernels
// write only into freshly allocated outputs.

namespace pnn {

enum class ScalarKind : uint8_t { kPosit, kF32, kF64 };

struct DType {
    ScalarKind kind = ScalarKind::kF64;
    PositConfig cfg{};

    friend bool operator==(const DType& a, const DType& b) {
        if (a.kind != b.kind) return false;
        return a.kind != ScalarKind::kPosit || a.cfg == b.cfg;
    }
};

inline DType posit_dtype(const PositConfig& cfg) { return {ScalarKind::kPosit, cfg}; }
inline DType f32_dtype() { return {ScalarKind::kF32, {}}; }
inline DType f64_dtype() { return {ScalarKind::kF64, {}}; }
std::string to_string(const DType& dt);

class Tensor {
public:
    Tensor() = default;
    Tensor(DType dt, std::vector<int64_t> shape);

    static Tensor zeros(DType dt, std::vector<int64_t> shape);
    static Tensor full(DType dt, std::vector<int64_t> shape, double value);
    static Tensor from_values(DType dt, std::vector<int64_t> shape,
                              const std::vector<double>& values);

    const DType& dtype() const { return dt_; }
    const std::vector<int64_t>& shape() const { return shape_; }
    const std::vector<int64_t>& strides() const { return strides_; }
    int rank() const { return int(shape_.size()); }
    int64_t dim(int i) const { return shape_[size_t(i)]; }
    int64_t numel() const { return numel_; }
    bool defined() const { return bool(buf_); }

    uint64_t* data() { return buf_->data(); }
    const uint64_t* data() const { return buf_->data(); }

    uint64_t bits_at(int64_t i) const { return (*buf_)[size_t(i)]; }
    void set_bits(int64_t i, uint64_t b) { (*buf_)[size_t(i)] = b; }

    // Scalar bridges; set_f64 rounds into the dtype, f64_at reads back.
    double f64_at(int64_t i) const;
    void set_f64(int64_t i, double v);
    PositValue posit_at(int64_t i) const;

    int64_t index_of(const std::vector<int64_t>& idx) const;

    Tensor reshape(std::vector<int64_t> new_shape) const;  // shares storage
    Tensor clone() const;

private:
    DType dt_;
    std::vector<int64_t> shape_;
    std::vector<int64_t> strides_;
    int64_t numel_ = 0;
    std::shared_ptr<std::vector<uint64_t>> buf_;
};

// Scalar helpers dispatched on dtype; posits go through the auto arithmetic
// path (tables / float64 fast path / exact kernel).
namespace scalar {
uint64_t add(const DType& dt, uint64_t a, uint64_t b);
uint64_t sub(const DType& dt, uint64_t a, uint64_t b);
uint64_t mul(const DType& dt, uint64_t a, uint64_t b);
uint64_t div(const DType& dt, uint64_t a, uint64_t b);
uint64_t neg(const DType& dt, uint64_t a);
int cmp(const DType& dt, uint64_t a, uint64_t b);
uint64_t from_f64(const DType& dt, double v);
double to_f64(const DType& dt, uint64_t a);
uint64_t exp(const DType& dt, uint64_t a);
uint64_t log(const DType& dt, uint64_t a);
uint64_t tanh(const DType& dt, uint64_t a);
uint64_t sigmoid(const DType& dt, uint64_t a);
uint64_t sqrt(const DType& dt, uint64_t a);
inline uint64_t zero(const DType&) { return 0; }
uint64_t one(const DType& dt);
}  // namespace scalar

}  // namespace pnn
