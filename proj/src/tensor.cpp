#include "pnn/tensor.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "pnn/posit_math.hpp"

namespace pnn {

std::string to_string(const DType& dt) {
    switch (dt.kind) {
        case ScalarKind::kF32: return "float32";
        case ScalarKind::kF64: return "float64";
        case ScalarKind::kPosit: return to_string(dt.cfg);
    }
    return "?";
}

namespace {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t s : shape) {
        if (s < 0) throw std::invalid_argument("negative tensor extent");
        n *= s;
    }
    return n;
}

std::vector<int64_t> row_major_strides(const std::vector<int64_t>& shape) {
    std::vector<int64_t> st(shape.size(), 1);
    for (int i = int(shape.size()) - 2; i >= 0; --i) {
        st[size_t(i)] = st[size_t(i) + 1] * shape[size_t(i) + 1];
    }
    return st;
}

inline uint64_t f32_bits(float f) { return std::bit_cast<uint32_t>(f); }
inline float f32_of(uint64_t b) { return std::bit_cast<float>(uint32_t(b)); }
inline uint64_t f64_bits(double d) { return std::bit_cast<uint64_t>(d); }
inline double f64_of(uint64_t b) { return std::bit_cast<double>(b); }

}  // namespace

Tensor::Tensor(DType dt, std::vector<int64_t> shape)
    : dt_(dt),
      shape_(std::move(shape)),
      strides_(row_major_strides(shape_)),
      numel_(shape_numel(shape_)),
      buf_(std::make_shared<std::vector<uint64_t>>(size_t(numel_), 0)) {
    if (dt.kind == ScalarKind::kPosit && !dt.cfg.valid()) {
        throw std::invalid_argument("tensor with invalid posit config");
    }
}

Tensor Tensor::zeros(DType dt, std::vector<int64_t> shape) {
    return Tensor(dt, std::move(shape));
}

Tensor Tensor::full(DType dt, std::vector<int64_t> shape, double value) {
    Tensor t(dt, std::move(shape));
    uint64_t b = scalar::from_f64(dt, value);
    for (int64_t i = 0; i < t.numel(); ++i) t.set_bits(i, b);
    return t;
}

Tensor Tensor::from_values(DType dt, std::vector<int64_t> shape,
                           const std::vector<double>& values) {
    Tensor t(dt, std::move(shape));
    if (int64_t(values.size()) != t.numel()) {
        throw std::invalid_argument("from_values: element count mismatch");
    }
    for (int64_t i = 0; i < t.numel(); ++i) {
        t.set_bits(i, scalar::from_f64(dt, values[size_t(i)]));
    }
    return t;
}

double Tensor::f64_at(int64_t i) const { return scalar::to_f64(dt_, bits_at(i)); }

void Tensor::set_f64(int64_t i, double v) { set_bits(i, scalar::from_f64(dt_, v)); }

PositValue Tensor::posit_at(int64_t i) const {
    if (dt_.kind != ScalarKind::kPosit) {
        throw std::invalid_argument("posit_at on non-posit tensor");
    }
    return {dt_.cfg, bits_at(i)};
}

int64_t Tensor::index_of(const std::vector<int64_t>& idx) const {
    if (idx.size() != shape_.size()) {
        throw std::invalid_argument("index rank mismatch");
    }
    int64_t flat = 0;
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= shape_[i]) {
            throw std::invalid_argument("index out of range");
        }
        flat += idx[i] * strides_[i];
    }
    return flat;
}

Tensor Tensor::reshape(std::vector<int64_t> new_shape) const {
    if (shape_numel(new_shape) != numel_) {
        throw std::invalid_argument("reshape: element count mismatch");
    }
    Tensor t;
    t.dt_ = dt_;
    t.shape_ = std::move(new_shape);
    t.strides_ = row_major_strides(t.shape_);
    t.numel_ = numel_;
    t.buf_ = buf_;
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.dt_ = dt_;
    t.shape_ = shape_;
    t.strides_ = strides_;
    t.numel_ = numel_;
    t.buf_ = std::make_shared<std::vector<uint64_t>>(*buf_);
    return t;
}

namespace scalar {

uint64_t add(const DType& dt, uint64_t a, uint64_t b) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(f32_of(a) + f32_of(b));
        case ScalarKind::kF64: return f64_bits(f64_of(a) + f64_of(b));
        default: return pnn::add({dt.cfg, a}, {dt.cfg, b}).bits;
    }
}

uint64_t sub(const DType& dt, uint64_t a, uint64_t b) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(f32_of(a) - f32_of(b));
        case ScalarKind::kF64: return f64_bits(f64_of(a) - f64_of(b));
        default: return pnn::sub({dt.cfg, a}, {dt.cfg, b}).bits;
    }
}

uint64_t mul(const DType& dt, uint64_t a, uint64_t b) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(f32_of(a) * f32_of(b));
        case ScalarKind::kF64: return f64_bits(f64_of(a) * f64_of(b));
        default: return pnn::mul({dt.cfg, a}, {dt.cfg, b}).bits;
    }
}

uint64_t div(const DType& dt, uint64_t a, uint64_t b) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(f32_of(a) / f32_of(b));
        case ScalarKind::kF64: return f64_bits(f64_of(a) / f64_of(b));
        default: return pnn::div({dt.cfg, a}, {dt.cfg, b}).bits;
    }
}

uint64_t neg(const DType& dt, uint64_t a) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(-f32_of(a));
        case ScalarKind::kF64: return f64_bits(-f64_of(a));
        default: return pnn::negate({dt.cfg, a}).bits;
    }
}

int cmp(const DType& dt, uint64_t a, uint64_t b) {
    switch (dt.kind) {
        case ScalarKind::kF32: {
            float x = f32_of(a), y = f32_of(b);
            return x < y ? -1 : (x > y ? 1 : 0);
        }
        case ScalarKind::kF64: {
            double x = f64_of(a), y = f64_of(b);
            return x < y ? -1 : (x > y ? 1 : 0);
        }
        default: return pnn::compare({dt.cfg, a}, {dt.cfg, b});
    }
}

uint64_t from_f64(const DType& dt, double v) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(float(v));
        case ScalarKind::kF64: return f64_bits(v);
        default: return pnn::from_float64(v, dt.cfg).bits;
    }
}

double to_f64(const DType& dt, uint64_t a) {
    switch (dt.kind) {
        case ScalarKind::kF32: return double(f32_of(a));
        case ScalarKind::kF64: return f64_of(a);
        default: return pnn::to_float64({dt.cfg, a});
    }
}

uint64_t exp(const DType& dt, uint64_t a) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(std::exp(f32_of(a)));
        case ScalarKind::kF64: return f64_bits(std::exp(f64_of(a)));
        default: return exp_posit({dt.cfg, a}).bits;
    }
}

uint64_t log(const DType& dt, uint64_t a) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(std::log(f32_of(a)));
        case ScalarKind::kF64: return f64_bits(std::log(f64_of(a)));
        default: return log_posit({dt.cfg, a}).bits;
    }
}

uint64_t tanh(const DType& dt, uint64_t a) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(std::tanh(f32_of(a)));
        case ScalarKind::kF64: return f64_bits(std::tanh(f64_of(a)));
        default: return tanh_posit({dt.cfg, a}).bits;
    }
}

uint64_t sigmoid(const DType& dt, uint64_t a) {
    switch (dt.kind) {
        case ScalarKind::kF32: {
            float x = f32_of(a);
            return f32_bits(1.0f / (1.0f + std::exp(-x)));
        }
        case ScalarKind::kF64: {
            double x = f64_of(a);
            return f64_bits(1.0 / (1.0 + std::exp(-x)));
        }
        default: return sigmoid_posit({dt.cfg, a}).bits;
    }
}

uint64_t sqrt(const DType& dt, uint64_t a) {
    switch (dt.kind) {
        case ScalarKind::kF32: return f32_bits(std::sqrt(f32_of(a)));
        case ScalarKind::kF64: return f64_bits(std::sqrt(f64_of(a)));
        default: return sqrt_posit({dt.cfg, a}).bits;
    }
}

uint64_t one(const DType& dt) { return from_f64(dt, 1.0); }

}  // namespace scalar

}  // namespace pnn
