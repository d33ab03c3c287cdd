#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jscc/error.hpp"

namespace jscc {

// Fixed alignment keeps vectorized reductions in the same order from run to run.
template <class T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense 4-D array in NCHW order.
template <class T>
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w, T fill = T(0))
        : n_(n), c_(c), h_(h), w_(w), data_(static_cast<std::size_t>(n) * c * h * w, fill) {}

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(int b, int ch, int y, int x) const {
        return ((static_cast<std::size_t>(b) * c_ + ch) * h_ + y) * w_ + x;
    }
    T& operator()(int b, int ch, int y, int x) { return data_[index(b, ch, y, x)]; }
    const T& operator()(int b, int ch, int y, int x) const { return data_[index(b, ch, y, x)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    /// Contiguous H*W plane for one (batch, channel) pair.
    T* plane(int b, int ch) { return data_.data() + index(b, ch, 0, 0); }
    const T* plane(int b, int ch) const { return data_.data() + index(b, ch, 0, 0); }
    /// Contiguous C*H*W block for one batch entry.
    T* sample(int b) { return data_.data() + index(b, 0, 0, 0); }
    const T* sample(int b) const { return data_.data() + index(b, 0, 0, 0); }

    bool same_shape(const Tensor& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    std::string shape_string() const {
        return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," + std::to_string(h_) +
               "," + std::to_string(w_) + ")";
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor& operator+=(const Tensor& o) {
        require(same_shape(o), ErrorCategory::shape, "tensor add: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(n_, c_, h_, w_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    AlignedVector<T> data_;
};

template <class T>
Tensor<T> zeros_like(const Tensor<T>& t) {
    return Tensor<T>(t.n(), t.c(), t.h(), t.w());
}

} // namespace jscc
