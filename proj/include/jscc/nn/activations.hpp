#pragma once

#include <cmath>

#include "jscc/nn/module.hpp"

namespace jscc::nn {

template <class T>
class LeakyReLU : public Module<T> {
public:
    explicit LeakyReLU(T slope = T(0.01)) : slope_(slope) {}

    Tensor<T> forward(const Tensor<T>& x) override {
        input_ = x;
        Tensor<T> y = x;
        for (auto& v : y.values()) v = v > T(0) ? v : slope_ * v;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        Tensor<T> gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (!(input_[i] > T(0))) gx[i] *= slope_;
        return gx;
    }

private:
    T slope_;
    Tensor<T> input_;
};

template <class T>
class ReLU : public Module<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        input_ = x;
        Tensor<T> y = x;
        for (auto& v : y.values()) v = v > T(0) ? v : T(0);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        Tensor<T> gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (!(input_[i] > T(0))) gx[i] = T(0);
        return gx;
    }

private:
    Tensor<T> input_;
};

template <class T>
inline T sigmoid(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

template <class T>
class Sigmoid : public Module<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        out_ = x;
        for (auto& v : out_.values()) v = sigmoid(v);
        return out_;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        Tensor<T> gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= out_[i] * (T(1) - out_[i]);
        return gx;
    }

private:
    Tensor<T> out_;
};

} // namespace jscc::nn
