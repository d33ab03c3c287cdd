#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "jscc/random.hpp"
#include "jscc/tensor.hpp"

namespace jscc::nn {

template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    Param(std::string n, int a, int b, int c, int d) : name(std::move(n)), value(a, b, c, d), grad(a, b, c, d) {}
    void zero_grad() { grad.fill(T(0)); }
};

template <class T>
using ParamList = std::vector<Param<T>*>;

/// A layer with cached forward state. backward() must follow the matching
/// forward() call and accumulates parameter gradients.
template <class T>
class Module {
public:
    virtual ~Module() = default;
    virtual Tensor<T> forward(const Tensor<T>& x) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual void collect(ParamList<T>& /*out*/, const std::string& /*prefix*/) {}
};

template <class T>
ParamList<T> parameters(Module<T>& m, const std::string& prefix = "") {
    ParamList<T> out;
    m.collect(out, prefix);
    return out;
}

template <class T>
void zero_grad(const ParamList<T>& ps) {
    for (auto* p : ps) p->zero_grad();
}

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the common default for conv layers.
template <class T>
void fan_in_uniform(Tensor<T>& t, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : t.values()) v = static_cast<T>(u(rng));
}

/// Runs child modules in order.
template <class T>
class Sequential : public Module<T> {
public:
    template <class M, class... Args>
    M& add(std::string name, Args&&... args) {
        auto ptr = std::make_unique<M>(std::forward<Args>(args)...);
        M& ref = *ptr;
        names_.push_back(std::move(name));
        layers_.push_back(std::move(ptr));
        return ref;
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> h = x;
        for (auto& l : layers_) h = l->forward(h);
        return h;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        Tensor<T> h = g;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) h = (*it)->backward(h);
        return h;
    }

    void collect(ParamList<T>& out, const std::string& prefix) override {
        for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(out, prefix + names_[i] + ".");
    }

    std::size_t size() const { return layers_.size(); }

private:
    std::vector<std::string> names_;
    std::vector<std::unique_ptr<Module<T>>> layers_;
};

} // namespace jscc::nn
