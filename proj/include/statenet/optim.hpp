#pragma once

#include <cmath>
#include <cstddef>

#include "statenet/parameters.hpp"

namespace statenet::ad {

// Both steps read gradients and leave them untouched; the caller zeroes them
// between batches.

// accum = decay*accum + (1-decay)*g^2 ; p -= lr * g / sqrt(accum + eps)
template <typename T>
void rmsprop_step(ParameterSet<T>& params, T learning_rate, T decay = T(0.99), T epsilon = T(1e-8)) {
    for (auto& e : params.entries()) {
        if (!e.state_ready) {
            e.moment1 = Array<T>::zeros(e.node.value().shape);
            e.moment2 = Array<T>::zeros(e.node.value().shape);
            e.state_ready = true;
        }
        auto& value = e.node.value().data;
        const auto& grad = e.node.grad().data;
        auto& accum = e.moment1.data;
        for (std::size_t i = 0; i < value.size(); ++i) {
            accum[i] = decay * accum[i] + (T(1) - decay) * grad[i] * grad[i];
            value[i] -= learning_rate * grad[i] / std::sqrt(accum[i] + epsilon);
        }
    }
}

// Bias-corrected Adam; the step counter lives on the ParameterSet.
template <typename T>
void adam_step(ParameterSet<T>& params, T learning_rate, T beta1 = T(0.9), T beta2 = T(0.999),
               T epsilon = T(1e-8)) {
    params.adam_steps += 1;
    const T t = static_cast<T>(params.adam_steps);
    const T corr1 = T(1) - std::pow(beta1, t);
    const T corr2 = T(1) - std::pow(beta2, t);
    for (auto& e : params.entries()) {
        if (!e.state_ready) {
            e.moment1 = Array<T>::zeros(e.node.value().shape);
            e.moment2 = Array<T>::zeros(e.node.value().shape);
            e.state_ready = true;
        }
        auto& value = e.node.value().data;
        const auto& grad = e.node.grad().data;
        auto& m = e.moment1.data;
        auto& v = e.moment2.data;
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = beta1 * m[i] + (T(1) - beta1) * grad[i];
            v[i] = beta2 * v[i] + (T(1) - beta2) * grad[i] * grad[i];
            const T m_hat = m[i] / corr1;
            const T v_hat = v[i] / corr2;
            value[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon);
        }
    }
}

// Optional global max-norm clip, applied in place to the gradients.
template <typename T>
void clip_gradient_norm(ParameterSet<T>& params, T max_norm) {
    T sq = T(0);
    for (const auto& e : params.entries())
        for (T g : e.node.grad().data) sq += g * g;
    const T norm = std::sqrt(sq);
    if (norm <= max_norm || norm == T(0)) return;
    const T factor = max_norm / norm;
    for (auto& e : params.entries())
        for (T& g : e.node.grad().data) g *= factor;
}

} // namespace statenet::ad
