#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "statenet/graph.hpp"

namespace statenet::ad {

// Population layer-norm variance guard (zero-variance inputs stay finite).
inline constexpr double kLayerNormEpsilon = 1e-5;
// Smoothing inside the 2-norm sqrt; keeps the distance gradient finite at a == b.
inline constexpr double kDistanceEpsilon = 1e-12;

namespace detail {
template <typename T>
using NodeData = typename Node<T>::Data;
}

// y = w·x + b with w of shape [n_out x n_in], x [n_in], b [n_out].
template <typename T>
Node<T> linear(const Node<T>& x, const Node<T>& w, const Node<T>& b) {
    if (w.value().rank() != 2 || x.value().rank() != 1 || b.value().rank() != 1)
        throw ShapeError("linear: expected w matrix, x/b vectors");
    const std::size_t n_out = w.value().dim(0);
    const std::size_t n_in = w.value().dim(1);
    if (x.value().numel() != n_in || b.value().numel() != n_out)
        throw ShapeError("linear: shapes do not conform, w " + shape_str(w.value().shape) +
                         " x " + shape_str(x.value().shape) + " b " + shape_str(b.value().shape));

    Array<T> out({n_out});
    const auto& wv = w.value();
    const auto& xv = x.value().data;
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < n_out; ++i) {
        T acc = bv[i];
        const T* row = &wv.data[i * n_in];
        for (std::size_t j = 0; j < n_in; ++j) acc += row[j] * xv[j];
        out.data[i] = acc;
    }

    auto px = x.impl();
    auto pw = w.impl();
    auto pb = b.impl();
    return detail::make_op_node<T>(
        std::move(out), {px, pw, pb},
        [px, pw, pb, n_out, n_in](detail::NodeData<T>& self) {
            const auto& g = self.grad.data;
            if (px->needs_grad) {
                for (std::size_t j = 0; j < n_in; ++j) {
                    T acc = T(0);
                    for (std::size_t i = 0; i < n_out; ++i) acc += g[i] * pw->value.data[i * n_in + j];
                    px->grad.data[j] += acc;
                }
            }
            if (pw->needs_grad) {
                for (std::size_t i = 0; i < n_out; ++i)
                    for (std::size_t j = 0; j < n_in; ++j)
                        pw->grad.data[i * n_in + j] += g[i] * px->value.data[j];
            }
            if (pb->needs_grad)
                for (std::size_t i = 0; i < n_out; ++i) pb->grad.data[i] += g[i];
        });
}

// y = w·x (no bias); used by the LSTM recurrence.
template <typename T>
Node<T> matvec(const Node<T>& w, const Node<T>& x) {
    if (w.value().rank() != 2 || x.value().rank() != 1 || x.value().numel() != w.value().dim(1))
        throw ShapeError("matvec: shapes do not conform, w " + shape_str(w.value().shape) +
                         " x " + shape_str(x.value().shape));
    const std::size_t n_out = w.value().dim(0);
    const std::size_t n_in = w.value().dim(1);
    Array<T> out({n_out});
    for (std::size_t i = 0; i < n_out; ++i) {
        T acc = T(0);
        const T* row = &w.value().data[i * n_in];
        for (std::size_t j = 0; j < n_in; ++j) acc += row[j] * x.value().data[j];
        out.data[i] = acc;
    }
    auto pw = w.impl();
    auto px = x.impl();
    return detail::make_op_node<T>(
        std::move(out), {pw, px},
        [pw, px, n_out, n_in](detail::NodeData<T>& self) {
            const auto& g = self.grad.data;
            if (pw->needs_grad)
                for (std::size_t i = 0; i < n_out; ++i)
                    for (std::size_t j = 0; j < n_in; ++j)
                        pw->grad.data[i * n_in + j] += g[i] * px->value.data[j];
            if (px->needs_grad)
                for (std::size_t j = 0; j < n_in; ++j) {
                    T acc = T(0);
                    for (std::size_t i = 0; i < n_out; ++i) acc += g[i] * pw->value.data[i * n_in + j];
                    px->grad.data[j] += acc;
                }
        });
}

// Elementwise max(0, x). Subgradient at exactly 0 is 0.
template <typename T>
Node<T> relu(const Node<T>& x) {
    Array<T> out(x.value().shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = x.value().data[i] > T(0) ? x.value().data[i] : T(0);
    auto px = x.impl();
    return detail::make_op_node<T>(
        std::move(out), {px},
        [px](detail::NodeData<T>& self) {
            if (!px->needs_grad) return;
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                if (px->value.data[i] > T(0)) px->grad.data[i] += self.grad.data[i];
        });
}

template <typename T>
Node<T> sigmoid(const Node<T>& x) {
    Array<T> out(x.value().shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const T v = x.value().data[i];
        out.data[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                                : std::exp(v) / (T(1) + std::exp(v));
    }
    auto px = x.impl();
    return detail::make_op_node<T>(
        std::move(out), {px},
        [px](detail::NodeData<T>& self) {
            if (!px->needs_grad) return;
            for (std::size_t i = 0; i < self.grad.numel(); ++i) {
                const T y = self.value.data[i];
                px->grad.data[i] += self.grad.data[i] * y * (T(1) - y);
            }
        });
}

template <typename T>
Node<T> tanh(const Node<T>& x) {
    Array<T> out(x.value().shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::tanh(x.value().data[i]);
    auto px = x.impl();
    return detail::make_op_node<T>(
        std::move(out), {px},
        [px](detail::NodeData<T>& self) {
            if (!px->needs_grad) return;
            for (std::size_t i = 0; i < self.grad.numel(); ++i) {
                const T y = self.value.data[i];
                px->grad.data[i] += self.grad.data[i] * (T(1) - y * y);
            }
        });
}

template <typename T>
Node<T> add(const Node<T>& a, const Node<T>& b) {
    require_same_shape(a.value(), b.value(), "add");
    Array<T> out(a.value().shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = a.value().data[i] + b.value().data[i];
    auto pa = a.impl();
    auto pb = b.impl();
    return detail::make_op_node<T>(
        std::move(out), {pa, pb},
        [pa, pb](detail::NodeData<T>& self) {
            for (std::size_t i = 0; i < self.grad.numel(); ++i) {
                if (pa->needs_grad) pa->grad.data[i] += self.grad.data[i];
                if (pb->needs_grad) pb->grad.data[i] += self.grad.data[i];
            }
        });
}

// Elementwise (Hadamard) product.
template <typename T>
Node<T> mul(const Node<T>& a, const Node<T>& b) {
    require_same_shape(a.value(), b.value(), "mul");
    Array<T> out(a.value().shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = a.value().data[i] * b.value().data[i];
    auto pa = a.impl();
    auto pb = b.impl();
    return detail::make_op_node<T>(
        std::move(out), {pa, pb},
        [pa, pb](detail::NodeData<T>& self) {
            for (std::size_t i = 0; i < self.grad.numel(); ++i) {
                if (pa->needs_grad) pa->grad.data[i] += self.grad.data[i] * pb->value.data[i];
                if (pb->needs_grad) pb->grad.data[i] += self.grad.data[i] * pa->value.data[i];
            }
        });
}

// Multiply by a fixed scalar (not a graph input).
template <typename T>
Node<T> scale(const Node<T>& x, T factor) {
    Array<T> out(x.value().shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = factor * x.value().data[i];
    auto px = x.impl();
    return detail::make_op_node<T>(
        std::move(out), {px},
        [px, factor](detail::NodeData<T>& self) {
            if (!px->needs_grad) return;
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                px->grad.data[i] += factor * self.grad.data[i];
        });
}

// Contiguous sub-vector x[offset .. offset+length).
template <typename T>
Node<T> slice(const Node<T>& x, std::size_t offset, std::size_t length) {
    if (x.value().rank() != 1 || offset + length > x.value().numel())
        throw ShapeError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") out of " + shape_str(x.value().shape));
    Array<T> out({length});
    for (std::size_t i = 0; i < length; ++i) out.data[i] = x.value().data[offset + i];
    auto px = x.impl();
    return detail::make_op_node<T>(
        std::move(out), {px},
        [px, offset, length](detail::NodeData<T>& self) {
            if (!px->needs_grad) return;
            for (std::size_t i = 0; i < length; ++i)
                px->grad.data[offset + i] += self.grad.data[i];
        });
}

// Concatenation of rank-1 nodes in order.
template <typename T>
Node<T> concat(const std::vector<Node<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat: empty input list");
    std::size_t total = 0;
    for (const auto& x : xs) {
        if (x.value().rank() != 1) throw ShapeError("concat: inputs must be vectors");
        total += x.value().numel();
    }
    Array<T> out({total});
    std::vector<std::shared_ptr<detail::NodeData<T>>> parents;
    std::vector<std::size_t> offsets;
    parents.reserve(xs.size());
    offsets.reserve(xs.size());
    std::size_t off = 0;
    for (const auto& x : xs) {
        std::copy(x.value().data.begin(), x.value().data.end(), out.data.begin() + off);
        parents.push_back(x.impl());
        offsets.push_back(off);
        off += x.value().numel();
    }
    auto parents_copy = parents;
    return detail::make_op_node<T>(
        std::move(out), std::move(parents),
        [ps = std::move(parents_copy), offsets](detail::NodeData<T>& self) {
            for (std::size_t p = 0; p < ps.size(); ++p) {
                if (!ps[p]->needs_grad) continue;
                const std::size_t n = ps[p]->value.numel();
                for (std::size_t i = 0; i < n; ++i)
                    ps[p]->grad.data[i] += self.grad.data[offsets[p] + i];
            }
        });
}

template <typename T>
Node<T> concat(const Node<T>& a, const Node<T>& b) {
    return concat(std::vector<Node<T>>{a, b});
}

// Elementwise sum of equally shaped vectors; sum of one vector is that vector.
template <typename T>
Node<T> sum_vectors(const std::vector<Node<T>>& xs) {
    if (xs.empty()) throw ShapeError("sum_vectors: empty input list");
    for (const auto& x : xs) require_same_shape(xs.front().value(), x.value(), "sum_vectors");
    Array<T> out(xs.front().value().shape);
    std::vector<std::shared_ptr<detail::NodeData<T>>> parents;
    parents.reserve(xs.size());
    for (const auto& x : xs) {
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += x.value().data[i];
        parents.push_back(x.impl());
    }
    auto parents_copy = parents;
    return detail::make_op_node<T>(
        std::move(out), std::move(parents),
        [ps = std::move(parents_copy)](detail::NodeData<T>& self) {
            for (const auto& p : ps) {
                if (!p->needs_grad) continue;
                for (std::size_t i = 0; i < self.grad.numel(); ++i)
                    p->grad.data[i] += self.grad.data[i];
            }
        });
}

// Scalar sum over all elements.
template <typename T>
Node<T> sum_elements(const Node<T>& x) {
    T acc = T(0);
    for (T v : x.value().data) acc += v;
    Array<T> out({1});
    out.data[0] = acc;
    auto px = x.impl();
    return detail::make_op_node<T>(
        std::move(out), {px},
        [px](detail::NodeData<T>& self) {
            if (!px->needs_grad) return;
            for (std::size_t i = 0; i < px->grad.numel(); ++i)
                px->grad.data[i] += self.grad.data[0];
        });
}

// (x - mean) / sqrt(var + epsilon), scaled by gain and shifted by bias.
// var is the population variance over the d elements.
template <typename T>
Node<T> layer_norm(const Node<T>& x, const Node<T>& gain, const Node<T>& bias, T epsilon) {
    if (x.value().rank() != 1) throw ShapeError("layer_norm: input must be a vector");
    require_same_shape(x.value(), gain.value(), "layer_norm gain");
    require_same_shape(x.value(), bias.value(), "layer_norm bias");
    const std::size_t d = x.value().numel();

    T mean = T(0);
    for (T v : x.value().data) mean += v;
    mean /= T(d);
    T var = T(0);
    for (T v : x.value().data) var += (v - mean) * (v - mean);
    var /= T(d);
    const T inv = T(1) / std::sqrt(var + epsilon);

    std::vector<T> normalized(d);
    Array<T> out({d});
    for (std::size_t i = 0; i < d; ++i) {
        normalized[i] = (x.value().data[i] - mean) * inv;
        out.data[i] = gain.value().data[i] * normalized[i] + bias.value().data[i];
    }

    auto px = x.impl();
    auto pg = gain.impl();
    auto pb = bias.impl();
    return detail::make_op_node<T>(
        std::move(out), {px, pg, pb},
        [px, pg, pb, inv, normalized = std::move(normalized), d](detail::NodeData<T>& self) {
            const auto& g = self.grad.data;
            if (px->needs_grad) {
                // gh = dL/d(normalized); dx = inv * (gh - mean(gh) - normalized * mean(gh*normalized))
                T m1 = T(0), m2 = T(0);
                std::vector<T> gh(d);
                for (std::size_t i = 0; i < d; ++i) {
                    gh[i] = g[i] * pg->value.data[i];
                    m1 += gh[i];
                    m2 += gh[i] * normalized[i];
                }
                m1 /= T(d);
                m2 /= T(d);
                for (std::size_t i = 0; i < d; ++i)
                    px->grad.data[i] += inv * (gh[i] - m1 - normalized[i] * m2);
            }
            if (pg->needs_grad)
                for (std::size_t i = 0; i < d; ++i) pg->grad.data[i] += g[i] * normalized[i];
            if (pb->needs_grad)
                for (std::size_t i = 0; i < d; ++i) pb->grad.data[i] += g[i];
        });
}

template <typename T>
Node<T> layer_norm(const Node<T>& x, const Node<T>& gain, const Node<T>& bias) {
    return layer_norm(x, gain, bias, T(kLayerNormEpsilon));
}

// -sqrt(sum((a_i - b_i)^2) + kDistanceEpsilon), a scalar node.
template <typename T>
Node<T> neg_l2_distance(const Node<T>& a, const Node<T>& b) {
    require_same_shape(a.value(), b.value(), "neg_l2_distance");
    T sq = T(0);
    for (std::size_t i = 0; i < a.value().numel(); ++i) {
        const T diff = a.value().data[i] - b.value().data[i];
        sq += diff * diff;
    }
    const T dist = std::sqrt(sq + T(kDistanceEpsilon));
    Array<T> out({1});
    out.data[0] = -dist;
    auto pa = a.impl();
    auto pb = b.impl();
    return detail::make_op_node<T>(
        std::move(out), {pa, pb},
        [pa, pb, dist](detail::NodeData<T>& self) {
            const T coef = self.grad.data[0] / dist;
            for (std::size_t i = 0; i < pa->value.numel(); ++i) {
                const T diff = pa->value.data[i] - pb->value.data[i];
                if (pa->needs_grad) pa->grad.data[i] -= coef * diff;
                if (pb->needs_grad) pb->grad.data[i] += coef * diff;
            }
        });
}

// -log(softmax(logits)[target]), computed with max subtraction.
template <typename T>
Node<T> softmax_cross_entropy(const Node<T>& logits, std::size_t target_index) {
    if (logits.value().rank() != 1) throw ShapeError("softmax_cross_entropy: logits must be a vector");
    const std::size_t k = logits.value().numel();
    if (target_index >= k)
        throw DataError("softmax_cross_entropy: target index " + std::to_string(target_index) +
                        " out of range for " + std::to_string(k) + " logits");
    const auto& l = logits.value().data;
    const T max_logit = *std::max_element(l.begin(), l.end());
    T denom = T(0);
    for (T v : l) denom += std::exp(v - max_logit);
    const T log_sum = max_logit + std::log(denom);

    std::vector<T> probs(k);
    for (std::size_t i = 0; i < k; ++i) probs[i] = std::exp(l[i] - log_sum);

    Array<T> out({1});
    out.data[0] = log_sum - l[target_index];
    auto pl = logits.impl();
    return detail::make_op_node<T>(
        std::move(out), {pl},
        [pl, probs = std::move(probs), target_index](detail::NodeData<T>& self) {
            if (!pl->needs_grad) return;
            const T g = self.grad.data[0];
            for (std::size_t i = 0; i < probs.size(); ++i)
                pl->grad.data[i] += g * (probs[i] - (i == target_index ? T(1) : T(0)));
        });
}

// Standard LSTM cell built from the primitive ops above; gate packing order
// along the 4H axis is [input, forget, candidate, output].
template <typename T>
struct LstmOut {
    Node<T> hidden;
    Node<T> cell;
};

template <typename T>
LstmOut<T> lstm_cell(const Node<T>& input, const Node<T>& h_prev, const Node<T>& c_prev,
                     const Node<T>& w_ih, const Node<T>& w_hh, const Node<T>& bias) {
    const std::size_t hidden = h_prev.value().numel();
    if (c_prev.value().numel() != hidden || w_ih.value().rank() != 2 || w_hh.value().rank() != 2 ||
        w_ih.value().dim(0) != 4 * hidden || w_hh.value().dim(0) != 4 * hidden ||
        w_hh.value().dim(1) != hidden || w_ih.value().dim(1) != input.value().numel() ||
        bias.value().numel() != 4 * hidden)
        throw ShapeError("lstm_cell: shapes do not conform, input " + shape_str(input.value().shape) +
                         " hidden " + shape_str(h_prev.value().shape) +
                         " w_ih " + shape_str(w_ih.value().shape) +
                         " w_hh " + shape_str(w_hh.value().shape));

    Node<T> z = add(linear(input, w_ih, bias), matvec(w_hh, h_prev));
    Node<T> gate_in = sigmoid(slice(z, 0, hidden));
    Node<T> gate_forget = sigmoid(slice(z, hidden, hidden));
    Node<T> candidate = tanh(slice(z, 2 * hidden, hidden));
    Node<T> gate_out = sigmoid(slice(z, 3 * hidden, hidden));
    Node<T> cell = add(mul(gate_forget, c_prev), mul(gate_in, candidate));
    Node<T> h = mul(gate_out, tanh(cell));
    return {h, cell};
}

// Plain array softmax (inference path), max-subtracted.
template <typename T>
std::vector<T> softmax_values(const std::vector<T>& logits) {
    std::vector<T> out(logits.size());
    const T max_logit = *std::max_element(logits.begin(), logits.end());
    T denom = T(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        denom += out[i];
    }
    for (T& v : out) v /= denom;
    return out;
}

} // namespace statenet::ad
