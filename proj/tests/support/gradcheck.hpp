#pragma once

// Central finite-difference gradient oracle. Independent of the library's
// backward pass by construction: it only nudges leaf values and reruns the
// forward build, so it cannot inherit a bug from the code it checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <statenet/graph.hpp>
#include <statenet/rng.hpp>

namespace gradcheck {

using statenet::Rng;
using statenet::ad::Array;
using statenet::ad::Node;
using statenet::ad::Shape;

inline Node<double> leaf(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Array<double> a(std::move(shape));
    for (double& v : a.data) v = rng.uniform(lo, hi);
    return Node<double>::parameter(std::move(a));
}

struct Result {
    std::size_t checked = 0;
    std::size_t failed = 0;
    double worst_abs_diff = 0;
    std::string first_failure;

    bool ok() const { return failed == 0 && checked > 0; }
};

// build_loss must construct a fresh scalar graph from the leaves' current
// values on every call. Tolerance: |analytic - fd| <= abs_floor +
// rel_tol * max(|analytic|, |fd|).
//
// The comparison is only meaningful where the loss is differentiable: at a
// ReLU kink the subgradient convention and the symmetric difference disagree
// by construction. Leaves drawn from a continuous distribution avoid landing
// exactly on a kink; a probe whose +-step interval happens to straddle one is
// disambiguated by shrinking the step (the estimate converges to the true
// derivative, so a persistent mismatch is a real backward bug).
inline Result check_gradients(std::vector<Node<double>>& leaves,
                              const std::function<Node<double>()>& build_loss, double step = 1e-4,
                              double rel_tol = 1e-3, double abs_floor = 1e-7) {
    for (auto& l : leaves) l.zero_grad();
    Node<double> loss = build_loss();
    statenet::ad::backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const auto& l : leaves) analytic.push_back(l.grad().data);

    Result result;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& values = leaves[li].value().data;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            const double a = analytic[li][i];

            bool ok = false;
            double fd = 0;
            for (double h : {step, step / 10.0, step / 100.0}) {
                values[i] = original + h;
                const double up = build_loss().value().data[0];
                values[i] = original - h;
                const double down = build_loss().value().data[0];
                values[i] = original;
                fd = (up - down) / (2.0 * h);
                if (std::abs(a - fd) <= abs_floor + rel_tol * std::max(std::abs(a), std::abs(fd))) {
                    ok = true;
                    break;
                }
            }
            ++result.checked;
            result.worst_abs_diff = std::max(result.worst_abs_diff, std::abs(a - fd));
            if (!ok) {
                ++result.failed;
                if (result.first_failure.empty())
                    result.first_failure = "leaf " + std::to_string(li) + " coord " + std::to_string(i) +
                                           ": analytic " + std::to_string(a) + " vs fd " +
                                           std::to_string(fd);
            }
        }
    }
    return result;
}

// Overwrites every leaf with uniform draws in [lo, hi). Continuous values keep
// the loss differentiable at the evaluation point almost surely (all-zero
// biases, in contrast, can park downstream ReLUs exactly on their kinks).
inline void randomize_leaves(std::vector<Node<double>>& leaves, Rng& rng, double lo = -0.8,
                             double hi = 0.8) {
    for (auto& l : leaves)
        for (double& v : l.value().data) v = rng.uniform(lo, hi);
}

} // namespace gradcheck
