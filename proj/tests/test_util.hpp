#pragma once

#include <cmath>
#include <functional>

#include "fpgan/tensor.hpp"

namespace fpgan::testutil {

inline Tensor fd_gradient(Tensor& t, const std::function<real()>& f, real eps = 1e-6) {
    Tensor g(t.shape());
    for (long i = 0; i < t.numel(); ++i) {
        const real orig = t[i];
        t[i] = orig + eps;
        const real hi = f();
        t[i] = orig - eps;
        const real lo = f();
        t[i] = orig;
        g[i] = (hi - lo) / (2 * eps);
    }
    return g;
}

/// Worst relative error, ignoring pairs whose absolute difference is below
/// atol (finite differences of exactly-zero gradients read pure roundoff).
inline real max_rel_error(const Tensor& a, const Tensor& b, real atol = 1e-7) {
    real worst = 0;
    for (long i = 0; i < a.numel(); ++i) {
        const real diff = std::abs(a[i] - b[i]);
        if (diff <= atol) continue;
        worst = std::max(worst, diff / std::max(std::abs(a[i]), std::abs(b[i])));
    }
    return worst;
}

}  // namespace fpgan::testutil
