#pragma once

#include <cmath>
#include <stdexcept>

#include "tsrnet/tensor.hpp"

namespace tsrnet {

// Uncertainty-aware restoration loss: per point
//   exp(-sigma) * (y - x)^2 + sigma
// averaged over all D*N entries.
struct LossValue {
    double total = 0.0;
    Tensor per_point;   // [D x N], unreduced terms
};

inline void check_loss_inputs(const Tensor& y, const Tensor& sigma, const Tensor& x) {
    check_same_shape(y, sigma, "restoration_loss");
    check_same_shape(y, x, "restoration_loss");
    if (!y.all_finite() || !sigma.all_finite() || !x.all_finite())
        throw std::invalid_argument("restoration_loss: non-finite input");
}

inline LossValue restoration_loss(const Tensor& y, const Tensor& sigma, const Tensor& x) {
    check_loss_inputs(y, sigma, x);
    LossValue out;
    out.per_point = Tensor(y.shape());
    const std::size_t n = y.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - x[i];
        const double term = std::exp(-sigma[i]) * r * r + sigma[i];
        out.per_point[i] = term;
        sum += term;
    }
    out.total = sum / static_cast<double>(n);
    return out;
}

// Analytic gradients of the mean loss w.r.t. y and sigma.
struct LossGradients {
    Tensor d_y;
    Tensor d_sigma;
};

inline LossGradients loss_gradients(const Tensor& y, const Tensor& sigma, const Tensor& x) {
    check_loss_inputs(y, sigma, x);
    LossGradients g;
    g.d_y = Tensor(y.shape());
    g.d_sigma = Tensor(y.shape());
    const std::size_t n = y.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - x[i];
        const double w = std::exp(-sigma[i]);
        g.d_y[i] = 2.0 * w * r * inv_n;
        g.d_sigma[i] = (1.0 - w * r * r) * inv_n;
    }
    return g;
}

} // namespace tsrnet
