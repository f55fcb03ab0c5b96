#ifndef MOD_NUMERICS_HPP
#define MOD_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "mod/matrix.hpp"

namespace mod {

constexpr real kBceEps = real(1e-6);
constexpr real kNormEps = real(1e-12);

// Sequential row-major accumulation; bit-deterministic for fixed inputs.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul " + a.shape_str() + " x " + b.shape_str());
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const real aik = a(i, k);
            if (aik == real{0}) continue;
            const real* brow = &b.data[k * b.cols];
            real* orow = &out.data[i * out.cols];
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

inline std::vector<real> softmax(const std::vector<real>& z) {
    if (z.empty()) throw DomainError("softmax of empty vector");
    const real zmax = *std::max_element(z.begin(), z.end());
    std::vector<real> out(z.size());
    real sum = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - zmax);
        sum += out[i];
    }
    for (real& v : out) v /= sum;
    return out;
}

inline real sigmoid_scalar(real z) {
    if (z >= 0) return real{1} / (real{1} + std::exp(-z));
    const real e = std::exp(z);
    return e / (real{1} + e);
}

inline std::vector<real> sigmoid(const std::vector<real>& z) {
    std::vector<real> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = sigmoid_scalar(z[i]);
    return out;
}

// Mean BCE over classes with probabilities clamped to [eps, 1-eps].
inline real bce_with_logits(const std::vector<real>& y, const std::vector<real>& z,
                            real eps = kBceEps) {
    if (y.size() != z.size())
        throw ShapeError("bce labels " + std::to_string(y.size()) + " vs logits " +
                         std::to_string(z.size()));
    if (y.empty()) throw ShapeError("bce of empty vectors");
    real loss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        real p = sigmoid_scalar(z[i]);
        p = std::clamp(p, eps, real{1} - eps);
        loss -= y[i] * std::log(p) + (real{1} - y[i]) * std::log(real{1} - p);
    }
    return loss / static_cast<real>(y.size());
}

// d(bce_with_logits)/dz. Zero where the clamp is active.
inline std::vector<real> bce_with_logits_grad(const std::vector<real>& y,
                                              const std::vector<real>& z, real eps = kBceEps) {
    if (y.size() != z.size())
        throw ShapeError("bce grad labels " + std::to_string(y.size()) + " vs logits " +
                         std::to_string(z.size()));
    const real inv_n = real{1} / static_cast<real>(y.size());
    std::vector<real> grad(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const real p = sigmoid_scalar(z[i]);
        grad[i] = (p > eps && p < real{1} - eps) ? inv_n * (p - y[i]) : real{0};
    }
    return grad;
}

inline std::vector<real> l2_normalize(const std::vector<real>& v, real eps = kNormEps) {
    real norm = 0;
    for (real x : v) norm += x * x;
    norm = std::sqrt(norm);
    const real denom = std::max(norm, eps);
    std::vector<real> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / denom;
    return out;
}

struct AdamState {
    Matrix m;
    Matrix v;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t rows = 0, std::size_t cols = 0) : m(rows, cols), v(rows, cols) {}
    static AdamState like(const Matrix& params) { return AdamState(params.rows, params.cols); }
};

struct AdamConfig {
    real beta1 = real(0.9);
    real beta2 = real(0.999);
    real eps = real(1e-8);
};

inline void adam_step(Matrix& params, const Matrix& grads, AdamState& state, real lr,
                      const AdamConfig& cfg = {}) {
    require_same_shape(params, grads, "adam params/grads");
    require_same_shape(params, state.m, "adam params/state");
    ++state.step;
    const real bc1 = real{1} - std::pow(cfg.beta1, static_cast<real>(state.step));
    const real bc2 = real{1} - std::pow(cfg.beta2, static_cast<real>(state.step));
    for (std::size_t i = 0; i < params.data.size(); ++i) {
        const real g = grads.data[i];
        state.m.data[i] = cfg.beta1 * state.m.data[i] + (real{1} - cfg.beta1) * g;
        state.v.data[i] = cfg.beta2 * state.v.data[i] + (real{1} - cfg.beta2) * g * g;
        const real mhat = state.m.data[i] / bc1;
        const real vhat = state.v.data[i] / bc2;
        params.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

// Max relative error between an analytic gradient and central differences.
// Run in 64-bit mode; h=1e-5 gives second-order truncation error.
inline real finite_diff_gradcheck(const std::function<real(const std::vector<real>&)>& f,
                                  std::vector<real> params, const std::vector<real>& analytic,
                                  real h = real(1e-5)) {
    if (params.size() != analytic.size()) throw ShapeError("gradcheck params vs analytic size");
    real worst = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const real saved = params[i];
        params[i] = saved + h;
        const real fp = f(params);
        params[i] = saved - h;
        const real fm = f(params);
        params[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw DomainError("gradcheck: non-finite objective");
        const real numeric = (fp - fm) / (2 * h);
        const real denom = std::max({real{1}, std::abs(analytic[i]), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace mod

#endif  // MOD_NUMERICS_HPP
