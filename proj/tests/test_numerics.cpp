#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mod/numerics.hpp"

namespace {

using mod::Matrix;
using mod::Rng;
using mod::real;

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (real& v : m.data) v = static_cast<real>(scale * rng.normal());
    return m;
}

// Independent oracle: scalar triple loop, no blocking, no skipping.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            real acc = 0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

TEST(Matmul, IdentityLeavesOperandUnchanged) {
    Rng rng(1);
    const Matrix m = random_matrix(3, 5, rng);
    const Matrix out = mod::matmul(Matrix::identity(3), m);
    for (std::size_t i = 0; i < m.data.size(); ++i) EXPECT_EQ(out.data[i], m.data[i]);
}

TEST(Matmul, ZeroAnnihilates) {
    Rng rng(2);
    const Matrix m = random_matrix(3, 4, rng);
    const Matrix out = mod::matmul(Matrix(2, 3), m);
    for (real v : out.data) EXPECT_EQ(v, real{0});
    EXPECT_EQ(out.rows, 2u);
    EXPECT_EQ(out.cols, 4u);
}

TEST(Matmul, MatchesScalarOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(4, 4, rng);
        const Matrix b = random_matrix(4, 4, rng);
        const Matrix got = mod::matmul(a, b);
        const Matrix want = matmul_oracle(a, b);
        for (std::size_t i = 0; i < got.data.size(); ++i) {
            const double denom = std::max(1.0, std::abs(double(want.data[i])));
            EXPECT_LT(std::abs(double(got.data[i] - want.data[i])) / denom, 1e-12);
        }
    }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    try {
        mod::matmul(Matrix(2, 3), Matrix(4, 2));
        FAIL() << "expected shape error";
    } catch (const mod::ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos);
        EXPECT_NE(msg.find("4x2"), std::string::npos);
    }
}

TEST(Softmax, SymmetricPair) {
    const auto out = mod::softmax({0, 0});
    EXPECT_NEAR(double(out[0]), 0.5, 1e-15);
    EXPECT_NEAR(double(out[1]), 0.5, 1e-15);
}

TEST(Softmax, LogThreeGivesQuarterThreeQuarters) {
    const auto out = mod::softmax({0, std::log(real(3))});
    EXPECT_NEAR(double(out[0]), 0.25, 1e-12);
    EXPECT_NEAR(double(out[1]), 0.75, 1e-12);
}

TEST(Softmax, LargeInputsDoNotOverflow) {
    const auto out = mod::softmax({1000, 1000});
    EXPECT_NEAR(double(out[0]), 0.5, 1e-12);
    EXPECT_NEAR(double(out[1]), 0.5, 1e-12);
    for (real v : out) EXPECT_TRUE(std::isfinite(double(v)));
}

TEST(Softmax, EmptyInputIsDomainError) {
    EXPECT_THROW(mod::softmax({}), mod::DomainError);
}

TEST(Softmax, SumsToOneAndShiftInvariantOnRandomInputs) {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(16);
        std::vector<real> z(n);
        for (real& v : z) v = static_cast<real>(rng.uniform(-30.0, 30.0));
        const auto p = mod::softmax(z);
        real sum = 0;
        for (real v : p) {
            EXPECT_GT(v, real{0});
            EXPECT_LT(v, real{1} + real(1e-12));
            sum += v;
        }
        EXPECT_NEAR(double(sum), 1.0, 1e-9);

        const real shift = static_cast<real>(rng.uniform(-100.0, 100.0));
        std::vector<real> zs(z);
        for (real& v : zs) v += shift;
        const auto ps = mod::softmax(zs);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(double(p[i]), double(ps[i]), 1e-12);
    }
}

TEST(Bce, BalancedPairGivesLogTwo) {
    const real loss = mod::bce_with_logits({1, 0}, {0, 0});
    EXPECT_NEAR(double(loss), std::log(2.0), 1e-12);
}

TEST(Bce, SaturatedLogitIsClampedNearZero) {
    const real loss = mod::bce_with_logits({1}, {40});
    EXPECT_NEAR(double(loss), -std::log(1.0 - 1e-6), 1e-9);
    EXPECT_GE(loss, real{0});
}

TEST(Bce, MatchesScalarOracle) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<real> y(16), z(16);
        for (real& v : y) v = rng.below(2) ? real{1} : real{0};
        for (real& v : z) v = static_cast<real>(rng.uniform(-6.0, 6.0));
        double want = 0;
        for (std::size_t i = 0; i < 16; ++i) {
            double p = 1.0 / (1.0 + std::exp(-double(z[i])));
            p = std::min(std::max(p, 1e-6), 1.0 - 1e-6);
            want -= double(y[i]) * std::log(p) + (1.0 - double(y[i])) * std::log(1.0 - p);
        }
        want /= 16.0;
        const double got = double(mod::bce_with_logits(y, z));
        EXPECT_LT(std::abs(got - want) / std::max(1.0, std::abs(want)), 1e-12);
        EXPECT_GE(got, 0.0);
    }
}

TEST(Bce, LengthMismatchIsShapeError) {
    EXPECT_THROW(mod::bce_with_logits({1, 0}, {0}), mod::ShapeError);
}

TEST(Sigmoid, MatchesClosedForm) {
    const auto out = mod::sigmoid({0, std::log(real(3))});
    EXPECT_NEAR(double(out[0]), 0.5, 1e-15);
    EXPECT_NEAR(double(out[1]), 0.75, 1e-12);
}

TEST(L2Normalize, ThreeFourFive) {
    const auto out = mod::l2_normalize({3, 4});
    EXPECT_NEAR(double(out[0]), 0.6, 1e-15);
    EXPECT_NEAR(double(out[1]), 0.8, 1e-15);
}

TEST(L2Normalize, ZeroVectorStaysZero) {
    const auto out = mod::l2_normalize({0, 0});
    EXPECT_EQ(double(out[0]), 0.0);
    EXPECT_EQ(double(out[1]), 0.0);
}

TEST(L2Normalize, IdempotentOnUnitSphere) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<real> v(1 + rng.below(8));
        for (real& x : v) x = static_cast<real>(rng.normal() + 0.1);
        const auto u = mod::l2_normalize(v);
        const auto uu = mod::l2_normalize(u);
        real norm = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            norm += u[i] * u[i];
            EXPECT_NEAR(double(u[i]), double(uu[i]), 1e-9);
        }
        EXPECT_NEAR(double(norm), 1.0, 1e-9);
    }
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
    Matrix params(2, 2);
    params.data = {1, 2, 3, 4};
    const Matrix before = params;
    mod::AdamState state = mod::AdamState::like(params);
    mod::adam_step(params, Matrix(2, 2), state, real(0.1));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(params.data[i], before.data[i]);
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByApproximatelyLr) {
    Matrix params(1, 1);
    params.data = {0};
    Matrix grad(1, 1);
    grad.data = {real(0.37)};
    mod::AdamState state = mod::AdamState::like(params);
    mod::adam_step(params, grad, state, real(0.01));
    // Bias correction makes m_hat/sqrt(v_hat) = g/|g| up to the 1e-8 epsilon.
    EXPECT_NEAR(double(params.data[0]), -0.01, 1e-6);
}

TEST(Adam, ThreeStepScalarTrajectoryMatchesReference) {
    Matrix params(1, 1);
    params.data = {real(0.5)};
    mod::AdamState state = mod::AdamState::like(params);
    const double grads[3] = {0.2, -0.4, 0.1};
    const double lr = 0.003, b1 = 0.9, b2 = 0.999, eps = 1e-8;

    // Independent scalar recomputation of the bias-corrected update.
    double x = 0.5, m = 0, v = 0;
    for (int t = 1; t <= 3; ++t) {
        const double g = grads[t - 1];
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        x -= lr * mhat / (std::sqrt(vhat) + eps);

        Matrix gm(1, 1);
        gm.data = {real(g)};
        mod::adam_step(params, gm, state, real(lr));
        EXPECT_NEAR(double(params.data[0]), x, 1e-12);
    }
    EXPECT_EQ(state.step, 3u);
    for (real vv : state.v.data) EXPECT_GE(vv, real{0});
}

TEST(Gradcheck, QuadraticIsExactish) {
    const auto f = [](const std::vector<real>& p) { return p[0] * p[0]; };
    const real err = mod::finite_diff_gradcheck(f, {3}, {6});
    EXPECT_LT(double(err), 1e-8);
}

TEST(Gradcheck, BceGradientUnderOneEMinusSix) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<real> y(8), z(8);
        for (real& v : y) v = rng.below(2) ? real{1} : real{0};
        for (real& v : z) v = static_cast<real>(rng.uniform(-4.0, 4.0));
        const auto f = [&](const std::vector<real>& p) { return mod::bce_with_logits(y, p); };
        const real err = mod::finite_diff_gradcheck(f, z, mod::bce_with_logits_grad(y, z));
        EXPECT_LT(double(err), 1e-6);
    }
}

TEST(Determinism, KernelsAreBitStableAcrossCalls) {
    Rng rng(8);
    const Matrix a = random_matrix(5, 7, rng);
    const Matrix b = random_matrix(7, 3, rng);
    const Matrix m1 = mod::matmul(a, b);
    const Matrix m2 = mod::matmul(a, b);
    for (std::size_t i = 0; i < m1.data.size(); ++i) EXPECT_EQ(m1.data[i], m2.data[i]);
    std::vector<real> z(9);
    for (real& v : z) v = static_cast<real>(rng.normal());
    const auto s1 = mod::softmax(z);
    const auto s2 = mod::softmax(z);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(s1[i], s2[i]);
}

}  // namespace
