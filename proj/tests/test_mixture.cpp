#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mod/mixture.hpp"

namespace {

using mod::MixtureTreeShape;
using mod::Rng;
using mod::real;

std::vector<real> random_logits(std::size_t n, Rng& rng, double scale = 2.0) {
    std::vector<real> z(n);
    for (real& v : z) v = static_cast<real>(scale * rng.normal());
    return z;
}

std::vector<real> random_labels(std::size_t n, Rng& rng) {
    std::vector<real> y(n);
    for (real& v : y) v = rng.below(2) ? real{1} : real{0};
    return y;
}

// ---------------------------------------------------------------------------
// Independent scalar oracle for the layered loss: everything computed with
// plain double loops, including its own bce / softmax / kl.
// ---------------------------------------------------------------------------

double oracle_bce(const std::vector<real>& y, const std::vector<double>& z) {
    double loss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double p = 1.0 / (1.0 + std::exp(-z[i]));
        p = std::min(std::max(p, 1e-6), 1.0 - 1e-6);
        loss -= double(y[i]) * std::log(p) + (1.0 - double(y[i])) * std::log(1.0 - p);
    }
    return loss / double(y.size());
}

std::vector<double> oracle_soften(const std::vector<double>& z, double T) {
    std::vector<double> s(z.size());
    double zmax = -1e300;
    for (double v : z) zmax = std::max(zmax, v / T);
    double denom = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        s[i] = std::exp(z[i] / T - zmax);
        denom += s[i];
    }
    for (double& v : s) v /= denom;
    return s;
}

double oracle_kl(const std::vector<double>& p, const std::vector<double>& q) {
    double kl = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0) kl += p[i] * std::log(p[i] / q[i]);
    return kl;
}

// One mixture layer of the loss: child BCEs + mixture BCE + T^2 sum KL.
double oracle_layer(const std::vector<real>& y, const std::vector<std::vector<double>>& children,
                    const std::vector<double>& weights, double T,
                    std::vector<double>* mixture_out) {
    const std::size_t n = children[0].size();
    std::vector<double> ze(n, 0);
    for (std::size_t m = 0; m < children.size(); ++m)
        for (std::size_t c = 0; c < n; ++c) ze[c] += weights[m] * children[m][c];
    double total = oracle_bce(y, ze);
    for (const auto& zc : children) total += oracle_bce(y, zc);
    if (T > 0) {
        const auto p = oracle_soften(ze, T);
        for (const auto& zc : children) total += T * T * oracle_kl(p, oracle_soften(zc, T));
    }
    if (mixture_out) *mixture_out = ze;
    return total;
}

double oracle_layered_loss(const std::vector<real>& y,
                           const std::vector<std::vector<real>>& leaves,
                           const MixtureTreeShape& shape, double T) {
    const std::size_t n = leaves[0].size();
    std::vector<std::vector<double>> inner;
    double total = 0;
    for (std::size_t g = 0; g < shape.inner_count; ++g) {
        std::vector<std::vector<double>> children;
        for (std::size_t l = 0; l < shape.leaves_per_inner; ++l) {
            std::vector<double> z(n);
            for (std::size_t c = 0; c < n; ++c)
                z[c] = double(leaves[g * shape.leaves_per_inner + l][c]);
            children.push_back(std::move(z));
        }
        std::vector<double> mix;
        total += oracle_layer(y, children,
                              std::vector<double>(shape.leaves_per_inner,
                                                  1.0 / double(shape.leaves_per_inner)),
                              T, &mix);
        inner.push_back(std::move(mix));
    }
    // Outer layer adds only the root BCE and root-to-inner distillation; the
    // inner mixtures' own BCE is already counted above.
    std::vector<double> root(n, 0);
    for (std::size_t g = 0; g < shape.inner_count; ++g)
        for (std::size_t c = 0; c < n; ++c) root[c] += inner[g][c] / double(shape.inner_count);
    total += oracle_bce(y, root);
    if (T > 0) {
        const auto p = oracle_soften(root, T);
        for (const auto& zi : inner) total += T * T * oracle_kl(p, oracle_soften(zi, T));
    }
    return total;
}

TEST(MixLogits, EqualWeightsAverage) {
    const auto out = mod::mix_logits({{0, 2}, {2, 0}}, {real(0.5), real(0.5)});
    EXPECT_NEAR(double(out[0]), 1.0, 1e-15);
    EXPECT_NEAR(double(out[1]), 1.0, 1e-15);
}

TEST(MixLogits, SingleChildIdentity) {
    const auto out = mod::mix_logits({{3, -1, 7}}, {1});
    EXPECT_EQ(double(out[0]), 3.0);
    EXPECT_EQ(double(out[1]), -1.0);
    EXPECT_EQ(double(out[2]), 7.0);
}

TEST(MixLogits, OneHotWeightsSelectChild) {
    const auto out = mod::mix_logits({{1, 1}, {5, -5}}, {0, 1});
    EXPECT_EQ(double(out[0]), 5.0);
    EXPECT_EQ(double(out[1]), -5.0);
}

TEST(MixLogits, UniformWeightsEqualArithmeticMean) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 2 + rng.below(4);
        const std::size_t n = 1 + rng.below(6);
        std::vector<std::vector<real>> children;
        for (std::size_t i = 0; i < m; ++i) children.push_back(random_logits(n, rng));
        const auto out =
            mod::mix_logits(children, std::vector<real>(m, real{1} / static_cast<real>(m)));
        for (std::size_t c = 0; c < n; ++c) {
            real mean = 0;
            for (const auto& ch : children) mean += ch[c];
            mean /= static_cast<real>(m);
            EXPECT_NEAR(double(out[c]), double(mean), 1e-12);
        }
    }
}

TEST(MixLogits, WeightsMustSumToOne) {
    EXPECT_THROW(mod::mix_logits({{1}, {2}}, {real(0.5), real(0.6)}), mod::DomainError);
    EXPECT_THROW(mod::mix_logits({{1}, {2}}, {1}), mod::ShapeError);
    EXPECT_THROW(mod::mix_logits({{1, 2}, {3}}, {real(0.5), real(0.5)}), mod::ShapeError);
}

TEST(Soften, TemperatureOneIsSoftmax) {
    const std::vector<real> z = {1, -2, 0.5};
    const auto a = mod::soften(z, 1);
    const auto b = mod::softmax(z);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Soften, HugeTemperatureFlattensToUniform) {
    const auto out = mod::soften({0, 10}, real(1e6));
    EXPECT_NEAR(double(out[0]), 0.5, 1e-5);
    EXPECT_NEAR(double(out[1]), 0.5, 1e-5);
}

TEST(Soften, TemperatureTenScalesLogits) {
    const auto out = mod::soften({0, 10}, 10);
    EXPECT_NEAR(double(out[0]), 0.268941, 1e-6);
    EXPECT_NEAR(double(out[1]), 0.731059, 1e-6);
}

TEST(Soften, NonPositiveTemperatureIsDomainError) {
    EXPECT_THROW(mod::soften({0, 1}, 0), mod::DomainError);
    EXPECT_THROW(mod::soften({0, 1}, -1), mod::DomainError);
}

TEST(DistillTerm, IdenticalChildrenGiveZero) {
    const std::vector<real> z = {1, -1, 2};
    EXPECT_NEAR(double(mod::distill_term(z, {z, z, z}, 4)), 0.0, 1e-15);
}

TEST(DistillTerm, TemperatureScalingIdentity) {
    // Scaling logits by T makes the softened distributions equal to T=1's,
    // so the term equals T^2 times the T=1 KL value.
    const std::vector<real> parent = {0, 1};
    const std::vector<real> child = {1, 0};
    const double kl1 = double(mod::distill_term(parent, {child}, 1));
    const real T = 7;
    std::vector<real> parent_scaled(parent), child_scaled(child);
    for (real& v : parent_scaled) v *= T;
    for (real& v : child_scaled) v *= T;
    EXPECT_NEAR(double(mod::distill_term(parent_scaled, {child_scaled}, T)),
                double(T * T) * kl1, 1e-9);
}

TEST(DistillTerm, HandComputedValue) {
    // KL(softmax([0,1]) || softmax([1,0])) with p = [0.2689, 0.7311].
    const double got = double(mod::distill_term({0, 1}, {{1, 0}}, 1));
    EXPECT_NEAR(got, 0.462117, 1e-6);
}

TEST(DistillTerm, NonNegativeAndZeroOnlyForEqualDistributions) {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(6);
        const auto parent = random_logits(n, rng, 3.0);
        std::vector<std::vector<real>> children;
        const std::size_t m = 1 + rng.below(3);
        for (std::size_t i = 0; i < m; ++i) children.push_back(random_logits(n, rng, 3.0));
        const real T = static_cast<real>(rng.uniform(0.5, 20.0));
        EXPECT_GE(double(mod::distill_term(parent, children, T)), 0.0);
    }
    // Zero implies equal softened distributions: shift a child by a constant
    // (softmax-invariant) and the term must stay zero.
    std::vector<real> parent = {1, 2, 3};
    std::vector<real> shifted = {1 + real(5), 2 + real(5), 3 + real(5)};
    EXPECT_NEAR(double(mod::distill_term(parent, {shifted}, 1)), 0.0, 1e-12);
    // And non-equal distributions give strictly positive values.
    EXPECT_GT(double(mod::distill_term({0, 3}, {{3, 0}}, 2)), 1e-4);
}

TEST(MixtureLoss, ThreeIdenticalZeroChildren) {
    const std::vector<real> y = {1, 0};
    const std::vector<std::vector<real>> children(3, std::vector<real>{0, 0});
    const std::vector<real> w(3, real{1} / real{3});
    const auto parts = mod::mixture_loss(y, children, w, 5);
    EXPECT_NEAR(double(parts.total), 4.0 * std::log(2.0), 1e-12);
    EXPECT_NEAR(double(parts.distill_loss), 0.0, 1e-12);
    EXPECT_NEAR(double(parts.mixture_label_loss), std::log(2.0), 1e-12);
}

TEST(MixtureLoss, TemperatureZeroIsPlainBceSum) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(5);
        const auto y = random_labels(n, rng);
        std::vector<std::vector<real>> children;
        for (int m = 0; m < 3; ++m) children.push_back(random_logits(n, rng));
        const std::vector<real> w(3, real{1} / real{3});
        const auto parts = mod::mixture_loss(y, children, w, 0);
        double want = double(mod::bce_with_logits(y, mod::mix_logits(children, w)));
        for (const auto& zc : children) want += double(mod::bce_with_logits(y, zc));
        EXPECT_NEAR(double(parts.total), want, 1e-12);
        EXPECT_EQ(double(parts.distill_loss), 0.0);
    }
}

TEST(MixtureLoss, GradientMatchesFiniteDifferences) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3;
        const std::size_t m = 3;
        const auto y = random_labels(n, rng);
        std::vector<std::vector<real>> children;
        for (std::size_t i = 0; i < m; ++i) children.push_back(random_logits(n, rng));
        const std::vector<real> w = {real(0.5), real(0.3), real(0.2)};
        const real T = trial % 2 ? real(8) : real(0);

        std::vector<real> flat;
        for (const auto& c : children) flat.insert(flat.end(), c.begin(), c.end());
        const auto loss_at = [&](const std::vector<real>& p) {
            std::vector<std::vector<real>> cs(m);
            for (std::size_t i = 0; i < m; ++i)
                cs[i].assign(p.begin() + i * n, p.begin() + (i + 1) * n);
            return mod::mixture_loss(y, cs, w, T).total;
        };
        const auto grads = mod::mixture_loss_grad(y, children, w, T);
        std::vector<real> analytic;
        for (const auto& g : grads) analytic.insert(analytic.end(), g.begin(), g.end());
        EXPECT_LT(double(mod::finite_diff_gradcheck(loss_at, flat, analytic)), 1e-6);
    }
}

TEST(ModLoss, TwelveIdenticalLeavesGiveSeventeenEqualBceTerms) {
    const MixtureTreeShape shape;  // 4 x 3
    const std::vector<real> y = {1, 0, 1};
    const auto leaf = std::vector<real>{0.4, -1.2, 0.7};
    const std::vector<std::vector<real>> leaves(shape.leaf_count(), leaf);
    const auto parts = mod::mod_loss(y, leaves, shape, 9);
    const double one_bce = double(mod::bce_with_logits(y, leaf));
    EXPECT_NEAR(double(parts.total), 17.0 * one_bce, 1e-10);
    EXPECT_NEAR(double(parts.distill_loss_sum), 0.0, 1e-12);
    EXPECT_EQ(parts.nodes.size(), 17u);
    for (const auto& node : parts.nodes)
        EXPECT_NEAR(double(node.label_loss), one_bce, 1e-12) << node.node_path;
}

TEST(ModLoss, TemperatureZeroIsSumOfSeventeenBceTerms) {
    Rng rng(5);
    const MixtureTreeShape shape;
    const std::size_t n = 4;
    const auto y = random_labels(n, rng);
    std::vector<std::vector<real>> leaves;
    for (std::size_t l = 0; l < shape.leaf_count(); ++l) leaves.push_back(random_logits(n, rng));
    const auto parts = mod::mod_loss(y, leaves, shape, 0);
    double want = 0;
    for (const auto& node : parts.nodes) want += double(node.label_loss);
    EXPECT_NEAR(double(parts.total), want, 1e-12);
    EXPECT_EQ(double(parts.distill_loss_sum), 0.0);
}

TEST(ModLoss, MatchesLayeredScalarOracle) {
    Rng rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        MixtureTreeShape shape;
        shape.inner_count = 1 + rng.below(4);
        shape.leaves_per_inner = 1 + rng.below(4);
        const std::size_t n = 2 + rng.below(5);
        const auto y = random_labels(n, rng);
        std::vector<std::vector<real>> leaves;
        for (std::size_t l = 0; l < shape.leaf_count(); ++l)
            leaves.push_back(random_logits(n, rng));
        const double T = trial % 3 ? rng.uniform(1.0, 20.0) : 0.0;
        const auto parts = mod::mod_loss(y, leaves, shape, real(T));
        const double want = oracle_layered_loss(y, leaves, shape, T);
        EXPECT_NEAR(double(parts.total), want, 1e-10) << "trial " << trial;
    }
}

TEST(ModLoss, GradientMatchesFiniteDifferences) {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        MixtureTreeShape shape;
        shape.inner_count = 2;
        shape.leaves_per_inner = 2;
        const std::size_t n = 3;
        const auto y = random_labels(n, rng);
        std::vector<std::vector<real>> leaves;
        for (std::size_t l = 0; l < shape.leaf_count(); ++l)
            leaves.push_back(random_logits(n, rng));
        const real T = trial % 2 ? real(6) : real(0);

        std::vector<real> flat;
        for (const auto& l : leaves) flat.insert(flat.end(), l.begin(), l.end());
        const auto loss_at = [&](const std::vector<real>& p) {
            std::vector<std::vector<real>> ls(shape.leaf_count());
            for (std::size_t i = 0; i < ls.size(); ++i)
                ls[i].assign(p.begin() + i * n, p.begin() + (i + 1) * n);
            return mod::mod_loss(y, ls, shape, T).total;
        };
        const auto grads = mod::mod_loss_grad(y, leaves, shape, T);
        std::vector<real> analytic;
        for (const auto& g : grads) analytic.insert(analytic.end(), g.begin(), g.end());
        EXPECT_LT(double(mod::finite_diff_gradcheck(loss_at, flat, analytic)), 1e-6);
    }
}

TEST(ModLoss, LearnableWeightGradientsMatchFiniteDifferences) {
    Rng rng(8);
    MixtureTreeShape shape;
    shape.inner_count = 2;
    shape.leaves_per_inner = 3;
    const std::size_t n = 4;
    const auto y = random_labels(n, rng);
    std::vector<std::vector<real>> leaves;
    for (std::size_t l = 0; l < shape.leaf_count(); ++l) leaves.push_back(random_logits(n, rng));
    const real T = 5;

    std::vector<real> root_theta = {real(0.2), real(-0.3)};
    std::vector<std::vector<real>> child_theta = {{real(0.1), real(0.5), real(-0.2)},
                                                  {real(-0.4), real(0.0), real(0.3)}};
    const auto weights_of = [](const std::vector<real>& th) { return mod::softmax(th); };
    const auto loss_at = [&]() {
        std::vector<std::vector<real>> lw;
        for (const auto& th : child_theta) lw.push_back(weights_of(th));
        return mod::mod_loss_weighted(y, leaves, shape, T, weights_of(root_theta), lw).total;
    };

    std::vector<std::vector<real>> lw;
    for (const auto& th : child_theta) lw.push_back(weights_of(th));
    const auto gp =
        mod::mod_loss_grad_parts(y, leaves, shape, T, weights_of(root_theta), lw);
    const auto droot = mod::mixing_theta_grad(gp.root_mix_grad, gp.inner_logits,
                                              weights_of(root_theta));
    const real h = real(1e-6);
    for (std::size_t i = 0; i < root_theta.size(); ++i) {
        root_theta[i] += h;
        const double lp = double(loss_at());
        root_theta[i] -= 2 * h;
        const double lm = double(loss_at());
        root_theta[i] += h;
        EXPECT_NEAR(double(droot[i]), (lp - lm) / double(2 * h), 1e-6);
    }
    for (std::size_t g = 0; g < shape.inner_count; ++g) {
        std::vector<std::vector<real>> children(
            leaves.begin() + g * shape.leaves_per_inner,
            leaves.begin() + (g + 1) * shape.leaves_per_inner);
        const auto dth = mod::mixing_theta_grad(gp.inner_mix_grads[g], children, lw[g]);
        for (std::size_t i = 0; i < dth.size(); ++i) {
            child_theta[g][i] += h;
            const double lp = double(loss_at());
            child_theta[g][i] -= 2 * h;
            const double lm = double(loss_at());
            child_theta[g][i] += h;
            EXPECT_NEAR(double(dth[i]), (lp - lm) / double(2 * h), 1e-6);
        }
    }
}

TEST(Mixture, ArgmaxInvariantToGlobalLogitShift) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 4;
        std::vector<std::vector<real>> children;
        for (int m = 0; m < 3; ++m) children.push_back(random_logits(n, rng));
        const std::vector<real> w(3, real{1} / real{3});
        const auto probs = mod::sigmoid(mod::mix_logits(children, w));
        auto shifted = children;
        const real c = static_cast<real>(rng.uniform(-3.0, 3.0));
        for (auto& ch : shifted)
            for (real& v : ch) v += c;
        const auto probs2 = mod::sigmoid(mod::mix_logits(shifted, w));
        const auto arg = [](const std::vector<real>& p) {
            return std::distance(p.begin(), std::max_element(p.begin(), p.end()));
        };
        EXPECT_EQ(arg(probs), arg(probs2));
    }
}

}  // namespace
