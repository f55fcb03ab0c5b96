#ifndef MOD_MIXTURE_HPP
#define MOD_MIXTURE_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "mod/numerics.hpp"

namespace mod {

// T=0 is the sentinel for "distillation disabled" (the naive mixture row).
struct DistillConfig {
    real temperature = 0;
    bool stop_teacher_gradient = false;

    bool enabled() const { return temperature > 0; }

    void validate() const {
        if (temperature < 0) throw ConfigError("temperature must be >= 0");
    }
};

inline std::vector<real> mix_logits(const std::vector<std::vector<real>>& child_logits,
                                    const std::vector<real>& weights) {
    if (child_logits.empty()) throw ShapeError("mix_logits with no children");
    if (child_logits.size() != weights.size())
        throw ShapeError("mix_logits: " + std::to_string(child_logits.size()) + " children vs " +
                         std::to_string(weights.size()) + " weights");
    real wsum = 0;
    for (real w : weights) wsum += w;
    if (std::abs(wsum - real{1}) > real(1e-9))
        throw DomainError("mixing weights must sum to 1, got " + std::to_string(double(wsum)));
    const std::size_t n = child_logits[0].size();
    std::vector<real> out(n, 0);
    for (std::size_t m = 0; m < child_logits.size(); ++m) {
        if (child_logits[m].size() != n)
            throw ShapeError("mix_logits: child " + std::to_string(m) + " length mismatch");
        for (std::size_t c = 0; c < n; ++c) out[c] += weights[m] * child_logits[m][c];
    }
    return out;
}

// Soft(p, T) = Softmax(z / T).
inline std::vector<real> soften(const std::vector<real>& z, real temperature) {
    if (temperature <= 0) throw DomainError("soften requires T > 0 (T=0 disables distillation)");
    std::vector<real> scaled(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) scaled[i] = z[i] / temperature;
    return softmax(scaled);
}

inline real kl_divergence(const std::vector<real>& p, const std::vector<real>& q) {
    if (p.size() != q.size()) throw ShapeError("KL operand length mismatch");
    real kl = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0) kl += p[i] * std::log(p[i] / q[i]);
    return std::max(kl, real{0});
}

// T^2 * sum_m KL(Soft(parent, T) || Soft(child_m, T)).
inline real distill_term(const std::vector<real>& z_parent,
                         const std::vector<std::vector<real>>& z_children, real temperature) {
    const auto p = soften(z_parent, temperature);
    real total = 0;
    for (const auto& zc : z_children) {
        if (zc.size() != z_parent.size()) throw ShapeError("distill_term child length mismatch");
        total += kl_divergence(p, soften(zc, temperature));
    }
    return temperature * temperature * total;
}

struct MixtureLossParts {
    std::vector<real> child_label_losses;
    real mixture_label_loss = 0;
    real distill_loss = 0;
    real total = 0;
    std::vector<real> mixture_logits;
};

// Eq-6 composition: per-child BCE + mixture BCE + temperature-scaled KL.
inline MixtureLossParts mixture_loss(const std::vector<real>& labels,
                                     const std::vector<std::vector<real>>& child_logits,
                                     const std::vector<real>& weights, real temperature) {
    MixtureLossParts parts;
    parts.mixture_logits = mix_logits(child_logits, weights);
    for (const auto& zc : child_logits)
        parts.child_label_losses.push_back(bce_with_logits(labels, zc));
    parts.mixture_label_loss = bce_with_logits(labels, parts.mixture_logits);
    parts.distill_loss =
        temperature > 0 ? distill_term(parts.mixture_logits, child_logits, temperature) : real{0};
    parts.total = parts.mixture_label_loss + parts.distill_loss;
    for (real l : parts.child_label_losses) parts.total += l;
    return parts;
}

struct MixtureGradParts {
    // Direct gradients on each child's logits (own BCE + student-side KL),
    // excluding the share of the mixture-logit gradient.
    std::vector<std::vector<real>> child_direct;
    // Gradient flowing into the mixture logits (mixture BCE + teacher-side KL).
    std::vector<real> mixture_grad;
};

inline MixtureGradParts mixture_loss_grad_parts(const std::vector<real>& labels,
                                                const std::vector<std::vector<real>>& child_logits,
                                                const std::vector<real>& weights,
                                                real temperature, bool stop_teacher = false) {
    const auto z_e = mix_logits(child_logits, weights);
    const std::size_t n = z_e.size();
    const std::size_t m_count = child_logits.size();

    MixtureGradParts parts;
    parts.child_direct.resize(m_count);
    for (std::size_t m = 0; m < m_count; ++m)
        parts.child_direct[m] = bce_with_logits_grad(labels, child_logits[m]);
    parts.mixture_grad = bce_with_logits_grad(labels, z_e);

    if (temperature > 0) {
        const auto p = soften(z_e, temperature);
        std::vector<real> log_ratio_sum(n, 0);  // sum_m (ln p - ln q_m)
        real kl_sum = 0;
        for (std::size_t m = 0; m < m_count; ++m) {
            const auto q = soften(child_logits[m], temperature);
            real kl = 0;
            for (std::size_t c = 0; c < n; ++c) {
                const real lr = std::log(p[c]) - std::log(q[c]);
                log_ratio_sum[c] += lr;
                kl += p[c] * lr;
            }
            kl_sum += kl;
            // Student side: T^2 * dKL/dz_m = T * (q - p).
            for (std::size_t c = 0; c < n; ++c)
                parts.child_direct[m][c] += temperature * (q[c] - p[c]);
        }
        if (!stop_teacher) {
            // Teacher side through p = softmax(z_e / T):
            // dz_e += T * p .* (sum_m (ln p - ln q_m) - sum_m KL_m).
            for (std::size_t c = 0; c < n; ++c)
                parts.mixture_grad[c] += temperature * p[c] * (log_ratio_sum[c] - kl_sum);
        }
    }
    return parts;
}

// d(mixture_loss)/d(child logits). Distillation gradients flow into both the
// teacher (through the mixture) and the students unless stop_teacher is set.
inline std::vector<std::vector<real>> mixture_loss_grad(
    const std::vector<real>& labels, const std::vector<std::vector<real>>& child_logits,
    const std::vector<real>& weights, real temperature, bool stop_teacher = false) {
    auto parts = mixture_loss_grad_parts(labels, child_logits, weights, temperature, stop_teacher);
    for (std::size_t m = 0; m < child_logits.size(); ++m)
        for (std::size_t c = 0; c < parts.mixture_grad.size(); ++c)
            parts.child_direct[m][c] += weights[m] * parts.mixture_grad[c];
    return parts.child_direct;
}

// ---------------------------------------------------------------------------
// Two-layer MOD tree: root -> inner mixtures -> leaves. The shipped shape is
// 4 inner mixtures of 3 leaves (12 leaves total); arbitrary fan-outs of the
// same depth are accepted.
// ---------------------------------------------------------------------------

struct MixtureTreeShape {
    std::size_t inner_count = 4;
    std::size_t leaves_per_inner = 3;

    std::size_t leaf_count() const { return inner_count * leaves_per_inner; }

    void validate() const {
        if (inner_count < 1 || leaves_per_inner < 1)
            throw ConfigError("mixture tree fan-outs must be >= 1");
    }

    std::vector<real> inner_weights() const {
        return std::vector<real>(inner_count, real{1} / static_cast<real>(inner_count));
    }
    std::vector<real> leaf_weights() const {
        return std::vector<real>(leaves_per_inner,
                                 real{1} / static_cast<real>(leaves_per_inner));
    }
};

struct ModLossNodeParts {
    std::string node_path;
    real label_loss = 0;
    real distill_loss = 0;
};

struct ModLossParts {
    real total = 0;
    real label_loss_sum = 0;
    real distill_loss_sum = 0;
    std::vector<ModLossNodeParts> nodes;  // root first, then inner mixtures, then leaves
    std::vector<real> root_logits;
    std::vector<std::vector<real>> inner_logits;
};

// Layered composition with explicit mixing weights: each inner mixture
// distills to its leaves; the root distills to the inner mixtures, with the
// same temperature at both layers.
inline ModLossParts mod_loss_weighted(const std::vector<real>& labels,
                                      const std::vector<std::vector<real>>& leaf_logits,
                                      const MixtureTreeShape& shape, real temperature,
                                      const std::vector<real>& inner_w,
                                      const std::vector<std::vector<real>>& leaf_w_per_inner) {
    shape.validate();
    if (leaf_logits.size() != shape.leaf_count())
        throw ConfigError("mod_loss expects " + std::to_string(shape.leaf_count()) +
                          " leaf logit vectors, got " + std::to_string(leaf_logits.size()));
    if (inner_w.size() != shape.inner_count ||
        leaf_w_per_inner.size() != shape.inner_count)
        throw ShapeError("mod_loss: mixing weight count does not match tree shape");

    ModLossParts parts;
    parts.inner_logits.reserve(shape.inner_count);
    std::vector<ModLossNodeParts> inner_nodes;
    std::vector<ModLossNodeParts> leaf_nodes;
    for (std::size_t n = 0; n < shape.inner_count; ++n) {
        std::vector<std::vector<real>> children(
            leaf_logits.begin() + n * shape.leaves_per_inner,
            leaf_logits.begin() + (n + 1) * shape.leaves_per_inner);
        const auto inner = mixture_loss(labels, children, leaf_w_per_inner[n], temperature);
        parts.inner_logits.push_back(inner.mixture_logits);
        parts.total += inner.total;
        inner_nodes.push_back({"m" + std::to_string(n), inner.mixture_label_loss,
                               inner.distill_loss});
        parts.label_loss_sum += inner.mixture_label_loss;
        parts.distill_loss_sum += inner.distill_loss;
        for (std::size_t l = 0; l < children.size(); ++l) {
            leaf_nodes.push_back({"m" + std::to_string(n) + "/l" + std::to_string(l),
                                  inner.child_label_losses[l], real{0}});
            parts.label_loss_sum += inner.child_label_losses[l];
        }
    }

    parts.root_logits = mix_logits(parts.inner_logits, inner_w);
    const real root_label = bce_with_logits(labels, parts.root_logits);
    const real root_distill =
        temperature > 0 ? distill_term(parts.root_logits, parts.inner_logits, temperature)
                        : real{0};
    parts.total += root_label + root_distill;
    parts.label_loss_sum += root_label;
    parts.distill_loss_sum += root_distill;

    parts.nodes.push_back({"root", root_label, root_distill});
    parts.nodes.insert(parts.nodes.end(), inner_nodes.begin(), inner_nodes.end());
    parts.nodes.insert(parts.nodes.end(), leaf_nodes.begin(), leaf_nodes.end());
    return parts;
}

// Uniform-weight form (the default configuration).
inline ModLossParts mod_loss(const std::vector<real>& labels,
                             const std::vector<std::vector<real>>& leaf_logits,
                             const MixtureTreeShape& shape, real temperature) {
    shape.validate();
    return mod_loss_weighted(labels, leaf_logits, shape, temperature, shape.inner_weights(),
                             std::vector<std::vector<real>>(shape.inner_count,
                                                            shape.leaf_weights()));
}

struct ModGradParts {
    std::vector<std::vector<real>> leaf_grads;
    // Total gradient flowing into each inner mixture's logits (own BCE +
    // teacher-side inner KL + student-side outer KL + weighted root share).
    std::vector<std::vector<real>> inner_mix_grads;
    // Gradient flowing into the root logits (root BCE + teacher-side outer KL).
    std::vector<real> root_mix_grad;
    std::vector<std::vector<real>> inner_logits;
};

inline ModGradParts mod_loss_grad_parts(const std::vector<real>& labels,
                                        const std::vector<std::vector<real>>& leaf_logits,
                                        const MixtureTreeShape& shape, real temperature,
                                        const std::vector<real>& inner_w,
                                        const std::vector<std::vector<real>>& leaf_w_per_inner,
                                        bool stop_teacher = false) {
    shape.validate();
    if (leaf_logits.size() != shape.leaf_count())
        throw ConfigError("mod_loss_grad leaf count mismatch");
    if (inner_w.size() != shape.inner_count ||
        leaf_w_per_inner.size() != shape.inner_count)
        throw ShapeError("mod_loss_grad: mixing weight count does not match tree shape");
    const std::size_t n_classes = leaf_logits[0].size();

    ModGradParts out;
    std::vector<MixtureGradParts> inner_parts;
    for (std::size_t n = 0; n < shape.inner_count; ++n) {
        std::vector<std::vector<real>> children(
            leaf_logits.begin() + n * shape.leaves_per_inner,
            leaf_logits.begin() + (n + 1) * shape.leaves_per_inner);
        out.inner_logits.push_back(mix_logits(children, leaf_w_per_inner[n]));
        inner_parts.push_back(mixture_loss_grad_parts(labels, children, leaf_w_per_inner[n],
                                                      temperature, stop_teacher));
    }

    // Outer layer treats inner-mixture logits as its children. Its "child
    // direct" gradient contains each inner mixture's own BCE, which the inner
    // layer's mixture_grad also accounts for, so strip one copy.
    auto outer = mixture_loss_grad_parts(labels, out.inner_logits, inner_w, temperature,
                                         stop_teacher);
    out.root_mix_grad = std::move(outer.mixture_grad);
    out.inner_mix_grads.resize(shape.inner_count);
    for (std::size_t n = 0; n < shape.inner_count; ++n) {
        const auto bce_grad = bce_with_logits_grad(labels, out.inner_logits[n]);
        auto& a = out.inner_mix_grads[n];
        a = inner_parts[n].mixture_grad;
        for (std::size_t c = 0; c < n_classes; ++c)
            a[c] += outer.child_direct[n][c] - bce_grad[c] + inner_w[n] * out.root_mix_grad[c];
    }

    out.leaf_grads.assign(shape.leaf_count(), std::vector<real>(n_classes, 0));
    for (std::size_t n = 0; n < shape.inner_count; ++n) {
        for (std::size_t l = 0; l < shape.leaves_per_inner; ++l) {
            auto& g = out.leaf_grads[n * shape.leaves_per_inner + l];
            for (std::size_t c = 0; c < n_classes; ++c)
                g[c] = inner_parts[n].child_direct[l][c] +
                       leaf_w_per_inner[n][l] * out.inner_mix_grads[n][c];
        }
    }
    return out;
}

// d(mod_loss)/d(leaf logits) with uniform mixing weights.
inline std::vector<std::vector<real>> mod_loss_grad(
    const std::vector<real>& labels, const std::vector<std::vector<real>>& leaf_logits,
    const MixtureTreeShape& shape, real temperature, bool stop_teacher = false) {
    shape.validate();
    return mod_loss_grad_parts(labels, leaf_logits, shape, temperature, shape.inner_weights(),
                               std::vector<std::vector<real>>(shape.inner_count,
                                                              shape.leaf_weights()),
                               stop_teacher)
        .leaf_grads;
}

// Pulls a gradient w.r.t. mixture logits back to a gradient w.r.t. the
// pre-softmax weight parameters: d/dtheta of L(softmax(theta) . children).
inline std::vector<real> mixing_theta_grad(const std::vector<real>& mixture_grad,
                                           const std::vector<std::vector<real>>& child_logits,
                                           const std::vector<real>& weights) {
    std::vector<real> dw(child_logits.size(), 0);
    for (std::size_t m = 0; m < child_logits.size(); ++m)
        for (std::size_t c = 0; c < mixture_grad.size(); ++c)
            dw[m] += mixture_grad[c] * child_logits[m][c];
    real dot = 0;
    for (std::size_t m = 0; m < dw.size(); ++m) dot += weights[m] * dw[m];
    std::vector<real> dtheta(dw.size());
    for (std::size_t m = 0; m < dw.size(); ++m) dtheta[m] = weights[m] * (dw[m] - dot);
    return dtheta;
}

}  // namespace mod

#endif  // MOD_MIXTURE_HPP
