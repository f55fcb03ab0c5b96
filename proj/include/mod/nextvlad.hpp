#ifndef MOD_NEXTVLAD_HPP
#define MOD_NEXTVLAD_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mod/numerics.hpp"

namespace mod {

// Hyperparameters of one pooling network. The expanded feature axis
// (lambda*N) is split into G feature-contiguous groups.
struct PoolHyper {
    std::size_t input_dim = 0;  // N
    std::size_t expansion = 2;  // lambda
    std::size_t groups = 2;     // G
    std::size_t clusters = 4;   // K
    bool global_l2 = false;     // optional whole-descriptor L2 after intra-normalization

    std::size_t expanded_dim() const { return expansion * input_dim; }
    std::size_t group_dim() const { return expanded_dim() / groups; }
    std::size_t output_dim() const { return clusters * group_dim(); }

    void validate() const {
        if (input_dim == 0 || expansion == 0 || clusters == 0 || groups == 0)
            throw ConfigError("pooling dims must be positive");
        if (expanded_dim() % groups != 0)
            throw ConfigError("expanded dim " + std::to_string(expanded_dim()) +
                              " not divisible by " + std::to_string(groups) + " groups");
    }
};

using TensorVisitor = std::function<void(const std::string&, Matrix&)>;

struct NeXtVLADPoolParams {
    PoolHyper hyper;
    Matrix expansion_w;  // N x D
    Matrix expansion_b;  // 1 x D
    Matrix attention_w;  // G x D
    Matrix attention_b;  // 1 x G
    Matrix assign_w;     // (G*K) x D
    Matrix assign_b;     // G x K
    Matrix centers;      // K x d

    NeXtVLADPoolParams() = default;

    explicit NeXtVLADPoolParams(const PoolHyper& h) : hyper(h) {
        h.validate();
        const std::size_t D = h.expanded_dim();
        expansion_w = Matrix(h.input_dim, D);
        expansion_b = Matrix(1, D);
        attention_w = Matrix(h.groups, D);
        attention_b = Matrix(1, h.groups);
        assign_w = Matrix(h.groups * h.clusters, D);
        assign_b = Matrix(h.groups, h.clusters);
        centers = Matrix(h.clusters, h.group_dim());
    }

    void init(Rng& rng) {
        const auto gaussian_fill = [&](Matrix& m, double std) {
            for (real& v : m.data) v = static_cast<real>(std * rng.normal());
        };
        gaussian_fill(expansion_w, 1.0 / std::sqrt(double(hyper.input_dim)));
        gaussian_fill(attention_w, 1.0 / std::sqrt(double(hyper.expanded_dim())));
        gaussian_fill(assign_w, 1.0 / std::sqrt(double(hyper.expanded_dim())));
        gaussian_fill(centers, 1.0);
        expansion_b.fill(0);
        attention_b.fill(0);
        assign_b.fill(0);
    }

    void for_each_tensor(const std::string& prefix, const TensorVisitor& visit) {
        visit(prefix + ".expansion_w", expansion_w);
        visit(prefix + ".expansion_b", expansion_b);
        visit(prefix + ".attention_w", attention_w);
        visit(prefix + ".attention_b", attention_b);
        visit(prefix + ".assign_w", assign_w);
        visit(prefix + ".assign_b", assign_b);
        visit(prefix + ".centers", centers);
    }

    // Weight matrices and centers carry L2 penalty; biases do not.
    void for_each_weight(const TensorVisitor& visit) {
        visit("expansion_w", expansion_w);
        visit("attention_w", attention_w);
        visit("assign_w", assign_w);
        visit("centers", centers);
    }
};

struct PoolingWorkspace {
    Matrix frames;        // M x N input copy
    Matrix xdot;          // M x D
    Matrix attention;     // M x G, sigmoid values
    Matrix assignment;    // M x (G*K), softmax over clusters per (frame, group)
    Matrix vlad;          // K x d, pre-normalization
    std::vector<real> cluster_norms;  // K
    std::vector<real> pooled;         // K*d after intra-normalization
    real global_norm = 0;             // set when global_l2 is active
};

// Eq-structured NeXtVLAD aggregation: expand, group, attend, soft-assign,
// accumulate residuals to centers, intra-normalize per cluster.
inline std::vector<real> nextvlad_pool_forward(const Matrix& frames,
                                               const NeXtVLADPoolParams& params,
                                               PoolingWorkspace& ws) {
    const PoolHyper& h = params.hyper;
    if (frames.cols != h.input_dim)
        throw ShapeError("pool input has " + std::to_string(frames.cols) + " features, expected " +
                         std::to_string(h.input_dim));
    if (frames.rows < 1) throw ShapeError("pool input must have at least one frame");
    const std::size_t M = frames.rows;
    const std::size_t D = h.expanded_dim();
    const std::size_t G = h.groups;
    const std::size_t K = h.clusters;
    const std::size_t d = h.group_dim();

    ws.frames = frames;
    ws.xdot = matmul(frames, params.expansion_w);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < D; ++j) ws.xdot(i, j) += params.expansion_b(0, j);

    ws.attention = Matrix(M, G);
    ws.assignment = Matrix(M, G * K);
    std::vector<real> logits(K);
    for (std::size_t i = 0; i < M; ++i) {
        const real* xrow = &ws.xdot.data[i * D];
        for (std::size_t g = 0; g < G; ++g) {
            real att = params.attention_b(0, g);
            const real* wg = &params.attention_w.data[g * D];
            for (std::size_t j = 0; j < D; ++j) att += wg[j] * xrow[j];
            ws.attention(i, g) = sigmoid_scalar(att);

            for (std::size_t k = 0; k < K; ++k) {
                real l = params.assign_b(g, k);
                const real* wgk = &params.assign_w.data[(g * K + k) * D];
                for (std::size_t j = 0; j < D; ++j) l += wgk[j] * xrow[j];
                logits[k] = l;
            }
            const auto probs = softmax(logits);
            for (std::size_t k = 0; k < K; ++k) ws.assignment(i, g * K + k) = probs[k];
        }
    }

    ws.vlad = Matrix(K, d);
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t g = 0; g < G; ++g) {
            const real att = ws.attention(i, g);
            const real* slice = &ws.xdot.data[i * D + g * d];
            for (std::size_t k = 0; k < K; ++k) {
                const real w = att * ws.assignment(i, g * K + k);
                real* yk = &ws.vlad.data[k * d];
                const real* ck = &params.centers.data[k * d];
                for (std::size_t j = 0; j < d; ++j) yk[j] += w * (slice[j] - ck[j]);
            }
        }
    }

    ws.cluster_norms.assign(K, 0);
    ws.pooled.assign(K * d, 0);
    for (std::size_t k = 0; k < K; ++k) {
        real norm = 0;
        for (std::size_t j = 0; j < d; ++j) norm += ws.vlad(k, j) * ws.vlad(k, j);
        norm = std::sqrt(norm);
        ws.cluster_norms[k] = norm;
        const real denom = std::max(norm, kNormEps);
        for (std::size_t j = 0; j < d; ++j) ws.pooled[k * d + j] = ws.vlad(k, j) / denom;
    }

    if (h.global_l2) {
        real norm = 0;
        for (real v : ws.pooled) norm += v * v;
        norm = std::sqrt(norm);
        ws.global_norm = norm;
        const real denom = std::max(norm, kNormEps);
        for (real& v : ws.pooled) v /= denom;
    }
    return ws.pooled;
}

struct PoolGrads {
    NeXtVLADPoolParams params;  // tensors reused as gradient buffers
    Matrix frames;

    explicit PoolGrads(const PoolHyper& h) : params(h) {}
};

inline PoolGrads nextvlad_pool_backward(const std::vector<real>& grad_out,
                                        const PoolingWorkspace& ws,
                                        const NeXtVLADPoolParams& params) {
    const PoolHyper& h = params.hyper;
    const std::size_t M = ws.frames.rows;
    const std::size_t D = h.expanded_dim();
    const std::size_t G = h.groups;
    const std::size_t K = h.clusters;
    const std::size_t d = h.group_dim();
    if (grad_out.size() != K * d || ws.pooled.size() != K * d || ws.xdot.rows != M)
        throw ShapeError("pool backward called with a stale or mismatched workspace");

    PoolGrads grads(h);
    grads.frames = Matrix(M, h.input_dim);

    std::vector<real> g(grad_out);
    if (h.global_l2) {
        // Backprop through v / max(||v||, eps) on the flattened descriptor.
        if (ws.global_norm >= kNormEps) {
            real dot = 0;
            for (std::size_t t = 0; t < g.size(); ++t) dot += g[t] * ws.pooled[t];
            for (std::size_t t = 0; t < g.size(); ++t)
                g[t] = (g[t] - dot * ws.pooled[t]) / ws.global_norm;
        } else {
            for (real& v : g) v /= kNormEps;
        }
    }

    // Through the per-cluster intra-normalization.
    Matrix dvlad(K, d);
    for (std::size_t k = 0; k < K; ++k) {
        const real norm = ws.cluster_norms[k];
        if (norm >= kNormEps) {
            real dot = 0;
            for (std::size_t j = 0; j < d; ++j) dot += g[k * d + j] * ws.vlad(k, j) / norm;
            for (std::size_t j = 0; j < d; ++j)
                dvlad(k, j) = (g[k * d + j] - dot * ws.vlad(k, j) / norm) / norm;
        } else {
            for (std::size_t j = 0; j < d; ++j) dvlad(k, j) = g[k * d + j] / kNormEps;
        }
    }

    // Residual accumulation: y_{jk} = sum_{i,g} a_ig * alpha_igk * (x_ij^g - c_kj).
    std::vector<real> cluster_mass(K, 0);  // sum_{i,g} a_ig * alpha_igk
    Matrix dxdot(M, D);
    std::vector<real> r(K);  // per (i,g): sum_j dvlad(k,j) * residual_j
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t g_idx = 0; g_idx < G; ++g_idx) {
            const real att = ws.attention(i, g_idx);
            const real* slice = &ws.xdot.data[i * D + g_idx * d];
            real datt = 0;
            real dot_r = 0;  // sum_k alpha * r, for the softmax Jacobian
            for (std::size_t k = 0; k < K; ++k) {
                const real alpha = ws.assignment(i, g_idx * K + k);
                const real* ck = &params.centers.data[k * d];
                const real* dyk = &dvlad.data[k * d];
                real rk = 0;
                for (std::size_t j = 0; j < d; ++j) rk += dyk[j] * (slice[j] - ck[j]);
                r[k] = rk;
                datt += alpha * rk;
                dot_r += alpha * rk;
                cluster_mass[k] += att * alpha;
                // d x_slice and center pull handled below / after the loop.
                const real w = att * alpha;
                real* dx = &dxdot.data[i * D + g_idx * d];
                for (std::size_t j = 0; j < d; ++j) dx[j] += w * dyk[j];
            }
            // Attention logit gradient through the sigmoid.
            const real dzeta = datt * att * (real{1} - att);
            const real* xrow = &ws.xdot.data[i * D];
            real* dwg = &grads.params.attention_w.data[g_idx * D];
            for (std::size_t j = 0; j < D; ++j) dwg[j] += dzeta * xrow[j];
            grads.params.attention_b(0, g_idx) += dzeta;
            const real* wg = &params.attention_w.data[g_idx * D];
            real* dxrow = &dxdot.data[i * D];
            for (std::size_t j = 0; j < D; ++j) dxrow[j] += dzeta * wg[j];

            // Assignment logit gradients through the per-group softmax.
            for (std::size_t k = 0; k < K; ++k) {
                const real alpha = ws.assignment(i, g_idx * K + k);
                const real dl = att * alpha * (r[k] - dot_r);
                if (dl == real{0}) continue;
                const real* wgk = &params.assign_w.data[(g_idx * K + k) * D];
                real* dwgk = &grads.params.assign_w.data[(g_idx * K + k) * D];
                for (std::size_t j = 0; j < D; ++j) {
                    dwgk[j] += dl * xrow[j];
                    dxrow[j] += dl * wgk[j];
                }
                grads.params.assign_b(g_idx, k) += dl;
            }
        }
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < d; ++j)
            grads.params.centers(k, j) = -dvlad(k, j) * cluster_mass[k];

    // Through the expansion projection.
    for (std::size_t i = 0; i < M; ++i) {
        const real* dxrow = &dxdot.data[i * D];
        for (std::size_t j = 0; j < D; ++j) grads.params.expansion_b(0, j) += dxrow[j];
        for (std::size_t n = 0; n < h.input_dim; ++n) {
            const real x_in = ws.frames(i, n);
            real* dwrow = &grads.params.expansion_w.data[n * D];
            real acc = 0;
            const real* wrow = &params.expansion_w.data[n * D];
            for (std::size_t j = 0; j < D; ++j) {
                dwrow[j] += x_in * dxrow[j];
                acc += dxrow[j] * wrow[j];
            }
            grads.frames(i, n) = acc;
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Classification head: dropout -> FC reduction -> context gating -> logits.
// ---------------------------------------------------------------------------

struct HeadParams {
    std::size_t in_dim = 0;
    std::size_t hidden = 0;
    std::size_t classes = 0;
    real dropout_rate = 0;

    Matrix reduce_w;      // in x H
    Matrix reduce_b;      // 1 x H
    Matrix gate_w;        // H x H
    Matrix gate_b;        // 1 x H
    Matrix classifier_w;  // H x C
    Matrix classifier_b;  // 1 x C

    HeadParams() = default;

    HeadParams(std::size_t in, std::size_t h, std::size_t c, real dropout)
        : in_dim(in), hidden(h), classes(c), dropout_rate(dropout) {
        if (h == 0 || c == 0) throw ConfigError("head dims must be positive");
        if (dropout < 0 || dropout >= 1) throw ConfigError("dropout_rate must be in [0,1)");
        reduce_w = Matrix(in, h);
        reduce_b = Matrix(1, h);
        gate_w = Matrix(h, h);
        gate_b = Matrix(1, h);
        classifier_w = Matrix(h, c);
        classifier_b = Matrix(1, c);
    }

    void init(Rng& rng) {
        const auto gaussian_fill = [&](Matrix& m, double std) {
            for (real& v : m.data) v = static_cast<real>(std * rng.normal());
        };
        gaussian_fill(reduce_w, 1.0 / std::sqrt(double(in_dim)));
        gaussian_fill(gate_w, 1.0 / std::sqrt(double(hidden)));
        gaussian_fill(classifier_w, 1.0 / std::sqrt(double(hidden)));
        reduce_b.fill(0);
        gate_b.fill(0);
        classifier_b.fill(0);
    }

    void for_each_tensor(const std::string& prefix, const TensorVisitor& visit) {
        visit(prefix + ".reduce_w", reduce_w);
        visit(prefix + ".reduce_b", reduce_b);
        visit(prefix + ".gate_w", gate_w);
        visit(prefix + ".gate_b", gate_b);
        visit(prefix + ".classifier_w", classifier_w);
        visit(prefix + ".classifier_b", classifier_b);
    }

    void for_each_weight(const TensorVisitor& visit) {
        visit("reduce_w", reduce_w);
        visit("gate_w", gate_w);
        visit("classifier_w", classifier_w);
    }
};

enum class RunMode { kTrain, kEval };

struct HeadWorkspace {
    std::vector<real> concat;
    std::vector<real> mask;  // 0 or 1/(1-rate); all-ones at eval
    std::vector<real> dropped;
    std::vector<real> hidden;
    std::vector<real> gate_sig;
    std::vector<real> gated;
    std::vector<real> logits;
};

inline std::vector<real> head_forward(const std::vector<real>& concat, const HeadParams& head,
                                      RunMode mode, Rng& rng, HeadWorkspace& ws) {
    if (concat.size() != head.in_dim)
        throw ShapeError("head input " + std::to_string(concat.size()) + ", expected " +
                         std::to_string(head.in_dim));
    ws.concat = concat;
    ws.mask.assign(concat.size(), real{1});
    if (mode == RunMode::kTrain && head.dropout_rate > 0) {
        const real keep = real{1} - head.dropout_rate;
        for (real& m : ws.mask) m = (rng.uniform() < keep) ? real{1} / keep : real{0};
    }
    ws.dropped.resize(concat.size());
    for (std::size_t i = 0; i < concat.size(); ++i) ws.dropped[i] = concat[i] * ws.mask[i];

    ws.hidden.assign(head.hidden, 0);
    for (std::size_t i = 0; i < head.in_dim; ++i) {
        const real x = ws.dropped[i];
        if (x == real{0}) continue;
        const real* wrow = &head.reduce_w.data[i * head.hidden];
        for (std::size_t j = 0; j < head.hidden; ++j) ws.hidden[j] += x * wrow[j];
    }
    for (std::size_t j = 0; j < head.hidden; ++j) ws.hidden[j] += head.reduce_b(0, j);

    ws.gate_sig.assign(head.hidden, 0);
    for (std::size_t i = 0; i < head.hidden; ++i) {
        const real* wrow = &head.gate_w.data[i * head.hidden];
        for (std::size_t j = 0; j < head.hidden; ++j) ws.gate_sig[j] += ws.hidden[i] * wrow[j];
    }
    ws.gated.resize(head.hidden);
    for (std::size_t j = 0; j < head.hidden; ++j) {
        ws.gate_sig[j] = sigmoid_scalar(ws.gate_sig[j] + head.gate_b(0, j));
        ws.gated[j] = ws.gate_sig[j] * ws.hidden[j];
    }

    ws.logits.assign(head.classes, 0);
    for (std::size_t i = 0; i < head.hidden; ++i) {
        const real* wrow = &head.classifier_w.data[i * head.classes];
        for (std::size_t c = 0; c < head.classes; ++c) ws.logits[c] += ws.gated[i] * wrow[c];
    }
    for (std::size_t c = 0; c < head.classes; ++c) ws.logits[c] += head.classifier_b(0, c);
    return ws.logits;
}

struct HeadGrads {
    HeadParams params;
    std::vector<real> concat;

    explicit HeadGrads(const HeadParams& like)
        : params(like.in_dim, like.hidden, like.classes, like.dropout_rate) {}
};

inline HeadGrads head_backward(const std::vector<real>& grad_logits, const HeadWorkspace& ws,
                               const HeadParams& head) {
    if (grad_logits.size() != head.classes || ws.logits.size() != head.classes)
        throw ShapeError("head backward called with a stale or mismatched workspace");
    HeadGrads grads(head);

    std::vector<real> dgated(head.hidden, 0);
    for (std::size_t i = 0; i < head.hidden; ++i) {
        real* dwrow = &grads.params.classifier_w.data[i * head.classes];
        const real* wrow = &head.classifier_w.data[i * head.classes];
        real acc = 0;
        for (std::size_t c = 0; c < head.classes; ++c) {
            dwrow[c] += ws.gated[i] * grad_logits[c];
            acc += grad_logits[c] * wrow[c];
        }
        dgated[i] = acc;
    }
    for (std::size_t c = 0; c < head.classes; ++c)
        grads.params.classifier_b(0, c) += grad_logits[c];

    std::vector<real> dhidden(head.hidden, 0);
    std::vector<real> dgate_logit(head.hidden);
    for (std::size_t j = 0; j < head.hidden; ++j) {
        const real s = ws.gate_sig[j];
        dhidden[j] = dgated[j] * s;
        dgate_logit[j] = dgated[j] * ws.hidden[j] * s * (real{1} - s);
        grads.params.gate_b(0, j) += dgate_logit[j];
    }
    for (std::size_t i = 0; i < head.hidden; ++i) {
        real* dwrow = &grads.params.gate_w.data[i * head.hidden];
        const real* wrow = &head.gate_w.data[i * head.hidden];
        real acc = 0;
        for (std::size_t j = 0; j < head.hidden; ++j) {
            dwrow[j] += ws.hidden[i] * dgate_logit[j];
            acc += dgate_logit[j] * wrow[j];
        }
        dhidden[i] += acc;
    }

    for (std::size_t j = 0; j < head.hidden; ++j) grads.params.reduce_b(0, j) += dhidden[j];
    grads.concat.assign(head.in_dim, 0);
    for (std::size_t i = 0; i < head.in_dim; ++i) {
        real* dwrow = &grads.params.reduce_w.data[i * head.hidden];
        const real* wrow = &head.reduce_w.data[i * head.hidden];
        real acc = 0;
        for (std::size_t j = 0; j < head.hidden; ++j) {
            dwrow[j] += ws.dropped[i] * dhidden[j];
            acc += dhidden[j] * wrow[j];
        }
        grads.concat[i] = acc * ws.mask[i];
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Full video model: dual pooling -> concat -> head.
// ---------------------------------------------------------------------------

struct VideoModelHyper {
    PoolHyper visual;
    PoolHyper audio;
    std::size_t hidden = 32;
    std::size_t class_count = 10;
    real dropout_rate = real(0.5);

    std::size_t concat_dim() const { return visual.output_dim() + audio.output_dim(); }
};

struct VideoModelParams {
    VideoModelHyper hyper;
    NeXtVLADPoolParams pool_v;
    NeXtVLADPoolParams pool_a;
    HeadParams head;

    VideoModelParams() = default;

    explicit VideoModelParams(const VideoModelHyper& h)
        : hyper(h),
          pool_v(h.visual),
          pool_a(h.audio),
          head(h.concat_dim(), h.hidden, h.class_count, h.dropout_rate) {}

    void init(Rng& rng) {
        pool_v.init(rng);
        pool_a.init(rng);
        head.init(rng);
    }

    void for_each_tensor(const std::string& prefix, const TensorVisitor& visit) {
        pool_v.for_each_tensor(prefix + "pool_v", visit);
        pool_a.for_each_tensor(prefix + "pool_a", visit);
        head.for_each_tensor(prefix + "head", visit);
    }

    real weight_squared_norm() {
        real total = 0;
        const auto add = [&](const std::string&, Matrix& m) { total += m.squared_norm(); };
        pool_v.for_each_weight(add);
        pool_a.for_each_weight(add);
        head.for_each_weight(add);
        return total;
    }
};

struct VideoModelWorkspace {
    PoolingWorkspace pool_v;
    PoolingWorkspace pool_a;
    HeadWorkspace head;
};

inline std::vector<real> video_model_forward(const Matrix& visual, const Matrix& audio,
                                             VideoModelParams& params, RunMode mode, Rng& rng,
                                             VideoModelWorkspace& ws) {
    if (visual.rows != audio.rows)
        throw ShapeError("visual has " + std::to_string(visual.rows) + " frames, audio has " +
                         std::to_string(audio.rows));
    const auto pv = nextvlad_pool_forward(visual, params.pool_v, ws.pool_v);
    const auto pa = nextvlad_pool_forward(audio, params.pool_a, ws.pool_a);
    std::vector<real> concat;
    concat.reserve(pv.size() + pa.size());
    concat.insert(concat.end(), pv.begin(), pv.end());
    concat.insert(concat.end(), pa.begin(), pa.end());
    return head_forward(concat, params.head, mode, rng, ws.head);
}

struct VideoModelGrads {
    PoolGrads pool_v;
    PoolGrads pool_a;
    HeadGrads head;

    explicit VideoModelGrads(const VideoModelParams& like)
        : pool_v(like.pool_v.hyper), pool_a(like.pool_a.hyper), head(like.head) {}

    void for_each_tensor(const std::string& prefix, const TensorVisitor& visit) {
        pool_v.params.for_each_tensor(prefix + "pool_v", visit);
        pool_a.params.for_each_tensor(prefix + "pool_a", visit);
        head.params.for_each_tensor(prefix + "head", visit);
    }
};

inline VideoModelGrads video_model_backward(const std::vector<real>& grad_logits,
                                            const VideoModelWorkspace& ws,
                                            const VideoModelParams& params) {
    auto head_grads = head_backward(grad_logits, ws.head, params.head);
    const std::size_t nv = params.pool_v.hyper.output_dim();
    const std::size_t na = params.pool_a.hyper.output_dim();
    std::vector<real> gv(head_grads.concat.begin(), head_grads.concat.begin() + nv);
    std::vector<real> ga(head_grads.concat.begin() + nv, head_grads.concat.begin() + nv + na);
    VideoModelGrads grads(params);
    grads.pool_v = nextvlad_pool_backward(gv, ws.pool_v, params.pool_v);
    grads.pool_a = nextvlad_pool_backward(ga, ws.pool_a, params.pool_a);
    grads.head = std::move(head_grads);
    return grads;
}

// Segment scores for the no-finetune baseline: every window of the video is
// assigned the video-level class probabilities unchanged.
inline std::vector<std::vector<real>> dummy_segment_predict(const std::vector<real>& video_logits,
                                                            std::size_t window_count) {
    for (real z : video_logits)
        if (!std::isfinite(z)) throw DomainError("dummy prediction from non-finite logits");
    const auto probs = sigmoid(video_logits);
    return std::vector<std::vector<real>>(window_count, probs);
}

}  // namespace mod

#endif  // MOD_NEXTVLAD_HPP
