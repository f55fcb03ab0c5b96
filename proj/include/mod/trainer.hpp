#ifndef MOD_TRAINER_HPP
#define MOD_TRAINER_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mod/dataset.hpp"
#include "mod/io.hpp"
#include "mod/mixture.hpp"
#include "mod/nextvlad.hpp"

namespace mod {

enum class ModelKind : std::uint8_t { kSingle = 0, kMix = 1, kMod = 2 };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::kSingle: return "single";
        case ModelKind::kMix: return "mix";
        case ModelKind::kMod: return "mod";
    }
    return "?";
}

struct ModelTopology {
    ModelKind kind = ModelKind::kSingle;
    VideoModelHyper hyper;
    MixtureTreeShape tree;  // kMix uses leaves_per_inner as the mixture size
    real temperature = 0;
    // Mixing weights are fixed uniform by default; when enabled they become
    // trainable via a softmax reparameterization (initialized to uniform).
    bool learnable_mix_weights = false;

    std::size_t leaf_count() const {
        switch (kind) {
            case ModelKind::kSingle: return 1;
            case ModelKind::kMix: return tree.leaves_per_inner;
            case ModelKind::kMod: return tree.leaf_count();
        }
        return 1;
    }
};

struct TrainConfig {
    std::size_t batch_size = 8;
    real base_lr = real(0.0002);
    real lr_decay = real(0.8);
    std::uint64_t decay_every_examples = 1000;
    std::uint64_t max_steps = 0;  // 0 = bounded by epochs only
    std::uint64_t epochs = 10;
    real l2_penalty = real(1e-4);
    real dropout_rate = real(-1);  // < 0 keeps the model's current rate
    real temperature = real(-1);   // < 0 keeps the model's current T
    std::uint64_t seed = 1;
    std::size_t workers = 1;

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (base_lr <= 0) throw ConfigError("base_lr must be > 0");
        if (lr_decay <= 0 || lr_decay > 1) throw ConfigError("lr_decay must be in (0,1]");
        if (decay_every_examples < 1) throw ConfigError("decay_every_examples must be >= 1");
        // max_steps == 0 && epochs == 0 is a valid no-op run (parameters
        // unchanged); useful for checkpoint plumbing tests.
    }
};

// Piecewise-constant stepped decay: base * decay^floor(seen / every).
inline real lr_at(std::uint64_t examples_seen, const TrainConfig& cfg) {
    const auto n = examples_seen / cfg.decay_every_examples;
    return cfg.base_lr * static_cast<real>(std::pow(double(cfg.lr_decay), double(n)));
}

// The full trainable state: leaf models, per-tensor Adam state, counters.
struct TrainerState {
    ModelTopology topo;
    std::vector<VideoModelParams> leaves;
    std::vector<std::vector<AdamState>> adam;  // [leaf][tensor], tensor order = for_each_tensor
    // Pre-softmax mixing parameters; all-zero rows give uniform weights.
    // kMod: root_theta is 1 x inner_count, child_theta is inner_count x
    // leaves_per_inner. kMix: only child_theta, 1 x leaves_per_inner.
    Matrix mix_root_theta;
    Matrix mix_child_theta;
    AdamState adam_root_theta;
    AdamState adam_child_theta;
    std::uint64_t step = 0;
    std::uint64_t examples_seen = 0;
    Rng rng;

    static TrainerState create(const ModelTopology& topo, std::uint64_t seed) {
        TrainerState st;
        st.topo = topo;
        st.rng = Rng(seed);
        for (std::size_t l = 0; l < topo.leaf_count(); ++l) {
            VideoModelParams leaf(topo.hyper);
            Rng leaf_rng = derive_rng(seed, 0x10000 + l);
            leaf.init(leaf_rng);
            st.leaves.push_back(std::move(leaf));
        }
        if (topo.kind == ModelKind::kMix)
            st.mix_child_theta = Matrix(1, topo.tree.leaves_per_inner);
        else if (topo.kind == ModelKind::kMod) {
            st.mix_root_theta = Matrix(1, topo.tree.inner_count);
            st.mix_child_theta = Matrix(topo.tree.inner_count, topo.tree.leaves_per_inner);
        }
        st.reset_optimizer();
        return st;
    }

    void reset_optimizer() {
        adam.clear();
        for (auto& leaf : leaves) {
            std::vector<AdamState> states;
            leaf.for_each_tensor("", [&](const std::string&, Matrix& t) {
                states.push_back(AdamState::like(t));
            });
            adam.push_back(std::move(states));
        }
        adam_root_theta = AdamState::like(mix_root_theta);
        adam_child_theta = AdamState::like(mix_child_theta);
    }

    std::vector<real> root_weights() const {
        if (mix_root_theta.data.empty()) return topo.tree.inner_weights();
        return softmax(mix_root_theta.data);
    }
    // Weights of inner mixture n over its children (n = 0 for kMix).
    std::vector<real> child_weights(std::size_t n) const {
        if (mix_child_theta.data.empty()) return topo.tree.leaf_weights();
        std::vector<real> row(mix_child_theta.data.begin() + n * mix_child_theta.cols,
                              mix_child_theta.data.begin() + (n + 1) * mix_child_theta.cols);
        return softmax(row);
    }
    std::vector<std::vector<real>> all_child_weights() const {
        std::vector<std::vector<real>> out;
        const std::size_t rows = topo.kind == ModelKind::kMod ? topo.tree.inner_count : 1;
        for (std::size_t n = 0; n < rows; ++n) out.push_back(child_weights(n));
        return out;
    }

    // Root prediction in eval mode (deterministic, no dropout).
    std::vector<real> predict_logits(const Matrix& visual, const Matrix& audio) {
        Rng unused;
        std::vector<std::vector<real>> leaf_logits;
        for (auto& leaf : leaves) {
            VideoModelWorkspace ws;
            leaf_logits.push_back(
                video_model_forward(visual, audio, leaf, RunMode::kEval, unused, ws));
        }
        switch (topo.kind) {
            case ModelKind::kSingle:
                return leaf_logits[0];
            case ModelKind::kMix:
                return mix_logits(leaf_logits, child_weights(0));
            case ModelKind::kMod: {
                std::vector<std::vector<real>> inner;
                for (std::size_t n = 0; n < topo.tree.inner_count; ++n) {
                    std::vector<std::vector<real>> children(
                        leaf_logits.begin() + n * topo.tree.leaves_per_inner,
                        leaf_logits.begin() + (n + 1) * topo.tree.leaves_per_inner);
                    inner.push_back(mix_logits(children, child_weights(n)));
                }
                return mix_logits(inner, root_weights());
            }
        }
        return leaf_logits[0];
    }
};

// ---------------------------------------------------------------------------
// Checkpoint format: magic "MODK", version u16=1, topology, counters, rng,
// named f64 tensor blocks with CRC32 each, then an optional optimizer section.
// ---------------------------------------------------------------------------

constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

inline void write_tensor_block(BinaryWriter& w, const std::string& name, const Matrix& t) {
    w.write_string_u16(name);
    w.write<std::uint64_t>(t.rows);
    w.write<std::uint64_t>(t.cols);
    std::vector<double> payload(t.data.begin(), t.data.end());
    w.write_bytes(payload.data(), payload.size() * sizeof(double));
    w.write<std::uint32_t>(crc32(payload.data(), payload.size() * sizeof(double)));
}

inline std::pair<std::string, Matrix> read_tensor_block(BinaryReader& r) {
    const std::string name = r.read_string_u16();
    const auto rows = r.read<std::uint64_t>();
    const auto cols = r.read<std::uint64_t>();
    if (rows * cols > (std::uint64_t(1) << 32)) r.fail("implausible tensor size");
    std::vector<double> payload(rows * cols);
    r.read_bytes(payload.data(), payload.size() * sizeof(double));
    const auto stored_crc = r.read<std::uint32_t>();
    const auto actual_crc = crc32(payload.data(), payload.size() * sizeof(double));
    if (stored_crc != actual_crc) r.fail("tensor block checksum mismatch for '" + name + "'");
    Matrix t(rows, cols);
    for (std::size_t i = 0; i < payload.size(); ++i) t.data[i] = static_cast<real>(payload[i]);
    return {name, std::move(t)};
}

inline void write_pool_hyper(BinaryWriter& w, const PoolHyper& h) {
    w.write<std::uint32_t>(static_cast<std::uint32_t>(h.input_dim));
    w.write<std::uint32_t>(static_cast<std::uint32_t>(h.expansion));
    w.write<std::uint32_t>(static_cast<std::uint32_t>(h.groups));
    w.write<std::uint32_t>(static_cast<std::uint32_t>(h.clusters));
    w.write<std::uint8_t>(h.global_l2 ? 1 : 0);
}

inline PoolHyper read_pool_hyper(BinaryReader& r) {
    PoolHyper h;
    h.input_dim = r.read<std::uint32_t>();
    h.expansion = r.read<std::uint32_t>();
    h.groups = r.read<std::uint32_t>();
    h.clusters = r.read<std::uint32_t>();
    h.global_l2 = r.read<std::uint8_t>() != 0;
    return h;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const TrainerState& st,
                            bool include_optimizer = true) {
    // Write to a temp file then rename so a crash never leaves a torn checkpoint.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        BinaryWriter w(tmp);
        w.write_bytes("MODK", 4);
        w.write<std::uint16_t>(kCheckpointVersion);
        w.write<std::uint8_t>(static_cast<std::uint8_t>(st.topo.kind));
        detail::write_pool_hyper(w, st.topo.hyper.visual);
        detail::write_pool_hyper(w, st.topo.hyper.audio);
        w.write<std::uint32_t>(static_cast<std::uint32_t>(st.topo.hyper.hidden));
        w.write<std::uint32_t>(static_cast<std::uint32_t>(st.topo.hyper.class_count));
        w.write<double>(static_cast<double>(st.topo.hyper.dropout_rate));
        w.write<std::uint32_t>(static_cast<std::uint32_t>(st.topo.tree.inner_count));
        w.write<std::uint32_t>(static_cast<std::uint32_t>(st.topo.tree.leaves_per_inner));
        w.write<double>(static_cast<double>(st.topo.temperature));
        w.write<std::uint8_t>(st.topo.learnable_mix_weights ? 1 : 0);
        w.write<std::uint64_t>(st.step);
        w.write<std::uint64_t>(st.examples_seen);
        for (std::uint64_t word : st.rng.state()) w.write<std::uint64_t>(word);

        const bool has_root_theta = !st.mix_root_theta.data.empty();
        const bool has_child_theta = !st.mix_child_theta.data.empty();
        std::uint32_t tensor_count = 0;
        auto& mut = const_cast<TrainerState&>(st);
        for (auto& leaf : mut.leaves)
            leaf.for_each_tensor("", [&](const std::string&, Matrix&) { ++tensor_count; });
        tensor_count += (has_root_theta ? 1 : 0) + (has_child_theta ? 1 : 0);
        w.write<std::uint32_t>(tensor_count);
        for (std::size_t l = 0; l < mut.leaves.size(); ++l) {
            const std::string prefix = "leaf" + std::to_string(l) + ".";
            mut.leaves[l].for_each_tensor(prefix, [&](const std::string& name, Matrix& t) {
                detail::write_tensor_block(w, name, t);
            });
        }
        if (has_root_theta) detail::write_tensor_block(w, "mix.root_theta", st.mix_root_theta);
        if (has_child_theta) detail::write_tensor_block(w, "mix.child_theta", st.mix_child_theta);

        w.write<std::uint8_t>(include_optimizer ? 1 : 0);
        if (include_optimizer) {
            w.write<std::uint32_t>(tensor_count);
            for (std::size_t l = 0; l < mut.leaves.size(); ++l) {
                std::size_t ti = 0;
                const std::string prefix = "leaf" + std::to_string(l) + ".";
                mut.leaves[l].for_each_tensor(prefix, [&](const std::string& name, Matrix&) {
                    const AdamState& a = st.adam[l][ti++];
                    detail::write_tensor_block(w, "adam.m." + name, a.m);
                    detail::write_tensor_block(w, "adam.v." + name, a.v);
                    w.write<std::uint64_t>(a.step);
                });
            }
            const auto write_theta_adam = [&](const std::string& name, const AdamState& a) {
                detail::write_tensor_block(w, "adam.m." + name, a.m);
                detail::write_tensor_block(w, "adam.v." + name, a.v);
                w.write<std::uint64_t>(a.step);
            };
            if (has_root_theta) write_theta_adam("mix.root_theta", st.adam_root_theta);
            if (has_child_theta) write_theta_adam("mix.child_theta", st.adam_child_theta);
        }
        w.close();
    }
    std::filesystem::rename(tmp, path);
}

inline TrainerState load_checkpoint(const std::filesystem::path& path,
                                    bool require_optimizer = false) {
    BinaryReader r(path);
    char magic[4];
    r.read_bytes(magic, 4);
    if (std::memcmp(magic, "MODK", 4) != 0) r.fail("bad checkpoint magic");
    const auto version = r.read<std::uint16_t>();
    if (version != kCheckpointVersion)
        r.fail("unsupported checkpoint version " + std::to_string(version));

    ModelTopology topo;
    topo.kind = static_cast<ModelKind>(r.read<std::uint8_t>());
    topo.hyper.visual = detail::read_pool_hyper(r);
    topo.hyper.audio = detail::read_pool_hyper(r);
    topo.hyper.hidden = r.read<std::uint32_t>();
    topo.hyper.class_count = r.read<std::uint32_t>();
    topo.hyper.dropout_rate = static_cast<real>(r.read<double>());
    topo.tree.inner_count = r.read<std::uint32_t>();
    topo.tree.leaves_per_inner = r.read<std::uint32_t>();
    topo.temperature = static_cast<real>(r.read<double>());
    topo.learnable_mix_weights = r.read<std::uint8_t>() != 0;

    TrainerState st;
    st.topo = topo;
    st.step = r.read<std::uint64_t>();
    st.examples_seen = r.read<std::uint64_t>();
    std::array<std::uint64_t, 4> rng_state{};
    for (auto& word : rng_state) word = r.read<std::uint64_t>();
    st.rng.set_state(rng_state);

    for (std::size_t l = 0; l < topo.leaf_count(); ++l)
        st.leaves.emplace_back(topo.hyper);
    if (topo.kind == ModelKind::kMix)
        st.mix_child_theta = Matrix(1, topo.tree.leaves_per_inner);
    else if (topo.kind == ModelKind::kMod) {
        st.mix_root_theta = Matrix(1, topo.tree.inner_count);
        st.mix_child_theta = Matrix(topo.tree.inner_count, topo.tree.leaves_per_inner);
    }
    st.reset_optimizer();

    const auto tensor_count = r.read<std::uint32_t>();
    std::map<std::string, Matrix> loaded;
    for (std::uint32_t i = 0; i < tensor_count; ++i) {
        auto [name, t] = detail::read_tensor_block(r);
        loaded.emplace(std::move(name), std::move(t));
    }
    const auto take = [&](const std::string& name, Matrix& t) {
        auto it = loaded.find(name);
        if (it == loaded.end()) r.fail("missing tensor '" + name + "'");
        if (!it->second.same_shape(t))
            r.fail("tensor '" + name + "' has shape " + it->second.shape_str() +
                   ", expected " + t.shape_str());
        t = std::move(it->second);
    };
    for (std::size_t l = 0; l < st.leaves.size(); ++l) {
        const std::string prefix = "leaf" + std::to_string(l) + ".";
        st.leaves[l].for_each_tensor(prefix, [&](const std::string& name, Matrix& t) {
            take(name, t);
        });
    }
    if (!st.mix_root_theta.data.empty()) take("mix.root_theta", st.mix_root_theta);
    if (!st.mix_child_theta.data.empty()) take("mix.child_theta", st.mix_child_theta);

    const auto has_optimizer = r.read<std::uint8_t>();
    if (!has_optimizer && require_optimizer) r.fail("checkpoint has no optimizer state");
    if (has_optimizer) {
        const auto opt_count = r.read<std::uint32_t>();
        (void)opt_count;
        const auto read_adam_for = [&](const std::string& name, const Matrix& t, AdamState& a) {
            auto [mname, m] = detail::read_tensor_block(r);
            auto [vname, v] = detail::read_tensor_block(r);
            if (mname != "adam.m." + name || vname != "adam.v." + name)
                r.fail("optimizer block out of order at '" + mname + "'");
            if (!m.same_shape(t) || !v.same_shape(t))
                r.fail("optimizer state shape mismatch for '" + name + "'");
            a.m = std::move(m);
            a.v = std::move(v);
            a.step = r.read<std::uint64_t>();
        };
        for (std::size_t l = 0; l < st.leaves.size(); ++l) {
            std::size_t ti = 0;
            const std::string prefix = "leaf" + std::to_string(l) + ".";
            st.leaves[l].for_each_tensor(prefix, [&](const std::string& name, Matrix& t) {
                read_adam_for(name, t, st.adam[l][ti]);
                ++ti;
            });
        }
        if (!st.mix_root_theta.data.empty())
            read_adam_for("mix.root_theta", st.mix_root_theta, st.adam_root_theta);
        if (!st.mix_child_theta.data.empty())
            read_adam_for("mix.child_theta", st.mix_child_theta, st.adam_child_theta);
    }
    return st;
}

// Raises CheckpointError listing every differing topology field.
inline void require_topology(const TrainerState& st, const ModelTopology& expected) {
    std::vector<std::string> diffs;
    const auto cmp = [&](const std::string& field, auto a, auto b) {
        if (a != b)
            diffs.push_back(field + " (checkpoint " + std::to_string(a) + ", expected " +
                            std::to_string(b) + ")");
    };
    cmp("kind", int(st.topo.kind), int(expected.kind));
    cmp("visual.input_dim", st.topo.hyper.visual.input_dim, expected.hyper.visual.input_dim);
    cmp("visual.expansion", st.topo.hyper.visual.expansion, expected.hyper.visual.expansion);
    cmp("visual.groups", st.topo.hyper.visual.groups, expected.hyper.visual.groups);
    cmp("visual.clusters", st.topo.hyper.visual.clusters, expected.hyper.visual.clusters);
    cmp("audio.input_dim", st.topo.hyper.audio.input_dim, expected.hyper.audio.input_dim);
    cmp("audio.expansion", st.topo.hyper.audio.expansion, expected.hyper.audio.expansion);
    cmp("audio.groups", st.topo.hyper.audio.groups, expected.hyper.audio.groups);
    cmp("audio.clusters", st.topo.hyper.audio.clusters, expected.hyper.audio.clusters);
    cmp("hidden", st.topo.hyper.hidden, expected.hyper.hidden);
    cmp("class_count", st.topo.hyper.class_count, expected.hyper.class_count);
    cmp("tree.inner_count", st.topo.tree.inner_count, expected.tree.inner_count);
    cmp("tree.leaves_per_inner", st.topo.tree.leaves_per_inner, expected.tree.leaves_per_inner);
    cmp("learnable_mix_weights", int(st.topo.learnable_mix_weights),
        int(expected.learnable_mix_weights));
    if (!diffs.empty()) {
        std::string msg = "topology mismatch:";
        for (const auto& d : diffs) msg += " " + d + ";";
        throw CheckpointError(msg);
    }
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

struct TrainExample {
    Matrix visual;
    Matrix audio;
    std::vector<real> labels;  // multi-hot, length class_count
};

inline std::vector<TrainExample> video_examples(const Corpus& corpus) {
    std::vector<TrainExample> out;
    out.reserve(corpus.records.size());
    for (const auto& rec : corpus.records) {
        TrainExample ex;
        ex.visual = rec.visual;
        ex.audio = rec.audio;
        ex.labels.assign(corpus.meta.class_count, 0);
        for (auto c : rec.video_labels) ex.labels[c] = 1;
        out.push_back(std::move(ex));
    }
    return out;
}

// One example per labeled (video, start) window; target is the multi-hot of
// its verified-positive classes (explicit negatives stay 0).
inline std::vector<TrainExample> segment_examples(const Corpus& corpus,
                                                  const std::vector<SegmentLabel>& labels) {
    std::map<std::string, const FrameFeatureRecord*> by_id;
    for (const auto& rec : corpus.records) by_id[rec.video_id] = &rec;

    std::map<std::pair<std::string, std::uint32_t>, std::vector<const SegmentLabel*>> grouped;
    for (const auto& l : labels) grouped[{l.video_id, l.start_frame}].push_back(&l);

    std::vector<TrainExample> out;
    for (const auto& [key, rows] : grouped) {
        auto it = by_id.find(key.first);
        if (it == by_id.end())
            throw ConfigError("segment label references unknown video " + key.first);
        const auto& rec = *it->second;
        if (key.second + kSegmentFrames > rec.frame_count())
            throw ConfigError("segment label past end of video " + key.first);
        TrainExample ex;
        ex.visual = Matrix(kSegmentFrames, rec.visual.cols);
        ex.audio = Matrix(kSegmentFrames, rec.audio.cols);
        for (std::size_t i = 0; i < kSegmentFrames; ++i) {
            for (std::size_t j = 0; j < rec.visual.cols; ++j)
                ex.visual(i, j) = rec.visual(key.second + i, j);
            for (std::size_t j = 0; j < rec.audio.cols; ++j)
                ex.audio(i, j) = rec.audio(key.second + i, j);
        }
        ex.labels.assign(corpus.meta.class_count, 0);
        for (const auto* l : rows)
            if (l->positive) ex.labels[l->class_id] = 1;
        out.push_back(std::move(ex));
    }
    return out;
}

struct TrainResult {
    real first_loss = 0;
    real last_loss = 0;
    std::uint64_t steps_run = 0;
};

namespace detail {

// Partitions [0, n) into `parts` contiguous chunks and runs fn on each,
// using real threads only when parts > 1.
inline void parallel_chunks(std::size_t n, std::size_t parts,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
    parts = std::max<std::size_t>(1, std::min(parts, n));
    if (parts == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> threads;
    const std::size_t chunk = (n + parts - 1) / parts;
    for (std::size_t p = 0; p < parts; ++p) {
        const std::size_t lo = p * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back(fn, lo, hi);
    }
    for (auto& t : threads) t.join();
}

}  // namespace detail

// Minimizes the topology's loss (BCE / Eq-6 mixture / layered MOD) plus the
// L2 weight penalty with Adam. Leaves are evaluated model-parallel; all
// reductions happen in canonical leaf order so worker count never changes
// the result.
inline TrainResult train_loop(TrainerState& st, const std::vector<TrainExample>& examples,
                              const TrainConfig& cfg, std::ostream* diag_log = nullptr) {
    cfg.validate();
    if (examples.empty()) throw ConfigError("empty training set");
    if (cfg.dropout_rate >= 0) {
        if (cfg.dropout_rate >= 1) throw ConfigError("dropout_rate must be in [0,1)");
        st.topo.hyper.dropout_rate = cfg.dropout_rate;
        for (auto& leaf : st.leaves) leaf.head.dropout_rate = cfg.dropout_rate;
    }
    if (cfg.temperature >= 0) st.topo.temperature = cfg.temperature;
    const std::size_t n_leaves = st.leaves.size();
    const real T = st.topo.temperature;

    if (diag_log && st.step == 0)
        *diag_log << "step,node_path,label_loss,distill_loss,reg_loss\n";

    // Tensor pointers per leaf, aligned with the Adam state vectors.
    std::vector<std::vector<Matrix*>> leaf_tensors(n_leaves);
    std::vector<std::vector<bool>> is_bias(n_leaves);
    for (std::size_t l = 0; l < n_leaves; ++l) {
        st.leaves[l].for_each_tensor("", [&](const std::string& name, Matrix& t) {
            leaf_tensors[l].push_back(&t);
            is_bias[l].push_back(name.size() >= 2 && name.compare(name.size() - 2, 2, "_b") == 0);
        });
    }

    TrainResult result;
    real last_finite_loss = 0;
    bool have_first = false;
    const std::uint64_t max_steps = cfg.max_steps;
    std::uint64_t epoch = 0;
    bool done = max_steps == 0 && cfg.epochs == 0;

    while (!done) {
        if (cfg.epochs != 0 && epoch >= cfg.epochs) break;
        // Seeded shuffle per epoch.
        std::vector<std::size_t> order(examples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng = derive_rng(cfg.seed ^ 0x5af71eULL, epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        for (std::size_t base = 0; base < order.size(); base += cfg.batch_size) {
            if (max_steps != 0 && result.steps_run >= max_steps) {
                done = true;
                break;
            }
            const std::size_t batch = std::min(cfg.batch_size, order.size() - base);
            const real inv_batch = real{1} / static_cast<real>(batch);
            const real lr = lr_at(st.examples_seen, cfg);

            // Phase 1: leaf forward passes (model-parallel).
            std::vector<std::vector<VideoModelWorkspace>> ws(n_leaves);
            std::vector<std::vector<std::vector<real>>> logits(n_leaves);
            detail::parallel_chunks(n_leaves, cfg.workers, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t l = lo; l < hi; ++l) {
                    ws[l].resize(batch);
                    logits[l].resize(batch);
                    for (std::size_t b = 0; b < batch; ++b) {
                        Rng drop_rng = derive_rng(
                            cfg.seed, st.step * 0x9e3779b97f4a7c15ULL + l * 0x100000001b3ULL + b);
                        const auto& ex = examples[order[base + b]];
                        logits[l][b] = video_model_forward(ex.visual, ex.audio, st.leaves[l],
                                                           RunMode::kTrain, drop_rng, ws[l][b]);
                    }
                }
            });

            // Phase 2: loss and logit gradients, sequential in canonical order.
            real weight_sqnorm = 0;
            for (auto& leaf : st.leaves) weight_sqnorm += leaf.weight_squared_norm();
            const real reg_loss = cfg.l2_penalty * weight_sqnorm;

            real batch_loss = 0;
            std::map<std::string, std::pair<real, real>> node_losses;  // path -> (label, distill)
            std::vector<std::vector<std::vector<real>>> dlogits(
                n_leaves, std::vector<std::vector<real>>(batch));
            const bool learn_mix = st.topo.learnable_mix_weights &&
                                   st.topo.kind != ModelKind::kSingle;
            Matrix droot_theta(st.mix_root_theta.rows, st.mix_root_theta.cols);
            Matrix dchild_theta(st.mix_child_theta.rows, st.mix_child_theta.cols);
            for (std::size_t b = 0; b < batch; ++b) {
                const auto& y = examples[order[base + b]].labels;
                std::vector<std::vector<real>> zs(n_leaves);
                for (std::size_t l = 0; l < n_leaves; ++l) zs[l] = logits[l][b];
                std::vector<std::vector<real>> g;
                switch (st.topo.kind) {
                    case ModelKind::kSingle: {
                        const real loss = bce_with_logits(y, zs[0]);
                        batch_loss += loss;
                        node_losses["root"].first += loss;
                        g = {bce_with_logits_grad(y, zs[0])};
                        break;
                    }
                    case ModelKind::kMix: {
                        const auto w = st.child_weights(0);
                        const auto parts = mixture_loss(y, zs, w, T);
                        batch_loss += parts.total;
                        node_losses["root"].first += parts.mixture_label_loss;
                        node_losses["root"].second += parts.distill_loss;
                        for (std::size_t l = 0; l < n_leaves; ++l)
                            node_losses["l" + std::to_string(l)].first +=
                                parts.child_label_losses[l];
                        auto gp = mixture_loss_grad_parts(y, zs, w, T);
                        if (learn_mix) {
                            const auto dth = mixing_theta_grad(gp.mixture_grad, zs, w);
                            for (std::size_t m = 0; m < dth.size(); ++m)
                                dchild_theta.data[m] += inv_batch * dth[m];
                        }
                        g = std::move(gp.child_direct);
                        for (std::size_t m = 0; m < n_leaves; ++m)
                            for (std::size_t c = 0; c < gp.mixture_grad.size(); ++c)
                                g[m][c] += w[m] * gp.mixture_grad[c];
                        break;
                    }
                    case ModelKind::kMod: {
                        const auto inner_w = st.root_weights();
                        const auto leaf_w = st.all_child_weights();
                        const auto parts = mod_loss_weighted(y, zs, st.topo.tree, T,
                                                             inner_w, leaf_w);
                        batch_loss += parts.total;
                        for (const auto& node : parts.nodes) {
                            node_losses[node.node_path].first += node.label_loss;
                            node_losses[node.node_path].second += node.distill_loss;
                        }
                        auto gp = mod_loss_grad_parts(y, zs, st.topo.tree, T, inner_w, leaf_w);
                        if (learn_mix) {
                            const auto droot =
                                mixing_theta_grad(gp.root_mix_grad, gp.inner_logits, inner_w);
                            for (std::size_t n = 0; n < droot.size(); ++n)
                                droot_theta.data[n] += inv_batch * droot[n];
                            for (std::size_t n = 0; n < st.topo.tree.inner_count; ++n) {
                                std::vector<std::vector<real>> children(
                                    zs.begin() + n * st.topo.tree.leaves_per_inner,
                                    zs.begin() + (n + 1) * st.topo.tree.leaves_per_inner);
                                const auto dth = mixing_theta_grad(gp.inner_mix_grads[n],
                                                                   children, leaf_w[n]);
                                for (std::size_t l = 0; l < dth.size(); ++l)
                                    dchild_theta(n, l) += inv_batch * dth[l];
                            }
                        }
                        g = std::move(gp.leaf_grads);
                        break;
                    }
                }
                for (std::size_t l = 0; l < n_leaves; ++l) {
                    for (real& v : g[l]) v *= inv_batch;
                    dlogits[l][b] = std::move(g[l]);
                }
            }
            batch_loss = batch_loss * inv_batch + reg_loss;
            if (!std::isfinite(batch_loss))
                throw DomainError("training diverged (non-finite loss) at step " +
                                  std::to_string(st.step) + "; last finite loss " +
                                  std::to_string(double(last_finite_loss)));
            last_finite_loss = batch_loss;
            if (!have_first) {
                result.first_loss = batch_loss;
                have_first = true;
            }
            result.last_loss = batch_loss;

            // Phase 3: leaf backward passes and gradient accumulation
            // (model-parallel; each leaf's buffers are owned by one worker).
            std::vector<std::vector<Matrix>> grad_accum(n_leaves);
            detail::parallel_chunks(n_leaves, cfg.workers, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t l = lo; l < hi; ++l) {
                    grad_accum[l].reserve(leaf_tensors[l].size());
                    for (Matrix* t : leaf_tensors[l]) grad_accum[l].emplace_back(t->rows, t->cols);
                    for (std::size_t b = 0; b < batch; ++b) {
                        auto g = video_model_backward(dlogits[l][b], ws[l][b], st.leaves[l]);
                        std::size_t ti = 0;
                        g.for_each_tensor("", [&](const std::string&, Matrix& gt) {
                            grad_accum[l][ti++] += gt;
                        });
                    }
                    // L2 penalty on weights and centers, not biases.
                    for (std::size_t ti = 0; ti < leaf_tensors[l].size(); ++ti) {
                        if (is_bias[l][ti]) continue;
                        const Matrix& t = *leaf_tensors[l][ti];
                        Matrix& gt = grad_accum[l][ti];
                        for (std::size_t i = 0; i < t.data.size(); ++i)
                            gt.data[i] += 2 * cfg.l2_penalty * t.data[i];
                    }
                }
            });

            // Phase 4: optimizer step, coordinator-owned, canonical order.
            for (std::size_t l = 0; l < n_leaves; ++l)
                for (std::size_t ti = 0; ti < leaf_tensors[l].size(); ++ti)
                    adam_step(*leaf_tensors[l][ti], grad_accum[l][ti], st.adam[l][ti], lr);
            if (learn_mix) {
                if (!st.mix_root_theta.data.empty())
                    adam_step(st.mix_root_theta, droot_theta, st.adam_root_theta, lr);
                adam_step(st.mix_child_theta, dchild_theta, st.adam_child_theta, lr);
            }

            ++st.step;
            st.examples_seen += batch;
            ++result.steps_run;

            if (diag_log) {
                for (const auto& [path, losses] : node_losses) {
                    *diag_log << st.step << ',' << path << ','
                              << losses.first * inv_batch << ',' << losses.second * inv_batch
                              << ',' << (path == "root" ? reg_loss : real{0}) << '\n';
                }
            }
        }
        ++epoch;
        if (cfg.epochs == 0 && max_steps != 0 && result.steps_run >= max_steps) done = true;
    }
    return result;
}

inline TrainResult pretrain(TrainerState& st, const Corpus& corpus, const TrainConfig& cfg,
                            std::ostream* diag_log = nullptr) {
    if (corpus.meta.class_count != st.topo.hyper.class_count)
        throw ConfigError("corpus has " + std::to_string(corpus.meta.class_count) +
                          " classes, model expects " +
                          std::to_string(st.topo.hyper.class_count));
    return train_loop(st, video_examples(corpus), cfg, diag_log);
}

// Continues from a pretrained state on 5-frame segment examples with a fresh
// optimizer and fresh counters (the finetune regime has its own LR schedule).
inline TrainResult finetune(TrainerState& st, const Corpus& corpus,
                            const std::vector<SegmentLabel>& labels, const TrainConfig& cfg,
                            std::ostream* diag_log = nullptr) {
    if (corpus.meta.class_count != st.topo.hyper.class_count)
        throw ConfigError("corpus has " + std::to_string(corpus.meta.class_count) +
                          " classes, model expects " +
                          std::to_string(st.topo.hyper.class_count));
    st.reset_optimizer();
    st.step = 0;
    st.examples_seen = 0;
    return train_loop(st, segment_examples(corpus, labels), cfg, diag_log);
}

}  // namespace mod

#endif  // MOD_TRAINER_HPP
