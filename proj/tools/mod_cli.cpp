// Command-line toolchain for the MOD video localization models: synthetic
// corpus generation, pretraining, segment finetuning, the three-phase
// localization pipeline, MAP@K evaluation, gradient checking and checkpoint
// inspection. Every command writes a JSON run manifest next to its outputs.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mod/evaluation.hpp"
#include "mod/localization.hpp"
#include "mod/presets.hpp"
#include "mod/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using mod::real;

namespace {

// ---------------------------------------------------------------------------
// Logging: MOD_LOG_LEVEL in {error, info, debug}; default info.
// ---------------------------------------------------------------------------

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("MOD_LOG_LEVEL");
        if (!env) return LogLevel::kInfo;
        const std::string v = env;
        if (v == "error") return LogLevel::kError;
        if (v == "info") return LogLevel::kInfo;
        if (v == "debug") return LogLevel::kDebug;
        throw mod::ConfigError("MOD_LOG_LEVEL must be error, info or debug, got '" + v + "'");
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::kInfo) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::kDebug) std::cerr << "[debug] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// Run manifests.
// ---------------------------------------------------------------------------

std::uint32_t file_crc(const fs::path& path) {
    const auto bytes = mod::read_text_file(path);
    return mod::crc32(bytes.data(), bytes.size());
}

class ManifestBuilder {
  public:
    ManifestBuilder(std::string command, std::uint64_t seed) : start_(clock::now()) {
        doc_["command"] = std::move(command);
        doc_["seed"] = seed;
        doc_["inputs"] = json::array();
        doc_["outputs"] = json::array();
    }

    void config(json resolved) { doc_["config"] = std::move(resolved); }

    void input(const fs::path& path) {
        doc_["inputs"].push_back({{"path", path.string()}, {"crc32", file_crc(path)}});
    }

    void output(const fs::path& path) {
        doc_["outputs"].push_back({{"path", path.string()}, {"crc32", file_crc(path)}});
    }

    void write(const fs::path& path) {
        const auto elapsed = std::chrono::duration<double>(clock::now() - start_).count();
        doc_["duration_seconds"] = elapsed;
        mod::atomic_write_text(path, doc_.dump(2) + "\n");
        log_info("manifest written to " + path.string());
    }

  private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
    json doc_;
};

json train_config_json(const mod::TrainConfig& cfg) {
    return {{"batch_size", cfg.batch_size},
            {"base_lr", double(cfg.base_lr)},
            {"lr_decay", double(cfg.lr_decay)},
            {"decay_every_examples", cfg.decay_every_examples},
            {"max_steps", cfg.max_steps},
            {"epochs", cfg.epochs},
            {"l2_penalty", double(cfg.l2_penalty)},
            {"dropout_rate", double(cfg.dropout_rate)},
            {"temperature", double(cfg.temperature)},
            {"seed", cfg.seed},
            {"workers", cfg.workers}};
}

std::map<std::string, std::string> load_kv_file(const std::string& path) {
    if (path.empty()) return {};
    return mod::parse_kv_config(mod::read_text_file(path));
}

// ---------------------------------------------------------------------------
// Shared flag bundles. Precedence: preset defaults < config file < flags.
// ---------------------------------------------------------------------------

struct TrainFlags {
    std::string preset = "tiny";
    std::string config_path;
    mod::TrainConfig cfg;

    CLI::Option* opt_batch = nullptr;
    CLI::Option* opt_lr = nullptr;
    CLI::Option* opt_decay = nullptr;
    CLI::Option* opt_decay_every = nullptr;
    CLI::Option* opt_steps = nullptr;
    CLI::Option* opt_epochs = nullptr;
    CLI::Option* opt_l2 = nullptr;
    CLI::Option* opt_dropout = nullptr;
    CLI::Option* opt_temp = nullptr;
    CLI::Option* opt_seed = nullptr;
    CLI::Option* opt_workers = nullptr;

    std::size_t batch = 0;
    double lr = 0, decay = 0, l2 = 0, dropout = 0, temp = 0;
    std::uint64_t decay_every = 0, steps = 0, epochs = 0, seed = 0;
    std::size_t workers = 0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "Configuration preset: tiny, desk or paper");
        cmd->add_option("--config", config_path, "key=value config file overriding the preset");
        opt_batch = cmd->add_option("--batch-size", batch, "Examples per optimizer step");
        opt_lr = cmd->add_option("--base-lr", lr, "Initial Adam learning rate");
        opt_decay = cmd->add_option("--lr-decay", decay, "Stepped LR decay factor in (0,1]");
        opt_decay_every =
            cmd->add_option("--decay-every", decay_every, "Examples between LR decay steps");
        opt_steps = cmd->add_option("--max-steps", steps, "Stop after this many steps (0 = off)");
        opt_epochs = cmd->add_option("--epochs", epochs, "Epoch budget (0 = bounded by steps)");
        opt_l2 = cmd->add_option("--l2", l2, "L2 penalty on weights");
        opt_dropout = cmd->add_option("--dropout", dropout, "Inverted-dropout rate in [0,1)");
        opt_temp = cmd->add_option("--temperature", temp, "Distillation temperature (0 = off)");
        opt_seed = cmd->add_option("--seed", seed, "Run seed");
        opt_workers = cmd->add_option("--workers", workers, "Model-parallel worker threads");
    }

    // base: the preset's pretrain or finetune regime.
    mod::TrainConfig resolve(const mod::TrainConfig& base) {
        cfg = base;
        mod::apply_train_config(load_kv_file(config_path), cfg);
        if (opt_batch->count()) cfg.batch_size = batch;
        if (opt_lr->count()) cfg.base_lr = real(lr);
        if (opt_decay->count()) cfg.lr_decay = real(decay);
        if (opt_decay_every->count()) cfg.decay_every_examples = decay_every;
        if (opt_steps->count()) cfg.max_steps = steps;
        if (opt_epochs->count()) cfg.epochs = epochs;
        if (opt_l2->count()) cfg.l2_penalty = real(l2);
        if (opt_dropout->count()) cfg.dropout_rate = real(dropout);
        if (opt_temp->count()) cfg.temperature = real(temp);
        if (opt_seed->count()) cfg.seed = seed;
        if (opt_workers->count()) cfg.workers = workers;
        cfg.validate();
        return cfg;
    }
};

mod::ModelKind parse_kind(const std::string& name) {
    if (name == "single") return mod::ModelKind::kSingle;
    if (name == "mix") return mod::ModelKind::kMix;
    if (name == "mod") return mod::ModelKind::kMod;
    throw mod::ConfigError("unknown model kind '" + name + "' (expected single, mix or mod)");
}

json topology_json(const mod::ModelTopology& topo) {
    return {{"kind", mod::model_kind_name(topo.kind)},
            {"inner_count", topo.tree.inner_count},
            {"leaves_per_inner", topo.tree.leaves_per_inner},
            {"temperature", double(topo.temperature)},
            {"learnable_mix_weights", topo.learnable_mix_weights},
            {"hidden", topo.hyper.hidden},
            {"class_count", topo.hyper.class_count},
            {"visual",
             {{"input_dim", topo.hyper.visual.input_dim},
              {"expansion", topo.hyper.visual.expansion},
              {"groups", topo.hyper.visual.groups},
              {"clusters", topo.hyper.visual.clusters}}},
            {"audio",
             {{"input_dim", topo.hyper.audio.input_dim},
              {"expansion", topo.hyper.audio.expansion},
              {"groups", topo.hyper.audio.groups},
              {"clusters", topo.hyper.audio.clusters}}}};
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& preset_name, const std::string& spec_path,
                 const std::string& out_dir, std::uint64_t seed, bool seed_set) {
    auto spec = mod::make_preset(preset_name).corpus;
    mod::apply_corpus_config(load_kv_file(spec_path), spec);
    if (seed_set) spec.seed = seed;

    ManifestBuilder manifest("gen-data", spec.seed);
    manifest.config({{"preset", preset_name},
                     {"num_videos", spec.num_videos},
                     {"class_count", spec.class_count},
                     {"frames_min", spec.frames_min},
                     {"frames_max", spec.frames_max},
                     {"visual_dim", spec.visual_dim},
                     {"audio_dim", spec.audio_dim},
                     {"noise_rate", spec.noise_rate},
                     {"signature_strength", spec.signature_strength},
                     {"train_frac", spec.train_frac},
                     {"finetune_frac", spec.finetune_frac}});

    log_info("generating corpus: " + std::to_string(spec.num_videos) + " videos, " +
             std::to_string(spec.class_count) + " classes");
    const auto gen = mod::generate_corpus(spec);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    mod::write_corpus(dir / "train.modc", gen.train);
    mod::write_corpus(dir / "finetune.modc", gen.finetune);
    mod::write_corpus(dir / "eval.modc", gen.eval);
    mod::write_segment_labels(dir / "finetune_labels.csv", gen.finetune_labels);
    mod::write_segment_labels(dir / "eval_labels.csv", gen.eval_labels);
    for (const char* name :
         {"train.modc", "finetune.modc", "eval.modc", "finetune_labels.csv", "eval_labels.csv"})
        manifest.output(dir / name);
    manifest.write(dir / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// pretrain / finetune
// ---------------------------------------------------------------------------

mod::VideoModelHyper hyper_for_corpus(const std::string& preset_name,
                                      const mod::CorpusMeta& meta) {
    auto hyper = mod::make_preset(preset_name).model;
    hyper.visual.input_dim = meta.visual_dim;
    hyper.audio.input_dim = meta.audio_dim;
    hyper.class_count = meta.class_count;
    return hyper;
}

int cmd_pretrain(TrainFlags& flags, const std::string& data_dir, const std::string& out_path,
                 const std::string& model_kind, std::size_t inner, std::size_t leaves,
                 bool learnable_mix, const std::string& log_path) {
    const auto cfg = flags.resolve(mod::make_preset(flags.preset).pretrain);
    const fs::path train_path = fs::path(data_dir) / "train.modc";
    const auto corpus = mod::read_corpus(train_path);

    mod::ModelTopology topo;
    topo.kind = parse_kind(model_kind);
    topo.tree.inner_count = inner;
    topo.tree.leaves_per_inner = leaves;
    topo.hyper = hyper_for_corpus(flags.preset, corpus.meta);
    topo.temperature = cfg.temperature >= 0 ? cfg.temperature : real{0};
    topo.learnable_mix_weights = learnable_mix;

    ManifestBuilder manifest("pretrain", cfg.seed);
    manifest.config({{"preset", flags.preset},
                     {"model", model_kind},
                     {"topology", topology_json(topo)},
                     {"train", train_config_json(cfg)}});
    manifest.input(train_path);

    auto st = mod::TrainerState::create(topo, cfg.seed);
    log_info("pretraining " + std::string(mod::model_kind_name(topo.kind)) + " model (" +
             std::to_string(st.leaves.size()) + " leaves) on " +
             std::to_string(corpus.records.size()) + " videos");
    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path, std::ios::trunc);
        if (!log_file) throw mod::FormatError("cannot open training log: " + log_path);
    }
    const auto result = mod::pretrain(st, corpus, cfg, log_file.is_open() ? &log_file : nullptr);
    log_info("pretrain done: " + std::to_string(result.steps_run) + " steps, loss " +
             std::to_string(double(result.first_loss)) + " -> " +
             std::to_string(double(result.last_loss)));

    mod::save_checkpoint(out_path, st);
    manifest.output(out_path);
    if (!log_path.empty()) {
        log_file.close();
        manifest.output(log_path);
    }
    manifest.write(out_path + ".manifest.json");
    return 0;
}

int cmd_finetune(TrainFlags& flags, const std::string& checkpoint_path,
                 const std::string& data_dir, const std::string& out_path,
                 const std::string& log_path) {
    const auto cfg = flags.resolve(mod::make_preset(flags.preset).finetune);
    const fs::path corpus_path = fs::path(data_dir) / "finetune.modc";
    const fs::path labels_path = fs::path(data_dir) / "finetune_labels.csv";
    const auto corpus = mod::read_corpus(corpus_path);
    const auto labels = mod::read_segment_labels(labels_path);

    auto st = mod::load_checkpoint(checkpoint_path);
    ManifestBuilder manifest("finetune", cfg.seed);
    manifest.config({{"preset", flags.preset},
                     {"topology", topology_json(st.topo)},
                     {"train", train_config_json(cfg)}});
    manifest.input(checkpoint_path);
    manifest.input(corpus_path);
    manifest.input(labels_path);

    log_info("finetuning on " + std::to_string(labels.size()) + " segment labels");
    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path, std::ios::trunc);
        if (!log_file) throw mod::FormatError("cannot open training log: " + log_path);
    }
    const auto result =
        mod::finetune(st, corpus, labels, cfg, log_file.is_open() ? &log_file : nullptr);
    log_info("finetune done: " + std::to_string(result.steps_run) + " steps, loss " +
             std::to_string(double(result.first_loss)) + " -> " +
             std::to_string(double(result.last_loss)));

    mod::save_checkpoint(out_path, st);
    manifest.output(out_path);
    if (!log_path.empty()) {
        log_file.close();
        manifest.output(log_path);
    }
    manifest.write(out_path + ".manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// localize
// ---------------------------------------------------------------------------

int cmd_localize(const std::string& video_ckpt, const std::string& segment_ckpt,
                 const std::string& corpus_path, const std::string& out_path,
                 std::size_t candidates, std::size_t top_k, std::size_t stride, bool dummy) {
    auto video_model = mod::load_checkpoint(video_ckpt);
    auto segment_model = dummy ? video_model : mod::load_checkpoint(segment_ckpt);
    const auto corpus = mod::read_corpus(corpus_path);

    mod::PipelineConfig cfg;
    cfg.candidate_count = std::min(candidates, std::size_t(video_model.topo.hyper.class_count));
    if (cfg.candidate_count != candidates)
        log_info("candidate count clamped to class count " +
                 std::to_string(cfg.candidate_count));
    cfg.top_k = top_k;
    cfg.stride = stride;
    cfg.dummy = dummy;

    ManifestBuilder manifest("localize", 0);
    manifest.config({{"candidates", cfg.candidate_count},
                     {"top_k", cfg.top_k},
                     {"stride", cfg.stride},
                     {"dummy", cfg.dummy},
                     {"vid_exponent", double(cfg.value.vid_exponent)},
                     {"seg_exponent", double(cfg.value.seg_exponent)}});
    manifest.input(video_ckpt);
    if (!dummy) manifest.input(segment_ckpt);
    manifest.input(corpus_path);

    log_info("localizing over " + std::to_string(corpus.records.size()) + " videos");
    const auto result = mod::run_pipeline(video_model, segment_model, corpus, cfg);
    mod::write_rankings_csv(out_path, result);
    std::size_t total = 0;
    for (const auto& list : result.per_class) total += list.size();
    log_info("wrote " + std::to_string(total) + " ranked segments across " +
             std::to_string(result.per_class.size()) + " classes");
    manifest.output(out_path);
    manifest.write(out_path + ".manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const std::string& rankings_path, const std::string& labels_path,
                 std::size_t class_count, std::size_t k_cutoff, const std::string& out_path,
                 bool plot, const std::string& train_log_path, const std::string& plot_out,
                 const std::string& plot_node) {
    ManifestBuilder manifest("evaluate", 0);
    json metrics;

    if (!rankings_path.empty()) {
        const auto rankings = mod::read_rankings_csv(rankings_path);
        const auto truth = mod::read_segment_labels(labels_path);
        if (class_count == 0)
            for (const auto& l : truth) class_count = std::max(class_count, std::size_t(l.class_id) + 1);
        const auto report = mod::evaluate_rankings(rankings, truth, class_count, k_cutoff);
        metrics["map"] = report.map;
        metrics["per_class"] = json::array();
        for (std::size_t c = 0; c < class_count; ++c)
            metrics["per_class"].push_back({{"class_id", c},
                                            {"ap", report.per_class_ap[c]},
                                            {"n_positive", report.per_class_positives[c]}});
        manifest.input(rankings_path);
        manifest.input(labels_path);
        manifest.config({{"class_count", class_count}, {"k", k_cutoff}});
        std::cout << "map " << report.map << "\n";
    }

    if (plot) {
        if (train_log_path.empty() || plot_out.empty())
            throw mod::ConfigError("--plot requires --train-log and --plot-out");
        const auto svg =
            mod::render_distill_plot_svg(mod::read_text_file(train_log_path), plot_node);
        mod::atomic_write_text(plot_out, svg);
        manifest.input(train_log_path);
        manifest.output(plot_out);
        log_info("distillation trajectory plot written to " + plot_out);
    }

    if (metrics.is_null() && !plot)
        throw mod::ConfigError("evaluate needs --rankings/--labels and/or --plot");

    if (!metrics.is_null()) {
        const std::string text = metrics.dump(2) + "\n";
        if (!out_path.empty()) {
            mod::atomic_write_text(out_path, text);
            manifest.output(out_path);
        } else {
            std::cout << text;
        }
    }
    const std::string manifest_path = !out_path.empty() ? out_path + ".manifest.json"
                                      : !plot_out.empty()
                                          ? plot_out + ".manifest.json"
                                          : rankings_path + ".eval.manifest.json";
    manifest.write(manifest_path);
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct FlatModel {
    mod::VideoModelParams* model;

    std::vector<real> flatten() {
        std::vector<real> out;
        model->for_each_tensor("", [&](const std::string&, mod::Matrix& t) {
            out.insert(out.end(), t.data.begin(), t.data.end());
        });
        return out;
    }

    void unflatten(const std::vector<real>& v) {
        std::size_t at = 0;
        model->for_each_tensor("", [&](const std::string&, mod::Matrix& t) {
            std::copy(v.begin() + at, v.begin() + at + t.data.size(), t.data.begin());
            at += t.data.size();
        });
    }
};

int cmd_gradcheck(const std::string& preset_name, int seeds, double tolerance) {
    const auto preset = mod::make_preset(preset_name);
    double worst_model = 0, worst_mix = 0, worst_mod = 0;

    for (int s = 1; s <= seeds; ++s) {
        mod::Rng rng{static_cast<std::uint64_t>(s)};

        // End-to-end video model: BCE loss over every parameter tensor.
        mod::VideoModelHyper hyper = preset.model;
        mod::VideoModelParams model(hyper);
        model.init(rng);
        mod::Matrix visual(6, hyper.visual.input_dim);
        mod::Matrix audio(6, hyper.audio.input_dim);
        for (real& v : visual.data) v = real(rng.normal());
        for (real& v : audio.data) v = real(rng.normal());
        std::vector<real> y(hyper.class_count);
        for (real& v : y) v = rng.below(2) ? real{1} : real{0};

        FlatModel flat{&model};
        const auto loss_at = [&](const std::vector<real>& p) {
            flat.unflatten(p);
            mod::Rng unused;
            mod::VideoModelWorkspace ws;
            const auto z =
                mod::video_model_forward(visual, audio, model, mod::RunMode::kEval, unused, ws);
            return mod::bce_with_logits(y, z);
        };
        const auto params = flat.flatten();
        mod::Rng unused;
        mod::VideoModelWorkspace ws;
        const auto z =
            mod::video_model_forward(visual, audio, model, mod::RunMode::kEval, unused, ws);
        auto grads = mod::video_model_backward(mod::bce_with_logits_grad(y, z), ws, model);
        std::vector<real> analytic;
        grads.for_each_tensor("", [&](const std::string&, mod::Matrix& t) {
            analytic.insert(analytic.end(), t.data.begin(), t.data.end());
        });
        const double err_model = double(mod::finite_diff_gradcheck(loss_at, params, analytic));
        flat.unflatten(params);
        worst_model = std::max(worst_model, err_model);
        log_debug("seed " + std::to_string(s) + " model rel err " + std::to_string(err_model));

        // Mixture loss over child logits.
        const std::size_t n = 4, m = 3;
        std::vector<real> ym(n);
        for (real& v : ym) v = rng.below(2) ? real{1} : real{0};
        std::vector<std::vector<real>> children(m, std::vector<real>(n));
        for (auto& c : children)
            for (real& v : c) v = real(2 * rng.normal());
        const std::vector<real> w(m, real{1} / real(m));
        const real T = real(8);
        std::vector<real> flat_children;
        for (const auto& c : children)
            flat_children.insert(flat_children.end(), c.begin(), c.end());
        const auto mix_loss_at = [&](const std::vector<real>& p) {
            std::vector<std::vector<real>> cs(m);
            for (std::size_t i = 0; i < m; ++i)
                cs[i].assign(p.begin() + i * n, p.begin() + (i + 1) * n);
            return mod::mixture_loss(ym, cs, w, T).total;
        };
        const auto mix_grads = mod::mixture_loss_grad(ym, children, w, T);
        std::vector<real> mix_analytic;
        for (const auto& g : mix_grads) mix_analytic.insert(mix_analytic.end(), g.begin(), g.end());
        worst_mix = std::max(
            worst_mix, double(mod::finite_diff_gradcheck(mix_loss_at, flat_children, mix_analytic)));

        // Layered loss over leaf logits.
        mod::MixtureTreeShape shape;
        std::vector<std::vector<real>> leaves(shape.leaf_count(), std::vector<real>(n));
        for (auto& l : leaves)
            for (real& v : l) v = real(2 * rng.normal());
        std::vector<real> flat_leaves;
        for (const auto& l : leaves) flat_leaves.insert(flat_leaves.end(), l.begin(), l.end());
        const auto mod_loss_at = [&](const std::vector<real>& p) {
            std::vector<std::vector<real>> ls(shape.leaf_count());
            for (std::size_t i = 0; i < ls.size(); ++i)
                ls[i].assign(p.begin() + i * n, p.begin() + (i + 1) * n);
            return mod::mod_loss(ym, ls, shape, T).total;
        };
        const auto mod_grads = mod::mod_loss_grad(ym, leaves, shape, T);
        std::vector<real> mod_analytic;
        for (const auto& g : mod_grads) mod_analytic.insert(mod_analytic.end(), g.begin(), g.end());
        worst_mod = std::max(
            worst_mod, double(mod::finite_diff_gradcheck(mod_loss_at, flat_leaves, mod_analytic)));
    }

    std::cout << "gradcheck model max rel err " << worst_model << "\n"
              << "gradcheck mixture loss max rel err " << worst_mix << "\n"
              << "gradcheck layered loss max rel err " << worst_mod << "\n";
    const bool pass = worst_model < tolerance && worst_mix < tolerance && worst_mod < tolerance;
    std::cout << (pass ? "PASS" : "FAIL") << " (tolerance " << tolerance << ", " << seeds
              << " seeds)\n";
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

int cmd_inspect(const std::string& checkpoint_path) {
    auto st = mod::load_checkpoint(checkpoint_path);
    const auto& topo = st.topo;
    std::cout << "checkpoint " << checkpoint_path << "\n"
              << "  kind: " << mod::model_kind_name(topo.kind) << "\n"
              << "  tree: " << topo.tree.inner_count << " inner x " << topo.tree.leaves_per_inner
              << " leaves (" << st.leaves.size() << " leaf models)\n"
              << "  temperature: " << double(topo.temperature) << "\n"
              << "  learnable_mix_weights: " << (topo.learnable_mix_weights ? "yes" : "no") << "\n"
              << "  hidden: " << topo.hyper.hidden << ", classes: " << topo.hyper.class_count
              << "\n"
              << "  visual pool: dim " << topo.hyper.visual.input_dim << ", x"
              << topo.hyper.visual.expansion << ", " << topo.hyper.visual.groups << " groups, "
              << topo.hyper.visual.clusters << " clusters\n"
              << "  audio pool: dim " << topo.hyper.audio.input_dim << ", x"
              << topo.hyper.audio.expansion << ", " << topo.hyper.audio.groups << " groups, "
              << topo.hyper.audio.clusters << " clusters\n"
              << "  step: " << st.step << ", examples_seen: " << st.examples_seen << "\n";
    if (!st.mix_child_theta.data.empty()) {
        std::cout << "  mixing weights:";
        for (std::size_t n = 0; n < st.all_child_weights().size(); ++n) {
            std::cout << " [";
            const auto w = st.child_weights(n);
            for (std::size_t i = 0; i < w.size(); ++i)
                std::cout << (i ? " " : "") << double(w[i]);
            std::cout << "]";
        }
        std::cout << "\n";
    }
    for (std::size_t l = 0; l < st.leaves.size(); ++l) {
        std::cout << "  leaf " << l << " tensor norms:\n";
        st.leaves[l].for_each_tensor("", [&](const std::string& name, mod::Matrix& t) {
            std::cout << "    " << name << " " << t.shape_str() << " |.|^2 = "
                      << double(t.squared_norm()) << "\n";
        });
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MOD video concept localization toolchain"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic labeled corpus");
    std::string gen_preset = "tiny", gen_spec, gen_out;
    std::uint64_t gen_seed = 0;
    gen->add_option("--preset", gen_preset, "Corpus preset: tiny, desk or paper");
    gen->add_option("--spec", gen_spec, "key=value corpus spec file overriding the preset");
    gen->add_option("--out", gen_out, "Output directory")->required();
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Corpus seed");

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "Train on noisy video-level labels");
    TrainFlags pre_flags;
    pre_flags.add_to(pre);
    std::string pre_data, pre_out, pre_model = "single", pre_log;
    std::size_t pre_inner = 4, pre_leaves = 3;
    bool pre_learnable = false;
    pre->add_option("--data", pre_data, "Corpus directory (expects train.modc)")->required();
    pre->add_option("--out", pre_out, "Output checkpoint path")->required();
    pre->add_option("--model", pre_model, "Model kind: single, mix or mod");
    pre->add_option("--inner", pre_inner, "Inner mixtures (mod only)");
    pre->add_option("--leaves", pre_leaves, "Leaves per mixture (mix/mod)");
    pre->add_flag("--learnable-mix", pre_learnable, "Train the mixing weights");
    pre->add_option("--log", pre_log, "Write per-step loss diagnostics CSV here");

    // finetune
    auto* fin = app.add_subcommand("finetune", "Continue training on verified segment labels");
    TrainFlags fin_flags;
    fin_flags.add_to(fin);
    std::string fin_ckpt, fin_data, fin_out, fin_log;
    fin->add_option("--checkpoint", fin_ckpt, "Pretrained checkpoint")->required();
    fin->add_option("--data", fin_data,
                    "Corpus directory (expects finetune.modc + finetune_labels.csv)")
        ->required();
    fin->add_option("--out", fin_out, "Output checkpoint path")->required();
    fin->add_option("--log", fin_log, "Write per-step loss diagnostics CSV here");

    // localize
    auto* loc = app.add_subcommand("localize", "Rank candidate segments per class");
    std::string loc_video, loc_segment, loc_data, loc_out;
    std::size_t loc_cands = 20, loc_topk = 10000, loc_stride = 5;
    bool loc_dummy = false;
    loc->add_option("--video-checkpoint", loc_video, "Video-level model")->required();
    loc->add_option("--segment-checkpoint", loc_segment, "Segment-level model");
    loc->add_option("--data", loc_data, "Evaluation corpus (.modc)")->required();
    loc->add_option("--out", loc_out, "Rankings CSV path")->required();
    loc->add_option("--candidates", loc_cands, "Top classes scored per video");
    loc->add_option("--top-k", loc_topk, "Retained segments per class");
    loc->add_option("--stride", loc_stride, "Window stride in frames");
    loc->add_flag("--dummy", loc_dummy, "Copy video scores to every window (no segment model)");

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "Score rankings with MAP@K and plot diagnostics");
    std::string eva_rankings, eva_labels, eva_out, eva_train_log, eva_plot_out,
        eva_node = "root";
    std::size_t eva_classes = 0, eva_k = 100000;
    bool eva_plot = false;
    eva->add_option("--rankings", eva_rankings, "Rankings CSV from localize");
    eva->add_option("--labels", eva_labels, "Ground-truth segment label CSV");
    eva->add_option("--classes", eva_classes, "Class count (default: inferred from labels)");
    eva->add_option("--k", eva_k, "Rank cutoff K");
    eva->add_option("--out", eva_out, "Metrics JSON path (default: stdout)");
    eva->add_flag("--plot", eva_plot, "Render the distillation-loss trajectory as SVG");
    eva->add_option("--train-log", eva_train_log, "Training diagnostics CSV (for --plot)");
    eva->add_option("--plot-out", eva_plot_out, "SVG output path (for --plot)");
    eva->add_option("--node", eva_node, "Tree node to plot (root, m0, ...)");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
    std::string gc_preset = "tiny";
    int gc_seeds = 20;
    double gc_tol = 1e-4;
    gc->add_option("--preset", gc_preset, "Model shape preset");
    gc->add_option("--seeds", gc_seeds, "Random instances per check");
    gc->add_option("--tolerance", gc_tol, "Max allowed relative error");

    // inspect
    auto* ins = app.add_subcommand("inspect", "Summarize a checkpoint");
    std::string ins_ckpt;
    ins->add_option("--checkpoint", ins_ckpt, "Checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_preset, gen_spec, gen_out, gen_seed,
                                gen_seed_opt->count() > 0);
        if (pre->parsed())
            return cmd_pretrain(pre_flags, pre_data, pre_out, pre_model, pre_inner, pre_leaves,
                                pre_learnable, pre_log);
        if (fin->parsed()) return cmd_finetune(fin_flags, fin_ckpt, fin_data, fin_out, fin_log);
        if (loc->parsed()) {
            if (!loc_dummy && loc_segment.empty())
                throw mod::ConfigError("--segment-checkpoint is required unless --dummy is set");
            return cmd_localize(loc_video, loc_segment, loc_data, loc_out, loc_cands, loc_topk,
                                loc_stride, loc_dummy);
        }
        if (eva->parsed()) {
            if (!eva_rankings.empty() && eva_labels.empty())
                throw mod::ConfigError("--rankings requires --labels");
            return cmd_evaluate(eva_rankings, eva_labels, eva_classes, eva_k, eva_out, eva_plot,
                                eva_train_log, eva_plot_out, eva_node);
        }
        if (gc->parsed()) return cmd_gradcheck(gc_preset, gc_seeds, gc_tol);
        if (ins->parsed()) return cmd_inspect(ins_ckpt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
