#ifndef MOD_PRESETS_HPP
#define MOD_PRESETS_HPP

#include <map>
#include <sstream>
#include <string>

#include "mod/dataset.hpp"
#include "mod/trainer.hpp"

namespace mod {

struct Preset {
    std::string name;
    CorpusSpec corpus;
    VideoModelHyper model;
    TrainConfig pretrain;
    TrainConfig finetune;
};

// tiny: seconds-scale smoke runs and gradient checks.
// desk: the laptop-scale experiment corpus (50 classes, ~2000 videos).
// paper: Table-1 shapes (8G, 128K, X2, 2048H, 1000 classes) for shape
//        validation only; training it is out of scope for CI.
inline Preset make_preset(const std::string& name) {
    Preset p;
    p.name = name;
    if (name == "tiny") {
        p.corpus = {.num_videos = 60,
                    .class_count = 10,
                    .frames_min = 10,
                    .frames_max = 15,
                    .visual_dim = 16,
                    .audio_dim = 4,
                    .noise_rate = 0.05,
                    .signature_strength = 3.0,
                    .seed = 1};
        p.model.visual = {.input_dim = 16, .expansion = 2, .groups = 2, .clusters = 4};
        p.model.audio = {.input_dim = 4, .expansion = 2, .groups = 2, .clusters = 4};
        p.model.hidden = 32;
        p.model.class_count = 10;
    } else if (name == "desk") {
        p.corpus = {.num_videos = 2000,
                    .class_count = 50,
                    .frames_min = 10,
                    .frames_max = 20,
                    .visual_dim = 64,
                    .audio_dim = 8,
                    .noise_rate = 0.05,
                    .signature_strength = 2.5,
                    .seed = 1};
        p.model.visual = {.input_dim = 64, .expansion = 2, .groups = 4, .clusters = 16};
        p.model.audio = {.input_dim = 8, .expansion = 2, .groups = 4, .clusters = 16};
        p.model.hidden = 128;
        p.model.class_count = 50;
    } else if (name == "paper") {
        p.corpus = {.num_videos = 100,
                    .class_count = 1000,
                    .frames_min = 60,
                    .frames_max = 300,
                    .visual_dim = 1024,
                    .audio_dim = 128,
                    .noise_rate = 0.2,
                    .signature_strength = 1.0,
                    .seed = 1};
        p.model.visual = {.input_dim = 1024, .expansion = 2, .groups = 8, .clusters = 128};
        p.model.audio = {.input_dim = 128, .expansion = 2, .groups = 8, .clusters = 128};
        p.model.hidden = 2048;
        p.model.class_count = 1000;
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected tiny, desk or paper)");
    }

    // Desk-scale regimes keep the published ratios with counts divided by
    // 1000: decay every 1k examples instead of 1M, 500 pretrain steps
    // instead of 500k. The paper preset keeps the published counts.
    const bool full = name == "paper";
    p.pretrain.base_lr = full ? real(0.0002) : real(0.001);
    p.pretrain.lr_decay = real(0.8);
    p.pretrain.decay_every_examples = full ? 1000000 : 1000;
    p.pretrain.batch_size = full ? 80 : 16;
    p.pretrain.max_steps = full ? 500000 : (name == "desk" ? 1500 : 500);
    p.pretrain.epochs = 0;
    p.pretrain.dropout_rate = real(0.5);
    p.pretrain.l2_penalty = real(1e-5);
    p.pretrain.temperature = 0;

    p.finetune.base_lr = full ? real(0.0002) : real(0.001);
    p.finetune.lr_decay = real(0.8);
    p.finetune.decay_every_examples = full ? 1000000 : 1000;
    p.finetune.batch_size = full ? 512 : 16;
    p.finetune.epochs = 10;
    p.finetune.max_steps = 0;
    p.finetune.dropout_rate = real(0.75);
    p.finetune.l2_penalty = real(1e-4);
    p.finetune.temperature = 0;
    return p;
}

// Flat key=value config files; '#' starts a comment, blank lines ignored.
inline std::map<std::string, std::string> parse_kv_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " is not key=value");
        kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return kv;
}

inline void apply_corpus_config(const std::map<std::string, std::string>& kv, CorpusSpec& spec) {
    for (const auto& [key, value] : kv) {
        if (key == "num_videos") spec.num_videos = std::stoull(value);
        else if (key == "class_count") spec.class_count = std::stoull(value);
        else if (key == "frames_min") spec.frames_min = std::stoull(value);
        else if (key == "frames_max") spec.frames_max = std::stoull(value);
        else if (key == "visual_dim") spec.visual_dim = std::stoull(value);
        else if (key == "audio_dim") spec.audio_dim = std::stoull(value);
        else if (key == "noise_rate") spec.noise_rate = std::stod(value);
        else if (key == "signature_strength") spec.signature_strength = std::stod(value);
        else if (key == "seed") spec.seed = std::stoull(value);
        else if (key == "train_frac") spec.train_frac = std::stod(value);
        else if (key == "finetune_frac") spec.finetune_frac = std::stod(value);
        else throw ConfigError("unknown corpus config key '" + key + "'");
    }
}

inline void apply_train_config(const std::map<std::string, std::string>& kv, TrainConfig& cfg) {
    for (const auto& [key, value] : kv) {
        if (key == "batch_size") cfg.batch_size = std::stoull(value);
        else if (key == "base_lr") cfg.base_lr = static_cast<real>(std::stod(value));
        else if (key == "lr_decay") cfg.lr_decay = static_cast<real>(std::stod(value));
        else if (key == "decay_every_examples") cfg.decay_every_examples = std::stoull(value);
        else if (key == "max_steps") cfg.max_steps = std::stoull(value);
        else if (key == "epochs") cfg.epochs = std::stoull(value);
        else if (key == "l2_penalty") cfg.l2_penalty = static_cast<real>(std::stod(value));
        else if (key == "dropout_rate") cfg.dropout_rate = static_cast<real>(std::stod(value));
        else if (key == "temperature") cfg.temperature = static_cast<real>(std::stod(value));
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "workers") cfg.workers = std::stoull(value);
        else throw ConfigError("unknown train config key '" + key + "'");
    }
}

}  // namespace mod

#endif  // MOD_PRESETS_HPP
