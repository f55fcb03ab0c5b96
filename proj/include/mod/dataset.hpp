#ifndef MOD_DATASET_HPP
#define MOD_DATASET_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mod/io.hpp"
#include "mod/matrix.hpp"

namespace mod {

// One video: per-frame visual+audio features (1 frame = 1 second) plus the
// noisy video-level label set.
struct FrameFeatureRecord {
    std::string video_id;
    Matrix visual;  // M x N_v
    Matrix audio;   // M x N_a
    std::vector<std::uint32_t> video_labels;

    std::size_t frame_count() const { return visual.rows; }
};

// Human-verified stand-in: exact label for one 5-frame window.
struct SegmentLabel {
    std::string video_id;
    std::uint32_t start_frame = 0;
    std::uint32_t class_id = 0;
    bool positive = false;
};

struct CorpusSpec {
    std::size_t num_videos = 100;
    std::size_t class_count = 10;
    std::size_t frames_min = 10;
    std::size_t frames_max = 20;
    std::size_t visual_dim = 64;
    std::size_t audio_dim = 8;
    double noise_rate = 0.0;
    double signature_strength = 1.0;
    std::uint64_t seed = 1;
    double train_frac = 0.7;
    double finetune_frac = 0.2;

    void validate() const {
        if (class_count < 2) throw ConfigError("class_count must be >= 2");
        if (noise_rate < 0.0 || noise_rate >= 1.0) throw ConfigError("noise_rate must be in [0,1)");
        if (frames_min < 1 || frames_max < frames_min) throw ConfigError("bad frames_range");
        if (visual_dim == 0 || audio_dim == 0) throw ConfigError("feature dims must be positive");
        if (num_videos == 0) throw ConfigError("num_videos must be positive");
        if (train_frac <= 0.0 || finetune_frac <= 0.0 || train_frac + finetune_frac >= 1.0)
            throw ConfigError("split fractions must be positive and sum below 1");
    }
};

struct CorpusMeta {
    std::uint32_t class_count = 0;
    std::uint32_t visual_dim = 0;
    std::uint32_t audio_dim = 0;
};

struct Corpus {
    CorpusMeta meta;
    std::vector<FrameFeatureRecord> records;
};

struct GeneratedCorpus {
    Corpus train;     // video-level, noisy labels
    Corpus finetune;  // segment-labeled
    Corpus eval;      // held-out
    std::vector<SegmentLabel> finetune_labels;
    std::vector<SegmentLabel> eval_labels;
    // Per-class signature vectors, kept for generator sanity checks.
    Matrix visual_signatures;  // class_count x N_v
    Matrix audio_signatures;   // class_count x N_a
};

namespace detail {

inline real round_f32(double v) { return static_cast<real>(static_cast<float>(v)); }

inline Matrix draw_signatures(std::size_t classes, std::size_t dim, Rng& rng) {
    Matrix sig(classes, dim);
    for (real& v : sig.data) v = static_cast<real>(rng.normal());
    if (classes <= dim) {
        // Gram-Schmidt keeps the desk-scale task linearly separable.
        for (std::size_t c = 0; c < classes; ++c) {
            for (std::size_t p = 0; p < c; ++p) {
                real dot = 0;
                for (std::size_t j = 0; j < dim; ++j) dot += sig(c, j) * sig(p, j);
                for (std::size_t j = 0; j < dim; ++j) sig(c, j) -= dot * sig(p, j);
            }
            real norm = 0;
            for (std::size_t j = 0; j < dim; ++j) norm += sig(c, j) * sig(c, j);
            norm = std::sqrt(std::max(norm, real(1e-12)));
            for (std::size_t j = 0; j < dim; ++j) sig(c, j) /= norm;
        }
    }
    return sig;
}

}  // namespace detail

// Plants class signatures into aligned 5-frame windows; video labels are the
// (optionally corrupted) union of planted classes, segment labels are exact.
inline GeneratedCorpus generate_corpus(const CorpusSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    GeneratedCorpus out;
    out.visual_signatures = detail::draw_signatures(spec.class_count, spec.visual_dim, rng);
    out.audio_signatures = detail::draw_signatures(spec.class_count, spec.audio_dim, rng);

    CorpusMeta meta{static_cast<std::uint32_t>(spec.class_count),
                    static_cast<std::uint32_t>(spec.visual_dim),
                    static_cast<std::uint32_t>(spec.audio_dim)};
    out.train.meta = out.finetune.meta = out.eval.meta = meta;

    const std::size_t n_train =
        std::max<std::size_t>(1, static_cast<std::size_t>(spec.train_frac * spec.num_videos));
    const std::size_t n_finetune = std::max<std::size_t>(
        1, static_cast<std::size_t>(spec.finetune_frac * spec.num_videos));

    for (std::size_t v = 0; v < spec.num_videos; ++v) {
        FrameFeatureRecord rec;
        {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "v%06zu", v);
            rec.video_id = buf;
        }
        const std::size_t M =
            spec.frames_min + rng.below(spec.frames_max - spec.frames_min + 1);
        rec.visual = Matrix(M, spec.visual_dim);
        rec.audio = Matrix(M, spec.audio_dim);
        for (real& x : rec.visual.data) x = static_cast<real>(rng.normal());
        for (real& x : rec.audio.data) x = static_cast<real>(rng.normal());

        std::vector<std::uint32_t> starts;
        for (std::size_t s = 0; s + kSegmentFrames <= M; s += kSegmentFrames)
            starts.push_back(static_cast<std::uint32_t>(s));

        // Plant 1-2 classes, one aligned window each.
        std::set<std::uint32_t> planted_classes;
        std::map<std::uint32_t, std::uint32_t> planted_window;  // class -> start
        const std::size_t n_plant = 1 + rng.below(2);
        for (std::size_t p = 0; p < n_plant && !starts.empty(); ++p) {
            const auto c = static_cast<std::uint32_t>(rng.below(spec.class_count));
            if (!planted_classes.insert(c).second) continue;
            const auto s = starts[rng.below(starts.size())];
            planted_window[c] = s;
            for (std::size_t i = s; i < s + kSegmentFrames; ++i) {
                for (std::size_t j = 0; j < spec.visual_dim; ++j)
                    rec.visual(i, j) += static_cast<real>(spec.signature_strength) *
                                        out.visual_signatures(c, j);
                for (std::size_t j = 0; j < spec.audio_dim; ++j)
                    rec.audio(i, j) += static_cast<real>(spec.signature_strength) *
                                       out.audio_signatures(c, j);
            }
        }
        // Features are stored as f32 on disk; round once here so read(write(x)) == x.
        for (real& x : rec.visual.data) x = detail::round_f32(x);
        for (real& x : rec.audio.data) x = detail::round_f32(x);

        // Video-level labels: planted union, corrupted by drops/additions.
        std::set<std::uint32_t> labels(planted_classes);
        if (spec.noise_rate > 0.0) {
            for (auto it = labels.begin(); it != labels.end();) {
                if (rng.uniform() < spec.noise_rate)
                    it = labels.erase(it);
                else
                    ++it;
            }
            if (rng.uniform() < spec.noise_rate)
                labels.insert(static_cast<std::uint32_t>(rng.below(spec.class_count)));
        }
        rec.video_labels.assign(labels.begin(), labels.end());

        std::vector<SegmentLabel> seg_labels;
        for (std::uint32_t c : planted_classes)
            for (std::uint32_t s : starts)
                seg_labels.push_back({rec.video_id, s, c, planted_window.at(c) == s});

        Corpus* dest;
        std::vector<SegmentLabel>* label_dest = nullptr;
        if (v < n_train) {
            dest = &out.train;
        } else if (v < n_train + n_finetune) {
            dest = &out.finetune;
            label_dest = &out.finetune_labels;
        } else {
            dest = &out.eval;
            label_dest = &out.eval_labels;
        }
        dest->records.push_back(std::move(rec));
        if (label_dest)
            label_dest->insert(label_dest->end(), seg_labels.begin(), seg_labels.end());
    }
    if (out.eval.records.empty())
        throw ConfigError("num_videos too small to populate the held-out split");
    return out;
}

// ---------------------------------------------------------------------------
// Corpus file format (little-endian): magic "MODC", version u16=1,
// header {class_count u32, N_v u32, N_a u32, record_count u64}; per record:
// video_id u16 length-prefixed UTF-8, M u32, visual M*N_v f32 row-major,
// audio M*N_a f32 row-major, label_count u16 + class ids u32.
// ---------------------------------------------------------------------------

constexpr std::uint16_t kCorpusVersion = 1;

inline void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    BinaryWriter w(path);
    w.write_bytes("MODC", 4);
    w.write<std::uint16_t>(kCorpusVersion);
    w.write<std::uint32_t>(corpus.meta.class_count);
    w.write<std::uint32_t>(corpus.meta.visual_dim);
    w.write<std::uint32_t>(corpus.meta.audio_dim);
    w.write<std::uint64_t>(corpus.records.size());
    for (const auto& rec : corpus.records) {
        if (rec.visual.rows != rec.audio.rows)
            throw ShapeError("record " + rec.video_id + ": visual/audio frame counts differ");
        w.write_string_u16(rec.video_id);
        w.write<std::uint32_t>(static_cast<std::uint32_t>(rec.visual.rows));
        for (real v : rec.visual.data) w.write<float>(static_cast<float>(v));
        for (real v : rec.audio.data) w.write<float>(static_cast<float>(v));
        if (rec.video_labels.size() > 0xffff) throw FormatError("too many labels for u16 count");
        w.write<std::uint16_t>(static_cast<std::uint16_t>(rec.video_labels.size()));
        for (std::uint32_t c : rec.video_labels) w.write<std::uint32_t>(c);
    }
    w.close();
}

inline Corpus read_corpus(const std::filesystem::path& path) {
    BinaryReader r(path);
    char magic[4];
    r.read_bytes(magic, 4);
    if (std::memcmp(magic, "MODC", 4) != 0) r.fail("bad magic");
    const auto version = r.read<std::uint16_t>();
    if (version != kCorpusVersion)
        r.fail("unsupported corpus version " + std::to_string(version));
    Corpus corpus;
    corpus.meta.class_count = r.read<std::uint32_t>();
    corpus.meta.visual_dim = r.read<std::uint32_t>();
    corpus.meta.audio_dim = r.read<std::uint32_t>();
    const auto record_count = r.read<std::uint64_t>();
    corpus.records.reserve(record_count);
    for (std::uint64_t i = 0; i < record_count; ++i) {
        FrameFeatureRecord rec;
        rec.video_id = r.read_string_u16();
        const auto M = r.read<std::uint32_t>();
        if (M < 1) r.fail("record with zero frames");
        rec.visual = Matrix(M, corpus.meta.visual_dim);
        rec.audio = Matrix(M, corpus.meta.audio_dim);
        for (real& v : rec.visual.data) v = static_cast<real>(r.read<float>());
        for (real& v : rec.audio.data) v = static_cast<real>(r.read<float>());
        const auto label_count = r.read<std::uint16_t>();
        rec.video_labels.resize(label_count);
        for (auto& c : rec.video_labels) {
            c = r.read<std::uint32_t>();
            if (c >= corpus.meta.class_count) r.fail("label id out of range");
        }
        corpus.records.push_back(std::move(rec));
    }
    return corpus;
}

inline void write_segment_labels(const std::filesystem::path& path,
                                 const std::vector<SegmentLabel>& labels) {
    std::ostringstream csv;
    csv << "video_id,start_frame,class_id,positive\n";
    for (const auto& l : labels)
        csv << l.video_id << ',' << l.start_frame << ',' << l.class_id << ','
            << (l.positive ? 1 : 0) << '\n';
    atomic_write_text(path, csv.str());
}

inline std::vector<SegmentLabel> read_segment_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open segment label file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "video_id,start_frame,class_id,positive")
        throw FormatError("bad segment label header in " + path.string());
    std::vector<SegmentLabel> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        SegmentLabel l;
        std::string field;
        if (!std::getline(ss, l.video_id, ',')) throw FormatError("bad row: " + line);
        if (!std::getline(ss, field, ',')) throw FormatError("bad row: " + line);
        l.start_frame = static_cast<std::uint32_t>(std::stoul(field));
        if (!std::getline(ss, field, ',')) throw FormatError("bad row: " + line);
        l.class_id = static_cast<std::uint32_t>(std::stoul(field));
        if (!std::getline(ss, field, ',')) throw FormatError("bad row: " + line);
        if (field != "0" && field != "1") throw FormatError("bad positive flag: " + line);
        l.positive = field == "1";
        labels.push_back(std::move(l));
    }
    return labels;
}

struct SegmentWindow {
    std::uint32_t start_frame = 0;
    Matrix visual;  // kSegmentFrames x N_v
    Matrix audio;   // kSegmentFrames x N_a
};

inline std::vector<SegmentWindow> segment_windows(const FrameFeatureRecord& rec,
                                                  std::size_t stride = kSegmentFrames) {
    if (stride < 1) throw ConfigError("stride must be >= 1");
    std::vector<SegmentWindow> windows;
    const std::size_t M = rec.frame_count();
    for (std::size_t s = 0; s + kSegmentFrames <= M; s += stride) {
        SegmentWindow w;
        w.start_frame = static_cast<std::uint32_t>(s);
        w.visual = Matrix(kSegmentFrames, rec.visual.cols);
        w.audio = Matrix(kSegmentFrames, rec.audio.cols);
        for (std::size_t i = 0; i < kSegmentFrames; ++i) {
            for (std::size_t j = 0; j < rec.visual.cols; ++j)
                w.visual(i, j) = rec.visual(s + i, j);
            for (std::size_t j = 0; j < rec.audio.cols; ++j) w.audio(i, j) = rec.audio(s + i, j);
        }
        windows.push_back(std::move(w));
    }
    return windows;
}

}  // namespace mod

#endif  // MOD_DATASET_HPP
