#ifndef MOD_LOCALIZATION_HPP
#define MOD_LOCALIZATION_HPP

#include <algorithm>
#include <cstdio>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mod/dataset.hpp"
#include "mod/trainer.hpp"

namespace mod {

struct ValueModelConfig {
    real vid_exponent = real(0.05);
    real seg_exponent = real(0.95);

    void validate() const {
        if (vid_exponent < 0 || seg_exponent < 0)
            throw ConfigError("value model exponents must be >= 0");
    }
};

// Geometric fusion of video- and segment-level scores; 0^0 defined as 1.
inline real value_model(real p_vid, real p_seg, const ValueModelConfig& cfg = {}) {
    cfg.validate();
    if (p_vid < 0 || p_vid > 1 || p_seg < 0 || p_seg > 1)
        throw DomainError("value model inputs must be probabilities in [0,1]");
    return static_cast<real>(std::pow(double(p_vid), double(cfg.vid_exponent)) *
                             std::pow(double(p_seg), double(cfg.seg_exponent)));
}

// Top-n classes by video-level score, ties broken by ascending class id.
inline std::vector<std::uint32_t> candidate_topics(const std::vector<real>& video_logits,
                                                   std::size_t n = 20) {
    if (n > video_logits.size()) throw ConfigError("candidate count exceeds class count");
    std::vector<std::uint32_t> ids(video_logits.size());
    for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
    std::stable_sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (video_logits[a] != video_logits[b]) return video_logits[a] > video_logits[b];
        return a < b;
    });
    ids.resize(n);
    return ids;
}

// Fraction of positive (video, class) segment labels covered by that video's
// candidate list.
inline double candidate_recall(
    const std::map<std::string, std::vector<std::uint32_t>>& candidates_per_video,
    const std::vector<SegmentLabel>& segment_labels) {
    std::size_t positives = 0;
    std::size_t covered = 0;
    for (const auto& l : segment_labels) {
        if (!l.positive) continue;
        ++positives;
        auto it = candidates_per_video.find(l.video_id);
        if (it == candidates_per_video.end()) continue;
        if (std::find(it->second.begin(), it->second.end(), l.class_id) != it->second.end())
            ++covered;
    }
    return positives == 0 ? 1.0 : double(covered) / double(positives);
}

struct ScoredSegment {
    std::string video_id;
    std::uint32_t start_frame = 0;
    std::uint32_t class_id = 0;
    real p_vid = 0;
    real p_seg = 0;
    real fused = 0;
};

struct PipelineConfig {
    std::size_t candidate_count = 20;
    std::size_t top_k = 10000;
    std::size_t stride = kSegmentFrames;
    ValueModelConfig value;
    bool dummy = false;  // segment scores copy the video-level prediction
};

struct PipelineResult {
    std::vector<std::vector<ScoredSegment>> per_class;  // [class_id], rank-ascending
    std::map<std::string, std::vector<std::uint32_t>> candidates;
};

namespace detail {

// Ranking order: fused desc, then video_id asc, then start_frame asc.
inline bool ranks_before(const ScoredSegment& a, const ScoredSegment& b) {
    if (a.fused != b.fused) return a.fused > b.fused;
    if (a.video_id != b.video_id) return a.video_id < b.video_id;
    return a.start_frame < b.start_frame;
}

// Bounded min-heap keeping the best `cap` segments under ranks_before.
class TopKCollector {
  public:
    explicit TopKCollector(std::size_t cap) : cap_(cap) {}

    void offer(ScoredSegment seg) {
        if (cap_ == 0) return;
        if (heap_.size() < cap_) {
            heap_.push_back(std::move(seg));
            std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        } else if (ranks_before(seg, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
            heap_.back() = std::move(seg);
            std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        }
    }

    std::vector<ScoredSegment> sorted() && {
        // sort_heap yields ascending order under ranks_before, i.e. best first.
        std::sort_heap(heap_.begin(), heap_.end(), ranks_before);
        return std::move(heap_);
    }

  private:
    std::size_t cap_;
    std::vector<ScoredSegment> heap_;  // max-heap under ranks_before => worst at front
};

}  // namespace detail

// Three phases: candidate topics from the video model, candidate-restricted
// segment scoring, geometric fusion + per-class bounded top-K.
inline PipelineResult run_pipeline(TrainerState& video_model, TrainerState& segment_model,
                                   const Corpus& corpus, const PipelineConfig& cfg = {}) {
    const std::size_t n_classes = video_model.topo.hyper.class_count;
    if (!cfg.dummy && segment_model.topo.hyper.class_count != n_classes)
        throw ConfigError("video and segment models disagree on class count");
    if (cfg.candidate_count > n_classes)
        throw ConfigError("candidate count exceeds class count");

    std::vector<detail::TopKCollector> collectors;
    collectors.reserve(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) collectors.emplace_back(cfg.top_k);

    PipelineResult result;
    for (const auto& rec : corpus.records) {
        const auto video_logits = video_model.predict_logits(rec.visual, rec.audio);
        const auto video_probs = sigmoid(video_logits);
        const auto candidates = candidate_topics(video_logits, cfg.candidate_count);
        result.candidates[rec.video_id] = candidates;

        const auto windows = segment_windows(rec, cfg.stride);
        for (const auto& win : windows) {
            std::vector<real> seg_probs;
            if (cfg.dummy) {
                seg_probs = video_probs;
            } else {
                const auto seg_logits = segment_model.predict_logits(win.visual, win.audio);
                seg_probs = sigmoid(seg_logits);
            }
            for (std::uint32_t c : candidates) {
                ScoredSegment seg;
                seg.video_id = rec.video_id;
                seg.start_frame = win.start_frame;
                seg.class_id = c;
                seg.p_vid = video_probs[c];
                seg.p_seg = seg_probs[c];
                seg.fused = value_model(seg.p_vid, seg.p_seg, cfg.value);
                collectors[c].offer(std::move(seg));
            }
        }
    }

    result.per_class.reserve(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c)
        result.per_class.push_back(std::move(collectors[c]).sorted());
    return result;
}

// CSV: class_id,rank,video_id,start_frame,score with 9 significant digits.
inline void write_rankings_csv(const std::filesystem::path& path, const PipelineResult& result) {
    std::ostringstream csv;
    csv << "class_id,rank,video_id,start_frame,score\n";
    char buf[40];
    for (std::size_t c = 0; c < result.per_class.size(); ++c) {
        std::size_t rank = 1;
        for (const auto& seg : result.per_class[c]) {
            std::snprintf(buf, sizeof(buf), "%.8e", double(seg.fused));
            csv << c << ',' << rank++ << ',' << seg.video_id << ',' << seg.start_frame << ','
                << buf << '\n';
        }
    }
    atomic_write_text(path, csv.str());
}

struct RankedEntry {
    std::uint32_t rank = 0;
    std::string video_id;
    std::uint32_t start_frame = 0;
    real score = 0;
};

inline std::map<std::uint32_t, std::vector<RankedEntry>> read_rankings_csv(
    const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "class_id,rank,video_id,start_frame,score")
        throw FormatError("bad rankings header in " + path.string());
    std::map<std::uint32_t, std::vector<RankedEntry>> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        RankedEntry e;
        if (!std::getline(ss, field, ',')) throw FormatError("bad row: " + line);
        const auto class_id = static_cast<std::uint32_t>(std::stoul(field));
        if (!std::getline(ss, field, ',')) throw FormatError("bad row: " + line);
        e.rank = static_cast<std::uint32_t>(std::stoul(field));
        if (!std::getline(ss, e.video_id, ',')) throw FormatError("bad row: " + line);
        if (!std::getline(ss, field, ',')) throw FormatError("bad row: " + line);
        e.start_frame = static_cast<std::uint32_t>(std::stoul(field));
        if (!std::getline(ss, field, ',')) throw FormatError("bad row: " + line);
        e.score = static_cast<real>(std::stod(field));
        out[class_id].push_back(std::move(e));
    }
    return out;
}

}  // namespace mod

#endif  // MOD_LOCALIZATION_HPP
