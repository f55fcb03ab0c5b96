#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mod/localization.hpp"
#include "mod/presets.hpp"

namespace {

namespace fs = std::filesystem;
using mod::ModelKind;
using mod::ModelTopology;
using mod::PipelineConfig;
using mod::real;
using mod::Rng;
using mod::TrainerState;

fs::path temp_dir() {
    const auto dir = fs::temp_directory_path() / "mod_localization_tests";
    fs::create_directories(dir);
    return dir;
}

mod::VideoModelHyper tiny_hyper(std::size_t classes) {
    mod::VideoModelHyper h;
    h.visual = {.input_dim = 8, .expansion = 2, .groups = 2, .clusters = 2};
    h.audio = {.input_dim = 4, .expansion = 2, .groups = 2, .clusters = 2};
    h.hidden = 16;
    h.class_count = classes;
    return h;
}

mod::GeneratedCorpus tiny_corpus(std::uint64_t seed, std::size_t classes = 6) {
    mod::CorpusSpec spec;
    spec.num_videos = 20;
    spec.class_count = classes;
    spec.frames_min = 6;
    spec.frames_max = 14;
    spec.visual_dim = 8;
    spec.audio_dim = 4;
    spec.noise_rate = 0.0;
    spec.signature_strength = 3.0;
    spec.seed = seed;
    return mod::generate_corpus(spec);
}

TEST(ValueModel, EndpointAndMidpointValues) {
    EXPECT_NEAR(double(mod::value_model(1, 1)), 1.0, 1e-15);
    EXPECT_NEAR(double(mod::value_model(real(0.5), real(0.5))), 0.5, 1e-12);
    // Independent scalar evaluation: exp(0.05 ln 0.9 + 0.95 ln 0.1).
    EXPECT_NEAR(double(mod::value_model(real(0.9), real(0.1))),
                std::exp(0.05 * std::log(0.9) + 0.95 * std::log(0.1)), 1e-12);
    EXPECT_NEAR(double(mod::value_model(real(0.9), real(0.1))), 0.1116123, 1e-6);
}

TEST(ValueModel, ZeroToTheZeroIsOne) {
    mod::ValueModelConfig cfg;
    cfg.vid_exponent = 0;
    cfg.seg_exponent = 1;
    EXPECT_EQ(double(mod::value_model(0, real(0.3), cfg)), 0.3);
    cfg.seg_exponent = 0;
    EXPECT_EQ(double(mod::value_model(0, 0, cfg)), 1.0);
}

TEST(ValueModel, OutOfRangeInputsAreDomainErrors) {
    EXPECT_THROW(mod::value_model(real(-0.1), real(0.5)), mod::DomainError);
    EXPECT_THROW(mod::value_model(real(0.5), real(1.1)), mod::DomainError);
}

TEST(ValueModel, MonotoneInBothArguments) {
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const real a = static_cast<real>(rng.uniform(0.01, 0.99));
        const real b = static_cast<real>(rng.uniform(0.01, 0.99));
        const real eps = static_cast<real>(rng.uniform(0.001, 0.01));
        EXPECT_LE(double(mod::value_model(a, b)), double(mod::value_model(a + eps, b)) + 1e-15);
        EXPECT_LE(double(mod::value_model(a, b)), double(mod::value_model(a, b + eps)) + 1e-15);
    }
}

TEST(CandidateTopics, OrdersByScoreThenAscendingId) {
    const auto got = mod::candidate_topics({real(0.1), real(0.9), real(0.9), real(0.4)}, 3);
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(got[0], 1u);  // tie with class 2 broken by id
    EXPECT_EQ(got[1], 2u);
    EXPECT_EQ(got[2], 3u);
    EXPECT_THROW(mod::candidate_topics({1, 2}, 3), mod::ConfigError);
}

TEST(CandidateTopics, InvariantUnderMonotoneTransform) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<real> z(12);
        for (real& v : z) v = static_cast<real>(rng.normal());
        std::vector<real> squashed = mod::sigmoid(z);
        EXPECT_EQ(mod::candidate_topics(z, 5), mod::candidate_topics(squashed, 5));
    }
}

TEST(CandidateRecall, FullPartialAndMonotone) {
    std::vector<mod::SegmentLabel> labels;
    labels.push_back({"v0", 0, 3, true});
    labels.push_back({"v0", 0, 4, true});
    labels.push_back({"v0", 0, 5, false});  // negatives never count
    std::map<std::string, std::vector<std::uint32_t>> cands;
    cands["v0"] = {3, 4};
    EXPECT_EQ(mod::candidate_recall(cands, labels), 1.0);
    cands["v0"] = {3};
    EXPECT_EQ(mod::candidate_recall(cands, labels), 0.5);
    cands["v0"] = {};
    EXPECT_EQ(mod::candidate_recall(cands, labels), 0.0);
    // No positives at all defines recall as 1.
    EXPECT_EQ(mod::candidate_recall(cands, {{"v0", 0, 5, false}}), 1.0);

    // Growing the candidate list never lowers recall.
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<mod::SegmentLabel> ls;
        for (int i = 0; i < 10; ++i)
            ls.push_back({"v" + std::to_string(rng.below(3)), 0,
                          static_cast<std::uint32_t>(rng.below(8)), true});
        std::vector<std::uint32_t> pool(8);
        for (std::uint32_t i = 0; i < 8; ++i) pool[i] = i;
        for (std::size_t i = 8; i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
        double prev = -1;
        std::map<std::string, std::vector<std::uint32_t>> cs;
        for (std::size_t n = 0; n <= 8; ++n) {
            for (auto& [id, v] : cs) (void)id;
            cs["v0"] = std::vector<std::uint32_t>(pool.begin(), pool.begin() + n);
            cs["v1"] = cs["v0"];
            cs["v2"] = cs["v0"];
            const double r = mod::candidate_recall(cs, ls);
            EXPECT_GE(r, prev);
            prev = r;
        }
        EXPECT_EQ(prev, 1.0);
    }
}

TEST(Pipeline, FusedOrderingMatchesHandComputedCase) {
    // Five scored segments pushed through the collector must come out in
    // fused-descending order with id/frame tie-breaks.
    mod::detail::TopKCollector col(10);
    const auto mk = [](const std::string& id, std::uint32_t start, double fused) {
        mod::ScoredSegment s;
        s.video_id = id;
        s.start_frame = start;
        s.fused = real(fused);
        return s;
    };
    col.offer(mk("vb", 5, 0.7));
    col.offer(mk("va", 0, 0.9));
    col.offer(mk("vb", 0, 0.7));
    col.offer(mk("va", 5, 0.7));
    col.offer(mk("vc", 0, 0.1));
    const auto sorted = std::move(col).sorted();
    ASSERT_EQ(sorted.size(), 5u);
    EXPECT_EQ(sorted[0].video_id, "va");
    EXPECT_EQ(sorted[0].start_frame, 0u);
    EXPECT_EQ(sorted[1].video_id, "va");
    EXPECT_EQ(sorted[1].start_frame, 5u);
    EXPECT_EQ(sorted[2].video_id, "vb");
    EXPECT_EQ(sorted[2].start_frame, 0u);
    EXPECT_EQ(sorted[3].video_id, "vb");
    EXPECT_EQ(sorted[3].start_frame, 5u);
    EXPECT_EQ(sorted[4].video_id, "vc");
}

TEST(Pipeline, CollectorKeepsOnlyTheBestCapEntries) {
    mod::detail::TopKCollector col(3);
    for (int i = 0; i < 20; ++i) {
        mod::ScoredSegment s;
        s.video_id = "v" + std::to_string(i);
        s.fused = real(i) / 20;
        col.offer(std::move(s));
    }
    const auto sorted = std::move(col).sorted();
    ASSERT_EQ(sorted.size(), 3u);
    EXPECT_EQ(sorted[0].video_id, "v19");
    EXPECT_EQ(sorted[1].video_id, "v18");
    EXPECT_EQ(sorted[2].video_id, "v17");
}

TEST(Pipeline, RestrictsScoringToCandidateTopics) {
    const auto gen = tiny_corpus(4);
    ModelTopology topo;
    topo.kind = ModelKind::kSingle;
    topo.hyper = tiny_hyper(6);
    auto video_model = TrainerState::create(topo, 5);
    auto segment_model = TrainerState::create(topo, 6);
    PipelineConfig cfg;
    cfg.candidate_count = 3;
    const auto result = mod::run_pipeline(video_model, segment_model, gen.eval, cfg);

    ASSERT_EQ(result.per_class.size(), 6u);
    for (std::size_t c = 0; c < result.per_class.size(); ++c) {
        for (const auto& seg : result.per_class[c]) {
            const auto& cands = result.candidates.at(seg.video_id);
            EXPECT_NE(std::find(cands.begin(), cands.end(), seg.class_id), cands.end())
                << "class " << c << " scored for non-candidate video " << seg.video_id;
        }
    }
    for (const auto& [id, cands] : result.candidates) EXPECT_EQ(cands.size(), 3u);
}

TEST(Pipeline, ExhaustiveSmallCaseMatchesDirectEnumeration) {
    const auto gen = tiny_corpus(7);
    ModelTopology topo;
    topo.kind = ModelKind::kSingle;
    topo.hyper = tiny_hyper(6);
    auto video_model = TrainerState::create(topo, 8);
    auto segment_model = TrainerState::create(topo, 9);
    PipelineConfig cfg;
    cfg.candidate_count = 6;  // no restriction
    cfg.top_k = 100000;
    const auto result = mod::run_pipeline(video_model, segment_model, gen.eval, cfg);

    // Recompute every (video, window, class) score directly and re-sort.
    std::vector<std::vector<mod::ScoredSegment>> want(6);
    for (const auto& rec : gen.eval.records) {
        const auto vprob = mod::sigmoid(video_model.predict_logits(rec.visual, rec.audio));
        for (const auto& win : mod::segment_windows(rec, cfg.stride)) {
            const auto sprob =
                mod::sigmoid(segment_model.predict_logits(win.visual, win.audio));
            for (std::uint32_t c = 0; c < 6; ++c) {
                mod::ScoredSegment s;
                s.video_id = rec.video_id;
                s.start_frame = win.start_frame;
                s.class_id = c;
                s.fused = mod::value_model(vprob[c], sprob[c]);
                want[c].push_back(std::move(s));
            }
        }
    }
    for (std::uint32_t c = 0; c < 6; ++c) {
        std::sort(want[c].begin(), want[c].end(), mod::detail::ranks_before);
        ASSERT_EQ(result.per_class[c].size(), want[c].size());
        for (std::size_t i = 0; i < want[c].size(); ++i) {
            EXPECT_EQ(result.per_class[c][i].video_id, want[c][i].video_id);
            EXPECT_EQ(result.per_class[c][i].start_frame, want[c][i].start_frame);
            EXPECT_NEAR(double(result.per_class[c][i].fused), double(want[c][i].fused), 1e-12);
        }
    }
}

TEST(Pipeline, RerunIsBitIdentical) {
    const auto dir = temp_dir();
    const auto gen = tiny_corpus(10);
    ModelTopology topo;
    topo.kind = ModelKind::kSingle;
    topo.hyper = tiny_hyper(6);
    auto video_model = TrainerState::create(topo, 11);
    auto segment_model = TrainerState::create(topo, 12);
    PipelineConfig cfg;
    cfg.candidate_count = 4;
    for (int run = 0; run < 2; ++run) {
        const auto result = mod::run_pipeline(video_model, segment_model, gen.eval, cfg);
        mod::write_rankings_csv(dir / ("run" + std::to_string(run) + ".csv"), result);
    }
    EXPECT_EQ(mod::read_text_file(dir / "run0.csv"), mod::read_text_file(dir / "run1.csv"));
}

TEST(Pipeline, DummyModeCopiesVideoScores) {
    const auto gen = tiny_corpus(13);
    ModelTopology topo;
    topo.kind = ModelKind::kSingle;
    topo.hyper = tiny_hyper(6);
    auto video_model = TrainerState::create(topo, 14);
    auto unused = TrainerState::create(topo, 15);
    PipelineConfig cfg;
    cfg.candidate_count = 6;
    cfg.dummy = true;
    const auto result = mod::run_pipeline(video_model, unused, gen.eval, cfg);
    for (const auto& list : result.per_class)
        for (const auto& seg : list) EXPECT_EQ(double(seg.p_vid), double(seg.p_seg));
}

TEST(RankingsCsv, RoundTripsThroughDisk) {
    const auto dir = temp_dir();
    const auto gen = tiny_corpus(16);
    ModelTopology topo;
    topo.kind = ModelKind::kSingle;
    topo.hyper = tiny_hyper(6);
    auto video_model = TrainerState::create(topo, 17);
    auto segment_model = TrainerState::create(topo, 18);
    mod::PipelineConfig pcfg;
    pcfg.candidate_count = 4;  // the tiny corpus has only 6 classes
    const auto result = mod::run_pipeline(video_model, segment_model, gen.eval, pcfg);
    const auto path = dir / "rank.csv";
    mod::write_rankings_csv(path, result);
    const auto reread = mod::read_rankings_csv(path);
    for (std::uint32_t c = 0; c < result.per_class.size(); ++c) {
        if (result.per_class[c].empty()) {
            EXPECT_EQ(reread.count(c), 0u);
            continue;
        }
        const auto& rows = reread.at(c);
        ASSERT_EQ(rows.size(), result.per_class[c].size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            EXPECT_EQ(rows[i].rank, i + 1);
            EXPECT_EQ(rows[i].video_id, result.per_class[c][i].video_id);
            EXPECT_EQ(rows[i].start_frame, result.per_class[c][i].start_frame);
            EXPECT_NEAR(double(rows[i].score), double(result.per_class[c][i].fused), 1e-7);
        }
    }
    std::ofstream(dir / "bad.csv") << "wrong,header\n";
    EXPECT_THROW(mod::read_rankings_csv(dir / "bad.csv"), mod::FormatError);
}

}  // namespace
