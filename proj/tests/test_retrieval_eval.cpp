#include <random>

#include <gtest/gtest.h>

#include "expertaf/retrieval_eval.hpp"
#include "expertaf/synthetic.hpp"

using namespace expertaf;

namespace {

Demonstration demo(std::string id, PoseSequence pose, std::vector<std::vector<double>> features = {}) {
    return Demonstration{std::move(id), "", std::move(pose), SkillLevel::LateExpert, "s", {}, std::move(features), 4.0};
}

RankedResult with_rank(std::size_t r) {
    RankedResult out;
    out.query_id = "q";
    out.rank = r;
    return out;
}

} // namespace

TEST(Metrics, RecallAndMedian) {
    std::vector<RankedResult> all1 = {with_rank(1), with_rank(1), with_rank(1)};
    EXPECT_EQ(recall_at_k(all1, 50), 100.0);
    EXPECT_EQ(median_rank(all1), 1.0);
    std::vector<RankedResult> mixed = {with_rank(1), with_rank(100), with_rank(51)};
    EXPECT_NEAR(recall_at_k(mixed, 50), 100.0 / 3.0, 1e-12);
    EXPECT_EQ(median_rank(mixed), 51.0);
    EXPECT_EQ(median_rank(std::vector<RankedResult>{with_rank(7)}), 7.0);
    EXPECT_EQ(median_rank(std::vector<RankedResult>{with_rank(2), with_rank(9)}), 5.5);
    double prev = 0;
    for (std::size_t k = 1; k <= 101; ++k) {
        const double r = recall_at_k(mixed, k);
        EXPECT_GE(r, prev);
        prev = r;
    }
    EXPECT_EQ(prev, 100.0);
    EXPECT_THROW(recall_at_k(std::vector<RankedResult>{}, 1), EmptyResults);
    EXPECT_THROW(median_rank(std::vector<RankedResult>{}), EmptyResults);
}

TEST(Scorers, ExactCopyRanksFirstUnderEveryScorer) {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> n(0.0, 1.0);
    auto feats = [&] {
        std::vector<std::vector<double>> f(6, std::vector<double>(8));
        for (auto& row : f)
            for (auto& v : row) v = n(rng);
        return f;
    };
    const auto qpose = synthetic::random_motion(rng, 20, 32.0, "q");
    const auto qfeat = feats();
    std::vector<Demonstration> cands;
    for (int i = 0; i < 6; ++i) cands.push_back(demo("c" + std::to_string(i), synthetic::random_motion(rng, 30, 32.0, "c"), feats()));
    cands.push_back(demo("copy", qpose, qfeat));
    const auto q = demo("q", qpose, qfeat);

    std::vector<PoseFrame> frames;
    for (const auto& c : cands) frames.insert(frames.end(), c.pose.frames().begin(), c.pose.frames().end());
    CodebookTrainingOptions co;
    co.size = 16;
    auto cb = std::make_shared<const Codebook>(train_codebook(frames, co));

    for (auto kind : {ScorerKind::PoseAlignment, ScorerKind::FeatureCosine, ScorerKind::TokenOverlap}) {
        Scorer s;
        s.kind = kind;
        s.codebook = cb;
        const auto r = retrieve(q, cands, s, "copy");
        ASSERT_TRUE(r.rank);
        EXPECT_EQ(*r.rank, 1u) << to_string(kind);
        EXPECT_TRUE(std::is_sorted(r.ranking.begin(), r.ranking.end(),
                                   [](const auto& a, const auto& b) { return a.score < b.score; }));
    }
}

TEST(Scorers, OrthogonalFeaturesTieInInputOrder) {
    const PoseSequence pose(std::vector<PoseFrame>(1), 32.0);
    const auto q = demo("q", pose, {{1, 0, 0, 0}});
    std::vector<Demonstration> cands = {demo("a", pose, {{0, 1, 0, 0}}), demo("b", pose, {{0, 0, 1, 0}}),
                                        demo("c", pose, {{0, 0, 0, 1}})};
    Scorer s;
    s.kind = ScorerKind::FeatureCosine;
    const auto r = retrieve(q, cands, s);
    ASSERT_EQ(r.ranking.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(r.ranking[i].score, 1.0);
        EXPECT_EQ(r.ranking[i].id, cands[i].demo_id);
    }
    EXPECT_FALSE(r.rank);
}

TEST(Scorers, PoseOrderingMatchesRescoring) {
    std::mt19937_64 rng(42);
    const auto q = demo("q", synthetic::random_motion(rng, 6, 32.0, "q"));
    std::vector<Demonstration> cands;
    for (int i = 0; i < 30; ++i)
        cands.push_back(demo("c" + std::to_string(i), synthetic::random_motion(rng, 6 + rng() % 20, 32.0, "c")));
    Scorer s;
    const auto r = retrieve(q, cands, s, {}, 3);
    std::vector<std::pair<double, std::size_t>> oracle;
    for (std::size_t i = 0; i < cands.size(); ++i)
        oracle.emplace_back(best_window(q.pose, Window{0, 6}, cands[i].pose).score_mm, i);
    std::sort(oracle.begin(), oracle.end());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        EXPECT_EQ(r.ranking[i].id, cands[oracle[i].second].demo_id);
        EXPECT_EQ(r.ranking[i].score, oracle[i].first);
    }
}

TEST(Scorers, PermutationEquivariant) {
    std::mt19937_64 rng(43);
    const auto q = demo("q", synthetic::random_motion(rng, 5, 32.0, "q"));
    std::vector<Demonstration> cands;
    for (int i = 0; i < 10; ++i) cands.push_back(demo("c" + std::to_string(i), synthetic::random_motion(rng, 12, 32.0, "c")));
    const auto a = retrieve(q, cands, Scorer{});
    std::shuffle(cands.begin(), cands.end(), rng);
    const auto b = retrieve(q, cands, Scorer{});
    auto sorted = [](std::vector<ScoredCandidate> v) {
        std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
        return v;
    };
    EXPECT_EQ(sorted(a.ranking), sorted(b.ranking));
}

TEST(Scorers, Errors) {
    const PoseSequence pose(std::vector<PoseFrame>(1), 32.0);
    const auto q = demo("q", pose);
    Scorer s;
    s.kind = ScorerKind::FeatureCosine;
    EXPECT_THROW(retrieve(q, std::vector<Demonstration>{demo("a", pose, {{1.0}})}, s), MissingModality);
    EXPECT_THROW(retrieve(q, std::vector<Demonstration>{}, s), EmptyInput);
    s.kind = ScorerKind::TokenOverlap;
    EXPECT_THROW(retrieve(q, std::vector<Demonstration>{demo("a", pose)}, s), MissingModality);
    EXPECT_EQ(parse_scorer_kind("feature"), ScorerKind::FeatureCosine);
    EXPECT_THROW(parse_scorer_kind("llm"), ConfigError);
}

TEST(Scorers, TokenOverlapDistance) {
    const std::vector<std::size_t> a = {1, 1, 2, 3}, b = {1, 2, 2, 4, 5};
    EXPECT_NEAR(token_overlap_distance(a, b), 1.0 - 2.0 / 5.0, 1e-15);
    EXPECT_EQ(token_overlap_distance(a, a), 0.0);
}

TEST(RetrievalSet, SlicesWindowsAndFeatures) {
    std::mt19937_64 rng(44);
    auto d = demo("E", synthetic::random_motion(rng, 64, 32.0, "E"));
    for (int i = 0; i < 8; ++i) d.video_features.push_back({static_cast<double>(i)});
    const auto s = slice_demonstration(d, Window{16, 16}, "E@16+16");
    EXPECT_EQ(s.pose.size(), 16u);
    EXPECT_EQ(s.pose[0], d.pose[16]);
    // Window covers 0.5 s to 1.0 s; feature rows are 0.25 s wide.
    ASSERT_EQ(s.video_features.size(), 2u);
    EXPECT_EQ(s.video_features[0][0], 2.0);
    EXPECT_EQ(window_id("E", Window{16, 16}), "E@16+16");
}
