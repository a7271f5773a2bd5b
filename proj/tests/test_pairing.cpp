#include <map>
#include <random>

#include <gtest/gtest.h>

#include "expertaf/pairing.hpp"
#include "expertaf/synthetic.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace expertaf;

namespace {

Demonstration demo(std::string id, std::string participant, SkillLevel skill, std::string scenario,
                   std::vector<std::pair<double, CommentaryLabel>> comments, PoseSequence pose) {
    Demonstration d{id, std::move(participant), std::move(pose), skill, scenario, {}, {}, 4.0};
    for (auto& [t, l] : comments) d.commentaries.push_back({CommentaryRecord{l.summary, t, id, "", scenario}, l});
    return d;
}

CommentaryLabel label(std::initializer_list<std::pair<BodyRegion, RegionLabel>> items) {
    CommentaryLabel l;
    l.summary = "summary.";
    for (auto [r, v] : items) l[r] = v;
    return l;
}

constexpr auto NI = RegionLabel::NeedsImprovement;
constexpr auto OK = RegionLabel::Correct;

} // namespace

TEST(Skill, Pools) {
    EXPECT_EQ(kAllSkillLevels.size(), 4u);
    EXPECT_TRUE(is_learner(SkillLevel::Novice));
    EXPECT_TRUE(is_learner(SkillLevel::EarlyExpert));
    EXPECT_TRUE(is_expert(SkillLevel::IntermediateExpert));
    EXPECT_TRUE(is_expert(SkillLevel::LateExpert));
    EXPECT_FALSE(is_expert(SkillLevel::EarlyExpert));
    EXPECT_EQ(parse_skill_level("LateExpert"), SkillLevel::LateExpert);
    EXPECT_THROW(parse_skill_level("Wizard"), FormatError);
}

TEST(Collection, MatchesSetBuilderOracle) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 300; ++t) {
        const auto demos = fixtures::random_corpus(rng, 15);
        const auto got = build_collection(demos);
        std::set<oracle::CollectionKey> got_set;
        for (const auto& e : got)
            got_set.emplace(e.learner, e.learner_commentary, e.expert, e.expert_commentary, static_cast<int>(e.region));
        EXPECT_EQ(got_set.size(), got.size()) << "duplicate entries";
        EXPECT_EQ(got_set, oracle::collection_set(demos));
    }
}

TEST(Collection, SameParticipantNeverPairs) {
    std::mt19937_64 rng(22);
    const PoseSequence pose(std::vector<PoseFrame>(1), 32.0);
    const std::vector<Demonstration> demos = {
        demo("L", "p1", SkillLevel::Novice, "s", {{1, label({{BodyRegion::Legs, NI}})}}, pose),
        demo("E", "p1", SkillLevel::LateExpert, "s", {{1, label({{BodyRegion::Legs, OK}})}}, pose),
        demo("F", "", SkillLevel::LateExpert, "s", {{1, label({{BodyRegion::Legs, OK}})}}, pose),
    };
    const auto c = build_collection(demos);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].expert, 2u);
}

TEST(Split, DeterministicAndProportional) {
    EXPECT_EQ(assign_split(3, "abc", 0.5), assign_split(3, "abc", 0.5));
    EXPECT_EQ(assign_split(3, "abc", 0.0), Split::Train);
    EXPECT_EQ(assign_split(3, "abc", 1.0), Split::Test);
    int test = 0;
    for (int i = 0; i < 10000; ++i) test += assign_split(9, "demo" + std::to_string(i), 0.1) == Split::Test;
    EXPECT_NEAR(test / 10000.0, 0.1, 0.015);
    EXPECT_THROW(parse_split("val"), FormatError);
}

namespace {

// One learner with two NI commentaries against `n_experts` experts, each
// holding a copy of the learner window degraded by increasing noise.
std::vector<Demonstration> ladder(std::size_t n_experts) {
    std::mt19937_64 rng(23);
    const auto learner_pose = synthetic::random_motion(rng, 64, 32.0, "L");
    std::vector<Demonstration> demos;
    demos.push_back(demo("L", "pl", SkillLevel::Novice, "s",
                         {{1.0, label({{BodyRegion::Legs, NI}})}, {1.0, label({{BodyRegion::Arms, NI}})}},
                         learner_pose));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t e = 0; e < n_experts; ++e) {
        auto frames = learner_pose.frames();
        for (auto& f : frames) {
            JointMatrix m = f.joints();
            for (int i = 0; i < m.size(); ++i) m.data()[i] += 0.01 * static_cast<double>(e) * noise(rng);
            f = PoseFrame(m);
        }
        demos.push_back(demo("E" + std::to_string(e), "pe" + std::to_string(e), SkillLevel::LateExpert, "s",
                             {{1.0, label({{BodyRegion::Legs, OK}, {BodyRegion::Arms, OK}})}},
                             PoseSequence(frames, 32.0)));
    }
    return demos;
}

} // namespace

TEST(Dataset, TopKPerLearnerInstance) {
    const auto demos = ladder(8);
    DatasetOptions o;
    o.window_length_s = 1.0;
    o.use_anchor = false;
    o.test_fraction = 0.0;
    o.k_train = 3;
    const auto build = build_dataset(demos, o);
    EXPECT_EQ(build.collection.size(), 16u);
    EXPECT_EQ(build.aligned, 16u);
    ASSERT_EQ(build.tuples.size(), 6u);
    std::map<std::size_t, std::vector<std::string>> per_instance;
    for (const auto& t : build.tuples) per_instance[t.learner_commentary].push_back(t.expert_id);
    for (auto& [i, experts] : per_instance) EXPECT_EQ(experts, (std::vector<std::string>{"E0", "E1", "E2"}));
    EXPECT_EQ(build.skips.size(), 10u);
    for (const auto& s : build.skips) EXPECT_EQ(s.reason, "TopKFiltered");
    EXPECT_TRUE(std::is_sorted(build.tuples.begin(), build.tuples.end(), tuple_order));

    o.test_fraction = 1.0;
    const auto test = build_dataset(demos, o);
    ASSERT_EQ(test.tuples.size(), 2u);
    for (const auto& t : test.tuples) {
        EXPECT_EQ(t.expert_id, "E0");
        EXPECT_EQ(t.split, Split::Test);
    }
}

TEST(Dataset, ReviewerRejections) {
    const auto demos = ladder(2);
    DatasetOptions o;
    o.window_length_s = 1.0;
    o.use_anchor = false;
    o.test_fraction = 1.0;
    o.rejected = {"L#0|E0#0|Legs"};
    const auto build = build_dataset(demos, o);
    ASSERT_EQ(build.tuples.size(), 1u);
    EXPECT_EQ(tuple_key(build.tuples[0]), "L#1|E0#0|Arms");
    std::size_t rejected = 0;
    for (const auto& s : build.skips) rejected += s.reason == "RejectedByReviewer";
    EXPECT_EQ(rejected, 1u);
}

TEST(Dataset, AlignmentFailuresBecomeSkips) {
    std::mt19937_64 rng(24);
    const std::vector<Demonstration> demos = {
        demo("L", "a", SkillLevel::Novice, "s", {{0.5, label({{BodyRegion::Legs, NI}})}},
             synthetic::random_motion(rng, 64, 32.0, "L")),
        demo("Short", "b", SkillLevel::LateExpert, "s", {{0.1, label({{BodyRegion::Legs, OK}})}},
             synthetic::random_motion(rng, 10, 32.0, "S")),
        demo("Fps", "c", SkillLevel::LateExpert, "s", {{0.5, label({{BodyRegion::Legs, OK}})}},
             synthetic::random_motion(rng, 64, 30.0, "F")),
        demo("Edge", "d", SkillLevel::LateExpert, "s", {{0.0, label({{BodyRegion::Legs, OK}})}},
             synthetic::random_motion(rng, 64, 32.0, "E")),
        demo("Fine", "e", SkillLevel::LateExpert, "s", {{0.5, label({{BodyRegion::Legs, OK}})}},
             synthetic::random_motion(rng, 64, 32.0, "G")),
    };
    DatasetOptions o;
    o.window_length_s = 1.0;
    o.test_fraction = 0.0;
    const auto build = build_dataset(demos, o);
    ASSERT_EQ(build.tuples.size(), 1u);
    EXPECT_EQ(build.tuples[0].expert_id, "Fine");
    std::map<std::string, std::string> reasons;
    for (const auto& s : build.skips) reasons[s.item] = s.reason;
    EXPECT_EQ(reasons.at("L#0|Short#0|Legs"), "NoCandidateWindow");
    EXPECT_EQ(reasons.at("L#0|Fps#0|Legs"), "InvalidWindow");
    EXPECT_EQ(reasons.at("L#0|Edge#0|Legs"), "NoCandidateWindow");
}

TEST(Dataset, WorkerCountDoesNotChangeOutput) {
    const auto demos = ladder(6);
    DatasetOptions o;
    o.window_length_s = 1.0;
    o.test_fraction = 0.5;
    o.seed = 4;
    o.max_workers = 1;
    const auto a = build_dataset(demos, o);
    o.max_workers = 4;
    const auto b = build_dataset(demos, o);
    EXPECT_EQ(a.tuples, b.tuples);
    EXPECT_EQ(a.skips, b.skips);
}

TEST(Dataset, BadOptions) {
    DatasetOptions o;
    o.k_test = 0;
    EXPECT_THROW(build_dataset({}, o), ConfigError);
    o.k_test = 1;
    o.test_fraction = 1.5;
    EXPECT_THROW(build_dataset({}, o), ConfigError);
}
