#include <gtest/gtest.h>

#include "expertaf/commentary.hpp"
#include "expected_prompt.hpp"

using namespace expertaf;
using namespace expected_prompt;

namespace {

CommentaryRecord record(std::string text, std::string scenario = "basketball") {
    return CommentaryRecord{std::move(text), 1.0, "v", "x", std::move(scenario)};
}

} // namespace

TEST(BodyRegion, Names) {
    EXPECT_EQ(kAllBodyRegions.size(), 6u);
    EXPECT_EQ(parse_body_region("legs"), BodyRegion::Legs);
    EXPECT_EQ(parse_body_region(" Shoulder "), BodyRegion::Shoulder);
    EXPECT_FALSE(parse_body_region("torso"));
    EXPECT_EQ(static_cast<int>(RegionLabel::NeedsImprovement), 0);
    EXPECT_EQ(static_cast<int>(RegionLabel::Correct), 1);
    EXPECT_EQ(static_cast<int>(RegionLabel::NoMention), 2);
}

TEST(Prompt, ByteExactBasketball) {
    const auto m = build_prompt(record("  Keep your elbow in.  "));
    ASSERT_EQ(m.size(), 6u);
    EXPECT_EQ(m[0].role, "system");
    EXPECT_EQ(m[0].content, "You are a helpful assistant.");
    EXPECT_EQ(m[1], (ChatMessage{"user", kInstruction}));
    EXPECT_EQ(m[2], (ChatMessage{"assistant", kAnswer1}));
    EXPECT_EQ(m[3], (ChatMessage{"user", kUser2}));
    EXPECT_EQ(m[4], (ChatMessage{"assistant", kAnswer2}));
    EXPECT_EQ(m[5], (ChatMessage{"user", "Keep your elbow in."}));
}

TEST(Prompt, ScenarioSubstituted) {
    const auto m = build_prompt(record("x", "soccer"));
    std::string want = kInstruction;
    want.replace(want.find("Basketball"), 10, "Soccer");
    EXPECT_EQ(m[1].content, want);
    EXPECT_EQ(m[3].content, kUser2);
    PromptOptions o;
    o.system_prompt = "custom";
    EXPECT_EQ(build_prompt(record("x"), o)[0].content, "custom");
    EXPECT_THROW(build_prompt(record("   ")), InvalidRecord);
}

TEST(Parse, IncorrectExemplar) {
    // As printed: literal backslash-n separators with spaces around them.
    const auto r = parse_label_response(
        "One sentence summary: He came down on one foot and his left knee is locked, which could cause some "
        "hypertension. \\n Needs improvement parts: Legs, Jump. \\n Good execution parts: None.");
    ASSERT_FALSE(r.discarded());
    EXPECT_EQ(r.label->summary, "He came down on one foot and his left knee is locked, which could cause some hypertension.");
    EXPECT_EQ((*r.label)[BodyRegion::Legs], RegionLabel::NeedsImprovement);
    EXPECT_EQ((*r.label)[BodyRegion::Jump], RegionLabel::NeedsImprovement);
    for (auto b : {BodyRegion::Head, BodyRegion::Shoulder, BodyRegion::Hands, BodyRegion::Arms})
        EXPECT_EQ((*r.label)[b], RegionLabel::NoMention);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Parse, CorrectExemplar) {
    const auto r = parse_label_response(kAnswer2);
    ASSERT_FALSE(r.discarded());
    EXPECT_EQ(r.label->summary, "Shooter's hand is in a really good position on the left side of the ball.");
    EXPECT_EQ((*r.label)[BodyRegion::Hands], RegionLabel::Correct);
    EXPECT_FALSE(r.label->has(RegionLabel::NeedsImprovement));
}

TEST(Parse, HeaderlessQuoteDiscarded) {
    const auto r = parse_label_response("oh, I will give this a five out of ten");
    EXPECT_TRUE(r.discarded());
    EXPECT_EQ(r.discard_kind, "MissingHeader");
}

TEST(Parse, DiscardKinds) {
    EXPECT_EQ(parse_label_response("One sentence summary: x\nGood execution parts: Legs").discard_kind, "MissingHeader");
    EXPECT_EQ(parse_label_response("Needs improvement parts: Legs\nOne sentence summary: x\nGood execution parts: None")
                  .discard_kind,
              "MissingHeader");
    EXPECT_EQ(parse_label_response("One sentence summary:  \nNeeds improvement parts: Legs\nGood execution parts: None")
                  .discard_kind,
              "EmptySummary");
    EXPECT_EQ(parse_label_response("One sentence summary: x\nNeeds improvement parts: Torso\nGood execution parts: None")
                  .discard_kind,
              "UnknownRegion");
}

TEST(Parse, ListSeparatorsAndCase) {
    const auto r = parse_label_response(
        "ONE SENTENCE SUMMARY: Bend more.\nneeds improvement parts: legs and arms; Jump\nGood Execution Parts: "
        "head / hands & shoulder.");
    ASSERT_FALSE(r.discarded());
    const auto& l = *r.label;
    EXPECT_EQ(l[BodyRegion::Legs], RegionLabel::NeedsImprovement);
    EXPECT_EQ(l[BodyRegion::Arms], RegionLabel::NeedsImprovement);
    EXPECT_EQ(l[BodyRegion::Jump], RegionLabel::NeedsImprovement);
    EXPECT_EQ(l[BodyRegion::Head], RegionLabel::Correct);
    EXPECT_EQ(l[BodyRegion::Hands], RegionLabel::Correct);
    EXPECT_EQ(l[BodyRegion::Shoulder], RegionLabel::Correct);
}

TEST(Parse, ConflictsAndWarnings) {
    const auto r = parse_label_response(
        "One sentence summary: First. Second.\nNeeds improvement parts: Legs.\nGood execution parts: Legs, Arms.\n"
        "Hope this helps!");
    ASSERT_FALSE(r.discarded());
    EXPECT_EQ(r.label->summary, "First.");
    EXPECT_EQ((*r.label)[BodyRegion::Legs], RegionLabel::NeedsImprovement);
    EXPECT_EQ((*r.label)[BodyRegion::Arms], RegionLabel::Correct);
    EXPECT_EQ(r.warnings.size(), 2u);
}

TEST(Parse, SerializeRoundTrip) {
    CommentaryLabel l;
    l.summary = "Keep the knees soft.";
    l[BodyRegion::Legs] = RegionLabel::NeedsImprovement;
    l[BodyRegion::Head] = RegionLabel::Correct;
    l[BodyRegion::Jump] = RegionLabel::NeedsImprovement;
    const auto s = serialize_label(l);
    EXPECT_EQ(s, "One sentence summary: Keep the knees soft.\nNeeds improvement parts: Legs, Jump.\nGood execution parts: Head.");
    const auto r = parse_label_response(s);
    ASSERT_FALSE(r.discarded());
    EXPECT_EQ(*r.label, l);
}
