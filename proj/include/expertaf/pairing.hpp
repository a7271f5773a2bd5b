#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "expertaf/commentary.hpp"
#include "expertaf/error.hpp"
#include "expertaf/hash.hpp"
#include "expertaf/parallel.hpp"
#include "expertaf/pose_geometry.hpp"
#include "expertaf/temporal_alignment.hpp"

namespace expertaf {

enum class SkillLevel { Novice = 0, EarlyExpert, IntermediateExpert, LateExpert };

inline constexpr std::array<SkillLevel, 4> kAllSkillLevels = {SkillLevel::Novice, SkillLevel::EarlyExpert,
                                                              SkillLevel::IntermediateExpert, SkillLevel::LateExpert};
inline constexpr std::array<std::string_view, 4> kSkillLevelNames = {"Novice", "EarlyExpert", "IntermediateExpert",
                                                                    "LateExpert"};

constexpr std::string_view to_string(SkillLevel s) { return kSkillLevelNames[static_cast<std::size_t>(s)]; }

inline SkillLevel parse_skill_level(std::string_view s) {
    for (std::size_t i = 0; i < kAllSkillLevels.size(); ++i)
        if (s == kSkillLevelNames[i]) return kAllSkillLevels[i];
    throw FormatError("unknown skill level '" + std::string(s) + "'");
}

/// Learner pool: novice and early expert.
constexpr bool is_learner(SkillLevel s) { return s == SkillLevel::Novice || s == SkillLevel::EarlyExpert; }
/// Expert pool: intermediate and late expert.
constexpr bool is_expert(SkillLevel s) { return s == SkillLevel::IntermediateExpert || s == SkillLevel::LateExpert; }

struct LabeledCommentary {
    CommentaryRecord record;
    CommentaryLabel label;
};

struct Demonstration {
    std::string demo_id;
    /// Empty when unknown; demos of the same known participant never pair.
    std::string participant_id;
    PoseSequence pose;
    SkillLevel skill = SkillLevel::Novice;
    std::string scenario;
    std::vector<LabeledCommentary> commentaries;
    /// One row per feature window, all rows the same dimension.
    std::vector<std::vector<double>> video_features;
    double features_per_second = 4.0;

    void validate() const {
        if (demo_id.empty()) throw InvalidRecord("demonstration without id");
        if (scenario.empty()) throw InvalidRecord("demonstration " + demo_id + " has no scenario");
        for (const auto& row : video_features)
            if (row.size() != video_features.front().size())
                throw InvalidRecord("demonstration " + demo_id + " has feature rows of different dimension");
        if (!video_features.empty() && !(features_per_second > 0.0))
            throw InvalidRecord("demonstration " + demo_id + " has features without a positive rate");
    }
};

inline bool same_participant(const Demonstration& a, const Demonstration& b) {
    return !a.participant_id.empty() && a.participant_id == b.participant_id;
}

/// One member of the candidate collection: a learner commentary flagging a
/// region, and an expert commentary praising the same region. Indices refer
/// to the demo list and each demo's commentary list.
struct CollectionEntry {
    std::size_t learner = 0;
    std::size_t learner_commentary = 0;
    std::size_t expert = 0;
    std::size_t expert_commentary = 0;
    BodyRegion region = BodyRegion::Head;

    friend bool operator==(const CollectionEntry&, const CollectionEntry&) = default;
    friend auto operator<=>(const CollectionEntry&, const CollectionEntry&) = default;
};

inline std::vector<CollectionEntry> build_collection(std::span<const Demonstration> demos) {
    std::vector<CollectionEntry> out;
    for (std::size_t li = 0; li < demos.size(); ++li) {
        const auto& learner = demos[li];
        if (!is_learner(learner.skill)) continue;
        for (std::size_t lc = 0; lc < learner.commentaries.size(); ++lc) {
            const auto& flagged = learner.commentaries[lc].label;
            if (!flagged.has(RegionLabel::NeedsImprovement)) continue;
            for (std::size_t ei = 0; ei < demos.size(); ++ei) {
                const auto& expert = demos[ei];
                if (!is_expert(expert.skill) || expert.scenario != learner.scenario ||
                    same_participant(learner, expert))
                    continue;
                for (std::size_t ec = 0; ec < expert.commentaries.size(); ++ec) {
                    const auto& praised = expert.commentaries[ec].label;
                    for (BodyRegion r : kAllBodyRegions)
                        if (flagged[r] == RegionLabel::NeedsImprovement && praised[r] == RegionLabel::Correct)
                            out.push_back({li, lc, ei, ec, r});
                }
            }
        }
    }
    return out;
}

enum class Split { Train, Test };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw FormatError("unknown split '" + std::string(s) + "'");
}

/// Deterministic per-learner split; every tuple of a learner demo shares it.
inline Split assign_split(std::uint64_t seed, std::string_view learner_id, double test_fraction) {
    return unit_hash(seed, learner_id) < test_fraction ? Split::Test : Split::Train;
}

struct CoachingTuple {
    std::string learner_id;
    std::size_t learner_commentary = 0;
    Window learner_window;
    std::string summary;
    std::string expert_id;
    std::size_t expert_commentary = 0;
    Window expert_window;
    BodyRegion matched_region = BodyRegion::Head;
    double alignment_score_mm = 0.0;
    Split split = Split::Train;

    friend bool operator==(const CoachingTuple&, const CoachingTuple&) = default;
};

/// Stable identity of a tuple, used by reviewer accept/reject lists.
inline std::string tuple_key(const CoachingTuple& t) {
    return t.learner_id + "#" + std::to_string(t.learner_commentary) + "|" + t.expert_id + "#" +
           std::to_string(t.expert_commentary) + "|" + std::string(to_string(t.matched_region));
}

inline bool tuple_order(const CoachingTuple& a, const CoachingTuple& b) {
    return std::tie(a.learner_id, a.expert_id, a.matched_region, a.learner_commentary, a.expert_commentary) <
           std::tie(b.learner_id, b.expert_id, b.matched_region, b.learner_commentary, b.expert_commentary);
}

struct SkipRecord {
    std::string stage;
    std::string item;
    std::string reason;
    std::string detail;

    friend bool operator==(const SkipRecord&, const SkipRecord&) = default;
};

struct DatasetOptions {
    double window_length_s = 4.0;
    std::size_t stride = 1;
    PaMpjpeOptions metric;
    /// Require the expert window to contain the expert commentary time.
    bool use_anchor = true;
    std::size_t k_train = 5;
    std::size_t k_test = 1;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
    /// Tuple keys a reviewer rejected; they are dropped as skips.
    std::set<std::string> rejected;
    std::size_t max_workers = 0;
};

struct DatasetBuild {
    std::vector<CollectionEntry> collection;
    /// Collection entries that produced an alignment.
    std::size_t aligned = 0;
    std::vector<CoachingTuple> tuples;
    std::vector<SkipRecord> skips;
};

inline std::string entry_label(std::span<const Demonstration> demos, const CollectionEntry& e) {
    return demos[e.learner].demo_id + "#" + std::to_string(e.learner_commentary) + "|" + demos[e.expert].demo_id +
           "#" + std::to_string(e.expert_commentary) + "|" + std::string(to_string(e.region));
}

/// Aligns one collection entry; throws on any alignment failure.
inline CoachingTuple align_entry(std::span<const Demonstration> demos, const CollectionEntry& e,
                                 const DatasetOptions& options) {
    const auto& learner = demos[e.learner];
    const auto& expert = demos[e.expert];
    const double fps = learner.pose.fps();
    if (expert.pose.fps() != fps)
        throw InvalidWindow("learner and expert frame rates differ (" + std::to_string(fps) + " vs " +
                            std::to_string(expert.pose.fps()) + ")");
    const std::size_t length = window_frames(options.window_length_s, fps);
    const auto& learner_record = learner.commentaries[e.learner_commentary].record;
    const auto& expert_record = expert.commentaries[e.expert_commentary].record;
    const Window learner_window = centered_window(learner_record.timestamp_s, fps, length, learner.pose.size());

    WindowSearchOptions search;
    search.stride = options.stride;
    search.metric = options.metric;
    if (options.use_anchor) search.anchor_frame = frame_at(expert_record.timestamp_s, fps);
    const AlignmentResult match = best_window(learner.pose, learner_window, expert.pose, search);

    CoachingTuple t;
    t.learner_id = learner.demo_id;
    t.learner_commentary = e.learner_commentary;
    t.learner_window = match.learner_window;
    t.summary = learner.commentaries[e.learner_commentary].label.summary;
    t.expert_id = expert.demo_id;
    t.expert_commentary = e.expert_commentary;
    t.expert_window = match.expert_window;
    t.matched_region = e.region;
    t.alignment_score_mm = match.score_mm;
    t.split = assign_split(options.seed, learner.demo_id, options.test_fraction);
    return t;
}

/// Alignment, per-learner-instance top-k, split, and review filtering of a
/// given collection. Entries that cannot be aligned become skip records; the
/// build never aborts on a single entry.
inline DatasetBuild align_collection(std::span<const Demonstration> demos, std::vector<CollectionEntry> collection,
                                     const DatasetOptions& options) {
    if (options.k_train == 0 || options.k_test == 0) throw ConfigError("k_train and k_test must be >= 1");
    if (!(options.test_fraction >= 0.0 && options.test_fraction <= 1.0))
        throw ConfigError("test_fraction must lie in [0, 1]");

    DatasetBuild build;
    build.collection = std::move(collection);
    const auto& entries = build.collection;

    std::vector<std::optional<CoachingTuple>> aligned(entries.size());
    std::vector<std::optional<SkipRecord>> failures(entries.size());
    parallel_for(
        entries.size(),
        [&](std::size_t i) {
            try {
                aligned[i] = align_entry(demos, entries[i], options);
            } catch (const Error& err) {
                failures[i] = SkipRecord{"align", entry_label(demos, entries[i]), err.kind(), err.what()};
            }
        },
        options.max_workers);

    std::vector<CoachingTuple> candidates;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (aligned[i]) candidates.push_back(std::move(*aligned[i]));
        else build.skips.push_back(std::move(*failures[i]));
    }
    build.aligned = candidates.size();

    // The group key carries the split so k can depend on it; a learner demo
    // lives in exactly one split, so this is still one group per instance.
    auto group_of = [](const CoachingTuple& t) {
        return std::string(to_string(t.split)) + "|" + t.learner_id + "#" + std::to_string(t.learner_commentary);
    };
    std::vector<std::size_t> kept;
    {
        std::vector<CoachingTuple> train, test;
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            (candidates[i].split == Split::Train ? train_idx : test_idx).push_back(i);
            (candidates[i].split == Split::Train ? train : test).push_back(candidates[i]);
        }
        auto score_of = [](const CoachingTuple& t) { return t.alignment_score_mm; };
        for (std::size_t i : topk_indices(std::span<const CoachingTuple>(train), options.k_train, group_of, score_of))
            kept.push_back(train_idx[i]);
        for (std::size_t i : topk_indices(std::span<const CoachingTuple>(test), options.k_test, group_of, score_of))
            kept.push_back(test_idx[i]);
        std::sort(kept.begin(), kept.end());
    }

    std::vector<bool> keep(candidates.size(), false);
    for (std::size_t i : kept) keep[i] = true;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto& t = candidates[i];
        if (!keep[i]) {
            build.skips.push_back({"topk", tuple_key(t), "TopKFiltered",
                                   "score " + std::to_string(t.alignment_score_mm) + " mm"});
        } else if (options.rejected.count(tuple_key(t)) != 0) {
            build.skips.push_back({"review", tuple_key(t), "RejectedByReviewer", ""});
        } else {
            build.tuples.push_back(std::move(t));
        }
    }
    std::sort(build.tuples.begin(), build.tuples.end(), tuple_order);
    return build;
}

inline DatasetBuild build_dataset(std::span<const Demonstration> demos, const DatasetOptions& options) {
    return align_collection(demos, build_collection(demos), options);
}

} // namespace expertaf
