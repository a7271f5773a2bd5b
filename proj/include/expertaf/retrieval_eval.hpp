#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "expertaf/error.hpp"
#include "expertaf/pairing.hpp"
#include "expertaf/parallel.hpp"
#include "expertaf/pose_codec.hpp"
#include "expertaf/temporal_alignment.hpp"

namespace expertaf {

enum class ScorerKind { PoseAlignment, FeatureCosine, TokenOverlap };

inline std::string_view to_string(ScorerKind k) {
    switch (k) {
    case ScorerKind::PoseAlignment: return "PoseAlignment";
    case ScorerKind::FeatureCosine: return "FeatureCosine";
    case ScorerKind::TokenOverlap: return "TokenOverlap";
    }
    return "PoseAlignment";
}

inline ScorerKind parse_scorer_kind(std::string_view s) {
    if (s == "PoseAlignment" || s == "pose") return ScorerKind::PoseAlignment;
    if (s == "FeatureCosine" || s == "feature") return ScorerKind::FeatureCosine;
    if (s == "TokenOverlap" || s == "token") return ScorerKind::TokenOverlap;
    throw ConfigError("unknown scorer '" + std::string(s) + "'");
}

/// Candidate scoring rule. Every kind is lower-is-better.
struct Scorer {
    ScorerKind kind = ScorerKind::PoseAlignment;
    /// PoseAlignment: the shorter clip slides over the longer one.
    std::size_t stride = 1;
    PaMpjpeOptions metric;
    /// Required by TokenOverlap.
    std::shared_ptr<const Codebook> codebook;
};

/// Mean over feature rows.
inline std::vector<double> mean_pool(const std::vector<std::vector<double>>& rows) {
    std::vector<double> mean(rows.front().size(), 0.0);
    for (const auto& r : rows)
        for (std::size_t d = 0; d < r.size(); ++d) mean[d] += r[d];
    for (auto& m : mean) m /= static_cast<double>(rows.size());
    return mean;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeMismatch("feature dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// 1 - |multiset intersection| / max(|a|, |b|).
inline double token_overlap_distance(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.empty() || b.empty()) return 1.0;
    std::map<std::size_t, std::size_t> ha, hb;
    for (auto t : a) ++ha[t];
    for (auto t : b) ++hb[t];
    std::size_t common = 0;
    for (const auto& [tok, n] : ha)
        if (auto it = hb.find(tok); it != hb.end()) common += std::min(n, it->second);
    return 1.0 - static_cast<double>(common) / static_cast<double>(std::max(a.size(), b.size()));
}

inline double score_pair(const Demonstration& query, const Demonstration& candidate, const Scorer& scorer) {
    switch (scorer.kind) {
    case ScorerKind::PoseAlignment: {
        WindowSearchOptions search;
        search.stride = scorer.stride;
        search.metric = scorer.metric;
        const bool query_fits = query.pose.size() <= candidate.pose.size();
        const auto& shorter = query_fits ? query.pose : candidate.pose;
        const auto& longer = query_fits ? candidate.pose : query.pose;
        return best_window(shorter, Window{0, shorter.size()}, longer, search).score_mm;
    }
    case ScorerKind::FeatureCosine: {
        if (query.video_features.empty()) throw MissingModality("query " + query.demo_id + " has no video features");
        if (candidate.video_features.empty())
            throw MissingModality("candidate " + candidate.demo_id + " has no video features");
        return 1.0 - cosine_similarity(mean_pool(query.video_features), mean_pool(candidate.video_features));
    }
    case ScorerKind::TokenOverlap: {
        if (!scorer.codebook) throw MissingModality("TokenOverlap scorer has no codebook");
        const auto qa = encode(query.pose, *scorer.codebook);
        const auto cb = encode(candidate.pose, *scorer.codebook);
        return token_overlap_distance(qa.tokens, cb.tokens);
    }
    }
    throw ConfigError("unknown scorer kind");
}

struct ScoredCandidate {
    std::string id;
    double score = 0.0;

    friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

struct RankedResult {
    std::string query_id;
    /// Ascending by score; equal scores keep candidate input order.
    std::vector<ScoredCandidate> ranking;
    std::string ground_truth;
    /// 1-indexed position of the ground truth, if it was among the candidates.
    std::optional<std::size_t> rank;
};

inline std::optional<std::size_t> rank_of(const std::vector<ScoredCandidate>& ranking, std::string_view id) {
    for (std::size_t i = 0; i < ranking.size(); ++i)
        if (ranking[i].id == id) return i + 1;
    return std::nullopt;
}

/// Scores every candidate against the query and sorts stably ascending.
/// Candidates are identified by demo_id.
inline RankedResult retrieve(const Demonstration& query, std::span<const Demonstration> candidates,
                             const Scorer& scorer, std::string_view ground_truth = {}, std::size_t max_workers = 1) {
    if (candidates.empty()) throw EmptyInput("retrieve: no candidates");
    std::vector<ScoredCandidate> scored(candidates.size());
    parallel_for(
        candidates.size(),
        [&](std::size_t i) {
            const double s = score_pair(query, candidates[i], scorer);
            if (!std::isfinite(s)) throw InvalidRecord("scorer produced a non-finite score for " + candidates[i].demo_id);
            scored[i] = {candidates[i].demo_id, s};
        },
        max_workers);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const ScoredCandidate& a, const ScoredCandidate& b) { return a.score < b.score; });

    RankedResult out{query.demo_id, std::move(scored), std::string(ground_truth), std::nullopt};
    if (!ground_truth.empty()) out.rank = rank_of(out.ranking, ground_truth);
    return out;
}

namespace detail {

inline std::vector<std::size_t> ground_truth_ranks(std::span<const RankedResult> results) {
    if (results.empty()) throw EmptyResults("no retrieval results to evaluate");
    std::vector<std::size_t> ranks;
    ranks.reserve(results.size());
    for (const auto& r : results) {
        if (!r.rank) throw InvalidRecord("query " + r.query_id + " has no ground-truth rank");
        ranks.push_back(*r.rank);
    }
    return ranks;
}

} // namespace detail

/// Percentage of queries whose ground truth ranks within the top k.
inline double recall_at_k(std::span<const RankedResult> results, std::size_t k) {
    const auto ranks = detail::ground_truth_ranks(results);
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
    return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

inline double median_rank(std::span<const RankedResult> results) {
    auto ranks = detail::ground_truth_ranks(results);
    std::sort(ranks.begin(), ranks.end());
    const std::size_t n = ranks.size();
    if (n % 2 == 1) return static_cast<double>(ranks[n / 2]);
    return 0.5 * (static_cast<double>(ranks[n / 2 - 1]) + static_cast<double>(ranks[n / 2]));
}

/// Restricts a demonstration to a frame window; feature rows are kept when
/// their time span overlaps the window.
inline Demonstration slice_demonstration(const Demonstration& demo, const Window& window, std::string id) {
    Demonstration out{std::move(id),
                      demo.participant_id,
                      demo.pose.slice(window),
                      demo.skill,
                      demo.scenario,
                      {},
                      {},
                      demo.features_per_second};
    const double fps = demo.pose.fps();
    const double t0 = static_cast<double>(window.start_frame) / fps;
    const double t1 = static_cast<double>(window.end_frame()) / fps;
    for (std::size_t i = 0; i < demo.video_features.size(); ++i) {
        const double f0 = static_cast<double>(i) / demo.features_per_second;
        const double f1 = static_cast<double>(i + 1) / demo.features_per_second;
        if (f0 < t1 && f1 > t0) out.video_features.push_back(demo.video_features[i]);
    }
    return out;
}

inline std::string window_id(std::string_view demo_id, const Window& w) {
    return std::string(demo_id) + "@" + std::to_string(w.start_frame) + "+" + std::to_string(w.length_frames);
}

struct RetrievalSet {
    std::vector<Demonstration> queries;
    std::vector<std::string> ground_truth;
    std::vector<Demonstration> candidates;
};

/// Queries are learner windows, candidates the distinct expert windows of
/// the same tuples, and each query's ground truth its own tuple's expert
/// window.
inline RetrievalSet retrieval_set(std::span<const CoachingTuple> tuples, std::span<const Demonstration> demos) {
    std::map<std::string, const Demonstration*> by_id;
    for (const auto& d : demos) by_id[d.demo_id] = &d;
    auto find = [&](const std::string& id) -> const Demonstration& {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw InvalidRecord("tuple refers to unknown demonstration " + id);
        return *it->second;
    };

    RetrievalSet set;
    std::map<std::string, bool> seen_candidate;
    for (const auto& t : tuples) {
        const std::string cid = window_id(t.expert_id, t.expert_window);
        if (!seen_candidate[cid]) {
            seen_candidate[cid] = true;
            set.candidates.push_back(slice_demonstration(find(t.expert_id), t.expert_window, cid));
        }
        const std::string qid = tuple_key(t);
        set.queries.push_back(slice_demonstration(find(t.learner_id), t.learner_window, qid));
        set.ground_truth.push_back(cid);
    }
    return set;
}

} // namespace expertaf
