#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "expertaf/error.hpp"
#include "expertaf/parallel.hpp"
#include "expertaf/pose_geometry.hpp"

namespace expertaf {

struct AlignmentResult {
    Window learner_window;
    Window expert_window;
    double score_mm = 0.0;
};

struct WindowSearchOptions {
    /// Expert frame that must lie strictly inside the chosen window.
    std::optional<std::size_t> anchor_frame;
    std::size_t stride = 1;
    PaMpjpeOptions metric;
    /// 0 = hardware concurrency. The argmin does not depend on this.
    std::size_t max_workers = 1;
};

/// Number of frames covering `seconds` at `fps`, at least one.
inline std::size_t window_frames(double seconds, double fps) {
    if (!(seconds > 0.0) || !(fps > 0.0)) throw InvalidWindow("window length and fps must be positive");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(seconds * fps)));
}

/// Frame index containing time `t_s`.
inline std::size_t frame_at(double t_s, double fps) {
    if (!(t_s >= 0.0)) throw InvalidWindow("timestamp must be non-negative");
    return static_cast<std::size_t>(std::floor(t_s * fps));
}

/// Window of `length` frames centered on time `t_s`, clamped to the clip.
inline Window centered_window(double t_s, double fps, std::size_t length, std::size_t sequence_length) {
    if (length == 0 || length > sequence_length)
        throw InvalidWindow("window of " + std::to_string(length) + " frames does not fit a clip of " +
                            std::to_string(sequence_length));
    const auto center = static_cast<long long>(std::llround(t_s * fps));
    long long start = center - static_cast<long long>(length / 2);
    start = std::clamp<long long>(start, 0, static_cast<long long>(sequence_length - length));
    return Window{static_cast<std::size_t>(start), length};
}

/// True when `frame` lies strictly between the first and last frame of `w`.
inline bool strictly_contains(const Window& w, std::size_t frame) noexcept {
    return w.start_frame < frame && frame + 1 < w.end_frame();
}

/// Start frames the search will try, in increasing order.
inline std::vector<std::size_t> candidate_starts(std::size_t expert_length, std::size_t window_length,
                                                 const WindowSearchOptions& options) {
    if (options.stride == 0) throw InvalidWindow("stride must be positive");
    std::vector<std::size_t> starts;
    if (window_length == 0 || expert_length < window_length) return starts;
    for (std::size_t s = 0; s + window_length <= expert_length; s += options.stride) {
        if (options.anchor_frame && !strictly_contains(Window{s, window_length}, *options.anchor_frame)) continue;
        starts.push_back(s);
    }
    return starts;
}

/// Finds the expert window of the learner window's length with the smallest
/// PA-MPJPE against the learner window. Ties go to the earliest start.
inline AlignmentResult best_window(const PoseSequence& learner, const Window& learner_window,
                                   const PoseSequence& expert, const WindowSearchOptions& options = {}) {
    const auto query = learner.view(learner_window);
    const std::size_t length = learner_window.length_frames;
    if (expert.size() < length)
        throw NoCandidateWindow("expert sequence (" + std::to_string(expert.size()) +
                                " frames) is shorter than the window (" + std::to_string(length) + ")");
    const auto starts = candidate_starts(expert.size(), length, options);
    if (starts.empty()) throw NoCandidateWindow("no expert window strictly contains the anchor frame");

    std::vector<double> scores(starts.size());
    parallel_for(
        starts.size(),
        [&](std::size_t i) {
            scores[i] = pa_mpjpe(query, expert.view(Window{starts[i], length}), options.metric);
        },
        options.max_workers);

    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] < scores[best]) best = i;
    return AlignmentResult{learner_window, Window{starts[best], length}, scores[best]};
}

/// Indices of the items kept when each group retains its `k` lowest scores.
/// Equal scores keep input order. Result is sorted ascending.
template <typename T, typename GroupFn, typename ScoreFn>
std::vector<std::size_t> topk_indices(std::span<const T> items, std::size_t k, GroupFn&& group_of,
                                      ScoreFn&& score_of) {
    if (k == 0) throw ConfigError("top-k filter needs k >= 1");
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < items.size(); ++i) groups[std::string(group_of(items[i]))].push_back(i);

    std::vector<std::size_t> kept;
    for (auto& [key, members] : groups) {
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return score_of(items[a]) < score_of(items[b]);
        });
        members.resize(std::min(k, members.size()));
        kept.insert(kept.end(), members.begin(), members.end());
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

struct AlignmentCandidate {
    std::string pair_id;
    /// Learner instance the candidate competes within.
    std::string group;
    AlignmentResult result;
};

inline std::vector<AlignmentCandidate> topk_filter(std::span<const AlignmentCandidate> candidates, std::size_t k) {
    const auto kept = topk_indices(
        candidates, k, [](const AlignmentCandidate& c) -> const std::string& { return c.group; },
        [](const AlignmentCandidate& c) { return c.result.score_mm; });
    std::vector<AlignmentCandidate> out;
    out.reserve(kept.size());
    for (std::size_t i : kept) out.push_back(candidates[i]);
    return out;
}

} // namespace expertaf
