#pragma once

// Random inputs shared by the unit tests and the acceptance binary.

#include <random>
#include <string>
#include <vector>

#include "expertaf/pairing.hpp"
#include "expertaf/synthetic.hpp"

namespace fixtures {

inline expertaf::CommentaryLabel random_label(std::mt19937_64& rng) {
    expertaf::CommentaryLabel l;
    l.summary = "s" + std::to_string(rng() % 1000) + ".";
    for (auto& v : l.labels) v = static_cast<expertaf::RegionLabel>(rng() % 3);
    return l;
}

/// Up to `max_demos` demos over two scenarios and a small participant pool
/// (so same-participant exclusions actually occur), each with 0-3 labeled
/// commentaries. Poses are a single placeholder frame.
inline std::vector<expertaf::Demonstration> random_corpus(std::mt19937_64& rng, std::size_t max_demos) {
    using namespace expertaf;
    const std::size_t n = rng() % (max_demos + 1);
    std::vector<Demonstration> demos;
    for (std::size_t i = 0; i < n; ++i) {
        Demonstration d{"d" + std::to_string(i),
                        rng() % 4 == 0 ? std::string() : "p" + std::to_string(rng() % 4),
                        PoseSequence(std::vector<PoseFrame>(1), 32.0),
                        kAllSkillLevels[rng() % 4],
                        rng() % 2 ? "basketball" : "soccer",
                        {},
                        {},
                        4.0};
        const std::size_t c = rng() % 4;
        for (std::size_t j = 0; j < c; ++j)
            d.commentaries.push_back({CommentaryRecord{"c", 1.0, d.demo_id, "", d.scenario}, random_label(rng)});
        demos.push_back(std::move(d));
    }
    return demos;
}

} // namespace fixtures
