#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "expertaf/io.hpp"
#include "expertaf/pose_geometry.hpp"

// Synthetic skeleton motion and the bundled planted-pair corpus.

namespace expertaf::synthetic {

namespace fs = std::filesystem;
using io::Json;

/// Rest pose in metres, y up, COCO joint order.
inline constexpr std::array<std::array<double, 3>, kNumJoints> kRestPose = {{
    {0.00, 1.62, 0.08},   // nose
    {-0.03, 1.66, 0.06},  // left eye
    {0.03, 1.66, 0.06},   // right eye
    {-0.08, 1.63, 0.00},  // left ear
    {0.08, 1.63, 0.00},   // right ear
    {-0.19, 1.42, 0.00},  // left shoulder
    {0.19, 1.42, 0.00},   // right shoulder
    {-0.24, 1.14, 0.02},  // left elbow
    {0.24, 1.14, 0.02},   // right elbow
    {-0.26, 0.88, 0.06},  // left wrist
    {0.26, 0.88, 0.06},   // right wrist
    {-0.11, 0.92, 0.00},  // left hip
    {0.11, 0.92, 0.00},   // right hip
    {-0.12, 0.48, 0.03},  // left knee
    {0.12, 0.48, 0.03},   // right knee
    {-0.12, 0.06, 0.00},  // left ankle
    {0.12, 0.06, 0.00},   // right ankle
}};

// Portable draws straight from the engine output.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double gaussian(std::mt19937_64& rng) {
    const double u1 = 1.0 - uniform(rng, 0.0, 1.0), u2 = uniform(rng, 0.0, 1.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Per-joint, per-axis sum of two sinusoids on top of the rest pose, plus a
/// slow whole-body drift. Torso joints move less so the torso never collapses.
struct MotionParams {
    std::array<double, 2> frequency_hz{};
    std::array<std::array<double, 3>, kNumJoints * 2> amplitude{};
    std::array<std::array<double, 3>, kNumJoints * 2> phase{};
    std::array<double, 3> drift{};

    static MotionParams random(std::mt19937_64& rng) {
        MotionParams p;
        for (auto& f : p.frequency_hz) f = uniform(rng, 0.3, 1.6);
        for (std::size_t i = 0; i < p.amplitude.size(); ++i) {
            const std::size_t joint = i % kNumJoints;
            const bool torso = joint == 5 || joint == 6 || joint == 11 || joint == 12;
            for (std::size_t a = 0; a < 3; ++a) {
                p.amplitude[i][a] = uniform(rng, 0.02, 0.14) * (torso ? 0.2 : 1.0);
                p.phase[i][a] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            }
        }
        for (auto& d : p.drift) d = uniform(rng, -0.05, 0.05);
        return p;
    }
};

inline double round_micro(double v) { return std::round(v * 1e6) / 1e6; }

/// Frame at time t, coordinates rounded to 1e-6 m.
inline PoseFrame motion_frame(const MotionParams& p, double t) {
    JointMatrix m;
    for (std::size_t j = 0; j < kNumJoints; ++j)
        for (std::size_t a = 0; a < 3; ++a) {
            double v = kRestPose[j][a] + p.drift[a] * t;
            for (std::size_t h = 0; h < 2; ++h)
                v += p.amplitude[h * kNumJoints + j][a] *
                     std::sin(2.0 * std::numbers::pi * p.frequency_hz[h] * t + p.phase[h * kNumJoints + j][a]);
            m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a)) = round_micro(v);
        }
    return PoseFrame(m);
}

inline PoseSequence generate_motion(const MotionParams& p, std::size_t frames, double fps, std::string id) {
    std::vector<PoseFrame> out;
    out.reserve(frames);
    for (std::size_t i = 0; i < frames; ++i) out.push_back(motion_frame(p, static_cast<double>(i) / fps));
    return PoseSequence(std::move(out), fps, std::move(id));
}

inline PoseSequence random_motion(std::mt19937_64& rng, std::size_t frames, double fps, std::string id) {
    return generate_motion(MotionParams::random(rng), frames, fps, std::move(id));
}

inline SimilarityTransform random_similarity(std::mt19937_64& rng) {
    const double w = gaussian(rng), x = gaussian(rng), y = gaussian(rng), z = gaussian(rng);
    Eigen::Quaterniond q(w, x, y, z);
    q.normalize();
    SimilarityTransform g;
    g.scale = uniform(rng, 0.5, 2.0);
    g.rotation = q.toRotationMatrix();
    for (int i = 0; i < 3; ++i) g.translation[i] = uniform(rng, -2.0, 2.0);
    return g;
}

// ---------------------------------------------------------------------------
// Planted-pair corpus

inline constexpr std::size_t kPlantedFrames = 192;
inline constexpr double kPlantedFps = 32.0;
inline constexpr double kLearnerCommentS = 2.5;
inline constexpr double kExpertCommentS = 3.0;
inline constexpr std::size_t kLearnerStart = 16;
inline constexpr std::size_t kExpertStart = 40;
inline constexpr std::size_t kWindowFrames = 128;
inline constexpr std::size_t kFeatureDim = 8;

struct PlantedComment {
    double timestamp_s;
    std::string text;
};

struct PlantedDemo {
    std::string id;
    std::string participant;
    std::string skill;
    std::string scenario;
    std::vector<PlantedComment> comments;
    /// For experts: the learner whose window is copied in.
    std::string copy_of;
};

inline std::vector<PlantedDemo> planted_demos() {
    const double l = kLearnerCommentS, e = kExpertCommentS;
    return {
        {"L1", "p1", "Novice", "basketball", {{l, "His knees are too stiff when he goes up for the shot."}}, ""},
        {"E1", "p5", "LateExpert", "basketball",
         {{e, "Her knees stay soft and well bent through the whole shot."}, {5.0, "oh, that's how I would do it too"}},
         "L1"},
        {"L2", "p2", "EarlyExpert", "basketball",
         {{1.0, "oh, I will give this a five out of ten"}, {l, "His elbow flares out instead of staying under the ball."}},
         ""},
        {"E2", "p6", "IntermediateExpert", "basketball", {{e, "Nice compact elbow, it stays right under the ball."}}, "L2"},
        {"L3", "p3", "Novice", "soccer",
         {{l, "Her plant foot lands too far from the ball."}, {4.5, "Great arm swing for balance."}}, ""},
        {"E3", "p7", "LateExpert", "soccer",
         {{1.0, "Her shoulder should stay more closed."}, {e, "Nice plant foot right beside the ball."}}, "L3"},
        {"L4", "p4", "Novice", "soccer", {{l, "He keeps his head down, not looking at the target."}}, ""},
        {"E4", "p8", "IntermediateExpert", "soccer", {{e, "Good head position, eyes up on the target."}}, "L4"},
    };
}

/// Keys of the tuples the corpus is built to produce.
inline std::vector<std::string> planted_tuple_keys() {
    return {"L1#0|E1#0|Legs", "L2#0|E2#0|Arms", "L3#0|E3#1|Legs", "L4#0|E4#0|Head"};
}

/// Writes the corpus: commentary.jsonl, demos.jsonl, poses/, features/,
/// text_pairs.jsonl and config.json. Each expert carries an exact similarity
/// copy of its learner's commented window at frames [40, 168).
inline void write_planted_corpus(const fs::path& dir, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    const auto demos = planted_demos();
    std::map<std::string, PoseSequence> poses;
    std::vector<Json> commentary, manifest;

    for (const auto& d : demos) {
        auto pose = random_motion(rng, kPlantedFrames, kPlantedFps, d.id);
        if (!d.copy_of.empty()) {
            const auto& src = poses.at(d.copy_of).frames();
            const auto g = random_similarity(rng);
            auto frames = pose.frames();
            for (std::size_t i = 0; i < kWindowFrames; ++i) frames[kExpertStart + i] = g.apply(src[kLearnerStart + i]);
            pose = PoseSequence(std::move(frames), kPlantedFps, d.id);
        }
        io::save_pose(dir / "poses" / (d.id + ".pose"), pose);
        poses.emplace(d.id, pose);

        io::FeatureTable table;
        const auto rows = static_cast<std::size_t>(kPlantedFrames / kPlantedFps * table.rate);
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> row(kFeatureDim);
            for (auto& v : row) v = round_micro(gaussian(rng));
            table.rows.push_back(std::move(row));
        }
        io::save_features(dir / "features" / (d.id + ".features"), table);

        manifest.push_back({{"demo_id", d.id},
                            {"participant_id", d.participant},
                            {"skill", d.skill},
                            {"scenario", d.scenario},
                            {"pose", "poses/" + d.id + ".pose"},
                            {"features", "features/" + d.id + ".features"}});
        for (const auto& c : d.comments)
            commentary.push_back({{"video_id", d.id},
                                  {"expert_id", "coach-" + d.scenario},
                                  {"timestamp_s", c.timestamp_s},
                                  {"scenario", d.scenario},
                                  {"text", c.text}});
    }
    io::write_jsonl(dir / "commentary.jsonl", commentary);
    io::write_jsonl(dir / "demos.jsonl", manifest);
    io::write_jsonl(dir / "text_pairs.jsonl",
                    {{{"id", "identical"},
                      {"hypothesis", "keep your knees soft through the shot."},
                      {"references", {"keep your knees soft through the shot."}}},
                     {{"id", "paraphrase"},
                      {"hypothesis", "plant your foot beside the ball."},
                      {"references", {"her plant foot lands too far from the ball.", "plant the foot next to the ball."}}},
                     {{"id", "disjoint"}, {"hypothesis", "great arm swing"}, {"references", {"head down"}}}});

    Json config = {{"paths",
                    {{"commentary_manifest", "commentary.jsonl"},
                     {"demo_manifest", "demos.jsonl"},
                     {"text_pairs", "text_pairs.jsonl"},
                     {"output_dir", "out"}}},
                   {"alignment", {{"window_length_s", 4.0}, {"fps", 32.0}, {"stride", 1}, {"mode", "PerFrame"}}},
                   {"dataset", {{"k_train", 5}, {"k_test", 1}, {"test_fraction", 0.1}, {"seed", 0}}},
                   {"retrieval", {{"scorer", "PoseAlignment"}, {"recall_k", 1}, {"split", "all"}}},
                   {"labeling", {{"stub", true}}}};
    auto out = io::open_out(dir / "config.json");
    out << config.dump(2) << '\n';
}

} // namespace expertaf::synthetic
