#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "expertaf/io.hpp"
#include "expertaf/pose_codec.hpp"
#include "expertaf/synthetic.hpp"
#include "oracles.hpp"

using namespace expertaf;

namespace {

std::vector<PoseFrame> corpus(std::uint64_t seed, std::size_t sequences, std::size_t frames) {
    std::mt19937_64 rng(seed);
    std::vector<PoseFrame> out;
    for (std::size_t s = 0; s < sequences; ++s) {
        const auto seq = synthetic::random_motion(rng, frames, 32.0, "s");
        out.insert(out.end(), seq.frames().begin(), seq.frames().end());
    }
    return out;
}

} // namespace

TEST(Normalize, RootAndScale) {
    std::mt19937_64 rng(51);
    const auto f = synthetic::random_motion(rng, 1, 32.0, "x")[0];
    const auto p = normalization_params(f);
    const auto v = normalize_frame(f);
    const PoseFrame n = denormalize_frame(v);
    const Eigen::Vector3d hip = 0.5 * (n.joint(Joint::LeftHip) + n.joint(Joint::RightHip));
    const Eigen::Vector3d sh = 0.5 * (n.joint(Joint::LeftShoulder) + n.joint(Joint::RightShoulder));
    EXPECT_LT(hip.norm(), 1e-12);
    EXPECT_NEAR((sh - hip).norm(), 1.0, 1e-12);
    EXPECT_LT((denormalize_frame(v, p).joints() - f.joints()).cwiseAbs().maxCoeff(), 1e-12);

    JointMatrix collapsed = JointMatrix::Zero();
    EXPECT_THROW(normalize_frame(PoseFrame(collapsed)), DegenerateInput);
}

TEST(KMeans, DeterministicAndNoWorseThanRandomChoices) {
    const auto frames = corpus(52, 6, 40);
    const auto points = normalize_frames(frames);
    CodebookTrainingOptions o;
    o.size = 12;
    o.seed = 5;
    const auto a = kmeans(points, o), b = kmeans(points, o);
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.assignment, b.assignment);
    EXPECT_TRUE(a.converged);
    EXPECT_LE(a.inertia, oracle::random_assignment_inertia(points, 12, 50, 9));
    o.size = frames.size() + 1;
    EXPECT_THROW(kmeans(points, o), CorpusTooSmall);
}

TEST(Codebook, NearestMatchesExhaustiveScan) {
    const auto frames = corpus(53, 8, 40);
    std::mt19937_64 rng(54);
    for (std::size_t m : {1u, 2u, 7u, 16u, 33u, 64u}) {
        CodebookTrainingOptions o;
        o.size = m;
        const auto cb = train_codebook(frames, o);
        for (int t = 0; t < 200; ++t) {
            const auto v = normalize_frame(frames[rng() % frames.size()]) + 0.05 * FrameVector::Random();
            EXPECT_EQ(cb.nearest(v), oracle::exhaustive_nearest(cb.centroids(), v));
        }
    }
}

TEST(Codebook, TiesGoToLowestIndex) {
    FrameVector a = FrameVector::Zero(), b = FrameVector::Zero();
    a(0) = 1;
    b(0) = -1;
    const Codebook cb({a, b, a});
    EXPECT_EQ(cb.nearest(FrameVector::Zero()), 0u);
    EXPECT_EQ(cb.nearest(a), 0u);
}

TEST(Codebook, SaveLoadRoundTrip) {
    CodebookTrainingOptions o;
    o.size = 8;
    const auto cb = train_codebook(corpus(55, 3, 30), o);
    std::stringstream ss;
    cb.save(ss);
    const auto back = Codebook::load(ss);
    EXPECT_EQ(back.centroids(), cb.centroids());
    EXPECT_EQ(back.fingerprint(), cb.fingerprint());

    std::string text;
    {
        std::stringstream s2;
        cb.save(s2);
        text = s2.str();
    }
    const auto pos = text.find('\n', text.find("fingerprint"));
    text[pos + 1] = text[pos + 1] == '1' ? '2' : '1';
    std::stringstream tampered(text);
    EXPECT_THROW(Codebook::load(tampered), FormatError);
}

TEST(Codebook, GoldenFile) {
    std::vector<FrameVector> c(3, FrameVector::Zero());
    for (Eigen::Index i = 0; i < 51; ++i) {
        c[1](i) = static_cast<double>(i) * 0.25 - 6.0;
        c[2](i) = (i % 2 ? -0.125 : 0.125) * static_cast<double>(i % 7);
    }
    const Codebook cb(c);
    std::stringstream ss;
    cb.save(ss);
    const auto golden = io::read_text(std::string(EXPERTAF_SOURCE_DIR) + "/tests/golden/codebook_v1.txt");
    EXPECT_EQ(ss.str(), golden);
    std::istringstream in(golden);
    EXPECT_EQ(Codebook::load(in).centroids(), c);
}

TEST(Codec, EncodeDecodeIdempotent) {
    CodebookTrainingOptions o;
    o.size = 32;
    const auto cb = train_codebook(corpus(56, 10, 40), o);
    std::mt19937_64 rng(57);
    for (int t = 0; t < 100; ++t) {
        const auto seq = synthetic::random_motion(rng, 10, 32.0, "x");
        const auto tokens = encode(seq, cb);
        const auto again = encode(decode(tokens, cb), cb);
        EXPECT_EQ(again.tokens, tokens.tokens);
        const auto params = normalization_params(seq);
        EXPECT_EQ(encode(decode(tokens, cb, params), cb).tokens, tokens.tokens);
    }
}

TEST(Codec, CorpusSizedCodebookIsLossless) {
    const auto frames = corpus(58, 2, 20);
    CodebookTrainingOptions o;
    o.size = frames.size();
    const auto cb = train_codebook(frames, o);
    const PoseSequence seq(frames, 32.0);
    const auto rec = decode(encode(seq, cb), cb, normalization_params(seq));
    EXPECT_LT(pa_mpjpe(rec, seq), 1e-6);
}

TEST(Codec, Errors) {
    CodebookTrainingOptions o;
    o.size = 4;
    const auto cb = train_codebook(corpus(59, 1, 20), o);
    o.seed = 99;
    o.size = 5;
    const auto other = train_codebook(corpus(59, 1, 20), o);
    std::mt19937_64 rng(60);
    auto tokens = encode(synthetic::random_motion(rng, 5, 32.0, "x"), cb);
    EXPECT_THROW(decode(tokens, other), CodebookMismatch);
    tokens.tokens[2] = 4;
    EXPECT_THROW(decode(tokens, cb), TokenOutOfRange);
    tokens.tokens.clear();
    EXPECT_THROW(decode(tokens, cb), InvalidPose);
}

TEST(Codec, TokenFileRoundTrip) {
    CodebookTrainingOptions o;
    o.size = 4;
    const auto cb = train_codebook(corpus(61, 1, 20), o);
    std::mt19937_64 rng(62);
    const auto tokens = encode(synthetic::random_motion(rng, 7, 30.0, "clip-3"), cb);
    std::stringstream ss;
    io::write_tokens(ss, tokens);
    EXPECT_EQ(io::read_tokens(ss), tokens);
}
