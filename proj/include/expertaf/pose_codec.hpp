#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "expertaf/error.hpp"
#include "expertaf/format.hpp"
#include "expertaf/hash.hpp"
#include "expertaf/pose_geometry.hpp"

namespace expertaf {

inline constexpr std::size_t kFrameDim = 3 * kNumJoints;
using FrameVector = Eigen::Matrix<double, kFrameDim, 1>;

/// Torso lengths below this (meters) cannot be normalized.
inline constexpr double kMinTorsoLength = 1e-6;

/// Root and scale removed by normalization. Decoding needs them back.
struct NormalizationParams {
    Eigen::Vector3d root = Eigen::Vector3d::Zero();
    double scale = 1.0;
};

/// Root = hip midpoint, scale = hip-midpoint-to-shoulder-midpoint distance.
inline NormalizationParams normalization_params(const PoseFrame& frame) {
    const Eigen::Vector3d hip = 0.5 * (frame.joint(Joint::LeftHip) + frame.joint(Joint::RightHip));
    const Eigen::Vector3d shoulder = 0.5 * (frame.joint(Joint::LeftShoulder) + frame.joint(Joint::RightShoulder));
    const double torso = (shoulder - hip).norm();
    if (!(torso >= kMinTorsoLength))
        throw DegenerateInput("torso length " + std::to_string(torso) + " m is too small to normalize");
    return {hip, torso};
}

inline FrameVector normalize_frame(const PoseFrame& frame, const NormalizationParams& params) {
    JointMatrix m = frame.joints();
    m.rowwise() -= params.root.transpose();
    m /= params.scale;
    return Eigen::Map<const FrameVector>(m.data());
}

inline FrameVector normalize_frame(const PoseFrame& frame) {
    return normalize_frame(frame, normalization_params(frame));
}

inline PoseFrame denormalize_frame(const FrameVector& v, const NormalizationParams& params = {}) {
    JointMatrix m = Eigen::Map<const JointMatrix>(v.data()) * params.scale;
    m.rowwise() += params.root.transpose();
    return PoseFrame(m);
}

/// Frame-level vector-quantization vocabulary in normalized pose space.
class Codebook {
public:
    static constexpr int kFormatVersion = 1;
    static constexpr std::string_view kNormalizationSpec = "root=hip_midpoint;scale=torso_length";

    explicit Codebook(std::vector<FrameVector> centroids) : centroids_(std::move(centroids)) {
        if (centroids_.empty()) throw CorpusTooSmall("codebook needs at least one centroid");
        for (const auto& c : centroids_)
            if (!c.allFinite()) throw FormatError("codebook centroid is not finite");
        fingerprint_ = compute_fingerprint();
    }

    std::size_t size() const noexcept { return centroids_.size(); }
    const FrameVector& centroid(std::size_t i) const { return centroids_.at(i); }
    const std::vector<FrameVector>& centroids() const noexcept { return centroids_; }

    /// Content hash; also the version tag token sequences carry.
    const std::string& fingerprint() const noexcept { return fingerprint_; }

    /// Nearest centroid by squared distance; ties go to the lowest index.
    std::size_t nearest(const FrameVector& v) const {
        std::size_t best = 0;
        double best_d = (centroids_[0] - v).squaredNorm();
        for (std::size_t i = 1; i < centroids_.size(); ++i) {
            const double d = (centroids_[i] - v).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    void save(std::ostream& out) const {
        out << "expertaf-codebook " << kFormatVersion << '\n'
            << "size " << size() << '\n'
            << "dim " << kFrameDim << '\n'
            << "normalization " << kNormalizationSpec << '\n'
            << "fingerprint " << fingerprint_ << '\n';
        for (const auto& c : centroids_) {
            for (std::size_t d = 0; d < kFrameDim; ++d) out << (d ? " " : "") << format_double(c(d));
            out << '\n';
        }
    }

    static Codebook load(std::istream& in) {
        std::string line;
        auto expect = [&](std::string_view key) {
            if (!std::getline(in, line) || line.rfind(std::string(key) + " ", 0) != 0)
                throw FormatError("codebook: expected '" + std::string(key) + "' line");
            return line.substr(key.size() + 1);
        };
        if (expect("expertaf-codebook") != std::to_string(kFormatVersion))
            throw FormatError("codebook: unsupported format version");
        const auto m = parse_int<std::size_t>(expect("size"));
        if (parse_int<std::size_t>(expect("dim")) != kFrameDim) throw FormatError("codebook: dimension must be 51");
        if (expect("normalization") != kNormalizationSpec) throw FormatError("codebook: unknown normalization");
        const std::string fingerprint = expect("fingerprint");

        std::vector<FrameVector> centroids(m);
        for (std::size_t i = 0; i < m; ++i) {
            if (!std::getline(in, line)) throw FormatError("codebook: truncated centroid table");
            std::istringstream row(line);
            std::string tok;
            std::size_t d = 0;
            while (row >> tok) {
                if (d == kFrameDim) throw FormatError("codebook: centroid row has too many values");
                centroids[i](d++) = parse_double(tok);
            }
            if (d != kFrameDim) throw FormatError("codebook: centroid row has too few values");
        }
        Codebook cb(std::move(centroids));
        if (cb.fingerprint() != fingerprint) throw FormatError("codebook: fingerprint does not match contents");
        return cb;
    }

private:
    std::string compute_fingerprint() const {
        std::uint64_t h = fnv1a64(kNormalizationSpec);
        for (const auto& c : centroids_)
            for (std::size_t d = 0; d < kFrameDim; ++d) h = fnv1a64(format_double(c(d)) + ";", h);
        return hex64(h);
    }

    std::vector<FrameVector> centroids_;
    std::string fingerprint_;
};

struct CodebookTrainingOptions {
    std::size_t size = 512;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 200;
    /// Stop when inertia changes by less than this fraction.
    double relative_tolerance = 1e-6;
};

struct KMeansResult {
    std::vector<FrameVector> centroids;
    std::vector<std::size_t> assignment;
    /// Sum of squared distances to assigned centroids.
    double inertia = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

namespace detail {

inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double assign_points(const std::vector<FrameVector>& points, const std::vector<FrameVector>& centroids,
                            std::vector<std::size_t>& assignment, std::vector<double>& dist) {
    double inertia = 0.0;
    for (std::size_t p = 0; p < points.size(); ++p) {
        std::size_t best = 0;
        double best_d = (centroids[0] - points[p]).squaredNorm();
        for (std::size_t c = 1; c < centroids.size(); ++c) {
            const double d = (centroids[c] - points[p]).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        assignment[p] = best;
        dist[p] = best_d;
        inertia += best_d;
    }
    return inertia;
}

} // namespace detail

/// Seeded k-means++ then Lloyd iterations over normalized vectors.
inline KMeansResult kmeans(const std::vector<FrameVector>& points, const CodebookTrainingOptions& options) {
    const std::size_t k = options.size;
    if (k == 0) throw CorpusTooSmall("codebook size must be >= 1");
    if (points.size() < k)
        throw CorpusTooSmall("corpus has " + std::to_string(points.size()) + " frames, fewer than " +
                             std::to_string(k) + " centroids");

    std::mt19937_64 rng(options.seed);
    KMeansResult res;
    res.centroids.reserve(k);
    std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());

    res.centroids.push_back(points[rng() % points.size()]);
    while (res.centroids.size() < k) {
        double total = 0.0;
        for (std::size_t p = 0; p < points.size(); ++p) {
            d2[p] = std::min(d2[p], (points[p] - res.centroids.back()).squaredNorm());
            total += d2[p];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = detail::unit_draw(rng) * total;
            pick = points.size() - 1;
            for (std::size_t p = 0; p < points.size(); ++p) {
                if (d2[p] <= 0.0) continue;
                if (target < d2[p]) {
                    pick = p;
                    break;
                }
                target -= d2[p];
            }
            while (d2[pick] <= 0.0 && pick > 0) --pick;
        } else {
            pick = rng() % points.size();
        }
        res.centroids.push_back(points[pick]);
    }

    res.assignment.assign(points.size(), 0);
    std::vector<double> dist(points.size(), 0.0);
    double previous = std::numeric_limits<double>::infinity();
    bool assigned_current = false;
    for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
        res.inertia = detail::assign_points(points, res.centroids, res.assignment, dist);
        assigned_current = true;
        if (res.inertia == 0.0 ||
            (std::isfinite(previous) && std::abs(previous - res.inertia) <= options.relative_tolerance * previous)) {
            res.converged = true;
            break;
        }
        previous = res.inertia;

        std::vector<FrameVector> sums(k, FrameVector::Zero());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t p = 0; p < points.size(); ++p) {
            sums[res.assignment[p]] += points[p];
            ++counts[res.assignment[p]];
        }
        std::vector<bool> taken(points.size(), false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                res.centroids[c] = sums[c] / static_cast<double>(counts[c]);
                continue;
            }
            // Empty cluster: move it onto the worst-served point.
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t p = 0; p < points.size(); ++p)
                if (!taken[p] && dist[p] > far_d) {
                    far_d = dist[p];
                    far = p;
                }
            taken[far] = true;
            dist[far] = 0.0;
            res.centroids[c] = points[far];
        }
        assigned_current = false;
    }
    if (!assigned_current) res.inertia = detail::assign_points(points, res.centroids, res.assignment, dist);
    return res;
}

inline std::vector<FrameVector> normalize_frames(std::span<const PoseFrame> frames) {
    std::vector<FrameVector> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(normalize_frame(f));
    return out;
}

/// Puts a centroid back on the normalized-pose manifold (root at the origin,
/// unit torso). A mean of normalized poses usually has a shorter torso, and
/// decoding then re-encoding such a centroid could land on a neighbour.
inline FrameVector canonical_centroid(const FrameVector& c) {
    try {
        return normalize_frame(denormalize_frame(c));
    } catch (const DegenerateInput&) {
        return c;
    }
}

inline Codebook train_codebook(std::span<const PoseFrame> frames, const CodebookTrainingOptions& options) {
    auto centroids = kmeans(normalize_frames(frames), options).centroids;
    for (auto& c : centroids) c = canonical_centroid(c);
    return Codebook(std::move(centroids));
}

struct TokenSequence {
    std::vector<std::size_t> tokens;
    double fps = 32.0;
    std::string source_id;
    std::string codebook_fingerprint;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

inline TokenSequence encode(const PoseSequence& pose, const Codebook& cb) {
    TokenSequence out{{}, pose.fps(), pose.source_id(), cb.fingerprint()};
    out.tokens.reserve(pose.size());
    for (const auto& f : pose.frames()) out.tokens.push_back(cb.nearest(normalize_frame(f)));
    return out;
}

namespace detail {

inline void check_tokens(const TokenSequence& tokens, const Codebook& cb) {
    if (!tokens.codebook_fingerprint.empty() && tokens.codebook_fingerprint != cb.fingerprint())
        throw CodebookMismatch("tokens were produced by codebook " + tokens.codebook_fingerprint + ", not " +
                               cb.fingerprint());
    if (tokens.tokens.empty()) throw InvalidPose("cannot decode an empty token sequence");
    for (std::size_t t : tokens.tokens)
        if (t >= cb.size())
            throw TokenOutOfRange("token " + std::to_string(t) + " >= codebook size " + std::to_string(cb.size()));
}

} // namespace detail

/// Every frame gets the same root and scale.
inline PoseSequence decode(const TokenSequence& tokens, const Codebook& cb, double reference_scale = 1.0,
                           const Eigen::Vector3d& reference_root = Eigen::Vector3d::Zero()) {
    detail::check_tokens(tokens, cb);
    const NormalizationParams params{reference_root, reference_scale};
    std::vector<PoseFrame> frames;
    frames.reserve(tokens.tokens.size());
    for (std::size_t t : tokens.tokens) frames.push_back(denormalize_frame(cb.centroid(t), params));
    return PoseSequence(std::move(frames), tokens.fps, tokens.source_id);
}

/// Per-frame root and scale, e.g. those measured on the encoded sequence.
inline PoseSequence decode(const TokenSequence& tokens, const Codebook& cb,
                           std::span<const NormalizationParams> per_frame) {
    detail::check_tokens(tokens, cb);
    if (per_frame.size() != tokens.tokens.size())
        throw LengthMismatch("decode: one normalization entry per token required");
    std::vector<PoseFrame> frames;
    frames.reserve(tokens.tokens.size());
    for (std::size_t i = 0; i < tokens.tokens.size(); ++i)
        frames.push_back(denormalize_frame(cb.centroid(tokens.tokens[i]), per_frame[i]));
    return PoseSequence(std::move(frames), tokens.fps, tokens.source_id);
}

inline std::vector<NormalizationParams> normalization_params(const PoseSequence& pose) {
    std::vector<NormalizationParams> out;
    out.reserve(pose.size());
    for (const auto& f : pose.frames()) out.push_back(normalization_params(f));
    return out;
}

} // namespace expertaf
