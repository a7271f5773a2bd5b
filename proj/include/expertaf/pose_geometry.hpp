#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "expertaf/error.hpp"

namespace expertaf {

inline constexpr std::size_t kNumJoints = 17;

/// MS-COCO 17-keypoint order.
enum class Joint : std::size_t {
    Nose = 0,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
};

inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "nose",       "left_eye",       "right_eye",      "left_ear",    "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
    "right_wrist", "left_hip",      "right_hip",      "left_knee",   "right_knee",
    "left_ankle", "right_ankle",
};

constexpr std::size_t index_of(Joint j) noexcept { return static_cast<std::size_t>(j); }

using JointMatrix = Eigen::Matrix<double, kNumJoints, 3, Eigen::RowMajor>;
using PointCloud = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// One skeleton: 17 joints in meters, rows in COCO order.
class PoseFrame {
public:
    PoseFrame() : joints_(JointMatrix::Zero()) {}

    explicit PoseFrame(const JointMatrix& joints) : joints_(joints) {
        if (!joints_.allFinite()) throw InvalidPose("pose frame contains a non-finite coordinate");
    }

    const JointMatrix& joints() const noexcept { return joints_; }
    Eigen::Vector3d joint(std::size_t i) const { return joints_.row(static_cast<Eigen::Index>(i)).transpose(); }
    Eigen::Vector3d joint(Joint j) const { return joint(index_of(j)); }

    friend bool operator==(const PoseFrame& a, const PoseFrame& b) { return a.joints_ == b.joints_; }

private:
    JointMatrix joints_;
};

/// Half-open frame range [start_frame, start_frame + length_frames).
struct Window {
    std::size_t start_frame = 0;
    std::size_t length_frames = 1;

    std::size_t end_frame() const noexcept { return start_frame + length_frames; }
    friend bool operator==(const Window&, const Window&) = default;
};

class PoseSequence {
public:
    PoseSequence(std::vector<PoseFrame> frames, double fps, std::string source_id = {})
        : frames_(std::move(frames)), fps_(fps), source_id_(std::move(source_id)) {
        if (frames_.empty()) throw InvalidPose("pose sequence needs at least one frame");
        if (!(fps_ > 0.0) || !std::isfinite(fps_)) throw InvalidPose("pose sequence fps must be positive");
    }

    std::size_t size() const noexcept { return frames_.size(); }
    double fps() const noexcept { return fps_; }
    const std::string& source_id() const noexcept { return source_id_; }
    const std::vector<PoseFrame>& frames() const noexcept { return frames_; }
    const PoseFrame& operator[](std::size_t i) const { return frames_[i]; }

    std::span<const PoseFrame> view() const noexcept { return frames_; }

    std::span<const PoseFrame> view(const Window& w) const {
        check(w);
        return std::span<const PoseFrame>(frames_).subspan(w.start_frame, w.length_frames);
    }

    PoseSequence slice(const Window& w) const {
        auto v = view(w);
        return PoseSequence(std::vector<PoseFrame>(v.begin(), v.end()), fps_, source_id_);
    }

    void check(const Window& w) const {
        if (w.length_frames == 0 || w.end_frame() > frames_.size())
            throw InvalidWindow("window [" + std::to_string(w.start_frame) + ", " +
                                std::to_string(w.end_frame()) + ") outside sequence of " +
                                std::to_string(frames_.size()) + " frames");
    }

    friend bool operator==(const PoseSequence&, const PoseSequence&) = default;

private:
    std::vector<PoseFrame> frames_;
    double fps_;
    std::string source_id_;
};

/// x -> scale * rotation * x + translation, rotation proper.
struct SimilarityTransform {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return scale * (rotation * p) + translation; }

    template <typename Derived>
    PointCloud apply(const Eigen::MatrixBase<Derived>& points) const {
        PointCloud out = scale * (points * rotation.transpose());
        out.rowwise() += translation.transpose();
        return out;
    }

    PoseFrame apply(const PoseFrame& f) const {
        JointMatrix m = scale * (f.joints() * rotation.transpose());
        m.rowwise() += translation.transpose();
        return PoseFrame(m);
    }

    bool is_valid(double tol = 1e-9) const {
        return scale > 0.0 && std::isfinite(scale) && translation.allFinite() &&
               (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
               std::abs(rotation.determinant() - 1.0) <= tol;
    }
};

struct ProcrustesOptions {
    /// Off gives a rigid (rotation + translation) fit.
    bool allow_scale = true;
};

struct ProcrustesFit {
    SimilarityTransform transform;
    /// Sum of squared distances between transformed source and target, m^2.
    double residual = 0.0;
};

/// Mean squared distance to the centroid below which a point set counts as
/// collapsed to a single point.
inline constexpr double kDegenerateSpreadM2 = 1e-18;

/// Least-squares similarity transform taking `source` onto `target`
/// (Umeyama). Reflections are suppressed by flipping the weakest singular
/// direction, so the rotation always has determinant +1.
template <typename SourceDerived, typename TargetDerived>
ProcrustesFit procrustes_fit(const Eigen::MatrixBase<SourceDerived>& source,
                             const Eigen::MatrixBase<TargetDerived>& target,
                             const ProcrustesOptions& options = {}) {
    static_assert(SourceDerived::ColsAtCompileTime == 3 || SourceDerived::ColsAtCompileTime == Eigen::Dynamic);
    if (source.cols() != 3 || target.cols() != 3)
        throw ShapeMismatch("procrustes_fit expects m x 3 point matrices");
    if (source.rows() != target.rows())
        throw ShapeMismatch("procrustes_fit: point counts differ (" + std::to_string(source.rows()) + " vs " +
                            std::to_string(target.rows()) + ")");
    const Eigen::Index m = source.rows();
    if (m < 3) throw ShapeMismatch("procrustes_fit needs at least 3 points");

    const Eigen::RowVector3d mu_src = source.colwise().mean();
    const Eigen::RowVector3d mu_tgt = target.colwise().mean();
    const auto src_c = (source.rowwise() - mu_src).eval();
    const auto tgt_c = (target.rowwise() - mu_tgt).eval();

    const double inv_m = 1.0 / static_cast<double>(m);
    const double var_src = src_c.squaredNorm() * inv_m;
    const double var_tgt = tgt_c.squaredNorm() * inv_m;
    if (!(var_src > kDegenerateSpreadM2) || !(var_tgt > kDegenerateSpreadM2))
        throw DegenerateInput("procrustes_fit: point set has no spread after centering");

    const Eigen::Matrix3d cov = (tgt_c.transpose() * src_c) * inv_m;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d sign = Eigen::Vector3d::Ones();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign(2) = -1.0;

    ProcrustesFit fit;
    SimilarityTransform& tf = fit.transform;
    tf.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
    tf.scale = options.allow_scale ? svd.singularValues().dot(sign) / var_src : 1.0;
    if (!(tf.scale > 0.0)) throw DegenerateInput("procrustes_fit: non-positive optimal scale");
    tf.translation = mu_tgt.transpose() - tf.scale * (tf.rotation * mu_src.transpose());

    const PointCloud moved = tf.apply(source);
    fit.residual = (moved - target).squaredNorm();
    return fit;
}

enum class AlignMode { PerFrame, PerSequence };

inline std::string_view to_string(AlignMode m) { return m == AlignMode::PerFrame ? "PerFrame" : "PerSequence"; }

inline AlignMode parse_align_mode(std::string_view s) {
    if (s == "PerFrame" || s == "per-frame" || s == "per_frame") return AlignMode::PerFrame;
    if (s == "PerSequence" || s == "per-sequence" || s == "per_sequence") return AlignMode::PerSequence;
    throw ConfigError("unknown alignment mode '" + std::string(s) + "'");
}

struct PaMpjpeOptions {
    AlignMode mode = AlignMode::PerFrame;
    bool allow_scale = true;
};

namespace detail {

template <typename Derived>
double mean_joint_error(const PointCloud& moved, const Eigen::MatrixBase<Derived>& target) {
    return (moved - target).rowwise().norm().mean();
}

} // namespace detail

/// PA-MPJPE in millimeters. `predicted` is aligned onto `reference`, either
/// one similarity transform per frame pair or one for the whole stack.
inline double pa_mpjpe(std::span<const PoseFrame> predicted, std::span<const PoseFrame> reference,
                       const PaMpjpeOptions& options = {}) {
    if (predicted.size() != reference.size())
        throw LengthMismatch("pa_mpjpe: frame counts differ (" + std::to_string(predicted.size()) + " vs " +
                             std::to_string(reference.size()) + ")");
    if (predicted.empty()) throw LengthMismatch("pa_mpjpe: empty sequences");
    const ProcrustesOptions fit_options{options.allow_scale};

    if (options.mode == AlignMode::PerFrame) {
        double total = 0.0;
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            const JointMatrix& p = predicted[i].joints();
            const JointMatrix& r = reference[i].joints();
            const auto fit = procrustes_fit(p, r, fit_options);
            total += detail::mean_joint_error(fit.transform.apply(p), r);
        }
        return 1000.0 * total / static_cast<double>(predicted.size());
    }

    const auto n = static_cast<Eigen::Index>(predicted.size() * kNumJoints);
    PointCloud p(n, 3), r(n, 3);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i * kNumJoints);
        p.middleRows<kNumJoints>(row) = predicted[i].joints();
        r.middleRows<kNumJoints>(row) = reference[i].joints();
    }
    const auto fit = procrustes_fit(p, r, fit_options);
    return 1000.0 * detail::mean_joint_error(fit.transform.apply(p), r);
}

inline double pa_mpjpe(const PoseSequence& predicted, const PoseSequence& reference,
                       const PaMpjpeOptions& options = {}) {
    return pa_mpjpe(predicted.view(), reference.view(), options);
}

} // namespace expertaf
