#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>
#include <vector>

#include "primhand/errors.hpp"

namespace primhand {

inline constexpr int kFingerCount = 5;
inline constexpr int kCoordsPerFrame = 3 * kFingerCount;  // 15 coords per time instant

// Finger order is fixed everywhere: thumb, index, middle, ring, little.
inline constexpr std::array<std::string_view, kFingerCount> kFingerNames = {"th", "if", "mf",
                                                                            "rf", "lf"};

// Positions of the five fingertips at one time instant, expressed in whatever
// frame the caller is working in (usually the hand-back frame).
struct FingertipFrame {
    std::array<Eigen::Vector3d, kFingerCount> tips;

    FingertipFrame() {
        for (auto& p : tips) p.setZero();
    }

    Eigen::Vector3d& operator[](int j) { return tips[static_cast<std::size_t>(j)]; }
    const Eigen::Vector3d& operator[](int j) const { return tips[static_cast<std::size_t>(j)]; }

    void validate() const {
        for (const auto& p : tips)
            if (!p.allFinite()) throw ValidationError("fingertip frame has non-finite coordinate");
    }
};

// Rigid pose: translation + unit quaternion (canonical, scalar part >= 0).
// Euler angles (ZYX intrinsic) are offered only as an I/O convenience.
struct Pose {
    Eigen::Vector3d position{0, 0, 0};
    Eigen::Quaterniond orientation{1, 0, 0, 0};

    Pose() = default;

    Pose(const Eigen::Vector3d& pos, const Eigen::Quaterniond& q) : position(pos) {
        if (!pos.allFinite() || !q.coeffs().allFinite())
            throw ValidationError("pose has non-finite component");
        const double n = q.norm();
        if (std::abs(n - 1.0) > 1e-3)
            throw ValidationError("pose quaternion is not unit (norm deviates by > 1e-3)");
        orientation = q;
        orientation.normalize();
        canonicalize();
    }

    static Pose identity() { return Pose{}; }

    static Pose from_angle_axis(const Eigen::Vector3d& pos, double angle,
                                const Eigen::Vector3d& axis) {
        return Pose(pos, Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
    }

    // (psi, theta, phi): rotation = Rz(psi) * Ry(theta) * Rx(phi).
    static Pose from_euler_zyx(const Eigen::Vector3d& pos, double psi, double theta, double phi) {
        const Eigen::Quaterniond q = Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ()) *
                                     Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitY()) *
                                     Eigen::AngleAxisd(phi, Eigen::Vector3d::UnitX());
        return Pose(pos, q);
    }

    Eigen::Vector3d euler_zyx() const {
        const Eigen::Matrix3d R = orientation.toRotationMatrix();
        const double theta = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
        const double psi = std::atan2(R(1, 0), R(0, 0));
        const double phi = std::atan2(R(2, 1), R(2, 2));
        return {psi, theta, phi};
    }

    Eigen::Matrix3d rotation() const { return orientation.toRotationMatrix(); }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return orientation * p + position; }

    Pose inverse() const {
        const Eigen::Quaterniond qi = orientation.conjugate();
        Pose out;
        out.position = qi * (-position);
        out.orientation = qi;
        out.canonicalize();
        return out;
    }

    void canonicalize() {
        if (orientation.w() < 0) orientation.coeffs() = -orientation.coeffs();
    }
};

// Uniformly sampled fingertip trajectory. The learned dictionary assumes 1 s
// segments at 100 Hz (N = 100), but the container itself allows any N >= 1.
struct Trajectory {
    std::vector<FingertipFrame> frames;
    double rate_hz = 100.0;

    Trajectory() = default;
    Trajectory(std::vector<FingertipFrame> f, double rate) : frames(std::move(f)), rate_hz(rate) {}

    int length() const { return static_cast<int>(frames.size()); }

    void validate() const {
        if (frames.empty()) throw ValidationError("trajectory has no frames");
        if (!(rate_hz > 0)) throw ValidationError("trajectory rate must be positive");
        for (const auto& f : frames) f.validate();
    }
};

using FlatVector = Eigen::VectorXd;

// Time-major layout: all 15 coordinates of instant t precede those of t+1.
inline int flat_index(int t, int finger, int axis) {
    return kCoordsPerFrame * t + 3 * finger + axis;
}

inline FlatVector flatten(const Trajectory& traj) {
    traj.validate();
    const int n = traj.length();
    FlatVector v(kCoordsPerFrame * n);
    for (int t = 0; t < n; ++t)
        for (int j = 0; j < kFingerCount; ++j) v.segment<3>(flat_index(t, j, 0)) = traj.frames[static_cast<std::size_t>(t)][j];
    return v;
}

inline Trajectory unflatten(const FlatVector& v, double rate_hz) {
    if (v.size() % kCoordsPerFrame != 0)
        throw ShapeError("flat vector length is not a multiple of 15");
    if (v.size() == 0) throw ShapeError("flat vector is empty");
    const int n = static_cast<int>(v.size()) / kCoordsPerFrame;
    Trajectory traj;
    traj.rate_hz = rate_hz;
    traj.frames.resize(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t)
        for (int j = 0; j < kFingerCount; ++j)
            traj.frames[static_cast<std::size_t>(t)][j] = v.segment<3>(flat_index(t, j, 0));
    return traj;
}

// Express world-frame fingertips in the hand-back frame: p -> R^-1 (p - t).
inline FingertipFrame to_hand_frame(const FingertipFrame& world, const Pose& hand_back) {
    world.validate();
    const Eigen::Quaterniond qi = hand_back.orientation.conjugate();
    FingertipFrame out;
    for (int j = 0; j < kFingerCount; ++j) out[j] = qi * (world[j] - hand_back.position);
    return out;
}

inline FingertipFrame to_world_frame(const FingertipFrame& hand, const Pose& hand_back) {
    hand.validate();
    FingertipFrame out;
    for (int j = 0; j < kFingerCount; ++j) out[j] = hand_back.apply(hand[j]);
    return out;
}

// Sliding median. Even windows are widened to the next odd size; near the
// edges the window shrinks symmetrically so the output length matches the
// input. Throws on NaN input so silent corruption cannot pass through.
inline Eigen::VectorXd median_filter(const Eigen::VectorXd& series, int window) {
    if (window < 1) throw ValidationError("median filter window must be >= 1");
    const int n = static_cast<int>(series.size());
    if (n == 0) throw ValidationError("median filter input is empty");
    if (!series.allFinite()) throw ValidationError("median filter input has non-finite value");
    if (window % 2 == 0) ++window;
    const int half = window / 2;
    Eigen::VectorXd out(n);
    std::vector<double> buf;
    buf.reserve(static_cast<std::size_t>(window));
    for (int i = 0; i < n; ++i) {
        const int r = std::min({half, i, n - 1 - i});
        buf.assign(series.data() + (i - r), series.data() + (i + r + 1));
        auto mid = buf.begin() + r;
        std::nth_element(buf.begin(), mid, buf.end());
        out[i] = *mid;
    }
    return out;
}

}  // namespace primhand
