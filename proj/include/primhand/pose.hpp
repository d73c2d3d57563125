#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>

#include "primhand/core.hpp"
#include "primhand/dictionary.hpp"
#include "primhand/errors.hpp"

namespace primhand {

// Four object-frame contact points and the fingers they belong to. Four
// non-coplanar correspondences pin down a full affine transform, which is how
// the object pose becomes a linear function of the fingertip positions.
struct ContactTemplate {
    std::array<int, 4> fingers{0, 1, 2, 3};  // indices into the 5 fingertips
    std::array<Eigen::Vector3d, 4> points{};

    void validate() const {
        for (int f : fingers)
            if (f < 0 || f >= kFingerCount) throw ValidationError("template finger index out of range");
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b)
                if (fingers[static_cast<std::size_t>(a)] == fingers[static_cast<std::size_t>(b)])
                    throw ValidationError("template finger indices must be distinct");
        for (const auto& p : points)
            if (!p.allFinite()) throw ValidationError("template point not finite");
    }
};

// 12 affine parameters ordered (a,d,g,t_x, b,e,h,t_y, c,f,m,t_z): row-wise
// entries of the 3x3 linear block followed by that row's translation.
using AffineParams = Eigen::Matrix<double, 12, 1>;

inline Eigen::Matrix3d affine_linear_block(const AffineParams& p) {
    Eigen::Matrix3d M;
    M << p[0], p[1], p[2],
         p[4], p[5], p[6],
         p[8], p[9], p[10];
    return M;
}

inline Eigen::Vector3d affine_translation(const AffineParams& p) {
    return {p[3], p[7], p[11]};
}

inline AffineParams affine_from_parts(const Eigen::Matrix3d& M, const Eigen::Vector3d& t) {
    AffineParams p;
    p << M(0, 0), M(0, 1), M(0, 2), t.x(),
         M(1, 0), M(1, 1), M(1, 2), t.y(),
         M(2, 0), M(2, 1), M(2, 2), t.z();
    return p;
}

// ---------------------------------------------------------------------------
// The 4x4 correspondence matrix A with rows [X_i Y_i Z_i 1].

struct AMatrix {
    Eigen::Matrix4d A;
    Eigen::Matrix4d A_inv;
    double condition = 0.0;
};

inline AMatrix build_A(const ContactTemplate& tpl) {
    tpl.validate();
    AMatrix out;
    for (int i = 0; i < 4; ++i) {
        out.A.block<1, 3>(i, 0) = tpl.points[static_cast<std::size_t>(i)].transpose();
        out.A(i, 3) = 1.0;
    }
    const Eigen::JacobiSVD<Eigen::Matrix4d> svd(out.A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(3);
    if (!(smin > 0) || smax / smin > 1e8)
        throw DegenerateError("contact template is coplanar or near-singular");
    out.condition = smax / smin;
    out.A_inv = out.A.inverse();
    return out;
}

// ---------------------------------------------------------------------------
// Affine interpolation through the 4 correspondences.

inline AffineParams fit_affine(const ContactTemplate& tpl,
                               const std::array<Eigen::Vector3d, 4>& world_points) {
    const AMatrix am = build_A(tpl);
    Eigen::Vector4d wx, wy, wz;
    for (int i = 0; i < 4; ++i) {
        if (!world_points[static_cast<std::size_t>(i)].allFinite())
            throw ValidationError("world point not finite");
        wx[i] = world_points[static_cast<std::size_t>(i)].x();
        wy[i] = world_points[static_cast<std::size_t>(i)].y();
        wz[i] = world_points[static_cast<std::size_t>(i)].z();
    }
    const Eigen::Vector4d rx = am.A_inv * wx;  // (a, d, g, t_x)
    const Eigen::Vector4d ry = am.A_inv * wy;  // (b, e, h, t_y)
    const Eigen::Vector4d rz = am.A_inv * wz;  // (c, f, m, t_z)
    AffineParams p;
    p << rx[0], rx[1], rx[2], rx[3],
         ry[0], ry[1], ry[2], ry[3],
         rz[0], rz[1], rz[2], rz[3];
    return p;
}

// ---------------------------------------------------------------------------
// Object pose as an affine function of the weight vector: params(h) = L h + c.

struct PoseMap {
    Eigen::MatrixXd L;  // 12 x I
    AffineParams c;
};

inline PoseMap pose_map(const Dictionary& dict, const ContactTemplate& tpl) {
    dict.validate();
    const AMatrix am = build_A(tpl);
    const Eigen::MatrixXd W_N = dict.final_rows();
    const Eigen::VectorXd off_N = dict.final_offset();

    // Per-axis stacks over the template's 4 fingers: world coord of finger f
    // is row (3f + axis) of the final block applied to h, minus its offset.
    Eigen::MatrixXd Wax[3] = {Eigen::MatrixXd(4, dict.I), Eigen::MatrixXd(4, dict.I),
                              Eigen::MatrixXd(4, dict.I)};
    Eigen::Vector4d oax[3];
    for (int i = 0; i < 4; ++i) {
        const int f = tpl.fingers[static_cast<std::size_t>(i)];
        for (int axis = 0; axis < 3; ++axis) {
            Wax[axis].row(i) = W_N.row(3 * f + axis);
            oax[axis][i] = off_N[3 * f + axis];
        }
    }
    PoseMap out;
    out.L.resize(12, dict.I);
    for (int axis = 0; axis < 3; ++axis) {
        out.L.middleRows(4 * axis, 4) = am.A_inv * Wax[axis];
        out.c.segment<4>(4 * axis) = am.A_inv * (-oax[axis]);
    }
    return out;
}

inline AffineParams apply_pose_map(const PoseMap& map, const WeightVector& h) {
    if (h.size() != map.L.cols()) throw ShapeError("weight vector length does not match pose map");
    return map.L * h + map.c;
}

// ---------------------------------------------------------------------------
// Rigid pose from affine parameters via polar decomposition.

struct ExtractedPose {
    Pose pose;
    double orthogonality_residual = 0.0;  // ||M - R||_F
};

inline ExtractedPose extract_pose(const AffineParams& params) {
    if (!params.allFinite()) throw ValidationError("affine params not finite");
    const Eigen::Matrix3d M = affine_linear_block(params);
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(2);
    if (!(smin > 1e-12 * std::max(smax, 1.0)))
        throw DegenerateError("affine linear block is rank-deficient");
    Eigen::Matrix3d UVt = svd.matrixU() * svd.matrixV().transpose();
    Eigen::Vector3d d(1.0, 1.0, UVt.determinant() < 0 ? -1.0 : 1.0);
    const Eigen::Matrix3d R =
        svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    ExtractedPose out;
    out.pose = Pose(affine_translation(params), Eigen::Quaterniond(R));
    out.orthogonality_residual = (M - R).norm();
    return out;
}

// The desired pose written as affine parameters (the target side of the
// object-pose cost).
inline AffineParams pose_target(const Pose& desired, const ContactTemplate& tpl) {
    tpl.validate();
    return affine_from_parts(desired.rotation(), desired.position);
}

}  // namespace primhand
