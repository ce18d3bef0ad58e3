#pragma once

// Rigid-body poses, the pinhole camera and world-to-image projection.
//
// Frames: the world is right-handed and z-up. Cameras look down +z with x to
// the right and y down, so the projected depth is the camera-frame z and
// pixel (0, 0) is the top-left corner of the image.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <optional>
#include <string>

#include "rasterdrive/error.hpp"

namespace rasterdrive {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Rigid transform x -> rotation * x + translation.
struct SE3Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static SE3Pose identity() { return {}; }

    static SE3Pose from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

    /// Rotation about world z by `yaw` radians, then translation.
    static SE3Pose from_yaw(double yaw, const Vec3& t = Vec3::Zero()) {
        return {Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(), t};
    }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    /// Yaw of the body x axis projected onto the ground plane.
    double yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = rotation;
        m.topRightCorner<3, 1>() = translation;
        return m;
    }

    /// max |R^T R - I|, the orthonormality defect of the rotation block.
    double orthonormality_error() const {
        return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    }

    bool is_valid(double tol = 1e-9) const {
        return rotation.allFinite() && is_finite(translation) && orthonormality_error() < tol &&
               std::abs(rotation.determinant() - 1.0) < tol;
    }
};

/// (a ∘ b)(x) = a(b(x)).
inline SE3Pose compose(const SE3Pose& a, const SE3Pose& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline SE3Pose invert(const SE3Pose& p) {
    Mat3 rt = p.rotation.transpose();
    return {rt, -(rt * p.translation)};
}

/// Geodesic blend between two poses: translation linear, rotation along the
/// shortest arc. s = 0 gives `a` exactly, s = 1 gives `b` exactly.
inline SE3Pose interpolate_pose(const SE3Pose& a, const SE3Pose& b, double s) {
    if (s == 0.0) return a;
    if (s == 1.0) return b;
    Eigen::AngleAxisd delta(Mat3(a.rotation.transpose() * b.rotation));
    Mat3 step = Eigen::AngleAxisd(delta.angle() * s, delta.axis()).toRotationMatrix();
    return {a.rotation * step, a.translation + s * (b.translation - a.translation)};
}

struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    /// Upper-triangular K with zero skew.
    Mat3 matrix() const {
        Mat3 k;
        k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
        return k;
    }

    bool is_valid() const {
        return fx > 0.0 && fy > 0.0 && std::isfinite(fx) && std::isfinite(fy) &&
               std::isfinite(cx) && std::isfinite(cy);
    }
};

inline constexpr double kDefaultZNear = 0.1;

struct CameraRig {
    CameraIntrinsics intrinsics;
    SE3Pose world_to_camera;
    double z_near = kDefaultZNear;
    int width = 1024;
    int height = 576;

    bool is_valid() const {
        return intrinsics.is_valid() && world_to_camera.is_valid(1e-6) && z_near > 0.0 &&
               width >= 1 && height >= 1;
    }

    void validate() const {
        if (!intrinsics.is_valid()) throw InvariantError("camera intrinsics need fx, fy > 0");
        if (!world_to_camera.is_valid(1e-6))
            throw InvariantError("camera extrinsics are not a rigid transform");
        if (!(z_near > 0.0)) throw InvariantError("camera z_near must be positive");
        if (width < 1 || height < 1) throw InvariantError("camera image size must be >= 1");
    }
};

struct ProjectedPoint {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

/// Pixel coordinates of a camera-frame point, no culling. Callers guarantee
/// z > 0.
inline ProjectedPoint project_camera_point(const Vec3& pc, const CameraIntrinsics& k) {
    const double ux = k.fx * pc.x() + k.cx * pc.z();
    const double uy = k.fy * pc.y() + k.cy * pc.z();
    const double uz = pc.z();
    return {ux / uz, uy / uz, uz};
}

/// K · T_{w->c} · [p; 1] followed by perspective division. Points closer than
/// the near plane are culled; off-screen points are still returned.
/// Evaluated in extended precision and rounded once: close to the near plane
/// the division amplifies rounding in the camera-frame point by fx·x/z².
inline std::optional<ProjectedPoint> project(const Vec3& point, const CameraRig& rig) {
    using L = long double;
    const Mat3& r = rig.world_to_camera.rotation;
    const Vec3& t = rig.world_to_camera.translation;
    L pc[3];
    for (int k = 0; k < 3; ++k)
        pc[k] = static_cast<L>(t[k]) + static_cast<L>(r(k, 0)) * point.x() + static_cast<L>(r(k, 1)) * point.y() +
                static_cast<L>(r(k, 2)) * point.z();
    if (pc[2] < rig.z_near) return std::nullopt;
    const CameraIntrinsics& k = rig.intrinsics;
    return ProjectedPoint{static_cast<double>((k.fx * pc[0] + k.cx * pc[2]) / pc[2]),
                          static_cast<double>((k.fy * pc[1] + k.cy * pc[2]) / pc[2]), static_cast<double>(pc[2])};
}

/// Rotation taking camera axes (x right, y down, z forward) to a body frame
/// with x forward, y left, z up.
inline Mat3 camera_to_body_axes() {
    Mat3 r;
    // columns: camera x, y, z expressed in the body frame
    r << 0.0, 0.0, 1.0,
        -1.0, 0.0, 0.0,
         0.0, -1.0, 0.0;
    return r;
}

/// Camera pose in the carrier's body frame. `pitch` > 0 tilts the optical
/// axis upward; `yaw` > 0 turns it to the left.
inline SE3Pose camera_mount(const Vec3& position, double yaw = 0.0, double pitch = 0.0) {
    Mat3 body = (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(-pitch, Vec3::UnitY()))
                    .toRotationMatrix();
    if (yaw == 0.0 && pitch == 0.0) body = Mat3::Identity();
    return {body * camera_to_body_axes(), position};
}

/// World-to-camera extrinsics for a camera mounted on a carrier whose body
/// pose in the world is `carrier`.
inline SE3Pose mounted_extrinsics(const SE3Pose& carrier, const SE3Pose& mount) {
    return compose(invert(mount), invert(carrier));
}

}  // namespace rasterdrive
