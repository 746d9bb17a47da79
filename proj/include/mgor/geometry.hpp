#pragma once

#include <Eigen/Dense>

namespace mgor {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Proper rigid motion x -> R x + p.
struct RigidTransform {
    Vec3 position = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();

    static RigidTransform identity() { return {}; }
    static RigidTransform translation(const Vec3& p) { return {p, Mat3::Identity()}; }
    static RigidTransform rotation_about(const Vec3& axis, double angle) {
        return {Vec3::Zero(), Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix()};
    }

    Vec3 apply(const Vec3& x) const { return rotation * x + position; }
    Vec3 apply_direction(const Vec3& v) const { return rotation * v; }

    RigidTransform operator*(const RigidTransform& rhs) const {
        return {rotation * rhs.position + position, rotation * rhs.rotation};
    }

    RigidTransform inverse() const {
        const Mat3 rt = rotation.transpose();
        return {-(rt * position), rt};
    }
};

/// Rotation matrix for a rotation vector (axis * angle).
inline Mat3 exp_so3(const Vec3& omega) {
    const double angle = omega.norm();
    if (angle == 0.0) return Mat3::Identity();
    return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

/// Project a nearly-orthonormal matrix back onto SO(3).
inline Mat3 reorthonormalize(const Mat3& r) {
    return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

inline double orthonormality_error(const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

} // namespace mgor
