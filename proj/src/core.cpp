#include "cosm/core.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace cosm {

PointCloud::PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!points_[i].allFinite()) {
            throw std::invalid_argument("point " + std::to_string(i) + " has a non-finite coordinate");
        }
    }
}

BoundingBox bounding_box(const PointCloud& cloud) {
    if (cloud.empty()) {
        throw std::invalid_argument("bounding box of an empty cloud");
    }
    BoundingBox box{cloud[0], cloud[0]};
    for (const auto& p : cloud) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    return box;
}

RigidTransform::RigidTransform(const Matrix3& rotation, const Point3& translation)
    : rotation_(rotation), translation_(translation) {
    if (!rotation_.allFinite() || !translation_.allFinite()) {
        throw std::invalid_argument("rigid transform has non-finite entries");
    }
    if (rotation_defect() > kTolerance) {
        throw std::invalid_argument("rotation is not orthonormal with determinant +1");
    }
}

RigidTransform RigidTransform::from_homogeneous(const Matrix4& m) {
    if (m.row(3).transpose() != Eigen::Vector4d(0, 0, 0, 1)) {
        throw std::invalid_argument("homogeneous matrix must have last row (0 0 0 1)");
    }
    return RigidTransform(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

RigidTransform RigidTransform::inverse() const {
    const Matrix3 rt = rotation_.transpose();
    return RigidTransform(Unchecked{}, rt, -(rt * translation_));
}

Matrix4 RigidTransform::homogeneous() const {
    Matrix4 m = Matrix4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
}

double RigidTransform::rotation_defect() const {
    const double ortho = (rotation_.transpose() * rotation_ - Matrix3::Identity()).norm();
    return std::max(ortho, std::abs(rotation_.determinant() - 1.0));
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return RigidTransform(RigidTransform::Unchecked{}, a.rotation_ * b.rotation_,
                          a.rotation_ * b.translation_ + a.translation_);
}

PointCloud apply(const RigidTransform& t, const PointCloud& cloud) {
    std::vector<Point3> out;
    out.reserve(cloud.size());
    for (const auto& p : cloud) {
        out.push_back(t(p));
    }
    return PointCloud(std::move(out));
}

bool EulerPose::finite() const {
    return std::isfinite(roll) && std::isfinite(pitch) && std::isfinite(yaw) && std::isfinite(tx) &&
           std::isfinite(ty) && std::isfinite(tz);
}

Matrix3 rot_x(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Matrix3 r;
    r << 1, 0, 0,
         0, c, -s,
         0, s, c;
    return r;
}

Matrix3 rot_y(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Matrix3 r;
    r << c, 0, s,
         0, 1, 0,
         -s, 0, c;
    return r;
}

Matrix3 rot_z(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Matrix3 r;
    r << c, -s, 0,
         s, c, 0,
         0, 0, 1;
    return r;
}

RigidTransform euler_to_transform(const EulerPose& pose) {
    if (!pose.finite()) {
        throw std::invalid_argument("pose has non-finite fields");
    }
    return RigidTransform(rot_z(pose.yaw) * rot_y(pose.pitch) * rot_x(pose.roll),
                          Point3(pose.tx, pose.ty, pose.tz));
}

double rotation_angle_between(const Matrix3& a, const Matrix3& b) {
    // atan2 of the skew and trace parts; acos of the trace alone loses precision near 0.
    const Matrix3 r = a.transpose() * b;
    const Eigen::Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0));
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::CoSM: return "cosm";
        case Method::StandardSVD: return "svd";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "cosm") return Method::CoSM;
    if (lower == "svd" || lower == "standardsvd") return Method::StandardSVD;
    throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected cosm or svd)");
}

void RegistrationConfig::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    if (!(rmse_abs_tol >= 0.0) || !(rmse_rel_tol >= 0.0)) {
        throw std::invalid_argument("tolerances must be nonnegative");
    }
}

}  // namespace cosm
