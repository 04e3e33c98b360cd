#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cosm {

using Point3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;

/// Ordered, immutable list of 3D points. Every coordinate is finite.
class PointCloud {
public:
    PointCloud() = default;

    /// Throws std::invalid_argument if any coordinate is NaN or infinite.
    explicit PointCloud(std::vector<Point3> points);

    std::span<const Point3> points() const { return points_; }
    const Point3& operator[](std::size_t i) const { return points_[i]; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }

    auto begin() const { return points_.begin(); }
    auto end() const { return points_.end(); }

    friend bool operator==(const PointCloud& a, const PointCloud& b) { return a.points_ == b.points_; }

private:
    std::vector<Point3> points_;
};

struct BoundingBox {
    Point3 min;
    Point3 max;

    double diagonal() const { return (max - min).norm(); }
    bool contains(const Point3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

BoundingBox bounding_box(const PointCloud& cloud);

/// Rigid motion x -> R x + t with R a proper rotation.
class RigidTransform {
public:
    static constexpr double kTolerance = 1e-9;

    RigidTransform() : rotation_(Matrix3::Identity()), translation_(Point3::Zero()) {}

    /// Throws std::invalid_argument unless `rotation` is orthonormal with det +1
    /// (both within kTolerance) and all entries are finite.
    RigidTransform(const Matrix3& rotation, const Point3& translation);

    static RigidTransform identity() { return {}; }
    static RigidTransform from_homogeneous(const Matrix4& m);

    const Matrix3& rotation() const { return rotation_; }
    const Point3& translation() const { return translation_; }

    Point3 operator()(const Point3& p) const { return rotation_ * p + translation_; }
    RigidTransform inverse() const;
    Matrix4 homogeneous() const;

    /// max(‖RᵀR − I‖_F, |det R − 1|)
    double rotation_defect() const;

private:
    struct Unchecked {};
    RigidTransform(Unchecked, const Matrix3& r, const Point3& t) : rotation_(r), translation_(t) {}
    friend RigidTransform compose(const RigidTransform&, const RigidTransform&);

    Matrix3 rotation_;
    Point3 translation_;
};

/// Result applies `b` first, then `a`.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

PointCloud apply(const RigidTransform& t, const PointCloud& cloud);

/// Roll/pitch/yaw in radians plus a translation.
struct EulerPose {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
    double tx = 0.0;
    double ty = 0.0;
    double tz = 0.0;

    bool finite() const;
    friend bool operator==(const EulerPose&, const EulerPose&) = default;
};

Matrix3 rot_x(double angle);
Matrix3 rot_y(double angle);
Matrix3 rot_z(double angle);

/// Extrinsic X-Y-Z: rotation = Rz(yaw) * Ry(pitch) * Rx(roll).
RigidTransform euler_to_transform(const EulerPose& pose);

/// Angle of the relative rotation a⁻¹b, in [0, π].
double rotation_angle_between(const Matrix3& a, const Matrix3& b);

enum class Method { CoSM, StandardSVD };

std::string_view to_string(Method m);
/// Accepts "cosm" and "svd" (case-insensitive). Throws std::invalid_argument.
Method parse_method(std::string_view name);

struct RegistrationConfig {
    double sigma = 100.0;
    int max_iterations = 50;
    double rmse_abs_tol = 0.0;  ///< 0 disables
    double rmse_rel_tol = 0.0;  ///< 0 disables
    Method method = Method::CoSM;
    /// Write the mirrored SM(c(i), i) cells when clouds have equal size.
    bool mirror = true;

    /// Throws std::invalid_argument on sigma <= 0, max_iterations < 1 or negative tolerances.
    void validate() const;
};

/// The scale factor of the MSE objective. Fixed; scale is never estimated.
inline constexpr double kScale = 1.0;

}  // namespace cosm
