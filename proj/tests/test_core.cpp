#include "cosm/core.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <numbers>

using namespace cosm;

TEST_SUITE("core") {

TEST_CASE("point cloud rejects non-finite coordinates") {
    CHECK_THROWS_AS(PointCloud({Point3(0, 0, std::numeric_limits<double>::quiet_NaN())}), std::invalid_argument);
    CHECK_THROWS_AS(PointCloud({Point3(std::numeric_limits<double>::infinity(), 0, 0)}), std::invalid_argument);
    PointCloud ok({Point3(1, 2, 3)});
    CHECK(ok.size() == 1);
    CHECK(ok[0] == Point3(1, 2, 3));
}

TEST_CASE("bounding box") {
    PointCloud c({Point3(1, -2, 0), Point3(-1, 4, 2), Point3(0, 0, 1)});
    const auto box = bounding_box(c);
    CHECK(box.min == Point3(-1, -2, 0));
    CHECK(box.max == Point3(1, 4, 2));
    CHECK(box.diagonal() == doctest::Approx(std::sqrt(4.0 + 36.0 + 4.0)));
    CHECK(box.contains(Point3(0, 0, 1)));
    CHECK_FALSE(box.contains(Point3(0, 5, 1)));
}

TEST_CASE("rigid transform validates its rotation") {
    CHECK_THROWS_AS(RigidTransform(2.0 * Matrix3::Identity(), Point3::Zero()), std::invalid_argument);
    Matrix3 reflect = Matrix3::Identity();
    reflect(2, 2) = -1.0;
    CHECK_THROWS_AS(RigidTransform(reflect, Point3::Zero()), std::invalid_argument);
    CHECK_THROWS_AS(RigidTransform(Matrix3::Identity(), Point3(0, std::nan(""), 0)), std::invalid_argument);
    CHECK_NOTHROW(RigidTransform(rot_z(0.4), Point3(1, 2, 3)));
}

TEST_CASE("compose applies the right operand first") {
    const RigidTransform a(rot_x(0.3), Point3(1, 0, 0));
    const RigidTransform b(rot_z(-1.1), Point3(0, 2, -1));
    const Point3 p(0.5, -0.25, 2.0);
    const auto ab = compose(a, b);
    CHECK((ab(p) - a(b(p))).norm() < 1e-14);
    CHECK((compose(a, a.inverse())(p) - p).norm() < 1e-14);
    CHECK((ab.homogeneous() - a.homogeneous() * b.homogeneous()).norm() < 1e-14);
}

TEST_CASE("homogeneous round trip") {
    const RigidTransform t(rot_y(0.7) * rot_x(-0.2), Point3(3, -4, 5));
    const auto back = RigidTransform::from_homogeneous(t.homogeneous());
    CHECK((back.rotation() - t.rotation()).norm() == 0.0);
    CHECK(back.translation() == t.translation());
    Matrix4 bad = t.homogeneous();
    bad(3, 0) = 1.0;
    CHECK_THROWS_AS(RigidTransform::from_homogeneous(bad), std::invalid_argument);
}

TEST_CASE("euler convention is Rz(yaw) Ry(pitch) Rx(roll)") {
    const EulerPose pose{0.1, -0.4, 1.3, 1, 2, 3};
    const Matrix3 oracle = (Eigen::AngleAxisd(pose.yaw, Eigen::Vector3d::UnitZ()) *
                            Eigen::AngleAxisd(pose.pitch, Eigen::Vector3d::UnitY()) *
                            Eigen::AngleAxisd(pose.roll, Eigen::Vector3d::UnitX()))
                               .toRotationMatrix();
    const auto t = euler_to_transform(pose);
    CHECK((t.rotation() - oracle).norm() < 1e-15);
    CHECK(t.translation() == Point3(1, 2, 3));

    const auto yaw90 = euler_to_transform({0, 0, std::numbers::pi / 2, 0, 0, 0});
    CHECK((yaw90(Point3::UnitX()) - Point3::UnitY()).norm() < 1e-15);
}

TEST_CASE("rotation angle between") {
    CHECK(rotation_angle_between(Matrix3::Identity(), rot_z(0.3)) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rotation_angle_between(rot_x(0.2), rot_x(-0.5)) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(rotation_angle_between(Matrix3::Identity(), rot_y(std::numbers::pi)) ==
          doctest::Approx(std::numbers::pi));
    CHECK(rotation_angle_between(rot_z(1.0), rot_z(1.0)) == 0.0);
}

TEST_CASE("method names") {
    CHECK(parse_method("cosm") == Method::CoSM);
    CHECK(parse_method("SVD") == Method::StandardSVD);
    CHECK(to_string(Method::StandardSVD) == "svd");
    CHECK_THROWS_AS(parse_method("gicp"), std::invalid_argument);
}

TEST_CASE("registration config validation") {
    RegistrationConfig c;
    CHECK_NOTHROW(c.validate());
    c.sigma = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.max_iterations = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.rmse_rel_tol = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

}
