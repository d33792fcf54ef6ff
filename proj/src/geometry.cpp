#include "strawbot/geometry.hpp"

#include <cmath>
#include <numbers>

namespace strawbot {

double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

Transform::Transform(const Quat& rotation, const Vec3& translation)
    : rotation_(rotation.normalized()), translation_(translation) {}

Transform::Transform(const Mat3& rotation, const Vec3& translation) : translation_(translation) {
  // Project onto SO(3) before converting; callers may hand in drifted matrices.
  Eigen::JacobiSVD<Mat3> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  rotation_ = Quat(r).normalized();
}

Transform Transform::rot_x(double a) { return {Quat(Eigen::AngleAxisd(a, Vec3::UnitX())), Vec3::Zero()}; }
Transform Transform::rot_y(double a) { return {Quat(Eigen::AngleAxisd(a, Vec3::UnitY())), Vec3::Zero()}; }
Transform Transform::rot_z(double a) { return {Quat(Eigen::AngleAxisd(a, Vec3::UnitZ())), Vec3::Zero()}; }

Transform Transform::from_pose2(const Pose2& p, double z) {
  return {Quat(Eigen::AngleAxisd(p.theta, Vec3::UnitZ())), Vec3(p.x, p.y, z)};
}

Mat4 Transform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Transform compose(const Transform& a, const Transform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

Transform invert(const Transform& t) {
  Quat inv = t.rotation().conjugate();
  return {inv, -(inv * t.translation())};
}

Vec3 apply(const Transform& t, const Vec3& p) { return t.rotation() * p + t.translation(); }

Vec3 apply_rotation(const Transform& t, const Vec3& d) { return t.rotation() * d; }

double max_abs_diff(const Transform& a, const Transform& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace strawbot
