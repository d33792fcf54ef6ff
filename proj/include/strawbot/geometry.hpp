#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace strawbot {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Planar chassis pose. theta is kept in (-pi, pi] by every constructor path.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}

  Eigen::Vector2d position() const { return {x, y}; }
  Pose2 normalized() const { return {x, y, theta}; }
};

/// Rigid transform. Rotation is stored as a unit quaternion; the matrix
/// constructor re-orthonormalizes its input.
class Transform {
 public:
  Transform() = default;
  Transform(const Quat& rotation, const Vec3& translation);
  Transform(const Mat3& rotation, const Vec3& translation);

  static Transform identity() { return {}; }
  static Transform from_translation(const Vec3& t) { return {Quat::Identity(), t}; }
  static Transform rot_x(double a);
  static Transform rot_y(double a);
  static Transform rot_z(double a);
  /// Lifts a planar pose into 3-D at height z.
  static Transform from_pose2(const Pose2& p, double z = 0.0);

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Mat4 matrix() const;

 private:
  Quat rotation_ = Quat::Identity();
  Vec3 translation_ = Vec3::Zero();
};

/// A frame pose expressed in a parent frame (position + orientation); the
/// same data as the frame->parent transform.
using Pose3 = Transform;

/// a ∘ b: applies b first, then a.
Transform compose(const Transform& a, const Transform& b);
Transform invert(const Transform& t);
Vec3 apply(const Transform& t, const Vec3& p);
/// Rotates a direction (no translation).
Vec3 apply_rotation(const Transform& t, const Vec3& d);

inline Transform operator*(const Transform& a, const Transform& b) { return compose(a, b); }
inline Vec3 operator*(const Transform& t, const Vec3& p) { return apply(t, p); }

/// Largest absolute entry difference between the homogeneous matrices.
double max_abs_diff(const Transform& a, const Transform& b);

}  // namespace strawbot
