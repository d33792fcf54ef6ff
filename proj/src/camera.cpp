#include "strawbot/camera.hpp"

#include <stdexcept>

namespace strawbot {

std::optional<Pixel> project(const Vec3& p, const CameraIntrinsics& k) {
  if (p.z() <= 0.0) return std::nullopt;
  return Pixel{k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Vec3 back_project(const Pixel& px, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw std::domain_error("no depth return");
  return {(px.u - k.cx) * depth / k.fx, (px.v - k.cy) * depth / k.fy, depth};
}

Transform body_to_optical(double pitch) {
  Mat3 optical;
  // Columns: optical x, y, z expressed in the body frame.
  optical << 0, 0, 1,
            -1, 0, 0,
             0, -1, 0;
  return compose(Transform::rot_y(pitch), Transform(optical, Vec3::Zero()));
}

}  // namespace strawbot
