#pragma once

#include <optional>

#include "strawbot/geometry.hpp"

namespace strawbot {

/// Pinhole intrinsics. The optical frame is x right, y down, z forward.
struct CameraIntrinsics {
  int width = 640;
  int height = 480;
  double fx = 600.0;
  double fy = 600.0;
  double cx = 320.0;
  double cy = 240.0;

  bool valid() const {
    return width > 0 && height > 0 && fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
  }
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Camera-frame point to image coordinates; nullopt behind the camera.
std::optional<Pixel> project(const Vec3& p_camera, const CameraIntrinsics& k);

/// ((u - cx) d / fx, (v - cy) d / fy, d). Throws std::domain_error when
/// depth is not positive ("no depth return").
Vec3 back_project(const Pixel& px, double depth, const CameraIntrinsics& k);

/// Rotation from a body frame (x forward, y left, z up) to the optical frame
/// of a camera looking along body +x, pitched down by `pitch` radians.
Transform body_to_optical(double pitch);

}  // namespace strawbot
