#pragma once

namespace strawbot {

/// Roller layout of the four mecanum wheels. X is the usual layout where the
/// rollers touching the ground form an X seen from above.
enum class RollerLayout { X, O };

struct MecanumGeometry {
  double wheel_radius = 0.05;
  double half_length = 0.149;  // lx
  double half_width = 0.128;   // ly
  RollerLayout layout = RollerLayout::X;

  bool valid() const { return wheel_radius > 0.0 && half_length > 0.0 && half_width > 0.0; }
};

struct BodyTwist {
  double vx = 0.0;     // m/s, robot forward
  double vy = 0.0;     // m/s, robot left
  double omega = 0.0;  // rad/s, counter-clockwise
};

struct WheelSpeeds {
  double fl = 0.0;
  double fr = 0.0;
  double rl = 0.0;
  double rr = 0.0;
};

WheelSpeeds twist_to_wheels(const BodyTwist& t, const MecanumGeometry& g);

/// Least-squares inverse of twist_to_wheels; exact for wheel vectors in the
/// range of the forward map.
BodyTwist wheels_to_twist(const WheelSpeeds& w, const MecanumGeometry& g);

}  // namespace strawbot
