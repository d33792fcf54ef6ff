#include "strawbot/drive.hpp"

#include <stdexcept>

namespace strawbot {

namespace {

// Per-wheel coefficient on (lx + ly) * omega. The O layout swaps the sign of
// the rotational lever arm relative to the strafe term.
double lever(const MecanumGeometry& g) {
  double k = g.half_length + g.half_width;
  return g.layout == RollerLayout::X ? k : -k;
}

}  // namespace

WheelSpeeds twist_to_wheels(const BodyTwist& t, const MecanumGeometry& g) {
  if (!g.valid()) throw std::invalid_argument("mecanum geometry must be strictly positive");
  const double k = lever(g);
  const double r = g.wheel_radius;
  return {
      (t.vx - t.vy - k * t.omega) / r,
      (t.vx + t.vy + k * t.omega) / r,
      (t.vx + t.vy - k * t.omega) / r,
      (t.vx - t.vy + k * t.omega) / r,
  };
}

BodyTwist wheels_to_twist(const WheelSpeeds& w, const MecanumGeometry& g) {
  if (!g.valid()) throw std::invalid_argument("mecanum geometry must be strictly positive");
  // The columns of the forward matrix are mutually orthogonal, so the
  // pseudo-inverse reduces to a scaled transpose.
  const double k = lever(g);
  const double r = g.wheel_radius;
  return {
      r * (w.fl + w.fr + w.rl + w.rr) / 4.0,
      r * (-w.fl + w.fr + w.rl - w.rr) / 4.0,
      r * (-w.fl + w.fr - w.rl + w.rr) / (4.0 * k),
  };
}

}  // namespace strawbot
