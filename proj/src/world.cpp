#include "strawbot/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace strawbot {

const char* to_string(PartKind k) {
  switch (k) {
    case PartKind::HealthyLeafCluster: return "healthy";
    case PartKind::UnhealthyLeafCluster: return "unhealthy";
    case PartKind::Flower: return "flower";
  }
  return "?";
}

PartKind part_kind_from_string(const std::string& s) {
  if (s == "healthy") return PartKind::HealthyLeafCluster;
  if (s == "unhealthy") return PartKind::UnhealthyLeafCluster;
  if (s == "flower") return PartKind::Flower;
  throw std::invalid_argument("unknown part kind '" + s + "'");
}

Pose2 integrate_twist(const Pose2& pose, const BodyTwist& t, double dt) {
  const double dtheta = t.omega * dt;
  double fx, fy;  // body-frame displacement
  if (std::abs(dtheta) < 1e-12) {
    fx = t.vx * dt;
    fy = t.vy * dt;
  } else {
    const double s = std::sin(dtheta) / t.omega;
    const double c = (1.0 - std::cos(dtheta)) / t.omega;
    fx = s * t.vx - c * t.vy;
    fy = c * t.vx + s * t.vy;
  }
  const double ct = std::cos(pose.theta), st = std::sin(pose.theta);
  return {pose.x + ct * fx - st * fy, pose.y + st * fx + ct * fy, pose.theta + dtheta};
}

StepEvents World::step(double dt, const ActuationCommand& cmd) {
  StepEvents ev;
  const Gripper previous_gripper = robot.gripper;

  if (cmd.twist) twist_setpoint = *cmd.twist;
  if (cmd.arm) {
    ArmMotion m = *cmd.arm;
    m.start = robot.joints;
    m.target = robot_config.arm.clamp(m.target);
    m.elapsed = 0.0;
    arm_motion = m;
  }
  if (cmd.actuator_target) actuator_target = std::clamp(*cmd.actuator_target, 0.0, robot_config.actuator_stroke);
  if (cmd.gripper) robot.gripper = *cmd.gripper;

  // Chassis.
  BodyTwist applied = twist_setpoint;
  const double vmax = robot_config.max_linear_speed;
  const double wmax = robot_config.max_angular_speed;
  applied.vx = std::clamp(applied.vx, -vmax, vmax);
  applied.vy = std::clamp(applied.vy, -vmax, vmax);
  applied.omega = std::clamp(applied.omega, -wmax, wmax);
  ev.twist_clamped = applied.vx != twist_setpoint.vx || applied.vy != twist_setpoint.vy ||
                     applied.omega != twist_setpoint.omega;
  Pose2 next = integrate_twist(robot.chassis, applied, dt);
  const Rect& b = arena.bounds;
  if (!b.contains(next.x, next.y)) {
    next.x = std::clamp(next.x, b.x_min, b.x_max);
    next.y = std::clamp(next.y, b.y_min, b.y_max);
    ev.wall_contact = true;
  }
  robot.chassis = next;
  robot.chassis_twist = applied;

  // Arm.
  if (arm_motion) {
    ArmMotion& m = *arm_motion;
    m.elapsed += dt;
    // The tolerance absorbs rounding in the accumulated step sum.
    const double frac = m.elapsed >= m.duration - 1e-9 ? 1.0 : m.elapsed / m.duration;
    const JointVector desired = m.start + frac * (m.target - m.start);
    bool done = frac >= 1.0;
    for (int i = 0; i < kNumJoints; ++i) {
      const double limit = robot_config.arm.joints[i].max_rate * dt;
      const double delta = std::clamp(desired[i] - robot.joints[i], -limit, limit);
      robot.joints[i] += delta;
      if (std::abs(m.target[i] - robot.joints[i]) > 1e-12) done = false;
    }
    if (done) {
      robot.joints = m.target;
      arm_motion.reset();
      ev.arm_arrived = true;
    }
  }

  // Linear actuator.
  if (robot.actuator_extension != actuator_target) {
    const double limit = robot_config.actuator_speed * dt;
    const double delta = std::clamp(actuator_target - robot.actuator_extension, -limit, limit);
    robot.actuator_extension += delta;
    if (std::abs(actuator_target - robot.actuator_extension) <= 1e-12) {
      robot.actuator_extension = actuator_target;
      ev.actuator_arrived = true;
    }
  }

  if (previous_gripper == Gripper::Open && robot.gripper == Gripper::Closed) {
    const Vec3 tip = gripper_tip();
    const PlantPart* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& plant : plants) {
      for (const auto& part : plant.parts) {
        if (part.trimmed) continue;
        const double d = (part.center - tip).norm();
        if (d < best) {
          best = d;
          nearest = &part;
        }
      }
    }
    if (nearest) {
      ev.trim = trim_part(nearest->id, tip);
    } else {
      ev.trim = TrimResult{TrimOutcome::Miss, "", best};
    }
  }

  clock += dt;
  return ev;
}

TrimResult World::trim_part(const std::string& part_id, const Vec3& gripper_tip) {
  PlantPart* part = find_part(part_id);
  if (!part) throw std::invalid_argument("unknown part '" + part_id + "'");
  const double d = (part->center - gripper_tip).norm();
  if (part->trimmed) return {TrimOutcome::AlreadyTrimmed, part_id, d};
  if (d <= robot_config.grasp_tolerance) {
    part->trimmed = true;
    return {TrimOutcome::Success, part_id, d};
  }
  return {TrimOutcome::Miss, part_id, d};
}

GroundTruth World::ground_truth() const {
  GroundTruth gt;
  gt.clock = clock;
  gt.robot = robot;
  for (const auto& plant : plants)
    for (const auto& part : plant.parts) gt.parts.push_back({part.id, plant.id, part.kind, part.center, part.trimmed});
  return gt;
}

Vec3 World::gripper_tip() const {
  return apply(arm_base_in_world(), arm_frames(robot_config.arm, robot.joints).tip);
}

const PlantPart* World::find_part(const std::string& id) const {
  for (const auto& plant : plants)
    for (const auto& part : plant.parts)
      if (part.id == id) return &part;
  return nullptr;
}

PlantPart* World::find_part(const std::string& id) {
  return const_cast<PlantPart*>(std::as_const(*this).find_part(id));
}

const Plant* World::find_plant(const std::string& id) const {
  for (const auto& plant : plants)
    if (plant.id == id) return &plant;
  return nullptr;
}

std::size_t World::trimmed_count() const {
  std::size_t n = 0;
  for (const auto& plant : plants)
    for (const auto& part : plant.parts) n += part.trimmed ? 1 : 0;
  return n;
}

}  // namespace strawbot
