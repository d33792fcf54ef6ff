#include "strawbot/arm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace strawbot {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

JointSpec make_joint(const char* name, JointAxis axis, const char* servo, const char* torque) {
  JointSpec j;
  j.name = name;
  j.axis = axis;
  j.lower = -kHalfPi;
  j.upper = kHalfPi;
  j.servo = servo;
  j.torque = torque;
  return j;
}

// Golden-section minimisation of a convex function on [0, 1].
double minimize_convex(const std::function<double(double)>& f) {
  constexpr double kInvPhi = 0.6180339887498949;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 90; ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f1, f2, f(0.0), f(1.0)});
}

}  // namespace

ArmModel ArmModel::defaults() {
  ArmModel m;
  m.joints = {
      make_joint("J1", JointAxis::Yaw, "LX-15D", "15 kg/cm @ 6V, 17 kg/cm @ 7.4V"),
      make_joint("J2", JointAxis::Pitch, "LX-225", "25 kg/cm @ 7.4V"),
      make_joint("J3", JointAxis::Pitch, "LX-15D", "15 kg/cm @ 6V, 17 kg/cm @ 7.4V"),
      make_joint("J4", JointAxis::Roll, "LX-15D", "15 kg/cm @ 6V, 17 kg/cm @ 7.4V"),
      make_joint("J5", JointAxis::Yaw, "ID 1", "8 kg/cm @ 7.4V"),
  };
  return m;
}

bool ArmModel::within_limits(const JointVector& q, double slack) const {
  for (int i = 0; i < kNumJoints; ++i) {
    if (!(q[i] >= joints[i].lower - slack && q[i] <= joints[i].upper + slack)) return false;
  }
  return true;
}

JointVector ArmModel::clamp(const JointVector& q) const {
  JointVector out;
  for (int i = 0; i < kNumJoints; ++i) out[i] = std::clamp(q[i], joints[i].lower, joints[i].upper);
  return out;
}

LimitViolation::LimitViolation(int joint, double value, const std::string& name)
    : std::out_of_range("joint " + name + " outside limits: " + std::to_string(value) + " rad"),
      joint_(joint) {}

ArmFrames arm_frames(const ArmModel& model, const JointVector& q) {
  ArmFrames f;
  const Transform j1 = Transform::rot_z(q[0]);
  const Transform j2 = j1 * Transform::from_translation({0, 0, model.base_height}) * Transform::rot_y(q[1]);
  const Transform j3 = j2 * Transform::from_translation({model.upper_arm, 0, 0}) * Transform::rot_y(q[2]);
  const Transform j4 = j3 * Transform::from_translation({model.forearm, 0, 0}) * Transform::rot_x(q[3]);
  const Transform j5 = j4 * Transform::rot_z(q[4]);
  f.tip_pose = j5 * Transform::from_translation({model.gripper, 0, 0});

  f.base = Vec3::Zero();
  f.shoulder = j2.translation();
  f.elbow = j3.translation();
  f.wrist = j4.translation();
  f.tip = f.tip_pose.translation();

  f.origins = {f.base, f.shoulder, f.elbow, f.wrist, f.wrist};
  f.axes = {
      Vec3::UnitZ(),
      apply_rotation(j1, Vec3::UnitY()),
      apply_rotation(j2, Vec3::UnitY()),
      apply_rotation(j3, Vec3::UnitX()),
      apply_rotation(j4, Vec3::UnitZ()),
  };
  return f;
}

Pose3 forward_kinematics(const ArmModel& model, const JointVector& q) {
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& j = model.joints[i];
    if (!(q[i] >= j.lower - 1e-12 && q[i] <= j.upper + 1e-12)) throw LimitViolation(i, q[i], j.name);
  }
  return arm_frames(model, q).tip_pose;
}

Eigen::Matrix<double, 6, kNumJoints> arm_jacobian(const ArmFrames& frames) {
  Eigen::Matrix<double, 6, kNumJoints> jac;
  const Vec3 a = frames.approach_axis();
  for (int i = 0; i < kNumJoints; ++i) {
    jac.block<3, 1>(0, i) = frames.axes[i].cross(frames.tip - frames.origins[i]);
    jac.block<3, 1>(3, i) = frames.axes[i].cross(a);
  }
  return jac;
}

namespace {

// Alternate starting points tried when the primary descent stalls: the seed
// itself, then mirrored-elbow and mirrored-base variants of it.
std::vector<JointVector> restart_seeds(const ArmModel& model, const JointVector& seed, const Vec3& target) {
  const double azimuth = std::atan2(target.y(), target.x());
  const double facing = std::clamp(azimuth, -kHalfPi, kHalfPi);
  const double behind = std::clamp(normalize_angle(azimuth + std::numbers::pi), -kHalfPi, kHalfPi);
  std::vector<JointVector> seeds{model.clamp(seed)};
  JointVector s;
  s << facing, 0.5, 0.9, 0.0, 0.0;
  seeds.push_back(s);
  s << facing, -0.5, 1.2, 0.0, 0.3;
  seeds.push_back(s);
  s << behind, -1.2, -1.0, 0.0, 0.0;
  seeds.push_back(s);
  s << facing, 0.9, -0.9, 0.6, -0.6;
  seeds.push_back(s);
  s << behind, -0.9, -1.2, -0.6, 0.6;
  seeds.push_back(s);
  s << behind, 1.3, 1.4, 0.0, 0.0;
  seeds.push_back(s);
  s << facing, 1.2, 1.3, 1.3, -0.5;
  seeds.push_back(s);
  return seeds;
}

}  // namespace

IkResult inverse_kinematics(const ArmModel& model, const IkTarget& target, const JointVector& seed,
                            const IkOptions& options) {
  IkResult result;
  result.q = model.clamp(seed);

  if ((target.position - model.shoulder()).norm() > model.reach()) {
    result.status = IkStatus::Unreachable;
    result.position_residual = (arm_frames(model, result.q).tip - target.position).norm();
    return result;
  }

  const bool orient = target.approach.has_value();
  const Vec3 want_axis = orient ? target.approach->normalized() : Vec3::UnitX();
  const int rows = orient ? 6 : 3;

  auto residuals = [&](const ArmFrames& f) {
    double pos = (target.position - f.tip).norm();
    double ang = 0.0;
    if (orient) ang = std::acos(std::clamp(f.approach_axis().dot(want_axis), -1.0, 1.0));
    return std::pair{pos, ang};
  };
  auto cost = [&](double pos, double ang) { return pos + target.approach_weight * ang; };

  const std::vector<JointVector> seeds = restart_seeds(model, seed, target.position);
  std::size_t next_seed = 1;
  JointVector q = seeds[0];
  JointVector best = q;
  double best_cost = std::numeric_limits<double>::infinity();
  double best_pos = 0.0, best_ang = 0.0;
  double run_best = std::numeric_limits<double>::infinity();
  int run_stall = 0;

  for (int it = 0; it <= options.max_iterations; ++it) {
    const ArmFrames f = arm_frames(model, q);
    const auto [pos, ang] = residuals(f);
    const double c = cost(pos, ang);
    if (c < best_cost) {
      best_cost = c;
      best = q;
      best_pos = pos;
      best_ang = ang;
    }
    if (pos <= options.position_tolerance && (!orient || ang <= options.approach_tolerance)) {
      result.status = IkStatus::Success;
      result.q = q;
      result.position_residual = pos;
      result.approach_residual = ang;
      result.iterations = it;
      return result;
    }
    if (it == options.max_iterations) break;

    // A run that has not improved by 1% over the last stall window is stuck
    // in a limit-bound local minimum; move on to the next start.
    if (c < 0.99 * run_best) {
      run_best = c;
      run_stall = 0;
    } else if (++run_stall >= options.stall_iterations && next_seed < seeds.size()) {
      q = seeds[next_seed++];
      run_best = std::numeric_limits<double>::infinity();
      run_stall = 0;
      continue;
    }

    const auto full = arm_jacobian(f);
    Eigen::MatrixXd jac = full.topRows(rows);
    Eigen::VectorXd err(rows);
    err.head<3>() = target.position - f.tip;
    if (orient) {
      jac.bottomRows(3) *= target.approach_weight;
      err.tail<3>() = target.approach_weight * (want_axis - f.approach_axis());
    }
    // The centring pull fades out near convergence so it cannot bias the
    // final answer.
    const double centering = options.centering_gain * std::min(1.0, c / 0.02);

    // Joints pinned at a limit with the step pushing outward drop out of the
    // active set and the step is recomputed over the remaining joints.
    std::array<bool, kNumJoints> active;
    active.fill(true);
    JointVector dq = JointVector::Zero();
    for (int pass = 0; pass < kNumJoints; ++pass) {
      Eigen::MatrixXd ja = jac;
      for (int i = 0; i < kNumJoints; ++i)
        if (!active[i]) ja.col(i).setZero();
      const Eigen::MatrixXd gram =
          ja * ja.transpose() + options.damping * options.damping * Eigen::MatrixXd::Identity(rows, rows);
      const Eigen::MatrixXd pinv = ja.transpose() * gram.ldlt().solve(Eigen::MatrixXd::Identity(rows, rows));
      dq = pinv * err;

      JointVector pull;
      for (int i = 0; i < kNumJoints; ++i) {
        const auto& j = model.joints[i];
        const double mid = 0.5 * (j.lower + j.upper);
        const double half = 0.5 * (j.upper - j.lower);
        pull[i] = active[i] ? -centering * (q[i] - mid) / half : 0.0;
      }
      dq += (Eigen::MatrixXd::Identity(kNumJoints, kNumJoints) - pinv * ja) * pull;
      for (int i = 0; i < kNumJoints; ++i)
        if (!active[i]) dq[i] = 0.0;

      const double biggest = dq.cwiseAbs().maxCoeff();
      if (biggest > options.max_step) dq *= options.max_step / biggest;

      bool changed = false;
      for (int i = 0; i < kNumJoints; ++i) {
        const auto& j = model.joints[i];
        if (active[i] && ((q[i] + dq[i] > j.upper && dq[i] > 0) || (q[i] + dq[i] < j.lower && dq[i] < 0)) &&
            (q[i] >= j.upper - 1e-9 || q[i] <= j.lower + 1e-9)) {
          active[i] = false;
          changed = true;
        }
      }
      if (!changed) break;
    }
    q = model.clamp(q + dq);
  }

  result.status = IkStatus::NoConvergence;
  result.q = best;
  result.position_residual = best_pos;
  result.approach_residual = best_ang;
  result.iterations = options.max_iterations;
  return result;
}

ServoFrame radians_to_servo(const ArmModel& model, const JointVector& q, int duration_ms) {
  if (duration_ms < 0) throw std::out_of_range("servo duration must be non-negative");
  ServoFrame frame;
  frame.duration_ms = duration_ms;
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& j = model.joints[i];
    if (!(q[i] >= j.lower - 1e-12 && q[i] <= j.upper + 1e-12)) throw LimitViolation(i, q[i], j.name);
    const double unit = std::clamp((q[i] - j.lower) / (j.upper - j.lower), 0.0, 1.0);
    frame.positions[i] = static_cast<int>(std::round(unit * kServoMax));
  }
  return frame;
}

JointVector servo_to_radians(const ArmModel& model, const ServoFrame& frame) {
  JointVector q;
  for (int i = 0; i < kNumJoints; ++i) {
    const int p = frame.positions[i];
    if (p < kServoMin || p > kServoMax)
      throw std::out_of_range("servo position " + std::to_string(p) + " outside [0, 1000]");
    const auto& j = model.joints[i];
    q[i] = j.lower + (j.upper - j.lower) * static_cast<double>(p) / kServoMax;
  }
  return q;
}

double point_box_distance(const Vec3& p, const Box& b) {
  const Vec3 d = (b.min - p).cwiseMax(p - b.max).cwiseMax(Vec3::Zero());
  return d.norm();
}

double point_cylinder_distance(const Vec3& p, const Cylinder& c) {
  const Vec3 axis = c.axis.normalized();
  const Vec3 rel = p - c.base;
  const double h = rel.dot(axis);
  const double r = (rel - h * axis).norm();
  const double dh = std::max({0.0, -h, h - c.height});
  const double dr = std::max(0.0, r - c.radius);
  return std::hypot(dh, dr);
}

double segment_box_distance(const Vec3& a, const Vec3& b, const Box& box) {
  return minimize_convex([&](double t) { return point_box_distance(a + t * (b - a), box); });
}

double segment_cylinder_distance(const Vec3& a, const Vec3& b, const Cylinder& cyl) {
  return minimize_convex([&](double t) { return point_cylinder_distance(a + t * (b - a), cyl); });
}

std::array<LinkSegment, 4> link_segments(const ArmFrames& f) {
  return {{
      {"link1", f.base, f.shoulder},
      {"link2", f.shoulder, f.elbow},
      {"link3", f.elbow, f.wrist},
      {"gripper", f.wrist, f.tip},
  }};
}

std::optional<Contact> check_collision(const ArmModel& model, const JointVector& q,
                                       const ObstacleSet& obstacles) {
  const ArmFrames f = arm_frames(model, q);
  for (const auto& seg : link_segments(f)) {
    for (const auto& box : obstacles.cuboids) {
      const double d = segment_box_distance(seg.a, seg.b, box);
      if (d < model.link_radius) return Contact{seg.name, box.name, d};
    }
    for (const auto& cyl : obstacles.cylinders) {
      const double d = segment_cylinder_distance(seg.a, seg.b, cyl);
      if (d < model.link_radius) return Contact{seg.name, cyl.name, d};
    }
  }
  return std::nullopt;
}

namespace {

Vec3 approach_direction(double azimuth, double tilt) {
  return {std::cos(tilt) * std::cos(azimuth), std::cos(tilt) * std::sin(azimuth), -std::sin(tilt)};
}

std::string describe(const std::string& tag, const std::string& what) { return tag + ": " + what; }

struct Candidate {
  std::string tag;
  Vec3 approach;
  double roll_seed;
  bool side;
};

}  // namespace

TrimPlanResult plan_trim(const ArmModel& model, const Vec3& target, const ObstacleSet& obstacles,
                         const JointVector& seed, const PlanOptions& options) {
  TrimPlanResult out;
  if ((target - model.shoulder()).norm() > model.reach()) {
    out.failures.push_back("unreachable: target beyond " + std::to_string(model.reach()) + " m");
    return out;
  }

  const double azimuth = std::atan2(target.y(), target.x());
  std::vector<Candidate> candidates;
  for (double tilt : options.tilts)
    candidates.push_back({"direct tilt " + std::to_string(tilt), approach_direction(azimuth, tilt), 0.0, false});
  for (double side : options.side_angles) {
    for (double sign : {1.0, -1.0}) {
      for (double tilt : options.tilts) {
        candidates.push_back({"side " + std::to_string(sign * side) + " tilt " + std::to_string(tilt),
                              approach_direction(azimuth + sign * side, tilt), -sign * 0.8, true});
      }
    }
  }

  for (const auto& c : candidates) {
    const Vec3 pre_pos = target - options.standoff * c.approach;
    JointVector heuristic;
    heuristic << std::clamp(azimuth, -kHalfPi, kHalfPi), 0.4, 0.8, c.roll_seed, 0.0;

    IkResult pre;
    for (const JointVector& s : {heuristic, seed}) {
      pre = inverse_kinematics(model, {pre_pos, c.approach}, s, options.ik);
      if (pre.ok()) break;
    }
    if (!pre.ok()) {
      out.failures.push_back(describe(c.tag, "pre-grasp IK failed"));
      continue;
    }
    const IkResult grasp = inverse_kinematics(model, {target, c.approach}, pre.q, options.ik);
    if (!grasp.ok()) {
      out.failures.push_back(describe(c.tag, "grasp IK failed"));
      continue;
    }
    std::optional<Contact> hit;
    for (int k = 0; k <= options.motion_checks && !hit; ++k) {
      const double s = options.motion_checks == 0 ? 1.0 : static_cast<double>(k) / options.motion_checks;
      hit = check_collision(model, pre.q + s * (grasp.q - pre.q), obstacles);
    }
    if (hit) {
      out.failures.push_back(describe(c.tag, "collision " + hit->link + "/" + hit->obstacle));
      continue;
    }
    TrimPlan plan;
    plan.approach = c.approach;
    plan.side_approach = c.side;
    plan.waypoints = {
        {"pre_grasp", pre.q, GripperAction::Open},
        {"grasp", grasp.q, GripperAction::Close},
        {"retreat", pre.q, GripperAction::Hold},
    };
    out.plan = std::move(plan);
    return out;
  }
  return out;
}

}  // namespace strawbot
