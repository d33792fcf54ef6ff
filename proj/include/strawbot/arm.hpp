#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "strawbot/geometry.hpp"

namespace strawbot {

inline constexpr int kNumJoints = 5;

using JointVector = Eigen::Matrix<double, kNumJoints, 1>;

enum class JointAxis { Yaw, Pitch, Roll };

struct JointSpec {
  std::string name;
  JointAxis axis = JointAxis::Yaw;
  double lower = -1.5707963267948966;
  double upper = 1.5707963267948966;
  double max_rate = 4.0;  // rad/s
  // Recorded from the servo table; the kinematic model never reads these.
  std::string servo;
  std::string torque;
};

/// Five-joint arm: J1 yaw, J2 pitch, J3 pitch, J4 roll, J5 yaw.
///
/// The zero configuration is the fully extended arm pointing along +x of the
/// arm base frame: the tip sits at (upper_arm + forearm + gripper, 0,
/// base_height). Positive pitch lowers the distal links, positive roll is
/// right-handed about the forearm axis, positive yaw is right-handed about the
/// local z axis.
struct ArmModel {
  std::array<JointSpec, kNumJoints> joints;
  double base_height = 0.10;
  double upper_arm = 0.150;
  double forearm = 0.150;
  double gripper = 0.103;
  double link_radius = 0.02;

  static ArmModel defaults();

  /// Planar reach measured from the shoulder (J2 axis).
  double reach() const { return upper_arm + forearm + gripper; }
  Vec3 shoulder() const { return {0.0, 0.0, base_height}; }
  bool within_limits(const JointVector& q, double slack = 1e-12) const;
  JointVector clamp(const JointVector& q) const;
};

class LimitViolation : public std::out_of_range {
 public:
  LimitViolation(int joint, double value, const std::string& name);
  int joint() const { return joint_; }

 private:
  int joint_;
};

/// Joint-frame positions and axes for one configuration, all in the arm base
/// frame.
struct ArmFrames {
  Vec3 base;
  Vec3 shoulder;
  Vec3 elbow;
  Vec3 wrist;
  Vec3 tip;
  std::array<Vec3, kNumJoints> axes;
  std::array<Vec3, kNumJoints> origins;
  Pose3 tip_pose;

  Vec3 approach_axis() const { return apply_rotation(tip_pose, Vec3::UnitX()); }
};

ArmFrames arm_frames(const ArmModel& model, const JointVector& q);

/// Gripper tip pose in the arm base frame. Throws LimitViolation.
Pose3 forward_kinematics(const ArmModel& model, const JointVector& q);

/// Rows 0-2: tip position; rows 3-5: derivative of the approach axis.
Eigen::Matrix<double, 6, kNumJoints> arm_jacobian(const ArmFrames& frames);

struct IkTarget {
  Vec3 position = Vec3::Zero();
  /// Desired gripper approach axis (unit). Unset for position-only solves.
  std::optional<Vec3> approach;
  double approach_weight = 0.1;  // metres of error per radian of misalignment
};

struct IkOptions {
  int max_iterations = 500;
  double damping = 0.05;
  double max_step = 0.2;  // rad, largest single-joint change per iteration
  double position_tolerance = 1e-3;
  double approach_tolerance = 0.02;  // rad
  double centering_gain = 0.05;      // null-space pull toward mid-range
  int stall_iterations = 40;         // restart from another seed after this many flat iterations
};

enum class IkStatus { Success, Unreachable, NoConvergence };

struct IkResult {
  IkStatus status = IkStatus::NoConvergence;
  JointVector q = JointVector::Zero();
  double position_residual = 0.0;
  double approach_residual = 0.0;
  int iterations = 0;

  bool ok() const { return status == IkStatus::Success; }
};

/// Damped least squares from seed. The returned configuration is always
/// inside the joint limits; on failure it is the best iterate found.
IkResult inverse_kinematics(const ArmModel& model, const IkTarget& target, const JointVector& seed,
                            const IkOptions& options = {});

struct ServoFrame {
  std::array<int, kNumJoints> positions{};
  int duration_ms = 0;

  bool operator==(const ServoFrame&) const = default;
};

inline constexpr int kServoMin = 0;
inline constexpr int kServoMax = 1000;

/// Linear map of each joint's [lower, upper] onto [0, 1000], rounded half away
/// from zero. Throws std::out_of_range for out-of-limit angles.
ServoFrame radians_to_servo(const ArmModel& model, const JointVector& q, int duration_ms);
JointVector servo_to_radians(const ArmModel& model, const ServoFrame& frame);

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  std::string name = "cuboid";
};

/// Solid finite cylinder: base centre, unit axis, radius, height along axis.
struct Cylinder {
  Vec3 base = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double radius = 0.0;
  double height = 0.0;
  std::string name = "cylinder";
};

struct ObstacleSet {
  std::vector<Box> cuboids;
  std::vector<Cylinder> cylinders;
};

double point_box_distance(const Vec3& p, const Box& b);
double point_cylinder_distance(const Vec3& p, const Cylinder& c);
double segment_box_distance(const Vec3& a, const Vec3& b, const Box& box);
double segment_cylinder_distance(const Vec3& a, const Vec3& b, const Cylinder& cyl);

struct Contact {
  std::string link;
  std::string obstacle;
  double distance = 0.0;
};

struct LinkSegment {
  std::string name;
  Vec3 a;
  Vec3 b;
};

std::array<LinkSegment, 4> link_segments(const ArmFrames& frames);

/// nullopt when every link capsule clears every obstacle.
std::optional<Contact> check_collision(const ArmModel& model, const JointVector& q,
                                       const ObstacleSet& obstacles);

enum class GripperAction { Open, Close, Hold };

struct TrimWaypoint {
  std::string label;  // pre_grasp, grasp, retreat
  JointVector q;
  GripperAction gripper = GripperAction::Hold;
};

struct TrimPlan {
  std::vector<TrimWaypoint> waypoints;
  Vec3 approach = Vec3::UnitX();
  bool side_approach = false;
};

struct PlanOptions {
  double standoff = 0.05;
  std::vector<double> tilts{0.0, 0.35, -0.35, 0.7, -0.7, 1.0, 1.3, 1.5707963267948966};
  std::vector<double> side_angles{0.6, 0.9, 1.2};
  int motion_checks = 6;  // interpolated samples between pre-grasp and grasp
  IkOptions ik;
};

struct TrimPlanResult {
  std::optional<TrimPlan> plan;
  std::vector<std::string> failures;  // one reason per rejected approach

  bool ok() const { return plan.has_value(); }
};

TrimPlanResult plan_trim(const ArmModel& model, const Vec3& target, const ObstacleSet& obstacles,
                         const JointVector& seed, const PlanOptions& options = {});

}  // namespace strawbot
