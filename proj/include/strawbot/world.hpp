#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "strawbot/arm.hpp"
#include "strawbot/camera.hpp"
#include "strawbot/common.hpp"
#include "strawbot/drive.hpp"
#include "strawbot/geometry.hpp"
#include "strawbot/json_util.hpp"

namespace strawbot {

enum class PartKind { HealthyLeafCluster, UnhealthyLeafCluster, Flower };

const char* to_string(PartKind k);
PartKind part_kind_from_string(const std::string& s);


/// A leaf cluster or flower: a flat disc of `radius` through `center`,
/// facing `surface_normal`.
struct PlantPart {
  std::string id;
  PartKind kind = PartKind::HealthyLeafCluster;
  Vec3 center = Vec3::Zero();
  double radius = 0.03;
  Vec3 surface_normal = Vec3::UnitZ();
  Rgb color;
  bool trimmed = false;
};

/// Vertical stem cylinder standing on the ground.
struct Stem {
  Vec3 base = Vec3::Zero();
  double radius = 0.03;
  double height = 0.42;
  Rgb color{110, 80, 50};
};

enum class Bed { A, B };

struct Plant {
  std::string id;
  Bed bed = Bed::A;
  Pose2 base_pose;
  Stem stem;
  std::vector<PlantPart> parts;
  Pose2 near_side;
  Pose2 far_side;
  double footprint_radius = 0.2;
};

/// Colour-matched but non-planar object (a ball) used to probe false
/// positives. Not part of any plant.
struct Distractor {
  std::string id;
  Vec3 center = Vec3::Zero();
  double radius = 0.04;
  Rgb color;
};

struct ArenaConfig {
  double hallway_length = 3.0;
  double hallway_width = 0.8;
  Rect bounds{-0.6, 3.6, -1.0, 1.0};
  Rect start_area{-0.5, -0.1, -0.2, 0.2};
  Rect end_area{-0.5, -0.1, 0.25, 0.65};
  Pose2 intersection{0.2, 0.0, -0.6};
  Pose2 far_end{2.8, 0.0, -0.6};
  Pose2 end_pose{-0.3, 0.45, 0.0};
  Rgb backdrop{70, 55, 45};

  /// The drive corridor, x in [0, length], |y| <= width / 2.
  Rect hallway() const { return {0.0, hallway_length, -hallway_width / 2, hallway_width / 2}; }
};

struct CameraMount {
  Vec3 offset = Vec3::Zero();  // robot frame
  double pitch = 0.0;          // radians, positive looks down
};

struct RobotConfig {
  MecanumGeometry wheels;
  double chassis_length = 0.298;
  double chassis_width = 0.256;
  double chassis_height = 0.148;
  double max_linear_speed = 0.30;
  double max_angular_speed = 1.5;
  ArmModel arm = ArmModel::defaults();
  Vec3 arm_base_offset{0.10, 0.0, 0.148};
  JointVector home = (JointVector() << 0.0, -1.4, 1.4, 0.0, 0.0).finished();
  double actuator_stroke = 0.125;
  double actuator_speed = 0.05;  // m/s
  CameraMount rear_camera{{-0.12, 0.0, 0.25}, 0.25};
  CameraMount front_camera{{0.15, 0.0, 0.15}, 0.0};
  CameraIntrinsics intrinsics;
  double grasp_tolerance = 0.015;
  Box compute_block{Vec3(-0.26, -0.11, -0.148), Vec3(-0.07, 0.11, 0.10), "compute_block"};

  /// Arm base frame expressed in the robot frame.
  Transform arm_base() const { return Transform::from_translation(arm_base_offset); }
};

enum class Gripper { Open, Closed };

struct RobotState {
  Pose2 chassis;
  BodyTwist chassis_twist;
  JointVector joints = JointVector::Zero();
  double actuator_extension = 0.0;
  Gripper gripper = Gripper::Open;
};

/// Linear joint-space move from the configuration at issue time to `target`
/// over `duration` seconds, further limited by each joint's max rate.
struct ArmMotion {
  JointVector start = JointVector::Zero();
  JointVector target = JointVector::Zero();
  double duration = 0.0;
  double elapsed = 0.0;
};

/// Setpoint changes applied at the start of a step. Unset fields keep the
/// previous setpoint.
struct ActuationCommand {
  std::optional<BodyTwist> twist;
  std::optional<ArmMotion> arm;
  std::optional<double> actuator_target;
  std::optional<Gripper> gripper;
};

enum class TrimOutcome { Success, Miss, AlreadyTrimmed };

struct TrimResult {
  TrimOutcome outcome = TrimOutcome::Miss;
  std::string part_id;
  double distance = 0.0;
};

/// What happened during one step.
struct StepEvents {
  bool twist_clamped = false;
  bool wall_contact = false;
  bool arm_arrived = false;      // the active arm motion finished this step
  bool actuator_arrived = false; // the actuator reached its target this step
  std::optional<TrimResult> trim;  // set when the gripper closed this step
};

struct PartState {
  std::string id;
  std::string plant_id;
  PartKind kind = PartKind::HealthyLeafCluster;
  Vec3 center = Vec3::Zero();
  bool trimmed = false;
};

struct GroundTruth {
  double clock = 0.0;
  RobotState robot;
  std::vector<PartState> parts;
};


class World {
 public:
  World() = default;

  ArenaConfig arena;
  RobotConfig robot_config;
  std::vector<Plant> plants;
  std::vector<Distractor> distractors;
  RobotState robot;
  double clock = 0.0;
  std::uint64_t rng_seed = 0;
  double timestep = 0.01;

  /// Active setpoints.
  BodyTwist twist_setpoint;
  std::optional<ArmMotion> arm_motion;
  double actuator_target = 0.0;

  StepEvents step(double dt, const ActuationCommand& cmd);

  TrimResult trim_part(const std::string& part_id, const Vec3& gripper_tip);

  GroundTruth ground_truth() const;

  Transform robot_transform() const { return Transform::from_pose2(robot.chassis); }
  /// Arm base frame in the world frame for the current chassis pose.
  Transform arm_base_in_world() const { return compose(robot_transform(), robot_config.arm_base()); }
  Vec3 gripper_tip() const;

  const PlantPart* find_part(const std::string& id) const;
  PlantPart* find_part(const std::string& id);
  const Plant* find_plant(const std::string& id) const;
  std::size_t trimmed_count() const;
};

/// Rigid planar motion under a constant body twist for dt seconds (exact
/// SE(2) exponential).
Pose2 integrate_twist(const Pose2& pose, const BodyTwist& twist, double dt);

}  // namespace strawbot

namespace strawbot {

/// Builds a World at clock 0 from a scenario document. Throws ScenarioError
/// with the offending path on schema violations, and "plant part unreachable"
/// naming the part when no approach pose puts it inside the arm's reach.
World load_scenario(const Json& document);

/// Reads and parses a scenario file; I/O and JSON syntax errors surface as
/// ScenarioError too.
Json read_scenario_file(const std::string& path);
World load_scenario_file(const std::string& path);

/// Parses only the robot section (defaults for anything absent).
RobotConfig robot_config_from_json(const JsonNode& node);

/// Shoulder position in the world for a chassis pose.
Vec3 shoulder_in_world(const RobotConfig& config, const Pose2& chassis);

}  // namespace strawbot
