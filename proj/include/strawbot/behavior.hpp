#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "strawbot/arm.hpp"
#include "strawbot/geometry.hpp"
#include "strawbot/json_util.hpp"
#include "strawbot/navigation.hpp"
#include "strawbot/perception.hpp"
#include "strawbot/world.hpp"

namespace strawbot {

class SimHost;
class TraceWriter;

enum class MissionPhase { GoToIntersection, ProcessSideA, TransitAndTurn, ProcessSideB, ReturnToEnd, Done };

const char* to_string(MissionPhase p);

enum class PlantSide { Near, Far };

const char* to_string(PlantSide s);

/// A part as the robot knows it: built from its own detections, keyed by
/// proximity across frames. `position` is in the world frame as estimated.
struct PartTrack {
  std::string id;
  PartKind kind = PartKind::HealthyLeafCluster;
  Vec3 position = Vec3::Zero();
  PlantSide half = PlantSide::Near;  // which flank of the stem it sits on
  bool detected = true;
  bool targeted = false;
  bool trimmed = false;
  bool seen_from_near = false;
  bool deferred = false;  // a near-side flower the near pass could not trim
};

struct PlantRecord {
  std::string id;
  Bed bed = Bed::A;
  Pose2 near_pose;
  Pose2 far_pose;
  Vec3 stem_base = Vec3::Zero();
  double stem_radius = 0.03;
  double stem_height = 0.42;
  bool discovered = false;
  bool near_visited = false;
  bool far_visited = false;
  int flowers_remaining_near_side = 0;
  std::vector<PartTrack> parts;

  bool unvisited() const { return !near_visited || !far_visited; }
};

struct PlantLedger {
  std::vector<PlantRecord> plants;

  static PlantLedger from_world(const World& world);
  PlantRecord* find(const std::string& id);
  const PlantRecord* find(const std::string& id) const;
};

struct MissionClock {
  double elapsed = 0.0;
  double budget_side_a = 135.0;
  double budget_side_b = 285.0;
  double total_budget = 600.0;
};

struct Waypoints {
  Pose2 intersection;
  Pose2 far_end;
  Pose2 end_pose;

  /// far_end rotated by pi.
  Pose2 turned() const { return {far_end.x, far_end.y, far_end.theta + std::numbers::pi}; }
};

struct Observations {
  Pose2 pose;  // estimated
  /// Goal of the navigation that finished most recently, whether it arrived
  /// or gave up.
  std::optional<Pose2> last_goal;
  bool actuator_raised = false;
};

enum class ActionKind { Navigate, ProcessPlant, RaiseActuator, Turn180, Finish };

const char* to_string(ActionKind k);

struct Action {
  ActionKind kind = ActionKind::Finish;
  MissionPhase phase = MissionPhase::Done;  // phase after this decision
  Pose2 target;
  std::string plant_id;
  PlantSide side = PlantSide::Near;
};

/// Pure decision function of the mission FSM. Never returns an earlier phase
/// than `phase`.
Action next_action(MissionPhase phase, const PlantLedger& ledger, const MissionClock& clock,
                   const Waypoints& waypoints, const Observations& obs);

struct FlowerCandidate {
  std::string id;
  double stem_distance = 0.0;
};

/// Ids to trim. Near side: every flower except the one closest to the stem
/// (ties to the lowest id). Far side: all but one when the near side left
/// none, all when it left one; `near_remaining` is clamped to {0, 1}.
std::vector<std::string> flower_trim_plan(PlantSide side, const std::vector<FlowerCandidate>& flowers,
                                          int near_remaining);

struct MissionConfig {
  std::uint64_t seed = 7;
  bool noise = true;
  double depth_noise_sigma = 0.002;  // applied only with noise on
  MissionClock clock;
  NavConfig nav;
  PerceptionConfig perception;
  PlanOptions planning;
  double track_radius = 0.03;        // detections closer than this share a track
  double healthy_clearance = 0.012;  // half-size of the keep-out box around healthy detections
  double arm_speed_fraction = 0.5;   // of each joint's max rate when timing servo moves
  double actuator_extension = 0.125;

  static MissionConfig from_json(const JsonNode& node);
};

struct MissionResult {
  bool completed = false;  // reached Done inside the total budget
  MissionPhase final_phase = MissionPhase::GoToIntersection;
  std::string end_reason;
  PlantLedger ledger;
  std::vector<std::pair<MissionPhase, double>> phase_log;
  std::vector<NavResult> navigations;
  int trims_attempted = 0;
  int trims_succeeded = 0;
  int plan_failures = 0;
  std::vector<std::string> anomalies;
};

/// Runs the full mission against `host` through the in-process bridge
/// client. Every sim step and decision lands in `trace`.
MissionResult run_mission(SimHost& host, const MissionConfig& config, TraceWriter& trace);

}  // namespace strawbot
