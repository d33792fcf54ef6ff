#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "strawbot/drive.hpp"
#include "strawbot/geometry.hpp"
#include "strawbot/json_util.hpp"
#include "strawbot/world.hpp"

namespace strawbot {

struct AxisGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
};

struct PidGains {
  AxisGains x{2.5, 0.05, 0.1};
  AxisGains y{2.5, 0.05, 0.1};
  AxisGains theta{3.0, 0.1, 0.2};
  double integral_clamp = 0.02;  // per-axis |integral of error|, m*s or rad*s
  double max_linear = 0.15;      // norm of (vx, vy), m/s
  double max_angular = 1.0;      // rad/s
};

struct NavGoal {
  Pose2 pose;
  double position_tolerance = 0.02;
  double heading_tolerance = 0.05;
};

struct PoseEstimate {
  Pose2 pose;
  Vec3 covariance_diag = Vec3::Zero();  // (m^2, m^2, rad^2)
};

struct NoiseModel {
  bool enabled = true;
  double sigma_xy = 0.007;
  double sigma_theta = 0.01;
};

/// One noisy localisation fix: truth plus independent zero-mean Gaussian
/// noise per axis.
PoseEstimate estimate_pose(const Pose2& truth, const NoiseModel& noise, std::mt19937_64& rng);

struct PidState {
  Vec3 integral = Vec3::Zero();
  Vec3 previous_error = Vec3::Zero();
  bool has_previous = false;
};

/// Robot-frame error (x, y, theta) from `estimate` to `goal`.
Vec3 goal_error(const NavGoal& goal, const Pose2& estimate);

/// Holonomic per-axis PID. Zero twist (and a reset state) inside both
/// tolerances; otherwise the linear part is clamped in norm and the integral
/// is clamped per axis.
BodyTwist pid_step(const NavGoal& goal, const PoseEstimate& estimate, PidState& state, double dt,
                   const PidGains& gains = {});

/// Dead reckoning on the commanded twist, corrected toward each noisy fix
/// with a constant gain. With noise disabled the fix is exact and the
/// estimate tracks the truth.
class Localizer {
 public:
  Localizer(NoiseModel noise, std::uint64_t seed, double correction_gain = 0.02);

  void reset(const Pose2& initial);
  void predict(const BodyTwist& applied, double dt);
  /// Folds in one fix of the true pose and returns the new estimate.
  const PoseEstimate& correct(const Pose2& truth);
  const PoseEstimate& estimate() const { return estimate_; }
  const NoiseModel& noise() const { return noise_; }

 private:
  NoiseModel noise_;
  std::mt19937_64 rng_;
  double gain_;
  PoseEstimate estimate_;
};

/// Distance from the segment a-b to every plant footprint centre must exceed
/// its footprint radius. Returns the blocking plant id, or "" when clear.
std::string segment_blocker(const Pose2& a, const Pose2& b, const std::vector<Plant>& plants);

struct NavConfig {
  PidGains gains;
  /// Arrival is declared when the estimate is inside this fraction of each
  /// goal tolerance, leaving the remainder as margin for estimate error.
  double settle_fraction = 0.5;
  double base_budget = 10.0;   // s
  double budget_per_m = 15.0;  // s per metre of straight-line distance
  double budget_per_rad = 3.0;  // s per radian of heading change
};

/// What the navigator needs from the simulation: issue a twist, advance one
/// step, observe the truth for the localisation fix.
struct NavPlant {
  std::function<void(const BodyTwist&)> command;
  std::function<void()> step;
  std::function<Pose2()> true_pose;
  std::function<BodyTwist()> applied_twist;
  std::function<double()> clock;
  double dt = 0.01;
};

enum class NavStatus { Arrived, Timeout, Rejected };

const char* to_string(NavStatus s);

struct NavResult {
  NavStatus status = NavStatus::Rejected;
  std::string reason;
  int steps = 0;
  double elapsed = 0.0;
  double distance = 0.0;        // straight-line start-to-goal
  double position_error = 0.0;  // ground truth, at the end
  double heading_error = 0.0;
  Pose2 final_truth;
  Pose2 final_estimate;
};

NavResult navigate_to(NavPlant& plant, Localizer& localizer, const NavGoal& goal, const std::vector<Plant>& plants,
                      const NavConfig& config = {});

PidGains pid_gains_from_json(const JsonNode& node);
NavConfig nav_config_from_json(const JsonNode& node);

}  // namespace strawbot
