#include "strawbot/navigation.hpp"

#include <algorithm>
#include <cmath>

namespace strawbot {

PoseEstimate estimate_pose(const Pose2& truth, const NoiseModel& noise, std::mt19937_64& rng) {
  if (!noise.enabled) return {truth, Vec3::Zero()};
  std::normal_distribution<double> n(0.0, 1.0);
  const double ex = noise.sigma_xy * n(rng);
  const double ey = noise.sigma_xy * n(rng);
  const double et = noise.sigma_theta * n(rng);
  const double vxy = noise.sigma_xy * noise.sigma_xy;
  return {Pose2(truth.x + ex, truth.y + ey, truth.theta + et), Vec3(vxy, vxy, noise.sigma_theta * noise.sigma_theta)};
}

Vec3 goal_error(const NavGoal& goal, const Pose2& est) {
  const double dx = goal.pose.x - est.x, dy = goal.pose.y - est.y;
  const double c = std::cos(est.theta), s = std::sin(est.theta);
  return {c * dx + s * dy, -s * dx + c * dy, normalize_angle(goal.pose.theta - est.theta)};
}

BodyTwist pid_step(const NavGoal& goal, const PoseEstimate& estimate, PidState& st, double dt, const PidGains& g) {
  const Vec3 e = goal_error(goal, estimate.pose);
  if (std::hypot(e.x(), e.y()) <= goal.position_tolerance && std::abs(e.z()) <= goal.heading_tolerance) {
    st = PidState{};
    return {};
  }
  const AxisGains ax[3] = {g.x, g.y, g.theta};
  Vec3 d = Vec3::Zero();
  if (st.has_previous && dt > 0) d = (e - st.previous_error) / dt;
  Vec3 proposed_integral = st.integral + e * dt;
  for (int i = 0; i < 3; ++i)
    proposed_integral[i] = std::clamp(proposed_integral[i], -g.integral_clamp, g.integral_clamp);

  auto output = [&](const Vec3& integral) {
    Vec3 u;
    for (int i = 0; i < 3; ++i) u[i] = ax[i].kp * e[i] + ax[i].ki * integral[i] + ax[i].kd * d[i];
    return u;
  };
  Vec3 u = output(proposed_integral);
  const double lin = std::hypot(u.x(), u.y());
  const bool saturated = lin > g.max_linear || std::abs(u.z()) > g.max_angular;
  // Conditional integration: hold the integral while the output saturates.
  if (!saturated) st.integral = proposed_integral;
  else u = output(st.integral);

  const double n = std::hypot(u.x(), u.y());
  if (n > g.max_linear) {
    u.x() *= g.max_linear / n;
    u.y() *= g.max_linear / n;
  }
  u.z() = std::clamp(u.z(), -g.max_angular, g.max_angular);
  st.previous_error = e;
  st.has_previous = true;
  return {u.x(), u.y(), u.z()};
}

Localizer::Localizer(NoiseModel noise, std::uint64_t seed, double correction_gain)
    : noise_(noise), rng_(seed), gain_(correction_gain) {}

void Localizer::reset(const Pose2& initial) { estimate_ = {initial, Vec3::Zero()}; }

void Localizer::predict(const BodyTwist& applied, double dt) {
  estimate_.pose = integrate_twist(estimate_.pose, applied, dt);
}

const PoseEstimate& Localizer::correct(const Pose2& truth) {
  const PoseEstimate fix = estimate_pose(truth, noise_, rng_);
  if (!noise_.enabled) {
    estimate_ = fix;
    return estimate_;
  }
  Pose2& p = estimate_.pose;
  p = Pose2(p.x + gain_ * (fix.pose.x - p.x), p.y + gain_ * (fix.pose.y - p.y),
            p.theta + gain_ * normalize_angle(fix.pose.theta - p.theta));
  // Stationary variance of a constant-gain blend of white fixes.
  estimate_.covariance_diag = fix.covariance_diag * (gain_ / (2.0 - gain_));
  return estimate_;
}

std::string segment_blocker(const Pose2& a, const Pose2& b, const std::vector<Plant>& plants) {
  const Eigen::Vector2d pa = a.position(), pb = b.position(), ab = pb - pa;
  const double len2 = ab.squaredNorm();
  for (const auto& plant : plants) {
    const Eigen::Vector2d c = plant.base_pose.position();
    const double t = len2 > 0 ? std::clamp((c - pa).dot(ab) / len2, 0.0, 1.0) : 0.0;
    if ((pa + t * ab - c).norm() < plant.footprint_radius) return plant.id;
  }
  return "";
}

const char* to_string(NavStatus s) {
  switch (s) {
    case NavStatus::Arrived: return "arrived";
    case NavStatus::Timeout: return "timeout";
    case NavStatus::Rejected: return "rejected";
  }
  return "?";
}

NavResult navigate_to(NavPlant& plant, Localizer& loc, const NavGoal& goal, const std::vector<Plant>& plants,
                      const NavConfig& cfg) {
  NavResult r;
  const Pose2 start_est = loc.estimate().pose;
  r.distance = std::hypot(goal.pose.x - start_est.x, goal.pose.y - start_est.y);
  if (const std::string blocker = segment_blocker(start_est, goal.pose, plants); !blocker.empty()) {
    r.status = NavStatus::Rejected;
    r.reason = "segment not clear: crosses footprint of plant '" + blocker + "'";
    r.final_truth = plant.true_pose();
    r.final_estimate = start_est;
    return r;
  }

  NavGoal settle = goal;
  settle.position_tolerance *= cfg.settle_fraction;
  settle.heading_tolerance *= cfg.settle_fraction;
  const double turn = std::abs(normalize_angle(goal.pose.theta - start_est.theta));
  const double budget = cfg.base_budget + cfg.budget_per_m * r.distance + cfg.budget_per_rad * turn;
  const double t0 = plant.clock();

  PidState pid;
  r.status = NavStatus::Timeout;
  while (true) {
    const Vec3 e = goal_error(settle, loc.estimate().pose);
    if (std::hypot(e.x(), e.y()) <= settle.position_tolerance && std::abs(e.z()) <= settle.heading_tolerance) {
      r.status = NavStatus::Arrived;
      break;
    }
    if (plant.clock() - t0 >= budget) break;
    plant.command(pid_step(settle, loc.estimate(), pid, plant.dt, cfg.gains));
    plant.step();
    ++r.steps;
    loc.predict(plant.applied_twist(), plant.dt);
    loc.correct(plant.true_pose());
  }
  plant.command({});
  r.elapsed = plant.clock() - t0;
  r.final_truth = plant.true_pose();
  r.final_estimate = loc.estimate().pose;
  r.position_error = std::hypot(r.final_truth.x - goal.pose.x, r.final_truth.y - goal.pose.y);
  r.heading_error = std::abs(normalize_angle(r.final_truth.theta - goal.pose.theta));
  if (r.status == NavStatus::Timeout) r.reason = "time budget exhausted";
  return r;
}

namespace {

AxisGains axis_from(const JsonNode& n, const AxisGains& d) {
  AxisGains g{n.number_or("kp", d.kp), n.number_or("ki", d.ki), n.number_or("kd", d.kd)};
  if (g.kp < 0 || g.ki < 0 || g.kd < 0) n.fail("gains must be non-negative");
  return g;
}

}  // namespace

PidGains pid_gains_from_json(const JsonNode& n) {
  PidGains g;
  if (auto a = n.find("x")) g.x = axis_from(*a, g.x);
  if (auto a = n.find("y")) g.y = axis_from(*a, g.y);
  if (auto a = n.find("theta")) g.theta = axis_from(*a, g.theta);
  g.integral_clamp = n.positive_or("integral_clamp", g.integral_clamp);
  g.max_linear = n.positive_or("max_linear", g.max_linear);
  g.max_angular = n.positive_or("max_angular", g.max_angular);
  return g;
}

NavConfig nav_config_from_json(const JsonNode& n) {
  NavConfig c;
  if (auto g = n.find("gains")) c.gains = pid_gains_from_json(*g);
  c.settle_fraction = n.positive_or("settle_fraction", c.settle_fraction);
  if (c.settle_fraction > 1.0) n.at("settle_fraction").fail("must be <= 1");
  c.base_budget = n.positive_or("base_budget_s", c.base_budget);
  c.budget_per_m = n.positive_or("budget_per_m_s", c.budget_per_m);
  c.budget_per_rad = n.positive_or("budget_per_rad_s", c.budget_per_rad);
  return c;
}

}  // namespace strawbot
