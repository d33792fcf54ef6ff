#include <numbers>
#include <random>

#include "doctest.h"
#include "strawbot/arm.hpp"

using namespace strawbot;
using std::numbers::pi;

namespace {

// Independent homogeneous-matrix chain; shares nothing with the production FK
// beyond the link lengths.
Mat4 rz(double a) {
  Mat4 m = Mat4::Identity();
  m(0, 0) = std::cos(a); m(0, 1) = -std::sin(a);
  m(1, 0) = std::sin(a); m(1, 1) = std::cos(a);
  return m;
}
Mat4 ry(double a) {
  Mat4 m = Mat4::Identity();
  m(0, 0) = std::cos(a); m(0, 2) = std::sin(a);
  m(2, 0) = -std::sin(a); m(2, 2) = std::cos(a);
  return m;
}
Mat4 rx(double a) {
  Mat4 m = Mat4::Identity();
  m(1, 1) = std::cos(a); m(1, 2) = -std::sin(a);
  m(2, 1) = std::sin(a); m(2, 2) = std::cos(a);
  return m;
}
Mat4 tr(double x, double y, double z) {
  Mat4 m = Mat4::Identity();
  m(0, 3) = x; m(1, 3) = y; m(2, 3) = z;
  return m;
}
Mat4 oracle_fk(const ArmModel& m, const JointVector& q) {
  return rz(q[0]) * tr(0, 0, m.base_height) * ry(q[1]) * tr(m.upper_arm, 0, 0) * ry(q[2]) *
         tr(m.forearm, 0, 0) * rx(q[3]) * rz(q[4]) * tr(m.gripper, 0, 0);
}

JointVector random_q(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-pi / 2, pi / 2);
  JointVector q;
  for (int i = 0; i < kNumJoints; ++i) q[i] = u(rng);
  return q;
}

// Dense sampling of the segment; an upper bound on the true distance that
// converges from above.
template <class F>
double sampled_distance(const Vec3& a, const Vec3& b, F point_distance) {
  double best = 1e9;
  for (int i = 0; i <= 20000; ++i) best = std::min(best, point_distance(a + (i / 20000.0) * (b - a)));
  return best;
}

}  // namespace

TEST_CASE("forward kinematics zero pose") {
  const ArmModel m = ArmModel::defaults();
  CHECK(m.reach() == doctest::Approx(0.403));
  Pose3 tip = forward_kinematics(m, JointVector::Zero());
  CHECK((tip.translation() - Vec3(0.403, 0, 0.10)).norm() < 1e-12);
  CHECK((tip.translation() - m.shoulder()).norm() == doctest::Approx(0.403));

  JointVector q = JointVector::Zero();
  q[0] = pi / 2;
  CHECK((forward_kinematics(m, q).translation() - Vec3(0, 0.403, 0.10)).norm() < 1e-12);
}

TEST_CASE("forward kinematics matches matrix-chain oracle") {
  const ArmModel m = ArmModel::defaults();
  std::mt19937_64 rng(42);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    JointVector q = random_q(rng);
    worst = std::max(worst, (forward_kinematics(m, q).matrix() - oracle_fk(m, q)).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("forward kinematics rejects out-of-limit joints") {
  const ArmModel m = ArmModel::defaults();
  JointVector q = JointVector::Zero();
  q[2] = 1.6;
  try {
    forward_kinematics(m, q);
    FAIL("expected LimitViolation");
  } catch (const LimitViolation& e) {
    CHECK(e.joint() == 2);
    CHECK(std::string(e.what()).find("J3") != std::string::npos);
  }
}

TEST_CASE("jacobian matches finite differences") {
  const ArmModel m = ArmModel::defaults();
  std::mt19937_64 rng(4);
  for (int n = 0; n < 20; ++n) {
    JointVector q = random_q(rng) * 0.9;
    auto jac = arm_jacobian(arm_frames(m, q));
    for (int i = 0; i < kNumJoints; ++i) {
      JointVector hi = q, lo = q;
      hi[i] += 1e-6;
      lo[i] -= 1e-6;
      ArmFrames fh = arm_frames(m, hi), fl = arm_frames(m, lo);
      Vec3 dp = (fh.tip - fl.tip) / 2e-6;
      Vec3 da = (fh.approach_axis() - fl.approach_axis()) / 2e-6;
      CHECK((jac.block<3, 1>(0, i) - dp).norm() < 1e-6);
      CHECK((jac.block<3, 1>(3, i) - da).norm() < 1e-6);
    }
  }
}

TEST_CASE("inverse kinematics on FK-generated targets") {
  const ArmModel m = ArmModel::defaults();
  std::mt19937_64 rng(7);
  int ok = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    JointVector q = random_q(rng);
    Vec3 target = forward_kinematics(m, q).translation();
    IkResult r = inverse_kinematics(m, {target, std::nullopt}, JointVector::Zero());
    CHECK(m.within_limits(r.q));
    if (r.ok()) {
      ++ok;
      CHECK((forward_kinematics(m, r.q).translation() - target).norm() <= 1e-3);
    }
  }
  CHECK(ok >= 990);
}

TEST_CASE("inverse kinematics edge cases") {
  const ArmModel m = ArmModel::defaults();
  IkResult far = inverse_kinematics(m, {Vec3(0.5, 0, 0.10), std::nullopt}, JointVector::Zero());
  CHECK(far.status == IkStatus::Unreachable);

  Vec3 zero_tip = forward_kinematics(m, JointVector::Zero()).translation();
  IkResult fixed = inverse_kinematics(m, {zero_tip, std::nullopt}, JointVector::Zero());
  CHECK(fixed.ok());
  CHECK(fixed.iterations == 0);
  CHECK(fixed.q == JointVector::Zero());
}

TEST_CASE("inverse kinematics with approach axis") {
  const ArmModel m = ArmModel::defaults();
  std::mt19937_64 rng(8);
  int ok = 0;
  for (int i = 0; i < 200; ++i) {
    JointVector q = random_q(rng);
    Pose3 tip = forward_kinematics(m, q);
    IkTarget t{tip.translation(), apply_rotation(tip, Vec3::UnitX())};
    IkResult r = inverse_kinematics(m, t, JointVector::Zero());
    CHECK(m.within_limits(r.q));
    if (r.ok()) {
      ++ok;
      ArmFrames f = arm_frames(m, r.q);
      CHECK((f.tip - t.position).norm() <= 1e-3);
      CHECK(std::acos(std::clamp(f.approach_axis().dot(*t.approach), -1.0, 1.0)) <= 0.02 + 1e-12);
    }
  }
  MESSAGE("approach-constrained IK successes: " << ok << "/200");
  CHECK(ok >= 150);
}

TEST_CASE("servo encoding") {
  const ArmModel m = ArmModel::defaults();
  JointVector q = JointVector::Zero();
  CHECK(radians_to_servo(m, q, 800).positions == std::array<int, 5>{500, 500, 500, 500, 500});
  q.setConstant(-pi / 2);
  CHECK(radians_to_servo(m, q, 0).positions[0] == 0);
  q.setConstant(pi / 2);
  CHECK(radians_to_servo(m, q, 0).positions[4] == 1000);

  q[1] = 1.6;
  CHECK_THROWS_AS(radians_to_servo(m, q, 0), std::out_of_range);
  ServoFrame bad;
  bad.positions = {1001, 0, 0, 0, 0};
  CHECK_THROWS_AS(servo_to_radians(m, bad), std::out_of_range);

  // Every wire value round-trips within one quantum; encoding is monotone.
  int prev = -1;
  for (int p = 0; p <= 1000; ++p) {
    ServoFrame f;
    f.positions.fill(p);
    JointVector back = servo_to_radians(m, f);
    CHECK(radians_to_servo(m, back, 0).positions[0] == p);
  }
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 20000; ++i) {
    JointVector r = random_q(rng);
    JointVector back = servo_to_radians(m, radians_to_servo(m, r, 0));
    worst = std::max(worst, (back - r).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= pi / 1000);
  CHECK(worst * 180 / pi < 0.3);
  for (double a = -pi / 2; a <= pi / 2; a += 0.001) {
    JointVector r = JointVector::Constant(a);
    int p = radians_to_servo(m, r, 0).positions[0];
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("collision: no obstacles is always clear") {
  const ArmModel m = ArmModel::defaults();
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) CHECK_FALSE(check_collision(m, random_q(rng), {}).has_value());
}

TEST_CASE("collision: cuboid behind the arm") {
  const ArmModel m = ArmModel::defaults();
  ObstacleSet obs;
  obs.cuboids.push_back({Vec3(-0.25, -0.1, 0.15), Vec3(-0.005, 0.1, 0.45), "compute_block"});

  for (double j2 : {0.0, -pi / 6, -pi / 4}) {
    JointVector q = JointVector::Zero();
    q[1] = j2;
    CHECK_FALSE(check_collision(m, q, obs).has_value());
  }
  for (double j2 : {-1.4, -pi / 2}) {
    JointVector q = JointVector::Zero();
    q[1] = j2;
    auto hit = check_collision(m, q, obs);
    REQUIRE(hit.has_value());
    CHECK(hit->link == "link2");
    CHECK(hit->obstacle == "compute_block");
    ArmFrames f = arm_frames(m, q);
    double oracle = sampled_distance(f.shoulder, f.elbow, [&](const Vec3& p) {
      return point_box_distance(p, obs.cuboids[0]);
    });
    CHECK(hit->distance == doctest::Approx(oracle).epsilon(1e-6).scale(1.0));
    CHECK(oracle < m.link_radius);
  }
}

TEST_CASE("collision: plant stem cylinder") {
  const ArmModel m = ArmModel::defaults();
  Cylinder stem{Vec3(0.25, 0, -0.2), Vec3::UnitZ(), 0.03, 0.5, "stem"};
  ObstacleSet obs;
  obs.cylinders.push_back(stem);
  auto hit = check_collision(m, JointVector::Zero(), obs);
  REQUIRE(hit.has_value());
  CHECK(hit->obstacle == "stem");

  obs.cylinders[0].base.y() += 0.08;
  CHECK_FALSE(check_collision(m, JointVector::Zero(), obs).has_value());
  ArmFrames f = arm_frames(m, JointVector::Zero());
  double oracle = sampled_distance(f.elbow, f.wrist, [&](const Vec3& p) {
    Vec3 d = p - obs.cylinders[0].base;
    return std::max(0.0, std::hypot(d.x(), d.y()) - 0.03);
  });
  CHECK(oracle == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(segment_cylinder_distance(f.elbow, f.wrist, obs.cylinders[0]) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("segment distances agree with sampling oracle") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 200; ++i) {
    Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
    Vec3 c(u(rng), u(rng), u(rng));
    Box box{c - Vec3(0.05, 0.08, 0.03), c + Vec3(0.05, 0.08, 0.03)};
    double exact = segment_box_distance(a, b, box);
    double sampled = sampled_distance(a, b, [&](const Vec3& p) { return point_box_distance(p, box); });
    CHECK(exact <= sampled + 1e-12);
    CHECK(sampled - exact < 1e-4);

    Cylinder cyl{c, Vec3(u(rng), u(rng), u(rng) + 1.0).normalized(), 0.04, 0.2};
    exact = segment_cylinder_distance(a, b, cyl);
    sampled = sampled_distance(a, b, [&](const Vec3& p) { return point_cylinder_distance(p, cyl); });
    CHECK(exact <= sampled + 1e-12);
    CHECK(sampled - exact < 1e-4);
  }
}

TEST_CASE("plan_trim in free space") {
  const ArmModel m = ArmModel::defaults();
  ObstacleSet obs;
  obs.cuboids.push_back({Vec3(-0.25, -0.1, -0.15), Vec3(-0.06, 0.1, 0.12), "compute_block"});
  TrimPlanResult r = plan_trim(m, Vec3(0.25, 0.0, 0.0), obs, JointVector::Zero());
  REQUIRE(r.ok());
  REQUIRE(r.plan->waypoints.size() == 3);
  CHECK(r.plan->waypoints[0].label == "pre_grasp");
  CHECK(r.plan->waypoints[1].gripper == GripperAction::Close);
  CHECK_FALSE(r.plan->side_approach);
  for (const auto& w : r.plan->waypoints) {
    CHECK(m.within_limits(w.q));
    CHECK_FALSE(check_collision(m, w.q, obs).has_value());
  }
  CHECK((forward_kinematics(m, r.plan->waypoints[1].q).translation() - Vec3(0.25, 0, 0)).norm() <= 1e-3);
  Vec3 pre = forward_kinematics(m, r.plan->waypoints[0].q).translation();
  CHECK((Vec3(0.25, 0, 0) - pre).norm() == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("plan_trim goes around the stem") {
  const ArmModel m = ArmModel::defaults();
  ObstacleSet obs;
  obs.cylinders.push_back({Vec3(0.22, 0, -0.15), Vec3::UnitZ(), 0.03, 0.35, "stem"});
  const Vec3 target(0.30, 0.0, 0.0);
  TrimPlanResult r = plan_trim(m, target, obs, JointVector::Zero());
  REQUIRE(r.ok());
  CHECK(r.plan->side_approach);
  CHECK(std::abs(r.plan->waypoints[1].q[3]) > 1e-3);
  bool direct_rejected = false;
  for (const auto& f : r.failures)
    if (f.rfind("direct", 0) == 0) direct_rejected = true;
  CHECK(direct_rejected);
  for (const auto& w : r.plan->waypoints) CHECK_FALSE(check_collision(m, w.q, obs).has_value());
}

TEST_CASE("plan_trim rejects unreachable targets") {
  const ArmModel m = ArmModel::defaults();
  TrimPlanResult r = plan_trim(m, Vec3(0.5, 0, 0.1), {}, JointVector::Zero());
  CHECK_FALSE(r.ok());
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].find("unreachable") != std::string::npos);
}

TEST_CASE("plan_trim waypoints are always collision free") {
  const ArmModel m = ArmModel::defaults();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int planned = 0;
  for (int i = 0; i < 40; ++i) {
    ObstacleSet obs;
    Vec3 c(0.15 + 0.2 * u(rng), -0.2 + 0.4 * u(rng), -0.15);
    obs.cylinders.push_back({c, Vec3::UnitZ(), 0.02 + 0.02 * u(rng), 0.3 + 0.2 * u(rng), "stem"});
    obs.cuboids.push_back({Vec3(-0.25, -0.1, -0.15), Vec3(-0.05 - 0.05 * u(rng), 0.1, 0.1 + 0.1 * u(rng)),
                           "compute_block"});
    Vec3 target(0.15 + 0.2 * u(rng), -0.2 + 0.4 * u(rng), -0.1 + 0.15 * u(rng));
    TrimPlanResult r = plan_trim(m, target, obs, JointVector::Zero());
    if (!r.ok()) continue;
    ++planned;
    for (const auto& w : r.plan->waypoints) {
      CHECK(m.within_limits(w.q));
      CHECK_FALSE(check_collision(m, w.q, obs).has_value());
    }
  }
  MESSAGE("planned " << planned << "/40 fuzzed scenes");
  CHECK(planned > 20);
}
