#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "strawbot/world.hpp"

namespace strawbot {

namespace {

CameraMount mount_from(const JsonNode& n, const CameraMount& fallback) {
  return {n.vec3_or("offset", fallback.offset), n.number_or("pitch", fallback.pitch)};
}

CameraIntrinsics intrinsics_from(const JsonNode& n) {
  CameraIntrinsics k;
  k.width = static_cast<int>(n.integer_or("width", k.width));
  k.height = static_cast<int>(n.integer_or("height", k.height));
  k.fx = n.positive_or("fx", k.fx);
  k.fy = n.positive_or("fy", k.fy);
  k.cx = n.number_or("cx", k.cx);
  k.cy = n.number_or("cy", k.cy);
  if (!k.valid()) n.fail("invalid intrinsics");
  return k;
}

double distance_to_rect(double x, double y, const Rect& r) {
  const double dx = std::max({r.x_min - x, 0.0, x - r.x_max});
  const double dy = std::max({r.y_min - y, 0.0, y - r.y_max});
  return std::hypot(dx, dy);
}

PlantPart part_from(const JsonNode& n) {
  PlantPart p;
  p.id = n.at("id").string();
  try {
    p.kind = part_kind_from_string(n.at("kind").string());
  } catch (const std::invalid_argument& e) {
    n.at("kind").fail(e.what());
  }
  p.center = n.at("center").vec3();
  p.radius = n.at("radius").positive();
  const Vec3 normal = n.vec3_or("normal", Vec3::UnitZ());
  if (normal.norm() < 1e-9) n.at("normal").fail("normal must be non-zero");
  p.surface_normal = normal.normalized();
  p.color = n.at("color").rgb();
  return p;
}

}  // namespace

Vec3 shoulder_in_world(const RobotConfig& config, const Pose2& chassis) {
  return apply(compose(Transform::from_pose2(chassis), config.arm_base()), config.arm.shoulder());
}

RobotConfig robot_config_from_json(const JsonNode& n) {
  RobotConfig c;
  if (!n.raw().is_object()) n.fail("expected object");
  if (auto w = n.find("wheels")) {
    c.wheels.wheel_radius = w->positive_or("radius", c.wheels.wheel_radius);
    c.wheels.half_length = w->positive_or("half_length", c.wheels.half_length);
    c.wheels.half_width = w->positive_or("half_width", c.wheels.half_width);
    const std::string layout = w->string_or("layout", "X");
    if (layout != "X" && layout != "O") w->at("layout").fail("expected \"X\" or \"O\"");
    c.wheels.layout = layout == "X" ? RollerLayout::X : RollerLayout::O;
  }
  c.max_linear_speed = n.positive_or("max_linear_speed", c.max_linear_speed);
  c.max_angular_speed = n.positive_or("max_angular_speed", c.max_angular_speed);
  if (auto a = n.find("arm")) {
    c.arm.base_height = a->positive_or("base_height", c.arm.base_height);
    c.arm.upper_arm = a->positive_or("upper_arm", c.arm.upper_arm);
    c.arm.forearm = a->positive_or("forearm", c.arm.forearm);
    c.arm.gripper = a->positive_or("gripper", c.arm.gripper);
    c.arm.link_radius = a->positive_or("link_radius", c.arm.link_radius);
    const double rate = a->positive_or("max_rate", c.arm.joints[0].max_rate);
    for (auto& j : c.arm.joints) j.max_rate = rate;
  }
  c.arm_base_offset = n.vec3_or("arm_base_offset", c.arm_base_offset);
  if (auto h = n.find("home")) {
    if (h->size() != kNumJoints) h->fail("expected 5 joint angles");
    for (std::size_t i = 0; i < kNumJoints; ++i) c.home[static_cast<int>(i)] = h->at(i).number();
    if (!c.arm.within_limits(c.home)) h->fail("home configuration outside joint limits");
  }
  c.actuator_stroke = n.positive_or("actuator_stroke", c.actuator_stroke);
  c.actuator_speed = n.positive_or("actuator_speed", c.actuator_speed);
  if (auto m = n.find("rear_camera")) c.rear_camera = mount_from(*m, c.rear_camera);
  if (auto m = n.find("front_camera")) c.front_camera = mount_from(*m, c.front_camera);
  if (auto k = n.find("intrinsics")) c.intrinsics = intrinsics_from(*k);
  c.grasp_tolerance = n.positive_or("grasp_tolerance", c.grasp_tolerance);
  if (auto b = n.find("compute_block")) {
    c.compute_block.min = b->at("min").vec3();
    c.compute_block.max = b->at("max").vec3();
    if ((c.compute_block.max - c.compute_block.min).minCoeff() < 0.0) b->fail("negative extent");
  }
  return c;
}

World load_scenario(const Json& document) {
  const JsonNode root(document, "scenario");
  if (!document.is_object()) root.fail("expected object");

  World w;
  w.rng_seed = static_cast<std::uint64_t>(root.integer_or("seed", 0));
  w.timestep = root.positive_or("timestep", 0.01);

  if (auto a = root.find("arena")) {
    ArenaConfig& ar = w.arena;
    ar.hallway_length = a->positive_or("hallway_length", ar.hallway_length);
    ar.hallway_width = a->positive_or("hallway_width", ar.hallway_width);
    ar.bounds = a->rect_or("bounds", ar.bounds);
    ar.start_area = a->rect_or("start_area", ar.start_area);
    ar.end_area = a->rect_or("end_area", ar.end_area);
    ar.intersection = a->pose2_or("intersection", ar.intersection);
    ar.far_end = a->pose2_or("far_end", ar.far_end);
    ar.end_pose = a->pose2_or("end_pose", ar.end_pose);
    ar.backdrop = a->rgb_or("backdrop", ar.backdrop);
    if (!ar.bounds.contains(ar.start_area)) a->fail("start_area outside arena bounds");
    if (!ar.bounds.contains(ar.end_area)) a->fail("end_area outside arena bounds");
  }
  if (auto r = root.find("robot")) w.robot_config = robot_config_from_json(*r);

  std::set<std::string> ids;
  if (auto plants = root.find("plants")) {
    for (std::size_t i = 0; i < plants->size(); ++i) {
      const JsonNode pn = plants->at(i);
      Plant p;
      p.id = pn.at("id").string();
      if (!ids.insert(p.id).second) pn.at("id").fail("duplicate id '" + p.id + "'");
      const std::string bed = pn.string_or("bed", "A");
      if (bed != "A" && bed != "B") pn.at("bed").fail("expected \"A\" or \"B\"");
      p.bed = bed == "A" ? Bed::A : Bed::B;
      p.base_pose = pn.at("base").pose2();
      p.stem.base = Vec3(p.base_pose.x, p.base_pose.y, 0.0);
      if (auto s = pn.find("stem")) {
        p.stem.radius = s->positive_or("radius", p.stem.radius);
        p.stem.height = s->positive_or("height", p.stem.height);
        p.stem.color = s->rgb_or("color", p.stem.color);
      }
      p.near_side = pn.at("near_side").pose2();
      p.far_side = pn.at("far_side").pose2();
      p.footprint_radius = pn.positive_or("footprint_radius", p.footprint_radius);
      if (distance_to_rect(p.base_pose.x, p.base_pose.y, w.arena.hallway()) < p.footprint_radius)
        pn.fail("plant footprint overlaps the hallway corridor");

      const JsonNode parts = pn.at("parts");
      for (std::size_t k = 0; k < parts.size(); ++k) {
        const JsonNode partn = parts.at(k);
        PlantPart part = part_from(partn);
        if (!ids.insert(part.id).second) partn.at("id").fail("duplicate id '" + part.id + "'");
        const double reach = w.robot_config.arm.reach();
        const double dn = (part.center - shoulder_in_world(w.robot_config, p.near_side)).norm();
        const double df = (part.center - shoulder_in_world(w.robot_config, p.far_side)).norm();
        if (dn > reach && df > reach)
          throw ScenarioError(partn.path() + ": plant part unreachable: '" + part.id + "' is " +
                              std::to_string(std::min(dn, df)) + " m from the nearest approach shoulder");
        p.parts.push_back(std::move(part));
      }
      w.plants.push_back(std::move(p));
    }
  }

  if (auto ds = root.find("distractors")) {
    for (std::size_t i = 0; i < ds->size(); ++i) {
      const JsonNode dn = ds->at(i);
      Distractor d;
      d.id = dn.at("id").string();
      if (!ids.insert(d.id).second) dn.at("id").fail("duplicate id '" + d.id + "'");
      d.center = dn.at("center").vec3();
      d.radius = dn.at("radius").positive();
      d.color = dn.at("color").rgb();
      w.distractors.push_back(d);
    }
  }

  const auto start = w.arena.start_area.center();
  w.robot.chassis = Pose2(start.x(), start.y(), root.number_or("start_heading", 0.0));
  w.robot.joints = w.robot_config.home;
  w.robot.actuator_extension = 0.0;
  w.actuator_target = 0.0;
  w.clock = 0.0;
  return w;
}

Json read_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ScenarioError(path + ": invalid JSON: " + e.what());
  }
}

World load_scenario_file(const std::string& path) { return load_scenario(read_scenario_file(path)); }

}  // namespace strawbot
