#include "strawbot/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "strawbot/bridge.hpp"
#include "strawbot/logging.hpp"
#include "strawbot/sensor.hpp"
#include "strawbot/trace.hpp"

namespace strawbot {

const char* to_string(MissionPhase p) {
  switch (p) {
    case MissionPhase::GoToIntersection: return "go_to_intersection";
    case MissionPhase::ProcessSideA: return "process_side_a";
    case MissionPhase::TransitAndTurn: return "transit_and_turn";
    case MissionPhase::ProcessSideB: return "process_side_b";
    case MissionPhase::ReturnToEnd: return "return_to_end";
    case MissionPhase::Done: return "done";
  }
  return "?";
}

const char* to_string(PlantSide s) { return s == PlantSide::Near ? "near" : "far"; }

const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Navigate: return "navigate";
    case ActionKind::ProcessPlant: return "process_plant";
    case ActionKind::RaiseActuator: return "raise_actuator";
    case ActionKind::Turn180: return "turn_180";
    case ActionKind::Finish: return "finish";
  }
  return "?";
}

PlantLedger PlantLedger::from_world(const World& world) {
  PlantLedger l;
  for (const auto& p : world.plants) {
    PlantRecord r;
    r.id = p.id;
    r.bed = p.bed;
    r.near_pose = p.near_side;
    r.far_pose = p.far_side;
    r.stem_base = p.stem.base;
    r.stem_radius = p.stem.radius;
    r.stem_height = p.stem.height;
    l.plants.push_back(std::move(r));
  }
  return l;
}

PlantRecord* PlantLedger::find(const std::string& id) {
  for (auto& p : plants)
    if (p.id == id) return &p;
  return nullptr;
}

const PlantRecord* PlantLedger::find(const std::string& id) const {
  return const_cast<PlantLedger*>(this)->find(id);
}

// ---------------------------------------------------------------------------
// Decisions

namespace {

bool same_pose(const Pose2& a, const Pose2& b) {
  return std::abs(a.x - b.x) < 1e-9 && std::abs(a.y - b.y) < 1e-9 &&
         std::abs(normalize_angle(a.theta - b.theta)) < 1e-9;
}

bool reached(const Observations& o, const Pose2& p) { return o.last_goal && same_pose(*o.last_goal, p); }

struct Candidate {
  const PlantRecord* plant = nullptr;
  PlantSide side = PlantSide::Near;
  Pose2 pose;
};

// Nearest pending approach pose on `bed`; each plant offers its near side
// until that is done, then its far side.
std::optional<Candidate> next_candidate(const PlantLedger& ledger, Bed bed, const Pose2& from) {
  std::optional<Candidate> best;
  double best_d = 0.0;
  for (const auto& p : ledger.plants) {
    if (p.bed != bed || !p.discovered || !p.unvisited()) continue;
    Candidate c{&p, p.near_visited ? PlantSide::Far : PlantSide::Near, p.near_visited ? p.far_pose : p.near_pose};
    const double d = std::hypot(c.pose.x - from.x, c.pose.y - from.y);
    if (!best || d < best_d - 1e-12 || (std::abs(d - best_d) <= 1e-12 && p.id < best->plant->id)) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

Action make(ActionKind kind, MissionPhase phase, const Pose2& target = {}) {
  Action a;
  a.kind = kind;
  a.phase = phase;
  a.target = target;
  return a;
}

}  // namespace

Action next_action(MissionPhase phase, const PlantLedger& ledger, const MissionClock& clock, const Waypoints& w,
                   const Observations& obs) {
  if (phase == MissionPhase::Done || clock.elapsed >= clock.total_budget)
    return make(ActionKind::Finish, MissionPhase::Done);

  MissionPhase p = phase;
  while (true) {
    switch (p) {
      case MissionPhase::GoToIntersection:
        if (!reached(obs, w.intersection)) return make(ActionKind::Navigate, p, w.intersection);
        p = next_candidate(ledger, Bed::A, obs.pose) ? MissionPhase::ProcessSideA : MissionPhase::TransitAndTurn;
        break;

      case MissionPhase::ProcessSideA:
      case MissionPhase::ProcessSideB: {
        const bool side_a = p == MissionPhase::ProcessSideA;
        const double budget = side_a ? clock.budget_side_a : clock.budget_side_b;
        const auto c = next_candidate(ledger, side_a ? Bed::A : Bed::B, obs.pose);
        if (!c || clock.elapsed >= budget) {
          p = side_a ? MissionPhase::TransitAndTurn : MissionPhase::ReturnToEnd;
          break;
        }
        if (!obs.actuator_raised) return make(ActionKind::RaiseActuator, p);
        Action a = make(reached(obs, c->pose) ? ActionKind::ProcessPlant : ActionKind::Navigate, p, c->pose);
        a.plant_id = c->plant->id;
        a.side = c->side;
        return a;
      }

      case MissionPhase::TransitAndTurn:
        if (reached(obs, w.turned())) {
          p = MissionPhase::ProcessSideB;
          break;
        }
        if (reached(obs, w.far_end)) return make(ActionKind::Turn180, p, w.turned());
        return make(ActionKind::Navigate, p, w.far_end);

      case MissionPhase::ReturnToEnd:
        if (reached(obs, w.end_pose)) return make(ActionKind::Finish, MissionPhase::Done);
        return make(ActionKind::Navigate, p, w.end_pose);

      case MissionPhase::Done:
        return make(ActionKind::Finish, MissionPhase::Done);
    }
  }
}

std::vector<std::string> flower_trim_plan(PlantSide side, const std::vector<FlowerCandidate>& flowers,
                                          int near_remaining) {
  std::vector<FlowerCandidate> sorted = flowers;
  std::sort(sorted.begin(), sorted.end(), [](const FlowerCandidate& a, const FlowerCandidate& b) {
    if (a.stem_distance != b.stem_distance) return a.stem_distance < b.stem_distance;
    return a.id < b.id;
  });
  const int remaining = std::clamp(near_remaining, 0, 1);
  const bool skip_one = side == PlantSide::Near || remaining == 0;
  std::vector<std::string> out;
  for (std::size_t i = skip_one ? 1 : 0; i < sorted.size(); ++i) out.push_back(sorted[i].id);
  std::sort(out.begin(), out.end());
  return out;
}

MissionConfig MissionConfig::from_json(const JsonNode& n) {
  MissionConfig c;
  c.seed = static_cast<std::uint64_t>(n.integer_or("seed", static_cast<long long>(c.seed)));
  c.noise = n.boolean_or("noise", c.noise);
  c.depth_noise_sigma = n.number_or("depth_noise_sigma", c.depth_noise_sigma);
  if (c.depth_noise_sigma < 0) n.at("depth_noise_sigma").fail("expected non-negative number");
  if (auto b = n.find("budgets")) {
    c.clock.budget_side_a = b->positive_or("side_a_s", c.clock.budget_side_a);
    c.clock.budget_side_b = b->positive_or("side_b_s", c.clock.budget_side_b);
    c.clock.total_budget = b->positive_or("total_s", c.clock.total_budget);
  }
  if (auto v = n.find("navigation")) c.nav = nav_config_from_json(*v);
  if (auto v = n.find("perception")) c.perception = perception_config_from_json(*v);
  c.track_radius = n.positive_or("track_radius", c.track_radius);
  c.healthy_clearance = n.number_or("healthy_clearance", c.healthy_clearance);
  c.arm_speed_fraction = n.positive_or("arm_speed_fraction", c.arm_speed_fraction);
  if (c.arm_speed_fraction > 1.0) n.at("arm_speed_fraction").fail("must be <= 1");
  c.actuator_extension = n.number_or("actuator_extension", c.actuator_extension);
  return c;
}

// ---------------------------------------------------------------------------
// Mission loop

namespace {

Json arr(const Pose2& p) { return Json::array({p.x, p.y, p.theta}); }

class MissionRunner {
 public:
  MissionRunner(SimHost& host, const MissionConfig& cfg, TraceWriter& trace)
      : host_(host),
        client_(host),
        cfg_(cfg),
        trace_(trace),
        loc_(NoiseModel{cfg.noise}, cfg.seed * 0x9E3779B97F4A7C15ull + 1),
        ledger_(PlantLedger::from_world(host.world())) {
    const World& w = world();
    waypoints_ = {w.arena.intersection, w.arena.far_end, w.arena.end_pose};
    for (const auto& p : w.plants)
      for (const auto& part : p.parts) part_plant_[part.id] = p.id;
    loc_.reset(w.robot.chassis);
    obs_.pose = w.robot.chassis;

    plant_.dt = w.timestep;
    plant_.command = [this](const BodyTwist& t) { command_twist(t); };
    plant_.step = [this] { step(); };
    plant_.true_pose = [this] { return world().robot.chassis; };
    plant_.applied_twist = [this] { return world().robot.chassis_twist; };
    plant_.clock = [this] { return world().clock; };
  }

  MissionResult run() {
    write_header();
    const int max_decisions = 10000;
    int decisions = 0;
    std::string reason = "done";
    while (true) {
      MissionClock clock = cfg_.clock;
      clock.elapsed = world().clock;
      obs_.pose = loc_.estimate().pose;
      const Action a = next_action(phase_, ledger_, clock, waypoints_, obs_);
      if (a.phase != phase_ || decisions == 0) enter_phase(a.phase);
      trace_.write({{"type", "decision"},
                    {"t", world().clock},
                    {"action", to_string(a.kind)},
                    {"phase", to_string(a.phase)},
                    {"target", arr(a.target)},
                    {"plant", a.plant_id},
                    {"side", to_string(a.side)}});
      if (a.kind == ActionKind::Finish) {
        if (clock.elapsed >= clock.total_budget) reason = "total budget exhausted";
        break;
      }
      if (++decisions > max_decisions) {
        reason = "decision limit";
        break;
      }
      execute(a);
    }
    result_.final_phase = phase_;
    result_.completed = reason == "done";
    result_.end_reason = reason;
    result_.ledger = ledger_;
    write_end();
    trace_.flush();
    return result_;
  }

 private:
  const World& world() const { return host_.world(); }

  void enter_phase(MissionPhase p) {
    phase_ = p;
    result_.phase_log.emplace_back(p, world().clock);
    trace_.write({{"type", "phase"}, {"t", world().clock}, {"phase", to_string(p)}});
    spdlog::info("phase {} at {:.2f} s", to_string(p), world().clock);
  }

  void write_header() {
    const World& w = world();
    Json parts = Json::array();
    Json plants = Json::array();
    for (const auto& p : w.plants) {
      plants.push_back({{"id", p.id}, {"bed", p.bed == Bed::A ? "A" : "B"}});
      for (const auto& part : p.parts)
        parts.push_back({{"id", part.id}, {"plant", p.id}, {"kind", to_string(part.kind)}});
    }
    trace_.write({{"type", "header"},
                  {"format", "strawbot-trace/1"},
                  {"seed", cfg_.seed},
                  {"noise", cfg_.noise},
                  {"depth_noise_sigma", cfg_.noise ? cfg_.depth_noise_sigma : 0.0},
                  {"budgets",
                   {{"side_a_s", cfg_.clock.budget_side_a},
                    {"side_b_s", cfg_.clock.budget_side_b},
                    {"total_s", cfg_.clock.total_budget}}},
                  {"min_area", cfg_.perception.min_area},
                  {"plants", plants},
                  {"parts", parts},
                  {"start", arr(w.robot.chassis)}});
  }

  void write_end() {
    const GroundTruth gt = world().ground_truth();
    Json parts = Json::array();
    for (const auto& p : gt.parts)
      parts.push_back({{"id", p.id}, {"plant", p.plant_id}, {"kind", to_string(p.kind)}, {"trimmed", p.trimmed}});
    Json ledger = Json::array();
    for (const auto& p : ledger_.plants) {
      Json tracks = Json::array();
      for (const auto& t : p.parts)
        tracks.push_back({{"id", t.id},
                          {"kind", to_string(t.kind)},
                          {"half", to_string(t.half)},
                          {"targeted", t.targeted},
                          {"trimmed", t.trimmed},
                          {"deferred", t.deferred}});
      ledger.push_back({{"plant", p.id},
                        {"discovered", p.discovered},
                        {"near_visited", p.near_visited},
                        {"far_visited", p.far_visited},
                        {"flowers_remaining_near_side", p.flowers_remaining_near_side},
                        {"tracks", tracks}});
    }
    trace_.write({{"type", "end"},
                  {"t", world().clock},
                  {"reason", result_.end_reason},
                  {"completed", result_.completed},
                  {"phase", to_string(phase_)},
                  {"pose", arr(world().robot.chassis)},
                  {"parts", parts},
                  {"ledger", ledger},
                  {"anomalies", result_.anomalies}});
  }

  // -- stepping --------------------------------------------------------------

  void command_twist(const BodyTwist& t) {
    if (last_twist_ && last_twist_->vx == t.vx && last_twist_->vy == t.vy && last_twist_->omega == t.omega) return;
    client_.send(t);
    last_twist_ = t;
  }

  void step() {
    const StepEvents ev = host_.advance();
    const World& w = world();
    Json cmds = Json::array();
    const auto& applied = host_.applied();
    for (; applied_seen_ < applied.size(); ++applied_seen_) cmds.push_back(applied[applied_seen_].at("token"));
    Json rec{{"type", "step"},
             {"t", w.clock},
             {"phase", to_string(phase_)},
             {"pose", arr(w.robot.chassis)},
             {"est", arr(loc_.estimate().pose)},
             {"twist", Json::array({w.robot.chassis_twist.vx, w.robot.chassis_twist.vy, w.robot.chassis_twist.omega})},
             {"joints", Json::array({w.robot.joints[0], w.robot.joints[1], w.robot.joints[2], w.robot.joints[3],
                                     w.robot.joints[4]})},
             {"act", w.robot.actuator_extension},
             {"grip", w.robot.gripper == Gripper::Open ? "open" : "closed"},
             {"cmds", cmds}};
    Json events = Json::object();
    if (ev.twist_clamped) events["twist_clamped"] = true;
    if (ev.wall_contact) events["wall_contact"] = true;
    if (ev.arm_arrived) events["arm_arrived"] = true;
    if (ev.actuator_arrived) events["actuator_arrived"] = true;
    if (ev.trim) events["trim"] = {{"part", ev.trim->part_id}, {"distance", ev.trim->distance}};
    if (!events.empty()) rec["events"] = events;
    trace_.write(rec);
  }

  // Sends a command and steps until the host reports it done.
  Json run_command(const WireCommand& cmd, double timeout_s) {
    const Json accepted = client_.send(cmd);
    if (accepted.value("status", "") != "ok")
      throw std::runtime_error("bridge rejected command: " + accepted.dump());
    const std::string token = accepted.at("token");
    const double deadline = world().clock + timeout_s;
    while (true) {
      step();
      Json st = client_.command_status(token);
      if (st.value("state", "") == "done") return st;
      if (world().clock > deadline) throw std::runtime_error("command " + token + " timed out");
    }
  }

  void move_arm(const JointVector& target) {
    const ArmModel& m = world().robot_config.arm;
    const JointVector q = m.clamp(target);
    const JointVector& cur = world().robot.joints;
    double t = 0.0;
    for (int i = 0; i < kNumJoints; ++i)
      t = std::max(t, std::abs(q[i] - cur[i]) / (cfg_.arm_speed_fraction * m.joints[i].max_rate));
    const int ms = std::max(100, static_cast<int>(std::ceil(t * 100.0)) * 10);
    run_command(radians_to_servo(m, q, ms), ms / 1000.0 + 2.0);
  }

  Json set_gripper(Gripper g) { return run_command(GripperRequest{g}, 2.0); }

  // -- perception ------------------------------------------------------------

  RgbdFrame capture(Mount mount) {
    const World& w = world();
    RenderOptions opt;
    opt.depth_noise_sigma = cfg_.noise ? cfg_.depth_noise_sigma : 0.0;
    opt.noise_seed = fnv1a(std::to_string(cfg_.seed) + "/frame/" + std::to_string(frames_++));
    const MountState ms{mount, w.robot.actuator_extension};
    return render(w, camera_pose(w.robot_config, w.robot, ms), w.robot_config.intrinsics, opt);
  }

  // Marks every plant that owns at least min_area pixels in the frame.
  void discover(const RgbdFrame& f) {
    std::vector<int> counts(f.owner_ids.size(), 0);
    for (std::int32_t o : f.owner)
      if (o >= 0) ++counts[static_cast<std::size_t>(o)];
    std::map<std::string, int> per_plant;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const std::string& id = f.owner_ids[i];
      auto it = part_plant_.find(id);
      if (it != part_plant_.end()) per_plant[it->second] += counts[i];
      const auto slash = id.find("/stem");
      if (slash != std::string::npos) per_plant[id.substr(0, slash)] += counts[i];
    }
    for (auto& p : ledger_.plants) {
      if (p.discovered) continue;
      auto it = per_plant.find(p.id);
      if (it != per_plant.end() && it->second >= cfg_.perception.min_area) {
        p.discovered = true;
        trace_.write({{"type", "discovered"}, {"t", world().clock}, {"plant", p.id}});
      }
    }
  }

  void survey() {
    discover(capture(Mount::FrontFixed));
    discover(capture(Mount::RearActuator));
  }

  // -- actions ---------------------------------------------------------------

  void execute(const Action& a) {
    switch (a.kind) {
      case ActionKind::Navigate:
      case ActionKind::Turn180: {
        const std::string purpose = a.kind == ActionKind::Turn180 ? "turn_180" : a.plant_id.empty()
                                                                                     ? to_string(phase_)
                                                                                     : "approach";
        const NavResult r = navigate(a.target, purpose, a.plant_id, a.side);
        obs_.last_goal = a.target;
        const bool survey_point = same_pose(a.target, waypoints_.intersection) || same_pose(a.target, waypoints_.turned());
        if (survey_point) survey();
        if (!a.plant_id.empty() && r.status != NavStatus::Arrived) {
          mark_visited(a.plant_id, a.side, "skipped", r.reason);
          anomaly("navigation to " + a.plant_id + " " + to_string(a.side) + " side failed: " + r.reason);
        }
        break;
      }
      case ActionKind::RaiseActuator:
        run_command(ActuatorRequest{cfg_.actuator_extension}, 10.0);
        obs_.actuator_raised = true;
        break;
      case ActionKind::ProcessPlant:
        process_plant(*ledger_.find(a.plant_id), a.side);
        break;
      case ActionKind::Finish:
        break;
    }
  }

  NavResult navigate(const Pose2& goal, const std::string& purpose, const std::string& plant, PlantSide side) {
    const Pose2 from = loc_.estimate().pose;
    NavResult r = navigate_to(plant_, loc_, NavGoal{goal}, world().plants, cfg_.nav);
    Json rec{{"type", "nav"},
             {"t", world().clock},
             {"purpose", purpose},
             {"from", arr(from)},
             {"goal", arr(goal)},
             {"status", to_string(r.status)},
             {"reason", r.reason},
             {"distance", r.distance},
             {"elapsed", r.elapsed},
             {"steps", r.steps},
             {"turn", std::abs(normalize_angle(goal.theta - from.theta))},
             {"position_error", r.position_error},
             {"heading_error", r.heading_error},
             {"final_truth", arr(r.final_truth)},
             {"final_estimate", arr(r.final_estimate)}};
    if (!plant.empty()) {
      rec["plant"] = plant;
      rec["side"] = to_string(side);
    }
    trace_.write(rec);
    result_.navigations.push_back(r);
    return r;
  }

  void mark_visited(const std::string& plant_id, PlantSide side, const std::string& status,
                    const std::string& reason = "") {
    PlantRecord& p = *ledger_.find(plant_id);
    (side == PlantSide::Near ? p.near_visited : p.far_visited) = true;
    trace_.write({{"type", "visit"},
                  {"t", world().clock},
                  {"plant", plant_id},
                  {"side", to_string(side)},
                  {"status", status},
                  {"reason", reason}});
  }

  void anomaly(const std::string& what) {
    result_.anomalies.push_back(what);
    spdlog::warn("{}", what);
  }

  PartTrack& associate(PlantRecord& p, PartKind kind, const Vec3& world_point, PlantSide pass) {
    PartTrack* best = nullptr;
    double best_d = cfg_.track_radius;
    for (auto& t : p.parts) {
      if (t.kind != kind || t.trimmed) continue;
      const double d = (t.position - world_point).norm();
      if (d < best_d) best = &t, best_d = d;
    }
    if (!best) {
      PartTrack t;
      char buf[16];
      std::snprintf(buf, sizeof buf, "-t%02zu", p.parts.size() + 1);
      t.id = p.id + buf;
      t.kind = kind;
      t.position = world_point;
      const Vec3 rel = world_point - p.stem_base;
      const double toward_near = rel.x() * (p.near_pose.x - p.far_pose.x) + rel.y() * (p.near_pose.y - p.far_pose.y);
      t.half = toward_near >= 0 ? PlantSide::Near : PlantSide::Far;
      p.parts.push_back(t);
      best = &p.parts.back();
    }
    if (pass == PlantSide::Near) best->seen_from_near = true;
    return *best;
  }

  double stem_distance(const PlantRecord& p, const Vec3& w) const {
    return std::hypot(w.x() - p.stem_base.x(), w.y() - p.stem_base.y());
  }

  void process_plant(PlantRecord& plant, PlantSide side) {
    const World& w = world();
    const RobotConfig& rc = w.robot_config;
    if (w.robot.gripper != Gripper::Open) set_gripper(Gripper::Open);
    if ((w.robot.joints - rc.home).cwiseAbs().maxCoeff() > 1e-3) move_arm(rc.home);

    const RgbdFrame frame = capture(Mount::RearActuator);
    discover(frame);
    DetectionStats stats;
    const std::vector<Detection> dets = detect_parts(frame, cfg_.perception, &stats);
    const FrameAudit audit = audit_frame(frame, dets, w, cfg_.perception.min_area);

    // Robot-frame geometry only depends on the mounts; the estimate places
    // the tracks in the world.
    const Transform robot_T_cam =
        camera_pose(rc, RobotState{}, MountState{Mount::RearActuator, w.robot.actuator_extension});
    const Transform world_T_robot = Transform::from_pose2(loc_.estimate().pose);
    const Transform arm_T_robot = invert(rc.arm_base());

    // Tracks can be appended while associating, so hold indices, not pointers.
    std::vector<std::pair<std::size_t, Vec3>> observed;
    Json det_tracks = Json::array();
    for (const auto& d : dets) {
      const Vec3 pr = apply(robot_T_cam, d.centroid_camera);
      PartTrack& t = associate(plant, d.kind, apply(world_T_robot, pr), side);
      const std::size_t idx = static_cast<std::size_t>(&t - plant.parts.data());
      observed.emplace_back(idx, pr);
      det_tracks.push_back(t.id);
    }
    Json frame_rec{{"type", "frame"},
                   {"t", w.clock},
                   {"plant", plant.id},
                   {"side", to_string(side)},
                   {"contours", stats.contours},
                   {"rejected_nonplanar", stats.rejected_nonplanar},
                   {"rejected_no_depth", stats.rejected_no_depth},
                   {"audit", to_json(audit)},
                   {"tracks", det_tracks}};
    trace_.write(frame_rec);

    // Obstacles in the arm base frame.
    const Transform arm_T_world = compose(arm_T_robot, invert(world_T_robot));
    ObstacleSet obstacles;
    Box block = rc.compute_block;
    block.min -= rc.arm_base_offset;
    block.max -= rc.arm_base_offset;
    obstacles.cuboids.push_back(block);
    obstacles.cylinders.push_back(
        Cylinder{apply(arm_T_world, plant.stem_base), Vec3::UnitZ(), plant.stem_radius, plant.stem_height, "stem"});
    if (cfg_.healthy_clearance > 0) {
      for (const auto& [idx, pr] : observed) {
        if (plant.parts[idx].kind != PartKind::HealthyLeafCluster) continue;
        const Vec3 c = apply(arm_T_robot, pr);
        const Vec3 h = Vec3::Constant(cfg_.healthy_clearance);
        obstacles.cuboids.push_back(Box{c - h, c + h, plant.parts[idx].id});
      }
    }

    obstacles_ = std::move(obstacles);

    std::map<std::size_t, Vec3> target_points;
    for (const auto& [idx, pr] : observed) target_points.emplace(idx, apply(arm_T_robot, pr));

    // Unhealthy clusters: everything visible and not yet trimmed.
    std::vector<std::size_t> unhealthy;
    for (const auto& [idx, pt] : target_points)
      if (plant.parts[idx].kind == PartKind::UnhealthyLeafCluster && !plant.parts[idx].trimmed) unhealthy.push_back(idx);
    std::sort(unhealthy.begin(), unhealthy.end(),
              [&](std::size_t a, std::size_t b) { return plant.parts[a].id < plant.parts[b].id; });
    for (std::size_t idx : unhealthy) trim(plant, idx, target_points.at(idx));

    // Flowers under the skip policy.
    std::vector<FlowerCandidate> cands;
    std::map<std::string, std::size_t> by_id;
    for (const auto& [idx, pt] : target_points) {
      const PartTrack& t = plant.parts[idx];
      if (t.kind != PartKind::Flower || t.trimmed) continue;
      const bool eligible = side == PlantSide::Near ? t.half == PlantSide::Near
                                                    : (t.half == PlantSide::Far || t.deferred || !t.seen_from_near);
      if (!eligible) continue;
      cands.push_back({t.id, stem_distance(plant, t.position)});
      by_id[t.id] = idx;
    }
    int remaining = 0;
    if (side == PlantSide::Far) {
      remaining = plant.flowers_remaining_near_side;
      if (remaining > 1) anomaly(plant.id + ": " + std::to_string(remaining) + " flowers left on the near side, using 1");
    }
    const std::vector<std::string> plan = flower_trim_plan(side, cands, remaining);
    trace_.write({{"type", "flower_plan"},
                  {"t", world().clock},
                  {"plant", plant.id},
                  {"side", to_string(side)},
                  {"candidates", cands.size()},
                  {"near_remaining", remaining},
                  {"targets", plan}});
    for (const auto& id : plan) {
      const std::size_t idx = by_id.at(id);
      if (!trim(plant, idx, target_points.at(idx)) && side == PlantSide::Near) plant.parts[idx].deferred = true;
    }

    if (side == PlantSide::Near) {
      int left = 0;
      for (const auto& t : plant.parts)
        if (t.kind == PartKind::Flower && t.half == PlantSide::Near && t.seen_from_near && !t.trimmed && !t.deferred)
          ++left;
      plant.flowers_remaining_near_side = left;
    }

    if ((world().robot.joints - rc.home).cwiseAbs().maxCoeff() > 1e-3) move_arm(rc.home);
    mark_visited(plant.id, side, "processed");
  }

  // Plans and executes one trim maneuver. Returns true on a successful cut.
  bool trim(PlantRecord& plant, std::size_t idx, const Vec3& target) {
    PartTrack& t = plant.parts[idx];
    t.targeted = true;
    ++result_.trims_attempted;
    const World& w = world();
    const RobotConfig& rc = w.robot_config;

    const TrimPlanResult planned = plan_trim(rc.arm, target, obstacles_, w.robot.joints, cfg_.planning);
    Json rec{{"type", "trim"},
             {"t", w.clock},
             {"plant", plant.id},
             {"track", t.id},
             {"kind", to_string(t.kind)},
             {"target", to_json(target)}};
    if (!planned.ok()) {
      ++result_.plan_failures;
      rec["outcome"] = "plan_failed";
      rec["reasons"] = planned.failures;
      trace_.write(rec);
      anomaly("no trim plan for " + t.id);
      return false;
    }
    Json result;
    for (const auto& wp : planned.plan->waypoints) {
      move_arm(wp.q);
      if (wp.gripper == GripperAction::Close) result = set_gripper(Gripper::Closed).value("result", Json());
      if (wp.gripper == GripperAction::Open && world().robot.gripper != Gripper::Open) set_gripper(Gripper::Open);
    }
    set_gripper(Gripper::Open);
    move_arm(rc.home);

    const std::string outcome = result.is_object() ? result.value("trim", "miss") : "miss";
    rec["outcome"] = outcome;
    rec["part"] = result.is_object() ? result.value("part_id", "") : "";
    rec["distance"] = result.is_object() ? result.value("distance", 0.0) : 0.0;
    rec["side_approach"] = planned.plan->side_approach;
    trace_.write(rec);
    if (outcome == "success") {
      t.trimmed = true;
      ++result_.trims_succeeded;
      return true;
    }
    return false;
  }

  SimHost& host_;
  LoopbackClient client_;
  const MissionConfig& cfg_;
  TraceWriter& trace_;
  Localizer loc_;
  PlantLedger ledger_;
  Waypoints waypoints_;
  NavPlant plant_;
  Observations obs_;
  MissionPhase phase_ = MissionPhase::GoToIntersection;
  MissionResult result_;
  std::optional<BodyTwist> last_twist_;
  std::map<std::string, std::string> part_plant_;
  std::size_t applied_seen_ = 0;
  std::uint64_t frames_ = 0;
  ObstacleSet obstacles_;  // for the plant being processed, arm base frame
};

}  // namespace

MissionResult run_mission(SimHost& host, const MissionConfig& config, TraceWriter& trace) {
  init_logging();
  MissionRunner runner(host, config, trace);
  return runner.run();
}

}  // namespace strawbot
