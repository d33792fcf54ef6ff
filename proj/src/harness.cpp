#include "strawbot/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "strawbot/trace.hpp"

namespace strawbot {

void Thresholds::apply_override(const std::string& a) {
  const auto eq = a.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("threshold override '" + a + "' is not name=value");
  const std::string name = a.substr(0, eq);
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(a.substr(eq + 1), &used);
    if (used != a.size() - eq - 1) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw std::invalid_argument("threshold override '" + a + "' has a non-numeric value");
  }
  if (!std::isfinite(v) || v < 0) throw std::invalid_argument("threshold override '" + a + "' must be >= 0");
  const std::map<std::string, double*> fields{{"detection_accuracy", &detection_accuracy},
                                              {"harvest_success", &harvest_success},
                                              {"localization", &localization},
                                              {"arrival_tolerance", &arrival_tolerance},
                                              {"transit_speed", &transit_speed},
                                              {"straight_min_length", &straight_min_length}};
  auto it = fields.find(name);
  if (it == fields.end()) throw std::invalid_argument("unknown threshold '" + name + "'");
  *it->second = v;
}

Ratio Ratio::of(int num, int den) {
  Ratio r;
  r.num = num;
  r.den = den;
  r.vacuous = den == 0;
  r.value = den == 0 ? 1.0 : static_cast<double>(num) / den;
  return r;
}

namespace {

Json ratio_json(const Ratio& r) {
  return {{"num", r.num}, {"den", r.den}, {"value", r.value}, {"vacuous", r.vacuous}};
}

Json counts_json(const KindCounts& c) {
  return {{"total", c.total}, {"detected", c.detected}, {"trimmed", c.trimmed}};
}

}  // namespace

Json MissionReport::to_json() const {
  Json plants_j = Json::array();
  for (const auto& p : plants)
    plants_j.push_back({{"id", p.id},
                        {"bed", p.bed},
                        {"healthy", counts_json(p.healthy)},
                        {"unhealthy", counts_json(p.unhealthy)},
                        {"flower", counts_json(p.flower)},
                        {"near_processed", p.near_processed},
                        {"far_processed", p.far_processed},
                        {"flowers_left", p.flowers_left},
                        {"policy_flower_target", p.policy_flower_target}});
  Json arrivals_j = Json::array();
  for (const auto& a : arrivals)
    arrivals_j.push_back({{"purpose", a.purpose},
                          {"status", a.status},
                          {"distance", a.distance},
                          {"elapsed", a.elapsed},
                          {"position_error", a.position_error},
                          {"heading_error", a.heading_error}});
  Json phases_j = Json::array();
  for (const auto& [name, t] : phases) phases_j.push_back({{"phase", name}, {"t", t}});
  Json goals_j = Json::array();
  for (const auto& g : goals)
    goals_j.push_back({{"name", g.name},
                       {"value", g.value},
                       {"threshold", g.threshold},
                       {"vacuous", g.vacuous},
                       {"passed", g.passed}});
  return {{"complete", complete},
          {"end_reason", end_reason},
          {"sim_duration_s", sim_duration},
          {"seed", seed},
          {"noise", noise},
          {"detection_accuracy", ratio_json(detection)},
          {"harvest_success", ratio_json(harvest)},
          {"localization", ratio_json(localization)},
          {"transit_speed", {{"mean_mps", transit_speed}, {"segments", straight_segments}}},
          {"navigation_failures", navigation_failures},
          {"healthy_damage", healthy_damage},
          {"false_positives", false_positives},
          {"trims", {{"attempts", trim_attempts}, {"misses", trim_misses}, {"plan_failures", plan_failures}}},
          {"flowers_left_one", ratio_json(flowers_left_one)},
          {"plants", plants_j},
          {"arrivals", arrivals_j},
          {"phases", phases_j},
          {"goals", goals_j},
          {"thresholds_met", thresholds_met},
          {"passed", passed()}};
}

MissionReport score(const std::vector<Json>& records, const Thresholds& th, bool truncated) {
  MissionReport r;
  struct PartInfo {
    std::string plant;
    std::string kind;
  };
  std::map<std::string, PartInfo> parts;
  std::map<std::string, std::size_t> plant_index;
  std::set<std::string> detected, trimmed;
  int correct = 0, seen = 0;
  double speed_sum = 0.0;
  int loc_ok = 0, loc_n = 0;
  bool have_header = false, have_end = false;

  for (const auto& rec : records) {
    const std::string type = rec.value("type", "");
    if (rec.contains("t") && rec["t"].is_number()) r.sim_duration = std::max(r.sim_duration, rec["t"].get<double>());
    if (type == "header") {
      have_header = true;
      r.seed = rec.value("seed", std::uint64_t{0});
      r.noise = rec.value("noise", false);
      for (const auto& p : rec.value("plants", Json::array())) {
        PlantSummary s;
        s.id = p.value("id", "");
        s.bed = p.value("bed", "");
        plant_index[s.id] = r.plants.size();
        r.plants.push_back(s);
      }
      for (const auto& p : rec.value("parts", Json::array()))
        parts[p.value("id", "")] = {p.value("plant", ""), p.value("kind", "")};
    } else if (type == "phase") {
      r.phases.emplace_back(rec.value("phase", ""), rec.value("t", 0.0));
    } else if (type == "nav") {
      Arrival a{rec.value("purpose", ""), rec.value("status", ""),         rec.value("distance", 0.0),
                rec.value("elapsed", 0.0), rec.value("position_error", 0.0), rec.value("heading_error", 0.0)};
      if (a.status == "arrived") {
        ++loc_n;
        if (a.position_error <= th.arrival_tolerance) ++loc_ok;
        if (a.distance >= th.straight_min_length && a.elapsed > 0) {
          speed_sum += a.distance / a.elapsed;
          ++r.straight_segments;
        }
      } else {
        ++r.navigation_failures;
      }
      r.arrivals.push_back(a);
    } else if (type == "frame") {
      const Json& audit = rec.at("audit");
      correct += audit.value("correct", 0);
      seen += static_cast<int>(audit.value("seen", Json::array()).size());
      r.false_positives += audit.value("false_positives", 0);
      for (const auto& d : audit.value("detections", Json::array())) {
        const std::string owner = d.value("owner", "");
        if (parts.count(owner)) detected.insert(owner);
      }
    } else if (type == "trim") {
      ++r.trim_attempts;
      const std::string outcome = rec.value("outcome", "");
      if (outcome == "success")
        trimmed.insert(rec.value("part", ""));
      else if (outcome == "plan_failed")
        ++r.plan_failures;
      else
        ++r.trim_misses;
    } else if (type == "visit") {
      auto it = plant_index.find(rec.value("plant", ""));
      if (it != plant_index.end() && rec.value("status", "") == "processed")
        (rec.value("side", "") == "near" ? r.plants[it->second].near_processed : r.plants[it->second].far_processed) =
            true;
    } else if (type == "end") {
      have_end = true;
      r.complete = rec.value("completed", false);
      r.end_reason = rec.value("reason", "");
      for (const auto& p : rec.value("parts", Json::array()))
        if (p.value("trimmed", false)) trimmed.insert(p.value("id", ""));
    }
  }
  if (!have_end) {
    r.complete = false;
    r.end_reason = truncated ? "incomplete: trace truncated" : "incomplete: no end record";
  }
  if (!have_header) r.end_reason = "incomplete: no header record";

  int harvest_num = 0, harvest_den = 0, ones = 0, processed_with_flowers = 0;
  for (const auto& [id, info] : parts) {
    auto it = plant_index.find(info.plant);
    if (it == plant_index.end()) continue;
    PlantSummary& p = r.plants[it->second];
    KindCounts& c = info.kind == "healthy" ? p.healthy : info.kind == "unhealthy" ? p.unhealthy : p.flower;
    ++c.total;
    if (detected.count(id)) ++c.detected;
    if (trimmed.count(id)) ++c.trimmed;
  }
  for (auto& p : r.plants) {
    p.flowers_left = p.flower.total - p.flower.trimmed;
    p.policy_flower_target = std::max(p.flower.total - 1, 0);
    r.healthy_damage += p.healthy.trimmed;
    harvest_num += p.unhealthy.trimmed + std::min(p.flower.trimmed, p.policy_flower_target);
    harvest_den += p.unhealthy.total + p.policy_flower_target;
    if (p.fully_processed() && p.flower.total > 0) {
      ++processed_with_flowers;
      if (p.flowers_left == 1) ++ones;
    }
  }

  r.detection = Ratio::of(correct, seen);
  r.harvest = Ratio::of(harvest_num, harvest_den);
  r.localization = Ratio::of(loc_ok, loc_n);
  r.flowers_left_one = Ratio::of(ones, processed_with_flowers);
  r.transit_speed = r.straight_segments ? speed_sum / r.straight_segments : 0.0;

  auto goal = [&](const std::string& name, double value, double threshold, bool vacuous) {
    r.goals.push_back({name, value, threshold, vacuous, vacuous || value >= threshold});
  };
  goal("detection_accuracy", r.detection.value, th.detection_accuracy, r.detection.vacuous);
  goal("harvest_success", r.harvest.value, th.harvest_success, r.harvest.vacuous);
  goal("localization", r.localization.value, th.localization, r.localization.vacuous);
  goal("transit_speed", r.transit_speed, th.transit_speed, r.straight_segments == 0);
  r.thresholds_met = std::all_of(r.goals.begin(), r.goals.end(), [](const GoalResult& g) { return g.passed; });
  return r;
}

// ---------------------------------------------------------------------------
// Corpus

std::vector<Viewpoint> sample_viewpoints(const World& world, int count, std::uint64_t seed, bool at_distractors) {
  std::vector<Vec3> aims;
  if (at_distractors)
    for (const auto& d : world.distractors) aims.push_back(d.center);
  else
    for (const auto& p : world.plants) aims.push_back(p.stem.base + Vec3(0, 0, 0.28));
  if (aims.empty()) throw std::invalid_argument("nothing to aim the corpus cameras at");

  const Rect hall = world.arena.hallway();
  std::vector<Viewpoint> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(i));
    std::uniform_int_distribution<std::size_t> pick(0, aims.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vec3 aim = aims[pick(rng)];
    const double side = aim.y() < 0 ? -1.0 : 1.0;
    const double x = std::clamp(aim.x() + (u(rng) - 0.5) * 0.7, hall.x_min + 0.15, hall.x_max - 0.15);
    const double y = side * (0.05 + 0.23 * u(rng));
    const double heading = std::atan2(aim.y() - y, aim.x() - x) + (u(rng) - 0.5) * 0.4;
    Viewpoint v;
    v.chassis = Pose2(x, y, heading);
    v.mount = u(rng) < 0.7 ? Mount::RearActuator : Mount::FrontFixed;
    v.extension = v.mount == Mount::RearActuator ? u(rng) * world.robot_config.actuator_stroke : 0.0;
    out.push_back(v);
  }
  return out;
}

namespace {

const char* object_class(const World& w, const std::string& id) {
  if (const PlantPart* p = w.find_part(id)) return to_string(p->kind);
  for (const auto& d : w.distractors)
    if (d.id == id) return "distractor";
  return "stem";
}

}  // namespace

std::vector<CorpusFrame> generate_corpus(const World& world, const CorpusOptions& opt) {
  const std::vector<Viewpoint> views = sample_viewpoints(world, opt.frames, opt.seed, opt.aim_at_distractors);
  std::vector<CorpusFrame> out;
  out.reserve(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    const Viewpoint& v = views[i];
    RobotState state;
    state.chassis = v.chassis;
    RenderOptions ro;
    ro.depth_noise_sigma = opt.depth_noise_sigma;
    ro.noise_seed = fnv1a(std::to_string(opt.seed) + "/corpus/" + std::to_string(i));
    const Pose3 cam = camera_pose(world.robot_config, state, MountState{v.mount, v.extension});
    CorpusFrame cf;
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu", i);
    cf.name = name;
    cf.viewpoint = v;
    cf.frame = render(world, cam, world.robot_config.intrinsics, ro);

    const RgbdFrame& f = cf.frame;
    struct Box2 {
      int pixels = 0, u0 = 1 << 30, v0 = 1 << 30, u1 = -1, v1 = -1;
    };
    std::vector<Box2> boxes(f.owner_ids.size());
    for (int vv = 0; vv < f.height; ++vv)
      for (int uu = 0; uu < f.width; ++uu) {
        const std::int32_t o = f.owner[f.index(uu, vv)];
        if (o < 0) continue;
        Box2& b = boxes[static_cast<std::size_t>(o)];
        ++b.pixels;
        b.u0 = std::min(b.u0, uu), b.v0 = std::min(b.v0, vv);
        b.u1 = std::max(b.u1, uu), b.v1 = std::max(b.v1, vv);
      }
    Json objects = Json::array();
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      if (boxes[k].pixels == 0) continue;
      objects.push_back({{"id", f.owner_ids[k]},
                         {"class", object_class(world, f.owner_ids[k])},
                         {"pixels", boxes[k].pixels},
                         {"bbox", {boxes[k].u0, boxes[k].v0, boxes[k].u1, boxes[k].v1}},
                         {"labelled", boxes[k].pixels >= opt.min_area}});
    }
    const Vec3 t = cam.translation();
    const Quat q = cam.rotation();
    cf.label = {{"name", cf.name},
                {"viewpoint",
                 {{"chassis", to_json(v.chassis)},
                  {"mount", v.mount == Mount::RearActuator ? "rear" : "front"},
                  {"extension", v.extension}}},
                {"camera_pose", {{"t", to_json(t)}, {"q", {q.w(), q.x(), q.y(), q.z()}}}},
                {"depth_noise_sigma", opt.depth_noise_sigma},
                {"objects", objects}};
    out.push_back(std::move(cf));
  }
  return out;
}

CorpusScore evaluate_corpus(const std::vector<CorpusFrame>& corpus, const World& world, const PerceptionConfig& cfg) {
  CorpusScore s;
  std::set<std::string> distractor_ids;
  for (const auto& d : world.distractors) distractor_ids.insert(d.id);
  int correct = 0, seen = 0;
  for (const auto& cf : corpus) {
    const std::vector<Detection> dets = detect_parts(cf.frame, cfg);
    const FrameAudit audit = audit_frame(cf.frame, dets, world, cfg.min_area);
    correct += audit.correct;
    seen += static_cast<int>(audit.seen.size());
    s.false_positives += audit.false_positives;

    std::vector<int> counts(cf.frame.owner_ids.size(), 0);
    for (std::int32_t o : cf.frame.owner)
      if (o >= 0) ++counts[static_cast<std::size_t>(o)];
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const std::string& id = cf.frame.owner_ids[k];
      if (!distractor_ids.count(id) || counts[k] < cfg.min_area) continue;
      ++s.distractors_seen;
      if (std::any_of(audit.detections.begin(), audit.detections.end(),
                      [&](const DetectionAudit& d) { return d.owner == id; }))
        ++s.distractors_accepted;
    }
  }
  s.accuracy = Ratio::of(correct, seen);
  return s;
}

void add_distractors(World& world, int count, std::uint64_t seed, double rmin, double rmax) {
  static const Rgb palette[] = {{40, 160, 50}, {220, 200, 40}, {245, 245, 240}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Rect hall = world.arena.hallway();
  const std::size_t first = world.distractors.size();
  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 5000 && !placed; ++attempt) {
      Distractor d;
      d.radius = rmin + (rmax - rmin) * u(rng);
      const double side = u(rng) < 0.5 ? -1.0 : 1.0;
      d.center = {hall.x_min + 0.05 + (hall.x_max - hall.x_min - 0.1) * u(rng), side * (0.5 + 0.3 * u(rng)),
                  d.radius + (0.4 - d.radius) * u(rng)};
      bool clear = true;
      for (const auto& p : world.plants)
        clear = clear && std::hypot(d.center.x() - p.stem.base.x(), d.center.y() - p.stem.base.y()) >
                             p.footprint_radius + d.radius;
      for (const auto& o : world.distractors) clear = clear && (o.center - d.center).norm() > o.radius + d.radius + 0.03;
      if (!clear) continue;
      d.id = "D" + std::to_string(world.distractors.size() - first + 1);
      d.color = palette[i % 3];
      world.distractors.push_back(d);
      placed = true;
    }
    if (!placed) throw std::runtime_error("could not place distractor " + std::to_string(i + 1));
  }
}

}  // namespace strawbot
