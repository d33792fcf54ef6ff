#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "strawbot/behavior.hpp"
#include "strawbot/bridge.hpp"
#include "strawbot/harness.hpp"
#include "strawbot/trace.hpp"

using namespace strawbot;

namespace {

const std::string kRoot = STRAWBOT_SOURCE_DIR;

// Minimal hand-written trace pieces, shaped like the mission writer's output.
Json header(const Json& plants, const Json& parts) {
  return {{"type", "header"}, {"format", "strawbot-trace/1"}, {"seed", 4}, {"noise", true},
          {"plants", plants}, {"parts", parts}};
}

Json end_record(bool completed, const Json& parts = Json::array()) {
  return {{"type", "end"}, {"t", 100.0}, {"reason", completed ? "finished" : "budget"}, {"completed", completed},
          {"parts", parts}};
}

Json nav(double distance, double elapsed, double error, const std::string& status = "arrived") {
  return {{"type", "nav"},       {"purpose", "test"},   {"status", status},        {"distance", distance},
          {"elapsed", elapsed},  {"position_error", error}, {"heading_error", 0.0}};
}

Json frame_audit(int seen, int correct, int false_positives = 0) {
  Json s = Json::array();
  for (int i = 0; i < seen; ++i) s.push_back({{"id", "X" + std::to_string(i)}, {"kind", "flower"}, {"pixels", 100}});
  return {{"type", "frame"},
          {"audit", {{"seen", s}, {"detections", Json::array()}, {"correct", correct},
                     {"false_positives", false_positives}}}};
}

Json trim(const std::string& part, const std::string& outcome) {
  return {{"type", "trim"}, {"part", part}, {"outcome", outcome}};
}

Json visit(const std::string& plant, const std::string& side) {
  return {{"type", "visit"}, {"plant", plant}, {"side", side}, {"status", "processed"}};
}

// One plant: one healthy, one unhealthy, three flowers.
std::vector<Json> one_plant(const std::vector<Json>& middle, bool completed = true) {
  const Json plants = Json::array({{{"id", "A1"}, {"bed", "A"}}});
  Json parts = Json::array();
  for (const auto& [id, kind] : std::vector<std::pair<std::string, std::string>>{
           {"A1-h", "healthy"}, {"A1-u", "unhealthy"}, {"A1-f1", "flower"}, {"A1-f2", "flower"}, {"A1-f3", "flower"}})
    parts.push_back({{"id", id}, {"plant", "A1"}, {"kind", kind}});
  std::vector<Json> out{header(plants, parts)};
  out.insert(out.end(), middle.begin(), middle.end());
  out.push_back(end_record(completed));
  return out;
}

const GoalResult& goal(const MissionReport& r, const std::string& name) {
  for (const auto& g : r.goals)
    if (g.name == name) return g;
  throw std::out_of_range(name);
}

}  // namespace

TEST_CASE("Ratio::of") {
  const Ratio a = Ratio::of(19, 20);
  CHECK(a.value == doctest::Approx(0.95));
  CHECK(!a.vacuous);
  const Ratio z = Ratio::of(0, 0);
  CHECK(z.value == 1.0);
  CHECK(z.vacuous);
}

TEST_CASE("threshold overrides") {
  Thresholds t;
  t.apply_override("harvest_success=0.8");
  t.apply_override("arrival_tolerance=0.025");
  CHECK(t.harvest_success == 0.8);
  CHECK(t.arrival_tolerance == 0.025);
  CHECK_THROWS_WITH_AS(t.apply_override("bogus=1"), "unknown threshold 'bogus'", std::invalid_argument);
  CHECK_THROWS_AS(t.apply_override("harvest_success"), std::invalid_argument);
  CHECK_THROWS_AS(t.apply_override("=0.5"), std::invalid_argument);
  CHECK_THROWS_AS(t.apply_override("harvest_success=abc"), std::invalid_argument);
  CHECK_THROWS_AS(t.apply_override("harvest_success=0.5x"), std::invalid_argument);
  CHECK_THROWS_AS(t.apply_override("harvest_success=-1"), std::invalid_argument);
  CHECK(t.harvest_success == 0.8);
}

TEST_CASE("score: a plant-free run passes vacuously") {
  const std::vector<Json> recs{header(Json::array(), Json::array()), nav(2.0, 15.0, 0.004), end_record(true)};
  const MissionReport r = score(recs);
  CHECK(r.complete);
  CHECK(r.detection.vacuous);
  CHECK(r.harvest.vacuous);
  CHECK(r.flowers_left_one.vacuous);
  CHECK(!r.localization.vacuous);
  CHECK(r.transit_speed == doctest::Approx(2.0 / 15.0));
  CHECK(r.thresholds_met);
  CHECK(r.passed());
}

TEST_CASE("score: detection accuracy at the 0.95 boundary") {
  auto with = [](int correct) {
    return score(one_plant({frame_audit(12, 12), frame_audit(8, correct - 12)}));
  };
  const MissionReport ok = with(19);
  CHECK(ok.detection.num == 19);
  CHECK(ok.detection.den == 20);
  CHECK(goal(ok, "detection_accuracy").passed);
  const MissionReport bad = with(18);
  CHECK(bad.detection.value == doctest::Approx(0.9));
  CHECK(!goal(bad, "detection_accuracy").passed);
  CHECK(!bad.passed());
}

TEST_CASE("score: harvest counts unhealthy plus all but one flower") {
  // Targets: 1 unhealthy + (3 - 1) flowers = 3.
  const MissionReport policy = score(one_plant(
      {visit("A1", "near"), trim("A1-u", "success"), trim("A1-f1", "success"), visit("A1", "far"),
       trim("A1-f2", "success")}));
  CHECK(policy.harvest.num == 3);
  CHECK(policy.harvest.den == 3);
  CHECK(policy.flowers_left_one.value == 1.0);
  CHECK(policy.plants[0].flowers_left == 1);
  CHECK(policy.healthy_damage == 0);

  // Cutting every flower does not earn extra credit and breaks the one-left rule.
  const MissionReport greedy = score(one_plant({visit("A1", "near"), visit("A1", "far"), trim("A1-u", "success"),
                                                trim("A1-f1", "success"), trim("A1-f2", "success"),
                                                trim("A1-f3", "success"), trim("A1-h", "success")}));
  CHECK(greedy.harvest.num == 3);
  CHECK(greedy.flowers_left_one.num == 0);
  CHECK(greedy.flowers_left_one.den == 1);
  CHECK(greedy.healthy_damage == 1);

  // 2 of 3 is below 0.9; misses and plan failures are tallied.
  const MissionReport partial = score(one_plant({trim("A1-u", "success"), trim("A1-f1", "miss"),
                                                 trim("A1-f2", "plan_failed"), trim("A1-f3", "success")}));
  CHECK(partial.harvest.value == doctest::Approx(2.0 / 3.0));
  CHECK(!goal(partial, "harvest_success").passed);
  CHECK(partial.trim_attempts == 4);
  CHECK(partial.trim_misses == 1);
  CHECK(partial.plan_failures == 1);
  // Not visited from both sides: the one-left rule does not apply yet.
  CHECK(partial.flowers_left_one.vacuous);
}

TEST_CASE("score: localization and transit speed") {
  const std::vector<Json> navs{nav(1.0, 8.0, 0.019), nav(0.3, 5.0, 0.021), nav(0.8, 12.0, 0.0),
                               nav(0.6, 9.0, 0.5, "failed")};
  const MissionReport r = score(one_plant(navs));
  CHECK(r.localization.num == 2);
  CHECK(r.localization.den == 3);
  CHECK(r.navigation_failures == 1);
  CHECK(r.straight_segments == 2);
  CHECK(r.transit_speed == doctest::Approx((1.0 / 8.0 + 0.8 / 12.0) / 2.0));
  CHECK(!goal(r, "localization").passed);
  CHECK(!goal(r, "transit_speed").passed);

  Thresholds loose;
  loose.apply_override("arrival_tolerance=0.025");
  loose.apply_override("transit_speed=0.09");
  const MissionReport l = score(one_plant(navs), loose);
  CHECK(l.localization.value == 1.0);
  CHECK(goal(l, "transit_speed").passed);
}

TEST_CASE("score: missing end record means incomplete") {
  std::vector<Json> recs = one_plant({});
  recs.pop_back();
  const MissionReport r = score(recs, {}, true);
  CHECK(!r.complete);
  CHECK(r.end_reason == "incomplete: trace truncated");
  CHECK(!r.passed());
  CHECK(score(recs).end_reason == "incomplete: no end record");
  const MissionReport stopped = score(one_plant({}, false));
  CHECK(!stopped.complete);
  CHECK(!stopped.passed());
}

TEST_CASE("score is a pure function of the records") {
  const auto recs = one_plant({frame_audit(3, 3), nav(1.0, 7.0, 0.01), trim("A1-u", "success")});
  CHECK(score(recs).to_json().dump() == score(recs).to_json().dump());
}

TEST_CASE("read_trace: steps skipped, truncation tolerated only at the end") {
  std::ostringstream os;
  TraceWriter w(&os);
  w.write(header(Json::array(), Json::array()));
  w.write({{"type", "step"}, {"t", 0.02}});
  w.write(end_record(true));
  const std::string text = os.str();

  std::istringstream in(text);
  const TraceFile f = read_trace(in);
  CHECK(f.records.size() == 2);
  CHECK(!f.truncated);
  CHECK(f.hash == w.hash());
  std::istringstream all(text);
  CHECK(read_trace(all, false).records.size() == 3);

  std::istringstream cut(text.substr(0, text.size() - 10));
  const TraceFile c = read_trace(cut);
  CHECK(c.truncated);
  CHECK(c.records.size() == 1);
  CHECK(!score(c.records, {}, c.truncated).complete);

  std::istringstream bad("{\"type\":\"header\"}\nnot json\n{\"type\":\"end\"}\n");
  CHECK_THROWS_AS(read_trace(bad), std::runtime_error);
}

TEST_CASE("score of a real noise-free mission on the minimal scenario") {
  SimHost host(load_scenario_file(kRoot + "/scenarios/minimal.json"));
  MissionConfig cfg;
  cfg.noise = false;
  TraceWriter trace;
  run_mission(host, cfg, trace);
  const MissionReport r = score(trace.events());
  CHECK(r.complete);
  CHECK(r.harvest.value == 1.0);
  CHECK(r.healthy_damage == 0);
  CHECK(r.false_positives == 0);
  CHECK(r.flowers_left_one.value == 1.0);
  CHECK(r.detection.value >= 0.95);
  CHECK(r.localization.value == 1.0);
  CHECK(r.passed());
}

TEST_CASE("corpus: frame i depends only on (world, seed, i)") {
  const World w = load_scenario_file(kRoot + "/scenarios/default.json");
  CorpusOptions three;
  three.frames = 3;
  three.seed = 9;
  CorpusOptions two = three;
  two.frames = 2;
  const auto a = generate_corpus(w, three), b = generate_corpus(w, two), c = generate_corpus(w, three);
  REQUIRE(a.size() == 3);
  REQUIRE(b.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].frame.rgb == b[i].frame.rgb);
    CHECK(a[i].frame.depth == b[i].frame.depth);
    CHECK(a[i].label.dump() == b[i].label.dump());
  }
  CHECK(a[2].frame.depth == c[2].frame.depth);
  CHECK(a[0].name == "frame_0000");
  CorpusOptions other = three;
  other.seed = 10;
  CHECK(generate_corpus(w, other)[0].frame.depth != a[0].frame.depth);

  // Labels agree with the renderer's ownership counts.
  for (const auto& cf : a)
    for (const auto& o : cf.label.at("objects")) {
      int n = 0;
      const auto& ids = cf.frame.owner_ids;
      const auto k = std::find(ids.begin(), ids.end(), o.at("id").get<std::string>()) - ids.begin();
      for (auto owner : cf.frame.owner) n += owner == k;
      CHECK(o.at("pixels").get<int>() == n);
      CHECK(o.at("labelled").get<bool>() == (n >= three.min_area));
    }
}

TEST_CASE("corpus: evaluation on a small clean corpus") {
  const World w = load_scenario_file(kRoot + "/scenarios/default.json");
  CorpusOptions o;
  o.frames = 12;
  o.depth_noise_sigma = 0.0;
  const CorpusScore s = evaluate_corpus(generate_corpus(w, o), w, PerceptionConfig{});
  CHECK(s.accuracy.den > 0);
  CHECK(s.accuracy.value >= 0.95);
  CHECK(s.false_positives == 0);
  CHECK(s.distractors_seen == 0);
}

TEST_CASE("add_distractors: count, ids, placement, determinism") {
  const World base = load_scenario_file(kRoot + "/scenarios/default.json");
  World a = base, b = base;
  add_distractors(a, 24, 5);
  add_distractors(b, 24, 5);
  REQUIRE(a.distractors.size() == base.distractors.size() + 24);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.distractors.size(); ++i) {
    const Distractor& d = a.distractors[i];
    ids.insert(d.id);
    CHECK(d.center == b.distractors[i].center);
    CHECK(d.radius >= 0.035);
    CHECK(d.radius <= 0.05);
    CHECK(std::abs(d.center.y()) >= 0.5);
    CHECK(d.center.z() >= d.radius);
    for (const auto& p : a.plants)
      CHECK(std::hypot(d.center.x() - p.stem.base.x(), d.center.y() - p.stem.base.y()) >
            p.footprint_radius + d.radius);
    for (std::size_t j = 0; j < i; ++j)
      CHECK((a.distractors[j].center - d.center).norm() > a.distractors[j].radius + d.radius);
  }
  CHECK(ids.size() == a.distractors.size());
  CHECK(ids.count("D1"));
  CHECK(ids.count("D24"));
  World none = base;
  none.plants.clear();
  CHECK_THROWS_AS(sample_viewpoints(none, 1, 1), std::invalid_argument);
}
