#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "strawbot/json_util.hpp"
#include "strawbot/perception.hpp"
#include "strawbot/sensor.hpp"
#include "strawbot/world.hpp"

namespace strawbot {

/// Pass thresholds for the four mission goals.
struct Thresholds {
  double detection_accuracy = 0.95;
  double harvest_success = 0.90;
  double localization = 1.0;         // fraction of arrivals within arrival_tolerance
  double arrival_tolerance = 0.02;   // m, ground-truth position error
  double transit_speed = 0.10;       // m/s, mean over straight segments
  double straight_min_length = 0.5;  // m

  /// Applies "name=value" overrides. Throws std::invalid_argument naming the
  /// bad entry.
  void apply_override(const std::string& assignment);
};

/// num / den, or 1.0 with `vacuous` set when den is 0.
struct Ratio {
  int num = 0;
  int den = 0;
  double value = 1.0;
  bool vacuous = true;

  static Ratio of(int num, int den);
};

struct KindCounts {
  int total = 0;
  int detected = 0;
  int trimmed = 0;
};

struct PlantSummary {
  std::string id;
  std::string bed;
  KindCounts healthy, unhealthy, flower;
  bool near_processed = false;
  bool far_processed = false;
  int flowers_left = 0;
  int policy_flower_target = 0;  // max(flowers - 1, 0)

  bool fully_processed() const { return near_processed && far_processed; }
};

struct Arrival {
  std::string purpose;
  std::string status;
  double distance = 0.0;
  double elapsed = 0.0;
  double position_error = 0.0;
  double heading_error = 0.0;
};

struct GoalResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool vacuous = false;
  bool passed = false;
};

struct MissionReport {
  bool complete = false;
  std::string end_reason;
  double sim_duration = 0.0;
  std::uint64_t seed = 0;
  bool noise = false;

  Ratio detection;      // correct classifications / labelled parts seen
  Ratio harvest;        // (unhealthy + policy flowers) trimmed / targets
  Ratio localization;   // arrivals within tolerance / arrivals
  double transit_speed = 0.0;  // mean m/s over straight segments
  int straight_segments = 0;
  int navigation_failures = 0;
  int healthy_damage = 0;
  int false_positives = 0;
  int trim_attempts = 0;
  int trim_misses = 0;
  int plan_failures = 0;
  Ratio flowers_left_one;  // fully processed plants (with flowers) left with exactly one

  std::vector<PlantSummary> plants;
  std::vector<Arrival> arrivals;
  std::vector<std::pair<std::string, double>> phases;
  std::vector<GoalResult> goals;
  bool thresholds_met = false;

  bool passed() const { return complete && thresholds_met; }
  Json to_json() const;
};

/// Pure function of the trace records (header and event lines; step lines
/// are ignored). `truncated` marks a trace whose last line was cut off.
MissionReport score(const std::vector<Json>& records, const Thresholds& thresholds = {}, bool truncated = false);

// ---------------------------------------------------------------------------
// Labelled frames

struct Viewpoint {
  Pose2 chassis;
  Mount mount = Mount::RearActuator;
  double extension = 0.0;
};

/// Random hallway viewpoints aimed at a random plant (or distractor when
/// `aim_at_distractors`), with jitter on heading, distance and camera.
std::vector<Viewpoint> sample_viewpoints(const World& world, int count, std::uint64_t seed,
                                         bool aim_at_distractors = false);

struct CorpusFrame {
  std::string name;
  Viewpoint viewpoint;
  RgbdFrame frame;
  Json label;  // visible parts and distractors with pixel counts and boxes
};

struct CorpusOptions {
  int frames = 200;
  std::uint64_t seed = 1;
  double depth_noise_sigma = 0.002;
  int min_area = 50;
  bool aim_at_distractors = false;
};

/// Renders `options.frames` labelled frames; frame i depends only on
/// (world, seed, i).
std::vector<CorpusFrame> generate_corpus(const World& world, const CorpusOptions& options);

struct CorpusScore {
  Ratio accuracy;
  int false_positives = 0;
  int distractors_seen = 0;      // distractor appearances of at least min_area pixels
  int distractors_accepted = 0;  // of those, ones some detection was owned by
};

CorpusScore evaluate_corpus(const std::vector<CorpusFrame>& corpus, const World& world,
                            const PerceptionConfig& config);

/// Adds `count` colour-matched spheres on the plant beds, clear of every
/// plant footprint and of each other.
void add_distractors(World& world, int count, std::uint64_t seed, double min_radius = 0.035,
                     double max_radius = 0.05);

}  // namespace strawbot
