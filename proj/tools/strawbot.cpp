// strawbot: run missions, score traces, render frames, build perception
// corpora and serve the bridge over HTTP.
//
// Exit codes: 0 success (for run/score: completed and every threshold met),
// 1 scenario or input error, 2 bad arguments, 3 run finished but incomplete
// or below a threshold.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "strawbot/behavior.hpp"
#include "strawbot/bridge.hpp"
#include "strawbot/harness.hpp"
#include "strawbot/logging.hpp"
#include "strawbot/perception.hpp"
#include "strawbot/sensor.hpp"
#include "strawbot/trace.hpp"
#include "strawbot/world.hpp"

namespace fs = std::filesystem;
using namespace strawbot;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kUsage = 2;
constexpr int kBelowThreshold = 3;

// Raised for problems with files or values the parser could not catch.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const Json& j) { open_out(path) << j.dump(2) << '\n'; }

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

Thresholds thresholds_from(const std::vector<std::string>& overrides) {
  Thresholds t;
  for (const auto& o : overrides) {
    try {
      t.apply_override(o);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return t;
}

void print_goals(const MissionReport& r) {
  for (const auto& g : r.goals)
    std::cout << (g.passed ? "PASS " : "FAIL ") << g.name << " " << g.value << " (threshold " << g.threshold
              << (g.vacuous ? ", vacuous" : "") << ")\n";
  std::cout << (r.complete ? "complete (" + r.end_reason + ")" : r.end_reason) << "\n";
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string scenario;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string noise = "on";
  std::string out = "out";
  std::vector<std::string> thresholds;
};

int cmd_run(const RunArgs& a) {
  const Thresholds th = thresholds_from(a.thresholds);
  MissionConfig cfg;
  if (!a.config.empty()) cfg = MissionConfig::from_json(JsonNode(read_scenario_file(a.config), a.config));
  if (a.seed) cfg.seed = *a.seed;
  cfg.noise = a.noise == "on";
  SimHost host(load_scenario_file(a.scenario));

  const fs::path out(a.out);
  make_dir(out);
  std::ofstream trace_file = open_out(out / "trace.jsonl", true);
  TraceWriter trace(&trace_file);
  const auto wall0 = std::chrono::steady_clock::now();
  std::string failure;
  try {
    run_mission(host, cfg, trace);
  } catch (const std::exception& e) {
    // Keep whatever was traced; the report below flags it incomplete.
    failure = e.what();
    spdlog::error("mission aborted: {}", failure);
  }
  trace.flush();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();

  MissionReport report = score(trace.events(), th);
  if (!failure.empty()) {
    report.complete = false;
    report.end_reason = "aborted: " + failure;
  }
  Json rj = report.to_json();
  rj["wall_duration_s"] = wall;
  rj["trace"] = {{"path", (out / "trace.jsonl").string()}, {"hash", trace.hash_hex()}, {"lines", trace.lines()}};
  write_json(out / "report.json", rj);
  print_goals(report);
  std::cout << "trace " << trace.hash_hex() << " (" << trace.lines() << " lines)\n";
  return report.passed() ? kOk : kBelowThreshold;
}

// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string trace;
  std::string out;
  std::vector<std::string> thresholds;
};

int cmd_score(const ScoreArgs& a) {
  const Thresholds th = thresholds_from(a.thresholds);
  std::ifstream in(a.trace, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + a.trace);
  const TraceFile tf = read_trace(in);
  const MissionReport report = score(tf.records, th, tf.truncated);
  const Json rj = report.to_json();
  if (a.out.empty())
    std::cout << rj.dump(2) << '\n';
  else
    write_json(a.out, rj);
  if (!a.out.empty()) print_goals(report);
  return report.passed() ? kOk : kBelowThreshold;
}

// ---------------------------------------------------------------------------

struct RenderArgs {
  std::string scenario;
  std::vector<double> pose;
  std::string mount = "rear";
  double extension = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 1;
  std::string out = "out";
  bool masks = false;
};

int cmd_render(const RenderArgs& a) {
  const World w = load_scenario_file(a.scenario);
  RobotState state = w.robot;
  if (!a.pose.empty()) state.chassis = Pose2(a.pose[0], a.pose[1], a.pose[2]);
  const MountState mount{a.mount == "rear" ? Mount::RearActuator : Mount::FrontFixed,
                         a.mount == "rear" ? a.extension : 0.0};
  if (mount.actuator_extension < 0 || mount.actuator_extension > w.robot_config.actuator_stroke)
    throw UsageError("--extension must lie in [0, " + std::to_string(w.robot_config.actuator_stroke) + "]");
  RenderOptions ro;
  ro.depth_noise_sigma = a.sigma;
  ro.noise_seed = a.seed;
  const RgbdFrame f = render(w, camera_pose(w.robot_config, state, mount), w.robot_config.intrinsics, ro);

  const fs::path out(a.out);
  make_dir(out);
  {
    auto s = open_out(out / "frame.ppm", true);
    write_ppm(s, f);
  }
  {
    auto s = open_out(out / "depth.pgm", true);
    write_depth_pgm(s, f);
  }
  PerceptionConfig pc;
  DetectionStats stats;
  const auto dets = detect_parts(f, pc, &stats);
  Json dj = Json::array();
  for (const auto& d : dets) dj.push_back(to_json(d));
  write_json(out / "detections.json",
             {{"pose", to_json(state.chassis)},
              {"mount", a.mount},
              {"extension", mount.actuator_extension},
              {"stats",
               {{"contours", stats.contours},
                {"rejected_nonplanar", stats.rejected_nonplanar},
                {"rejected_curved", stats.rejected_curved},
                {"rejected_no_depth", stats.rejected_no_depth}}},
              {"audit", to_json(audit_frame(f, dets, w, pc.min_area))},
              {"detections", dj}});
  if (a.masks)
    for (const auto& band : pc.bands) {
      auto s = open_out(out / (std::string("mask_") + to_string(band.kind) + ".pgm"), true);
      write_mask_pgm(s, threshold(f, band));
    }
  std::cout << dets.size() << " detections, written to " << out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct CorpusArgs {
  std::string scenario;
  int n = 200;
  std::uint64_t seed = 1;
  double sigma = 0.002;
  int distractors = 0;
  std::uint64_t distractor_seed = 5;
  bool aim_at_distractors = false;
  bool evaluate = false;
  std::string out = "corpus";
};

int cmd_gen_corpus(const CorpusArgs& a) {
  World w = load_scenario_file(a.scenario);
  if (a.distractors > 0) add_distractors(w, a.distractors, a.distractor_seed);
  if (a.aim_at_distractors && w.distractors.empty()) throw UsageError("--aim-distractors needs distractors");
  CorpusOptions o;
  o.frames = a.n;
  o.seed = a.seed;
  o.depth_noise_sigma = a.sigma;
  o.aim_at_distractors = a.aim_at_distractors;
  const auto corpus = generate_corpus(w, o);

  const fs::path out(a.out);
  make_dir(out);
  Json index = Json::array();
  for (const auto& cf : corpus) {
    {
      auto s = open_out(out / (cf.name + ".ppm"), true);
      write_ppm(s, cf.frame);
    }
    {
      auto s = open_out(out / (cf.name + "_depth.pgm"), true);
      write_depth_pgm(s, cf.frame);
    }
    write_json(out / (cf.name + ".json"), cf.label);
    index.push_back(cf.name);
  }
  Json distractors = Json::array();
  for (const auto& d : w.distractors)
    distractors.push_back({{"id", d.id}, {"center", to_json(d.center)}, {"radius", d.radius}, {"color", to_json(d.color)}});
  Json idx{{"scenario", a.scenario}, {"frames", index}, {"seed", a.seed}, {"depth_noise_sigma", a.sigma},
           {"min_area", o.min_area}, {"aim_at_distractors", a.aim_at_distractors}, {"distractors", distractors}};
  if (a.evaluate) {
    const CorpusScore s = evaluate_corpus(corpus, w, PerceptionConfig{});
    idx["evaluation"] = {{"accuracy", {{"num", s.accuracy.num}, {"den", s.accuracy.den}, {"value", s.accuracy.value}}},
                         {"false_positives", s.false_positives},
                         {"distractors_seen", s.distractors_seen},
                         {"distractors_accepted", s.distractors_accepted}};
    std::cout << "accuracy " << s.accuracy.num << "/" << s.accuracy.den << ", false positives " << s.false_positives
              << ", distractors accepted " << s.distractors_accepted << "/" << s.distractors_seen << "\n";
  }
  write_json(out / "index.json", idx);
  std::cout << corpus.size() << " frames written to " << out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct ServeArgs {
  std::string scenario;
  std::string address = "127.0.0.1";
  int port = 8080;
  double rate = 1.0;
  std::size_t queue = 64;
};

int cmd_serve(const ServeArgs& a) {
  SimHost host(load_scenario_file(a.scenario), a.queue);
  HttpServer server(host);
  const int port = server.start(a.address, a.port);
  if (port <= 0) throw std::runtime_error("cannot listen on " + a.address + ":" + std::to_string(a.port));
  std::cout << "listening on http://" << a.address << ":" << port << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  // Sim steps follow the wall clock, scaled by --rate.
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(host.world().timestep / a.rate));
  auto next = std::chrono::steady_clock::now();
  while (!g_stop) {
    host.advance();
    next += period;
    std::this_thread::sleep_until(next);
  }
  server.stop();
  spdlog::info("stopped at sim time {:.2f} s", host.world().clock);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Strawberry plant-care robot simulator"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a full mission, write trace.jsonl and report.json");
  run_cmd->add_option("--scenario", run.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--config", run.config, "Mission config JSON")->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run.seed, "Mission seed (default 7)");
  run_cmd->add_option("--noise", run.noise, "Sensor and odometry noise")->check(CLI::IsMember({"on", "off"}));
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--threshold", run.thresholds, "Threshold override name=value (repeatable)");

  ScoreArgs sc;
  auto* score_cmd = app.add_subcommand("score", "Re-score a trace");
  score_cmd->add_option("trace", sc.trace, "trace.jsonl")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--out", sc.out, "Write the report here instead of stdout");
  score_cmd->add_option("--threshold", sc.thresholds, "Threshold override name=value (repeatable)");

  RenderArgs rd;
  auto* render_cmd = app.add_subcommand("render", "Render one frame to PPM/PGM and run detection on it");
  render_cmd->add_option("--scenario", rd.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--pose", rd.pose, "Chassis pose x y theta (default: scenario start)")->expected(3);
  render_cmd->add_option("--mount", rd.mount, "Camera")->check(CLI::IsMember({"rear", "front"}));
  render_cmd->add_option("--extension", rd.extension, "Actuator extension, m (rear camera)");
  render_cmd->add_option("--sigma", rd.sigma, "Depth noise sigma, m")->check(CLI::NonNegativeNumber);
  render_cmd->add_option("--seed", rd.seed, "Noise seed");
  render_cmd->add_option("--out", rd.out, "Output directory");
  render_cmd->add_flag("--masks", rd.masks, "Also write one threshold mask per band");

  CorpusArgs gc;
  auto* corpus_cmd = app.add_subcommand("gen-corpus", "Render labelled frames for perception metrics");
  corpus_cmd->add_option("--scenario", gc.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  corpus_cmd->add_option("--n", gc.n, "Frame count")->check(CLI::PositiveNumber);
  corpus_cmd->add_option("--seed", gc.seed, "Corpus seed");
  corpus_cmd->add_option("--sigma", gc.sigma, "Depth noise sigma, m")->check(CLI::NonNegativeNumber);
  corpus_cmd->add_option("--distractors", gc.distractors, "Colour-matched spheres to add")->check(CLI::NonNegativeNumber);
  corpus_cmd->add_option("--distractor-seed", gc.distractor_seed, "Placement seed for distractors");
  corpus_cmd->add_flag("--aim-distractors", gc.aim_at_distractors, "Aim cameras at distractors instead of plants");
  corpus_cmd->add_flag("--evaluate", gc.evaluate, "Run detection and record accuracy in index.json");
  corpus_cmd->add_option("--out", gc.out, "Output directory");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the bridge API over HTTP with a real-time sim loop");
  serve_cmd->add_option("--scenario", sv.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", sv.port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--address", sv.address, "Bind address");
  serve_cmd->add_option("--rate", sv.rate, "Sim seconds per wall second")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--queue", sv.queue, "Command queue capacity")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*score_cmd) return cmd_score(sc);
    if (*render_cmd) return cmd_render(rd);
    if (*corpus_cmd) return cmd_gen_corpus(gc);
    if (*serve_cmd) return cmd_serve(sv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help() << std::flush;
    return kUsage;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kUsage;
}
