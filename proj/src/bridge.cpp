#include "strawbot/bridge.hpp"

#include <cmath>

namespace strawbot {

namespace {

const char* kPrefix = "/api/v1/";

WireError err(std::string code, std::string message, int http = 400) {
  return {std::move(code), std::move(message), http};
}

struct Fail {
  WireError e;
};

double finite_number(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Fail{err("schema", std::string("missing required field '") + key + "'")};
  if (!it->is_number()) throw Fail{err("schema", std::string("field '") + key + "' must be a number")};
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw Fail{err("schema", std::string("field '") + key + "' must be finite")};
  return v;
}

WireCommand decode_body(const std::string& endpoint, const Json& j) {
  if (endpoint == "servo") {
    auto it = j.find("positions");
    if (it == j.end()) throw Fail{err("schema", "missing required field 'positions'")};
    if (!it->is_array() || it->size() != kNumJoints)
      throw Fail{err("schema", "'positions' must be an array of 5 integers")};
    ServoFrame f;
    for (std::size_t i = 0; i < kNumJoints; ++i) {
      const Json& p = (*it)[i];
      if (!p.is_number_integer()) throw Fail{err("schema", "'positions' must be an array of 5 integers")};
      const long long v = p.get<long long>();
      if (v < kServoMin || v > kServoMax)
        throw Fail{err("range", "positions[" + std::to_string(i) + "] = " + std::to_string(v) + " outside [0, 1000]")};
      f.positions[i] = static_cast<int>(v);
    }
    f.duration_ms = 1000;
    if (auto d = j.find("duration_ms"); d != j.end()) {
      if (!d->is_number_integer()) throw Fail{err("schema", "'duration_ms' must be an integer")};
      const long long ms = d->get<long long>();
      if (ms < 0 || ms > 60000) throw Fail{err("range", "'duration_ms' outside [0, 60000]")};
      f.duration_ms = static_cast<int>(ms);
    }
    return f;
  }
  if (endpoint == "chassis") return BodyTwist{finite_number(j, "vx"), finite_number(j, "vy"), finite_number(j, "omega")};
  if (endpoint == "actuator") return ActuatorRequest{finite_number(j, "extension_m")};
  if (endpoint == "gripper") {
    auto it = j.find("state");
    if (it == j.end()) throw Fail{err("schema", "missing required field 'state'")};
    if (!it->is_string() || (*it != "open" && *it != "closed"))
      throw Fail{err("schema", "'state' must be \"open\" or \"closed\"")};
    return GripperRequest{*it == "open" ? Gripper::Open : Gripper::Closed};
  }
  throw Fail{err("not_found", "unknown endpoint '" + endpoint + "'", 404)};
}

const char* kind_of(const WireCommand& c) {
  switch (c.index()) {
    case 0: return "servo";
    case 1: return "chassis";
    case 2: return "actuator";
    default: return "gripper";
  }
}

Json command_json(const WireCommand& c) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ServoFrame>)
          return {{"positions", v.positions}, {"duration_ms", v.duration_ms}};
        else if constexpr (std::is_same_v<T, BodyTwist>)
          return {{"vx", v.vx}, {"vy", v.vy}, {"omega", v.omega}};
        else if constexpr (std::is_same_v<T, ActuatorRequest>)
          return {{"extension_m", v.extension_m}};
        else
          return {{"state", v.state == Gripper::Open ? "open" : "closed"}};
      },
      c);
}

WireResponse error_response(const WireError& e, const std::string& request_id) {
  Json j{{"status", "error"}, {"request_id", request_id}, {"error", {{"code", e.code}, {"message", e.message}}}};
  return {e.http_status, j.dump()};
}

const char* trim_outcome(TrimOutcome o) {
  switch (o) {
    case TrimOutcome::Success: return "success";
    case TrimOutcome::Miss: return "miss";
    case TrimOutcome::AlreadyTrimmed: return "already_trimmed";
  }
  return "?";
}

}  // namespace

Decoded decode_command(const std::string& endpoint, const std::string& body) {
  Decoded d;
  const Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) {
    d.error = err("bad_json", "request body is not valid JSON");
    return d;
  }
  if (!j.is_object()) {
    d.error = err("schema", "request body must be a JSON object");
    return d;
  }
  if (auto rid = j.find("request_id"); rid != j.end()) {
    if (!rid->is_string()) {
      d.error = err("schema", "'request_id' must be a string");
      return d;
    }
    d.request_id = rid->get<std::string>();
  }
  try {
    d.command = decode_body(endpoint, j);
  } catch (const Fail& f) {
    d.error = f.e;
  }
  return d;
}

std::string encode_command(const WireCommand& c, const std::string& request_id) {
  Json j = command_json(c);
  if (!request_id.empty()) j["request_id"] = request_id;
  return j.dump();
}

std::string endpoint_path(const WireCommand& c) { return std::string(kPrefix) + kind_of(c); }

SimHost::SimHost(World world, std::size_t queue_capacity) : world_(std::move(world)), capacity_(queue_capacity) {
  published_ = state_json();
  published_clock_ = world_.clock;
}

WireResponse SimHost::handle(const std::string& method, const std::string& path, const std::string& body) {
  if (path.rfind(kPrefix, 0) != 0) return error_response(err("not_found", "unknown path '" + path + "'", 404), "");
  const std::string rest = path.substr(std::char_traits<char>::length(kPrefix));

  if (rest == "state") {
    if (method != "GET") return error_response(err("method", "use GET for " + path, 405), "");
    std::lock_guard lock(mutex_);
    Json j = published_;
    j["queue_depth"] = outstanding_;
    return {200, j.dump()};
  }
  if (rest.rfind("command/", 0) == 0) {
    if (method != "GET") return error_response(err("method", "use GET for " + path, 405), "");
    const std::string token = rest.substr(8);
    std::lock_guard lock(mutex_);
    auto it = statuses_.find(token);
    if (it == statuses_.end()) return error_response(err("not_found", "unknown command token '" + token + "'", 404), "");
    return {200, status_json(token, it->second).dump()};
  }
  if (rest == "servo" || rest == "chassis" || rest == "actuator" || rest == "gripper") {
    if (method != "POST") return error_response(err("method", "use POST for " + path, 405), "");
    Decoded d = decode_command(rest, body);
    if (d.error) return error_response(*d.error, d.request_id);
    if (auto* a = std::get_if<ActuatorRequest>(&*d.command)) {
      const double stroke = world_.robot_config.actuator_stroke;  // immutable after construction
      if (a->extension_m < 0.0 || a->extension_m > stroke)
        return error_response(err("range", "'extension_m' outside [0, " + Json(stroke).dump() + "]"), d.request_id);
    }
    std::lock_guard lock(mutex_);
    if (outstanding_ >= capacity_)
      return error_response(err("busy", "command queue full (" + std::to_string(capacity_) + ")", 503), d.request_id);
    Entry e{next_index_, "cmd-" + std::to_string(next_index_), std::move(*d.command)};
    ++next_index_;
    ++outstanding_;
    statuses_[e.token] = Status{CmdState::Queued, kind_of(e.command), false, published_clock_, std::nullopt, nullptr};
    Json j{{"status", "ok"}, {"request_id", d.request_id}, {"token", e.token}};
    inbox_.push_back(std::move(e));
    return {200, j.dump()};
  }
  return error_response(err("not_found", "unknown path '" + path + "'", 404), "");
}

void SimHost::finish(const std::string& token, double clock, Json result) {
  std::lock_guard lock(mutex_);
  Status& s = statuses_.at(token);
  if (s.state == CmdState::Done) return;
  s.state = CmdState::Done;
  s.completed_at = clock;
  if (!result.is_null()) s.result = std::move(result);
  --outstanding_;
}

StepEvents SimHost::advance() {
  std::deque<Entry> batch;
  {
    std::lock_guard lock(mutex_);
    batch.swap(inbox_);
  }
  applied_.clear();
  ActuationCommand cmd;
  std::optional<std::string> twist_token, gripper_token;
  std::vector<std::string> immediate;  // done once this step has run

  for (auto& e : batch) {
    applied_.push_back({{"token", e.token}, {"kind", kind_of(e.command)}, {"command", command_json(e.command)}});
    if (auto* t = std::get_if<BodyTwist>(&e.command)) {
      if (twist_token) {
        std::lock_guard lock(mutex_);
        statuses_.at(*twist_token).superseded = true;
      }
      twist_token = e.token;
      cmd.twist = *t;
      immediate.push_back(e.token);
    } else if (auto* a = std::get_if<ActuatorRequest>(&e.command)) {
      if (pending_actuator_) {
        {
          std::lock_guard lock(mutex_);
          statuses_.at(*pending_actuator_).superseded = true;
        }
        finish(*pending_actuator_, world_.clock);
      }
      pending_actuator_ = e.token;
      cmd.actuator_target = a->extension_m;
      std::lock_guard lock(mutex_);
      statuses_.at(e.token).state = CmdState::Active;
    } else if (auto* g = std::get_if<GripperRequest>(&e.command)) {
      if (gripper_token) {
        std::lock_guard lock(mutex_);
        statuses_.at(*gripper_token).superseded = true;
      }
      gripper_token = e.token;
      cmd.gripper = g->state;
      immediate.push_back(e.token);
    } else {
      arm_backlog_.push_back(std::move(e));
    }
  }

  if (!active_arm_ && !arm_backlog_.empty()) {
    Entry e = std::move(arm_backlog_.front());
    arm_backlog_.pop_front();
    const auto& frame = std::get<ServoFrame>(e.command);
    ArmMotion m;
    m.target = servo_to_radians(world_.robot_config.arm, frame);
    m.duration = frame.duration_ms / 1000.0;
    cmd.arm = m;
    active_arm_ = e.token;
    std::lock_guard lock(mutex_);
    statuses_.at(e.token).state = CmdState::Active;
  }

  const StepEvents ev = world_.step(world_.timestep, cmd);
  const double now = world_.clock;

  for (const auto& token : immediate) {
    Json result = nullptr;
    if (gripper_token && token == *gripper_token && ev.trim)
      result = {{"trim", trim_outcome(ev.trim->outcome)}, {"part_id", ev.trim->part_id}, {"distance", ev.trim->distance}};
    finish(token, now, std::move(result));
  }
  if (ev.arm_arrived && active_arm_) {
    finish(*active_arm_, now);
    active_arm_.reset();
  }
  if (pending_actuator_ && world_.robot.actuator_extension == world_.actuator_target) {
    finish(*pending_actuator_, now);
    pending_actuator_.reset();
  }

  Json snapshot = state_json();
  std::lock_guard lock(mutex_);
  published_ = std::move(snapshot);
  published_clock_ = now;
  return ev;
}

Json SimHost::state_json() const {
  const RobotState& r = world_.robot;
  const ServoFrame servo = radians_to_servo(world_.robot_config.arm, world_.robot_config.arm.clamp(r.joints), 0);
  std::vector<double> joints(r.joints.data(), r.joints.data() + kNumJoints);
  return {{"status", "ok"},
          {"clock", world_.clock},
          {"chassis", to_json(r.chassis)},
          {"twist", {{"vx", r.chassis_twist.vx}, {"vy", r.chassis_twist.vy}, {"omega", r.chassis_twist.omega}}},
          {"joints", joints},
          {"servo", servo.positions},
          {"actuator_extension", r.actuator_extension},
          {"gripper", r.gripper == Gripper::Open ? "open" : "closed"}};
}

Json SimHost::status_json(const std::string& token, const Status& s) const {
  static const char* names[] = {"queued", "active", "done"};
  Json j{{"status", "ok"},
         {"token", token},
         {"kind", s.kind},
         {"state", names[static_cast<int>(s.state)]},
         {"superseded", s.superseded},
         {"accepted_at", s.accepted_at},
         {"completed_at", s.completed_at ? Json(*s.completed_at) : Json(nullptr)}};
  if (!s.result.is_null()) j["result"] = s.result;
  return j;
}

Json BridgeClient::send(const WireCommand& command, const std::string& request_id) {
  const WireResponse r = request("POST", endpoint_path(command), encode_command(command, request_id));
  return Json::parse(r.body);
}

Json BridgeClient::state() { return Json::parse(request("GET", "/api/v1/state", "").body); }

Json BridgeClient::command_status(const std::string& token) {
  return Json::parse(request("GET", "/api/v1/command/" + token, "").body);
}

WireResponse LoopbackClient::request(const std::string& method, const std::string& path, const std::string& body) {
  return host_.handle(method, path, body);
}

}  // namespace strawbot
