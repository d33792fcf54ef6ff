#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "strawbot/arm.hpp"
#include "strawbot/json_util.hpp"
#include "strawbot/world.hpp"

namespace strawbot {

struct ActuatorRequest {
  double extension_m = 0.0;
};

struct GripperRequest {
  Gripper state = Gripper::Open;
};

using WireCommand = std::variant<ServoFrame, BodyTwist, ActuatorRequest, GripperRequest>;

struct WireError {
  std::string code;  // bad_json | schema | range | busy | not_found | method
  std::string message;
  int http_status = 400;
};

struct Decoded {
  std::string request_id;
  std::optional<WireCommand> command;
  std::optional<WireError> error;
};

/// Validates a request body for one of "servo", "chassis", "actuator",
/// "gripper". Unknown fields are ignored.
Decoded decode_command(const std::string& endpoint, const std::string& body);

/// Client-side request body; the inverse of decode_command.
std::string encode_command(const WireCommand& command, const std::string& request_id = "");

/// Endpoint path for a command ("/api/v1/servo", ...).
std::string endpoint_path(const WireCommand& command);

struct WireResponse {
  int status = 200;
  std::string body;
};

/// The simulated hardware behind the wire protocol. Request handlers only
/// touch the queue and the published snapshot; the World is advanced
/// exclusively by the thread calling advance().
class SimHost {
 public:
  explicit SimHost(World world, std::size_t queue_capacity = 64);

  /// Thread-safe request entry point shared by every transport.
  WireResponse handle(const std::string& method, const std::string& path, const std::string& body);

  /// Applies queued commands in arrival order, steps the world once and
  /// publishes the new snapshot. Sim thread only.
  StepEvents advance();

  /// Sim-thread view of the world (rendering, ground truth, scoring).
  const World& world() const { return world_; }

  /// Commands applied during the latest advance(), as trace records.
  const std::vector<Json>& applied() const { return applied_; }

  std::size_t queue_capacity() const { return capacity_; }

 private:
  enum class CmdState { Queued, Active, Done };

  struct Entry {
    std::uint64_t index = 0;
    std::string token;
    WireCommand command;
  };

  struct Status {
    CmdState state = CmdState::Queued;
    std::string kind;
    bool superseded = false;
    double accepted_at = 0.0;
    std::optional<double> completed_at;
    Json result;
  };

  Json state_json() const;  // from world_, sim thread
  Json status_json(const std::string& token, const Status& s) const;
  void finish(const std::string& token, double clock, Json result = nullptr);

  World world_;
  std::size_t capacity_;

  mutable std::mutex mutex_;
  std::deque<Entry> inbox_;                 // guarded
  std::map<std::string, Status> statuses_;  // guarded
  Json published_;                          // guarded
  double published_clock_ = 0.0;            // guarded
  std::uint64_t next_index_ = 1;            // guarded
  std::size_t outstanding_ = 0;             // guarded: accepted but not done

  // Sim-thread state.
  std::deque<Entry> arm_backlog_;
  std::optional<std::string> active_arm_;
  std::optional<std::string> pending_actuator_;
  std::vector<Json> applied_;
};

class BridgeClient {
 public:
  virtual ~BridgeClient() = default;
  virtual WireResponse request(const std::string& method, const std::string& path, const std::string& body) = 0;

  /// POSTs a command; returns the parsed response body.
  Json send(const WireCommand& command, const std::string& request_id = "");
  Json state();
  Json command_status(const std::string& token);
};

class LoopbackClient : public BridgeClient {
 public:
  explicit LoopbackClient(SimHost& host) : host_(host) {}
  WireResponse request(const std::string& method, const std::string& path, const std::string& body) override;

 private:
  SimHost& host_;
};

/// HTTP/1.1 adapter over SimHost::handle.
class HttpServer {
 public:
  explicit HttpServer(SimHost& host);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& address, int port);
  /// Serves on the calling thread until stop().
  bool listen(const std::string& address, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class HttpClient : public BridgeClient {
 public:
  HttpClient(const std::string& host, int port);
  ~HttpClient() override;
  WireResponse request(const std::string& method, const std::string& path, const std::string& body) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace strawbot
