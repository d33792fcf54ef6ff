#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "strawbot/json_util.hpp"
#include "strawbot/perception.hpp"
#include "strawbot/sensor.hpp"
#include "strawbot/world.hpp"

namespace strawbot {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset);
std::string hex64(std::uint64_t v);

/// JSON-lines sink. Every line is hashed (FNV-1a 64 over the exact bytes,
/// newline included) whether or not a stream is attached. Non-step records
/// can be kept in memory for scoring without re-reading the file.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream* sink = nullptr, bool keep_events = true);

  void write(const Json& record);
  void flush();

  std::uint64_t hash() const { return hash_; }
  std::string hash_hex() const { return hex64(hash_); }
  std::size_t lines() const { return lines_; }
  const std::vector<Json>& events() const { return events_; }

 private:
  std::ostream* sink_;
  bool keep_;
  std::uint64_t hash_ = kFnvOffset;
  std::size_t lines_ = 0;
  std::vector<Json> events_;
};

struct TraceFile {
  std::vector<Json> records;
  bool truncated = false;  // last line did not parse
  std::uint64_t hash = kFnvOffset;
};

/// Reads a JSON-lines trace. A malformed final line marks the trace
/// truncated; a malformed line elsewhere throws std::runtime_error.
TraceFile read_trace(std::istream& in, bool skip_steps = true);

/// Ground-truth view of one frame: which parts were visible (at least
/// `min_area` owned pixels) and what each detection actually covered.
struct SeenPart {
  std::string id;
  PartKind kind = PartKind::HealthyLeafCluster;
  int pixels = 0;
};

struct DetectionAudit {
  PartKind kind = PartKind::HealthyLeafCluster;
  std::string owner;  // majority owner of the contour pixels, "" for background
  bool owner_is_part = false;
  std::size_t inliers = 0;
};

struct FrameAudit {
  std::vector<SeenPart> seen;
  std::vector<DetectionAudit> detections;
  int correct = 0;  // seen parts whose first matching detection has the right kind
  int false_positives = 0;  // detections not owned by any part
};

FrameAudit audit_frame(const RgbdFrame& frame, const std::vector<Detection>& detections, const World& world,
                       int min_area);

Json to_json(const FrameAudit& audit);

}  // namespace strawbot
