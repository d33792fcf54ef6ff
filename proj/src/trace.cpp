#include "strawbot/trace.hpp"

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace strawbot {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

TraceWriter::TraceWriter(std::ostream* sink, bool keep_events) : sink_(sink), keep_(keep_events) {}

void TraceWriter::write(const Json& record) {
  std::string line = record.dump();
  line.push_back('\n');
  hash_ = fnv1a(line, hash_);
  ++lines_;
  if (sink_) *sink_ << line;
  if (keep_ && record.value("type", "") != "step") events_.push_back(record);
}

void TraceWriter::flush() {
  if (sink_) sink_->flush();
}

TraceFile read_trace(std::istream& in, bool skip_steps) {
  TraceFile t;
  std::string line;
  std::size_t n = 0;
  bool bad_pending = false;
  while (std::getline(in, line)) {
    ++n;
    if (bad_pending) throw std::runtime_error("trace line " + std::to_string(n - 1) + " is not valid JSON");
    const bool newline = !in.eof();
    t.hash = fnv1a(line, t.hash);
    if (newline) t.hash = fnv1a("\n", t.hash);
    if (line.empty()) continue;
    Json rec = Json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      bad_pending = true;
      continue;
    }
    if (skip_steps && rec.value("type", "") == "step") continue;
    t.records.push_back(std::move(rec));
  }
  t.truncated = bad_pending;
  return t;
}

FrameAudit audit_frame(const RgbdFrame& frame, const std::vector<Detection>& detections, const World& world,
                       int min_area) {
  FrameAudit a;
  std::map<std::string, PartKind> kinds;
  for (const auto& p : world.plants)
    for (const auto& part : p.parts) kinds[part.id] = part.kind;

  std::vector<int> counts(frame.owner_ids.size(), 0);
  for (std::int32_t o : frame.owner)
    if (o >= 0) ++counts[static_cast<std::size_t>(o)];
  for (std::size_t i = 0; i < counts.size(); ++i) {
    auto it = kinds.find(frame.owner_ids[i]);
    if (it != kinds.end() && counts[i] >= min_area) a.seen.push_back({it->first, it->second, counts[i]});
  }

  for (const auto& d : detections) {
    std::map<std::int32_t, int> votes;
    for (const auto& px : d.contour.pixels) ++votes[frame.owner[frame.index(px.u, px.v)]];
    std::int32_t best = -1;
    int best_n = -1;
    for (const auto& [o, n] : votes)
      if (n > best_n) best = o, best_n = n;
    DetectionAudit da;
    da.kind = d.kind;
    da.inliers = static_cast<std::size_t>(d.plane.inlier_count);
    if (best >= 0) da.owner = frame.owner_ids[static_cast<std::size_t>(best)];
    da.owner_is_part = kinds.count(da.owner) > 0;
    if (!da.owner_is_part) ++a.false_positives;
    a.detections.push_back(da);
  }

  for (const auto& s : a.seen) {
    for (const auto& d : a.detections) {
      if (d.owner != s.id) continue;
      if (d.kind == s.kind) ++a.correct;
      break;
    }
  }
  return a;
}

Json to_json(const FrameAudit& a) {
  Json seen = Json::array();
  for (const auto& s : a.seen) seen.push_back({{"id", s.id}, {"kind", to_string(s.kind)}, {"pixels", s.pixels}});
  Json dets = Json::array();
  for (const auto& d : a.detections)
    dets.push_back({{"kind", to_string(d.kind)}, {"owner", d.owner}, {"inliers", d.inliers}});
  return {{"seen", seen}, {"detections", dets}, {"correct", a.correct}, {"false_positives", a.false_positives}};
}

}  // namespace strawbot
