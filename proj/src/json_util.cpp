#include "strawbot/json_util.hpp"

#include <cmath>

namespace strawbot {

void JsonNode::fail(const std::string& what) const { throw ScenarioError(path_ + ": " + what); }

void JsonNode::expect_object() const {
  if (!node_->is_object()) fail("expected object");
}

bool JsonNode::has(const std::string& key) const { return node_->is_object() && node_->contains(key); }

JsonNode JsonNode::at(const std::string& key) const {
  expect_object();
  auto it = node_->find(key);
  if (it == node_->end()) fail("missing required field '" + key + "'");
  return {*it, path_ + "." + key};
}

std::optional<JsonNode> JsonNode::find(const std::string& key) const {
  expect_object();
  auto it = node_->find(key);
  if (it == node_->end()) return std::nullopt;
  return JsonNode(*it, path_ + "." + key);
}

JsonNode JsonNode::at(std::size_t index) const {
  if (!node_->is_array()) fail("expected array");
  if (index >= node_->size()) fail("index " + std::to_string(index) + " out of range");
  return {(*node_)[index], path_ + "[" + std::to_string(index) + "]"};
}

std::size_t JsonNode::size() const {
  if (!node_->is_array()) fail("expected array");
  return node_->size();
}

double JsonNode::number() const {
  if (!node_->is_number()) fail("expected number");
  const double v = node_->get<double>();
  if (!std::isfinite(v)) fail("expected finite number");
  return v;
}

double JsonNode::positive() const {
  const double v = number();
  if (!(v > 0.0)) fail("expected positive number");
  return v;
}

double JsonNode::non_negative() const {
  const double v = number();
  if (v < 0.0) fail("expected non-negative number");
  return v;
}

long long JsonNode::integer() const {
  if (!node_->is_number_integer()) fail("expected integer");
  return node_->get<long long>();
}

std::string JsonNode::string() const {
  if (!node_->is_string()) fail("expected string");
  return node_->get<std::string>();
}

bool JsonNode::boolean() const {
  if (!node_->is_boolean()) fail("expected boolean");
  return node_->get<bool>();
}

Vec3 JsonNode::vec3() const {
  if (!node_->is_array() || node_->size() != 3) fail("expected array of 3 numbers");
  return {at(std::size_t{0}).number(), at(std::size_t{1}).number(), at(std::size_t{2}).number()};
}

Rgb JsonNode::rgb() const {
  if (!node_->is_array() || node_->size() != 3) fail("expected [r, g, b]");
  Rgb c;
  std::uint8_t* dst[3] = {&c.r, &c.g, &c.b};
  for (std::size_t i = 0; i < 3; ++i) {
    const long long v = at(i).integer();
    if (v < 0 || v > 255) at(i).fail("colour channel outside [0, 255]");
    *dst[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

Pose2 JsonNode::pose2() const {
  return {at("x").number(), at("y").number(), has("theta") ? at("theta").number() : 0.0};
}

Rect JsonNode::rect() const {
  Rect r{at("x_min").number(), at("x_max").number(), at("y_min").number(), at("y_max").number()};
  if (r.x_min > r.x_max || r.y_min > r.y_max) fail("rectangle minimum exceeds maximum");
  return r;
}

double JsonNode::number_or(const std::string& key, double fallback) const {
  auto n = find(key);
  return n ? n->number() : fallback;
}
double JsonNode::positive_or(const std::string& key, double fallback) const {
  auto n = find(key);
  return n ? n->positive() : fallback;
}
long long JsonNode::integer_or(const std::string& key, long long fallback) const {
  auto n = find(key);
  return n ? n->integer() : fallback;
}
bool JsonNode::boolean_or(const std::string& key, bool fallback) const {
  auto n = find(key);
  return n ? n->boolean() : fallback;
}
std::string JsonNode::string_or(const std::string& key, const std::string& fallback) const {
  auto n = find(key);
  return n ? n->string() : fallback;
}
Vec3 JsonNode::vec3_or(const std::string& key, const Vec3& fallback) const {
  auto n = find(key);
  return n ? n->vec3() : fallback;
}
Rgb JsonNode::rgb_or(const std::string& key, const Rgb& fallback) const {
  auto n = find(key);
  return n ? n->rgb() : fallback;
}
Pose2 JsonNode::pose2_or(const std::string& key, const Pose2& fallback) const {
  auto n = find(key);
  return n ? n->pose2() : fallback;
}
Rect JsonNode::rect_or(const std::string& key, const Rect& fallback) const {
  auto n = find(key);
  return n ? n->rect() : fallback;
}

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json to_json(const Pose2& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }
Json to_json(const Rgb& c) { return Json::array({c.r, c.g, c.b}); }

}  // namespace strawbot
