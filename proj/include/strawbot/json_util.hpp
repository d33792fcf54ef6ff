#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "strawbot/common.hpp"
#include "strawbot/geometry.hpp"

namespace strawbot {

using Json = nlohmann::json;

/// A JSON node plus its dotted path; every accessor reports failures as
/// ScenarioError("<path>: <problem>").
class JsonNode {
 public:
  JsonNode(const Json& node, std::string path) : node_(&node), path_(std::move(path)) {}

  const Json& raw() const { return *node_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const;

  bool has(const std::string& key) const;
  JsonNode at(const std::string& key) const;
  std::optional<JsonNode> find(const std::string& key) const;
  JsonNode at(std::size_t index) const;
  std::size_t size() const;  // array length; fails on non-arrays

  double number() const;
  double positive() const;
  double non_negative() const;
  long long integer() const;
  std::string string() const;
  bool boolean() const;
  Vec3 vec3() const;
  Rgb rgb() const;
  Pose2 pose2() const;
  Rect rect() const;

  double number_or(const std::string& key, double fallback) const;
  double positive_or(const std::string& key, double fallback) const;
  long long integer_or(const std::string& key, long long fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;
  Vec3 vec3_or(const std::string& key, const Vec3& fallback) const;
  Rgb rgb_or(const std::string& key, const Rgb& fallback) const;
  Pose2 pose2_or(const std::string& key, const Pose2& fallback) const;
  Rect rect_or(const std::string& key, const Rect& fallback) const;

 private:
  void expect_object() const;
  const Json* node_;
  std::string path_;
};

Json to_json(const Vec3& v);
Json to_json(const Pose2& p);
Json to_json(const Rgb& c);

}  // namespace strawbot
