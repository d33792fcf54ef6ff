#include <cmath>
#include <numbers>
#include <random>
#include <map>
#include <sstream>

#include "doctest.h"
#include "strawbot/perception.hpp"
#include "test_util.hpp"

using namespace strawbot;
using std::numbers::pi;

namespace {

constexpr double kDeg = pi / 180.0;

Mask blank(int w, int h) { return {w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0)}; }

void fill(Mask& m, int u0, int v0, int w, int h) {
  for (int v = v0; v < v0 + h; ++v)
    for (int u = u0; u < u0 + w; ++u) m.bits[static_cast<std::size_t>(v) * m.width + u] = 1;
}

RgbdFrame solid_frame(int w, int h, Rgb c) {
  RgbdFrame f;
  f.width = w;
  f.height = h;
  f.rgb.resize(3u * w * h);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    f.rgb[3 * i] = c.r;
    f.rgb[3 * i + 1] = c.g;
    f.rgb[3 * i + 2] = c.b;
  }
  f.depth.assign(static_cast<std::size_t>(w) * h, 0.0f);
  f.owner.assign(static_cast<std::size_t>(w) * h, -1);
  return f;
}

Vec3 any_perpendicular(const Vec3& n) {
  return (std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(n).normalized();
}

double angle_between_normals(const Vec3& a, const Vec3& b) {
  return std::acos(std::min(1.0, std::abs(a.normalized().dot(b.normalized()))));
}

Pose3 forward_camera() { return body_to_optical(0.0); }

World world_with_part(PartKind kind, Rgb color, const Vec3& centre) {
  World w;
  Plant p;
  p.id = "P";
  p.stem.base = Vec3(50, 50, 0);
  PlantPart part;
  part.id = "P-x";
  part.kind = kind;
  part.center = centre;
  part.radius = 0.025;
  part.surface_normal = Vec3(-1, 0.2, 0.5).normalized();
  part.color = color;
  p.parts.push_back(part);
  w.plants.push_back(p);
  return w;
}

}  // namespace

TEST_CASE("rgb_to_hsv examples") {
  const Hsv red = rgb_to_hsv({255, 0, 0});
  CHECK(red.h == 0.0);
  CHECK(red.s == 1.0);
  CHECK(red.v == 1.0);
  const Hsv grey = rgb_to_hsv({128, 128, 128});
  CHECK(grey.h == 0.0);
  CHECK(grey.s == 0.0);
  CHECK(grey.v == doctest::Approx(0.502).epsilon(1e-3));
  const Hsv cyan = rgb_to_hsv({0, 255, 255});
  CHECK(cyan.h == doctest::Approx(180.0));
  CHECK(cyan.s == 1.0);
  CHECK(cyan.v == 1.0);
}

TEST_CASE("rgb_to_hsv matches the textbook hexcone formula on random colours") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> b(0, 255);
  for (int i = 0; i < 2000; ++i) {
    const Rgb c{std::uint8_t(b(rng)), std::uint8_t(b(rng)), std::uint8_t(b(rng))};
    const Hsv h = rgb_to_hsv(c);
    // Oracle: hexcone sector chosen by >= comparisons instead of equality.
    const double r = c.r / 255.0, g = c.g / 255.0, bl = c.b / 255.0;
    const double mx = std::max({r, g, bl}), mn = std::min({r, g, bl}), C = mx - mn;
    double hp = 0;
    if (C > 0) {
      if (r >= g && r >= bl) hp = (g - bl) / C;
      else if (g >= bl) hp = 2 + (bl - r) / C;
      else hp = 4 + (r - g) / C;
    }
    double H = 60 * hp;
    if (H < 0) H += 360;
    CHECK(h.h == doctest::Approx(H).epsilon(1e-9));
    CHECK(h.v == doctest::Approx(mx));
    CHECK(h.s == doctest::Approx(mx > 0 ? C / mx : 0.0));
    CHECK(h.h >= 0.0);
    CHECK(h.h < 360.0);
  }
}

TEST_CASE("hue band wrap-around") {
  HsvBand band;
  band.h_lo = 350;
  band.h_hi = 10;
  CHECK(band.contains({5, 0.5, 0.5}));
  CHECK(band.contains({355, 0.5, 0.5}));
  CHECK_FALSE(band.contains({180, 0.5, 0.5}));
}

TEST_CASE("default bands are valid, pairwise disjoint and classify the scene colours") {
  const auto bands = default_bands();
  REQUIRE(bands.size() == 3);
  for (std::size_t i = 0; i < bands.size(); ++i) {
    CHECK(bands[i].valid());
    for (std::size_t j = i + 1; j < bands.size(); ++j) CHECK(bands_disjoint(bands[i], bands[j]));
  }
  // Exhaustive over the 24-bit cube at stride 5: no colour in two bands.
  for (int r = 0; r < 256; r += 5)
    for (int g = 0; g < 256; g += 5)
      for (int b = 0; b < 256; b += 5) {
        const Hsv h = rgb_to_hsv({std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)});
        int n = 0;
        for (const auto& band : bands) n += band.contains(h);
        CHECK(n <= 1);
      }
  auto which = [&](Rgb c) {
    for (const auto& band : bands)
      if (band.contains(rgb_to_hsv(c))) return static_cast<int>(band.kind);
    return -1;
  };
  CHECK(which({40, 160, 50}) == static_cast<int>(PartKind::HealthyLeafCluster));
  CHECK(which({220, 200, 40}) == static_cast<int>(PartKind::UnhealthyLeafCluster));
  CHECK(which({245, 245, 240}) == static_cast<int>(PartKind::Flower));
  CHECK(which({70, 55, 45}) == -1);   // backdrop
  CHECK(which({110, 80, 50}) == -1);  // stem
  HsvBand overlapping = bands[0];
  overlapping.h_lo = 60;
  CHECK_FALSE(bands_disjoint(overlapping, bands[1]));
}

TEST_CASE("threshold: backdrop frame gives an empty mask") {
  World w;
  const RgbdFrame f = render(w, forward_camera(), CameraIntrinsics{});
  for (const auto& band : default_bands()) CHECK(threshold(f, band).count() == 0);
}

TEST_CASE("threshold: green blob mask equals the rendered ownership") {
  World w = world_with_part(PartKind::HealthyLeafCluster, {40, 160, 50}, Vec3(0.5, 0.03, 0.02));
  const RgbdFrame f = render(w, forward_camera(), CameraIntrinsics{});
  const Mask m = threshold(f, default_bands()[0]);
  std::size_t owned = 0;
  for (int v = 0; v < f.height; ++v)
    for (int u = 0; u < f.width; ++u) {
      const bool own = f.owner_at(u, v) == "P-x";
      owned += own;
      CHECK(m.at(u, v) == own);
    }
  CHECK(owned > 500);
}

TEST_CASE("extract_contours examples") {
  CHECK(extract_contours(blank(40, 30)).empty());

  Mask sq = blank(40, 30);
  fill(sq, 5, 7, 10, 10);
  auto one = extract_contours(sq);
  REQUIRE(one.size() == 1);
  CHECK(one[0].area == 100);
  CHECK(one[0].cu == doctest::Approx(9.5));
  CHECK(one[0].cv == doctest::Approx(11.5));
  CHECK(one[0].boundary.size() == 36);

  Mask two = blank(60, 40);
  fill(two, 2, 2, 10, 8);     // 80
  fill(two, 30, 10, 20, 10);  // 200
  auto both = extract_contours(two);
  REQUIRE(both.size() == 2);
  CHECK(both[0].area == 200);
  CHECK(both[1].area == 80);
}

TEST_CASE("extract_contours: 8-connectivity, min area, tie order") {
  Mask m = blank(30, 30);
  // Diagonal staircase: one 8-connected component of 20 pixels.
  for (int i = 0; i < 20; ++i) m.bits[static_cast<std::size_t>(i) * 30 + i] = 1;
  CHECK(extract_contours(m, 50).empty());
  auto c = extract_contours(m, 1);
  REQUIRE(c.size() == 1);
  CHECK(c[0].area == 20);

  Mask t = blank(40, 20);
  fill(t, 20, 2, 8, 8);
  fill(t, 2, 2, 8, 8);
  auto tie = extract_contours(t, 10);
  REQUIRE(tie.size() == 2);
  CHECK(tie[0].cu < tie[1].cu);
}

TEST_CASE("extract_contours agrees with a brute-force union-find oracle") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution on(0.45);
  for (int trial = 0; trial < 20; ++trial) {
    Mask m = blank(50, 40);
    for (auto& b : m.bits) b = on(rng);
    // Oracle: repeated label relaxation.
    std::vector<int> label(m.bits.size(), -1);
    for (std::size_t i = 0; i < label.size(); ++i)
      if (m.bits[i]) label[i] = static_cast<int>(i);
    bool changed = true;
    while (changed) {
      changed = false;
      for (int v = 0; v < 40; ++v)
        for (int u = 0; u < 50; ++u) {
          const std::size_t i = static_cast<std::size_t>(v) * 50 + u;
          if (label[i] < 0) continue;
          for (int dv = -1; dv <= 1; ++dv)
            for (int du = -1; du <= 1; ++du) {
              const int uu = u + du, vv = v + dv;
              if (uu < 0 || vv < 0 || uu >= 50 || vv >= 40) continue;
              const std::size_t j = static_cast<std::size_t>(vv) * 50 + uu;
              if (label[j] >= 0 && label[j] < label[i]) {
                label[i] = label[j];
                changed = true;
              }
            }
        }
    }
    std::map<int, int> sizes;
    for (int l : label)
      if (l >= 0) sizes[l]++;
    std::vector<int> expect;
    for (auto [l, n] : sizes)
      if (n >= 5) expect.push_back(n);
    std::sort(expect.rbegin(), expect.rend());
    std::vector<int> got;
    for (const auto& c : extract_contours(m, 5)) got.push_back(c.area);
    CHECK(got == expect);
  }
}

TEST_CASE("RANSAC: perfect plane") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.emplace_back(u(rng), u(rng), 0.5);
  const PlaneFit fit = fit_plane_ransac(pts, {});
  CHECK(fit.accepted);
  CHECK(fit.inlier_count == 300);
  CHECK(std::abs(std::abs(fit.normal.z()) - 1.0) < 1e-9);
  CHECK(std::abs(fit.normal.norm() - 1.0) < 1e-9);
  CHECK(std::abs(std::abs(fit.offset) - 0.5) < 1e-9);
  CHECK(fit.normal.z() < 0);  // faces the origin
}

TEST_CASE("RANSAC: 33% outliers, normal within 2 degrees over 100 seeds") {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const Vec3 n = testing::random_rotation(rng) * Vec3::UnitZ();
    const Vec3 e1 = any_perpendicular(n), e2 = n.cross(e1);
    const Vec3 origin = testing::random_vec(rng, 0.3) + Vec3(0, 0, 0.6);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    std::vector<Vec3> pts;
    for (int i = 0; i < 200; ++i) pts.push_back(origin + u(rng) * e1 + u(rng) * e2);
    for (int i = 0; i < 100; ++i) pts.push_back(origin + Vec3(u(rng), u(rng), u(rng)));
    RansacParams p;
    p.seed = seed;
    const PlaneFit fit = fit_plane_ransac(pts, p);
    const bool ok = fit.accepted && angle_between_normals(fit.normal, n) <= 2.0 * kDeg;
    good += ok;
    CHECK(fit.inlier_count <= static_cast<int>(pts.size()));
  }
  CHECK(good == 100);
}

TEST_CASE("RANSAC: volumetric clouds are rejected") {
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    std::vector<Vec3> pts;
    while (pts.size() < 300) {
      const Vec3 p(u(rng), u(rng), u(rng));
      if (p.norm() <= 0.05) pts.push_back(p + Vec3(0, 0, 0.5));
    }
    RansacParams p;
    p.seed = seed;
    rejected += !fit_plane_ransac(pts, p).accepted;
  }
  CHECK(rejected >= 95);
}

TEST_CASE("RANSAC: degenerate inputs throw") {
  CHECK_THROWS_AS(fit_plane_ransac({}, {}), DegenerateInput);
  CHECK_THROWS_AS(fit_plane_ransac({Vec3(0, 0, 1), Vec3(1, 0, 1)}, {}), DegenerateInput);
  std::vector<Vec3> line;
  for (int i = 0; i < 100; ++i) line.emplace_back(0.01 * i, 0.02 * i, 1.0 - 0.005 * i);
  CHECK_THROWS_WITH_AS(fit_plane_ransac(line, {}), "degenerate input", DegenerateInput);
  std::vector<Vec3> same(50, Vec3(1, 2, 3));
  CHECK_THROWS_AS(fit_plane_ransac(same, {}), DegenerateInput);
}

TEST_CASE("RANSAC: deterministic and never falsely rejects exact planes") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 n = testing::random_rotation(rng) * Vec3::UnitZ();
    const Vec3 e1 = any_perpendicular(n), e2 = n.cross(e1);
    std::uniform_real_distribution<double> u(-0.04, 0.04);
    std::uniform_int_distribution<int> count(50, 400);
    std::vector<Vec3> pts;
    const int N = count(rng);
    for (int i = 0; i < N; ++i) pts.push_back(Vec3(0.1, 0, 0.5) + u(rng) * e1 + u(rng) * e2);
    RansacParams p;
    p.seed = static_cast<std::uint64_t>(trial);
    const PlaneFit a = fit_plane_ransac(pts, p), b = fit_plane_ransac(pts, p);
    CHECK(a.accepted);
    CHECK(a.inlier_count == N);
    CHECK(a.inliers == b.inliers);
    CHECK(a.normal == b.normal);
  }
}

TEST_CASE("detect_parts: single unhealthy cluster") {
  const Vec3 centre(0.45, -0.04, 0.03);
  World w = world_with_part(PartKind::UnhealthyLeafCluster, {220, 200, 40}, centre);
  const Pose3 cam = compose(Transform::from_pose2(Pose2(0.02, 0.01, 0.1), 0.05), body_to_optical(0.1));
  const RgbdFrame f = render(w, cam, CameraIntrinsics{});
  DetectionStats stats;
  const auto dets = detect_parts(f, PerceptionConfig{}, &stats);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].kind == PartKind::UnhealthyLeafCluster);
  CHECK((dets[0].centroid_world - centre).norm() <= 0.01);
  CHECK(dets[0].plane.inlier_ratio >= 0.6);
  CHECK(stats.contours == 1);
}

TEST_CASE("detect_parts: non-planar distractor ball is rejected") {
  World w;
  w.distractors.push_back({"ball", Vec3(0.5, 0.0, 0.0), 0.04, {245, 245, 240}});
  const RgbdFrame f = render(w, forward_camera(), CameraIntrinsics{});
  DetectionStats stats;
  const auto dets = detect_parts(f, PerceptionConfig{}, &stats);
  CHECK(dets.empty());
  CHECK(stats.contours == 1);
  CHECK(stats.rejected_nonplanar == 1);
}

TEST_CASE("surface_curvature oracles") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.02, 0.02);
  const Vec3 n = Vec3(0.3, -0.2, 1.0).normalized();
  const Vec3 e1 = any_perpendicular(n), e2 = n.cross(e1);
  PlaneFit plane;
  plane.normal = n;

  // Paraboloid w = (k1 x^2 + k2 y^2) / 2 has principal curvatures k1, k2 at the apex.
  std::vector<Vec3> flat, bowl, saddle;
  for (int i = 0; i < 400; ++i) {
    const double x = u(rng), y = u(rng);
    const Vec3 base = Vec3(0.1, 0.0, 0.6) + x * e1 + y * e2;
    flat.push_back(base);
    bowl.push_back(base + 0.5 * (25.0 * x * x + 10.0 * y * y) * n);
    saddle.push_back(base + 0.5 * (12.0 * x * x - 30.0 * y * y) * n);
  }
  CHECK(surface_curvature(flat, plane).value < 1e-6);
  CHECK(surface_curvature(bowl, plane).value == doctest::Approx(25.0).epsilon(1e-6));
  CHECK(surface_curvature(saddle, plane).value == doctest::Approx(30.0).epsilon(1e-6));
  CHECK(surface_curvature(bowl, plane).std_error < 1e-6);

  // Noise widens the error bar, not the estimate's centre.
  std::normal_distribution<double> noise(0.0, 0.002);
  std::vector<Vec3> noisy = flat;
  for (auto& p : noisy) p += noise(rng) * n;
  const Curvature k = surface_curvature(noisy, plane);
  CHECK(k.std_error > 0.0);
  CHECK(k.value < 4.0 * k.std_error);

  // Underdetermined input.
  CHECK(surface_curvature({flat.begin(), flat.begin() + 5}, plane).value == 0.0);
}

TEST_CASE("detect_parts: ball that passes the inlier gate is rejected as curved") {
  World w;
  w.distractors.push_back({"ball", Vec3(0.5, 0.0, 0.2), 0.04, {245, 245, 240}});
  const RgbdFrame f = render(w, forward_camera(), CameraIntrinsics{});
  PerceptionConfig ungated;
  ungated.max_curvature = 1e9;
  REQUIRE(detect_parts(f, ungated).size() == 1);
  DetectionStats stats;
  CHECK(detect_parts(f, PerceptionConfig{}, &stats).empty());
  CHECK(stats.contours == 1);
  CHECK(stats.rejected_nonplanar == 1);
  CHECK(stats.rejected_curved == 1);
}

TEST_CASE("detect_parts: touching discs at different depths are not rejected as curved") {
  World w = world_with_part(PartKind::Flower, {245, 245, 240}, Vec3(0.5, 0.0, 0.0));
  PlantPart back = w.plants[0].parts[0];
  back.id = "P-y";
  back.center = Vec3(0.53, 0.04, 0.0);
  w.plants[0].parts.push_back(back);
  const RgbdFrame f = render(w, forward_camera(), CameraIntrinsics{});
  DetectionStats stats;
  const auto dets = detect_parts(f, PerceptionConfig{}, &stats);
  REQUIRE(stats.contours == 1);
  CHECK(stats.rejected_curved == 0);
  CHECK(dets.size() == 1);
}

TEST_CASE("detect_parts: empty world") {
  World w;
  CHECK(detect_parts(render(w, forward_camera(), CameraIntrinsics{}), PerceptionConfig{}).empty());
}

TEST_CASE("detect_parts: accepted detections honour the gate, deterministic") {
  World w = world_with_part(PartKind::Flower, {245, 245, 240}, Vec3(0.5, 0.05, 0.0));
  w.distractors.push_back({"ball", Vec3(0.55, -0.08, 0.0), 0.045, {245, 245, 240}});
  RenderOptions noisy;
  noisy.depth_noise_sigma = 0.002;
  noisy.noise_seed = 3;
  const RgbdFrame f = render(w, forward_camera(), CameraIntrinsics{}, noisy);
  const auto a = detect_parts(f, PerceptionConfig{}), b = detect_parts(f, PerceptionConfig{});
  REQUIRE(a.size() == 1);
  REQUIRE(b.size() == 1);
  CHECK(a[0].centroid_camera == b[0].centroid_camera);
  CHECK(a[0].plane.inlier_ratio >= PerceptionConfig{}.ransac.min_ratio);
  CHECK((a[0].centroid_world - Vec3(0.5, 0.05, 0.0)).norm() < 0.01);
}

TEST_CASE("detect_parts: whole-pixel translation keeps counts and shifts centroids") {
  World w = world_with_part(PartKind::HealthyLeafCluster, {40, 160, 50}, Vec3(0.5, 0.0, 0.0));
  const RgbdFrame f = render(w, forward_camera(), CameraIntrinsics{});
  const int du = 37, dv = -11;
  RgbdFrame g = f;
  std::fill(g.depth.begin(), g.depth.end(), 0.0f);
  for (std::size_t i = 0; i < g.depth.size(); ++i) {
    g.rgb[3 * i] = w.arena.backdrop.r;
    g.rgb[3 * i + 1] = w.arena.backdrop.g;
    g.rgb[3 * i + 2] = w.arena.backdrop.b;
  }
  for (int v = 0; v < f.height; ++v)
    for (int u = 0; u < f.width; ++u) {
      const int uu = u + du, vv = v + dv;
      if (uu < 0 || vv < 0 || uu >= f.width || vv >= f.height) continue;
      const std::size_t s = f.index(u, v), d = g.index(uu, vv);
      g.depth[d] = f.depth[s];
      for (int c = 0; c < 3; ++c) g.rgb[3 * d + c] = f.rgb[3 * s + c];
    }
  const auto a = detect_parts(f, PerceptionConfig{}), b = detect_parts(g, PerceptionConfig{});
  REQUIRE(a.size() == 1);
  REQUIRE(b.size() == 1);
  CHECK(b[0].contour.cu == doctest::Approx(a[0].contour.cu + du));
  CHECK(b[0].contour.cv == doctest::Approx(a[0].contour.cv + dv));
  CHECK(b[0].contour.area == a[0].contour.area);
}

TEST_CASE("perception config parsing and debug output") {
  const Json doc = Json::parse(R"({"bands": [
      {"kind": "healthy", "h_lo": 90, "h_hi": 150, "s_lo": 0.3, "v_lo": 0.2},
      {"kind": "unhealthy", "h_lo": 100, "h_hi": 120}]})");
  CHECK_THROWS_AS(perception_config_from_json(JsonNode(doc, "perception")), ScenarioError);
  const Json ok =
      Json::parse(R"({"ransac": {"iterations": 200, "min_ratio": 0.7}, "min_area": 80, "max_curvature": 5})");
  const PerceptionConfig c = perception_config_from_json(JsonNode(ok, "perception"));
  CHECK(c.ransac.iterations == 200);
  CHECK(c.ransac.min_ratio == 0.7);
  CHECK(c.min_area == 80);
  CHECK(c.max_curvature == 5.0);
  CHECK(c.bands.size() == 3);

  Mask m = blank(4, 2);
  fill(m, 1, 0, 2, 1);
  std::ostringstream os;
  write_mask_pgm(os, m);
  CHECK(os.str() == std::string("P5\n4 2\n255\n") + std::string("\0\xff\xff\0\0\0\0\0", 8));
}
