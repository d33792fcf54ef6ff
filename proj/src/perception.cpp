#include "strawbot/perception.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <spdlog/spdlog.h>

namespace strawbot {

Hsv rgb_to_hsv(const Rgb& c) {
  const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) return out;
  double h;
  if (mx == r)
    h = 60.0 * std::fmod((g - b) / delta, 6.0);
  else if (mx == g)
    h = 60.0 * ((b - r) / delta + 2.0);
  else
    h = 60.0 * ((r - g) / delta + 4.0);
  if (h < 0.0) h += 360.0;
  out.h = h >= 360.0 ? h - 360.0 : h;
  return out;
}

namespace {

bool full_hue(const HsvBand& b) { return b.h_lo <= 0.0 && b.h_hi >= 360.0; }

bool in_arc(double h, double lo, double hi) { return lo <= hi ? (h >= lo && h <= hi) : (h >= lo || h <= hi); }

// Hue arcs as a list of non-wrapping [lo, hi] pieces.
std::vector<std::pair<double, double>> arcs(const HsvBand& b) {
  if (full_hue(b)) return {{0.0, 360.0}};
  if (b.h_lo <= b.h_hi) return {{b.h_lo, b.h_hi}};
  return {{b.h_lo, 360.0}, {0.0, b.h_hi}};
}

bool ranges_disjoint(double a0, double a1, double b0, double b1) { return a1 < b0 || b1 < a0; }

}  // namespace

bool HsvBand::contains(const Hsv& p) const {
  if (p.s < s_lo || p.s > s_hi || p.v < v_lo || p.v > v_hi) return false;
  return full_hue(*this) || in_arc(p.h, h_lo, h_hi);
}

bool HsvBand::valid() const {
  return h_lo >= 0.0 && h_lo <= 360.0 && h_hi >= 0.0 && h_hi <= 360.0 && s_lo >= 0.0 && s_lo <= s_hi &&
         s_hi <= 1.0 && v_lo >= 0.0 && v_lo <= v_hi && v_hi <= 1.0;
}

bool bands_disjoint(const HsvBand& a, const HsvBand& b) {
  if (ranges_disjoint(a.s_lo, a.s_hi, b.s_lo, b.s_hi)) return true;
  if (ranges_disjoint(a.v_lo, a.v_hi, b.v_lo, b.v_hi)) return true;
  for (const auto& [a0, a1] : arcs(a))
    for (const auto& [b0, b1] : arcs(b))
      if (!ranges_disjoint(a0, a1, b0, b1)) return false;
  return true;
}

std::vector<HsvBand> default_bands() {
  return {
      {PartKind::HealthyLeafCluster, 90.0, 150.0, 0.3, 1.0, 0.2, 1.0},
      {PartKind::UnhealthyLeafCluster, 40.0, 70.0, 0.4, 1.0, 0.3, 1.0},
      {PartKind::Flower, 0.0, 360.0, 0.0, 0.15, 0.85, 1.0},
  };
}

std::size_t Mask::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

Mask threshold(const RgbdFrame& f, const HsvBand& band) {
  Mask m{f.width, f.height, std::vector<std::uint8_t>(static_cast<std::size_t>(f.width) * f.height, 0)};
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    const Rgb c{f.rgb[3 * i], f.rgb[3 * i + 1], f.rgb[3 * i + 2]};
    m.bits[i] = band.contains(rgb_to_hsv(c)) ? 1 : 0;
  }
  return m;
}

std::vector<Contour> extract_contours(const Mask& mask, int min_area) {
  const int W = mask.width, H = mask.height;
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::vector<Contour> out;
  std::vector<PixelCoord> stack;
  auto member = [&](int u, int v) { return u >= 0 && v >= 0 && u < W && v < H && mask.at(u, v); };
  for (int v0 = 0; v0 < H; ++v0)
    for (int u0 = 0; u0 < W; ++u0) {
      const std::size_t i0 = static_cast<std::size_t>(v0) * W + u0;
      if (!mask.bits[i0] || seen[i0]) continue;
      Contour c;
      seen[i0] = 1;
      stack.push_back({u0, v0});
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        c.pixels.push_back(p);
        for (int dv = -1; dv <= 1; ++dv)
          for (int du = -1; du <= 1; ++du) {
            const int u = p.u + du, v = p.v + dv;
            if ((du || dv) && member(u, v)) {
              const std::size_t j = static_cast<std::size_t>(v) * W + u;
              if (!seen[j]) {
                seen[j] = 1;
                stack.push_back({u, v});
              }
            }
          }
      }
      c.area = static_cast<int>(c.pixels.size());
      if (c.area < min_area) continue;
      std::sort(c.pixels.begin(), c.pixels.end(),
                [](const PixelCoord& a, const PixelCoord& b) { return a.v != b.v ? a.v < b.v : a.u < b.u; });
      double su = 0, sv = 0;
      for (const auto& p : c.pixels) {
        su += p.u;
        sv += p.v;
        if (!member(p.u - 1, p.v) || !member(p.u + 1, p.v) || !member(p.u, p.v - 1) || !member(p.u, p.v + 1))
          c.boundary.push_back(p);
      }
      c.cu = su / c.area;
      c.cv = sv / c.area;
      out.push_back(std::move(c));
    }
  std::stable_sort(out.begin(), out.end(), [](const Contour& a, const Contour& b) {
    if (a.area != b.area) return a.area > b.area;
    if (a.cu != b.cu) return a.cu < b.cu;
    return a.cv < b.cv;
  });
  return out;
}

namespace {

// Least-squares plane through points[idx]: normal = smallest singular vector.
std::pair<Vec3, double> lsq_plane(const std::vector<Vec3>& pts, const std::vector<int>& idx, double* second_sv = nullptr,
                                  double* first_sv = nullptr) {
  Vec3 mean = Vec3::Zero();
  for (int i : idx) mean += pts[static_cast<std::size_t>(i)];
  mean /= static_cast<double>(idx.size());
  Eigen::MatrixXd A(idx.size(), 3);
  for (std::size_t r = 0; r < idx.size(); ++r) A.row(static_cast<Eigen::Index>(r)) = (pts[static_cast<std::size_t>(idx[r])] - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
  if (second_sv) *second_sv = svd.singularValues()(1);
  if (first_sv) *first_sv = svd.singularValues()(0);
  const Vec3 n = svd.matrixV().col(2).normalized();
  return {n, n.dot(mean)};
}

std::vector<int> inliers_of(const std::vector<Vec3>& pts, const Vec3& n, double d, double thr) {
  std::vector<int> in;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (std::abs(n.dot(pts[i]) - d) <= thr) in.push_back(static_cast<int>(i));
  return in;
}

}  // namespace

PlaneFit fit_plane_ransac(const std::vector<Vec3>& pts, const RansacParams& params) {
  if (pts.size() < 3) throw DegenerateInput();
  {
    std::vector<int> all(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) all[i] = static_cast<int>(i);
    double s1 = 0, s2 = 0;
    lsq_plane(pts, all, &s2, &s1);
    if (!(s1 > 0.0) || s2 <= 1e-9 * s1) throw DegenerateInput();
  }

  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  std::vector<int> best;
  for (int it = 0; it < params.iterations; ++it) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    const Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    const double len = n.norm();
    if (len < 1e-12) continue;
    const Vec3 nn = n / len;
    std::vector<int> in = inliers_of(pts, nn, nn.dot(pts[a]), params.inlier_threshold);
    if (in.size() > best.size()) best = std::move(in);
  }

  PlaneFit fit;
  if (best.size() < 3) return fit;
  auto [n, d] = lsq_plane(pts, best);
  std::vector<int> refined = inliers_of(pts, n, d, params.inlier_threshold);
  if (refined.size() >= best.size()) {
    best = std::move(refined);
    std::tie(n, d) = lsq_plane(pts, best);
  }
  if (d > 0.0) {  // face the origin of the input frame
    n = -n;
    d = -d;
  }
  fit.normal = n;
  fit.offset = d;
  fit.inlier_count = static_cast<int>(best.size());
  fit.inlier_ratio = static_cast<double>(best.size()) / static_cast<double>(pts.size());
  fit.accepted = fit.inlier_count >= params.min_inliers && fit.inlier_ratio >= params.min_ratio;
  fit.inliers = std::move(best);
  return fit;
}

Curvature surface_curvature(const std::vector<Vec3>& pts, const PlaneFit& plane) {
  if (pts.size() < 8) return {};
  const Vec3 n = plane.normal.normalized();
  const Vec3 ex = n.unitOrthogonal();
  const Vec3 ey = n.cross(ex);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::MatrixXd a(pts.size(), 6);
  Eigen::VectorXd w(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 q = pts[i] - mean;
    const double x = q.dot(ex), y = q.dot(ey);
    a.row(static_cast<Eigen::Index>(i)) << x * x, x * y, y * y, x, y, 1.0;
    w(static_cast<Eigen::Index>(i)) = q.dot(n);
  }
  const auto qr = a.colPivHouseholderQr();
  if (qr.rank() < 6) return {};
  const Eigen::VectorXd c = qr.solve(w);
  Eigen::Matrix2d h;
  h << 2.0 * c(0), c(1), c(1), 2.0 * c(2);
  Curvature k;
  k.value = h.selfadjointView<Eigen::Lower>().eigenvalues().cwiseAbs().maxCoeff();
  // Coefficient covariance s^2 (A^T A)^-1; the Hessian entries scale a, b, c
  // by 2, 1, 2, and the largest entry variance bounds the eigenvalue's.
  const double dof = static_cast<double>(pts.size()) - 6.0;
  const double s2 = (a * c - w).squaredNorm() / dof;
  const Eigen::Matrix<double, 6, 6> ata = a.transpose() * a;
  const Eigen::Matrix<double, 6, 6> cov = s2 * ata.inverse();
  const double var = std::max({4.0 * cov(0, 0), cov(1, 1), 4.0 * cov(2, 2)});
  k.std_error = std::sqrt(std::max(var, 0.0));
  return k;
}

std::vector<Detection> detect_parts(const RgbdFrame& frame, const PerceptionConfig& cfg, DetectionStats* stats) {
  DetectionStats local;
  std::vector<Detection> out;
  int contour_index = 0;
  for (const auto& band : cfg.bands) {
    for (auto& contour : extract_contours(threshold(frame, band), cfg.min_area)) {
      ++local.contours;
      std::vector<PixelCoord> valid;
      for (const auto& p : contour.pixels)
        if (frame.depth_at(p.u, p.v) > 0.0f) valid.push_back(p);
      if (static_cast<int>(valid.size()) < std::max(3, cfg.ransac.min_inliers)) {
        ++local.rejected_no_depth;
        ++contour_index;
        continue;
      }
      const std::size_t stride = std::max<std::size_t>(1, (valid.size() + cfg.max_points - 1) / cfg.max_points);
      std::vector<Vec3> pts;
      for (std::size_t i = 0; i < valid.size(); i += stride) {
        const auto& p = valid[i];
        pts.push_back(back_project({double(p.u), double(p.v)}, frame.depth_at(p.u, p.v), frame.intrinsics));
      }
      RansacParams rp = cfg.ransac;
      rp.seed = cfg.ransac.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(++contour_index);
      PlaneFit fit;
      try {
        fit = fit_plane_ransac(pts, rp);
      } catch (const DegenerateInput&) {
        ++local.rejected_nonplanar;
        continue;
      }
      if (!fit.accepted) {
        ++local.rejected_nonplanar;
        continue;
      }
      std::vector<Vec3> on_plane;
      on_plane.reserve(fit.inliers.size());
      for (int i : fit.inliers) on_plane.push_back(pts[static_cast<std::size_t>(i)]);
      if (const Curvature k = surface_curvature(on_plane, fit); k.value - 2.0 * k.std_error > cfg.max_curvature) {
        spdlog::debug("curved {} contour rejected: area {} curvature {:.2f} se {:.2f} ratio {:.3f}", to_string(band.kind),
                      contour.area, k.value, k.std_error, fit.inlier_ratio);
        ++local.rejected_nonplanar;
        ++local.rejected_curved;
        continue;
      }
      Detection d;
      d.kind = band.kind;
      for (int i : fit.inliers) d.centroid_camera += pts[static_cast<std::size_t>(i)];
      d.centroid_camera /= static_cast<double>(fit.inliers.size());
      d.centroid_world = apply(frame.camera_pose, d.centroid_camera);
      d.plane = std::move(fit);
      d.contour = std::move(contour);
      out.push_back(std::move(d));
    }
  }
  if (stats) *stats = local;
  return out;
}

PerceptionConfig perception_config_from_json(const JsonNode& n) {
  PerceptionConfig c;
  if (auto bands = n.find("bands")) {
    c.bands.clear();
    for (std::size_t i = 0; i < bands->size(); ++i) {
      const JsonNode b = bands->at(i);
      HsvBand band;
      try {
        band.kind = part_kind_from_string(b.at("kind").string());
      } catch (const std::invalid_argument& e) {
        b.at("kind").fail(e.what());
      }
      band.h_lo = b.number_or("h_lo", band.h_lo);
      band.h_hi = b.number_or("h_hi", band.h_hi);
      band.s_lo = b.number_or("s_lo", band.s_lo);
      band.s_hi = b.number_or("s_hi", band.s_hi);
      band.v_lo = b.number_or("v_lo", band.v_lo);
      band.v_hi = b.number_or("v_hi", band.v_hi);
      if (!band.valid()) b.fail("invalid HSV band");
      for (const auto& other : c.bands)
        if (!bands_disjoint(band, other)) b.fail("band overlaps an earlier band");
      c.bands.push_back(band);
    }
  }
  if (auto r = n.find("ransac")) {
    c.ransac.iterations = static_cast<int>(r->integer_or("iterations", c.ransac.iterations));
    c.ransac.inlier_threshold = r->positive_or("inlier_threshold_m", c.ransac.inlier_threshold);
    c.ransac.min_inliers = static_cast<int>(r->integer_or("min_inliers", c.ransac.min_inliers));
    c.ransac.min_ratio = r->number_or("min_ratio", c.ransac.min_ratio);
    if (c.ransac.iterations <= 0 || c.ransac.min_inliers < 3 || c.ransac.min_ratio < 0 || c.ransac.min_ratio > 1)
      r->fail("invalid RANSAC parameters");
  }
  c.min_area = static_cast<int>(n.integer_or("min_area", c.min_area));
  c.max_curvature = n.positive_or("max_curvature", c.max_curvature);
  return c;
}

Json to_json(const Detection& d) {
  return {{"kind", to_string(d.kind)},
          {"area", d.contour.area},
          {"centroid_px", {d.contour.cu, d.contour.cv}},
          {"inliers", d.plane.inlier_count},
          {"inlier_ratio", d.plane.inlier_ratio},
          {"normal", to_json(d.plane.normal)},
          {"centroid_camera", to_json(d.centroid_camera)},
          {"centroid_world", to_json(d.centroid_world)}};
}

void write_mask_pgm(std::ostream& out, const Mask& m) {
  out << "P5\n" << m.width << ' ' << m.height << "\n255\n";
  for (auto b : m.bits) out.put(b ? static_cast<char>(255) : 0);
}

}  // namespace strawbot
