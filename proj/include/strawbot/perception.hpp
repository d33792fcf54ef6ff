#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "strawbot/json_util.hpp"
#include "strawbot/sensor.hpp"
#include "strawbot/world.hpp"

namespace strawbot {

struct Hsv {
  double h = 0.0;  // degrees [0, 360); 0 for achromatic pixels
  double s = 0.0;  // [0, 1]
  double v = 0.0;  // [0, 1]
};

Hsv rgb_to_hsv(const Rgb& c);

/// Colour class. Hue wraps when h_lo > h_hi; h_lo = 0, h_hi = 360 admits
/// every hue.
struct HsvBand {
  PartKind kind = PartKind::HealthyLeafCluster;
  double h_lo = 0.0, h_hi = 360.0;
  double s_lo = 0.0, s_hi = 1.0;
  double v_lo = 0.0, v_hi = 1.0;

  bool contains(const Hsv& p) const;
  bool valid() const;
};

/// Two bands can never claim the same pixel: their hue arcs, saturation
/// ranges or value ranges are disjoint.
bool bands_disjoint(const HsvBand& a, const HsvBand& b);

std::vector<HsvBand> default_bands();

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  bool at(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u] != 0; }
  std::size_t count() const;
};

Mask threshold(const RgbdFrame& frame, const HsvBand& band);

struct PixelCoord {
  int u = 0;
  int v = 0;
  bool operator==(const PixelCoord&) const = default;
};

/// 8-connected component with its boundary (component pixels that touch a
/// non-member 4-neighbour or the image edge).
struct Contour {
  std::vector<PixelCoord> pixels;
  std::vector<PixelCoord> boundary;
  int area = 0;
  double cu = 0.0, cv = 0.0;  // centroid
};

/// Components with area >= min_area, largest first; ties by centroid (u, v).
std::vector<Contour> extract_contours(const Mask& mask, int min_area = 50);

struct RansacParams {
  int iterations = 100;
  double inlier_threshold = 0.005;  // metres
  int min_inliers = 50;
  double min_ratio = 0.6;
  std::uint64_t seed = 0;
};

/// Plane n . p = offset, with n oriented toward the origin of the input frame.
struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  int inlier_count = 0;
  double inlier_ratio = 0.0;
  bool accepted = false;
  std::vector<int> inliers;
};

class DegenerateInput : public std::invalid_argument {
 public:
  DegenerateInput() : std::invalid_argument("degenerate input") {}
};

/// Throws DegenerateInput for fewer than 3 points or collinear points.
PlaneFit fit_plane_ransac(const std::vector<Vec3>& points, const RansacParams& params);

struct Curvature {
  double value = 0.0;      // 1/m, largest absolute principal curvature
  double std_error = 0.0;  // 1/m, from the fit residuals
};

/// Quadric w = a x^2 + b xy + c y^2 + d x + e y + f fitted by least squares
/// to `points` in the frame of `plane`. Zero for flat patches, 1/r for a
/// sphere of radius r. Zero with zero error when underdetermined.
Curvature surface_curvature(const std::vector<Vec3>& points, const PlaneFit& plane);

struct Detection {
  PartKind kind = PartKind::HealthyLeafCluster;
  Contour contour;
  PlaneFit plane;
  Vec3 centroid_camera = Vec3::Zero();
  Vec3 centroid_world = Vec3::Zero();
};

struct PerceptionConfig {
  std::vector<HsvBand> bands = default_bands();
  RansacParams ransac;
  int min_area = 50;
  int max_points = 1500;  // per contour, evenly strided subsample fed to RANSAC
  // Curved surfaces can leave most of a small cap inside the inlier slab, so
  // the inliers must also be flat. Rejects when their curvature minus two
  // standard errors exceeds this.
  double max_curvature = 8.0;  // 1/m
};

struct DetectionStats {
  int contours = 0;
  int rejected_nonplanar = 0;  // includes curvature rejections
  int rejected_curved = 0;
  int rejected_no_depth = 0;
};

/// threshold -> contours -> back-projection -> planarity gate, per band.
std::vector<Detection> detect_parts(const RgbdFrame& frame, const PerceptionConfig& config,
                                    DetectionStats* stats = nullptr);

PerceptionConfig perception_config_from_json(const JsonNode& node);
Json to_json(const Detection& d);
void write_mask_pgm(std::ostream& out, const Mask& mask);

}  // namespace strawbot
