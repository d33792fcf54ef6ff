#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "strawbot/camera.hpp"
#include "strawbot/world.hpp"

namespace strawbot {

enum class Mount { FrontFixed, RearActuator };

struct MountState {
  Mount mount = Mount::RearActuator;
  double actuator_extension = 0.0;
};

/// World pose of the optical frame (x right, y down, z forward). The rear
/// camera rides the actuator, so its height grows with the extension.
Pose3 camera_pose(const RobotConfig& config, const RobotState& robot, const MountState& mount);

/// Colour + depth image. Depth is the optical-frame z in metres, 0 where
/// nothing was hit. `owner` holds, per pixel, an index into `owner_ids`
/// (or -1 for background) so tests can compare against exact coverage.
struct RgbdFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
  std::vector<float> depth;
  std::vector<std::int32_t> owner;
  std::vector<std::string> owner_ids;
  Pose3 camera_pose;
  CameraIntrinsics intrinsics;
  double timestamp = 0.0;

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  Rgb color_at(int u, int v) const {
    const std::size_t i = 3 * index(u, v);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  float depth_at(int u, int v) const { return depth[index(u, v)]; }
  /// Owner id at a pixel, "" for background.
  const std::string& owner_at(int u, int v) const;
};

struct RenderOptions {
  double depth_noise_sigma = 0.0;  // metres; 0 disables noise
  std::uint64_t noise_seed = 0;
  bool draw_stems = true;
};

/// Ray-casts untrimmed plant parts (discs), distractors (spheres) and stems
/// (capped cylinders) with a z-buffer. Pure function of its inputs.
RgbdFrame render(const World& world, const Pose3& camera_pose, const CameraIntrinsics& intrinsics,
                 const RenderOptions& options = {});

/// Binary PPM (P6, maxval 255).
void write_ppm(std::ostream& out, const RgbdFrame& frame);
/// Binary PGM (P5, maxval 65535), depth in whole millimetres, big-endian,
/// saturating at 65535.
void write_depth_pgm(std::ostream& out, const RgbdFrame& frame);
/// Reads back a P6 image written by write_ppm.
RgbdFrame read_ppm(std::istream& in);
/// Reads back a 16-bit P5 depth image as metres into `frame.depth`.
void read_depth_pgm(std::istream& in, RgbdFrame& frame);

}  // namespace strawbot
