#include "strawbot/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace strawbot {

namespace {

const std::string kNoOwner;

// Ray through pixel (u, v) in the optical frame, scaled so that z = 1; the
// hit parameter t is then the depth directly.
Vec3 pixel_ray(int u, int v, const CameraIntrinsics& k) {
  return {(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
}

struct PixelBox {
  int u0, u1, v0, v1;
  bool empty() const { return u0 > u1 || v0 > v1; }
};

// Conservative pixel footprint of a world-frame AABB.
PixelBox footprint(const Transform& world_to_cam, const Vec3& lo, const Vec3& hi, const CameraIntrinsics& k) {
  double umin = std::numeric_limits<double>::infinity(), umax = -umin;
  double vmin = umin, vmax = -umin;
  int behind = 0;
  for (int c = 0; c < 8; ++c) {
    const Vec3 p((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(), (c & 4) ? hi.z() : lo.z());
    const Vec3 q = apply(world_to_cam, p);
    if (q.z() <= 1e-6) {
      ++behind;
      continue;
    }
    const double u = k.fx * q.x() / q.z() + k.cx, v = k.fy * q.y() / q.z() + k.cy;
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  if (behind == 8) return {1, 0, 1, 0};
  if (behind > 0) return {0, k.width - 1, 0, k.height - 1};
  return {std::max(0, static_cast<int>(std::floor(umin)) - 1), std::min(k.width - 1, static_cast<int>(std::ceil(umax)) + 1),
          std::max(0, static_cast<int>(std::floor(vmin)) - 1), std::min(k.height - 1, static_cast<int>(std::ceil(vmax)) + 1)};
}

// z-buffered writes; depth comparisons use full precision.
class Canvas {
 public:
  explicit Canvas(RgbdFrame& f) : f_(f), z_(f.depth.size(), 0.0) {}

  void splat(int u, int v, double t, const Rgb& c, int owner) {
    const std::size_t i = f_.index(u, v);
    if (f_.owner[i] >= 0 && z_[i] <= t) return;
    z_[i] = t;
    f_.depth[i] = static_cast<float>(t);
    f_.owner[i] = owner;
    f_.rgb[3 * i] = c.r;
    f_.rgb[3 * i + 1] = c.g;
    f_.rgb[3 * i + 2] = c.b;
  }

 private:
  RgbdFrame& f_;
  std::vector<double> z_;
};

}  // namespace

const std::string& RgbdFrame::owner_at(int u, int v) const {
  const int o = owner[index(u, v)];
  return o < 0 ? kNoOwner : owner_ids[static_cast<std::size_t>(o)];
}

Pose3 camera_pose(const RobotConfig& config, const RobotState& robot, const MountState& mount) {
  const CameraMount& m = mount.mount == Mount::FrontFixed ? config.front_camera : config.rear_camera;
  Vec3 offset = m.offset;
  if (mount.mount == Mount::RearActuator)
    offset.z() += std::clamp(mount.actuator_extension, 0.0, config.actuator_stroke);
  return compose(compose(Transform::from_pose2(robot.chassis), Transform::from_translation(offset)),
                 body_to_optical(m.pitch));
}

RgbdFrame render(const World& world, const Pose3& pose, const CameraIntrinsics& k, const RenderOptions& opt) {
  if (!k.valid()) throw std::invalid_argument("invalid camera intrinsics");
  RgbdFrame f;
  f.width = k.width;
  f.height = k.height;
  f.intrinsics = k;
  f.camera_pose = pose;
  f.timestamp = world.clock;
  const std::size_t n = static_cast<std::size_t>(k.width) * k.height;
  f.depth.assign(n, 0.0f);
  f.owner.assign(n, -1);
  f.rgb.resize(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    f.rgb[3 * i] = world.arena.backdrop.r;
    f.rgb[3 * i + 1] = world.arena.backdrop.g;
    f.rgb[3 * i + 2] = world.arena.backdrop.b;
  }
  Canvas canvas(f);

  const Transform w2c = invert(pose);
  const Mat3 R = w2c.rotation_matrix();

  // Discs.
  for (const auto& plant : world.plants) {
    for (const auto& part : plant.parts) {
      if (part.trimmed) continue;
      const int id = static_cast<int>(f.owner_ids.size());
      f.owner_ids.push_back(part.id);
      const Vec3 c = apply(w2c, part.center);
      const Vec3 nrm = R * part.surface_normal;
      const double r = part.radius;
      const PixelBox box = footprint(w2c, part.center - Vec3::Constant(r), part.center + Vec3::Constant(r), k);
      if (box.empty()) continue;
      const double nc = nrm.dot(c);
      for (int v = box.v0; v <= box.v1; ++v)
        for (int u = box.u0; u <= box.u1; ++u) {
          const Vec3 d = pixel_ray(u, v, k);
          const double nd = nrm.dot(d);
          if (std::abs(nd) < 1e-12) continue;
          const double t = nc / nd;
          if (t <= 0.0) continue;
          if ((t * d - c).squaredNorm() > r * r) continue;
          canvas.splat(u, v, t, part.color, id);
        }
    }
  }

  // Spheres.
  for (const auto& ball : world.distractors) {
    const int id = static_cast<int>(f.owner_ids.size());
    f.owner_ids.push_back(ball.id);
    const Vec3 c = apply(w2c, ball.center);
    const double r = ball.radius;
    const PixelBox box = footprint(w2c, ball.center - Vec3::Constant(r), ball.center + Vec3::Constant(r), k);
    if (box.empty()) continue;
    for (int v = box.v0; v <= box.v1; ++v)
      for (int u = box.u0; u <= box.u1; ++u) {
        const Vec3 d = pixel_ray(u, v, k);
        const double a = d.squaredNorm(), b = d.dot(c), cc = c.squaredNorm() - r * r;
        const double disc = b * b - a * cc;
        if (disc < 0.0) continue;
        const double sq = std::sqrt(disc);
        double t = (b - sq) / a;
        if (t <= 0.0) t = (b + sq) / a;
        if (t <= 0.0) continue;
        canvas.splat(u, v, t, ball.color, id);
      }
  }

  // Stems: vertical cylinders with a top cap, intersected in the world frame.
  if (opt.draw_stems) {
    const Vec3 origin = pose.translation();
    const Mat3 Rc = pose.rotation_matrix();
    for (const auto& plant : world.plants) {
      const Stem& s = plant.stem;
      const int id = static_cast<int>(f.owner_ids.size());
      f.owner_ids.push_back(plant.id + "/stem");
      const Vec3 lo = s.base - Vec3(s.radius, s.radius, 0), hi = s.base + Vec3(s.radius, s.radius, s.height);
      const PixelBox box = footprint(w2c, lo, hi, k);
      if (box.empty()) continue;
      const double ox = origin.x() - s.base.x(), oy = origin.y() - s.base.y();
      for (int v = box.v0; v <= box.v1; ++v)
        for (int u = box.u0; u <= box.u1; ++u) {
          const Vec3 D = Rc * pixel_ray(u, v, k);  // world direction, camera z component 1
          double best = std::numeric_limits<double>::infinity();
          const double a = D.x() * D.x() + D.y() * D.y();
          if (a > 1e-15) {
            const double b = ox * D.x() + oy * D.y();
            const double c = ox * ox + oy * oy - s.radius * s.radius;
            const double disc = b * b - a * c;
            if (disc >= 0.0) {
              const double sq = std::sqrt(disc);
              for (double t : {(-b - sq) / a, (-b + sq) / a}) {
                const double z = origin.z() + t * D.z() - s.base.z();
                if (t > 0.0 && z >= 0.0 && z <= s.height) {
                  best = std::min(best, t);
                  break;
                }
              }
            }
          }
          if (std::abs(D.z()) > 1e-15) {
            const double t = (s.base.z() + s.height - origin.z()) / D.z();
            const double px = ox + t * D.x(), py = oy + t * D.y();
            if (t > 0.0 && px * px + py * py <= s.radius * s.radius) best = std::min(best, t);
          }
          if (std::isfinite(best)) canvas.splat(u, v, best, s.color, id);
        }
    }
  }

  if (opt.depth_noise_sigma > 0.0) {
    std::mt19937_64 rng(opt.noise_seed);
    std::normal_distribution<double> noise(0.0, opt.depth_noise_sigma);
    for (auto& d : f.depth) {
      if (d <= 0.0f) continue;
      d = static_cast<float>(std::max(1e-4, d + noise(rng)));
    }
  }
  return f;
}

void write_ppm(std::ostream& out, const RgbdFrame& f) {
  out << "P6\n" << f.width << ' ' << f.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
}

void write_depth_pgm(std::ostream& out, const RgbdFrame& f) {
  out << "P5\n" << f.width << ' ' << f.height << "\n65535\n";
  std::vector<char> buf(2 * f.depth.size());
  for (std::size_t i = 0; i < f.depth.size(); ++i) {
    const double mm = std::clamp(std::round(static_cast<double>(f.depth[i]) * 1000.0), 0.0, 65535.0);
    const auto v = static_cast<std::uint16_t>(mm);
    buf[2 * i] = static_cast<char>(v >> 8);
    buf[2 * i + 1] = static_cast<char>(v & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

namespace {

void read_header(std::istream& in, const char* magic, int& w, int& h, int& maxval) {
  std::string m;
  in >> m >> w >> h >> maxval;
  if (!in || m != magic || w <= 0 || h <= 0) throw std::runtime_error(std::string("bad ") + magic + " header");
  in.get();  // single whitespace before the raster
}

}  // namespace

RgbdFrame read_ppm(std::istream& in) {
  RgbdFrame f;
  int maxval = 0;
  read_header(in, "P6", f.width, f.height, maxval);
  if (maxval != 255) throw std::runtime_error("unsupported PPM maxval");
  const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
  f.rgb.resize(3 * n);
  in.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  if (!in) throw std::runtime_error("truncated PPM raster");
  f.depth.assign(n, 0.0f);
  f.owner.assign(n, -1);
  return f;
}

void read_depth_pgm(std::istream& in, RgbdFrame& f) {
  int w = 0, h = 0, maxval = 0;
  read_header(in, "P5", w, h, maxval);
  if (maxval != 65535) throw std::runtime_error("unsupported PGM maxval");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<unsigned char> buf(2 * n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw std::runtime_error("truncated PGM raster");
  f.width = w;
  f.height = h;
  f.depth.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.depth[i] = static_cast<float>(((buf[2 * i] << 8) | buf[2 * i + 1]) / 1000.0);
}

}  // namespace strawbot
