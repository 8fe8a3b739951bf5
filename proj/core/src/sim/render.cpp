#include "nti/sim/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace nti::sim {

PixelPoint to_pixel(const CameraConfig& camera, const Vec2& p) {
  return {(p.x() - camera.x_min) / camera.meters_per_pixel_x() - 0.5,
          (camera.z_max - p.y()) / camera.meters_per_pixel_z() - 0.5};
}

std::vector<PixelPoint> visible_centerline(const CameraConfig& camera, std::span<const Vec2> nodes) {
  std::vector<PixelPoint> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].x() >= camera.occlusion_x) {
      if (i > 0) {
        const Vec2& a = nodes[i - 1];
        const Vec2& b = nodes[i];
        const double s = (camera.occlusion_x - a.x()) / (b.x() - a.x());
        out.push_back(to_pixel(camera, a + s * (b - a)));
      }
      break;
    }
    out.push_back(to_pixel(camera, nodes[i]));
  }
  if (out.size() < 2) out.clear();
  return out;
}

void rasterize_band(std::span<const PixelPoint> polyline, double half_width_px, int width,
                    int height, std::vector<std::uint8_t>& mask) {
  mask.resize(static_cast<std::size_t>(width) * height, 0);
  if (polyline.size() < 2) return;
  const PixelPoint first = polyline.front();
  const PixelPoint second = polyline[1];
  const PixelPoint last = polyline.back();
  const PixelPoint before_last = polyline[polyline.size() - 2];
  // Flat caps: half-planes through both end points, normal to the end segments.
  auto inside_caps = [&](double u, double v) {
    return (u - first.u) * (second.u - first.u) + (v - first.v) * (second.v - first.v) >= 0.0 &&
           (u - last.u) * (last.u - before_last.u) + (v - last.v) * (last.v - before_last.v) <= 0.0;
  };
  for (std::size_t k = 0; k + 1 < polyline.size(); ++k) {
    const PixelPoint a = polyline[k];
    const PixelPoint b = polyline[k + 1];
    const double du = b.u - a.u;
    const double dv = b.v - a.v;
    const double len2 = du * du + dv * dv;
    if (len2 <= 0.0) continue;
    const int u0 = std::max(0, static_cast<int>(std::floor(std::min(a.u, b.u) - half_width_px)));
    const int u1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.u, b.u) + half_width_px)));
    const int v0 = std::max(0, static_cast<int>(std::floor(std::min(a.v, b.v) - half_width_px)));
    const int v1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.v, b.v) + half_width_px)));
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const double t = std::clamp(((u - a.u) * du + (v - a.v) * dv) / len2, 0.0, 1.0);
        const double eu = a.u + t * du - u;
        const double ev = a.v + t * dv - v;
        if (eu * eu + ev * ev <= half_width_px * half_width_px && inside_caps(u, v)) {
          mask[static_cast<std::size_t>(v) * width + u] = 1;
        }
      }
    }
  }
}

namespace {

double distance_to_polyline(std::span<const PixelPoint> line, double u, double v) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < line.size(); ++k) {
    const double du = line[k + 1].u - line[k].u;
    const double dv = line[k + 1].v - line[k].v;
    const double len2 = du * du + dv * dv;
    double t = len2 > 0.0 ? ((u - line[k].u) * du + (v - line[k].v) * dv) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::hypot(line[k].u + t * du - u, line[k].v + t * dv - v));
  }
  return best;
}

}  // namespace

Image render_tube_image(const CameraConfig& camera, std::span<const PixelPoint> centerline,
                        double half_width_px, const RenderOptions& options) {
  const int w = camera.width;
  const int h = camera.height;
  std::mt19937_64 rng(options.noise_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, camera.noise_sigma);

  std::vector<double> level(static_cast<std::size_t>(w) * h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      level[static_cast<std::size_t>(v) * w + u] =
          camera.background + camera.gradient_amplitude * (static_cast<double>(u) / w - 0.5);
    }
  }

  for (int d = 0; d < camera.distractor_count; ++d) {
    const double r = camera.distractor_radius_min +
                     (camera.distractor_radius_max - camera.distractor_radius_min) * unit(rng);
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double cu = unit(rng) * (w - 1);
      const double cv = unit(rng) * (h - 1);
      if (!centerline.empty() &&
          distance_to_polyline(centerline, cu, cv) < half_width_px + r + camera.distractor_clearance) {
        continue;
      }
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          if (std::hypot(u - cu, v - cv) <= r) {
            level[static_cast<std::size_t>(v) * w + u] = camera.distractor_intensity;
          }
        }
      }
      break;
    }
  }

  std::vector<std::uint8_t> mask;
  rasterize_band(centerline, half_width_px, w, h, mask);
  Image img(w, h);
  for (std::size_t i = 0; i < level.size(); ++i) {
    const double base = mask[i] ? camera.tube_intensity : level[i];
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(base + noise(rng)), 0L, 255L));
  }
  return img;
}

}  // namespace nti::sim
