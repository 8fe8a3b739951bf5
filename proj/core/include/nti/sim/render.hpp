#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nti/imaging/image.hpp"
#include "nti/sim/config.hpp"

namespace nti::sim {

// Continuous pixel coordinates: (0, 0) is the centre of the top-left pixel.
struct PixelPoint {
  double u = 0.0;  // column
  double v = 0.0;  // row
};

PixelPoint to_pixel(const CameraConfig& camera, const Vec2& p);

// Tube centerline portion in front of the occlusion plane, in pixel coordinates,
// clipped at the plane. Empty when fully inserted.
std::vector<PixelPoint> visible_centerline(const CameraConfig& camera, std::span<const Vec2> nodes);

// Rasterises a thick polyline into `mask` (value 1 on the band). The ends are cut flat by
// half-planes normal to the first and last segments.
void rasterize_band(std::span<const PixelPoint> polyline, double half_width_px, int width,
                    int height, std::vector<std::uint8_t>& mask);

struct RenderOptions {
  std::uint64_t noise_seed = 0;
};

// Bright tube on a dark background with distractor blobs and illumination noise.
Image render_tube_image(const CameraConfig& camera, std::span<const PixelPoint> centerline,
                        double half_width_px, const RenderOptions& options);

}  // namespace nti::sim
