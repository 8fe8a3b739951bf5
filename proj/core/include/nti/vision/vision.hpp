#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nti/imaging/image.hpp"

namespace nti::vision {

struct Pixel {
  int x = 0;  // column
  int y = 0;  // row

  bool operator==(const Pixel&) const = default;
};

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // 0 or 1

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool set(int x, int y) const { return contains(x, y) && at(x, y) != 0; }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;
};

// Coarse segmentation stage; the default thresholds bright pixels, a learned model can replace it.
class CoarseSegmenter {
 public:
  virtual ~CoarseSegmenter() = default;
  virtual Mask segment(const Image& image) const = 0;
};

// Otsu threshold over the 8-bit histogram; pixels strictly above it are foreground.
int otsu_threshold(const Image& image);

class OtsuSegmenter final : public CoarseSegmenter {
 public:
  // Histograms whose classes are closer than `min_contrast` grey levels give an empty mask.
  explicit OtsuSegmenter(int min_contrast = 40) : min_contrast_(min_contrast) {}
  Mask segment(const Image& image) const override;

 private:
  int min_contrast_;
};

Mask segment_coarse(const Image& image);

struct Component {
  std::vector<Pixel> pixels;  // raster order
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  std::size_t area() const { return pixels.size(); }
};

// 4-connected labelling; components with area <= area_threshold are dropped.
std::vector<Component> extract_components(const Mask& mask, std::size_t area_threshold);

struct SkeletonFilter {
  double min_width = 3.0;    // px, mean width of the parent component
  double max_width = 12.0;
  double min_length = 20.0;  // px
  double max_length = 200.0;
  int spur_length = 6;       // px; shorter end branches are pruned before topology checks
  bool extend_to_edge = true;  // grow end points along the local direction to the component edge
};

struct Skeleton {
  std::vector<Pixel> points;  // ordered end to end when the topology is a simple curve
  int endpoints = 0;
  int junctions = 0;
  double mean_width = 0.0;  // component area / skeleton pixel count
  double length = 0.0;      // polyline length of the ordered points, px
  // Points appended at each end by extend_to_edge; they follow a straight line.
  std::size_t extended_front = 0, extended_back = 0;

  double mean_x() const;
};

// Zhang-Suen thinning of one component plus staircase cleanup and spur pruning.
Skeleton thin_component(const Component& component, const SkeletonFilter& filter = {});

bool passes_filter(const Skeleton& skeleton, const SkeletonFilter& filter);

std::vector<Skeleton> thin_and_filter(std::span<const Component> components,
                                      const SkeletonFilter& filter = {});

// Largest mean x, then longer length. Empty when there is no candidate.
std::optional<Skeleton> select_tube(std::span<const Skeleton> candidates);

enum class CurvatureForm { kStandard, kPrinted };

struct CurvatureFit {
  double a = 0.0, b = 0.0, c = 0.0;  // y = a x^2 + b x + c, pixel units
  double rms = 0.0;                   // px
  double mean_curvature = 0.0;        // 1/px
  double score = 1.0;                 // 1 / (1 + mean curvature)
};

double curvature_at(double a, double b, double x, CurvatureForm form);
// 1 / (1 + mean curvature of y = a x^2 + b x + c over the x coordinates of `points`).
double curvature_score(double a, double b, std::span<const Pixel> points, CurvatureForm form);

struct Point2 {
  double x = 0.0, y = 0.0;
};

// Least-squares quadratic through the points. Empty when fewer than 3 distinct x values.
std::optional<CurvatureFit> fit_curvature(std::span<const Point2> points,
                                          CurvatureForm form = CurvatureForm::kStandard);
std::optional<CurvatureFit> fit_curvature(std::span<const Pixel> points,
                                          CurvatureForm form = CurvatureForm::kStandard);

// Thinned skeleton points (end extensions excluded), each moved to the midpoint of the vertical
// run of `mask` through it. Runs longer than 3 mean widths keep the pixel centre.
std::vector<Point2> refine_centerline(const Skeleton& skeleton, const Mask& mask);

struct PipelineConfig {
  std::size_t area_threshold = 20;
  SkeletonFilter filter;
  CurvatureForm curvature_form = CurvatureForm::kStandard;
  bool subpixel_centerline = true;  // fit refine_centerline() instead of the raw skeleton pixels
};

struct PipelineResult {
  Mask coarse;
  Mask tube_mask;  // pixels of the selected component only
  std::size_t component_count = 0;
  std::vector<Skeleton> candidates;
  std::optional<Skeleton> tube;
  std::optional<CurvatureFit> fit;

  // s_kappa of the selected tube; 1 (straight) when nothing was detected.
  double score() const { return fit ? fit->score : 1.0; }
};

PipelineResult run_pipeline(const Image& image, const PipelineConfig& config = {},
                            const CoarseSegmenter* segmenter = nullptr);

}  // namespace nti::vision
