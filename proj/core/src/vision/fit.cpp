#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "nti/vision/vision.hpp"

namespace nti::vision {

double curvature_at(double a, double b, double x, CurvatureForm form) {
  const double slope = 2.0 * a * x + b;
  if (form == CurvatureForm::kStandard) {
    return 2.0 * std::abs(a) / std::pow(1.0 + slope * slope, 1.5);
  }
  // As printed: the radicand is (1 + 2ax + b)^3, taken in magnitude.
  return 2.0 * std::abs(a) / std::pow(std::abs(1.0 + slope), 1.5);
}

double curvature_score(double a, double b, std::span<const Pixel> points, CurvatureForm form) {
  if (points.empty()) return 1.0;
  double sum = 0.0;
  for (const Pixel& p : points) sum += curvature_at(a, b, p.x, form);
  return 1.0 / (1.0 + sum / static_cast<double>(points.size()));
}

std::optional<CurvatureFit> fit_curvature(std::span<const Point2> points, CurvatureForm form) {
  std::set<double> xs;
  for (const Point2& p : points) xs.insert(p.x);
  if (xs.size() < 3) return std::nullopt;

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = points[static_cast<std::size_t>(i)].x;
    design(i, 0) = x * x;
    design(i, 1) = x;
    design(i, 2) = 1.0;
    rhs(i) = points[static_cast<std::size_t>(i)].y;
  }
  const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(rhs);
  CurvatureFit fit;
  fit.a = coef(0);
  fit.b = coef(1);
  fit.c = coef(2);
  fit.rms = std::sqrt((design * coef - rhs).squaredNorm() / static_cast<double>(n));
  double sum = 0.0;
  for (const Point2& p : points) sum += curvature_at(fit.a, fit.b, p.x, form);
  fit.mean_curvature = sum / static_cast<double>(points.size());
  fit.score = 1.0 / (1.0 + fit.mean_curvature);
  return fit;
}

std::optional<CurvatureFit> fit_curvature(std::span<const Pixel> points, CurvatureForm form) {
  std::vector<Point2> pts;
  pts.reserve(points.size());
  for (const Pixel& p : points) pts.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
  return fit_curvature(std::span<const Point2>(pts), form);
}

std::vector<Point2> refine_centerline(const Skeleton& skeleton, const Mask& mask) {
  std::vector<Point2> out;
  const std::size_t n = skeleton.points.size();
  if (skeleton.extended_front + skeleton.extended_back >= n) return out;
  const double max_run = 3.0 * skeleton.mean_width;
  for (std::size_t i = skeleton.extended_front; i < n - skeleton.extended_back; ++i) {
    const Pixel& p = skeleton.points[i];
    Point2 q{static_cast<double>(p.x), static_cast<double>(p.y)};
    if (mask.set(p.x, p.y)) {
      int top = p.y, bottom = p.y;
      while (mask.set(p.x, top - 1)) --top;
      while (mask.set(p.x, bottom + 1)) ++bottom;
      if (bottom - top + 1 <= max_run) q.y = 0.5 * (top + bottom);
    }
    out.push_back(q);
  }
  return out;
}

PipelineResult run_pipeline(const Image& image, const PipelineConfig& config,
                            const CoarseSegmenter* segmenter) {
  const OtsuSegmenter otsu;
  const CoarseSegmenter& seg = segmenter != nullptr ? *segmenter : otsu;
  PipelineResult r;
  r.coarse = seg.segment(image);
  r.tube_mask = Mask(image.width, image.height);
  const auto components = extract_components(r.coarse, config.area_threshold);
  r.component_count = components.size();
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < components.size(); ++i) {
    Skeleton s = thin_component(components[i], config.filter);
    if (!passes_filter(s, config.filter)) continue;
    r.candidates.push_back(std::move(s));
    owner.push_back(i);
  }
  r.tube = select_tube(r.candidates);
  if (!r.tube) return r;
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    if (r.candidates[i].points == r.tube->points) {
      for (const Pixel& p : components[owner[i]].pixels) r.tube_mask.at(p.x, p.y) = 1;
      break;
    }
  }
  if (config.subpixel_centerline) {
    const std::vector<Point2> centre = refine_centerline(*r.tube, r.tube_mask);
    r.fit = fit_curvature(std::span<const Point2>(centre), config.curvature_form);
  } else {
    r.fit = fit_curvature(r.tube->points, config.curvature_form);
  }
  return r;
}

}  // namespace nti::vision
