#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "nti/sim/simulator.hpp"
#include "nti/vision/vision.hpp"
#include "support/frames.hpp"

namespace nti::vision {
namespace {

Mask mask_from(const std::vector<std::string>& rows) {
  Mask m(static_cast<int>(rows.front().size()), static_cast<int>(rows.size()));
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) m.at(x, y) = rows[y][x] == '#' ? 1 : 0;
  }
  return m;
}

Component component_of(const Mask& m) {
  auto comps = extract_components(m, 0);
  EXPECT_EQ(comps.size(), 1u);
  return comps.front();
}

Mask filled_rect(int w, int h, int x0, int y0, int x1, int y1) {
  Mask m(w, h);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) m.at(x, y) = 1;
  }
  return m;
}

void stamp_disc(Mask& m, double cx, double cy, double r) {
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (std::hypot(x - cx, y - cy) <= r) m.at(x, y) = 1;
    }
  }
}

void stamp_segment(Mask& m, double ax, double ay, double bx, double by, double r) {
  for (int s = 0; s <= 200; ++s) {
    const double t = s / 200.0;
    stamp_disc(m, ax + t * (bx - ax), ay + t * (by - ay), r);
  }
}

Image quiet_render(const std::vector<sim::PixelPoint>& line, double half_width) {
  sim::CameraConfig cam;
  cam.distractor_count = 0;
  cam.noise_sigma = 0.0;
  cam.gradient_amplitude = 0.0;
  return sim::render_tube_image(cam, line, half_width, {0});
}

std::vector<sim::PixelPoint> parabola(double a, double u0, double u1, double uc, double vc) {
  std::vector<sim::PixelPoint> line;
  for (double u = u0; u <= u1 + 1e-9; u += 1.0) line.push_back({u, vc + a * (u - uc) * (u - uc)});
  return line;
}

Skeleton skeleton_at(double mean_x_target, double length, int offset_y) {
  Skeleton s;
  const int n = static_cast<int>(length) + 1;
  for (int i = 0; i < n; ++i) {
    s.points.push_back({static_cast<int>(mean_x_target) - n / 2 + i, offset_y});
  }
  s.length = length;
  s.endpoints = 2;
  return s;
}

TEST(Segment, AllDarkImageGivesEmptyMask) {
  Image dark(64, 64, 20);
  for (std::size_t i = 0; i < dark.pixels.size(); ++i) dark.pixels[i] = 15 + (i * 7919 % 13);
  EXPECT_EQ(segment_coarse(dark).count(), 0u);
  EXPECT_EQ(segment_coarse(Image(32, 32, 0)).count(), 0u);
}

TEST(Segment, RenderedTubeCoverage) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto frame = nti::testing::random_frame(seed);
    std::vector<std::uint8_t> truth;
    sim::rasterize_band(frame.centerline, frame.half_width, 128, 128, truth);
    const Mask m = segment_coarse(frame.image);
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (!truth[i]) continue;
      ++total;
      hit += m.data[i];
    }
    EXPECT_GE(static_cast<double>(hit), 0.95 * static_cast<double>(total)) << seed;
  }
}

TEST(Segment, DistractorSurvivesCoarseStage) {
  sim::CameraConfig cam;
  cam.distractor_count = 0;
  Image img = sim::render_tube_image(cam, parabola(0.0, 10, 127.5, 60, 40), 3.0, {1});
  for (int y = 95; y < 102; ++y) {
    for (int x = 30; x < 37; ++x) img.at(x, y) = 200;
  }
  const Mask m = segment_coarse(img);
  EXPECT_TRUE(m.at(33, 98));
  EXPECT_TRUE(m.at(60, 40));
}

TEST(Components, DiagonalTouchIsTwoComponents) {
  const Mask m = mask_from({"##...", "##...", "..##.", "..##.", "....."});
  const auto comps = extract_components(m, 0);
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0].area(), 4u);
  EXPECT_EQ(comps[1].area(), 4u);
}

TEST(Components, AreaEqualToThresholdIsRemoved) {
  const Mask m = mask_from({"###.....", "###.....", "......##", "......##"});
  EXPECT_EQ(extract_components(m, 6).size(), 0u);
  EXPECT_EQ(extract_components(m, 5).size(), 1u);
  EXPECT_EQ(extract_components(m, 3).size(), 2u);
}

TEST(Components, SingleBlobAreaPreserved) {
  const Mask m = filled_rect(40, 30, 5, 5, 24, 14);
  const auto comps = extract_components(m, 10);
  ASSERT_EQ(comps.size(), 1u);
  EXPECT_EQ(comps[0].area(), 200u);
  EXPECT_EQ(comps[0].min_x, 5);
  EXPECT_EQ(comps[0].max_y, 14);
}

TEST(Thinning, LongRectangleIsSimpleCurve) {
  const Mask m = filled_rect(80, 30, 5, 10, 64, 16);
  const auto skeletons = thin_and_filter(extract_components(m, 0));
  ASSERT_EQ(skeletons.size(), 1u);
  const Skeleton& s = skeletons.front();
  EXPECT_EQ(s.endpoints, 2);
  EXPECT_EQ(s.junctions, 0);
  EXPECT_NEAR(s.mean_width, 7.0, 0.5);
  EXPECT_EQ(s.points.front().x, 5);
  EXPECT_EQ(s.points.back().x, 64);
  for (const Pixel& p : s.points) EXPECT_EQ(p.y, 13);
}

TEST(Thinning, SkeletonIsThinAndOrdered) {
  Mask m(100, 100);
  stamp_segment(m, 10, 20, 50, 60, 3.5);
  stamp_segment(m, 50, 60, 90, 40, 3.5);
  const Skeleton s = thin_component(component_of(m));
  ASSERT_EQ(s.endpoints, 2);
  ASSERT_EQ(s.junctions, 0);
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    EXPECT_LE(std::abs(s.points[i].x - s.points[i - 1].x), 1);
    EXPECT_LE(std::abs(s.points[i].y - s.points[i - 1].y), 1);
  }
}

TEST(Thinning, YShapeRejected) {
  Mask m(100, 100);
  stamp_segment(m, 50, 50, 50, 90, 2.5);
  stamp_segment(m, 50, 50, 20, 15, 2.5);
  stamp_segment(m, 50, 50, 80, 15, 2.5);
  const Skeleton s = thin_component(component_of(m));
  EXPECT_EQ(s.junctions, 1);
  EXPECT_EQ(s.endpoints, 3);
  EXPECT_FALSE(passes_filter(s, {}));
}

TEST(Thinning, RingRejected) {
  Mask m(80, 80);
  for (int y = 0; y < 80; ++y) {
    for (int x = 0; x < 80; ++x) {
      const double r = std::hypot(x - 40, y - 40);
      if (r >= 20 && r <= 25) m.at(x, y) = 1;
    }
  }
  const Skeleton s = thin_component(component_of(m));
  EXPECT_EQ(s.endpoints, 0);
  EXPECT_FALSE(passes_filter(s, {}));
}

TEST(Thinning, WidthAndLengthBounds) {
  const auto thick = thin_and_filter(extract_components(filled_rect(120, 60, 5, 5, 100, 40), 0));
  EXPECT_TRUE(thick.empty());
  const auto shorty = thin_and_filter(extract_components(filled_rect(60, 30, 5, 10, 18, 15), 0));
  EXPECT_TRUE(shorty.empty());
}

TEST(Select, LargestMeanX) {
  const std::vector<Skeleton> c{skeleton_at(40, 30, 5), skeleton_at(90, 30, 20)};
  ASSERT_TRUE(select_tube(c).has_value());
  EXPECT_DOUBLE_EQ(select_tube(c)->mean_x(), 90.0);
}

TEST(Select, SingleAndEmpty) {
  const std::vector<Skeleton> one{skeleton_at(40, 30, 5)};
  EXPECT_EQ(select_tube(one)->points, one[0].points);
  EXPECT_FALSE(select_tube(std::vector<Skeleton>{}).has_value());
}

TEST(Select, TieBrokenByLength) {
  const std::vector<Skeleton> c{skeleton_at(60, 30, 5), skeleton_at(60, 60, 20)};
  ASSERT_DOUBLE_EQ(c[0].mean_x(), c[1].mean_x());
  EXPECT_DOUBLE_EQ(select_tube(c)->length, 60.0);
}

TEST(Select, PermutationInvariant) {
  std::vector<Skeleton> c{skeleton_at(60, 30, 5), skeleton_at(60, 60, 20), skeleton_at(61, 20, 9),
                          skeleton_at(61, 20, 30), skeleton_at(10, 80, 2)};
  const auto reference = select_tube(c)->points;
  std::sort(c.begin(), c.end(), [](const Skeleton& a, const Skeleton& b) { return a.points.front().y < b.points.front().y; });
  do {
    EXPECT_EQ(select_tube(c)->points, reference);
  } while (std::next_permutation(c.begin(), c.end(), [](const Skeleton& a, const Skeleton& b) {
    return a.points.front().y < b.points.front().y;
  }));
}

TEST(Curvature, CollinearIsStraight) {
  for (int slope : {0, 1, -2}) {
    std::vector<Pixel> pts;
    for (int x = 0; x < 50; ++x) pts.push_back({x, 13 + slope * x});
    const auto fit = fit_curvature(pts);
    ASSERT_TRUE(fit.has_value());
    EXPECT_NEAR(fit->a, 0.0, 1e-12);
    EXPECT_NEAR(fit->mean_curvature, 0.0, 1e-12);
    EXPECT_NEAR(fit->score, 1.0, 1e-12);
  }
}

TEST(Curvature, HandEvaluatedPoint) {
  const std::vector<Pixel> p{{0, 0}};
  EXPECT_DOUBLE_EQ(curvature_at(0.5, 0.0, 0.0, CurvatureForm::kStandard), 1.0);
  EXPECT_DOUBLE_EQ(curvature_score(0.5, 0.0, p, CurvatureForm::kStandard), 0.5);
}

TEST(Curvature, PrintedFormMatchesOnlyWhereSlopeIsZeroOrOne) {
  const double a = 0.01;
  for (double slope : {0.0, 1.0}) {
    const double x = (slope - 0.3) / (2 * a);
    EXPECT_NEAR(curvature_at(a, 0.3, x, CurvatureForm::kPrinted),
                curvature_at(a, 0.3, x, CurvatureForm::kStandard), 1e-15);
  }
  const double x = (2.0 - 0.3) / (2 * a);
  EXPECT_NEAR(curvature_at(a, 0.3, x, CurvatureForm::kStandard), 2 * a / std::pow(5.0, 1.5), 1e-15);
  EXPECT_NEAR(curvature_at(a, 0.3, x, CurvatureForm::kPrinted), 2 * a / std::pow(3.0, 1.5), 1e-15);
}

TEST(Curvature, VerticalPointSetIsDegenerate) {
  const std::vector<Pixel> pts{{5, 0}, {5, 1}, {5, 2}, {6, 3}, {6, 4}};
  EXPECT_FALSE(fit_curvature(pts).has_value());
}

TEST(Curvature, RenderedParabolaRecovered) {
  const double a = 0.002;
  const auto line = parabola(a, 14, 114, 64, 40);
  const PipelineResult r = run_pipeline(quiet_render(line, 3.0));
  ASSERT_TRUE(r.fit.has_value());
  EXPECT_NEAR(r.fit->a, a, 0.1 * a);
}

TEST(Curvature, ScoreStrictlyDecreasingInCurvature) {
  double previous = 2.0;
  for (double a : {0.0, 0.001, 0.002, 0.003, 0.004, 0.005, 0.006}) {
    const PipelineResult r = run_pipeline(quiet_render(parabola(-a, 14, 114, 64, 90), 3.0));
    ASSERT_TRUE(r.fit.has_value()) << a;
    EXPECT_LT(r.fit->score, previous) << a;
    previous = r.fit->score;
  }
}

TEST(Pipeline, TranslationEquivariant) {
  const auto line = parabola(0.003, 20, 100, 60, 50);
  const Image base = quiet_render(line, 3.5);
  const int sx = 7, sy = -5;
  Image shifted(base.width, base.height, base.at(0, 0));
  for (int y = 0; y < base.height; ++y) {
    for (int x = 0; x < base.width; ++x) {
      if (base.contains(x - sx, y - sy)) shifted.at(x, y) = base.at(x - sx, y - sy);
    }
  }
  const auto r0 = run_pipeline(base);
  const auto r1 = run_pipeline(shifted);
  ASSERT_TRUE(r0.tube && r1.tube);
  ASSERT_EQ(r0.tube->points.size(), r1.tube->points.size());
  for (std::size_t i = 0; i < r0.tube->points.size(); ++i) {
    EXPECT_LE(std::abs(r1.tube->points[i].x - r0.tube->points[i].x - sx), 1);
    EXPECT_LE(std::abs(r1.tube->points[i].y - r0.tube->points[i].y - sy), 1);
  }
}

TEST(Pipeline, StraightSimulatorTubeFitsLine) {
  const sim::Simulator sim(sim::SimConfig::defaults());
  const sim::SimState s = sim.reset(3);
  const PipelineResult r = run_pipeline(sim.render_camera1(s, 11));
  ASSERT_TRUE(r.fit.has_value());
  EXPECT_LT(std::abs(r.fit->a), 2e-4);
  EXPECT_GT(r.score(), 0.99);
  EXPECT_GT(r.tube_mask.count(), 0u);
}

TEST(Pipeline, NoTubeWhenFullyInserted) {
  sim::CameraConfig cam;
  const Image img = sim::render_tube_image(cam, {}, 3.0, {4});
  const PipelineResult r = run_pipeline(img);
  EXPECT_FALSE(r.tube.has_value());
  EXPECT_EQ(r.score(), 1.0);
}

TEST(Pipeline, SyntheticFramesWithinTwoPixels) {
  int within = 0;
  for (std::uint64_t seed = 1000; seed < 1050; ++seed) {
    const auto frame = nti::testing::random_frame(seed);
    const PipelineResult r = run_pipeline(frame.image);
    if (r.tube && nti::testing::hausdorff(r.tube->points, frame.centerline) <= 2.0) ++within;
  }
  EXPECT_GE(within, 48);
}

TEST(Centerline, EvenBandRefinesToHalfPixel) {
  const Component c = component_of(filled_rect(60, 20, 5, 6, 54, 11));
  const Skeleton s = thin_component(c);
  Mask mask(60, 20);
  for (const Pixel& p : c.pixels) mask.at(p.x, p.y) = 1;
  const auto centre = refine_centerline(s, mask);
  ASSERT_EQ(centre.size(), s.points.size() - s.extended_front - s.extended_back);
  for (const Point2& p : centre) EXPECT_DOUBLE_EQ(p.y, 8.5);
}

TEST(Centerline, ExtensionsExcluded) {
  const auto line = parabola(0.003, 20, 100, 60, 50);
  const PipelineResult r = run_pipeline(quiet_render(line, 4.0));
  ASSERT_TRUE(r.tube.has_value());
  EXPECT_GT(r.tube->extended_front + r.tube->extended_back, 0u);
  const auto centre = refine_centerline(*r.tube, r.tube_mask);
  EXPECT_EQ(centre.front().x, r.tube->points[r.tube->extended_front].x);
  EXPECT_EQ(centre.back().x, r.tube->points[r.tube->points.size() - 1 - r.tube->extended_back].x);
}

TEST(Pipeline, SyntheticFramesCurvatureWithinTenPercent) {
  int curved = 0, within = 0;
  for (std::uint64_t seed = 1000; seed < 1050; ++seed) {
    const auto frame = nti::testing::random_frame(seed);
    if (std::abs(frame.a) < 1e-3) continue;
    ++curved;
    const PipelineResult r = run_pipeline(frame.image);
    if (r.fit && std::abs(r.fit->a - frame.a) <= 0.1 * std::abs(frame.a)) ++within;
  }
  EXPECT_GE(within, curved - 1);
}

}  // namespace
}  // namespace nti::vision
