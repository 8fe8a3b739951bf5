#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "nti/sim/contact.hpp"
#include "nti/sim/render.hpp"
#include "nti/sim/simulator.hpp"

namespace nti::sim {
namespace {

const SimConfig& default_config() {
  static const SimConfig cfg = SimConfig::defaults();
  return cfg;
}

// Straight horizontal channel of half-width w from x = -0.02 to x = 0.20.
PhantomGeometry straight_channel(double half_width = 0.011) {
  PhantomGeometry g;
  for (int i = 0; i <= 44; ++i) {
    const double x = -0.02 + 0.005 * i;
    g.centerline.emplace_back(x, 0.0);
    g.upper_wall.emplace_back(x, half_width);
    g.lower_wall.emplace_back(x, -half_width);
  }
  g.windows[0] = {{Wall::kUpper, 0, 5}, {Wall::kLower, 0, 5}};
  g.windows[1] = {{Wall::kUpper, 10, 20}, {Wall::kLower, 10, 20}};
  g.windows[2] = {{Wall::kUpper, 25, 40}, {Wall::kLower, 25, 40}};
  g.target_a = Vec2(0.060, -half_width);
  g.target_b = Vec2(0.060, half_width);
  return g;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool bitwise_equal(const SimState& a, const SimState& b) {
  if (a.nodes.size() != b.nodes.size() || a.contacts.size() != b.contacts.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    if (!same_bits(a.nodes[i].x(), b.nodes[i].x()) || !same_bits(a.nodes[i].y(), b.nodes[i].y())) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.contacts.size(); ++i) {
    if (!same_bits(a.contacts[i].depth, b.contacts[i].depth)) return false;
  }
  return same_bits(a.ee.x, b.ee.x) && same_bits(a.ee.z, b.ee.z) &&
         same_bits(a.ee.theta, b.ee.theta) && same_bits(a.time, b.time);
}

double max_channel(const ForceSample& f) {
  double m = 0.0;
  for (double c : f.channels()) m = std::max(m, std::abs(c));
  return m;
}

// Pushes straight in until the tip has travelled `distance` metres.
SimState insert(const Simulator& sim, SimState s, int steps, double dx = 0.0015) {
  for (int i = 0; i < steps; ++i) s = sim.step(s, {dx, 0.0, 0.0}).state;
  return s;
}

TEST(Geometry, DefaultPhantomValidates) {
  const SimConfig& cfg = default_config();
  EXPECT_NO_THROW(cfg.geometry.validate(cfg.tube.radius));
  EXPECT_GT(cfg.geometry.centerline_length(), 0.15);
}

TEST(Geometry, RoundTripsThroughJson) {
  const PhantomGeometry& g = default_config().geometry;
  const PhantomGeometry back = PhantomGeometry::from_json(g.to_json());
  EXPECT_EQ(back.to_json().dump(), g.to_json().dump());
}

TEST(Geometry, NarrowChannelRejected) {
  EXPECT_THROW(straight_channel(0.005).validate(0.006), std::invalid_argument);
}

TEST(Geometry, SelfIntersectingWallRejected) {
  PhantomGeometry g = straight_channel();
  g.upper_wall[10] = Vec2(g.upper_wall[10].x(), -0.02);
  g.upper_wall[11] = Vec2(g.upper_wall[8].x(), 0.03);
  EXPECT_THROW(g.validate(0.006), std::invalid_argument);
}

TEST(Reset, SameSeedSameState) {
  Simulator sim(default_config());
  EXPECT_TRUE(bitwise_equal(sim.reset(42), sim.reset(42)));
  EXPECT_FALSE(bitwise_equal(sim.reset(42), sim.reset(43)));
}

TEST(Reset, SeedSweepCoversRange) {
  Simulator sim(default_config());
  const ResetDistribution& r = default_config().reset;
  constexpr int kBins = 10;
  std::array<int, kBins> hx{}, hz{}, ha{};
  auto bin = [](double v, double lo, double hi) {
    return std::clamp(static_cast<int>((v - lo) / (hi - lo) * kBins), 0, kBins - 1);
  };
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SimState s = sim.reset(seed);
    const Vec2 tip = s.nodes.back();
    ASSERT_GE(tip.x(), r.tip_x_min - 1e-12);
    ASSERT_LE(tip.x(), r.tip_x_max + 1e-12);
    ASSERT_GE(tip.y(), r.tip_z_min - 1e-12);
    ASSERT_LE(tip.y(), r.tip_z_max + 1e-12);
    ASSERT_GE(s.ee.theta, r.angle_min);
    ASSERT_LE(s.ee.theta, r.angle_max);
    ++hx[bin(tip.x(), r.tip_x_min, r.tip_x_max)];
    ++hz[bin(tip.y(), r.tip_z_min, r.tip_z_max)];
    ++ha[bin(s.ee.theta, r.angle_min, r.angle_max)];
  }
  for (int b = 0; b < kBins; ++b) {
    EXPECT_GT(hx[b], 50) << "x bin " << b;
    EXPECT_GT(hz[b], 50) << "z bin " << b;
    EXPECT_GT(ha[b], 50) << "angle bin " << b;
  }
}

TEST(Reset, StraightTubeWithZeroForces) {
  Simulator sim(default_config());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SimState s = sim.reset(seed);
    EXPECT_TRUE(s.contacts.empty());
    const ForceSample f = sim.measure(s);
    EXPECT_EQ(max_channel(f), 0.0);
    EXPECT_LT(std::hypot(f.fx_ee, f.fz_ee), 1e-9);
    EXPECT_EQ(s.nodes.front(), Vec2(s.ee.x, s.ee.z));
    const Vec2 d = s.nodes[1] - s.nodes[0];
    EXPECT_NEAR(std::atan2(d.y(), d.x()), s.ee.theta, 1e-12);
  }
}

TEST(Step, ZeroIncrementWithoutContactIsFixedPoint) {
  Simulator sim(default_config());
  const SimState s0 = sim.reset(3);
  const StepResult r = sim.step(s0, {});
  for (std::size_t i = 0; i < s0.nodes.size(); ++i) {
    EXPECT_NEAR((r.state.nodes[i] - s0.nodes[i]).norm(), 0.0, 1e-12);
  }
  EXPECT_EQ(max_channel(r.forces), 0.0);
  EXPECT_DOUBLE_EQ(r.state.time, s0.time + default_config().dt);
  EXPECT_EQ(r.state.step_index, 1u);
}

TEST(Step, RejectsBadArguments) {
  Simulator sim(default_config());
  const SimState s = sim.reset(0);
  EXPECT_THROW(sim.step(s, {}, 0.0), std::invalid_argument);
  EXPECT_THROW(sim.step(s, {}, -0.05), std::invalid_argument);
  EXPECT_THROW(sim.step(s, {0.0021, 0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(sim.step(s, {0.0, -0.0011, 0.0}), std::invalid_argument);
  EXPECT_THROW(sim.step(s, {0.0, 0.0, 0.02}), std::invalid_argument);
}

TEST(Step, GripFollowsPoseAndWorkspaceClamps) {
  SimConfig cfg = default_config();
  cfg.workspace.x_max = cfg.reset.tip_x_min - 0.3 + 0.002;
  Simulator sim(cfg);
  SimState s = sim.reset(1);
  bool clamped = false;
  for (int i = 0; i < 5; ++i) {
    s = sim.step(s, {0.002, 0.0, 0.0}).state;
    clamped = clamped || s.pose_clamped;
    EXPECT_LE(s.ee.x, cfg.workspace.x_max);
    EXPECT_EQ(s.nodes[0], Vec2(s.ee.x, s.ee.z));
  }
  EXPECT_TRUE(clamped);
}

TEST(Step, DeterministicBitForBit) {
  Simulator sim(default_config());
  SimState a = sim.reset(11);
  SimState b = sim.reset(11);
  for (int i = 0; i < 120; ++i) {
    const ControlIncrement u{0.0015, 0.0002 * std::sin(0.1 * i), 0.002 * std::cos(0.07 * i)};
    const StepResult ra = sim.step(a, u);
    const StepResult rb = sim.step(b, u);
    ASSERT_TRUE(bitwise_equal(ra.state, rb.state)) << "step " << i;
    for (std::size_t c = 0; c < 5; ++c) {
      ASSERT_TRUE(same_bits(ra.forces.channels()[c], rb.forces.channels()[c]));
    }
    a = ra.state;
    b = rb.state;
  }
}

TEST(Step, RelaxedStateMeetsTolerance) {
  Simulator sim(default_config());
  SimState s = sim.reset(5);
  int contacts_seen = 0;
  for (int i = 0; i < 130; ++i) {
    s = sim.step(s, {0.0015, 0.0, 0.0}).state;
    ASSERT_FALSE(s.unstable) << "step " << i;
    ASSERT_LT(s.residual, default_config().solver.tolerance);
    contacts_seen += s.contacts.empty() ? 0 : 1;
    for (const Contact& c : s.contacts) ASSERT_GE(c.depth, 0.0);
  }
  EXPECT_GT(contacts_seen, 0);
}

TEST(Step, FrictionlessEquilibriumHasZeroElasticResidual) {
  SimConfig cfg = default_config();
  cfg.tube.friction = 0.0;
  Simulator sim(cfg);
  const SimState s = insert(sim, sim.reset(2), 110);
  ASSERT_FALSE(s.contacts.empty());
  EXPECT_LT(sim.free_residual(s), cfg.solver.tolerance);
}

TEST(Step, PassiveUnderZeroIncrements) {
  Simulator sim(default_config());
  SimState s = insert(sim, sim.reset(4), 115);
  ASSERT_FALSE(s.contacts.empty());
  double previous = max_channel(sim.measure(s));
  double last = previous;
  for (int i = 0; i < 40; ++i) {
    const StepResult r = sim.step(s, {});
    last = max_channel(r.forces);
    EXPECT_LE(last, previous + 1e-9) << "hold step " << i;
    previous = last;
    s = r.state;
  }
  const StepResult again = sim.step(s, {});
  EXPECT_NEAR(max_channel(again.forces), last, 1e-9);
}

TEST(Contact, PenaltyLawInThroatWindow) {
  const SimConfig& cfg = default_config();
  const PhantomGeometry& g = cfg.geometry;
  const SensorWindow& win = g.windows[static_cast<int>(SensorSite::kThroat)].front();
  const auto& wall = g.wall(win.wall);
  const std::size_t seg = (win.first_segment + win.last_segment) / 2;
  const Vec2 a = wall[seg];
  const Vec2 b = wall[seg + 1];
  // Inward normal built from the segment endpoints and the channel centerline side.
  Vec2 n(-(b - a).y(), (b - a).x());
  n.normalize();
  const Vec2 mid = 0.5 * (a + b);
  const double towards_center = (g.proximity(win.wall == Wall::kUpper ? Wall::kLower : Wall::kUpper,
                                             mid).closest - mid).dot(n);
  if (towards_center < 0) n = -n;
  for (double delta : {1e-4, 5e-4, 2e-3}) {
    const std::vector<Vec2> nodes{mid + (cfg.tube.radius - delta) * n};
    const auto contacts = detect_contacts(g, cfg.tube, nodes);
    ASSERT_EQ(contacts.size(), 1u);
    const ForceSample f = aggregate_sensors(g, contacts);
    EXPECT_NEAR(f.f2, cfg.tube.contact_stiffness * delta, 1e-9);
    EXPECT_EQ(f.f1, 0.0);
    EXPECT_EQ(f.fx, 0.0);
    EXPECT_EQ(f.fz, 0.0);
    EXPECT_EQ(f.fy, 0.0);
  }
}

TEST(Contact, LocalityPerWindow) {
  const SimConfig& cfg = default_config();
  const PhantomGeometry& g = cfg.geometry;
  for (int site = 0; site < 3; ++site) {
    const SensorWindow& win = g.windows[site].front();
    const auto& wall = g.wall(win.wall);
    const std::size_t seg = (win.first_segment + win.last_segment) / 2;
    const Vec2 mid = 0.5 * (wall[seg] + wall[seg + 1]);
    const Vec2 n = g.segment_normal(win.wall, seg);
    const std::vector<Vec2> nodes{mid + (cfg.tube.radius - 1e-3) * n};
    const ForceSample f = aggregate_sensors(g, detect_contacts(g, cfg.tube, nodes));
    const bool nostril = site == 0;
    EXPECT_EQ(f.fx != 0.0 || f.fz != 0.0, nostril) << site;
    EXPECT_EQ(f.f1 != 0.0, site == 1) << site;
    EXPECT_EQ(f.f2 != 0.0, site == 2) << site;
    if (nostril) {
      // The sensor reads the force applied to the wall: opposite the inward normal.
      EXPECT_NEAR(f.fx, -0.5 * n.x(), 1e-12);
      EXPECT_NEAR(f.fz, -0.5 * n.y(), 1e-12);
    }
  }
}

TEST(Contact, NodesOutsideWindowsAreSilent) {
  const SimConfig& cfg = default_config();
  const PhantomGeometry& g = cfg.geometry;
  const auto& wall = g.wall(Wall::kUpper);
  const std::size_t seg = 8;  // between the nostril and nasal-cavity windows
  ASSERT_FALSE(g.site_of(Wall::kUpper, seg).has_value());
  const Vec2 mid = 0.5 * (wall[seg] + wall[seg + 1]);
  const std::vector<Vec2> nodes{mid + (cfg.tube.radius - 1e-3) * g.segment_normal(Wall::kUpper, seg)};
  const auto contacts = detect_contacts(g, cfg.tube, nodes);
  ASSERT_EQ(contacts.size(), 1u);
  EXPECT_EQ(max_channel(aggregate_sensors(g, contacts)), 0.0);
}

TEST(Insertion, StraightChannelMonotoneAndReachesTarget) {
  SimConfig cfg = default_config();
  cfg.geometry = straight_channel();
  Simulator sim(cfg);
  SimState s = sim.reset(0);
  double progress = sim.tip_progress(s);
  bool reached = false;
  for (int i = 0; i < 40; ++i) {
    s = sim.step(s, {0.002, 0.0, -std::clamp(s.ee.theta, -0.01, 0.01)}).state;
    const double p = sim.tip_progress(s);
    EXPECT_GT(p, progress) << "step " << i;
    progress = p;
    reached = reached || sim.tip_in_target(s);
  }
  EXPECT_TRUE(reached);
  EXPECT_TRUE(sim.tip_in_target(s));
}

TEST(Insertion, DefaultPhantomStraightPushReachesTarget) {
  Simulator sim(default_config());
  SimState s = sim.reset(0);
  bool reached = false;
  for (int i = 0; i < 200 && !reached; ++i) {
    s = sim.step(s, {0.0012, 0.0, 0.0}).state;
    reached = sim.tip_in_target(s);
  }
  EXPECT_TRUE(reached);
}

data::EpisodeMetrics metrics_with_peak(double peak, double log_impulse = -20.7) {
  data::EpisodeMetrics m;
  m.peak.fill(0.0);
  m.peak[4] = peak;
  m.log_impulse.fill(log_impulse);
  return m;
}

TEST(Outcome, Examples) {
  const data::FilterConfig limits;
  EXPECT_EQ(check_outcome(true, 9.13, metrics_with_peak(1.81), limits), Outcome::success());
  EXPECT_EQ(check_outcome(false, 20.0, metrics_with_peak(1.0), limits),
            Outcome::failure(FailureReason::kTimeout));
  EXPECT_EQ(check_outcome(false, 3.0, metrics_with_peak(5.2), limits),
            Outcome::failure(FailureReason::kForce));
  EXPECT_EQ(check_outcome(true, 3.0, metrics_with_peak(5.2), limits),
            Outcome::failure(FailureReason::kForce));
  EXPECT_EQ(check_outcome(false, 3.0, metrics_with_peak(2.0, 1.0), limits),
            Outcome::failure(FailureReason::kImpulse));
  EXPECT_EQ(check_outcome(false, 3.0, metrics_with_peak(2.0), limits), Outcome{});
}

TEST(Outcome, FirstViolatedCriterionWins) {
  const data::FilterConfig limits;
  EXPECT_EQ(check_outcome(true, 25.0, metrics_with_peak(7.0, 3.0), limits),
            Outcome::failure(FailureReason::kTimeout));
  EXPECT_EQ(check_outcome(true, 5.0, metrics_with_peak(7.0, 3.0), limits),
            Outcome::failure(FailureReason::kForce));
}

TEST(Outcome, StringRoundTrip) {
  for (const Outcome& o :
       {Outcome{}, Outcome::success(), Outcome::failure(FailureReason::kTimeout),
        Outcome::failure(FailureReason::kForce), Outcome::failure(FailureReason::kImpulse),
        Outcome::failure(FailureReason::kInstability)}) {
    EXPECT_EQ(outcome_from_string(to_string(o)), o);
  }
  EXPECT_THROW(outcome_from_string("bogus"), std::invalid_argument);
}

TEST(Render, FullyInsertedTubeIsOccluded) {
  const CameraConfig& cam = default_config().camera;
  std::vector<Vec2> nodes;
  for (int i = 0; i < 41; ++i) nodes.emplace_back(0.001 + 0.0075 * i, 0.0);
  EXPECT_TRUE(visible_centerline(cam, nodes).empty());
  CameraConfig quiet = cam;
  quiet.distractor_count = 0;
  quiet.noise_sigma = 0.0;
  const Image img = render_tube_image(quiet, visible_centerline(quiet, nodes), 2.3, {7});
  EXPECT_LT(*std::max_element(img.pixels.begin(), img.pixels.end()), quiet.tube_intensity);
}

TEST(Render, VisiblePortionClippedAtOcclusionPlane) {
  const CameraConfig& cam = default_config().camera;
  std::vector<Vec2> nodes;
  for (int i = 0; i < 41; ++i) nodes.emplace_back(-0.2 + 0.0075 * i, 0.01);
  const auto line = visible_centerline(cam, nodes);
  ASSERT_GE(line.size(), 2u);
  EXPECT_NEAR(line.back().u, cam.width - 0.5, 1e-9);
  for (const PixelPoint& p : line) EXPECT_NEAR(p.v, line.front().v, 1e-9);
}

TEST(Render, FlatCapBandHasExpectedArea) {
  std::vector<std::uint8_t> mask;
  const std::vector<PixelPoint> line{{10.0, 20.0}, {50.0, 20.0}};
  rasterize_band(line, 3.0, 64, 64, mask);
  int count = 0;
  for (int v = 0; v < 64; ++v) {
    for (int u = 0; u < 64; ++u) {
      if (mask[static_cast<std::size_t>(v) * 64 + u]) {
        ++count;
        EXPECT_GE(u, 10);
        EXPECT_LE(u, 50);
        EXPECT_LE(std::abs(v - 20), 3);
      }
    }
  }
  EXPECT_EQ(count, 41 * 7);
}

TEST(Render, DeterministicInNoiseSeed) {
  Simulator sim(default_config());
  const SimState s = sim.reset(9);
  EXPECT_EQ(sim.render_camera1(s, 5), sim.render_camera1(s, 5));
  EXPECT_NE(sim.render_camera1(s, 5), sim.render_camera1(s, 6));
  const Image side = sim.render_side_view(s);
  EXPECT_EQ(side.width, 192);
  EXPECT_EQ(side.height, 160);
}

}  // namespace
}  // namespace nti::sim
