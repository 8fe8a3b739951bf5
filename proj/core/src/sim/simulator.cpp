#include "nti/sim/simulator.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include "nti/sim/contact.hpp"
#include "nti/sim/render.hpp"

namespace nti::sim {
namespace {

constexpr std::size_t kClamped = 2;  // grip node and its neighbour follow the end-effector
constexpr int kCapPasses = 8;
constexpr double kCapTolerance = 1e-12;  // N

struct FrictionAnchor {
  std::size_t node;
  Wall wall;
  Vec2 anchor;
  Vec2 tangent;
  double cap;  // mu * lagged normal force
};

Vec2 perp(const Vec2& n) { return Vec2(-n.y(), n.x()); }

// Total potential of the tube: axial springs, discrete bending, wall penalty, friction springs.
class TubeEnergy {
 public:
  TubeEnergy(const SimConfig& config, const Vec2& grip, const Vec2& grip_next,
             std::vector<FrictionAnchor> anchors)
      : cfg_(config), grip_(grip), grip_next_(grip_next), anchors_(std::move(anchors)) {
    n_ = static_cast<std::size_t>(config.tube.node_count);
  }

  std::size_t free_dim() const { return 2 * (n_ - kClamped); }

  Vec2 node(const Eigen::VectorXd& q, std::size_t i) const {
    if (i == 0) return grip_;
    if (i == 1) return grip_next_;
    return q.segment<2>(static_cast<Eigen::Index>(2 * (i - kClamped)));
  }

  // Energy; optionally the gradient over all 2N coordinates and the free-coordinate Hessian.
  double evaluate(const Eigen::VectorXd& q, Eigen::VectorXd* grad_all,
                  Eigen::MatrixXd* hess) const {
    const TubeModel& t = cfg_.tube;
    std::vector<Vec2> x(n_);
    for (std::size_t i = 0; i < n_; ++i) x[i] = node(q, i);
    if (grad_all != nullptr) grad_all->setZero(static_cast<Eigen::Index>(2 * n_));
    if (hess != nullptr) {
      const auto d = static_cast<Eigen::Index>(free_dim());
      hess->setZero(d, d);
    }
    auto add_grad = [&](std::size_t i, const Vec2& g) {
      if (grad_all != nullptr) grad_all->segment<2>(static_cast<Eigen::Index>(2 * i)) += g;
    };
    auto add_hess = [&](std::size_t i, std::size_t j, const Eigen::Matrix2d& h) {
      if (hess == nullptr || i < kClamped || j < kClamped) return;
      hess->block<2, 2>(static_cast<Eigen::Index>(2 * (i - kClamped)),
                        static_cast<Eigen::Index>(2 * (j - kClamped))) += h;
    };

    double energy = 0.0;
    const double l0 = t.segment_length;
    const double ka = t.axial_stiffness / l0;
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      const Vec2 e = x[i + 1] - x[i];
      const double len = e.norm();
      const double stretch = len - l0;
      energy += 0.5 * ka * stretch * stretch;
      const Vec2 dir = e / len;
      const Vec2 g = ka * stretch * dir;
      add_grad(i + 1, g);
      add_grad(i, -g);
      if (hess != nullptr) {
        const Eigen::Matrix2d outer = dir * dir.transpose();
        const double geo = std::max(0.0, 1.0 - l0 / len);
        const Eigen::Matrix2d h = ka * (outer + geo * (Eigen::Matrix2d::Identity() - outer));
        add_hess(i, i, h);
        add_hess(i + 1, i + 1, h);
        add_hess(i, i + 1, -h);
        add_hess(i + 1, i, -h);
      }
    }

    const double kb = t.bending_stiffness / (l0 * l0 * l0);
    const double coeff[3] = {1.0, -2.0, 1.0};
    for (std::size_t i = 1; i + 1 < n_; ++i) {
      const Vec2 d = x[i - 1] - 2.0 * x[i] + x[i + 1];
      energy += 0.5 * kb * d.squaredNorm();
      for (int a = 0; a < 3; ++a) {
        add_grad(i - 1 + a, kb * coeff[a] * d);
        for (int b = 0; b < 3; ++b) {
          add_hess(i - 1 + a, i - 1 + b, kb * coeff[a] * coeff[b] * Eigen::Matrix2d::Identity());
        }
      }
    }

    for (std::size_t i = kClamped; i < n_; ++i) {
      for (Wall w : {Wall::kUpper, Wall::kLower}) {
        const WallProximity prox = cfg_.geometry.proximity(w, x[i]);
        if (prox.at_open_end) continue;
        const double depth = t.radius - prox.signed_distance;
        if (depth <= 0.0) continue;
        energy += 0.5 * t.contact_stiffness * depth * depth;
        add_grad(i, -t.contact_stiffness * depth * prox.normal);
        add_hess(i, i, t.contact_stiffness * (prox.normal * prox.normal.transpose() +
                                              depth * prox.curvature * prox.curvature_axis *
                                                  prox.curvature_axis.transpose()));
      }
    }

    for (const FrictionAnchor& f : anchors_) {
      const double u = (x[f.node] - f.anchor).dot(f.tangent);
      const double kt = t.tangential_stiffness;
      if (kt * std::abs(u) <= f.cap) {
        energy += 0.5 * kt * u * u;
        add_grad(f.node, kt * u * f.tangent);
        add_hess(f.node, f.node, kt * f.tangent * f.tangent.transpose());
      } else {
        energy += f.cap * (std::abs(u) - f.cap / (2.0 * kt));
        add_grad(f.node, (u > 0 ? f.cap : -f.cap) * f.tangent);
      }
    }
    return energy;
  }

  // Tangential force each anchor applies to its node at the given configuration.
  Vec2 friction_force(const Eigen::VectorXd& q, const FrictionAnchor& f) const {
    const double u = (node(q, f.node) - f.anchor).dot(f.tangent);
    const double kt = cfg_.tube.tangential_stiffness;
    const double mag = std::clamp(kt * u, -f.cap, f.cap);
    return -mag * f.tangent;
  }

  const std::vector<FrictionAnchor>& anchors() const { return anchors_; }

 private:
  const SimConfig& cfg_;
  std::size_t n_ = 0;
  Vec2 grip_;
  Vec2 grip_next_;
  std::vector<FrictionAnchor> anchors_;
};

double free_inf_norm(const Eigen::VectorXd& grad_all) {
  return grad_all.tail(grad_all.size() - 2 * static_cast<Eigen::Index>(kClamped)).lpNorm<Eigen::Infinity>();
}

struct SolveResult {
  Eigen::VectorXd q;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

SolveResult relax(const TubeEnergy& energy, Eigen::VectorXd q, const SolverSettings& settings) {
  const auto dim = static_cast<Eigen::Index>(energy.free_dim());
  Eigen::VectorXd grad(dim + 2 * static_cast<Eigen::Index>(kClamped));
  Eigen::VectorXd trial_grad(grad.size());
  Eigen::MatrixXd hess(dim, dim);
  SolveResult out;
  double e = energy.evaluate(q, &grad, &hess);
  for (int it = 0; it < settings.max_iterations; ++it) {
    const Eigen::VectorXd g = grad.tail(dim);
    out.residual = g.lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual < settings.tolerance) {
      out.converged = true;
      out.q = std::move(q);
      return out;
    }
    const double reg = 1e-10 * std::max(1.0, hess.diagonal().maxCoeff());
    hess.diagonal().array() += reg;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step = ldlt.solve(-g);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(g) >= 0.0) step = -g;

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::VectorXd trial = q + alpha * step;
      const double e_trial = energy.evaluate(trial, &trial_grad, nullptr);
      const bool armijo = e_trial <= e + 1e-4 * alpha * g.dot(step);
      // Near the minimum the energy decrease drowns in round-off; fall back to the residual.
      const bool flat = std::abs(e_trial - e) <= 1e-13 * std::max(1.0, std::abs(e)) &&
                        free_inf_norm(trial_grad) < out.residual;
      if (armijo || flat) {
        q = trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    e = energy.evaluate(q, &grad, &hess);
  }
  out.residual = free_inf_norm(grad);
  out.converged = out.residual < settings.tolerance;
  out.q = std::move(q);
  return out;
}

Vec2 grip_next(const Pose& pose, double l0) {
  return Vec2(pose.x, pose.z) + l0 * Vec2(std::cos(pose.theta), std::sin(pose.theta));
}

Eigen::VectorXd pack_free(const std::vector<Vec2>& nodes) {
  Eigen::VectorXd q(static_cast<Eigen::Index>(2 * (nodes.size() - kClamped)));
  for (std::size_t i = kClamped; i < nodes.size(); ++i) {
    q.segment<2>(static_cast<Eigen::Index>(2 * (i - kClamped))) = nodes[i];
  }
  return q;
}

std::vector<FrictionAnchor> anchors_from(const SimState& state, const TubeModel& tube) {
  std::vector<FrictionAnchor> anchors;
  if (tube.friction <= 0.0) return anchors;
  for (const Contact& c : state.contacts) {
    if (c.node < kClamped) continue;
    // Keep the stored tangential spring: the anchor sits where the node would be unloaded.
    const Vec2 t = perp(c.normal).normalized();
    const Vec2 anchor = state.nodes[c.node] + (c.friction.dot(t) / tube.tangential_stiffness) * t;
    anchors.push_back(FrictionAnchor{c.node, c.wall, anchor, t, tube.friction * c.normal_force});
  }
  return anchors;
}

// Contacts, friction and end-effector reaction at a relaxed configuration.
void finalize(const SimConfig& cfg, const TubeEnergy& energy, const Eigen::VectorXd& q,
              SimState& state) {
  const std::size_t n = state.nodes.size();
  for (std::size_t i = 0; i < n; ++i) state.nodes[i] = energy.node(q, i);
  state.contacts = detect_contacts(cfg.geometry, cfg.tube, state.nodes, kClamped);
  for (const FrictionAnchor& a : energy.anchors()) {
    const Vec2 f = energy.friction_force(q, a);
    for (Contact& c : state.contacts) {
      if (c.node == a.node && c.wall == a.wall) {
        c.friction += f;
        break;
      }
    }
  }
}

}  // namespace

std::string to_string(const Outcome& outcome) {
  switch (outcome.kind) {
    case OutcomeKind::kInProgress:
      return "in_progress";
    case OutcomeKind::kSuccess:
      return "success";
    case OutcomeKind::kFailure:
      break;
  }
  switch (outcome.reason) {
    case FailureReason::kTimeout:
      return "failure:timeout";
    case FailureReason::kForce:
      return "failure:force";
    case FailureReason::kImpulse:
      return "failure:impulse";
    case FailureReason::kInstability:
      return "failure:instability";
    case FailureReason::kNone:
      break;
  }
  return "failure";
}

Outcome outcome_from_string(const std::string& text) {
  if (text == "in_progress") return {};
  if (text == "success") return Outcome::success();
  if (text == "failure:timeout") return Outcome::failure(FailureReason::kTimeout);
  if (text == "failure:force") return Outcome::failure(FailureReason::kForce);
  if (text == "failure:impulse") return Outcome::failure(FailureReason::kImpulse);
  if (text == "failure:instability") return Outcome::failure(FailureReason::kInstability);
  throw std::invalid_argument("unknown outcome '" + text + "'");
}

Simulator::Simulator(SimConfig config) : config_(std::move(config)) { config_.validate(); }

SimState Simulator::reset(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const ResetDistribution& r = config_.reset;
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  };
  const Vec2 tip(uniform(r.tip_x_min, r.tip_x_max), uniform(r.tip_z_min, r.tip_z_max));
  const double angle = uniform(r.angle_min, r.angle_max);
  const Vec2 dir(std::cos(angle), std::sin(angle));

  SimState s;
  const std::size_t n = static_cast<std::size_t>(config_.tube.node_count);
  s.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.nodes[i] = tip - static_cast<double>(n - 1 - i) * config_.tube.segment_length * dir;
  }
  s.ee = Pose{s.nodes[0].x(), s.nodes[0].y(), angle};
  s.grip_index = 0;
  s.pose_clamped = config_.workspace.clamp(s.ee);
  s.contacts = detect_contacts(config_.geometry, config_.tube, s.nodes, kClamped);
  s.residual = free_residual(s);
  return s;
}

ForceSample Simulator::measure(const SimState& state) const {
  ForceSample f = aggregate_sensors(config_.geometry, state.contacts);
  TubeEnergy energy(config_, state.nodes[0], state.nodes[1], {});
  Eigen::VectorXd grad;
  energy.evaluate(pack_free(state.nodes), &grad, nullptr);
  // Force the tube applies on the end-effector through the clamped nodes.
  const Vec2 reaction = grad.segment<2>(0) + grad.segment<2>(2);
  f.fx_ee = reaction.x();
  f.fy_ee = 0.0;
  f.fz_ee = reaction.y();
  f.fy = 0.0;
  f.t = state.time;
  return f;
}

StepResult Simulator::step(const SimState& state, const ControlIncrement& u) const {
  return step(state, u, config_.dt);
}

StepResult Simulator::step(const SimState& state, const ControlIncrement& u, double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (!config_.limits.admits(u)) throw std::invalid_argument("step: control increment over limits");
  if (state.nodes.size() != static_cast<std::size_t>(config_.tube.node_count)) {
    throw std::invalid_argument("step: state does not match the tube model");
  }

  SimState next = state;
  next.ee.x += u.dx;
  next.ee.z += u.dz;
  next.ee.theta += u.dtheta;
  next.pose_clamped = config_.workspace.clamp(next.ee);

  auto anchors = anchors_from(state, config_.tube);
  auto energy_at = [&](const Pose& pose) {
    return TubeEnergy(config_, Vec2(pose.x, pose.z),
                      grip_next(pose, config_.tube.segment_length), anchors);
  };
  SolveResult solved = relax(energy_at(next.ee), pack_free(state.nodes), config_.solver);
  // Retry with the grip motion split into substeps when the direct solve stalls.
  for (int parts = 2; !solved.converged && parts <= 16; parts *= 2) {
    Eigen::VectorXd q = pack_free(state.nodes);
    for (int k = 1; k <= parts; ++k) {
      const double s = static_cast<double>(k) / parts;
      const Pose mid{state.ee.x + s * (next.ee.x - state.ee.x),
                     state.ee.z + s * (next.ee.z - state.ee.z),
                     state.ee.theta + s * (next.ee.theta - state.ee.theta)};
      solved = relax(energy_at(mid), q, config_.solver);
      q = solved.q;
    }
  }
  // Friction caps follow the normal forces of the relaxed configuration.
  for (int pass = 0; pass < kCapPasses && !anchors.empty(); ++pass) {
    std::vector<Vec2> nodes(state.nodes.size());
    const TubeEnergy probe = energy_at(next.ee);
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = probe.node(solved.q, i);
    const auto contacts = detect_contacts(config_.geometry, config_.tube, nodes, kClamped);
    double change = 0.0;
    for (FrictionAnchor& a : anchors) {
      double fn = 0.0;
      for (const Contact& c : contacts) {
        if (c.node == a.node && c.wall == a.wall) fn = c.normal_force;
      }
      const double cap = config_.tube.friction * fn;
      change = std::max(change, std::abs(cap - a.cap));
      a.cap = cap;
    }
    if (change <= kCapTolerance) break;
    solved = relax(energy_at(next.ee), solved.q, config_.solver);
  }
  const TubeEnergy energy = energy_at(next.ee);
  finalize(config_, energy, solved.q, next);
  next.residual = solved.residual;
  next.iterations = solved.iterations;
  next.unstable = !solved.converged;
  next.time = state.time + dt;
  next.step_index = state.step_index + 1;

  StepResult out{std::move(next), {}};
  out.forces = aggregate_sensors(config_.geometry, out.state.contacts);
  Eigen::VectorXd grad;
  energy.evaluate(solved.q, &grad, nullptr);
  const Vec2 reaction = grad.segment<2>(0) + grad.segment<2>(2);
  out.forces.fx_ee = reaction.x();
  out.forces.fz_ee = reaction.y();
  out.forces.t = out.state.time;
  return out;
}

double Simulator::free_residual(const SimState& state) const {
  TubeEnergy energy(config_, state.nodes[0], state.nodes[1], {});
  Eigen::VectorXd grad;
  energy.evaluate(pack_free(state.nodes), &grad, nullptr);
  return free_inf_norm(grad);
}

double Simulator::tip_progress(const SimState& state) const {
  return config_.geometry.centerline_arc(state.nodes.back());
}

bool Simulator::tip_in_target(const SimState& state) const {
  const PhantomGeometry& g = config_.geometry;
  const Vec2 tip = state.nodes.back();
  const Vec2 mid = 0.5 * (g.target_a + g.target_b);
  if (g.centerline_arc(tip) < g.centerline_arc(mid)) return false;
  const Vec2 ab = g.target_b - g.target_a;
  const double t = (tip - g.target_a).dot(ab) / ab.squaredNorm();
  return t >= 0.0 && t <= 1.0;
}

Image Simulator::render_camera1(const SimState& state, std::uint64_t noise_seed) const {
  const auto line = visible_centerline(config_.camera, state.nodes);
  const double half_width = config_.tube.radius / config_.camera.meters_per_pixel_x();
  return render_tube_image(config_.camera, line, half_width, RenderOptions{noise_seed});
}

Image Simulator::render_side_view(const SimState& state, int width, int height) const {
  CameraConfig view;
  view.width = width;
  view.height = height;
  view.x_min = -0.33;
  view.x_max = 0.16;
  view.z_min = view.z_max = 0.0;
  // Keep pixels square.
  const double mpp = (view.x_max - view.x_min) / width;
  view.z_max = 0.06;
  view.z_min = view.z_max - mpp * height;
  Image img(width, height, 16);
  std::vector<std::uint8_t> mask;
  auto draw = [&](const std::vector<Vec2>& pts, double hw, std::uint8_t value) {
    std::vector<PixelPoint> px;
    for (const Vec2& p : pts) px.push_back(to_pixel(view, p));
    mask.assign(img.pixels.size(), 0);
    rasterize_band(px, hw, width, height, mask);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) img.pixels[i] = value;
    }
  };
  draw(config_.geometry.upper_wall, 0.8, 110);
  draw(config_.geometry.lower_wall, 0.8, 110);
  for (const auto& site : config_.geometry.windows) {
    for (const auto& win : site) {
      const auto& wall = config_.geometry.wall(win.wall);
      std::vector<Vec2> pts(wall.begin() + static_cast<std::ptrdiff_t>(win.first_segment),
                            wall.begin() + static_cast<std::ptrdiff_t>(win.last_segment + 2));
      draw(pts, 1.2, 170);
    }
  }
  draw(state.nodes, config_.tube.radius / mpp, 240);
  return img;
}

Outcome check_outcome(bool tip_in_target, double elapsed, const data::EpisodeMetrics& metrics,
                      const data::FilterConfig& limits) {
  if (elapsed >= limits.time_limit) return Outcome::failure(FailureReason::kTimeout);
  if (metrics.max_peak() >= limits.peak_limit) return Outcome::failure(FailureReason::kForce);
  if (metrics.max_log_impulse() >= limits.log_impulse_limit) {
    return Outcome::failure(FailureReason::kImpulse);
  }
  if (tip_in_target) return Outcome::success();
  return {};
}

Outcome check_outcome(const Simulator& sim, const SimState& state,
                      const data::EpisodeMetrics& metrics, const data::FilterConfig& limits) {
  if (state.unstable) return Outcome::failure(FailureReason::kInstability);
  return check_outcome(sim.tip_in_target(state), state.time, metrics, limits);
}

}  // namespace nti::sim
