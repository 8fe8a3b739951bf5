#include <cmath>
#include <stdexcept>

#include "nti/numkit/ops.hpp"
#include "nti/policy/policy.hpp"

namespace nti::policy {

using numkit::Tensor;
using numkit::Var;

std::array<double, 3> temporal_ensemble(std::span<const std::array<double, 3>> actions,
                                        std::span<const double> confidences, double m,
                                        EnsembleOrder order) {
  if (actions.empty()) throw std::out_of_range("temporal_ensemble: no prediction for this step");
  if (actions.size() != confidences.size()) {
    throw std::invalid_argument("temporal_ensemble: actions and confidences differ in length");
  }
  const std::size_t n = actions.size();
  std::array<double, 3> num{};
  double den = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = order == EnsembleOrder::kOldestFirst ? j : n - 1 - j;
    const double w = std::exp(-m * static_cast<double>(i)) * confidences[j];
    for (std::size_t d = 0; d < 3; ++d) num[d] += w * actions[j][d];
    den += w;
  }
  if (!(den > 0.0)) throw std::invalid_argument("temporal_ensemble: weights sum to zero");
  for (double& v : num) v /= den;
  return num;
}

void EnsembleBuffer::push(std::int64_t tau, ActionConfidenceChunk chunk) {
  if (chunk.size() != chunk_ || chunk.actions.size() != 3 * chunk_) {
    throw std::invalid_argument("EnsembleBuffer: chunk size mismatch");
  }
  if (!entries_.empty() && tau <= entries_.back().first) {
    throw std::invalid_argument("EnsembleBuffer: emission steps must increase");
  }
  entries_.emplace_back(tau, std::move(chunk));
  const auto k = static_cast<std::int64_t>(chunk_);
  while (!entries_.empty() && entries_.front().first + k <= tau) entries_.pop_front();
}

std::array<double, 3> EnsembleBuffer::action_at(std::int64_t t, double m,
                                                EnsembleOrder order) const {
  std::vector<std::array<double, 3>> actions;
  std::vector<double> confidences;
  const auto k = static_cast<std::int64_t>(chunk_);
  for (const auto& [tau, chunk] : entries_) {
    if (t < tau || t >= tau + k) continue;
    const auto i = static_cast<std::size_t>(t - tau);
    actions.push_back(chunk.action(i));
    confidences.push_back(chunk.confidences[i]);
  }
  if (actions.empty()) {
    throw std::out_of_range("EnsembleBuffer: no chunk covers step " + std::to_string(t));
  }
  return temporal_ensemble(actions, confidences, m, order);
}

namespace {

void check_target(const Var& actions, std::span<const double> target,
                  std::span<const std::uint8_t> pad) {
  const std::size_t k = pad.size();
  if (actions.shape() != numkit::Shape{k, 3} || target.size() != 3 * k) {
    throw std::invalid_argument("loss: prediction " + numkit::shape_string(actions.shape()) +
                                " does not match target of " + std::to_string(k) + " steps");
  }
}

Tensor keep_mask(std::span<const std::uint8_t> pad) {
  Tensor mask({pad.size()});
  for (std::size_t i = 0; i < pad.size(); ++i) mask[i] = pad[i] ? 0.0 : 1.0;
  return mask;
}

}  // namespace

Var racct_loss(const Var& actions, const Var& confidences, std::span<const double> target,
               std::span<const std::uint8_t> pad, const HyperParams& hp) {
  check_target(actions, target, pad);
  const std::size_t k = pad.size();
  if (confidences.value().size() != k) throw std::invalid_argument("loss: confidence count");
  for (double c : confidences.value().values()) {
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("loss: confidence outside (0,1)");
  }
  numkit::Tape& tape = *actions.tape();
  const Var t = tape.constant(Tensor({k, 3}, {target.begin(), target.end()}));
  const Var err = numkit::mul(numkit::sum_last(numkit::abs(numkit::sub(actions, t))),
                              tape.constant(keep_mask(pad)));
  const Var c = numkit::reshape(confidences, {k});
  const Var inv = numkit::reciprocal(numkit::add_scalar(numkit::scale(c, -1.0), 1.0 + hp.loss_floor));
  const Var first = numkit::scale(numkit::sum(numkit::mul(numkit::mul(c, err), inv)),
                                  1.0 / static_cast<double>(k));
  const Var second = numkit::scale(numkit::log(numkit::scale(numkit::sum(c), 1.0 / static_cast<double>(k))),
                                   -hp.confidence_weight);
  return numkit::add(first, second);
}

Var mean_l1_loss(const Var& actions, std::span<const double> target,
                 std::span<const std::uint8_t> pad) {
  check_target(actions, target, pad);
  const std::size_t k = pad.size();
  numkit::Tape& tape = *actions.tape();
  const Var t = tape.constant(Tensor({k, 3}, {target.begin(), target.end()}));
  const Var err = numkit::sum_last(numkit::abs(numkit::sub(actions, t)));
  return numkit::scale(numkit::sum(numkit::mul(err, tape.constant(keep_mask(pad)))),
                       1.0 / static_cast<double>(3 * k));
}

double racct_loss_value(const ActionConfidenceChunk& pred, std::span<const double> target,
                        std::span<const std::uint8_t> pad, const HyperParams& hp) {
  const std::size_t k = pred.size();
  if (pred.actions.size() != 3 * k || target.size() != 3 * k || pad.size() != k) {
    throw std::invalid_argument("racct_loss_value: shape mismatch");
  }
  double first = 0.0;
  double csum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double c = pred.confidences[i];
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("loss: confidence outside (0,1)");
    csum += c;
    if (pad[i]) continue;
    double err = 0.0;
    for (std::size_t d = 0; d < 3; ++d) err += std::abs(pred.actions[3 * i + d] - target[3 * i + d]);
    first += c * err / (static_cast<double>(k) * (hp.loss_floor + 1.0 - c));
  }
  return first - hp.confidence_weight * std::log(csum / static_cast<double>(k));
}

}  // namespace nti::policy
