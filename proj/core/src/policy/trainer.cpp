#include <chrono>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "nti/numkit/ops.hpp"
#include "nti/policy/policy.hpp"

namespace nti::policy {

using numkit::Var;

LossTerms sample_loss(const Model& model, numkit::Tape& tape, const TrainSample& sample) {
  const HyperParams& hp = model.hp();
  const Model::StyleOutputs style =
      model.encode_style(tape, sample.actions, sample.obs.proprio, sample.noise, true);
  Model::Outputs out;
  if (model.flags().recurrent && sample.previous) {
    const Var tokens = tape.constant(sample.previous->tokens);
    out = model.forward(tape, sample.obs, style.z, &tokens, true);
  } else {
    out = model.forward(tape, sample.obs, style.z, nullptr, true);
  }
  LossTerms terms;
  terms.reconstruction = model.flags().confidence
                             ? racct_loss(out.actions, out.confidences, sample.actions, sample.pad, hp)
                             : mean_l1_loss(out.actions, sample.actions, sample.pad);
  const Var kl = numkit::scale(
      numkit::sum(numkit::add_scalar(
          numkit::sub(numkit::add(numkit::mul(style.mu, style.mu), numkit::exp(style.log_var)),
                      style.log_var),
          -1.0)),
      0.5);
  terms.total = numkit::add(terms.reconstruction, numkit::scale(kl, hp.kl_weight));
  return terms;
}

Trainer::Trainer(Model& model, const data::Dataset& dataset, std::uint64_t seed)
    : model_(model),
      dataset_(dataset),
      rng_(seed),
      params_(model.parameters()),
      adam_(params_) {
  if (dataset.size() == 0) throw std::invalid_argument("Trainer: empty dataset");
  if (dataset.config().chunk != model.hp().chunk) {
    throw std::invalid_argument("Trainer: dataset chunk differs from model chunk");
  }
}

TrainSample Trainer::sample(std::size_t index, std::mt19937_64& rng) const {
  const data::Window w = dataset_.window(index);
  TrainSample s;
  s.obs = Observation::from_window(w);
  if (model_.flags().recurrent && dataset_.locate(index).second > 0) {
    s.previous = model_.infer(Observation::from_window(dataset_.window(index - 1)), nullptr).second;
  }
  s.actions = w.actions;
  s.pad = w.pad;
  std::normal_distribution<double> normal(0.0, 1.0);
  s.noise.resize(static_cast<std::size_t>(model_.hp().latent_dim));
  for (double& v : s.noise) v = normal(rng);
  return s;
}

TrainStep Trainer::step() {
  std::uniform_int_distribution<std::size_t> pick(0, dataset_.size() - 1);
  const int batch = model_.hp().batch_size;
  numkit::Gradients total;
  double loss = 0.0;
  double recon = 0.0;
  for (int b = 0; b < batch; ++b) {
    const TrainSample s = sample(pick(rng_), rng_);
    numkit::Tape tape;
    const LossTerms terms = sample_loss(model_, tape, s);
    loss += terms.total.value().item();
    recon += terms.reconstruction.value().item();
    total.accumulate(numkit::backward(tape, terms.total));
  }
  loss /= batch;
  recon /= batch;
  if (!std::isfinite(loss) || !total.all_finite()) {
    throw std::runtime_error("training diverged at step " + std::to_string(steps_done_) +
                             ": non-finite loss");
  }
  total.scale(1.0 / batch);
  numkit::adam_step(params_, total, adam_, model_.hp().learning_rate);
  return {steps_done_++, loss, recon};
}

TrainReport Trainer::run(int steps, int log_every) {
  TrainReport report;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < steps; ++i) {
    try {
      const TrainStep s = step();
      if (log_every > 0 && (s.step % log_every == 0 || i + 1 == steps)) report.curve.push_back(s);
    } catch (const std::runtime_error& e) {
      report.diverged = true;
      report.error = e.what();
      break;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string train_curve_csv(const TrainReport& report) {
  std::string out = "step,loss,reconstruction\n";
  for (const TrainStep& s : report.curve) out += fmt::format("{},{},{}\n", s.step, s.loss, s.reconstruction);
  return out;
}

}  // namespace nti::policy
