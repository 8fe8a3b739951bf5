#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "nti/numkit/grad_check.hpp"
#include "nti/numkit/ops.hpp"
#include "nti/policy/policy.hpp"

namespace nti::policy {
namespace {

using numkit::Tape;
using numkit::Tensor;
using numkit::Var;
using A3 = std::array<double, 3>;

HyperParams tiny() {
  HyperParams hp;
  hp.chunk = 4;
  hp.latent_dim = 2;
  hp.width = 8;
  hp.ffn_width = 8;
  hp.heads = 2;
  hp.encoder_layers = 1;
  hp.decoder_layers = 1;
  hp.style_layers = 1;
  hp.image_side = 8;
  hp.patch = 4;
  hp.batch_size = 4;
  hp.learning_rate = 1e-3;
  return hp;
}

HyperParams small() {
  HyperParams hp = HyperParams::desk();
  hp.chunk = 10;
  hp.width = 16;
  hp.ffn_width = 32;
  hp.latent_dim = 4;
  return hp;
}

Observation random_obs(const HyperParams& hp, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0), n(-1.5, 1.5);
  Observation o;
  o.image.resize(static_cast<std::size_t>(hp.image_channels * hp.image_side * hp.image_side));
  for (double& v : o.image) v = u(rng);
  o.proprio.resize(data::kProprioDim);
  for (double& v : o.proprio) v = n(rng);
  o.s_kappa = n(rng);
  return o;
}

// Weighted average evaluated directly from its definition.
double ensemble_oracle(const std::vector<double>& a, const std::vector<double>& c, double m) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::exp(-m * i) * c[i] * a[i];
    den += std::exp(-m * i) * c[i];
  }
  return num / den;
}

TEST(Ensemble, SingleChunkReturnsItsAction) {
  const std::vector<A3> a{{0.3, -1.2, 4.0}};
  for (double c : {0.01, 0.5, 0.99}) {
    const std::vector<double> conf{c};
    EXPECT_EQ(temporal_ensemble(a, conf, 0.95), a[0]);
  }
}

TEST(Ensemble, EqualActionsReturnThatAction) {
  const std::vector<A3> a(5, A3{0.7, -0.2, 0.1});
  const std::vector<double> c{0.1, 0.9, 0.4, 0.33, 0.8};
  for (double m : {0.01, 0.95, 3.0}) {
    const A3 p = temporal_ensemble(a, c, m);
    for (int d = 0; d < 3; ++d) EXPECT_NEAR(p[d], a[0][d], 1e-12);
  }
}

TEST(Ensemble, HandEvaluatedTwoPredictions) {
  const std::vector<A3> a{{1.0, 1.0, 1.0}, {2.0, 2.0, 2.0}};
  const std::vector<double> c{1.0, 0.5};
  const double expected = (1.0 + std::exp(-0.95) * 0.5 * 2.0) / (1.0 + std::exp(-0.95) * 0.5);
  const A3 p = temporal_ensemble(a, c, 0.95);
  EXPECT_NEAR(p[0], expected, 1e-9);
  EXPECT_NEAR(p[0], 1.1620, 5e-5);
}

TEST(Ensemble, RescalingInvarianceAndConvexHull) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0), c(0.01, 0.99), s(0.1, 10.0);
  std::uniform_int_distribution<int> count(1, 80);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = count(rng);
    std::vector<A3> a(n);
    std::vector<double> conf(n), scaled(n);
    const double factor = s(rng);
    for (int i = 0; i < n; ++i) {
      a[i] = {u(rng), u(rng), u(rng)};
      conf[i] = c(rng);
      scaled[i] = conf[i] * factor;
    }
    for (EnsembleOrder order : {EnsembleOrder::kOldestFirst, EnsembleOrder::kNewestFirst}) {
      const A3 p = temporal_ensemble(a, conf, 0.95, order);
      const A3 q = temporal_ensemble(a, scaled, 0.95, order);
      for (int d = 0; d < 3; ++d) {
        EXPECT_NEAR(p[d], q[d], 1e-12 * (1.0 + std::abs(p[d])));
        double lo = a[0][d], hi = a[0][d];
        for (const auto& v : a) {
          lo = std::min(lo, v[d]);
          hi = std::max(hi, v[d]);
        }
        EXPECT_GE(p[d], lo - 1e-12);
        EXPECT_LE(p[d], hi + 1e-12);
      }
    }
    std::vector<double> first(n);
    for (int i = 0; i < n; ++i) first[i] = a[i][0];
    EXPECT_NEAR(temporal_ensemble(a, conf, 0.95)[0], ensemble_oracle(first, conf, 0.95), 1e-12);
  }
}

TEST(Ensemble, NewestFirstReversesWeights) {
  const std::vector<A3> a{{1.0, 0, 0}, {2.0, 0, 0}};
  const std::vector<double> c{1.0, 0.5};
  const double expected = (std::exp(-0.95) * 1.0 + 0.5 * 2.0) / (std::exp(-0.95) + 0.5);
  EXPECT_NEAR(temporal_ensemble(a, c, 0.95, EnsembleOrder::kNewestFirst)[0], expected, 1e-12);
}

TEST(Ensemble, Errors) {
  EXPECT_THROW(temporal_ensemble({}, {}, 0.95), std::out_of_range);
  const std::vector<A3> a(2);
  const std::vector<double> c{1.0};
  EXPECT_THROW(temporal_ensemble(a, c, 0.95), std::invalid_argument);
}

ActionConfidenceChunk constant_chunk(std::size_t k, double value, double conf) {
  ActionConfidenceChunk c;
  c.actions.assign(3 * k, value);
  c.confidences.assign(k, conf);
  return c;
}

TEST(EnsembleBuffer, CoverageAndEviction) {
  EnsembleBuffer buf(3);
  EXPECT_THROW(buf.action_at(0, 0.95), std::out_of_range);
  buf.push(0, constant_chunk(3, 1.0, 1.0));
  buf.push(1, constant_chunk(3, 2.0, 0.5));
  EXPECT_NEAR(buf.action_at(1, 0.95)[0], (1.0 + std::exp(-0.95)) / (1.0 + std::exp(-0.95) * 0.5), 1e-12);
  EXPECT_EQ(buf.action_at(0, 0.95)[0], 1.0);
  buf.push(2, constant_chunk(3, 3.0, 0.9));
  buf.push(3, constant_chunk(3, 4.0, 0.9));
  EXPECT_EQ(buf.size(), 3u);  // chunk from step 0 no longer covers step 3
  EXPECT_THROW(buf.action_at(0, 0.95), std::out_of_range);
  EXPECT_THROW(buf.push(3, constant_chunk(3, 1.0, 1.0)), std::invalid_argument);
  EXPECT_THROW(buf.push(9, constant_chunk(2, 1.0, 1.0)), std::invalid_argument);
}

TEST(EnsembleBuffer, NeverHoldsMoreThanChunk) {
  EnsembleBuffer buf(5);
  for (int t = 0; t < 40; ++t) {
    buf.push(t, constant_chunk(5, t, 0.5));
    EXPECT_LE(buf.size(), 5u);
    EXPECT_NO_THROW(buf.action_at(t, 0.95));
  }
}

double loss_of(std::vector<double> pred, std::vector<double> conf, std::vector<double> target,
               std::vector<std::uint8_t> pad, const HyperParams& hp) {
  Tape tape;
  const std::size_t k = conf.size();
  const Var a = tape.constant(Tensor({k, 3}, pred));
  const Var c = tape.constant(Tensor({k, 1}, conf));
  return racct_loss(a, c, target, pad, hp).value().item();
}

TEST(Loss, Examples) {
  HyperParams hp;
  EXPECT_NEAR(loss_of({0.1, 0.2, 0.3}, {1.0}, {0.1, 0.2, 0.3}, {0}, hp), 0.0, 1e-15);
  const double one = 0.5 / 0.7 + 0.1 * std::log(2.0);
  EXPECT_NEAR(loss_of({1.0, 0.0, 0.0}, {0.5}, {0.0, 0.0, 0.0}, {0}, hp), one, 1e-12);
  EXPECT_NEAR(one, 0.7836, 5e-5);
  const double two = 0.5 - 0.1 * std::log(0.7);
  EXPECT_NEAR(loss_of({0.25, -0.25, 0.0, 1.0, 1.0, 1.0}, {0.8, 0.6}, {0, 0, 0, 1, 1, 1}, {0, 0}, hp),
              two, 1e-12);
  EXPECT_NEAR(two, 0.5357, 5e-5);
}

TEST(Loss, PadsOnlyEnterConfidenceTerm) {
  HyperParams hp;
  const double padded = loss_of({5, 5, 5, 0, 0, 0}, {0.9, 0.3}, {0, 0, 0, 0, 0, 0}, {1, 0}, hp);
  EXPECT_NEAR(padded, -0.1 * std::log(0.6), 1e-12);
}

TEST(Loss, PlainValueMatchesTape) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), c(0.05, 0.95);
  HyperParams hp;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + trial % 7;
    ActionConfidenceChunk pred;
    std::vector<double> target(3 * k);
    std::vector<std::uint8_t> pad(k);
    for (std::size_t i = 0; i < k; ++i) {
      pred.confidences.push_back(c(rng));
      pad[i] = (i + 1 == k && trial % 2) ? 1 : 0;
    }
    for (std::size_t i = 0; i < 3 * k; ++i) {
      pred.actions.push_back(u(rng));
      target[i] = u(rng);
    }
    EXPECT_NEAR(racct_loss_value(pred, target, pad, hp),
                loss_of(pred.actions, pred.confidences, target, pad, hp), 1e-12);
  }
}

TEST(Loss, ConfidenceDerivativeSigns) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0), c(0.05, 0.95);
  HyperParams first_only;
  first_only.confidence_weight = 0.0;
  HyperParams hp;
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + trial % 10;
    ActionConfidenceChunk pred;
    std::vector<double> target(3 * k), zero(3 * k, 0.0);
    const std::vector<std::uint8_t> pad(k, 0);
    for (std::size_t i = 0; i < k; ++i) pred.confidences.push_back(c(rng));
    for (std::size_t i = 0; i < 3 * k; ++i) {
      pred.actions.push_back(u(rng));
      target[i] = u(rng);
    }
    for (std::size_t i = 0; i < k; ++i) {
      ActionConfidenceChunk up = pred, down = pred;
      up.confidences[i] += h;
      down.confidences[i] -= h;
      const double d_first = racct_loss_value(up, target, pad, first_only) -
                             racct_loss_value(down, target, pad, first_only);
      EXPECT_GT(d_first, 0.0);
      // Exact predictions isolate the confidence term.
      ActionConfidenceChunk up0 = up, down0 = down;
      up0.actions = zero;
      down0.actions = zero;
      const double d_second =
          racct_loss_value(up0, zero, pad, hp) - racct_loss_value(down0, zero, pad, hp);
      EXPECT_LT(d_second, 0.0);
    }
  }
}

TEST(Loss, RejectsConfidenceOutsideUnitInterval) {
  HyperParams hp;
  ActionConfidenceChunk pred = constant_chunk(2, 0.0, 0.5);
  const std::vector<double> target(6, 0.0);
  const std::vector<std::uint8_t> pad(2, 0);
  pred.confidences[1] = 0.0;
  EXPECT_THROW(racct_loss_value(pred, target, pad, hp), std::invalid_argument);
  pred.confidences[1] = 1.2;
  EXPECT_THROW(racct_loss_value(pred, target, pad, hp), std::invalid_argument);
  EXPECT_THROW(loss_of(pred.actions, pred.confidences, target, pad, hp), std::invalid_argument);
}

TEST(Loss, MeanL1) {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3}, {1, -1, 0.5, 9, 9, 9}));
  const std::vector<double> target{0, 0, 0, 0, 0, 0};
  const std::vector<std::uint8_t> pad{0, 1};
  EXPECT_NEAR(mean_l1_loss(a, target, pad).value().item(), 2.5 / 6.0, 1e-15);
}

TEST(Style, GaussianKl) {
  const std::vector<double> zero{0.0}, one{1.0};
  EXPECT_EQ(gaussian_kl(zero, zero), 0.0);
  EXPECT_NEAR(gaussian_kl(one, zero), 0.5, 1e-15);
  const std::vector<double> lv{std::log(2.0)};
  EXPECT_NEAR(gaussian_kl(zero, lv), 0.5 * (2.0 - std::log(2.0) - 1.0), 1e-15);
}

TEST(Style, InferenceUsesZeroLatent) {
  const Model m(tiny(), Variant::kRacct, 1);
  Tape tape;
  for (double v : m.zero_style(tape).value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Style, ReparameterizationMatchesMeanAndSpread) {
  const HyperParams hp = tiny();
  const Model m(hp, Variant::kAct, 4);
  const std::vector<double> actions(3 * hp.chunk, 0.2), proprio(6, 0.1);
  const std::vector<double> noise{0.5, -1.0};
  Tape tape;
  const auto s = m.encode_style(tape, actions, proprio, noise, false);
  for (std::size_t i = 0; i < 2; ++i) {
    const double expected = s.mu.value()[i] + std::exp(0.5 * s.log_var.value()[i]) * noise[i];
    EXPECT_NEAR(s.z.value()[i], expected, 1e-15);
  }
}

TEST(Variants, FlagsRoundTrip) {
  for (Variant v : kAllVariants) {
    EXPECT_EQ(variant_of(flags_of(v)), v);
    EXPECT_EQ(variant_from_string(to_string(v)), v);
  }
  EXPECT_EQ(variant_of({false, false}), Variant::kAct);
  EXPECT_THROW(variant_from_string("gpt"), std::invalid_argument);
}

TEST(Variants, SameParameterStructure) {
  const Model act(tiny(), Variant::kAct, 1);
  const Model racct(tiny(), Variant::kRacct, 1);
  ASSERT_EQ(act.parameters().size(), racct.parameters().size());
  for (std::size_t i = 0; i < act.parameters().size(); ++i) {
    EXPECT_EQ(act.parameters()[i]->name, racct.parameters()[i]->name);
    EXPECT_EQ(act.parameters()[i]->value.values(), racct.parameters()[i]->value.values());
  }
}

TEST(Model, OutputShapesAndConfidenceRange) {
  const HyperParams hp = small();
  std::mt19937_64 rng(2);
  const Observation obs = random_obs(hp, rng);
  for (Variant v : kAllVariants) {
    const Model m(hp, v, 9);
    const auto [chunk, state] = m.infer(obs, nullptr);
    EXPECT_EQ(chunk.actions.size(), static_cast<std::size_t>(3 * hp.chunk));
    EXPECT_EQ(chunk.confidences.size(), static_cast<std::size_t>(hp.chunk));
    EXPECT_EQ(state.tokens.shape(), (numkit::Shape{10, 16}));
    for (double c : chunk.confidences) {
      if (flags_of(v).confidence) {
        EXPECT_GT(c, 0.0);
        EXPECT_LT(c, 1.0);
        EXPECT_NEAR(c, 0.7, 0.1);
      } else {
        EXPECT_EQ(c, 1.0);
      }
    }
  }
}

TEST(Model, RejectsBadShapes) {
  const Model m(tiny(), Variant::kRacct, 1);
  Observation obs;
  obs.image.assign(10, 0.0);
  obs.proprio.assign(6, 0.0);
  EXPECT_THROW(m.infer(obs, nullptr), std::invalid_argument);
  DecoderState bad{Tensor({3, 8})};
  EXPECT_THROW(m.shift_recurrent_input(&bad), std::invalid_argument);
  EXPECT_THROW(Model(HyperParams{.chunk = 0}, Variant::kAct, 1), std::invalid_argument);
}

TEST(Recurrence, FirstStepUsesStartTokens) {
  const HyperParams hp = small();
  const Model m(hp, Variant::kRacct, 5);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2; ++i) {
    const Observation obs = random_obs(hp, rng);
    Tape tape;
    const auto out = m.forward(tape, obs, m.zero_style(tape), nullptr, false);
    EXPECT_EQ(out.decoder_input.value().values(), m.shift_recurrent_input(nullptr).values());
  }
}

TEST(Recurrence, ShiftIdentityOverHundredSteps) {
  const HyperParams hp = small();
  const Model m(hp, Variant::kRacct, 5);
  const auto k = static_cast<std::size_t>(hp.chunk);
  const auto w = static_cast<std::size_t>(hp.width);
  std::mt19937_64 rng(8);
  std::optional<DecoderState> prev;
  for (int t = 0; t < 100; ++t) {
    const Observation obs = random_obs(hp, rng);
    Tape tape;
    Var prev_tokens;
    if (prev) prev_tokens = tape.constant(prev->tokens);
    const auto out = m.forward(tape, obs, m.zero_style(tape), prev ? &prev_tokens : nullptr, false);
    const Tensor& input = out.decoder_input.value();
    if (prev) {
      for (std::size_t i = 0; i + 1 < k; ++i) {
        for (std::size_t j = 0; j < w; ++j) ASSERT_EQ(input.at(i, j), prev->tokens.at(i + 1, j));
      }
      EXPECT_EQ(input.values(), m.shift_recurrent_input(&*prev).values());
    }
    prev = DecoderState{out.tokens.value()};
  }
}

TEST(Recurrence, PreviousStateChangesOutputOnlyForRecurrentVariants) {
  const HyperParams hp = small();
  std::mt19937_64 rng(4);
  const Observation obs = random_obs(hp, rng);
  for (Variant v : kAllVariants) {
    const Model m(hp, v, 13);
    const DecoderState a = m.infer(random_obs(hp, rng), nullptr).second;
    const DecoderState b = m.infer(random_obs(hp, rng), nullptr).second;
    const auto out_a = m.infer(obs, &a).first;
    const auto out_b = m.infer(obs, &b).first;
    if (flags_of(v).recurrent) {
      EXPECT_NE(out_a.actions, out_b.actions) << to_string(v);
    } else {
      EXPECT_EQ(out_a.actions, out_b.actions) << to_string(v);
    }
  }
}

TEST(Gradients, FullNetworkMatchesFiniteDifferences) {
  const HyperParams hp = tiny();
  for (Variant v : {Variant::kRacct, Variant::kAct}) {
    Model m(hp, v, 17);
    ASSERT_LE(m.parameter_count(), 10000u);
    std::mt19937_64 rng(6);
    TrainSample s;
    s.obs = random_obs(hp, rng);
    s.previous = m.infer(random_obs(hp, rng), nullptr).second;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 3 * hp.chunk; ++i) s.actions.push_back(u(rng));
    s.pad = {0, 0, 0, 1};
    s.noise = {0.3, -0.8};
    auto params = m.parameters();
    // Attention key biases have an exactly zero gradient; central differences there only see
    // roundoff of order 1e-10, so entries below 1e-5 are compared absolutely.
    const auto report = numkit::grad_check(
        params, [&](Tape& tape) { return sample_loss(m, tape, s).total; }, 1e-4,
        {.step = 1e-5, .magnitude_floor = 1e-5});
    EXPECT_TRUE(report.within_tolerance) << to_string(v) << " max rel " << report.max_relative_error;

  }
}

// Synthetic windows whose actions depend on the proprio state.
data::Dataset synthetic_dataset(const HyperParams& hp, int episodes, int length) {
  std::vector<data::EpisodeData> eps;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> px(0, 255);
  for (int e = 0; e < episodes; ++e) {
    data::EpisodeData d;
    for (int t = 0; t < length; ++t) {
      data::FrameFeatures f;
      f.side = hp.image_side;
      f.gray.resize(static_cast<std::size_t>(hp.image_side * hp.image_side));
      f.mask.resize(f.gray.size());
      for (auto& g : f.gray) g = static_cast<std::uint8_t>(px(rng));
      f.s_kappa = 0.5 + 0.01 * t;
      d.frames.push_back(f);
      const double x = 0.001 * t + 0.01 * e;
      for (double v : {x, 0.002 * e, 0.1, 0.0, 0.1 * t, 0.0}) d.proprio.push_back(v);
      for (double v : {0.001 + 0.0001 * e, -0.0005 * std::sin(t), 0.0}) d.actions.push_back(v);
    }
    eps.push_back(std::move(d));
  }
  data::DatasetConfig cfg;
  cfg.chunk = hp.chunk;
  cfg.image_side = hp.image_side;
  return data::Dataset(cfg, std::move(eps));
}

TEST(Trainer, ActReconstructionIsMeanL1) {
  const HyperParams hp = tiny();
  const data::Dataset ds = synthetic_dataset(hp, 2, 10);
  Model m(hp, Variant::kAct, 3);
  const Trainer trainer(m, ds, 1);
  std::mt19937_64 rng(2);
  const TrainSample s = trainer.sample(4, rng);
  Tape tape;
  const LossTerms terms = sample_loss(m, tape, s);
  const auto chunk = m.infer(s.obs, nullptr).first;
  Tape t2;
  const Model::StyleOutputs style = m.encode_style(t2, s.actions, s.obs.proprio, s.noise, false);
  const auto out = m.forward(t2, s.obs, style.z, nullptr, false);
  double l1 = 0.0;
  for (int i = 0; i < hp.chunk; ++i) {
    if (s.pad[i]) continue;
    for (int d = 0; d < 3; ++d) l1 += std::abs(out.actions.value()[3 * i + d] - s.actions[3 * i + d]);
  }
  EXPECT_NEAR(terms.reconstruction.value().item(), l1 / (3.0 * hp.chunk), 1e-12);
}

TEST(Trainer, LossDecreasesAndIsDeterministic) {
  const HyperParams hp = tiny();
  const data::Dataset ds = synthetic_dataset(hp, 3, 12);
  for (Variant v : {Variant::kAct, Variant::kRacct}) {
    Model a(hp, v, 3), b(hp, v, 3);
    Trainer ta(a, ds, 42), tb(b, ds, 42);
    const TrainReport ra = ta.run(150, 1);
    const TrainReport rb = tb.run(150, 1);
    ASSERT_FALSE(ra.diverged) << ra.error;
    ASSERT_EQ(ra.curve.size(), 150u);
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 20; ++i) {
      early += ra.curve[i].loss;
      late += ra.curve[130 + i].loss;
    }
    EXPECT_LT(late, early) << to_string(v);
    for (std::size_t i = 0; i < ra.curve.size(); ++i) EXPECT_EQ(ra.curve[i].loss, rb.curve[i].loss);
  }
}

TEST(Trainer, RejectsEmptyOrMismatchedDataset) {
  HyperParams hp = tiny();
  const data::Dataset ds = synthetic_dataset(hp, 1, 5);
  hp.chunk = 5;
  Model m(hp, Variant::kAct, 1);
  EXPECT_THROW(Trainer(m, ds, 1), std::invalid_argument);
}

TEST(Checkpoint, ReloadIsBitwiseIdentical) {
  const HyperParams hp = small();
  const data::Dataset ds = synthetic_dataset(hp, 1, 6);
  const Model m(hp, Variant::kRacct, 77);
  const auto path = std::filesystem::temp_directory_path() / "nti_policy_test.ckpt";
  save_policy(path, m, ds.stats(), {{"seed", 77}});
  const PolicyBundle back = load_policy(path);
  EXPECT_EQ(back.model.variant(), Variant::kRacct);
  EXPECT_EQ(back.model.hp().to_json(), hp.to_json());
  EXPECT_EQ(back.stats.action.std, ds.stats().action.std);
  EXPECT_EQ(back.extra.at("seed"), 77);
  std::mt19937_64 rng(5);
  const Observation obs = random_obs(hp, rng);
  const auto [c1, s1] = m.infer(obs, nullptr);
  const auto [c2, s2] = back.model.infer(obs, nullptr);
  EXPECT_EQ(c1.actions, c2.actions);
  EXPECT_EQ(c1.confidences, c2.confidences);
  EXPECT_EQ(m.infer(obs, &s1).first.actions, back.model.infer(obs, &s2).first.actions);
  std::filesystem::remove(path);
}

TEST(HyperParamsTest, JsonRoundTripAndValidation) {
  HyperParams hp = HyperParams::full();
  hp.ensemble_order = EnsembleOrder::kNewestFirst;
  EXPECT_EQ(HyperParams::from_json(hp.to_json()).to_json(), hp.to_json());
  HyperParams bad;
  bad.loss_floor = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = {};
  bad.heads = 5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_EQ(HyperParams{}.chunk, 80);
  EXPECT_EQ(HyperParams{}.ensemble_decay, 0.95);
  EXPECT_EQ(HyperParams{}.loss_floor, 0.2);
  EXPECT_EQ(HyperParams{}.confidence_weight, 0.1);
}

}  // namespace
}  // namespace nti::policy
