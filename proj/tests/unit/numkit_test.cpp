#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "nti/numkit/adam.hpp"
#include "nti/numkit/checkpoint.hpp"
#include "nti/numkit/grad_check.hpp"
#include "nti/numkit/ops.hpp"

namespace nk = nti::numkit;

namespace {

nk::Tensor random_tensor(nk::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  nk::Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// Two-layer perceptron with a smooth scalar head.
struct Mlp {
  nk::Parameter w1{"w1", {}}, b1{"b1", {}}, w2{"w2", {}}, b2{"b2", {}};
  nk::Tensor input;

  explicit Mlp(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    w1.value = random_tensor({4, 6}, rng, 0.5);
    b1.value = random_tensor({6}, rng, 0.1);
    w2.value = random_tensor({6, 2}, rng, 0.5);
    b2.value = random_tensor({2}, rng, 0.1);
    input = random_tensor({3, 4}, rng);
  }

  std::vector<nk::Parameter*> params() { return {&w1, &b1, &w2, &b2}; }

  nk::Var loss(nk::Tape& tape) {
    auto x = tape.constant(input);
    auto h = nk::tanh(nk::add(nk::matmul(x, tape.parameter(w1)), tape.parameter(b1)));
    auto y = nk::add(nk::matmul(h, tape.parameter(w2)), tape.parameter(b2));
    return nk::mean(nk::mul(y, y));
  }
};

}  // namespace

TEST(Backward, SquareAtThree) {
  nk::Parameter x{"x", nk::Tensor::scalar(3.0)};
  nk::Tape tape;
  auto v = tape.parameter(x);
  auto f = nk::mul(v, v);
  auto g = nk::backward(tape, f);
  EXPECT_DOUBLE_EQ(g.of(x).item(), 6.0);
}

TEST(Backward, SumGivesOnes) {
  nk::Parameter p{"p", nk::Tensor({2, 3}, {1, 2, 3, 4, 5, 6})};
  nk::Tape tape;
  auto g = nk::backward(tape, nk::sum(tape.parameter(p)));
  for (double v : g.of(p).values()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, RejectsNonScalarOutput) {
  nk::Parameter p{"p", nk::Tensor({2}, {1, 2})};
  nk::Tape tape;
  auto v = tape.parameter(p);
  EXPECT_THROW(nk::backward(tape, v), std::invalid_argument);
}

TEST(Backward, UnknownParameterIsAnError) {
  nk::Parameter p{"p", nk::Tensor::scalar(1.0)};
  nk::Parameter other{"other", nk::Tensor::scalar(1.0)};
  nk::Tape tape;
  auto g = nk::backward(tape, nk::exp(tape.parameter(p)));
  EXPECT_THROW(g.of(other), std::invalid_argument);
}

TEST(Backward, IsIdempotent) {
  Mlp mlp(3);
  nk::Tape tape;
  auto loss = mlp.loss(tape);
  const std::size_t records = tape.size();
  auto g1 = nk::backward(tape, loss);
  auto g2 = nk::backward(tape, loss);
  EXPECT_EQ(tape.size(), records);
  for (auto* p : mlp.params()) EXPECT_EQ(g1.of(*p).values(), g2.of(*p).values());

  g1.accumulate(g2);
  for (auto* p : mlp.params()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      EXPECT_DOUBLE_EQ(g1.of(*p)[i], 2.0 * g2.of(*p)[i]);
    }
  }
}

TEST(Backward, TwoLayerPerceptronMatchesFiniteDifferences) {
  Mlp mlp(11);
  nk::Tape tape;
  auto grads = nk::backward(tape, mlp.loss(tape));
  const double h = 1e-5;
  double worst = 0.0;
  for (auto* p : mlp.params()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      nk::Tape t1;
      const double up = mlp.loss(t1).value().item();
      p->value[i] = orig - h;
      nk::Tape t2;
      const double down = mlp.loss(t2).value().item();
      p->value[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads.of(*p)[i];
      worst = std::max(worst, std::abs(numeric - analytic) /
                                  std::max({std::abs(numeric), std::abs(analytic), 1e-12}));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Ops, EveryPrimitivePassesGradCheck) {
  std::mt19937_64 rng(5);
  nk::Parameter a{"a", random_tensor({3, 4}, rng)};
  nk::Parameter b{"b", random_tensor({4, 2}, rng)};
  nk::Parameter row{"row", random_tensor({4}, rng)};
  nk::Parameter cube{"cube", random_tensor({2, 3, 2}, rng)};
  std::vector<nk::Parameter*> params{&a, &b, &row, &cube};
  auto loss = [&](nk::Tape& tape) {
    auto av = tape.parameter(a);
    auto bv = tape.parameter(b);
    auto rv = tape.parameter(row);
    auto cv = tape.parameter(cube);
    auto ln = nk::layer_norm(nk::mul(av, rv));
    auto sm = nk::softmax(nk::add(ln, rv));
    auto mm = nk::matmul(sm, bv);                     // [3, 2]
    auto tr = nk::transpose(mm);                      // [2, 3]
    auto pc = nk::reshape(nk::permute(cv, {2, 0, 1}), {2, 6});
    auto cat = nk::concat(std::vector<nk::Var>{tr, nk::slice(pc, 1, 1, 3)}, 1);  // [2, 6]
    auto act = nk::add(nk::gelu(cat), nk::sigmoid(nk::scale(cat, 0.7)));
    auto pos = nk::add_scalar(nk::exp(nk::scale(act, 0.3)), 0.5);
    auto r = nk::mul(nk::log(pos), nk::reciprocal(pos));
    auto s = nk::sum_last(nk::add(nk::tanh(r), nk::abs(nk::add_scalar(cat, 3.0))));
    return nk::add(nk::mean(s), nk::sum(nk::sub(s, s)));
  };
  auto report = nk::grad_check(params, loss, 1e-6);
  EXPECT_TRUE(report.within_tolerance) << report.max_relative_error;
  EXPECT_EQ(report.blocks.size(), 4u);
}

TEST(Ops, BroadcastRejectsIncompatibleShapes) {
  nk::Tape tape;
  auto a = tape.constant(nk::Tensor({2, 3}));
  auto b = tape.constant(nk::Tensor({2}));
  EXPECT_THROW(nk::add(a, b), std::invalid_argument);
  EXPECT_THROW(nk::matmul(a, a), std::invalid_argument);
  EXPECT_THROW(nk::slice(a, 1, 2, 2), std::invalid_argument);
}

TEST(Ops, LogOfNonPositiveThrows) {
  nk::Tape tape;
  auto a = tape.constant(nk::Tensor({2}, {1.0, 0.0}));
  EXPECT_THROW(nk::log(a), std::domain_error);
}

TEST(GradCheck, IdentityLossIsExact) {
  nk::Parameter p{"p", nk::Tensor::scalar(0.25)};
  std::vector<nk::Parameter*> params{&p};
  auto report = nk::grad_check(params, [&](nk::Tape& t) { return nk::sum(t.parameter(p)); }, 1e-4);
  EXPECT_LT(report.max_relative_error, 1e-9);
  EXPECT_TRUE(report.within_tolerance);
}

TEST(GradCheck, CorruptedBackwardRuleIsDetected) {
  nk::Parameter p{"p", nk::Tensor({3}, {0.3, -0.2, 1.1})};
  std::vector<nk::Parameter*> params{&p};
  auto wrong_sin = [&](nk::Tape& t) {
    auto x = t.parameter(p);
    auto y = nk::map_unary(
        x, [](double v) { return std::sin(v); }, [](double v) { return 1.1 * std::cos(v); });
    return nk::sum(y);
  };
  auto report = nk::grad_check(params, wrong_sin, 1e-4);
  EXPECT_FALSE(report.within_tolerance);
  EXPECT_GT(report.max_relative_error, 0.05);
}

TEST(Adam, ZeroGradientIsNoOp) {
  nk::Parameter p{"p", nk::Tensor({3}, {1.0, -2.0, 0.5})};
  std::vector<nk::Parameter*> params{&p};
  nk::AdamState state(params);
  const auto before = p.value.values();
  nk::Gradients g;
  g.set(&p, nk::Tensor({3}, 0.0));
  for (int i = 0; i < 25; ++i) nk::adam_step(params, g, state, 1e-3);
  EXPECT_EQ(p.value.values(), before);
  EXPECT_EQ(state.step(), 25u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  nk::Parameter p{"p", nk::Tensor::scalar(0.0)};
  std::vector<nk::Parameter*> params{&p};
  nk::AdamState state(params);
  nk::Gradients g;
  g.set(&p, nk::Tensor::scalar(1.0));
  nk::adam_step(params, g, state, 1e-5);
  // m_hat = v_hat = 1, so the step is lr / (1 + 1e-8).
  EXPECT_NEAR(p.value.item(), -1e-5 / (1.0 + 1e-8), 1e-18);
}

TEST(Adam, RepeatedStepsDescend) {
  nk::Parameter p{"p", nk::Tensor::scalar(2.0)};
  std::vector<nk::Parameter*> params{&p};
  nk::AdamState state(params);
  nk::Gradients g;
  g.set(&p, nk::Tensor::scalar(-0.4));
  nk::adam_step(params, g, state, 1e-2);
  const double after_one = p.value.item();
  nk::adam_step(params, g, state, 1e-2);
  EXPECT_GT(after_one, 2.0);
  EXPECT_GT(p.value.item(), after_one);
}

TEST(Adam, RejectsBadInputs) {
  nk::Parameter p{"p", nk::Tensor({2}, {0.0, 0.0})};
  std::vector<nk::Parameter*> params{&p};
  nk::AdamState state(params);
  nk::Gradients wrong_shape;
  wrong_shape.set(&p, nk::Tensor({3}, 0.0));
  EXPECT_THROW(nk::adam_step(params, wrong_shape, state, 1e-3), std::invalid_argument);
  nk::Gradients nan;
  nan.set(&p, nk::Tensor({2}, {0.0, std::nan("")}));
  EXPECT_THROW(nk::adam_step(params, nan, state, 1e-3), std::domain_error);
  EXPECT_EQ(state.step(), 0u);
  EXPECT_EQ(p.value[1], 0.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(9);
  nk::Checkpoint ck;
  ck.metadata = R"({"variant":"racct"})";
  ck.blocks.push_back({"enc.w", random_tensor({3, 5}, rng)});
  ck.blocks.push_back({"head.b", nk::Tensor({1}, {-0.0})});
  const auto path = std::filesystem::temp_directory_path() / "nti_numkit_ckpt.bin";
  nk::save_checkpoint(path, ck);
  const auto back = nk::load_checkpoint(path);
  EXPECT_EQ(back.metadata, ck.metadata);
  ASSERT_EQ(back.blocks.size(), 2u);
  EXPECT_EQ(back.blocks[0].value.shape(), ck.blocks[0].value.shape());
  EXPECT_EQ(std::memcmp(back.blocks[0].value.data().data(), ck.blocks[0].value.data().data(),
                        15 * sizeof(double)),
            0);
  EXPECT_TRUE(std::signbit(back.blocks[1].value[0]));
  EXPECT_EQ(nk::encode_checkpoint(back), nk::encode_checkpoint(ck));
  std::filesystem::remove(path);
}

TEST(Checkpoint, HeaderIsLittleEndianAndVersioned) {
  nk::Checkpoint ck;
  ck.blocks.push_back({"x", nk::Tensor::scalar(1.0)});
  const auto bytes = nk::encode_checkpoint(ck);
  EXPECT_EQ(bytes.substr(0, 7), "NTICKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), nk::kCheckpointVersion);
  EXPECT_EQ(bytes[9], 0);
  // 1.0 = 0x3FF0000000000000, stored least significant byte first.
  EXPECT_EQ(static_cast<unsigned char>(bytes.back()), 0x3F);
  EXPECT_THROW(nk::decode_checkpoint(bytes.substr(0, bytes.size() - 1)), std::runtime_error);
  EXPECT_THROW(nk::decode_checkpoint("garbage!"), std::runtime_error);
}
