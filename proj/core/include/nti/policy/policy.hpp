#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nti/data/dataset.hpp"
#include "nti/numkit/adam.hpp"
#include "nti/numkit/tape.hpp"

namespace nti::policy {

enum class Variant { kAct, kAcct, kRact, kRacct };

struct VariantFlags {
  bool confidence = false;
  bool recurrent = false;
};

VariantFlags flags_of(Variant v);
Variant variant_of(VariantFlags flags);
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
inline constexpr std::array<Variant, 4> kAllVariants{Variant::kAct, Variant::kAcct,
                                                     Variant::kRact, Variant::kRacct};

enum class EnsembleOrder { kOldestFirst, kNewestFirst };

struct HyperParams {
  int chunk = 80;
  double ensemble_decay = 0.95;
  EnsembleOrder ensemble_order = EnsembleOrder::kOldestFirst;
  double loss_floor = 0.2;         // epsilon
  double confidence_weight = 0.1;  // lambda
  int batch_size = 8;
  double learning_rate = 1e-5;
  int training_steps = 2000;
  double kl_weight = 10.0;

  int latent_dim = 32;
  int width = 64;
  int ffn_width = 128;
  int heads = 4;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int style_layers = 1;
  int image_side = 32;
  int image_channels = 2;
  int patch = 8;
  double confidence_init = 0.7;

  // Desk-scale defaults used by the CLI and the ablation driver.
  static HyperParams desk();
  // ACT-sized configuration.
  static HyperParams full();

  void validate() const;
  nlohmann::json to_json() const;
  static HyperParams from_json(const nlohmann::json& j);
};

struct Observation {
  std::vector<double> image;    // channels x side x side
  std::vector<double> proprio;  // normalized, data::kProprioDim
  double s_kappa = 0.0;         // normalized

  static Observation from_window(const data::Window& w);
};

struct ActionConfidenceChunk {
  std::vector<double> actions;      // k x 3
  std::vector<double> confidences;  // k

  std::size_t size() const { return confidences.size(); }
  std::array<double, 3> action(std::size_t i) const {
    return {actions[3 * i], actions[3 * i + 1], actions[3 * i + 2]};
  }
};

// Decoder output tokens of the previous control step, k x width.
struct DecoderState {
  numkit::Tensor tokens;
};

struct LatentStyle {
  std::vector<double> z;
  std::vector<double> mu;
  std::vector<double> log_var;
};

// KL(N(mu, exp(log_var)) || N(0, I)), summed over dimensions.
double gaussian_kl(std::span<const double> mu, std::span<const double> log_var);

class Model {
 public:
  Model(HyperParams hp, Variant variant, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const HyperParams& hp() const { return hp_; }
  Variant variant() const { return variant_; }
  VariantFlags flags() const { return flags_of(variant_); }

  std::vector<numkit::Parameter*> parameters();
  std::vector<const numkit::Parameter*> parameters() const;
  std::size_t parameter_count() const;
  numkit::Parameter* find(const std::string& name);

  struct Outputs {
    numkit::Var actions;      // k x 3
    numkit::Var confidences;  // k x 1; a constant one-tensor when the head is absent
    numkit::Var tokens;       // k x width
    numkit::Var decoder_input;  // before position embeddings
  };

  struct StyleOutputs {
    numkit::Var z;  // 1 x latent
    numkit::Var mu;
    numkit::Var log_var;
  };

  // Graph construction. With `trainable` the parameters are registered for gradients,
  // otherwise they enter the tape as constants.
  Outputs forward(numkit::Tape& tape, const Observation& obs, const numkit::Var& z,
                  const numkit::Var* prev_tokens, bool trainable) const;
  // Posterior over z from the ground-truth window; `noise` is the reparameterization draw
  // (empty means z = mu).
  StyleOutputs encode_style(numkit::Tape& tape, std::span<const double> actions,
                            std::span<const double> proprio, std::span<const double> noise,
                            bool trainable) const;
  numkit::Var zero_style(numkit::Tape& tape) const;

  // k start tokens when `prev` is empty, else prev tokens 1..k-1 followed by the CLS token.
  // Position embeddings are not included. Non-recurrent variants use zero tokens.
  numkit::Tensor shift_recurrent_input(const DecoderState* prev) const;
  numkit::Var decoder_input(numkit::Tape& tape, const numkit::Var* prev_tokens,
                            bool trainable) const;

  // Inference: z = 0; `prev` is ignored by non-recurrent variants.
  std::pair<ActionConfidenceChunk, DecoderState> infer(const Observation& obs,
                                                       const DecoderState* prev) const;

 private:
  struct Linear {
    numkit::Parameter* w = nullptr;
    numkit::Parameter* b = nullptr;
  };
  struct Norm {
    numkit::Parameter* gain = nullptr;
    numkit::Parameter* bias = nullptr;
  };
  struct Attention {
    Linear q, k, v, o;
  };
  struct EncoderLayer {
    Norm n1, n2;
    Attention attn;
    Linear ff1, ff2;
  };
  struct DecoderLayer {
    Norm n1, n2, n3;
    Attention self_attn, cross_attn;
    Linear ff1, ff2;
  };

  numkit::Parameter* add(const std::string& name, numkit::Shape shape);
  Linear linear(const std::string& name, int in, int out);
  Norm norm(const std::string& name);
  Attention attention(const std::string& name);
  EncoderLayer encoder_layer(const std::string& name);
  DecoderLayer decoder_layer(const std::string& name);
  void initialize(std::uint64_t seed);

  class Binder;
  numkit::Var apply(const Binder& p, const Linear& l, const numkit::Var& x) const;
  numkit::Var apply(const Binder& p, const Norm& n, const numkit::Var& x) const;
  numkit::Var apply(const Binder& p, const Attention& a, const numkit::Var& x,
                    const numkit::Var& memory) const;
  numkit::Var apply(const Binder& p, const EncoderLayer& l, const numkit::Var& x) const;
  numkit::Var apply(const Binder& p, const DecoderLayer& l, const numkit::Var& x,
                    const numkit::Var& memory) const;

  HyperParams hp_;
  Variant variant_;
  std::deque<numkit::Parameter> params_;

  Linear patch_embed_, patch_mix_, proprio_embed_, kappa_embed_, z_embed_;
  numkit::Parameter* encoder_pos_ = nullptr;
  std::vector<EncoderLayer> encoder_;
  Norm encoder_norm_;
  numkit::Parameter* queries_ = nullptr;   // decoder position embeddings
  numkit::Parameter* start_ = nullptr;     // recurrent start tokens
  numkit::Parameter* cls_ = nullptr;       // recurrent CLS token
  std::vector<DecoderLayer> decoder_;
  Norm decoder_norm_;
  Linear action_head_, confidence_head_;

  numkit::Parameter* style_cls_ = nullptr;
  numkit::Parameter* style_pos_ = nullptr;
  Linear style_action_, style_proprio_;
  std::vector<EncoderLayer> style_;
  Norm style_norm_;
  Linear style_out_;
};

// Confidence-weighted temporal ensemble over the predictions for one timestep, given
// oldest-first: p = sum_i e^{-m i} c_i a_i / sum_i e^{-m i} c_i.
std::array<double, 3> temporal_ensemble(std::span<const std::array<double, 3>> actions,
                                        std::span<const double> confidences, double m,
                                        EnsembleOrder order = EnsembleOrder::kOldestFirst);

class EnsembleBuffer {
 public:
  explicit EnsembleBuffer(std::size_t chunk) : chunk_(chunk) {}

  // Adds the chunk emitted at step `tau`; drops chunks that no longer cover `tau`.
  void push(std::int64_t tau, ActionConfidenceChunk chunk);
  // Throws std::out_of_range when no buffered chunk covers `t`.
  std::array<double, 3> action_at(std::int64_t t, double m,
                                  EnsembleOrder order = EnsembleOrder::kOldestFirst) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t chunk() const { return chunk_; }
  void clear() { entries_.clear(); }

 private:
  std::size_t chunk_;
  std::deque<std::pair<std::int64_t, ActionConfidenceChunk>> entries_;
};

struct LossTerms {
  numkit::Var total;
  numkit::Var reconstruction;
};

// Confidence-weighted chunk loss on the tape. `target` is k x 3, `pad` has k flags.
numkit::Var racct_loss(const numkit::Var& actions, const numkit::Var& confidences,
                       std::span<const double> target, std::span<const std::uint8_t> pad,
                       const HyperParams& hp);
// Mean absolute error over all k x 3 entries with padded slots zeroed.
numkit::Var mean_l1_loss(const numkit::Var& actions, std::span<const double> target,
                         std::span<const std::uint8_t> pad);
// Plain evaluation of racct_loss; throws when a confidence lies outside (0, 1].
double racct_loss_value(const ActionConfidenceChunk& pred, std::span<const double> target,
                        std::span<const std::uint8_t> pad, const HyperParams& hp);

struct TrainSample {
  Observation obs;
  // Decoder tokens produced one step earlier in the same episode (inference mode, from the
  // start tokens); used as data by recurrent variants.
  std::optional<DecoderState> previous;
  std::vector<double> actions;
  std::vector<std::uint8_t> pad;
  std::vector<double> noise;
};

// Loss of one sample (reconstruction + kl_weight * KL), graph on `tape`.
LossTerms sample_loss(const Model& model, numkit::Tape& tape, const TrainSample& sample);

struct TrainStep {
  int step = 0;
  double loss = 0.0;
  double reconstruction = 0.0;
};

struct TrainReport {
  std::vector<TrainStep> curve;
  bool diverged = false;
  std::string error;
  double seconds = 0.0;
};

class Trainer {
 public:
  Trainer(Model& model, const data::Dataset& dataset, std::uint64_t seed);

  TrainSample sample(std::size_t index, std::mt19937_64& rng) const;
  // One Adam step on a fresh batch; throws std::runtime_error on a non-finite loss.
  TrainStep step();
  // Runs `steps` updates, recording every `log_every`-th step; divergence stops the run.
  TrainReport run(int steps, int log_every = 10);

  int steps_done() const { return steps_done_; }

 private:
  Model& model_;
  const data::Dataset& dataset_;
  std::mt19937_64 rng_;
  std::vector<numkit::Parameter*> params_;
  numkit::AdamState adam_;
  int steps_done_ = 0;
};

// "step,loss,reconstruction" rows of the recorded curve.
std::string train_curve_csv(const TrainReport& report);

struct PolicyBundle {
  Model model;
  data::DatasetStats stats;
  nlohmann::json extra;
};

void save_policy(const std::filesystem::path& path, const Model& model,
                 const data::DatasetStats& stats, const nlohmann::json& extra = {});
PolicyBundle load_policy(const std::filesystem::path& path);

}  // namespace nti::policy
