#include <cmath>
#include <stdexcept>

#include "nti/numkit/ops.hpp"
#include "nti/policy/policy.hpp"

namespace nti::policy {

using numkit::Parameter;
using numkit::Shape;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

VariantFlags flags_of(Variant v) {
  switch (v) {
    case Variant::kAct: return {false, false};
    case Variant::kAcct: return {true, false};
    case Variant::kRact: return {false, true};
    case Variant::kRacct: return {true, true};
  }
  throw std::invalid_argument("unknown variant");
}

Variant variant_of(VariantFlags flags) {
  if (flags.confidence) return flags.recurrent ? Variant::kRacct : Variant::kAcct;
  return flags.recurrent ? Variant::kRact : Variant::kAct;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kAct: return "ACT";
    case Variant::kAcct: return "ACCT";
    case Variant::kRact: return "RACT";
    case Variant::kRacct: return "RACCT";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (Variant v : kAllVariants) {
    std::string name = to_string(v);
    std::string lower;
    for (char c : name) lower += static_cast<char>(std::tolower(c));
    if (s == name || s == lower) return v;
  }
  throw std::invalid_argument("unknown variant: " + s);
}

HyperParams HyperParams::desk() {
  HyperParams hp;
  hp.learning_rate = 1e-3;
  return hp;
}

HyperParams HyperParams::full() {
  HyperParams hp;
  hp.width = 512;
  hp.ffn_width = 3200;
  hp.heads = 8;
  hp.encoder_layers = 4;
  hp.decoder_layers = 7;
  hp.style_layers = 4;
  hp.training_steps = 20000;
  return hp;
}

void HyperParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("hyperparameters: ") + what);
  };
  require(chunk >= 1, "chunk must be >= 1");
  require(ensemble_decay > 0.0, "ensemble decay must be > 0");
  require(loss_floor > 0.0, "loss floor must be > 0");
  require(confidence_weight >= 0.0, "confidence weight must be >= 0");
  require(batch_size >= 1, "batch size must be >= 1");
  require(learning_rate > 0.0, "learning rate must be > 0");
  require(training_steps >= 0, "training steps must be >= 0");
  require(kl_weight >= 0.0, "kl weight must be >= 0");
  require(latent_dim >= 1 && width >= 1 && ffn_width >= 1, "dimensions must be >= 1");
  require(heads >= 1 && width % heads == 0, "width must be divisible by heads");
  require(encoder_layers >= 0 && decoder_layers >= 1 && style_layers >= 0, "layer counts");
  require(image_channels >= 1 && patch >= 1 && image_side % patch == 0,
          "image side must be a multiple of the patch size");
  require(confidence_init > 0.0 && confidence_init < 1.0, "confidence init must be in (0,1)");
}

nlohmann::json HyperParams::to_json() const {
  return {{"chunk", chunk},
          {"ensemble_decay", ensemble_decay},
          {"ensemble_order", ensemble_order == EnsembleOrder::kOldestFirst ? "oldest_first"
                                                                           : "newest_first"},
          {"loss_floor", loss_floor},
          {"confidence_weight", confidence_weight},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"training_steps", training_steps},
          {"kl_weight", kl_weight},
          {"latent_dim", latent_dim},
          {"width", width},
          {"ffn_width", ffn_width},
          {"heads", heads},
          {"encoder_layers", encoder_layers},
          {"decoder_layers", decoder_layers},
          {"style_layers", style_layers},
          {"image_side", image_side},
          {"image_channels", image_channels},
          {"patch", patch},
          {"confidence_init", confidence_init}};
}

HyperParams HyperParams::from_json(const nlohmann::json& j) {
  HyperParams hp;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("chunk", hp.chunk);
  get("ensemble_decay", hp.ensemble_decay);
  if (j.contains("ensemble_order")) {
    const std::string order = j.at("ensemble_order");
    if (order == "oldest_first") {
      hp.ensemble_order = EnsembleOrder::kOldestFirst;
    } else if (order == "newest_first") {
      hp.ensemble_order = EnsembleOrder::kNewestFirst;
    } else {
      throw std::invalid_argument("unknown ensemble_order: " + order);
    }
  }
  get("loss_floor", hp.loss_floor);
  get("confidence_weight", hp.confidence_weight);
  get("batch_size", hp.batch_size);
  get("learning_rate", hp.learning_rate);
  get("training_steps", hp.training_steps);
  get("kl_weight", hp.kl_weight);
  get("latent_dim", hp.latent_dim);
  get("width", hp.width);
  get("ffn_width", hp.ffn_width);
  get("heads", hp.heads);
  get("encoder_layers", hp.encoder_layers);
  get("decoder_layers", hp.decoder_layers);
  get("style_layers", hp.style_layers);
  get("image_side", hp.image_side);
  get("image_channels", hp.image_channels);
  get("patch", hp.patch);
  get("confidence_init", hp.confidence_init);
  hp.validate();
  return hp;
}

Observation Observation::from_window(const data::Window& w) {
  return {w.image, w.proprio, w.s_kappa};
}

double gaussian_kl(std::span<const double> mu, std::span<const double> log_var) {
  if (mu.size() != log_var.size()) throw std::invalid_argument("gaussian_kl: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    kl += 0.5 * (mu[i] * mu[i] + std::exp(log_var[i]) - log_var[i] - 1.0);
  }
  return kl;
}

// Puts parameters on a tape, either as gradient leaves or as constants.
class Model::Binder {
 public:
  Binder(Tape& tape, bool trainable) : tape_(tape), trainable_(trainable) {}
  Var operator()(const Parameter* p) const {
    return trainable_ ? tape_.parameter(*const_cast<Parameter*>(p)) : tape_.constant(p->value);
  }
  Tape& tape() const { return tape_; }

 private:
  Tape& tape_;
  bool trainable_;
};

Model::Model(HyperParams hp, Variant variant, std::uint64_t seed)
    : hp_(std::move(hp)), variant_(variant) {
  hp_.validate();
  const int w = hp_.width;
  const int patch_in = hp_.image_channels * hp_.patch * hp_.patch;
  const int patches = (hp_.image_side / hp_.patch) * (hp_.image_side / hp_.patch);

  patch_embed_ = linear("backbone.patch", patch_in, w);
  patch_mix_ = linear("backbone.mix", w, w);
  proprio_embed_ = linear("encoder.proprio", static_cast<int>(data::kProprioDim), w);
  kappa_embed_ = linear("encoder.kappa", 1, w);
  z_embed_ = linear("encoder.z", hp_.latent_dim, w);
  encoder_pos_ = add("encoder.pos", {static_cast<std::size_t>(patches + 3),
                                     static_cast<std::size_t>(w)});
  for (int i = 0; i < hp_.encoder_layers; ++i) {
    encoder_.push_back(encoder_layer("encoder.layer" + std::to_string(i)));
  }
  encoder_norm_ = norm("encoder.norm");

  const auto k = static_cast<std::size_t>(hp_.chunk);
  queries_ = add("decoder.pos", {k, static_cast<std::size_t>(w)});
  start_ = add("decoder.start", {k, static_cast<std::size_t>(w)});
  cls_ = add("decoder.cls", {1, static_cast<std::size_t>(w)});
  for (int i = 0; i < hp_.decoder_layers; ++i) {
    decoder_.push_back(decoder_layer("decoder.layer" + std::to_string(i)));
  }
  decoder_norm_ = norm("decoder.norm");
  action_head_ = linear("head.action", w, static_cast<int>(data::kActionDim));
  confidence_head_ = linear("head.confidence", w, 1);

  style_cls_ = add("style.cls", {1, static_cast<std::size_t>(w)});
  style_pos_ = add("style.pos", {k + 2, static_cast<std::size_t>(w)});
  style_action_ = linear("style.action", static_cast<int>(data::kActionDim), w);
  style_proprio_ = linear("style.proprio", static_cast<int>(data::kProprioDim), w);
  for (int i = 0; i < hp_.style_layers; ++i) {
    style_.push_back(encoder_layer("style.layer" + std::to_string(i)));
  }
  style_norm_ = norm("style.norm");
  style_out_ = linear("style.out", w, 2 * hp_.latent_dim);

  initialize(seed);
}

Parameter* Model::add(const std::string& name, Shape shape) {
  params_.push_back(Parameter{name, Tensor(std::move(shape))});
  return &params_.back();
}

Model::Linear Model::linear(const std::string& name, int in, int out) {
  return {add(name + ".w", {static_cast<std::size_t>(in), static_cast<std::size_t>(out)}),
          add(name + ".b", {static_cast<std::size_t>(out)})};
}

Model::Norm Model::norm(const std::string& name) {
  const auto w = static_cast<std::size_t>(hp_.width);
  return {add(name + ".gain", {w}), add(name + ".bias", {w})};
}

Model::Attention Model::attention(const std::string& name) {
  const int w = hp_.width;
  return {linear(name + ".q", w, w), linear(name + ".k", w, w), linear(name + ".v", w, w),
          linear(name + ".o", w, w)};
}

Model::EncoderLayer Model::encoder_layer(const std::string& name) {
  EncoderLayer l;
  l.n1 = norm(name + ".norm1");
  l.attn = attention(name + ".attn");
  l.n2 = norm(name + ".norm2");
  l.ff1 = linear(name + ".ff1", hp_.width, hp_.ffn_width);
  l.ff2 = linear(name + ".ff2", hp_.ffn_width, hp_.width);
  return l;
}

Model::DecoderLayer Model::decoder_layer(const std::string& name) {
  DecoderLayer l;
  l.n1 = norm(name + ".norm1");
  l.self_attn = attention(name + ".self");
  l.n2 = norm(name + ".norm2");
  l.cross_attn = attention(name + ".cross");
  l.n3 = norm(name + ".norm3");
  l.ff1 = linear(name + ".ff1", hp_.width, hp_.ffn_width);
  l.ff2 = linear(name + ".ff2", hp_.ffn_width, hp_.width);
  return l;
}

void Model::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (Parameter& p : params_) {
    Tensor& v = p.value;
    if (ends_with(p.name, ".gain")) {
      v.fill(1.0);
    } else if (ends_with(p.name, ".bias") || ends_with(p.name, ".b")) {
      v.fill(0.0);
    } else if (ends_with(p.name, ".w")) {
      const double sd = 1.0 / std::sqrt(static_cast<double>(v.dim(0)));
      for (double& x : v.values()) x = sd * normal(rng);
    } else {
      for (double& x : v.values()) x = 0.02 * normal(rng);
    }
  }
  const double c = hp_.confidence_init;
  confidence_head_.b->value.fill(std::log(c / (1.0 - c)));
  for (double& x : confidence_head_.w->value.values()) x *= 0.1;
  for (double& x : action_head_.w->value.values()) x *= 0.1;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  for (const Parameter& p : params_) out.push_back(&p);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

Parameter* Model::find(const std::string& name) {
  for (Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Var Model::apply(const Binder& p, const Linear& l, const Var& x) const {
  return numkit::add(numkit::matmul(x, p(l.w)), p(l.b));
}

Var Model::apply(const Binder& p, const Norm& n, const Var& x) const {
  return numkit::add(numkit::mul(numkit::layer_norm(x), p(n.gain)), p(n.bias));
}

Var Model::apply(const Binder& p, const Attention& a, const Var& x, const Var& memory) const {
  const Var q = apply(p, a.q, x);
  const Var k = apply(p, a.k, memory);
  const Var v = apply(p, a.v, memory);
  const auto dh = static_cast<std::size_t>(hp_.width / hp_.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  for (int h = 0; h < hp_.heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * dh;
    const Var qh = numkit::slice(q, 1, off, dh);
    const Var kh = numkit::slice(k, 1, off, dh);
    const Var vh = numkit::slice(v, 1, off, dh);
    const Var scores = numkit::scale(numkit::matmul(qh, numkit::transpose(kh)), scale);
    heads.push_back(numkit::matmul(numkit::softmax(scores), vh));
  }
  const Var joined = heads.size() == 1 ? heads[0] : numkit::concat(heads, 1);
  return apply(p, a.o, joined);
}

Var Model::apply(const Binder& p, const EncoderLayer& l, const Var& x) const {
  const Var h = apply(p, l.n1, x);
  Var y = numkit::add(x, apply(p, l.attn, h, h));
  const Var f = apply(p, l.ff2, numkit::gelu(apply(p, l.ff1, apply(p, l.n2, y))));
  return numkit::add(y, f);
}

Var Model::apply(const Binder& p, const DecoderLayer& l, const Var& x, const Var& memory) const {
  const Var h = apply(p, l.n1, x);
  Var y = numkit::add(x, apply(p, l.self_attn, h, h));
  y = numkit::add(y, apply(p, l.cross_attn, apply(p, l.n2, y), memory));
  const Var f = apply(p, l.ff2, numkit::gelu(apply(p, l.ff1, apply(p, l.n3, y))));
  return numkit::add(y, f);
}

Tensor Model::shift_recurrent_input(const DecoderState* prev) const {
  const auto k = static_cast<std::size_t>(hp_.chunk);
  const auto w = static_cast<std::size_t>(hp_.width);
  if (prev == nullptr) return start_->value;
  if (prev->tokens.shape() != Shape{k, w}) {
    throw std::invalid_argument("shift_recurrent_input: expected " + numkit::shape_string({k, w}) +
                                " tokens, got " + numkit::shape_string(prev->tokens.shape()));
  }
  Tensor out({k, w});
  for (std::size_t i = 0; i + 1 < k; ++i) {
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = prev->tokens.at(i + 1, j);
  }
  for (std::size_t j = 0; j < w; ++j) out.at(k - 1, j) = cls_->value[j];
  return out;
}

Var Model::decoder_input(Tape& tape, const Var* prev_tokens, bool trainable) const {
  const Binder p(tape, trainable);
  const auto k = static_cast<std::size_t>(hp_.chunk);
  if (!flags().recurrent) {
    return tape.constant(Tensor({k, static_cast<std::size_t>(hp_.width)}));
  }
  Var input;
  if (prev_tokens == nullptr) {
    input = p(start_);
  } else {
    if (prev_tokens->shape() != Shape{k, static_cast<std::size_t>(hp_.width)}) {
      throw std::invalid_argument("decoder_input: previous tokens have shape " +
                                  numkit::shape_string(prev_tokens->shape()));
    }
    const Var parts[] = {numkit::slice(*prev_tokens, 0, 1, k - 1), p(cls_)};
    input = k == 1 ? p(cls_) : numkit::concat(parts, 0);
  }
  return input;
}

Var Model::zero_style(Tape& tape) const {
  return tape.constant(Tensor({1, static_cast<std::size_t>(hp_.latent_dim)}));
}

Model::Outputs Model::forward(Tape& tape, const Observation& obs, const Var& z,
                              const Var* prev_tokens, bool trainable) const {
  const Binder p(tape, trainable);
  const auto side = static_cast<std::size_t>(hp_.image_side);
  const auto ch = static_cast<std::size_t>(hp_.image_channels);
  const auto ps = static_cast<std::size_t>(hp_.patch);
  const std::size_t grid = side / ps;
  if (obs.image.size() != ch * side * side) {
    throw std::invalid_argument("forward: image has " + std::to_string(obs.image.size()) +
                                " values, expected " + std::to_string(ch * side * side));
  }
  if (obs.proprio.size() != data::kProprioDim) {
    throw std::invalid_argument("forward: proprio must have 6 values");
  }
  if (z.shape() != Shape{1, static_cast<std::size_t>(hp_.latent_dim)}) {
    throw std::invalid_argument("forward: z has shape " + numkit::shape_string(z.shape()));
  }

  Var image = tape.constant(Tensor({ch, grid, ps, grid, ps}, obs.image));
  image = numkit::permute(image, {1, 3, 0, 2, 4});
  image = numkit::reshape(image, {grid * grid, ch * ps * ps});
  Var feats = numkit::gelu(apply(p, patch_embed_, image));
  feats = numkit::gelu(apply(p, patch_mix_, feats));

  const Var proprio = apply(p, proprio_embed_, tape.constant(Tensor({1, data::kProprioDim}, obs.proprio)));
  const Var kappa = apply(p, kappa_embed_, tape.constant(Tensor({1, 1}, {obs.s_kappa})));
  const Var zt = apply(p, z_embed_, z);
  const Var tokens[] = {feats, proprio, kappa, zt};
  Var memory = numkit::add(numkit::concat(tokens, 0), p(encoder_pos_));
  for (const auto& layer : encoder_) memory = apply(p, layer, memory);
  memory = apply(p, encoder_norm_, memory);

  const Var input = decoder_input(tape, prev_tokens, trainable);
  Var x = numkit::add(input, p(queries_));
  for (const auto& layer : decoder_) x = apply(p, layer, x, memory);
  x = apply(p, decoder_norm_, x);

  Outputs out;
  out.decoder_input = input;
  out.tokens = x;
  out.actions = apply(p, action_head_, x);
  if (flags().confidence) {
    out.confidences = numkit::sigmoid(apply(p, confidence_head_, x));
  } else {
    out.confidences = tape.constant(Tensor({static_cast<std::size_t>(hp_.chunk), 1}, 1.0));
  }
  return out;
}

Model::StyleOutputs Model::encode_style(Tape& tape, std::span<const double> actions,
                                        std::span<const double> proprio,
                                        std::span<const double> noise, bool trainable) const {
  const Binder p(tape, trainable);
  const auto k = static_cast<std::size_t>(hp_.chunk);
  const auto latent = static_cast<std::size_t>(hp_.latent_dim);
  if (actions.size() != k * data::kActionDim || proprio.size() != data::kProprioDim) {
    throw std::invalid_argument("encode_style: window shape mismatch");
  }
  if (!noise.empty() && noise.size() != latent) {
    throw std::invalid_argument("encode_style: noise must have latent_dim values");
  }
  const Var a = apply(p, style_action_, tape.constant(Tensor({k, data::kActionDim},
                                                             {actions.begin(), actions.end()})));
  const Var pr = apply(p, style_proprio_, tape.constant(Tensor({1, data::kProprioDim},
                                                               {proprio.begin(), proprio.end()})));
  const Var parts[] = {p(style_cls_), pr, a};
  Var x = numkit::add(numkit::concat(parts, 0), p(style_pos_));
  for (const auto& layer : style_) x = apply(p, layer, x);
  const Var head = apply(p, style_out_, apply(p, style_norm_, numkit::slice(x, 0, 0, 1)));

  StyleOutputs out;
  out.mu = numkit::slice(head, 1, 0, latent);
  out.log_var = numkit::slice(head, 1, latent, latent);
  if (noise.empty()) {
    out.z = out.mu;
  } else {
    const Var sd = numkit::exp(numkit::scale(out.log_var, 0.5));
    const Var eps = tape.constant(Tensor({1, latent}, {noise.begin(), noise.end()}));
    out.z = numkit::add(out.mu, numkit::mul(sd, eps));
  }
  return out;
}

std::pair<ActionConfidenceChunk, DecoderState> Model::infer(const Observation& obs,
                                                            const DecoderState* prev) const {
  Tape tape;
  const Var z = zero_style(tape);
  Var prev_tokens;
  const bool recurrent = flags().recurrent && prev != nullptr;
  if (recurrent) prev_tokens = tape.constant(prev->tokens);
  const Outputs out = forward(tape, obs, z, recurrent ? &prev_tokens : nullptr, false);
  ActionConfidenceChunk chunk;
  chunk.actions = out.actions.value().values();
  chunk.confidences = out.confidences.value().values();
  return {std::move(chunk), DecoderState{out.tokens.value()}};
}

}  // namespace nti::policy
