#include "nti/numkit/tape.hpp"

#include <optional>
#include <stdexcept>

namespace nti::numkit {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("var: not attached to a tape");
  return tape_->at(id_).value;
}

Var Tape::constant(Tensor value) {
  records_.push_back(Record{std::move(value), {}, {}, nullptr, false});
  return Var(this, records_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  if (auto it = parameter_records_.find(&p); it != parameter_records_.end()) {
    return Var(this, it->second);
  }
  records_.push_back(Record{p.value, {}, {}, &p, true});
  const std::size_t id = records_.size() - 1;
  parameter_records_.emplace(&p, id);
  parameters_.push_back(&p);
  return Var(this, id);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw std::domain_error("tape: operation produced a non-finite value");
  }
  Record rec;
  rec.value = std::move(value);
  rec.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape() != this) throw std::invalid_argument("tape: input belongs to another tape");
    rec.inputs.push_back(v.id());
    rec.requires_grad = rec.requires_grad || records_[v.id()].requires_grad;
  }
  if (rec.requires_grad) rec.backward = std::move(backward);
  records_.push_back(std::move(rec));
  return Var(this, records_.size() - 1);
}

bool Gradients::contains(const Parameter& p) const { return index_.count(&p) != 0; }

const Tensor& Gradients::of(const Parameter& p) const {
  auto it = index_.find(&p);
  if (it == index_.end()) {
    throw std::invalid_argument("gradients: parameter '" + p.name + "' was not on the tape");
  }
  return entries_[it->second].second;
}

void Gradients::set(Parameter* p, Tensor grad) {
  if (auto it = index_.find(p); it != index_.end()) {
    entries_[it->second].second = std::move(grad);
    return;
  }
  index_.emplace(p, entries_.size());
  entries_.emplace_back(p, std::move(grad));
}

void Gradients::accumulate(const Gradients& other) {
  for (const auto& [p, g] : other.entries_) {
    auto it = index_.find(p);
    if (it == index_.end()) {
      set(p, g);
      continue;
    }
    Tensor& mine = entries_[it->second].second;
    if (mine.shape() != g.shape()) throw std::invalid_argument("gradients: shape mismatch");
    for (std::size_t i = 0; i < mine.size(); ++i) mine[i] += g[i];
  }
}

void Gradients::scale(double factor) {
  for (auto& [p, g] : entries_) {
    for (double& v : g.values()) v *= factor;
  }
}

bool Gradients::all_finite() const {
  for (const auto& [p, g] : entries_) {
    if (!g.all_finite()) return false;
  }
  return true;
}

Gradients backward(const Tape& tape, const Var& output) {
  if (output.tape() != &tape) throw std::invalid_argument("backward: output is not on this tape");
  if (output.value().size() != 1) {
    throw std::invalid_argument("backward: output must be scalar, got shape " +
                                shape_string(output.shape()));
  }
  const std::size_t n = output.id() + 1;
  std::vector<std::optional<Tensor>> grads(n);
  grads[output.id()] = Tensor(output.shape(), 1.0);

  std::vector<Tensor*> input_grads;
  for (std::size_t id = n; id-- > 0;) {
    const auto& rec = tape.at(id);
    if (!grads[id] || !rec.requires_grad || !rec.backward) continue;
    input_grads.assign(rec.inputs.size(), nullptr);
    for (std::size_t j = 0; j < rec.inputs.size(); ++j) {
      const std::size_t in = rec.inputs[j];
      if (!tape.at(in).requires_grad) continue;
      if (!grads[in]) grads[in] = Tensor(tape.at(in).value.shape(), 0.0);
      input_grads[j] = &*grads[in];
    }
    rec.backward(tape, id, *grads[id], input_grads);
  }

  Gradients out;
  for (std::size_t id = 0; id < n; ++id) {
    const auto& rec = tape.at(id);
    if (rec.parameter == nullptr) continue;
    out.set(rec.parameter, grads[id] ? std::move(*grads[id]) : Tensor(rec.value.shape(), 0.0));
  }
  // Parameters registered after the output still get (zero) entries.
  for (std::size_t id = n; id < tape.size(); ++id) {
    const auto& rec = tape.at(id);
    if (rec.parameter != nullptr) out.set(rec.parameter, Tensor(rec.value.shape(), 0.0));
  }
  return out;
}

}  // namespace nti::numkit
