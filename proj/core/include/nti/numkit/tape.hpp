#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nti/numkit/tensor.hpp"

namespace nti::numkit {

// A named trainable block. Models own their parameters; tapes only reference them.
struct Parameter {
  std::string name;
  Tensor value;
};

class Tape;

// Handle to one record on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Ordered record of primitive operations. Every record's inputs precede it.
class Tape {
 public:
  // Accumulates the gradient of each input given the gradient of the record's output.
  // Entries of `input_grads` are null for inputs that do not require gradients.
  using BackwardFn = std::function<void(const Tape& tape, std::size_t self, const Tensor& grad_out,
                                        std::span<Tensor* const> input_grads)>;

  struct Record {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Registers `p` as a leaf; repeated registration returns the same record.
  Var parameter(Parameter& p);

  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Record& at(std::size_t id) const { return records_.at(id); }
  std::size_t size() const { return records_.size(); }
  const std::vector<Parameter*>& parameters() const { return parameters_; }

 private:
  std::vector<Record> records_;
  std::unordered_map<const Parameter*, std::size_t> parameter_records_;
  std::vector<Parameter*> parameters_;
};

// Gradient of a scalar with respect to every parameter registered on a tape.
class Gradients {
 public:
  bool contains(const Parameter& p) const;
  // Throws if `p` was not on the tape.
  const Tensor& of(const Parameter& p) const;

  // Adds `other` entry-wise; parameters missing here are inserted.
  void accumulate(const Gradients& other);
  void scale(double factor);
  bool all_finite() const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<Parameter*, Tensor>>& entries() const { return entries_; }

  void set(Parameter* p, Tensor grad);

 private:
  std::vector<std::pair<Parameter*, Tensor>> entries_;
  std::unordered_map<const Parameter*, std::size_t> index_;
};

// Reverse-mode sweep from a scalar output. The tape is not modified, so repeated calls
// return identical gradients.
Gradients backward(const Tape& tape, const Var& output);

}  // namespace nti::numkit
