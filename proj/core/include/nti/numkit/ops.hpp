#pragma once

#include <functional>
#include <span>
#include <vector>

#include "nti/numkit/tape.hpp"

// Differentiable primitives. Binary elementwise ops broadcast their second operand when it
// is a single element or matches the trailing dimensions of the first.
namespace nti::numkit {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);

// 2-D matrix product.
Var matmul(const Var& a, const Var& b);
// 2-D transpose.
Var transpose(const Var& a);
Var permute(const Var& a, const std::vector<std::size_t>& axes);
Var reshape(const Var& a, Shape shape);
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(const Var& a, std::size_t axis, std::size_t start, std::size_t length);

// Along the last axis.
Var softmax(const Var& a);
Var layer_norm(const Var& a, double eps = 1e-5);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
// Tanh approximation.
Var gelu(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var abs(const Var& a);

// Sum of all elements, shape [1].
Var sum(const Var& a);
Var mean(const Var& a);
// Sum over the last axis; rank drops by one (rank-1 input gives shape [1]).
Var sum_last(const Var& a);

// Elementwise op with caller-supplied derivative.
Var map_unary(const Var& a, std::function<double(double)> f, std::function<double(double)> df);

// Composites.
Var reciprocal(const Var& a);

}  // namespace nti::numkit
