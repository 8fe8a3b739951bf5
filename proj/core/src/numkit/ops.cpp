#include "nti/numkit/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nti::numkit {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMatrix>;
using ConstMapM = Eigen::Map<const RowMatrix>;

enum class Broadcast { kSame, kScalar, kTrailing };

Broadcast classify(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return Broadcast::kSame;
  if (element_count(b) == 1) return Broadcast::kScalar;
  if (b.size() <= a.size() && std::equal(b.rbegin(), b.rend(), a.rbegin())) {
    return Broadcast::kTrailing;
  }
  throw std::invalid_argument(std::string(op) + ": cannot broadcast " + shape_string(b) +
                              " onto " + shape_string(a));
}

// Sums a full-size gradient down to the broadcast operand's size.
void reduce_into(const Tensor& full, Tensor& target) {
  const std::size_t n = target.size();
  double* t = target.data().data();
  const double* f = full.data().data();
  if (n == 1) {
    double total = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) total += f[i];
    t[0] += total;
    return;
  }
  for (std::size_t r = 0; r < full.size(); r += n) {
    for (std::size_t i = 0; i < n; ++i) t[i] += f[r + i];
  }
}

// out[r*n + i] op= y[i] over all rows of `out`.
template <typename Op>
void broadcast_apply(Tensor& out, const Tensor& y, Op op) {
  const std::size_t n = y.size();
  double* o = out.data().data();
  const double* v = y.data().data();
  for (std::size_t r = 0; r < out.size(); r += n) {
    for (std::size_t i = 0; i < n; ++i) op(o[r + i], v[i]);
  }
}

Var record1(const Var& a, Tensor value, Tape::BackwardFn fn) {
  const Var inputs[] = {a};
  return a.tape()->record(std::move(value), inputs, std::move(fn));
}

Var record2(const Var& a, const Var& b, Tensor value, Tape::BackwardFn fn) {
  if (a.tape() != b.tape()) throw std::invalid_argument("ops: operands on different tapes");
  const Var inputs[] = {a, b};
  return a.tape()->record(std::move(value), inputs, std::move(fn));
}

const Tensor& input(const Tape& tape, std::size_t self, std::size_t j) {
  return tape.at(tape.at(self).inputs[j]).value;
}

// Elementwise unary op given output-space derivative dy/dx = deriv(x, y).
template <typename F, typename D>
Var unary(const Var& a, F f, D deriv) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return record1(a, std::move(y),
                 [deriv](const Tape& tape, std::size_t self, const Tensor& g,
                         std::span<Tensor* const> gin) {
                   const Tensor& xv = input(tape, self, 0);
                   const Tensor& yv = tape.at(self).value;
                   Tensor& gx = *gin[0];
                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
                 });
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = classify(x.shape(), y.shape(), "add");
  Tensor out = x;
  if (kind == Broadcast::kScalar) {
    for (double& v : out.values()) v += y[0];
  } else {
    broadcast_apply(out, y, [](double& o, double v) { o += v; });
  }
  return record2(a, b, std::move(out),
                 [](const Tape&, std::size_t, const Tensor& g, std::span<Tensor* const> gin) {
                   if (gin[0] != nullptr) reduce_into(g, *gin[0]);
                   if (gin[1] != nullptr) reduce_into(g, *gin[1]);
                 });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = classify(x.shape(), y.shape(), "mul");
  Tensor out = x;
  if (kind == Broadcast::kScalar) {
    for (double& v : out.values()) v *= y[0];
  } else {
    broadcast_apply(out, y, [](double& o, double v) { o *= v; });
  }
  return record2(a, b, std::move(out),
                 [](const Tape& tape, std::size_t self, const Tensor& g,
                    std::span<Tensor* const> gin) {
                   const Tensor& xv = input(tape, self, 0);
                   const Tensor& yv = input(tape, self, 1);
                   const std::size_t n = yv.size();
                   if (gin[0] != nullptr) {
                     double* gx = gin[0]->data().data();
                     for (std::size_t r = 0; r < g.size(); r += n) {
                       for (std::size_t i = 0; i < n; ++i) gx[r + i] += g[r + i] * yv[i];
                     }
                   }
                   if (gin[1] != nullptr) {
                     double* gy = gin[1]->data().data();
                     for (std::size_t r = 0; r < g.size(); r += n) {
                       for (std::size_t i = 0; i < n; ++i) gy[i] += g[r + i] * xv[r + i];
                     }
                   }
                 });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return record1(a, std::move(out),
                 [factor](const Tape&, std::size_t, const Tensor& g, std::span<Tensor* const> gin) {
                   Tensor& gx = *gin[0];
                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                 });
}

Var add_scalar(const Var& a, double offset) {
  Tensor out = a.value();
  for (double& v : out.values()) v += offset;
  return record1(a, std::move(out),
                 [](const Tape&, std::size_t, const Tensor& g, std::span<Tensor* const> gin) {
                   reduce_into(g, *gin[0]);
                 });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_string(x.shape()) + " x " +
                                shape_string(y.shape()));
  }
  const auto m = static_cast<Eigen::Index>(x.dim(0));
  const auto k = static_cast<Eigen::Index>(x.dim(1));
  const auto n = static_cast<Eigen::Index>(y.dim(1));
  Tensor out({x.dim(0), y.dim(1)});
  MapM(out.data().data(), m, n).noalias() =
      ConstMapM(x.data().data(), m, k) * ConstMapM(y.data().data(), k, n);
  return record2(
      a, b, std::move(out),
      [m, k, n](const Tape& tape, std::size_t self, const Tensor& g, std::span<Tensor* const> gin) {
        const Tensor& xv = input(tape, self, 0);
        const Tensor& yv = input(tape, self, 1);
        ConstMapM gm(g.data().data(), m, n);
        if (gin[0] != nullptr) {
          MapM(gin[0]->data().data(), m, k).noalias() +=
              gm * ConstMapM(yv.data().data(), k, n).transpose();
        }
        if (gin[1] != nullptr) {
          MapM(gin[1]->data().data(), k, n).noalias() +=
              ConstMapM(xv.data().data(), m, k).transpose() * gm;
        }
      });
}

Var transpose(const Var& a) {
  if (a.value().rank() != 2) throw std::invalid_argument("transpose: expects a 2-D tensor");
  return permute(a, {1, 0});
}

Var permute(const Var& a, const std::vector<std::size_t>& axes) {
  const Tensor& x = a.value();
  const std::size_t r = x.rank();
  if (axes.size() != r) throw std::invalid_argument("permute: axis count mismatch");
  std::vector<bool> seen(r, false);
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (axes[i] >= r || seen[axes[i]]) throw std::invalid_argument("permute: invalid axes");
    seen[axes[i]] = true;
    out_shape[i] = x.dim(axes[i]);
  }
  const auto in_strides = strides_of(x.shape());
  // Source offset of each output element, in output order.
  std::vector<std::size_t> source(x.size());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < source.size(); ++o) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < r; ++d) off += idx[d] * in_strides[axes[d]];
    source[o] = off;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  Tensor out(out_shape);
  for (std::size_t o = 0; o < source.size(); ++o) out[o] = x[source[o]];
  return record1(a, std::move(out),
                 [source = std::move(source)](const Tape&, std::size_t, const Tensor& g,
                                              std::span<Tensor* const> gin) {
                   Tensor& gx = *gin[0];
                   for (std::size_t o = 0; o < source.size(); ++o) gx[source[o]] += g[o];
                 });
}

Var reshape(const Var& a, Shape shape) {
  if (element_count(shape) != a.value().size()) {
    throw std::invalid_argument("reshape: " + shape_string(a.shape()) + " to " +
                                shape_string(shape));
  }
  Tensor out(std::move(shape), a.value().values());
  return record1(a, std::move(out),
                 [](const Tape&, std::size_t, const Tensor& g, std::span<Tensor* const> gin) {
                   Tensor& gx = *gin[0];
                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                 });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw std::invalid_argument("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) throw std::invalid_argument("concat: shape mismatch");
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::vector<std::size_t> chunk(parts.size());
  std::size_t row = 0;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    chunk[j] = parts[j].value().size() / outer;
    row += chunk[j];
  }
  Tensor out(out_shape);
  std::size_t col = 0;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const Tensor& v = parts[j].value();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(o * chunk[j]), chunk[j],
                  out.data().begin() + static_cast<std::ptrdiff_t>(o * row + col));
    }
    col += chunk[j];
  }
  return parts[0].tape()->record(
      std::move(out), parts,
      [outer, row, chunk](const Tape&, std::size_t, const Tensor& g, std::span<Tensor* const> gin) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < gin.size(); ++j) {
          if (gin[j] != nullptr) {
            Tensor& gx = *gin[j];
            for (std::size_t o = 0; o < outer; ++o) {
              for (std::size_t i = 0; i < chunk[j]; ++i) gx[o * chunk[j] + i] += g[o * row + c + i];
            }
          }
          c += chunk[j];
        }
      });
}

Var slice(const Var& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = a.shape();
  if (axis >= s.size() || start + length > s[axis] || length == 0) {
    throw std::invalid_argument("slice: range out of bounds for shape " + shape_string(s));
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  Shape out_shape = s;
  out_shape[axis] = length;
  const std::size_t src_row = s[axis] * inner;
  const std::size_t dst_row = length * inner;
  const std::size_t offset = start * inner;
  Tensor out(out_shape);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(o * src_row + offset), dst_row,
                out.data().begin() + static_cast<std::ptrdiff_t>(o * dst_row));
  }
  return record1(a, std::move(out),
                 [outer, src_row, dst_row, offset](const Tape&, std::size_t, const Tensor& g,
                                                   std::span<Tensor* const> gin) {
                   Tensor& gx = *gin[0];
                   for (std::size_t o = 0; o < outer; ++o) {
                     for (std::size_t i = 0; i < dst_row; ++i) {
                       gx[o * src_row + offset + i] += g[o * dst_row + i];
                     }
                   }
                 });
}

Var softmax(const Var& a) {
  const Tensor& x = a.value();
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * n;
    double* out = y.data().data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += out[i] = std::exp(in[i] - mx);
    for (std::size_t i = 0; i < n; ++i) out[i] /= total;
  }
  return record1(a, std::move(y),
                 [n, rows](const Tape& tape, std::size_t self, const Tensor& g,
                           std::span<Tensor* const> gin) {
                   const Tensor& yv = tape.at(self).value;
                   Tensor& gx = *gin[0];
                   for (std::size_t r = 0; r < rows; ++r) {
                     double dot = 0.0;
                     for (std::size_t i = 0; i < n; ++i) dot += g[r * n + i] * yv[r * n + i];
                     for (std::size_t i = 0; i < n; ++i) {
                       gx[r * n + i] += yv[r * n + i] * (g[r * n + i] - dot);
                     }
                   }
                 });
}

Var layer_norm(const Var& a, double eps) {
  const Tensor& x = a.value();
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  Tensor y(x.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += in[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) y[r * n + i] = (in[i] - mu) * inv_std[r];
  }
  return record1(a, std::move(y),
                 [n, rows, inv_std = std::move(inv_std)](const Tape& tape, std::size_t self,
                                                         const Tensor& g,
                                                         std::span<Tensor* const> gin) {
                   const Tensor& yv = tape.at(self).value;
                   Tensor& gx = *gin[0];
                   const double inv_n = 1.0 / static_cast<double>(n);
                   for (std::size_t r = 0; r < rows; ++r) {
                     double g_mean = 0.0;
                     double gy_mean = 0.0;
                     for (std::size_t i = 0; i < n; ++i) {
                       g_mean += g[r * n + i];
                       gy_mean += g[r * n + i] * yv[r * n + i];
                     }
                     g_mean *= inv_n;
                     gy_mean *= inv_n;
                     for (std::size_t i = 0; i < n; ++i) {
                       gx[r * n + i] +=
                           inv_std[r] * (g[r * n + i] - g_mean - yv[r * n + i] * gy_mean);
                     }
                   }
                 });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var gelu(const Var& a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(c * (x + k * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * k * x * x);
      });
}

Var log(const Var& a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input");
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var abs(const Var& a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return record1(a, Tensor::scalar(total),
                 [](const Tape&, std::size_t, const Tensor& g, std::span<Tensor* const> gin) {
                   for (double& v : gin[0]->values()) v += g[0];
                 });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_last(const Var& a) {
  const Tensor& x = a.value();
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += x[r * n + i];
    out[r] = t;
  }
  return record1(a, std::move(out),
                 [n, rows](const Tape&, std::size_t, const Tensor& g, std::span<Tensor* const> gin) {
                   Tensor& gx = *gin[0];
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t i = 0; i < n; ++i) gx[r * n + i] += g[r];
                   }
                 });
}

Var map_unary(const Var& a, std::function<double(double)> f, std::function<double(double)> df) {
  return unary(a, f, [df](double x, double) { return df(x); });
}

Var reciprocal(const Var& a) { return exp(scale(log(a), -1.0)); }

}  // namespace nti::numkit
