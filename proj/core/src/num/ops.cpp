#include "sgg/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sgg/error.hpp"

namespace sgg::num {
namespace {

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

// Accumulation target for parent i, or nullptr when it needs no gradient.
double* grad_of(Node& n, std::size_t i) {
  Node& p = *n.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t r, const char* op) {
  if (a.rank() != r) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                         shape_string(a.shape()));
  }
}

template <class F, class D>
Tensor unary(const Tensor& x, F f, D dfdx) {
  std::vector<double> out(x.size());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [dfdx](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    const auto& xin = parent(self, 0).value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      g[i] += self.grad[i] * dfdx(xin[i], self.value[i]);
    }
  });
}

// Decomposes `shape` around `axis` into (outer, axis length, inner).
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = &B[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& G = self.grad;
    const auto& Av = parent(self, 0).value;
    const auto& Bv = parent(self, 1).value;
    if (double* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * Bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (double* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
  });
}

Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
  require_rank(w, 2, "affine");
  if (x.size() != w.dim(1) || b.size() != w.dim(0)) {
    throw DimensionError("affine: W " + shape_string(w.shape()) + " incompatible with x " +
                         shape_string(x.shape()) + " and b " + shape_string(b.shape()));
  }
  const std::size_t out = w.dim(0), in = w.dim(1);
  std::vector<double> y(out);
  auto W = w.data();
  auto X = x.data();
  auto Bv = b.data();
  for (std::size_t o = 0; o < out; ++o) {
    double acc = Bv[o];
    for (std::size_t i = 0; i < in; ++i) acc += W[o * in + i] * X[i];
    y[o] = acc;
  }
  return make_result({out}, std::move(y), {w, x, b}, [out, in](Node& self) {
    const auto& G = self.grad;
    if (double* gw = grad_of(self, 0)) {
      const auto& X = parent(self, 1).value;
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += G[o] * X[i];
    }
    if (double* gx = grad_of(self, 1)) {
      const auto& W = parent(self, 0).value;
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) gx[i] += G[o] * W[o * in + i];
    }
    if (double* gb = grad_of(self, 2)) {
      for (std::size_t o = 0; o < out; ++o) gb[o] += G[o];
    }
  });
}

Tensor affine_rows(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "affine_rows");
  return add_row_broadcast(matmul(x, transpose(w)), b);
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (double* g = grad_of(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = parent(self, 0).value;
    const auto& bv = parent(self, 1).value;
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& x, double c) {
  return unary(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw DimensionError("scale_by: scale must have one element, got " + shape_string(s.shape()));
  const double c = s.item();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x[i];
  return make_result(x.shape(), std::move(out), {x, s}, [](Node& self) {
    const auto& xv = parent(self, 0).value;
    const double c = parent(self, 1).value[0];
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * c;
    if (double* g = grad_of(self, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * xv[i];
      g[0] += acc;
    }
  });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(x, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor abs(const Tensor& x) {
  return unary(x, [](double v) { return std::fabs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor smooth_l1(const Tensor& x) {
  return unary(
      x, [](double v) { return std::fabs(v) < 1.0 ? 0.5 * v * v : std::fabs(v) - 0.5; },
      [](double v, double) { return std::fabs(v) < 1.0 ? v : (v > 0.0 ? 1.0 : -1.0); });
}

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case Elementwise::kTanh: return tanh(a);
    case Elementwise::kRelu: return relu(a);
    case Elementwise::kSigmoid: return sigmoid(a);
    case Elementwise::kAbs: return abs(a);
    case Elementwise::kMul: return mul(a, b);
    case Elementwise::kAdd: return add(a, b);
    case Elementwise::kSub: return sub(a, b);
  }
  throw std::invalid_argument("elementwise: unknown kind");
}

// ---- structure -------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw DimensionError("concat: axis out of range for " + shape_string(s0));
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == s0[i];
    if (!ok) {
      throw DimensionError("concat: shape mismatch off axis " + std::to_string(axis) + ": " +
                           shape_string(s0) + " vs " + shape_string(s));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit o = split_axis(out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.dim(axis);
    auto src = p.data();
    for (std::size_t q = 0; q < o.outer; ++q)
      std::copy_n(&src[q * len * o.inner], len * o.inner, &out[(q * o.len + off) * o.inner]);
    off += len;
  }
  return make_result(out_shape, std::move(out), parts, [o, offsets, axis](Node& self) {
    for (std::size_t pi = 0; pi < offsets.size(); ++pi) {
      double* g = grad_of(self, pi);
      if (!g) continue;
      const std::size_t len = parent(self, pi).shape[axis];
      for (std::size_t q = 0; q < o.outer; ++q) {
        const double* src = &self.grad[(q * o.len + offsets[pi]) * o.inner];
        double* dst = &g[q * len * o.inner];
        for (std::size_t i = 0; i < len * o.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || length == 0 || start + length > x.dim(axis)) {
    throw DimensionError("slice: [" + std::to_string(start) + ", +" + std::to_string(length) +
                         ") out of range on axis " + std::to_string(axis) + " of " + shape_string(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(shape_size(out_shape));
  auto src = x.data();
  for (std::size_t q = 0; q < s.outer; ++q)
    std::copy_n(&src[(q * s.len + start) * s.inner], length * s.inner, &out[q * length * s.inner]);
  return make_result(out_shape, std::move(out), {x}, [s, start, length](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t q = 0; q < s.outer; ++q) {
      const double* src = &self.grad[q * length * s.inner];
      double* dst = &g[(q * s.len + start) * s.inner];
      for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor detach(const Tensor& x) {
  return Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
}

Tensor repeat_rows(const Tensor& x, std::size_t k) {
  if (k == 0) throw DimensionError("repeat_rows: k must be positive");
  const std::size_t n = x.size();
  std::vector<double> out(k * n);
  for (std::size_t r = 0; r < k; ++r) std::copy(x.data().begin(), x.data().end(), out.begin() + r * n);
  return make_result({k, n}, std::move(out), {x}, [k, n](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[r * n + i];
  });
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& b) {
  require_rank(x, 2, "add_row_broadcast");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (b.size() != n) {
    throw DimensionError("add_row_broadcast: " + shape_string(x.shape()) + " vs bias " + shape_string(b.shape()));
  }
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + b[j];
  return make_result({m, n}, std::move(out), {x, b}, [m, n](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < m * n; ++i) g[i] += self.grad[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
  });
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  std::vector<Tensor> rows;
  rows.reserve(parts.size());
  for (const auto& p : parts) {
    Shape s{1};
    s.insert(s.end(), p.shape().begin(), p.shape().end());
    rows.push_back(reshape(p, s));
  }
  return concat(rows, 0);
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_result({1}, {acc}, {x}, [](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    const std::size_t n = parent(self, 0).value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw DimensionError("softmax: axis out of range for " + shape_string(x.shape()));
  const AxisSplit s = split_axis(x.shape(), axis);
  std::vector<double> out(x.size());
  auto in = x.data();
  for (std::size_t q = 0; q < s.outer; ++q)
    for (std::size_t r = 0; r < s.inner; ++r) {
      const std::size_t base = q * s.len * s.inner + r;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < s.len; ++i) mx = std::max(mx, in[base + i * s.inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < s.len; ++i) {
        const double e = std::exp(in[base + i * s.inner] - mx);
        out[base + i * s.inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < s.len; ++i) out[base + i * s.inner] /= z;
    }
  return make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    const auto& y = self.value;
    const auto& gy = self.grad;
    for (std::size_t q = 0; q < s.outer; ++q)
      for (std::size_t r = 0; r < s.inner; ++r) {
        const std::size_t base = q * s.len * s.inner + r;
        double d = 0.0;
        for (std::size_t i = 0; i < s.len; ++i) d += gy[base + i * s.inner] * y[base + i * s.inner];
        for (std::size_t i = 0; i < s.len; ++i) {
          const std::size_t k = base + i * s.inner;
          g[k] += y[k] * (gy[k] - d);
        }
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw DimensionError("log_softmax: axis out of range for " + shape_string(x.shape()));
  const AxisSplit s = split_axis(x.shape(), axis);
  std::vector<double> out(x.size());
  auto in = x.data();
  for (std::size_t q = 0; q < s.outer; ++q)
    for (std::size_t r = 0; r < s.inner; ++r) {
      const std::size_t base = q * s.len * s.inner + r;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < s.len; ++i) mx = std::max(mx, in[base + i * s.inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < s.len; ++i) z += std::exp(in[base + i * s.inner] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t i = 0; i < s.len; ++i) out[base + i * s.inner] = in[base + i * s.inner] - lz;
    }
  return make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t q = 0; q < s.outer; ++q)
      for (std::size_t r = 0; r < s.inner; ++r) {
        const std::size_t base = q * s.len * s.inner + r;
        double gs = 0.0;
        for (std::size_t i = 0; i < s.len; ++i) gs += self.grad[base + i * s.inner];
        for (std::size_t i = 0; i < s.len; ++i) {
          const std::size_t k = base + i * s.inner;
          g[k] += self.grad[k] - std::exp(self.value[k]) * gs;
        }
      }
  });
}

// ---- spatial ---------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t pad) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t O = kernel.dim(0), KC = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (KC != C) {
    throw DimensionError("conv2d: kernel " + shape_string(kernel.shape()) + " expects " + std::to_string(KC) +
                         " channels, input " + shape_string(input.shape()) + " has " + std::to_string(C));
  }
  const std::size_t Hp = H + 2 * pad, Wp = W + 2 * pad;
  if (kh > Hp || kw > Wp) {
    throw DimensionError("conv2d: kernel " + shape_string(kernel.shape()) + " larger than padded input " +
                         shape_string(input.shape()));
  }
  if ((Hp - kh) % stride != 0 || (Wp - kw) % stride != 0) {
    throw DimensionError("conv2d: non-integral output size for input " + shape_string(input.shape()) +
                         ", kernel " + shape_string(kernel.shape()) + ", stride " + std::to_string(stride) +
                         ", pad " + std::to_string(pad));
  }
  const std::size_t Ho = (Hp - kh) / stride + 1, Wo = (Wp - kw) / stride + 1;
  const long lpad = static_cast<long>(pad);

  // im2col: rows index (c, ky, kx), columns index output positions.
  const std::size_t rows = C * kh * kw, cols = Ho * Wo;
  auto build_cols = [=](std::span<const double> in) {
    std::vector<double> col(rows * cols, 0.0);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx) {
          double* dst = &col[((c * kh + ky) * kw + kx) * cols];
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const long iy = static_cast<long>(oy * stride + ky) - lpad;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const long ix = static_cast<long>(ox * stride + kx) - lpad;
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              dst[oy * Wo + ox] = in[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
            }
          }
        }
    return col;
  };

  std::vector<double> col = build_cols(input.data());
  std::vector<double> out(O * cols, 0.0);
  auto K = kernel.data();
  for (std::size_t o = 0; o < O; ++o) {
    double* orow = &out[o * cols];
    for (std::size_t r = 0; r < rows; ++r) {
      const double kv = K[o * rows + r];
      if (kv == 0.0) continue;
      const double* crow = &col[r * cols];
      for (std::size_t j = 0; j < cols; ++j) orow[j] += kv * crow[j];
    }
  }

  return make_result({O, Ho, Wo}, std::move(out), {input, kernel}, [=](Node& self) {
    const auto& G = self.grad;
    if (double* gk = grad_of(self, 1)) {
      std::vector<double> c2 = build_cols(parent(self, 0).value);
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = 0.0;
          const double* crow = &c2[r * cols];
          const double* grow = &G[o * cols];
          for (std::size_t j = 0; j < cols; ++j) acc += grow[j] * crow[j];
          gk[o * rows + r] += acc;
        }
    }
    if (double* gi = grad_of(self, 0)) {
      const auto& Kv = parent(self, 1).value;
      std::vector<double> gcol(rows * cols, 0.0);
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t r = 0; r < rows; ++r) {
          const double kv = Kv[o * rows + r];
          if (kv == 0.0) continue;
          double* dst = &gcol[r * cols];
          const double* grow = &G[o * cols];
          for (std::size_t j = 0; j < cols; ++j) dst[j] += kv * grow[j];
        }
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ky = 0; ky < kh; ++ky)
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const double* src = &gcol[((c * kh + ky) * kw + kx) * cols];
            for (std::size_t oy = 0; oy < Ho; ++oy) {
              const long iy = static_cast<long>(oy * stride + ky) - lpad;
              if (iy < 0 || iy >= static_cast<long>(H)) continue;
              for (std::size_t ox = 0; ox < Wo; ++ox) {
                const long ix = static_cast<long>(ox * stride + kx) - lpad;
                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                gi[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)] += src[oy * Wo + ox];
              }
            }
          }
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  require_rank(x, 3, "add_channel_bias");
  const std::size_t C = x.dim(0), HW = x.dim(1) * x.dim(2);
  if (b.size() != C) {
    throw DimensionError("add_channel_bias: " + shape_string(x.shape()) + " vs bias " + shape_string(b.shape()));
  }
  std::vector<double> out(x.size());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < HW; ++i) out[c * HW + i] = x[c * HW + i] + b[c];
  return make_result(x.shape(), std::move(out), {x, b}, [C, HW](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < C * HW; ++i) g[i] += self.grad[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < HW; ++i) g[c] += self.grad[c * HW + i];
  });
}

Tensor upsample_nearest(const Tensor& x) {
  require_rank(x, 3, "upsample_nearest");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  std::vector<double> out(C * 4 * H * W);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < 2 * H; ++y)
      for (std::size_t xx = 0; xx < 2 * W; ++xx)
        out[(c * 2 * H + y) * 2 * W + xx] = x[(c * H + y / 2) * W + xx / 2];
  return make_result({C, 2 * H, 2 * W}, std::move(out), {x}, [C, H, W](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < 2 * H; ++y)
        for (std::size_t xx = 0; xx < 2 * W; ++xx)
          g[(c * H + y / 2) * W + xx / 2] += self.grad[(c * 2 * H + y) * 2 * W + xx];
  });
}

Tensor avg_pool(const Tensor& x, std::size_t factor) {
  require_rank(x, 3, "avg_pool");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (factor == 0 || H % factor != 0 || W % factor != 0) {
    throw DimensionError("avg_pool: factor " + std::to_string(factor) + " does not divide " + shape_string(x.shape()));
  }
  if (factor == 1) return x;
  const std::size_t Ho = H / factor, Wo = W / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  std::vector<double> out(C * Ho * Wo, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx)
        out[(c * Ho + y / factor) * Wo + xx / factor] += x[(c * H + y) * W + xx] * inv;
  return make_result({C, Ho, Wo}, std::move(out), {x}, [=](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx)
          g[(c * H + y) * W + xx] += self.grad[(c * Ho + y / factor) * Wo + xx / factor] * inv;
  });
}

Tensor spatial_mean(const Tensor& x) {
  require_rank(x, 3, "spatial_mean");
  const std::size_t C = x.dim(0), HW = x.dim(1) * x.dim(2);
  const double inv = 1.0 / static_cast<double>(HW);
  std::vector<double> out(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < HW; ++i) acc += x[c * HW + i];
    out[c] = acc * inv;
  }
  return make_result({C}, std::move(out), {x}, [C, HW, inv](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < HW; ++i) g[c * HW + i] += self.grad[c] * inv;
  });
}

Tensor broadcast_spatial(const Tensor& x, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw DimensionError("broadcast_spatial: target size must be positive");
  const std::size_t C = x.size(), HW = h * w;
  std::vector<double> out(C * HW);
  for (std::size_t c = 0; c < C; ++c) std::fill_n(&out[c * HW], HW, x[c]);
  return make_result({C, h, w}, std::move(out), {x}, [C, HW](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < HW; ++i) acc += self.grad[c * HW + i];
      g[c] += acc;
    }
  });
}

Tensor bilinear_warp(const Tensor& embedding, const Box& box, std::size_t out_h, std::size_t out_w) {
  require_rank(embedding, 3, "bilinear_warp");
  if (out_h == 0 || out_w == 0) throw DimensionError("bilinear_warp: output size must be positive");
  if (!(box.w > 0.0 && box.h > 0.0)) throw std::invalid_argument("bilinear_warp: zero-area box " + to_string(box));
  if (box.right() <= 0.0 || box.bottom() <= 0.0 || box.x >= static_cast<double>(out_w) ||
      box.y >= static_cast<double>(out_h)) {
    throw std::invalid_argument("bilinear_warp: box " + to_string(box) + " does not intersect the canvas");
  }
  const std::size_t D = embedding.dim(0), gh = embedding.dim(1), gw = embedding.dim(2);

  // Per output pixel: four source taps and weights; empty for pixels outside the box.
  struct Tap {
    std::size_t out;
    std::size_t src[4];
    double wt[4];
  };
  std::vector<Tap> taps;
  for (std::size_t py = 0; py < out_h; ++py) {
    const double cy = static_cast<double>(py) + 0.5;
    if (cy < box.y || cy >= box.bottom()) continue;
    const double sy = std::clamp((cy - box.y) / box.h * static_cast<double>(gh) - 0.5, 0.0,
                                 static_cast<double>(gh - 1));
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, gh - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t px = 0; px < out_w; ++px) {
      const double cx = static_cast<double>(px) + 0.5;
      if (cx < box.x || cx >= box.right()) continue;
      const double sx = std::clamp((cx - box.x) / box.w * static_cast<double>(gw) - 0.5, 0.0,
                                   static_cast<double>(gw - 1));
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, gw - 1);
      const double fx = sx - static_cast<double>(x0);
      taps.push_back(Tap{py * out_w + px,
                         {y0 * gw + x0, y0 * gw + x1, y1 * gw + x0, y1 * gw + x1},
                         {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx}});
    }
  }

  const std::size_t src_plane = gh * gw, dst_plane = out_h * out_w;
  std::vector<double> out(D * dst_plane, 0.0);
  auto E = embedding.data();
  for (std::size_t d = 0; d < D; ++d)
    for (const Tap& t : taps) {
      double v = 0.0;
      for (int k = 0; k < 4; ++k) v += t.wt[k] * E[d * src_plane + t.src[k]];
      out[d * dst_plane + t.out] = v;
    }
  return make_result({D, out_h, out_w}, std::move(out), {embedding},
                     [taps = std::move(taps), D, src_plane, dst_plane](Node& self) {
                       double* g = grad_of(self, 0);
                       if (!g) return;
                       for (std::size_t d = 0; d < D; ++d)
                         for (const Tap& t : taps) {
                           const double go = self.grad[d * dst_plane + t.out];
                           for (int k = 0; k < 4; ++k) g[d * src_plane + t.src[k]] += t.wt[k] * go;
                         }
                     });
}

}  // namespace sgg::num
