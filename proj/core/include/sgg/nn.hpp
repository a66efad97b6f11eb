#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sgg/num/ops.hpp"
#include "sgg/rng.hpp"

namespace sgg::nn {

enum class Init {
  kZero,
  kXavier,  // uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
  kNormal,  // N(0, 1 / fan_in)
};

struct NamedTensor {
  std::string name;
  num::Tensor tensor;
};

// Named trainable tensors in registration order. Registration order fixes
// both initialization draws and checkpoint layout, so it must not depend on
// runtime switches.
class ParamStore {
 public:
  num::Tensor add(const std::string& name, num::Shape shape, Init init, Rng& rng);
  const num::Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<NamedTensor> with_prefix(std::string_view prefix) const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<NamedTensor> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct Linear {
  num::Tensor weight;  // [out x in]
  num::Tensor bias;    // [out]

  static Linear create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                       Init init = Init::kXavier);
  num::Tensor operator()(const num::Tensor& x) const { return num::affine(weight, x, bias); }
  num::Tensor rows(const num::Tensor& x) const { return num::affine_rows(x, weight, bias); }
};

struct Conv2d {
  num::Tensor kernel;  // [out x in x k x k]
  num::Tensor bias;    // [out]
  std::size_t stride = 1;
  std::size_t pad = 0;

  static Conv2d create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                       std::size_t k, std::size_t stride, std::size_t pad, Rng& rng);
  num::Tensor operator()(const num::Tensor& x) const;
};

// Standard GRU cell:
//   z = sigmoid(Wz x + Uz h + bz)      update gate
//   r = sigmoid(Wr x + Ur h + br)      reset gate
//   c = tanh(Wh x + Uh (r * h) + bh)   candidate
//   h' = (1 - z) * h + z * c
struct GruCell {
  num::Tensor wz, uz, bz;
  num::Tensor wr, ur, br;
  num::Tensor wh, uh, bh;

  static GruCell create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
                        Rng& rng);
  std::size_t hidden() const { return bz.size(); }
  std::size_t input() const { return wz.dim(1); }
  num::Tensor step(const num::Tensor& x, const num::Tensor& h) const;
};

// W [m x n] times x [n].
num::Tensor matvec(const num::Tensor& w, const num::Tensor& x);

// Inverted dropout; identity when rate == 0.
num::Tensor dropout(const num::Tensor& x, double rate, Rng& rng);

}  // namespace sgg::nn
