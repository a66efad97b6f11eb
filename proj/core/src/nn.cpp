#include "sgg/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sgg/error.hpp"

namespace sgg::nn {

num::Tensor ParamStore::add(const std::string& name, num::Shape shape, Init init, Rng& rng) {
  if (contains(name)) throw std::logic_error("duplicate parameter name: " + name);
  const std::size_t n = num::shape_size(shape);
  std::size_t fan_in = 1, fan_out = shape.empty() ? 1 : shape[0];
  for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
  for (std::size_t i = 2; i < shape.size(); ++i) fan_out *= shape[i];
  if (shape.size() == 1) fan_in = shape[0];

  std::vector<double> data(n, 0.0);
  switch (init) {
    case Init::kZero:
      break;
    case Init::kXavier: {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : data) v = rng.uniform(-a, a);
      break;
    }
    case Init::kNormal: {
      const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : data) v = s * rng.normal();
      break;
    }
  }
  auto t = num::Tensor::from(std::move(shape), std::move(data), true);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, t});
  return t;
}

const num::Tensor& ParamStore::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return entries_[it->second].tensor;
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::vector<NamedTensor> ParamStore::with_prefix(std::string_view prefix) const {
  std::vector<NamedTensor> out;
  for (const auto& e : entries_)
    if (std::string_view(e.name).starts_with(prefix)) out.push_back(e);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

Linear Linear::create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                      Init init) {
  Linear l;
  l.weight = store.add(prefix + ".weight", {out, in}, init, rng);
  l.bias = store.add(prefix + ".bias", {out}, Init::kZero, rng);
  return l;
}

Conv2d Conv2d::create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                      std::size_t k, std::size_t stride, std::size_t pad, Rng& rng) {
  Conv2d c;
  c.kernel = store.add(prefix + ".kernel", {out, in, k, k}, Init::kXavier, rng);
  c.bias = store.add(prefix + ".bias", {out}, Init::kZero, rng);
  c.stride = stride;
  c.pad = pad;
  return c;
}

num::Tensor Conv2d::operator()(const num::Tensor& x) const {
  return num::add_channel_bias(num::conv2d(x, kernel, stride, pad), bias);
}

GruCell GruCell::create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
                        Rng& rng) {
  GruCell g;
  g.wz = store.add(prefix + ".wz", {hidden, in}, Init::kXavier, rng);
  g.uz = store.add(prefix + ".uz", {hidden, hidden}, Init::kXavier, rng);
  g.bz = store.add(prefix + ".bz", {hidden}, Init::kZero, rng);
  g.wr = store.add(prefix + ".wr", {hidden, in}, Init::kXavier, rng);
  g.ur = store.add(prefix + ".ur", {hidden, hidden}, Init::kXavier, rng);
  g.br = store.add(prefix + ".br", {hidden}, Init::kZero, rng);
  g.wh = store.add(prefix + ".wh", {hidden, in}, Init::kXavier, rng);
  g.uh = store.add(prefix + ".uh", {hidden, hidden}, Init::kXavier, rng);
  g.bh = store.add(prefix + ".bh", {hidden}, Init::kZero, rng);
  return g;
}

num::Tensor GruCell::step(const num::Tensor& x, const num::Tensor& h) const {
  using namespace num;
  if (x.size() != input() || h.size() != hidden()) {
    throw DimensionError("GruCell::step: x " + shape_string(x.shape()) + ", h " + shape_string(h.shape()) +
                         " for cell " + std::to_string(input()) + " -> " + std::to_string(hidden()));
  }
  Tensor z = sigmoid(add(affine(wz, x, bz), matvec(uz, h)));
  Tensor r = sigmoid(add(affine(wr, x, br), matvec(ur, h)));
  Tensor c = tanh(add(affine(wh, x, bh), matvec(uh, mul(r, h))));
  // (1 - z) * h + z * c  ==  h + z * (c - h)
  return add(h, mul(z, sub(c, h)));
}

num::Tensor matvec(const num::Tensor& w, const num::Tensor& x) {
  if (w.rank() != 2 || w.dim(1) != x.size()) {
    throw DimensionError("matvec: W " + num::shape_string(w.shape()) + " vs x " + num::shape_string(x.shape()));
  }
  return num::reshape(num::matmul(w, num::reshape(x, {x.size(), 1})), {w.dim(0)});
}

num::Tensor dropout(const num::Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
  const double keep = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
  return num::mul(x, num::Tensor::from(x.shape(), std::move(mask)));
}

}  // namespace sgg::nn
