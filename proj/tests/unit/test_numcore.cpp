#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracle.hpp"
#include "sgg/error.hpp"
#include "sgg/num/ops.hpp"

using namespace sgg;
using namespace sgg::num;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("matmul identity leaves the operand unchanged") {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from({2, 2}, {3.5, -2, 7, 0.25});
  CHECK(values(matmul(eye, m)) == values(m));
}

TEST_CASE("matmul row by column") {
  Tensor a = Tensor::from({1, 2}, {1, 2});
  Tensor b = Tensor::from({2, 1}, {3, 4});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{1, 1});
  CHECK(c[0] == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum against finite differences") {
  oracle::Gen gen(11);
  Tensor a = gen.tensor({3, 4}), b = gen.tensor({4, 2}, false);
  auto loss = [&] { return sum(matmul(a, b)); };
  auto an = oracle::analytic(loss, a);
  auto nu = oracle::central_diff([&] { return loss().item(); }, a);
  CHECK(oracle::relative_error(an, nu) < 1e-5);
  // d/da sum(ab) = 1 * b^T, row i of a gets column sums of b^T, i.e. row sums of b
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK(an[i * 4 + k] == doctest::Approx(b[k * 2] + b[k * 2 + 1]).epsilon(1e-14));
}

TEST_CASE("softmax of equal logits is uniform") {
  auto p = softmax(Tensor::vector({0, 0, 0}), 0);
  for (double v : p.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax of a large logit does not overflow") {
  auto p = softmax(Tensor::vector({1000, 0}), 0);
  CHECK(std::isfinite(p[0]));
  CHECK(std::isfinite(p[1]));
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax of a singleton is exactly one") {
  for (double x : {-1e6, -3.0, 0.0, 42.0, 1e6}) CHECK(softmax(Tensor::vector({x}), 0)[0] == 1.0);
}

TEST_CASE("softmax rejects an axis outside the tensor") {
  CHECK_THROWS_AS(softmax(Tensor::vector({1, 2}), 1), DimensionError);
}

TEST_CASE("relu tanh and concat elementwise semantics") {
  CHECK(values(relu(Tensor::vector({-1, 0, 2}))) == std::vector<double>{0, 0, 2});
  CHECK(tanh(Tensor::scalar(0.0))[0] == 0.0);
  CHECK(values(elementwise(Elementwise::kRelu, Tensor::vector({-1, 0, 2}))) == std::vector<double>{0, 0, 2});

  Tensor a = Tensor::vector({2.0}, true), b = Tensor::vector({-5.0}, true);
  Tensor c = concat({a, b}, 0);
  CHECK(values(c) == std::vector<double>{2.0, -5.0});
  backward(sum(mul(c, Tensor::vector({3.0, 7.0}))));
  CHECK(a.grad() == std::vector<double>{3.0});
  CHECK(b.grad() == std::vector<double>{7.0});
}

TEST_CASE("elementwise shape mismatch is a dimension error") {
  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  CHECK_THROWS_AS(mul(Tensor::zeros({2, 2}), Tensor::zeros({4})), DimensionError);
  CHECK_THROWS_AS(concat({Tensor::zeros({2, 2}), Tensor::zeros({2, 3})}, 0), DimensionError);
}

TEST_CASE("conv2d with a unit 1x1 kernel is the identity") {
  oracle::Gen gen(3);
  Tensor x = gen.tensor({1, 4, 5}, false);
  Tensor k = Tensor::from({1, 1, 1, 1}, {1.0});
  CHECK(values(conv2d(x, k)) == values(x));
}

TEST_CASE("conv2d all-ones 3x3 on all-ones 5x5 with padding") {
  Tensor x = Tensor::full({1, 5, 5}, 1.0);
  Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor y = conv2d(x, k, 1, 1);
  REQUIRE(y.shape() == Shape{1, 5, 5});
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 1; c < 4; ++c) CHECK(y[r * 5 + c] == 9.0);
  CHECK(y[0] == 4.0);
  CHECK(y[2] == 6.0);
}

TEST_CASE("conv2d kernel gradient against finite differences") {
  oracle::Gen gen(5);
  Tensor x = gen.tensor({2, 7, 7}, false);
  Tensor k = gen.tensor({3, 2, 3, 3});
  Tensor w = gen.tensor({3, 4, 4}, false);
  auto loss = [&] { return oracle::project(conv2d(x, k, 2, 1), w); };
  auto an = oracle::analytic(loss, k);
  auto nu = oracle::central_diff([&] { return loss().item(); }, k);
  CHECK(oracle::relative_error(an, nu) < 1e-5);
}

TEST_CASE("conv2d rejects a non-integral output size") {
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 6, 6}), Tensor::zeros({1, 1, 3, 3}), 2, 1), DimensionError);
}

TEST_CASE("bilinear_warp constant embedding over the full canvas") {
  Tensor e = Tensor::full({2, 8, 8}, 0.75);
  Tensor y = bilinear_warp(e, Box{0, 0, 12, 10}, 10, 12);
  REQUIRE(y.shape() == Shape{2, 10, 12});
  for (double v : y.data()) CHECK(v == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("bilinear_warp partial box leaves the outside at zero") {
  Tensor e = Tensor::full({1, 8, 8}, -1.5);
  Tensor y = bilinear_warp(e, Box{2, 3, 4, 5}, 12, 12);
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t c = 0; c < 12; ++c) {
      const bool inside = r >= 3 && r < 8 && c >= 2 && c < 6;
      CHECK(y[r * 12 + c] == (inside ? -1.5 : 0.0));
    }
}

TEST_CASE("bilinear_warp of a zero embedding is zero") {
  Tensor y = bilinear_warp(Tensor::zeros({3, 8, 8}), Box{1, 1, 5, 5}, 8, 8);
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("bilinear_warp left-half box keeps the right half exactly zero") {
  oracle::Gen gen(9);
  Tensor e = gen.tensor({2, 8, 8}, false);
  Tensor y = bilinear_warp(e, Box{0, 0, 8, 16}, 16, 16);
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t c = 8; c < 16; ++c) CHECK(y[d * 256 + r * 16 + c] == 0.0);
  // Interpolation formula evaluated directly: output pixel (r, c) samples grid
  // coordinate ((r + 0.5) / 16 * 8 - 0.5, (c + 0.5) / 8 * 8 - 0.5), clamped.
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 8; ++c) {
      double sy = std::clamp((r + 0.5) / 16.0 * 8.0 - 0.5, 0.0, 7.0);
      double sx = std::clamp((c + 0.5) / 8.0 * 8.0 - 0.5, 0.0, 7.0);
      auto y0 = static_cast<std::size_t>(sy), x0 = static_cast<std::size_t>(sx);
      std::size_t y1 = std::min<std::size_t>(y0 + 1, 7), x1 = std::min<std::size_t>(x0 + 1, 7);
      double fy = sy - y0, fx = sx - x0;
      double expect = (1 - fy) * (1 - fx) * e[y0 * 8 + x0] + (1 - fy) * fx * e[y0 * 8 + x1] +
                      fy * (1 - fx) * e[y1 * 8 + x0] + fy * fx * e[y1 * 8 + x1];
      CHECK(y[r * 16 + c] == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("bilinear_warp rejects a zero-area box") {
  CHECK_THROWS_AS(bilinear_warp(Tensor::zeros({1, 8, 8}), Box{1, 1, 0, 4}, 8, 8), std::invalid_argument);
}

TEST_CASE("upsample_nearest replicates into 2x2 blocks") {
  CHECK(values(upsample_nearest(Tensor::from({1, 1, 1}, {1.0}))) == std::vector<double>{1, 1, 1, 1});
  Tensor c = Tensor::full({2, 3, 3}, 0.3);
  CHECK(oracle::max_abs_diff(avg_pool(upsample_nearest(c), 2).data(), c.data()) == 0.0);
  oracle::Gen gen(1);
  Tensor x = gen.tensor({3, 4, 5}, false);
  auto s = [](const Tensor& t) { return std::accumulate(t.data().begin(), t.data().end(), 0.0); };
  CHECK(s(upsample_nearest(x)) == doctest::Approx(4.0 * s(x)).epsilon(1e-13));
}

TEST_CASE("backward of sum of squares is twice the input") {
  Tensor x = Tensor::vector({0.5, -2.0, 3.0}, true);
  backward(sum(mul(x, x)));
  CHECK(x.grad() == std::vector<double>{1.0, -4.0, 6.0});
}

TEST_CASE("backward leaves a disconnected leaf at zero") {
  Tensor x = Tensor::vector({1.0, 2.0}, true), y = Tensor::vector({3.0}, true);
  backward(sum(x));
  CHECK(y.grad() == std::vector<double>{0.0});
  CHECK_FALSE(y.has_grad());
}

TEST_CASE("backward through a random three layer network") {
  oracle::Gen gen(21);
  Tensor x = gen.tensor({5}, false);
  Tensor w1 = gen.tensor({6, 5}), b1 = gen.tensor({6}), w2 = gen.tensor({4, 6}), b2 = gen.tensor({4});
  Tensor w3 = gen.tensor({3, 4}), b3 = gen.tensor({3});
  auto loss = [&] {
    Tensor h1 = tanh(affine(w1, x, b1));
    Tensor h2 = sigmoid(affine(w2, h1, b2));
    return sum(log_softmax(affine(w3, h2, b3), 0));
  };
  std::vector<Tensor> all{w1, b1, w2, b2, w3, b3};
  for (auto& p : all) {
    auto an = oracle::analytic(loss, p, all);
    auto nu = oracle::central_diff([&] { return loss().item(); }, p);
    CHECK(oracle::relative_error(an, nu) < 1e-5);
  }
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), DimensionError);
}

TEST_CASE("tape replays in reverse creation order") {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  Tensor y = tanh(x);
  Tensor z = mul(y, x);
  Tensor l = sum(z);
  auto order = ComputeTape::record(l).backward_order();
  REQUIRE(order.size() == 4);
  CHECK(std::is_sorted(order.rbegin(), order.rend()));
  CHECK(order.front() == l.node()->seq);
  CHECK(order.back() == x.node()->seq);
}

TEST_CASE("tensor construction rejects inconsistent data") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), DimensionError);
}

// ---- properties ---------------------------------------------------------

namespace {

struct OpCase {
  const char* name;
  // Builds inputs (first entries are the differentiated leaves) and the op.
  std::function<std::pair<std::vector<Tensor>, std::function<Tensor()>>(oracle::Gen&)> make;
};

std::vector<OpCase> op_cases() {
  using P = std::pair<std::vector<Tensor>, std::function<Tensor()>>;
  std::vector<OpCase> c;
  auto unary = [](const char* name, Tensor (*f)(const Tensor&), std::vector<double> kinks = {}, double lo = -1,
                  double hi = 1) {
    return OpCase{name, [=](oracle::Gen& g) {
                    Shape s{g.size(1, 4), g.size(1, 5)};
                    Tensor x = g.tensor(s, true, kinks, 1e-3, lo, hi);
                    return P{{x}, [=] { return f(x); }};
                  }};
  };
  auto binary = [](const char* name, Tensor (*f)(const Tensor&, const Tensor&)) {
    return OpCase{name, [=](oracle::Gen& g) {
                    Shape s{g.size(1, 4), g.size(1, 5)};
                    Tensor a = g.tensor(s), b = g.tensor(s);
                    return P{{a, b}, [=] { return f(a, b); }};
                  }};
  };
  c.push_back(unary("tanh", tanh));
  c.push_back(unary("relu", relu, {0.0}));
  c.push_back(unary("sigmoid", sigmoid));
  c.push_back(unary("abs", abs, {0.0}));
  c.push_back(unary("exp", exp));
  c.push_back(unary("log", log, {}, 0.1, 1.0));
  c.push_back(unary("smooth_l1", smooth_l1, {-1.0, 1.0}));
  c.push_back(unary("transpose", transpose));
  c.push_back(unary("sum", sum));
  c.push_back(unary("mean", mean));
  c.push_back(binary("add", add));
  c.push_back(binary("sub", sub));
  c.push_back(binary("mul", mul));
  c.push_back(binary("dot", dot));
  c.push_back({"leaky_relu", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 6)}, true, {0.0});
                 return P{{x}, [=] { return leaky_relu(x, 0.2); }};
               }});
  c.push_back({"clamp", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 6)}, true, {-0.5, 0.5});
                 return P{{x}, [=] { return clamp(x, -0.5, 0.5); }};
               }});
  c.push_back({"scale", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 6)});
                 double k = g.uniform();
                 return P{{x}, [=] { return add_scalar(scale(x, k), k); }};
               }});
  c.push_back({"scale_by", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 6)}), s = g.tensor({1});
                 return P{{x, s}, [=] { return scale_by(x, s); }};
               }});
  c.push_back({"matmul", [](oracle::Gen& g) {
                 std::size_t m = g.size(1, 4), k = g.size(1, 4), n = g.size(1, 4);
                 Tensor a = g.tensor({m, k}), b = g.tensor({k, n});
                 return P{{a, b}, [=] { return matmul(a, b); }};
               }});
  c.push_back({"affine", [](oracle::Gen& g) {
                 std::size_t o = g.size(1, 4), i = g.size(1, 5);
                 Tensor w = g.tensor({o, i}), x = g.tensor({i}), b = g.tensor({o});
                 return P{{w, x, b}, [=] { return affine(w, x, b); }};
               }});
  c.push_back({"affine_rows", [](oracle::Gen& g) {
                 std::size_t k = g.size(1, 3), o = g.size(1, 4), i = g.size(1, 5);
                 Tensor x = g.tensor({k, i}), w = g.tensor({o, i}), b = g.tensor({o});
                 return P{{x, w, b}, [=] { return affine_rows(x, w, b); }};
               }});
  c.push_back({"concat", [](oracle::Gen& g) {
                 std::size_t r = g.size(1, 3);
                 Tensor a = g.tensor({r, g.size(1, 4)}), b = g.tensor({r, g.size(1, 4)});
                 return P{{a, b}, [=] { return concat({a, b}, 1); }};
               }});
  c.push_back({"slice", [](oracle::Gen& g) {
                 std::size_t n = g.size(2, 7);
                 Tensor x = g.tensor({n, 2});
                 std::size_t start = g.size(0, n - 1);
                 return P{{x}, [=] { return slice(x, 0, start, n - start); }};
               }});
  c.push_back({"reshape", [](oracle::Gen& g) {
                 std::size_t a = g.size(1, 4), b = g.size(1, 4);
                 Tensor x = g.tensor({a, b});
                 return P{{x}, [=] { return reshape(x, {b * a}); }};
               }});
  c.push_back({"repeat_rows", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 5)});
                 std::size_t k = g.size(1, 4);
                 return P{{x}, [=] { return repeat_rows(x, k); }};
               }});
  c.push_back({"add_row_broadcast", [](oracle::Gen& g) {
                 std::size_t m = g.size(1, 4), n = g.size(1, 4);
                 Tensor x = g.tensor({m, n}), b = g.tensor({n});
                 return P{{x, b}, [=] { return add_row_broadcast(x, b); }};
               }});
  c.push_back({"stack", [](oracle::Gen& g) {
                 std::size_t n = g.size(1, 5);
                 Tensor a = g.tensor({n}), b = g.tensor({n}), d = g.tensor({n});
                 return P{{a, b, d}, [=] { return stack({a, b, d}); }};
               }});
  c.push_back({"softmax", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 4), g.size(1, 5)});
                 std::size_t axis = g.size(0, 1);
                 return P{{x}, [=] { return softmax(x, axis); }};
               }});
  c.push_back({"log_softmax", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 4), g.size(1, 5)});
                 std::size_t axis = g.size(0, 1);
                 return P{{x}, [=] { return log_softmax(x, axis); }};
               }});
  c.push_back({"conv2d", [](oracle::Gen& g) {
                 std::size_t C = g.size(1, 3), O = g.size(1, 3), k = g.size(1, 3);
                 std::size_t pad = g.size(0, 1), H = g.size(k, 6), W = g.size(k, 6);
                 Tensor x = g.tensor({C, H, W}), w = g.tensor({O, C, k, k});
                 return P{{x, w}, [=] { return conv2d(x, w, 1, pad); }};
               }});
  c.push_back({"add_channel_bias", [](oracle::Gen& g) {
                 std::size_t C = g.size(1, 3);
                 Tensor x = g.tensor({C, g.size(1, 4), g.size(1, 4)}), b = g.tensor({C});
                 return P{{x, b}, [=] { return add_channel_bias(x, b); }};
               }});
  c.push_back({"upsample_nearest", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 3), g.size(1, 4), g.size(1, 4)});
                 return P{{x}, [=] { return upsample_nearest(x); }};
               }});
  c.push_back({"avg_pool", [](oracle::Gen& g) {
                 std::size_t f = g.size(1, 3);
                 Tensor x = g.tensor({g.size(1, 3), f * g.size(1, 3), f * g.size(1, 3)});
                 return P{{x}, [=] { return avg_pool(x, f); }};
               }});
  c.push_back({"spatial_mean", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 3), g.size(1, 4), g.size(1, 4)});
                 return P{{x}, [=] { return spatial_mean(x); }};
               }});
  c.push_back({"broadcast_spatial", [](oracle::Gen& g) {
                 Tensor x = g.tensor({g.size(1, 4)});
                 std::size_t h = g.size(1, 4), w = g.size(1, 4);
                 return P{{x}, [=] { return broadcast_spatial(x, h, w); }};
               }});
  c.push_back({"bilinear_warp", [](oracle::Gen& g) {
                 Tensor e = g.tensor({g.size(1, 3), 8, 8});
                 Box b{g.uniform(0, 6), g.uniform(0, 6), g.uniform(2, 10), g.uniform(2, 10)};
                 return P{{e}, [=] { return bilinear_warp(e, b, 12, 12); }};
               }});
  return c;
}

}  // namespace

TEST_CASE("every differentiable op matches finite differences on 20 random shapes") {
  std::uint64_t seed = 100;
  for (const auto& op : op_cases()) {
    oracle::Gen gen(seed++);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      auto [leaves, f] = op.make(gen);
      Tensor probe = f();
      Tensor weights = gen.tensor(probe.shape(), false);
      auto loss = [&] { return oracle::project(f(), weights); };
      for (auto& leaf : leaves) {
        auto an = oracle::analytic(loss, leaf, leaves);
        auto nu = oracle::central_diff([&] { return loss().item(); }, leaf);
        worst = std::max(worst, oracle::relative_error(an, nu));
      }
    }
    INFO(op.name);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("softmax sums to one along the chosen axis") {
  oracle::Gen gen(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t r = gen.size(1, 6), c = gen.size(1, 6);
    Tensor x = gen.tensor({r, c}, false, {}, 0, -50, 50);
    for (std::size_t axis = 0; axis < 2; ++axis) {
      Tensor p = softmax(x, axis);
      std::size_t outer = axis == 0 ? c : r, inner = axis == 0 ? r : c;
      for (std::size_t o = 0; o < outer; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < inner; ++i) s += axis == 0 ? p[i * c + o] : p[o * c + i];
        CHECK(std::fabs(s - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("fan-out accumulates gradients from both paths") {
  oracle::Gen gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = gen.tensor({gen.size(1, 6)});
    Tensor w = gen.tensor(x.shape(), false);
    backward(add(oracle::project(tanh(x), w), sum(mul(x, w))));
    auto both = x.grad();
    x.zero_grad();
    backward(oracle::project(tanh(x), w));
    auto first = x.grad();
    x.zero_grad();
    backward(sum(mul(x, w)));
    auto second = x.grad();
    for (std::size_t i = 0; i < both.size(); ++i) CHECK(both[i] == doctest::Approx(first[i] + second[i]).epsilon(1e-14));
  }
}

TEST_CASE("forward ops are deterministic") {
  oracle::Gen gen(8);
  Tensor x = gen.tensor({2, 7, 7}, false), k = gen.tensor({3, 2, 3, 3}, false);
  auto run = [&] { return values(softmax(reshape(conv2d(x, k, 1, 1), {3, 49}), 1)); };
  CHECK(run() == run());
}

TEST_CASE("finite inputs give finite outputs") {
  oracle::Gen gen(10);
  Tensor x = gen.tensor({4, 4}, false, {}, 0, -700, 700);
  for (const auto& t : {exp(scale(x, 0.5)), sigmoid(x), tanh(x), softmax(x, 1), log_softmax(x, 0)})
    for (double v : t.data()) CHECK(std::isfinite(v));
}
