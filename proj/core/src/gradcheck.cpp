#include "sgg/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "sgg/config.hpp"
#include "sgg/graphgen.hpp"
#include "sgg/imggen.hpp"
#include "sgg/kb.hpp"
#include "sgg/model.hpp"
#include "sgg/num/ops.hpp"
#include "sgg/refine.hpp"

namespace sgg::gradcheck {

using num::Shape;
using num::Tensor;

double rel_err(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, ma = 0.0, mn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - n[i]));
    ma = std::max(ma, std::abs(a[i]));
    mn = std::max(mn, std::abs(n[i]));
  }
  return diff / std::max({ma, mn, 1e-8});
}

std::vector<double> numeric_grad(const std::function<double()>& f, Tensor leaf, double h) {
  auto data = leaf.mutable_data();
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = data[i];
    data[i] = v + h;
    const double fp = f();
    data[i] = v - h;
    const double fm = f();
    data[i] = v;
    out[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

bool Report::pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.pass(); });
}

double Report::worst() const {
  double w = 0.0;
  for (const auto& r : rows) w = std::max(w, r.max_rel_err);
  return w;
}

std::vector<Row> check(const std::function<Tensor()>& loss, const std::vector<nn::NamedTensor>& leaves,
                       double tolerance, const std::function<std::string(const std::string&)>& group, double h) {
  for (auto e : leaves) e.tensor.zero_grad();
  num::backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& e : leaves) analytic.push_back(e.tensor.grad());
  for (auto e : leaves) e.tensor.zero_grad();

  auto f = [&] { return loss().item(); };
  std::vector<Row> rows;
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto numeric = numeric_grad(f, leaves[i].tensor, h);
    const std::string g = group ? group(leaves[i].name) : leaves[i].name;
    auto it = row_of.find(g);
    if (it == row_of.end()) {
      it = row_of.emplace(g, rows.size()).first;
      rows.push_back(Row{g, 0, 0.0, tolerance});
    }
    Row& r = rows[it->second];
    r.scalars += numeric.size();
    r.max_rel_err = std::max(r.max_rel_err, rel_err(analytic[i], numeric));
  }
  return rows;
}

namespace {

Tensor uniform(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
  std::vector<double> v(num::shape_size(s));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(s), std::move(v), grad);
}

// Uniform in [lo, hi] but at least `margin` away from every kink.
Tensor away_from(Shape s, Rng& rng, const std::vector<double>& kinks, double margin, double lo = -1.0,
                 double hi = 1.0) {
  std::vector<double> v(num::shape_size(s));
  for (auto& x : v) {
    do {
      x = rng.uniform(lo, hi);
    } while (std::any_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(x - k) < margin; }));
  }
  return Tensor::from(std::move(s), std::move(v), true);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

Shape any_shape(Rng& rng) {
  Shape s(pick(rng, 1, 3));
  for (auto& d : s) d = pick(rng, 1, 4);
  return s;
}

struct Case {
  std::vector<nn::NamedTensor> leaves;
  std::function<Tensor()> out;
};
using Maker = std::function<Case(Rng&)>;

std::vector<nn::NamedTensor> named(std::initializer_list<Tensor> ts) {
  std::vector<nn::NamedTensor> out;
  std::size_t i = 0;
  for (const auto& t : ts) out.push_back({"arg" + std::to_string(i++), t});
  return out;
}

Case unary(Tensor x, std::function<Tensor(const Tensor&)> op) { return {named({x}), [x, op] { return op(x); }}; }

std::vector<std::pair<std::string, Maker>> op_cases() {
  std::vector<std::pair<std::string, Maker>> c;
  c.emplace_back("matmul", [](Rng& r) {
    const auto m = pick(r, 1, 4), k = pick(r, 1, 4), n = pick(r, 1, 4);
    Tensor a = uniform({m, k}, r), b = uniform({k, n}, r);
    return Case{named({a, b}), [a, b] { return num::matmul(a, b); }};
  });
  c.emplace_back("transpose", [](Rng& r) { return unary(uniform({pick(r, 1, 4), pick(r, 1, 4)}, r), num::transpose); });
  c.emplace_back("affine", [](Rng& r) {
    const auto o = pick(r, 1, 4), i = pick(r, 1, 4);
    Tensor w = uniform({o, i}, r), x = uniform({i}, r), b = uniform({o}, r);
    return Case{named({w, x, b}), [=] { return num::affine(w, x, b); }};
  });
  c.emplace_back("affine_rows", [](Rng& r) {
    const auto k = pick(r, 1, 4), o = pick(r, 1, 4), i = pick(r, 1, 4);
    Tensor x = uniform({k, i}, r), w = uniform({o, i}, r), b = uniform({o}, r);
    return Case{named({x, w, b}), [=] { return num::affine_rows(x, w, b); }};
  });
  for (auto kind : {num::Elementwise::kAdd, num::Elementwise::kSub, num::Elementwise::kMul}) {
    const char* name = kind == num::Elementwise::kAdd ? "add" : kind == num::Elementwise::kSub ? "sub" : "mul";
    c.emplace_back(name, [kind](Rng& r) {
      const Shape s = any_shape(r);
      Tensor a = uniform(s, r), b = uniform(s, r);
      return Case{named({a, b}), [=] { return num::elementwise(kind, a, b); }};
    });
  }
  c.emplace_back("scale", [](Rng& r) {
    const double k = r.uniform(-2, 2);
    return unary(uniform(any_shape(r), r), [k](const Tensor& x) { return num::scale(x, k); });
  });
  c.emplace_back("add_scalar", [](Rng& r) {
    const double k = r.uniform(-2, 2);
    return unary(uniform(any_shape(r), r), [k](const Tensor& x) { return num::add_scalar(x, k); });
  });
  c.emplace_back("scale_by", [](Rng& r) {
    Tensor x = uniform(any_shape(r), r), s = uniform({1}, r);
    return Case{named({x, s}), [=] { return num::scale_by(x, s); }};
  });
  c.emplace_back("tanh", [](Rng& r) { return unary(uniform(any_shape(r), r), num::tanh); });
  c.emplace_back("sigmoid", [](Rng& r) { return unary(uniform(any_shape(r), r), num::sigmoid); });
  c.emplace_back("exp", [](Rng& r) { return unary(uniform(any_shape(r), r), num::exp); });
  c.emplace_back("log", [](Rng& r) { return unary(uniform(any_shape(r), r, 0.2, 2.0), num::log); });
  c.emplace_back("relu", [](Rng& r) { return unary(away_from(any_shape(r), r, {0.0}, 0.05), num::relu); });
  c.emplace_back("abs", [](Rng& r) { return unary(away_from(any_shape(r), r, {0.0}, 0.05), num::abs); });
  c.emplace_back("leaky_relu", [](Rng& r) {
    return unary(away_from(any_shape(r), r, {0.0}, 0.05), [](const Tensor& x) { return num::leaky_relu(x, 0.2); });
  });
  c.emplace_back("clamp", [](Rng& r) {
    return unary(away_from(any_shape(r), r, {-0.5, 0.5}, 0.05),
                 [](const Tensor& x) { return num::clamp(x, -0.5, 0.5); });
  });
  c.emplace_back("smooth_l1", [](Rng& r) {
    return unary(away_from(any_shape(r), r, {-1.0, 1.0}, 0.05, -2.0, 2.0), num::smooth_l1);
  });
  c.emplace_back("elementwise_tanh", [](Rng& r) {
    return unary(uniform(any_shape(r), r), [](const Tensor& x) { return num::elementwise(num::Elementwise::kTanh, x); });
  });
  c.emplace_back("concat", [](Rng& r) {
    Shape s = any_shape(r);
    const auto axis = r.below(s.size());
    Shape s2 = s;
    s2[axis] = pick(r, 1, 3);
    Tensor a = uniform(s, r), b = uniform(s2, r);
    return Case{named({a, b}), [=] { return num::concat({a, b}, axis); }};
  });
  c.emplace_back("slice", [](Rng& r) {
    Shape s = any_shape(r);
    const auto axis = r.below(s.size());
    s[axis] = pick(r, 2, 5);
    const auto start = r.below(s[axis]);
    const auto len = pick(r, 1, s[axis] - start);
    return unary(uniform(s, r), [=](const Tensor& x) { return num::slice(x, axis, start, len); });
  });
  c.emplace_back("reshape", [](Rng& r) {
    const auto a = pick(r, 1, 4), b = pick(r, 1, 4);
    return unary(uniform({a, b}, r), [=](const Tensor& x) { return num::reshape(x, {b, a}); });
  });
  c.emplace_back("repeat_rows", [](Rng& r) {
    const auto k = pick(r, 1, 4);
    return unary(uniform({pick(r, 1, 4)}, r), [k](const Tensor& x) { return num::repeat_rows(x, k); });
  });
  c.emplace_back("add_row_broadcast", [](Rng& r) {
    const auto m = pick(r, 1, 4), n = pick(r, 1, 4);
    Tensor x = uniform({m, n}, r), b = uniform({n}, r);
    return Case{named({x, b}), [=] { return num::add_row_broadcast(x, b); }};
  });
  c.emplace_back("stack", [](Rng& r) {
    const Shape s = any_shape(r);
    Tensor a = uniform(s, r), b = uniform(s, r), d = uniform(s, r);
    return Case{named({a, b, d}), [=] { return num::stack({a, b, d}); }};
  });
  c.emplace_back("sum", [](Rng& r) { return unary(uniform(any_shape(r), r), num::sum); });
  c.emplace_back("mean", [](Rng& r) { return unary(uniform(any_shape(r), r), num::mean); });
  c.emplace_back("dot", [](Rng& r) {
    const auto n = pick(r, 1, 6);
    Tensor a = uniform({n}, r), b = uniform({n}, r);
    return Case{named({a, b}), [=] { return num::dot(a, b); }};
  });
  for (std::size_t axis : {0u, 1u}) {
    c.emplace_back("softmax_axis" + std::to_string(axis), [axis](Rng& r) {
      return unary(uniform({pick(r, 1, 4), pick(r, 1, 4)}, r, -2, 2),
                   [axis](const Tensor& x) { return num::softmax(x, axis); });
    });
    c.emplace_back("log_softmax_axis" + std::to_string(axis), [axis](Rng& r) {
      return unary(uniform({pick(r, 1, 4), pick(r, 1, 4)}, r, -2, 2),
                   [axis](const Tensor& x) { return num::log_softmax(x, axis); });
    });
  }
  c.emplace_back("conv2d", [](Rng& r) {
    const std::size_t k = r.below(2) ? 3 : 1, stride = pick(r, 1, 2), pad = k == 3 ? r.below(2) : 0;
    const std::size_t oh = pick(r, 1, 3), ow = pick(r, 1, 3);
    const std::size_t h = (oh - 1) * stride + k - 2 * pad, w = (ow - 1) * stride + k - 2 * pad;
    const std::size_t C = pick(r, 1, 3), O = pick(r, 1, 3);
    Tensor x = uniform({C, std::max<std::size_t>(h, 1), std::max<std::size_t>(w, 1)}, r);
    Tensor kern = uniform({O, C, k, k}, r);
    return Case{named({x, kern}), [=] { return num::conv2d(x, kern, stride, pad); }};
  });
  c.emplace_back("add_channel_bias", [](Rng& r) {
    const auto C = pick(r, 1, 3);
    Tensor x = uniform({C, pick(r, 1, 3), pick(r, 1, 3)}, r), b = uniform({C}, r);
    return Case{named({x, b}), [=] { return num::add_channel_bias(x, b); }};
  });
  c.emplace_back("upsample_nearest", [](Rng& r) {
    return unary(uniform({pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3)}, r), num::upsample_nearest);
  });
  c.emplace_back("avg_pool", [](Rng& r) {
    const auto f = pick(r, 1, 3);
    return unary(uniform({pick(r, 1, 3), f * pick(r, 1, 2), f * pick(r, 1, 2)}, r),
                 [f](const Tensor& x) { return num::avg_pool(x, f); });
  });
  c.emplace_back("spatial_mean", [](Rng& r) {
    return unary(uniform({pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3)}, r), num::spatial_mean);
  });
  c.emplace_back("broadcast_spatial", [](Rng& r) {
    const auto h = pick(r, 1, 3), w = pick(r, 1, 3);
    return unary(uniform({pick(r, 1, 4)}, r), [=](const Tensor& x) { return num::broadcast_spatial(x, h, w); });
  });
  c.emplace_back("bilinear_warp", [](Rng& r) {
    const auto g = pick(r, 2, 4);
    const Box box{r.uniform(0.0, 3.0), r.uniform(0.0, 3.0), r.uniform(1.5, 5.0), r.uniform(1.5, 5.0)};
    return unary(uniform({pick(r, 1, 3), g, g}, r),
                 [box](const Tensor& x) { return num::bilinear_warp(x, box, 6, 6); });
  });
  return c;
}

// sum(out * W) with a fixed random W turns any op output into a scalar loss.
std::function<Tensor()> projected(const std::function<Tensor()>& out, Rng& rng) {
  Tensor w = uniform(out().shape(), rng, -1.0, 1.0, false);
  return [out, w] { return num::sum(num::mul(out(), w)); };
}

auto strip_last = [](const std::string& name) {
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void append(std::vector<Row>& dst, const std::string& prefix, std::vector<Row> rows) {
  for (auto& r : rows) {
    r.name = prefix + r.name;
    dst.push_back(std::move(r));
  }
}

}  // namespace

Report check_ops(std::uint64_t seed, std::size_t trials) {
  const auto t0 = std::chrono::steady_clock::now();
  Report rep{"op", {}, 0.0};
  for (const auto& [name, make] : op_cases()) {
    Row row{name, 0, 0.0, 1e-5};
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng(derive_seed({seed, fnv1a64(name), t}));
      Case c = make(rng);
      auto loss = projected(c.out, rng);
      for (const auto& r : check(loss, c.leaves, 1e-5, [](const std::string&) { return std::string(); })) {
        row.scalars += r.scalars;
        row.max_rel_err = std::max(row.max_rel_err, r.max_rel_err);
      }
    }
    rep.rows.push_back(row);
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

Report check_modules(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Report rep{"module", {}, 0.0};
  constexpr double tol = 1e-5;
  Rng rng(derive_seed({seed, 0x30d}));

  {  // bidirectional GRU fact encoder
    nn::ParamStore store;
    kb::Vocabulary vocab({"cup", "on", "table", "used", "for"});
    auto enc = kb::FactEncoderParams::create(store, "kb", vocab.size(), 3, 3, rng);
    const std::vector<std::string> tokens{"cup", "on", "table", "zebra"};
    auto out = [&] { return kb::encode_tokens(tokens, vocab, enc); };
    append(rep.rows, "encode_fact/", check(projected(out, rng), store.entries(), tol, strip_last));
  }

  refine::RefineConfig rc;
  rc.feature_dim = 4;
  rc.memory_dim = 3;
  rc.attention_hidden = 3;
  rc.fact_dim = 4;
  rc.passes = 2;
  rc.iterations = 1;
  nn::ParamStore rstore;
  auto rp = refine::RefineParams::create(rstore, "refine", rc, rng);

  {  // inter-refinement over 3 objects and 2 subgraphs
    std::vector<Tensor> objs{uniform({4}, rng), uniform({4}, rng), uniform({4}, rng)};
    std::vector<Tensor> maps{uniform({4, 2, 2}, rng), uniform({4, 2, 2}, rng)};
    refine::Associations assoc{{{0}, {0, 1}, {1}}, {{0, 1}, {1, 2}}};
    auto out = [&] {
      auto r = refine::inter_refine(objs, maps, assoc, rp);
      std::vector<Tensor> flat = r.objects;
      for (auto& s : r.subgraphs) flat.push_back(num::reshape(s, {s.size()}));
      return num::concat(flat, 0);
    };
    auto leaves = named({objs[0], objs[1], objs[2], maps[0], maps[1]});
    for (auto& e : leaves) e.name = "inputs";
    for (const auto& p : rstore.with_prefix("refine.s2o")) leaves.push_back(p);
    for (const auto& p : rstore.with_prefix("refine.o2s")) leaves.push_back(p);
    append(rep.rows, "inter_refine/", check(projected(out, rng), leaves, tol, strip_last));
  }

  {  // DMN passes and knowledge fusion
    Tensor o = uniform({4}, rng);
    std::vector<Tensor> facts{uniform({4}, rng), uniform({4}, rng), uniform({4}, rng)};
    auto out = [&] { return refine::kb_refine(o, facts, rp); };
    auto leaves = named({o, facts[0], facts[1], facts[2]});
    for (auto& e : leaves) e.name = "inputs";
    for (const auto& p : rstore.entries())
      if (p.name.rfind("refine.s2o", 0) != 0 && p.name.rfind("refine.o2s", 0) != 0) leaves.push_back(p);
    append(rep.rows, "kb_refine/", check(projected(out, rng), leaves, tol, strip_last));
    auto empty = [&] { return refine::kb_refine(o, {}, rp); };
    append(rep.rows, "kb_refine_empty/",
           check(projected(empty, rng), {{"inputs", o}, {"refine.fuse.w", rp.fuse.weight}}, tol, strip_last));
  }

  graph::HeadConfig hc;
  hc.feature_dim = 4;
  hc.ks = 2;
  hc.num_classes = 3;
  hc.num_predicates = 3;
  hc.bottleneck = 2;
  nn::ParamStore hstore;
  auto hp = graph::HeadParams::create(hstore, "head", hc, rng);
  std::vector<Tensor> objs{uniform({4}, rng), uniform({4}, rng)};
  Tensor map = uniform({4, 2, 2}, rng);

  {  // relation and object heads
    auto out = [&] {
      return num::concat({graph::predict_relation(objs[0], objs[1], map, hp),
                          graph::predict_relation(objs[1], objs[0], map, hp), graph::predict_object(objs[0], hp),
                          graph::box_deltas(objs[1], hp)},
                         0);
    };
    auto leaves = hstore.entries();
    leaves.push_back({"inputs.o0", objs[0]});
    leaves.push_back({"inputs.o1", objs[1]});
    leaves.push_back({"inputs.map", map});
    append(rep.rows, "heads/", check(projected(out, rng), leaves, tol, strip_last));
  }

  {  // scene-graph loss
    graph::GroundTruthAssignment gt;
    gt.object_labels = {1, 0};
    gt.matched_object = {0, -1};
    gt.box_targets = {std::array<double, 4>{0.1, -0.2, 0.05, 0.3}, std::nullopt};
    gt.predicate_labels = {2, 0};
    auto loss = [&] {
      graph::GraphPredictions p;
      for (const auto& o : objs) {
        p.object_probs.push_back(graph::predict_object(o, hp));
        p.box_deltas.push_back(graph::box_deltas(o, hp));
      }
      p.relation_probs.push_back(graph::predict_relation(objs[0], objs[1], map, hp));
      p.relation_probs.push_back(graph::predict_relation(objs[1], objs[0], map, hp));
      return graph::scene_graph_loss(p, gt, graph::LossWeights{}).total;
    };
    auto leaves = hstore.entries();
    leaves.push_back({"inputs.o0", objs[0]});
    leaves.push_back({"inputs.o1", objs[1]});
    leaves.push_back({"inputs.map", map});
    append(rep.rows, "scene_graph_loss/", check(loss, leaves, tol, strip_last));
  }

  imggen::GanConfig gc;
  gc.image_size = 16;
  gc.start_resolution = 4;
  gc.object_dim = 4;
  gc.layout_dim = 3;
  gc.gen_channels = 3;
  gc.noise_channels = 2;
  gc.disc_channels = 3;
  gc.grid = 4;
  nn::ParamStore gstore;
  auto gp = imggen::GanParams::create(gstore, "gen", "disc", gc, rng);
  {  // layout composition and generator at 16x16
    auto out = [&] {
      auto layout = imggen::layout_from_objects(objs, {Box{2, 2, 20, 24}, Box{12, 8, 18, 20}}, 32, 32, gp);
      return imggen::generate_image(layout, 99, gp);
    };
    auto leaves = gstore.with_prefix("gen.");
    leaves.push_back({"inputs.o0", objs[0]});
    leaves.push_back({"inputs.o1", objs[1]});
    append(rep.rows, "generator/", check(projected(out, rng), leaves, tol, strip_last));
  }
  {  // discriminator and adversarial objectives
    Tensor real = uniform({3, 16, 16}, rng, -0.9, 0.9), fake = uniform({3, 16, 16}, rng, -0.9, 0.9);
    Tensor layout = uniform({3, 16, 16}, rng);
    // The discriminator objective sees fake and layout detached, so inputs
    // are checked against the generator objective alone.
    auto both = [&] {
      auto gl = imggen::gan_losses(real, fake, layout, gp);
      return num::add(gl.d_objective, gl.g_objective);
    };
    auto g_only = [&] { return imggen::gan_losses(real, fake, layout, gp).g_objective; };
    append(rep.rows, "gan_losses/", check(both, gstore.with_prefix("disc."), tol, strip_last));
    append(rep.rows, "gan_losses/", check(g_only, {{"inputs.fake", fake}, {"inputs.layout", layout}}, tol, strip_last));
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

Report check_end2end(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Report rep{"end2end", {}, 0.0};

  ModelConfig mc;
  mc.features.dim = 8;
  mc.features.canvas_w = 32;
  mc.features.canvas_h = 32;
  mc.ks = 3;
  mc.refine.memory_dim = 8;
  mc.refine.attention_hidden = 8;
  mc.refine.passes = 2;
  mc.refine.iterations = 2;
  mc.rel_bottleneck = 4;
  mc.embed_dim = 4;
  mc.fact_hidden = 4;
  mc.top_k = 8;
  mc.gan.image_size = 16;
  mc.gan.start_resolution = 4;
  mc.gan.layout_dim = 4;
  mc.gan.grid = 4;
  mc.gan.gen_channels = 4;
  mc.gan.noise_channels = 2;
  mc.gan.disc_channels = 4;
  mc.init_seed = seed;

  LabelSet labels = LabelSet::make({"cup", "table", "lamp"}, {"on", "near"});
  auto store = kb::TripleStore::from_triples({{"cup", "on", "table", 2.0},
                                              {"cup", "IsA", "container", 1.0},
                                              {"table", "AtLocation", "kitchen", 1.5},
                                              {"table", "near", "lamp", 1.0},
                                              {"lamp", "near", "table", 0.5},
                                              {"lamp", "IsA", "light", 0.8}});
  Scene scene;
  scene.id = "gradcheck";
  scene.width = 32;
  scene.height = 32;
  scene.objects = {{Box{4, 3, 11, 10}, 1}, {Box{12, 12, 17, 15}, 2}};
  scene.relations = {{0, 1, 1}};

  Model model(mc, labels, std::move(store));
  const Tensor real = imggen::resize_to(imggen::render_scene(scene), 16);
  // J1 = L_sg + L_G drives every non-discriminator parameter; the
  // discriminator additionally descends J2 (which sees fake and layout
  // detached). Each group is checked against the objective it is trained on.
  auto objective = [&](bool with_disc) {
    ScenePass pass = model.forward(scene, true);
    auto gt = graph::assign_ground_truth(pass.proposal_boxes, pass.subgraphs.candidates, scene);
    Tensor total = graph::scene_graph_loss(pass.predictions, gt, graph::LossWeights{}).total;
    auto layout = model.layout(pass.refined.objects, pass.proposal_boxes, scene);
    Tensor fake = imggen::generate_image(layout, derive_seed({seed, 7}), model.gan_params());
    auto gl = imggen::gan_losses(real, fake, layout.grid, model.gan_params());
    Tensor j1 = num::add(total, gl.g_objective);
    return with_disc ? num::add(j1, gl.d_objective) : j1;
  };
  std::vector<nn::NamedTensor> disc, rest;
  for (const auto& e : model.params().entries()) (group_of(e.name) == ParamGroup::kDisc ? disc : rest).push_back(e);
  constexpr double h = 1e-5;
  rep.rows = check([&] { return objective(false); }, rest, 1e-4, strip_last, h);
  append(rep.rows, "", check([&] { return objective(true); }, disc, 1e-4, strip_last, h));
  rep.seconds = seconds_since(t0);
  return rep;
}

std::string format_table(const Report& report) {
  std::ostringstream o;
  std::size_t width = 5;
  for (const auto& r : report.rows) width = std::max(width, r.name.size());
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-*s %8s %12s %9s  %s\n", static_cast<int>(width), "group", "scalars", "max_rel_err",
                "tol", "status");
  o << buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-*s %8zu %12.3e %9.1e  %s\n", static_cast<int>(width), r.name.c_str(), r.scalars,
                  r.max_rel_err, r.tolerance, r.pass() ? "PASS" : "FAIL");
    o << buf;
  }
  std::snprintf(buf, sizeof buf, "scope %s: %zu groups, worst %.3e, %.2fs, %s\n", report.scope.c_str(),
                report.rows.size(), report.worst(), report.seconds, report.pass() ? "PASS" : "FAIL");
  o << buf;
  return o.str();
}

}  // namespace sgg::gradcheck
