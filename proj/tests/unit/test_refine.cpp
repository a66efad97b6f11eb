#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "sgg/config.hpp"
#include "sgg/refine.hpp"

using namespace sgg;
using namespace sgg::refine;
using num::Tensor;

namespace {

struct Fixture {
  nn::ParamStore store;
  RefineParams params;
  std::size_t D, Dm;
  explicit Fixture(std::uint64_t seed, std::size_t d = 5, std::size_t dm = 4, std::size_t passes = 2,
                   std::size_t iterations = 2) : D(d), Dm(dm) {
    Rng rng(seed);
    RefineConfig c;
    c.feature_dim = d;
    c.memory_dim = dm;
    c.attention_hidden = 6;
    c.fact_dim = 6;
    c.passes = passes;
    c.iterations = iterations;
    params = RefineParams::create(store, "refine", c, rng);
  }
  std::vector<Tensor> all() const {
    std::vector<Tensor> v;
    for (const auto& e : store.entries()) v.push_back(e.tensor);
    return v;
  }
};

void zero(Tensor t) {
  for (auto& v : t.mutable_data()) v = 0.0;
}

double sum_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

// Two objects, one subgraph holding both.
Associations pair_assoc() { return Associations{{{0}, {0}}, {{0, 1}}}; }

RunConfig full_config() { return load_run_config(std::filesystem::path(SGG_SOURCE_DIR) / "configs" / "full.toml"); }

}  // namespace

TEST_CASE("an object with one subgraph gets attention exactly one") {
  Fixture f(1);
  oracle::Gen g(1);
  std::vector<Tensor> objs{g.tensor({5}), g.tensor({5})};
  std::vector<Tensor> subs{g.tensor({5, 3, 3})};
  auto r = inter_refine(objs, subs, pair_assoc(), f.params);
  for (const auto& a : r.object_attention) {
    REQUIRE(a.size() == 1);
    CHECK(a[0] == 1.0);
  }
}

TEST_CASE("zero subgraph-to-object map leaves objects unchanged") {
  Fixture f(2);
  zero(f.params.s2o.weight);
  zero(f.params.s2o.bias);
  oracle::Gen g(2);
  std::vector<Tensor> objs{g.tensor({5}), g.tensor({5})};
  std::vector<Tensor> subs{g.tensor({5, 3, 3})};
  auto r = inter_refine(objs, subs, pair_assoc(), f.params);
  for (std::size_t i = 0; i < 2; ++i) CHECK(oracle::max_abs_diff(r.objects[i].data(), objs[i].data()) == 0.0);
}

TEST_CASE("inter_refine object gradient against finite differences") {
  Fixture f(3);
  oracle::Gen g(3);
  std::vector<Tensor> objs{g.tensor({5}), g.tensor({5}), g.tensor({5})};
  std::vector<Tensor> subs{g.tensor({5, 3, 3}), g.tensor({5, 3, 3})};
  Associations a{{{0}, {0, 1}, {1}}, {{0, 1}, {1, 2}}};
  auto loss = [&] {
    auto r = inter_refine(objs, subs, a, f.params);
    Tensor s = num::sum(r.objects[0]);
    for (std::size_t i = 1; i < r.objects.size(); ++i) s = num::add(s, num::sum(r.objects[i]));
    return s;
  };
  for (auto& o : objs) {
    auto an = oracle::analytic(loss, o, objs);
    auto nu = oracle::central_diff([&] { return loss().item(); }, o);
    CHECK(oracle::relative_error(an, nu) < 1e-5);
  }
}

TEST_CASE("inter_refine rejects orphans") {
  Fixture f(4);
  oracle::Gen g(4);
  std::vector<Tensor> objs{g.tensor({5}), g.tensor({5})};
  std::vector<Tensor> subs{g.tensor({5, 3, 3})};
  CHECK_THROWS_AS(inter_refine(objs, subs, Associations{{{0}, {}}, {{0}}}, f.params), std::invalid_argument);
  CHECK_THROWS_AS(inter_refine(objs, {subs[0], subs[0]}, Associations{{{0}, {0}}, {{0, 1}, {}}}, f.params),
                  std::invalid_argument);
}

TEST_CASE("a single fact gets gate exactly one") {
  Fixture f(5);
  oracle::Gen g(5);
  auto r = dmn_attend(g.tensor({1, 4}), g.tensor({4}), g.tensor({4}), f.params);
  REQUIRE(r.gates.size() == 1);
  CHECK(r.gates[0] == 1.0);
  CHECK(r.interaction.shape() == num::Shape{1, 16});
}

TEST_CASE("identical facts get uniform gates") {
  Fixture f(6);
  oracle::Gen g(6);
  Tensor row = g.tensor({1, 4}, false);
  Tensor facts = num::concat({row, row, row, row, row}, 0);
  auto r = dmn_attend(facts, g.tensor({4}), g.tensor({4}), f.params);
  for (double v : r.gates.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("interaction rows are the four feature blocks") {
  Fixture f(7);
  oracle::Gen g(7);
  Tensor F = g.tensor({3, 4}), q = g.tensor({4}), m = g.tensor({4});
  auto z = dmn_attend(F, q, m, f.params).interaction;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t d = 0; d < 4; ++d) {
      const double fk = F[k * 4 + d];
      CHECK(z[k * 16 + d] == fk * q[d]);
      CHECK(z[k * 16 + 4 + d] == fk * m[d]);
      CHECK(z[k * 16 + 8 + d] == std::fabs(fk - q[d]));
      CHECK(z[k * 16 + 12 + d] == std::fabs(fk - m[d]));
    }
}

TEST_CASE("closed gates pass the zero state through") {
  Fixture f(8);
  oracle::Gen g(8);
  Tensor e = agru_pass(g.tensor({5, 4}), Tensor::zeros({5}), f.params.agru);
  for (double v : e.data()) CHECK(v == 0.0);
}

TEST_CASE("open gates reduce to a plain gru scan") {
  Fixture f(9);
  oracle::Gen g(9);
  Tensor F = g.tensor({4, 4}, false);
  Tensor e = agru_pass(F, Tensor::full({4}, 1.0), f.params.agru);
  Tensor h = Tensor::zeros({4});
  for (std::size_t k = 0; k < 4; ++k) h = f.params.agru.step(num::slice(F, 0, k, 1), h);
  CHECK(oracle::max_abs_diff(e.data(), h.data()) < 1e-15);
}

TEST_CASE("one open gate is one gru step from zero") {
  Fixture f(10);
  oracle::Gen g(10);
  Tensor F = g.tensor({1, 4}, false);
  Tensor e = agru_pass(F, Tensor::vector({1.0}), f.params.agru);
  // Independent evaluation from zero state: h' = z * tanh(Wh x + bh).
  const auto& c = f.params.agru;
  for (std::size_t i = 0; i < 4; ++i) {
    double az = c.bz[i], ah = c.bh[i];
    for (std::size_t j = 0; j < 4; ++j) az += c.wz[i * 4 + j] * F[j], ah += c.wh[i * 4 + j] * F[j];
    CHECK(e[i] == doctest::Approx(std::tanh(ah) / (1.0 + std::exp(-az))).epsilon(1e-14));
  }
}

TEST_CASE("zero memory map gives a zero memory") {
  Fixture f(11);
  zero(f.params.memory.weight);
  zero(f.params.memory.bias);
  oracle::Gen g(11);
  Tensor m = memory_update(g.tensor({4}), g.tensor({4}), g.tensor({4}), f.params.memory);
  for (double v : m.data()) CHECK(v == 0.0);
}

TEST_CASE("full-scale configuration sets memory 512 and two passes and iterations") {
  auto c = full_config();
  CHECK(c.model.refine.memory_dim == 512);
  CHECK(c.model.refine.passes == 2);
  CHECK(c.model.refine.iterations == 2);
  CHECK(c.model.top_k == 8);
  CHECK(c.model.fact_hidden == 300);
  CHECK(ModelConfig{}.refine.passes == 2);
  CHECK(ModelConfig{}.refine.iterations == 2);
}

TEST_CASE("memory update gradient against finite differences") {
  Fixture f(12);
  oracle::Gen g(12);
  Tensor m = g.tensor({4}), e = g.tensor({4}, false), q = g.tensor({4}, false);
  auto w = g.tensor({4}, false);
  // Keep pre-activations off the ReLU kink.
  auto pre = f.params.memory(num::concat({m, e, q}, 0));
  for (double v : pre.data()) REQUIRE(std::fabs(v) > 1e-4);
  auto loss = [&] { return oracle::project(memory_update(m, e, q, f.params.memory), w); };
  auto an = oracle::analytic(loss, m);
  auto nu = oracle::central_diff([&] { return loss().item(); }, m);
  CHECK(oracle::relative_error(an, nu) < 1e-5);
}

TEST_CASE("empty retrieval depends only on the object and parameters") {
  Fixture f(13);
  oracle::Gen g(13);
  Tensor o = g.tensor({5}, false);
  Tensor a = kb_refine(o, std::vector<Tensor>{}, f.params);
  Tensor q = num::tanh(f.params.query(o));
  Tensor expect = num::relu(f.params.fuse(num::concat({o, q}, 0)));
  CHECK(oracle::max_abs_diff(a.data(), expect.data()) == 0.0);
  CHECK(a.size() == o.size());
}

TEST_CASE("kb_refine object gradient against finite differences") {
  Fixture f(14);
  oracle::Gen g(14);
  Tensor o = g.tensor({5});
  std::vector<Tensor> facts{g.tensor({6}, false), g.tensor({6}, false), g.tensor({6}, false)};
  Tensor w = g.tensor({5}, false);
  auto loss = [&] { return oracle::project(kb_refine(o, facts, f.params), w); };
  auto an = oracle::analytic(loss, o, f.all());
  auto nu = oracle::central_diff([&] { return loss().item(); }, o);
  CHECK(oracle::relative_error(an, nu) < 1e-5);
}

TEST_CASE("kb_refine traces every episodic pass") {
  Fixture f(15, 5, 4, 3);
  oracle::Gen g(15);
  std::vector<EpisodicState> trace;
  kb_refine(g.tensor({5}), {g.tensor({6}), g.tensor({6})}, f.params, &trace);
  REQUIRE(trace.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(trace[t].pass_index == t);
    CHECK(trace[t].memory.size() == 4);
    CHECK(trace[t].episode.size() == 4);
    CHECK(trace[t].query.size() == 4);
  }
}

TEST_CASE("one refinement iteration is inter_refine then kb_refine") {
  Fixture f(16, 5, 4, 2, 1);
  oracle::Gen g(16);
  nn::ParamStore es;
  Rng rng(3);
  auto kbstore = kb::TripleStore::from_triples({{"cup", "on", "table", 1.0}, {"cup", "IsA", "container", 0.5}});
  auto vocab = kb::build_vocabulary(kbstore, {});
  auto enc = kb::FactEncoderParams::create(es, "enc", vocab.size(), 3, 3, rng);
  FactMemory mem(kbstore, vocab, enc, 8);
  std::vector<Tensor> objs{g.tensor({5}), g.tensor({5})};
  std::vector<Tensor> subs{g.tensor({5, 3, 3})};
  auto labeler = [](const Tensor&) { return std::string("cup"); };
  auto loop = refine_loop(objs, subs, pair_assoc(), f.params, &mem, labeler);

  auto ir = inter_refine(objs, subs, pair_assoc(), f.params);
  FactMemory mem2(kbstore, vocab, enc, 8);
  for (std::size_t i = 0; i < 2; ++i) {
    Tensor o = kb_refine(ir.objects[i], "cup", mem2, f.params);
    CHECK(oracle::max_abs_diff(loop.objects[i].data(), o.data()) == 0.0);
  }
  CHECK(oracle::max_abs_diff(loop.subgraphs[0].data(), ir.subgraphs[0].data()) == 0.0);
}

TEST_CASE("refine_loop is deterministic and shape stable") {
  Fixture f(17, 5, 4, 2, 3);
  oracle::Gen g(17);
  std::vector<Tensor> objs{g.tensor({5}), g.tensor({5}), g.tensor({5})};
  std::vector<Tensor> subs{g.tensor({5, 2, 2}), g.tensor({5, 2, 2})};
  Associations a{{{0}, {0, 1}, {1}}, {{0, 1}, {1, 2}}};
  std::vector<Tensor> facts{g.tensor({6}, false), g.tensor({6}, false)};
  auto x = refine_loop(objs, subs, a, f.params, nullptr, {});
  auto y = refine_loop(objs, subs, a, f.params, nullptr, {});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(x.objects[i].shape() == objs[i].shape());
    CHECK(oracle::max_abs_diff(x.objects[i].data(), y.objects[i].data()) == 0.0);
  }
}

// ---- properties ---------------------------------------------------------

TEST_CASE("gates and attention sum to one") {
  Fixture f(18);
  oracle::Gen g(18);
  for (std::size_t K : {1u, 2u, 3u, 5u, 8u, 13u}) {
    for (int t = 0; t < 5; ++t) {
      auto r = dmn_attend(g.tensor({K, 4}, false, {}, 0, -3, 3), g.tensor({4}), g.tensor({4}), f.params);
      CHECK(std::fabs(sum_of(r.gates) - 1.0) <= 1e-12);
    }
  }
  std::vector<Tensor> objs{g.tensor({5}), g.tensor({5}), g.tensor({5}), g.tensor({5})};
  std::vector<Tensor> subs{g.tensor({5, 3, 3}), g.tensor({5, 3, 3}), g.tensor({5, 3, 3})};
  Associations a{{{0, 1}, {0, 2}, {1, 2}, {0, 1, 2}}, {{0, 1, 3}, {0, 2, 3}, {1, 2, 3}}};
  auto r = inter_refine(objs, subs, a, f.params);
  for (const auto& v : r.object_attention) CHECK(std::fabs(sum_of(v) - 1.0) <= 1e-12);
  for (const auto& v : r.subgraph_attention) CHECK(std::fabs(sum_of(v) - 1.0) <= 1e-12);
}

TEST_CASE("closed gates return the initial state for any facts") {
  Fixture f(19);
  oracle::Gen g(19);
  for (std::size_t K = 1; K <= 10; ++K) {
    Tensor e = agru_pass(g.tensor({K, 4}), Tensor::zeros({K}), f.params.agru);
    for (double v : e.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("refine_loop parameter gradients on a two-object two-fact fixture") {
  Fixture f(20);
  oracle::Gen g(20);
  nn::ParamStore es;
  Rng rng(5);
  auto kbstore = kb::TripleStore::from_triples({{"cup", "on", "table", 1.0}, {"cup", "IsA", "container", 0.5}});
  auto vocab = kb::build_vocabulary(kbstore, {});
  auto enc = kb::FactEncoderParams::create(es, "enc", vocab.size(), 3, 3, rng);
  std::vector<Tensor> objs{g.tensor({5}, false), g.tensor({5}, false)};
  std::vector<Tensor> subs{g.tensor({5, 3, 3}, false)};
  Tensor w = g.tensor({5}, false);
  auto loss = [&] {
    FactMemory mem(kbstore, vocab, enc, 8);
    auto out = refine_loop(objs, subs, pair_assoc(), f.params, &mem, [](const Tensor&) { return std::string("cup"); });
    return num::add(oracle::project(out.objects[0], w), oracle::project(out.objects[1], w));
  };
  auto params = f.all();
  for (const auto& e : es.entries()) params.push_back(e.tensor);
  double worst = 0.0;
  for (auto& p : params) {
    auto an = oracle::analytic(loss, p, params);
    auto nu = oracle::central_diff([&] { return loss().item(); }, p, 1e-5);
    worst = std::max(worst, oracle::relative_error(an, nu));
  }
  CHECK(worst < 1e-4);
}
