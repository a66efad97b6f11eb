#include <benchmark/benchmark.h>

#include "sgg/model.hpp"
#include "sgg/num/ops.hpp"
#include "sgg/proposals.hpp"
#include "sgg/synth.hpp"
#include "sgg/train.hpp"

using namespace sgg;
using num::Tensor;

namespace {

Tensor random_tensor(num::Shape shape, Rng& rng, bool grad = false) {
  std::vector<double> v(num::shape_size(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(num::matmul(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity();

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0)), s = static_cast<std::size_t>(state.range(1));
  Rng rng(2);
  Tensor x = random_tensor({c, s, s}, rng), k = random_tensor({c, c, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(num::conv2d(x, k, 1, 1));
}
BENCHMARK(BM_Conv2dForward)->Args({4, 16})->Args({16, 16})->Args({16, 64});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0)), s = static_cast<std::size_t>(state.range(1));
  Rng rng(3);
  Tensor x = random_tensor({c, s, s}, rng, true), k = random_tensor({c, c, 3, 3}, rng, true);
  for (auto _ : state) {
    x.zero_grad();
    k.zero_grad();
    num::backward(num::sum(num::conv2d(x, k, 1, 1)));
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({4, 16})->Args({16, 16});

void BM_BuildSubgraphs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  Scene scene;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(0, 48), y = rng.uniform(0, 48);
    scene.objects.push_back({Box{x, y, rng.uniform(4, 64 - x), rng.uniform(4, 64 - y)}, 1 + static_cast<int>(i % 6)});
  }
  proposals::FeatureConfig f;
  auto props = proposals::stub_proposals(scene, proposals::ProposalConfig{}, f);
  for (auto _ : state) benchmark::DoNotOptimize(proposals::build_subgraphs(props, 0.5, 5, f));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildSubgraphs)->RangeMultiplier(2)->Range(4, 32)->Complexity();

struct DeskFixture {
  synth::Corpus corpus = synth::make_corpus({});
  RunConfig cfg;
  DeskFixture() {
    cfg.model.gan.image_size = 16;
    cfg.model.refine.fact_dim = 2 * cfg.model.fact_hidden;
    cfg.model.gan.object_dim = cfg.model.features.dim;
    cfg.train.dropout = 0.0;
  }
};

void BM_TrainStep(benchmark::State& state) {
  DeskFixture d;
  d.cfg.train.use_gan = state.range(0) != 0;
  d.cfg.train.use_kb = state.range(1) != 0;
  Dataset data{".", d.corpus.labels, d.corpus.scenes};
  for (auto& s : data.scenes) s.image.clear();
  train::Trainer trainer(d.cfg, data, kb::TripleStore::from_triples(d.corpus.triples));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step());
}
BENCHMARK(BM_TrainStep)->ArgNames({"gan", "kb"})->Args({0, 0})->Args({0, 1})->Args({1, 0})->Args({1, 1})
    ->Unit(benchmark::kMillisecond);

void BM_Inference(benchmark::State& state) {
  DeskFixture d;
  Model model(d.cfg.model, d.corpus.labels, kb::TripleStore::from_triples(d.corpus.triples));
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(d.corpus.scenes[0], true));
}
BENCHMARK(BM_Inference)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
