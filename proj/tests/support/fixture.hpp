#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sgg/config.hpp"
#include "sgg/synth.hpp"
#include "sgg/train.hpp"

namespace fixture {

// Narrow model and a 16x16 generator so a training step takes milliseconds.
inline std::string small_config_text(bool use_gan = true, bool use_kb = true) {
  std::string s =
      "[model]\n"
      "dim = 8\nmemory_dim = 8\nattention_hidden = 8\nrel_bottleneck = 4\n"
      "image_size = 16\nstart_resolution = 4\nlayout_dim = 3\nlayout_grid = 4\n"
      "gen_channels = 4\nnoise_channels = 2\ndisc_channels = 4\ninit_seed = 3\n"
      "[train]\n"
      "pretrain_steps = 3\nbatch_pretrain = 2\nsteps = 6\nbatch = 2\nlr_main = 0.01\n"
      "decay_steps = [4]\ndropout = 0.5\ngan_weight = 0.5\nseed = 5\n";
  s += std::string("use_gan = ") + (use_gan ? "true" : "false") + "\n";
  s += std::string("use_kb = ") + (use_kb ? "true" : "false") + "\n";
  s += "[kb]\nembed_dim = 6\nhidden = 4\n";
  return s;
}

inline sgg::RunConfig small_config(bool use_gan = true, bool use_kb = true) {
  return sgg::run_config_from(sgg::ConfigTable::parse(small_config_text(use_gan, use_kb)), ".");
}

struct Corpus {
  sgg::Dataset data;
  sgg::kb::TripleStore store;
};

// In-memory synthetic corpus; real images are rendered rather than read.
inline Corpus small_corpus(std::size_t images = 4, std::uint64_t seed = 2) {
  sgg::synth::SynthConfig sc;
  sc.images = images;
  sc.seed = seed;
  sc.width = sc.height = 32;
  sc.min_objects = 3;
  sc.max_objects = 4;
  auto c = sgg::synth::make_corpus(sc);
  Corpus out;
  out.data.root = ".";
  out.data.labels = c.labels;
  out.data.scenes = c.scenes;
  for (auto& s : out.data.scenes) s.image.clear();
  out.store = sgg::kb::TripleStore::from_triples(c.triples);
  return out;
}

inline sgg::train::Trainer trainer(const sgg::RunConfig& cfg, std::size_t images = 4) {
  auto c = small_corpus(images);
  return sgg::train::Trainer(cfg, std::move(c.data), std::move(c.store));
}

inline std::vector<std::vector<double>> snapshot(const std::vector<sgg::nn::NamedTensor>& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& e : ps) out.emplace_back(e.tensor.data().begin(), e.tensor.data().end());
  return out;
}

inline std::vector<std::vector<double>> grads(const std::vector<sgg::nn::NamedTensor>& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& e : ps) out.push_back(e.tensor.grad());
  return out;
}

}  // namespace fixture
