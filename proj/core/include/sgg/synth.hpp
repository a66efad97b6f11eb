#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgg/kb.hpp"
#include "sgg/scene.hpp"

namespace sgg::synth {

struct SynthConfig {
  std::size_t images = 8;
  std::size_t classes = 6;     // at most 20
  std::size_t predicates = 4;  // at most 10
  std::size_t min_objects = 3;
  std::size_t max_objects = 5;
  int width = 64;
  int height = 64;
  double rule_density = 0.35;  // chance that an ordered class pair has a predicate
  std::size_t max_triples = 60;
  std::uint64_t seed = 1;
};

// pred(subj_class, obj_class): at most one predicate per ordered class pair.
struct GrammarRule {
  int subj = 0;
  int obj = 0;
  int predicate = 0;
  double weight = 1.0;
};

struct Corpus {
  LabelSet labels;
  std::vector<GrammarRule> grammar;
  std::vector<Scene> scenes;
  std::vector<kb::FactTriple> triples;  // grammar facts first, then distractors
};

// Scenes hold distinct classes; every ordered object pair whose classes have
// a grammar rule carries that relation. The KB holds one weighted fact per
// rule plus unrelated distractor facts, capped at max_triples.
Corpus make_corpus(const SynthConfig& cfg);

// meta.json, scenes.jsonl, images/<id>.ppm, kb.tsv and, when config_text is
// non-empty, config.toml. Throws DataError on unwritable paths.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, const std::string& config_text);

}  // namespace sgg::synth
