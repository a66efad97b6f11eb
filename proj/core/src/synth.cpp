#include "sgg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <tuple>

#include "sgg/error.hpp"
#include "sgg/imggen.hpp"
#include "sgg/rng.hpp"

namespace sgg::synth {
namespace {

const char* const kClassNames[] = {"person", "dog",  "table", "cup",  "chair", "lamp",  "bottle",
                                   "laptop", "book", "plant", "car",  "tree",  "bag",   "phone",
                                   "bowl",   "bench", "bike", "sofa", "clock", "shelf"};
const char* const kPredicateNames[] = {"on",      "near",      "holds",     "under", "behind",
                                       "nextTo",  "sittingOn", "lookingAt", "wears", "has"};
const char* const kDistractorRelations[] = {"IsA", "AtLocation", "UsedFor", "HasProperty"};
const char* const kDistractorTails[] = {"object", "furniture", "room", "kitchen", "outdoors", "animal",
                                        "container", "tool", "portable", "heavy"};

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

Corpus make_corpus(const SynthConfig& cfg) {
  if (cfg.classes < 2 || cfg.classes > std::size(kClassNames))
    throw std::invalid_argument("synth: classes must lie in [2, 20]");
  if (cfg.predicates < 1 || cfg.predicates > std::size(kPredicateNames))
    throw std::invalid_argument("synth: predicates must lie in [1, 10]");
  if (cfg.min_objects < 2 || cfg.max_objects < cfg.min_objects || cfg.max_objects > cfg.classes)
    throw std::invalid_argument("synth: need 2 <= min_objects <= max_objects <= classes");
  if (cfg.width < 16 || cfg.height < 16) throw std::invalid_argument("synth: canvas must be at least 16x16");

  Corpus c;
  c.labels = LabelSet::make(std::vector<std::string>(kClassNames, kClassNames + cfg.classes),
                            std::vector<std::string>(kPredicateNames, kPredicateNames + cfg.predicates));

  Rng grammar_rng(derive_seed({cfg.seed, 1}));
  const int nc = static_cast<int>(cfg.classes), np = static_cast<int>(cfg.predicates);
  for (int a = 1; a <= nc; ++a)
    for (int b = 1; b <= nc; ++b) {
      if (a == b) continue;
      const bool take = grammar_rng.uniform() < cfg.rule_density;
      const int p = 1 + static_cast<int>(grammar_rng.below(static_cast<std::uint64_t>(np)));
      const double w = round2(grammar_rng.uniform(1.0, 5.0));
      if (take) c.grammar.push_back({a, b, p, w});
    }
  // Every predicate gets at least one rule.
  for (int p = 1; p <= np; ++p) {
    if (std::any_of(c.grammar.begin(), c.grammar.end(), [&](const GrammarRule& r) { return r.predicate == p; }))
      continue;
    for (int tries = 0;; ++tries) {
      const int a = 1 + static_cast<int>(grammar_rng.below(static_cast<std::uint64_t>(nc)));
      const int b = 1 + static_cast<int>(grammar_rng.below(static_cast<std::uint64_t>(nc)));
      auto it = std::find_if(c.grammar.begin(), c.grammar.end(),
                             [&](const GrammarRule& r) { return r.subj == a && r.obj == b; });
      if (a == b) continue;
      if (it == c.grammar.end()) {
        c.grammar.push_back({a, b, p, round2(grammar_rng.uniform(1.0, 5.0))});
        break;
      }
      if (tries > 1000) {
        it->predicate = p;
        break;
      }
    }
  }
  std::sort(c.grammar.begin(), c.grammar.end(),
            [](const GrammarRule& x, const GrammarRule& y) { return std::tie(x.subj, x.obj) < std::tie(y.subj, y.obj); });
  if (c.grammar.size() > cfg.max_triples) throw std::invalid_argument("synth: grammar exceeds max_triples");

  for (const auto& r : c.grammar)
    c.triples.push_back({c.labels.classes[r.subj], c.labels.predicates[r.predicate], c.labels.classes[r.obj], r.weight});
  Rng kb_rng(derive_seed({cfg.seed, 2}));
  for (int a = 1; a <= nc && c.triples.size() < cfg.max_triples; ++a)
    for (int d = 0; d < 2 && c.triples.size() < cfg.max_triples; ++d) {
      const char* rel = kDistractorRelations[kb_rng.below(std::size(kDistractorRelations))];
      const char* tail = kDistractorTails[kb_rng.below(std::size(kDistractorTails))];
      kb::FactTriple f{c.labels.classes[a], rel, tail, round2(kb_rng.uniform(0.1, 3.0))};
      const bool dup = std::any_of(c.triples.begin(), c.triples.end(), [&](const kb::FactTriple& t) {
        return t.head == f.head && t.relation == f.relation && t.tail == f.tail;
      });
      if (!dup) c.triples.push_back(f);
    }

  for (std::size_t n = 0; n < cfg.images; ++n) {
    Rng rng(derive_seed({cfg.seed, 3, n}));
    Scene s;
    char id[32];
    std::snprintf(id, sizeof id, "img_%04zu", n);
    s.id = id;
    s.width = cfg.width;
    s.height = cfg.height;
    s.image = "images/" + s.id + ".ppm";
    const std::size_t count = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);
    std::vector<int> classes(cfg.classes);
    for (int k = 0; k < nc; ++k) classes[static_cast<std::size_t>(k)] = k + 1;
    for (std::size_t i = classes.size(); i > 1; --i) std::swap(classes[i - 1], classes[rng.below(i)]);
    const double lo = std::max(4.0, 0.18 * cfg.width), hi = 0.45 * cfg.width;
    for (std::size_t i = 0; i < count; ++i) {
      const double w = std::round(rng.uniform(lo, hi)), h = std::round(rng.uniform(lo, hi));
      const double x = std::round(rng.uniform(0.0, cfg.width - w)), y = std::round(rng.uniform(0.0, cfg.height - h));
      s.objects.push_back({Box{x, y, w, h}, classes[i]});
    }
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < count; ++j) {
        if (i == j) continue;
        for (const auto& r : c.grammar)
          if (r.subj == s.objects[i].label && r.obj == s.objects[j].label) s.relations.push_back({i, j, r.predicate});
      }
    c.scenes.push_back(std::move(s));
  }
  return c;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, const std::string& config_text) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw DataError("cannot create " + (dir / "images").string() + ": " + ec.message());
  write_labels(dir / "meta.json", corpus.labels);
  write_scenes(dir / "scenes.jsonl", corpus.scenes, corpus.labels);
  for (const auto& s : corpus.scenes) imggen::write_ppm(dir / s.image, imggen::render_scene(s));
  kb::write_triples(dir / "kb.tsv", corpus.triples);
  if (!config_text.empty()) {
    std::ofstream out(dir / "config.toml", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "config.toml").string());
    out << config_text;
  }
}

}  // namespace sgg::synth
