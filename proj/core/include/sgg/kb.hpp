#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sgg/nn.hpp"
#include "sgg/num/tensor.hpp"

namespace sgg::kb {

// <head, relation, tail, weight> commonsense fact.
struct FactTriple {
  std::string head;
  std::string relation;
  std::string tail;
  double weight = 0.0;

  friend bool operator==(const FactTriple&, const FactTriple&) = default;
};

// Write-once store indexed by head token. Each head's facts are kept in
// retrieval order: weight descending, then relation, then tail ascending.
class TripleStore {
 public:
  TripleStore() = default;
  // Duplicate (head, relation, tail) entries keep the maximum weight.
  static TripleStore from_triples(const std::vector<FactTriple>& triples);
  // TSV rows head<TAB>relation<TAB>tail<TAB>weight; '#' lines and blank lines
  // are skipped. Malformed rows raise DataError naming every offending line.
  static TripleStore ingest(const std::filesystem::path& path);

  std::size_t size() const { return size_; }
  const std::vector<FactTriple>& facts_for(std::string_view head) const;
  std::vector<FactTriple> all() const;

 private:
  std::map<std::string, std::vector<FactTriple>, std::less<>> by_head_;
  std::size_t size_ = 0;
};

void write_triples(const std::filesystem::path& path, const std::vector<FactTriple>& triples);

// Top-k facts whose head equals `label`; empty for unknown labels.
std::vector<FactTriple> retrieve_topk(const TripleStore& store, std::string_view label, std::size_t k);

// Lowercase words; splits on '_', '-', whitespace and camel-case boundaries.
std::vector<std::string> split_words(std::string_view token);
// head words + relation words + tail words.
std::vector<std::string> linearize(const FactTriple& fact);

// Token table for the fact encoder; index 0 is the reserved unknown token.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() : tokens_{kUnkToken} {}
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::size_t index(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Sorted, deduplicated words from every linearized fact plus extra tokens.
Vocabulary build_vocabulary(const TripleStore& store, const std::vector<std::string>& extra_tokens);

struct FactEncoderParams {
  num::Tensor embedding;  // W_e [V x De]
  nn::GruCell forward;
  nn::GruCell backward;

  static FactEncoderParams create(nn::ParamStore& store, const std::string& prefix, std::size_t vocab_size,
                                  std::size_t embed_dim, std::size_t hidden, Rng& rng);
  std::size_t output_dim() const { return forward.hidden() + backward.hidden(); }
};

// Overwrites embedding rows for tokens found in a whitespace-separated
// "token v1 ... vDe" file. Returns how many rows were set.
std::size_t load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, num::Tensor& embedding);

struct FactEncoding {
  num::Tensor vector;  // [2 Hf]: final forward state ; final backward state
  FactTriple source;
};

// Embeds the tokens and runs both GRU directions from a zero state.
num::Tensor encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                          const FactEncoderParams& params);
FactEncoding encode_fact(const FactTriple& fact, const Vocabulary& vocab, const FactEncoderParams& params);

}  // namespace sgg::kb
