#include "sgg/kb.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sgg/error.hpp"
#include "sgg/num/ops.hpp"

namespace sgg::kb {
namespace {

bool retrieval_before(const FactTriple& a, const FactTriple& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  if (a.relation != b.relation) return a.relation < b.relation;
  return a.tail < b.tail;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    cols.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cols;
}

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

TripleStore TripleStore::from_triples(const std::vector<FactTriple>& triples) {
  std::map<std::tuple<std::string, std::string, std::string>, double> dedup;
  for (const auto& t : triples) {
    if (t.head.empty() || t.relation.empty() || t.tail.empty())
      throw std::invalid_argument("FactTriple fields must be non-empty");
    if (!(t.weight >= 0.0)) throw std::invalid_argument("FactTriple weight must be non-negative");
    auto [it, inserted] = dedup.try_emplace({t.head, t.relation, t.tail}, t.weight);
    if (!inserted) it->second = std::max(it->second, t.weight);
  }
  TripleStore s;
  for (const auto& [key, w] : dedup) {
    const auto& [h, r, tl] = key;
    s.by_head_[h].push_back({h, r, tl, w});
  }
  for (auto& [h, facts] : s.by_head_) std::sort(facts.begin(), facts.end(), retrieval_before);
  s.size_ = dedup.size();
  return s;
}

TripleStore TripleStore::ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read triples file " + path.string());
  std::vector<FactTriple> triples;
  std::vector<std::string> errors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split_tabs(line);
    const std::string where = path.filename().string() + ":" + std::to_string(line_no) + ": ";
    if (cols.size() != 4) {
      errors.push_back(where + "expected 4 tab-separated columns, got " + std::to_string(cols.size()));
      continue;
    }
    double w = 0.0;
    if (!parse_double(cols[3], w)) {
      errors.push_back(where + "non-numeric weight '" + cols[3] + "'");
      continue;
    }
    if (w < 0.0) {
      errors.push_back(where + "negative weight " + cols[3]);
      continue;
    }
    if (cols[0].empty() || cols[1].empty() || cols[2].empty()) {
      errors.push_back(where + "empty head, relation or tail");
      continue;
    }
    triples.push_back({cols[0], cols[1], cols[2], w});
  }
  if (!errors.empty()) {
    std::string msg = "malformed triples:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw DataError(msg);
  }
  return from_triples(triples);
}

const std::vector<FactTriple>& TripleStore::facts_for(std::string_view head) const {
  static const std::vector<FactTriple> kEmpty;
  auto it = by_head_.find(head);
  return it == by_head_.end() ? kEmpty : it->second;
}

std::vector<FactTriple> TripleStore::all() const {
  std::vector<FactTriple> out;
  out.reserve(size_);
  for (const auto& [h, facts] : by_head_) out.insert(out.end(), facts.begin(), facts.end());
  return out;
}

void write_triples(const std::filesystem::path& path, const std::vector<FactTriple>& triples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# head\trelation\ttail\tweight\n";
  for (const auto& t : triples) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, t.weight);
    out << t.head << '\t' << t.relation << '\t' << t.tail << '\t' << std::string_view(buf, res.ptr - buf) << '\n';
  }
}

std::vector<FactTriple> retrieve_topk(const TripleStore& store, std::string_view label, std::size_t k) {
  if (k == 0) throw std::invalid_argument("retrieve_topk: K must be >= 1");
  const auto& facts = store.facts_for(label);
  return {facts.begin(), facts.begin() + static_cast<std::ptrdiff_t>(std::min(k, facts.size()))};
}

std::vector<std::string> split_words(std::string_view token) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < token.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(token[i]);
    if (c == '_' || c == '-' || std::isspace(c)) {
      flush();
      continue;
    }
    if (std::isupper(c) && !cur.empty()) {
      const unsigned char prev = static_cast<unsigned char>(token[i - 1]);
      const bool next_lower = i + 1 < token.size() && std::islower(static_cast<unsigned char>(token[i + 1]));
      // "UsedFor" -> used|for, "HTTPServer" -> http|server
      if (std::islower(prev) || std::isdigit(prev) || (std::isupper(prev) && next_lower)) flush();
    }
    cur.push_back(static_cast<char>(std::tolower(c)));
  }
  flush();
  return words;
}

std::vector<std::string> linearize(const FactTriple& fact) {
  std::vector<std::string> out = split_words(fact.head);
  for (auto& w : split_words(fact.relation)) out.push_back(std::move(w));
  for (auto& w : split_words(fact.tail)) out.push_back(std::move(w));
  return out;
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : tokens_{kUnkToken} {
  index_.emplace(kUnkToken, kUnk);
  for (const auto& t : tokens) {
    if (index_.contains(t)) continue;
    index_.emplace(t, tokens_.size());
    tokens_.push_back(t);
  }
}

std::size_t Vocabulary::index(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

Vocabulary build_vocabulary(const TripleStore& store, const std::vector<std::string>& extra_tokens) {
  std::set<std::string> words;
  for (const auto& f : store.all())
    for (auto& w : linearize(f)) words.insert(std::move(w));
  for (const auto& t : extra_tokens)
    for (auto& w : split_words(t)) words.insert(std::move(w));
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

FactEncoderParams FactEncoderParams::create(nn::ParamStore& store, const std::string& prefix,
                                            std::size_t vocab_size, std::size_t embed_dim, std::size_t hidden,
                                            Rng& rng) {
  FactEncoderParams p;
  p.embedding = store.add(prefix + ".embedding", {vocab_size, embed_dim}, nn::Init::kNormal, rng);
  p.forward = nn::GruCell::create(store, prefix + ".gru_fwd", embed_dim, hidden, rng);
  p.backward = nn::GruCell::create(store, prefix + ".gru_bwd", embed_dim, hidden, rng);
  return p;
}

std::size_t load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, num::Tensor& embedding) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read word vectors " + path.string());
  const std::size_t de = embedding.dim(1);
  auto data = embedding.mutable_data();
  std::size_t loaded = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> vals;
    std::string field;
    while (ls >> field) {
      double v = 0.0;
      if (!parse_double(field, v)) {
        throw DataError(path.filename().string() + ":" + std::to_string(line_no) + ": non-numeric value '" + field + "'");
      }
      vals.push_back(v);
    }
    if (vals.size() != de) {
      throw DataError(path.filename().string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(de) +
                      " values, got " + std::to_string(vals.size()));
    }
    if (!vocab.contains(token)) continue;
    std::copy(vals.begin(), vals.end(), data.begin() + static_cast<std::ptrdiff_t>(vocab.index(token) * de));
    ++loaded;
  }
  return loaded;
}

num::Tensor encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                          const FactEncoderParams& params) {
  if (tokens.empty()) throw std::invalid_argument("encode_fact: empty token sequence");
  const std::size_t de = params.embedding.dim(1);
  std::vector<num::Tensor> xs;
  xs.reserve(tokens.size());
  for (const auto& t : tokens) xs.push_back(num::reshape(num::slice(params.embedding, 0, vocab.index(t), 1), {de}));

  num::Tensor hf = num::Tensor::zeros({params.forward.hidden()});
  for (const auto& x : xs) hf = params.forward.step(x, hf);
  num::Tensor hb = num::Tensor::zeros({params.backward.hidden()});
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) hb = params.backward.step(*it, hb);
  return num::concat({hf, hb}, 0);
}

FactEncoding encode_fact(const FactTriple& fact, const Vocabulary& vocab, const FactEncoderParams& params) {
  return FactEncoding{encode_tokens(linearize(fact), vocab, params), fact};
}

}  // namespace sgg::kb
