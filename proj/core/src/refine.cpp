#include "sgg/refine.hpp"

#include <cmath>
#include <stdexcept>

#include "sgg/error.hpp"
#include "sgg/num/ops.hpp"

namespace sgg::refine {

using num::Tensor;

RefineParams RefineParams::create(nn::ParamStore& store, const std::string& prefix, const RefineConfig& cfg,
                                  Rng& rng) {
  if (cfg.passes < 1 || cfg.iterations < 1) throw std::invalid_argument("RefineConfig: T_m and T_r must be >= 1");
  const std::size_t D = cfg.feature_dim, Dm = cfg.memory_dim;
  RefineParams p;
  p.s2o = nn::Linear::create(store, prefix + ".s2o", D, D, rng);
  p.o2s = nn::Linear::create(store, prefix + ".o2s", D, D, rng);
  p.query = nn::Linear::create(store, prefix + ".query", D, Dm, rng);
  p.fact_proj = nn::Linear::create(store, prefix + ".fact_proj", cfg.fact_dim, Dm, rng);
  p.gate_inner = nn::Linear::create(store, prefix + ".gate_inner", 4 * Dm, cfg.attention_hidden, rng);
  p.gate_outer = nn::Linear::create(store, prefix + ".gate_outer", cfg.attention_hidden, 1, rng);
  p.agru = nn::GruCell::create(store, prefix + ".agru", Dm, Dm, rng);
  p.memory = nn::Linear::create(store, prefix + ".memory", 3 * Dm, Dm, rng);
  p.fuse = nn::Linear::create(store, prefix + ".fuse", D + Dm, D, rng);
  p.passes = cfg.passes;
  p.iterations = cfg.iterations;
  return p;
}

Associations associate(const std::vector<proposals::SubgraphProposal>& subgraphs, std::size_t object_count) {
  Associations a;
  a.subgraphs_of_object.resize(object_count);
  a.objects_of_subgraph.resize(subgraphs.size());
  for (std::size_t k = 0; k < subgraphs.size(); ++k) {
    for (auto i : subgraphs[k].members) {
      if (i >= object_count) throw std::invalid_argument("associate: member index out of range");
      a.subgraphs_of_object[i].push_back(k);
      a.objects_of_subgraph[k].push_back(i);
    }
  }
  return a;
}

InterRefineResult inter_refine(const std::vector<Tensor>& objects, const std::vector<Tensor>& subgraphs,
                               const Associations& assoc, const RefineParams& params) {
  if (assoc.subgraphs_of_object.size() != objects.size() || assoc.objects_of_subgraph.size() != subgraphs.size())
    throw std::invalid_argument("inter_refine: associations do not match object/subgraph counts");
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (assoc.subgraphs_of_object[i].empty())
      throw std::invalid_argument("inter_refine: object " + std::to_string(i) + " has no associated subgraph");
  for (std::size_t k = 0; k < subgraphs.size(); ++k)
    if (assoc.objects_of_subgraph[k].empty())
      throw std::invalid_argument("inter_refine: subgraph " + std::to_string(k) + " has no associated object");

  InterRefineResult out;
  std::vector<Tensor> pooled;
  pooled.reserve(subgraphs.size());
  for (const auto& s : subgraphs) pooled.push_back(num::spatial_mean(s));

  for (std::size_t i = 0; i < objects.size(); ++i) {
    const Tensor& o = objects[i];
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(o.size()));
    const auto& ks = assoc.subgraphs_of_object[i];
    std::vector<Tensor> logits, vals;
    for (auto k : ks) {
      logits.push_back(num::scale(num::dot(o, pooled[k]), inv_sqrt_d));
      vals.push_back(pooled[k]);
    }
    Tensor alpha = num::softmax(num::concat(logits, 0), 0);
    Tensor msg = nn::matvec(num::transpose(num::stack(vals)), alpha);
    out.objects.push_back(num::add(o, num::relu(params.s2o(msg))));
    out.object_attention.push_back(alpha);
  }

  for (std::size_t k = 0; k < subgraphs.size(); ++k) {
    const Tensor& s = subgraphs[k];
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(pooled[k].size()));
    const auto& is = assoc.objects_of_subgraph[k];
    std::vector<Tensor> logits, vals;
    for (auto i : is) {
      logits.push_back(num::scale(num::dot(objects[i], pooled[k]), inv_sqrt_d));
      vals.push_back(objects[i]);
    }
    Tensor alpha = num::softmax(num::concat(logits, 0), 0);
    Tensor msg = nn::matvec(num::transpose(num::stack(vals)), alpha);
    Tensor update = num::relu(params.o2s(msg));
    out.subgraphs.push_back(num::add(s, num::broadcast_spatial(update, s.dim(1), s.dim(2))));
    out.subgraph_attention.push_back(alpha);
  }
  return out;
}

AttentionResult dmn_attend(const Tensor& facts, const Tensor& query, const Tensor& memory,
                           const RefineParams& params) {
  if (facts.rank() != 2) throw DimensionError("dmn_attend: facts must be [K x Dm], got " + num::shape_string(facts.shape()));
  const std::size_t K = facts.dim(0);
  if (query.size() != facts.dim(1) || memory.size() != facts.dim(1))
    throw DimensionError("dmn_attend: q/m width does not match facts " + num::shape_string(facts.shape()));
  Tensor q = num::repeat_rows(query, K);
  Tensor m = num::repeat_rows(memory, K);
  Tensor z = num::concat({num::mul(facts, q), num::mul(facts, m), num::abs(num::sub(facts, q)),
                          num::abs(num::sub(facts, m))},
                         1);
  Tensor hidden = num::tanh(params.gate_inner.rows(z));
  Tensor scores = num::reshape(params.gate_outer.rows(hidden), {K});
  return AttentionResult{num::softmax(scores, 0), z};
}

Tensor agru_pass(const Tensor& facts, const Tensor& gates, const nn::GruCell& cell) {
  if (facts.rank() != 2 || gates.size() != facts.dim(0))
    throw DimensionError("agru_pass: gates " + num::shape_string(gates.shape()) + " vs facts " +
                         num::shape_string(facts.shape()));
  const std::size_t K = facts.dim(0), W = facts.dim(1);
  Tensor e = Tensor::zeros({cell.hidden()});
  for (std::size_t k = 0; k < K; ++k) {
    Tensor f = num::reshape(num::slice(facts, 0, k, 1), {W});
    Tensor g = num::slice(gates, 0, k, 1);
    Tensor proposal = cell.step(f, e);
    // g * GRU(f, e) + (1 - g) * e  ==  e + g * (GRU(f, e) - e)
    e = num::add(e, num::scale_by(num::sub(proposal, e), g));
  }
  return e;
}

Tensor memory_update(const Tensor& memory, const Tensor& episode, const Tensor& query, const nn::Linear& map) {
  return num::relu(map(num::concat({memory, episode, query}, 0)));
}

FactMemory::FactMemory(const kb::TripleStore& store, const kb::Vocabulary& vocab, const kb::FactEncoderParams& encoder,
                       std::size_t top_k)
    : store_(&store), vocab_(&vocab), encoder_(&encoder), top_k_(top_k) {}

std::vector<Tensor> FactMemory::facts_for(const std::string& label) {
  std::vector<Tensor> out;
  for (const auto& f : kb::retrieve_topk(*store_, label, top_k_)) {
    const std::string key = f.head + '\t' + f.relation + '\t' + f.tail;
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, kb::encode_fact(f, *vocab_, *encoder_).vector).first;
    out.push_back(it->second);
  }
  return out;
}

Tensor kb_refine(const Tensor& object, const std::vector<Tensor>& fact_encodings, const RefineParams& params,
                 std::vector<EpisodicState>* trace) {
  Tensor q = num::tanh(params.query(object));
  if (fact_encodings.empty()) return num::relu(params.fuse(num::concat({object, q}, 0)));

  Tensor facts = params.fact_proj.rows(num::stack(fact_encodings));
  Tensor m = q;
  for (std::size_t t = 0; t < params.passes; ++t) {
    AttentionResult att = dmn_attend(facts, q, m, params);
    Tensor e = agru_pass(facts, att.gates, params.agru);
    m = memory_update(m, e, q, params.memory);
    if (trace) trace->push_back(EpisodicState{q, m, e, t});
  }
  return num::relu(params.fuse(num::concat({object, m}, 0)));
}

Tensor kb_refine(const Tensor& object, const std::string& label, FactMemory& memory, const RefineParams& params,
                 std::vector<EpisodicState>* trace) {
  return kb_refine(object, memory.facts_for(label), params, trace);
}

RefineOutput refine_loop(const std::vector<Tensor>& objects, const std::vector<Tensor>& subgraphs,
                         const Associations& assoc, const RefineParams& params, FactMemory* memory,
                         const Labeler& labeler) {
  if (params.iterations < 1) throw std::invalid_argument("refine_loop: T_r must be >= 1");
  RefineOutput out{objects, subgraphs, {}};
  for (std::size_t r = 0; r < params.iterations; ++r) {
    InterRefineResult ir = inter_refine(out.objects, out.subgraphs, assoc, params);
    if (memory) {
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < ir.objects.size(); ++i) {
        labels.push_back(labeler ? labeler(ir.objects[i]) : std::string());
        ir.objects[i] = kb_refine(ir.objects[i], labels.back(), *memory, params);
      }
      out.labels_per_iteration.push_back(std::move(labels));
    }
    out.objects = std::move(ir.objects);
    out.subgraphs = std::move(ir.subgraphs);
  }
  return out;
}

}  // namespace sgg::refine
