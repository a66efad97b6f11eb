#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sgg/kb.hpp"
#include "sgg/nn.hpp"
#include "sgg/proposals.hpp"

namespace sgg::refine {

struct RefineConfig {
  std::size_t feature_dim = 32;       // D
  std::size_t memory_dim = 32;        // Dm
  std::size_t attention_hidden = 32;  // width of the gate MLP
  std::size_t fact_dim = 60;          // 2 * fact-encoder hidden size
  std::size_t passes = 2;             // T_m
  std::size_t iterations = 2;         // T_r
};

struct RefineParams {
  nn::Linear s2o;         // f_{s->o}
  nn::Linear o2s;         // f_{o->s}
  nn::Linear query;       // W_q, b_q
  nn::Linear fact_proj;   // fact encodings -> Dm
  nn::Linear gate_inner;  // W_2, b_2
  nn::Linear gate_outer;  // W_1, b_1
  nn::GruCell agru;       // GRU used inside the attention GRU
  nn::Linear memory;      // W_m, b_m
  nn::Linear fuse;        // W_c, b_c
  std::size_t passes = 2;
  std::size_t iterations = 2;

  static RefineParams create(nn::ParamStore& store, const std::string& prefix, const RefineConfig& cfg, Rng& rng);
};

// Object <-> subgraph incidence derived from subgraph member sets.
struct Associations {
  std::vector<std::vector<std::size_t>> subgraphs_of_object;
  std::vector<std::vector<std::size_t>> objects_of_subgraph;
};
Associations associate(const std::vector<proposals::SubgraphProposal>& subgraphs, std::size_t object_count);

struct InterRefineResult {
  std::vector<num::Tensor> objects;    // o-bar, each [D]
  std::vector<num::Tensor> subgraphs;  // s-bar, each [D x Ks x Ks]
  std::vector<num::Tensor> object_attention;    // alpha^{s->o} per object
  std::vector<num::Tensor> subgraph_attention;  // alpha^{o->s} per subgraph
};

// o-bar_i = o_i + f_{s->o}(sum_k alpha_k pool(s_k)),
// s-bar_k = s_k + broadcast(f_{o->s}(sum_i alpha_i o_i)),
// with alpha the softmax of scaled dot products over each association set.
// Throws std::invalid_argument for an object or subgraph with no association.
InterRefineResult inter_refine(const std::vector<num::Tensor>& objects, const std::vector<num::Tensor>& subgraphs,
                               const Associations& assoc, const RefineParams& params);

struct AttentionResult {
  num::Tensor gates;        // g^t [K]
  num::Tensor interaction;  // z^t [K x 4 Dm]
};

// z = [F*q ; F*m ; |F-q| ; |F-m|] row-wise, g = softmax(W_1 tanh(W_2 z + b_2) + b_1).
AttentionResult dmn_attend(const num::Tensor& facts, const num::Tensor& query, const num::Tensor& memory,
                           const RefineParams& params);

// e_k = g_k GRU(f_k, e_{k-1}) + (1 - g_k) e_{k-1}, e_{-1} = 0; returns the last state.
num::Tensor agru_pass(const num::Tensor& facts, const num::Tensor& gates, const nn::GruCell& cell);

// m^t = ReLU(W_m [m^{t-1}; e; q] + b_m).
num::Tensor memory_update(const num::Tensor& memory, const num::Tensor& episode, const num::Tensor& query,
                          const nn::Linear& map);

struct EpisodicState {
  num::Tensor query;    // q
  num::Tensor memory;   // m^t
  num::Tensor episode;  // e^t
  std::size_t pass_index = 0;
};

// Retrieves and encodes facts per label; encodings are cached for the
// lifetime of one forward pass.
class FactMemory {
 public:
  FactMemory(const kb::TripleStore& store, const kb::Vocabulary& vocab, const kb::FactEncoderParams& encoder,
             std::size_t top_k);
  // Encoded facts (each [2 Hf]) for a label; empty for unknown labels.
  std::vector<num::Tensor> facts_for(const std::string& label);
  std::size_t top_k() const { return top_k_; }

 private:
  const kb::TripleStore* store_;
  const kb::Vocabulary* vocab_;
  const kb::FactEncoderParams* encoder_;
  std::size_t top_k_;
  std::map<std::string, num::Tensor> cache_;
};

// Knowledge-fused object update. With no facts the memory path is skipped
// and o-tilde = ReLU(W_c [o-bar; q] + b_c).
num::Tensor kb_refine(const num::Tensor& object, const std::vector<num::Tensor>& fact_encodings,
                      const RefineParams& params, std::vector<EpisodicState>* trace = nullptr);

// Convenience overload: retrieve facts for `label` then refine.
num::Tensor kb_refine(const num::Tensor& object, const std::string& label, FactMemory& memory,
                      const RefineParams& params, std::vector<EpisodicState>* trace = nullptr);

// Maps an intermediate object vector to the KB label used for retrieval.
using Labeler = std::function<std::string(const num::Tensor& object)>;

struct RefineOutput {
  std::vector<num::Tensor> objects;    // o-tilde
  std::vector<num::Tensor> subgraphs;  // s-bar
  std::vector<std::vector<std::string>> labels_per_iteration;
};

// T_r rounds of inter_refine followed by kb_refine (skipped when `memory` is
// null), feeding results back as the next round's inputs.
RefineOutput refine_loop(const std::vector<num::Tensor>& objects, const std::vector<num::Tensor>& subgraphs,
                         const Associations& assoc, const RefineParams& params, FactMemory* memory,
                         const Labeler& labeler);

}  // namespace sgg::refine
