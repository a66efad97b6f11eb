#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "sgg/config.hpp"
#include "sgg/graphgen.hpp"
#include "sgg/imggen.hpp"
#include "sgg/kb.hpp"
#include "sgg/proposals.hpp"
#include "sgg/refine.hpp"
#include "sgg/scene.hpp"

namespace sgg {

// Everything one scene's forward pass produced, kept alive for backward.
struct ScenePass {
  std::vector<proposals::ObjectProposal> proposals;
  proposals::SubgraphSet subgraphs;
  refine::RefineOutput refined;
  graph::GraphPredictions predictions;
  std::vector<Box> proposal_boxes;
};

// Parameter names are grouped by prefix: "refine.", "head.", "kb.", "gen.", "disc.".
enum class ParamGroup { kRefine, kHead, kKb, kGen, kDisc };
ParamGroup group_of(const std::string& name);
const char* group_name(ParamGroup g);

class Model {
 public:
  // Registration order (and so initialization and checkpoint layout) is
  // fixed and independent of the use_kb / use_gan switches.
  Model(const ModelConfig& cfg, LabelSet labels, kb::TripleStore store);

  const ModelConfig& config() const { return cfg_; }
  const LabelSet& labels() const { return labels_; }
  const kb::TripleStore& store() const { return store_; }
  const kb::Vocabulary& vocab() const { return vocab_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  std::vector<nn::NamedTensor> params_in(ParamGroup g) const;

  const refine::RefineParams& refine_params() const { return refine_; }
  const graph::HeadParams& head_params() const { return head_; }
  const kb::FactEncoderParams& encoder_params() const { return encoder_; }
  kb::FactEncoderParams& encoder_params() { return encoder_; }
  const imggen::GanParams& gan_params() const { return gan_; }

  // Proposals -> subgraphs -> refinement -> heads. Retrieval labels are the
  // current argmax of the object head on o-bar (background retrieves nothing).
  ScenePass forward(const Scene& scene, bool use_kb, const graph::Dropout& drop = {}) const;

  // Layout from per-object vectors placed at the given scene boxes.
  imggen::SceneLayout layout(const std::vector<num::Tensor>& objects, const std::vector<Box>& boxes,
                             const Scene& scene) const;
  // Ground-truth objects represented by their synthetic features.
  imggen::SceneLayout ground_truth_layout(const Scene& scene) const;

  // Inference graph: regressed boxes, background nodes dropped.
  graph::SceneGraph infer(const Scene& scene, bool use_kb) const;

 private:
  ModelConfig cfg_;
  LabelSet labels_;
  kb::TripleStore store_;
  kb::Vocabulary vocab_;
  nn::ParamStore params_;
  refine::RefineParams refine_;
  graph::HeadParams head_;
  kb::FactEncoderParams encoder_;
  imggen::GanParams gan_;
};

std::vector<std::vector<double>> values_of(const std::vector<num::Tensor>& ts);

}  // namespace sgg
