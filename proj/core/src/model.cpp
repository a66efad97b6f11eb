#include "sgg/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "sgg/num/ops.hpp"

namespace sgg {

ParamGroup group_of(const std::string& name) {
  auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
  if (starts("refine.")) return ParamGroup::kRefine;
  if (starts("head.")) return ParamGroup::kHead;
  if (starts("kb.")) return ParamGroup::kKb;
  if (starts("gen.")) return ParamGroup::kGen;
  if (starts("disc.")) return ParamGroup::kDisc;
  throw std::invalid_argument("parameter '" + name + "' belongs to no group");
}

const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kRefine: return "refine";
    case ParamGroup::kHead: return "head";
    case ParamGroup::kKb: return "kb";
    case ParamGroup::kGen: return "gen";
    case ParamGroup::kDisc: return "disc";
  }
  return "?";
}

namespace {

std::vector<std::string> label_words(const LabelSet& labels) {
  std::vector<std::string> out;
  for (const auto* list : {&labels.classes, &labels.predicates})
    for (std::size_t i = 1; i < list->size(); ++i) {
      out.push_back((*list)[i]);
      for (auto& w : kb::split_words((*list)[i])) out.push_back(w);
    }
  return out;
}

}  // namespace

Model::Model(const ModelConfig& cfg, LabelSet labels, kb::TripleStore store)
    : cfg_(cfg), labels_(std::move(labels)), store_(std::move(store)) {
  vocab_ = kb::build_vocabulary(store_, label_words(labels_));
  Rng rng(derive_seed({cfg_.init_seed, 0x5eed}));
  refine::RefineConfig rc = cfg_.refine;
  rc.feature_dim = cfg_.features.dim;
  rc.fact_dim = 2 * cfg_.fact_hidden;
  refine_ = refine::RefineParams::create(params_, "refine", rc, rng);
  head_ = graph::HeadParams::create(params_, "head",
                                    head_config(cfg_, labels_.classes.size(), labels_.predicates.size()), rng);
  encoder_ = kb::FactEncoderParams::create(params_, "kb.encoder", vocab_.size(), cfg_.embed_dim, cfg_.fact_hidden, rng);
  imggen::GanConfig gc = cfg_.gan;
  gc.object_dim = cfg_.features.dim;
  gan_ = imggen::GanParams::create(params_, "gen", "disc", gc, rng);
}

std::vector<nn::NamedTensor> Model::params_in(ParamGroup g) const {
  std::vector<nn::NamedTensor> out;
  for (const auto& e : params_.entries())
    if (group_of(e.name) == g) out.push_back(e);
  return out;
}

ScenePass Model::forward(const Scene& scene, bool use_kb, const graph::Dropout& drop) const {
  ScenePass pass;
  pass.proposals = proposals::stub_proposals(scene, cfg_.proposals, cfg_.features);
  pass.subgraphs = proposals::build_subgraphs(pass.proposals, cfg_.nms_thresh, cfg_.ks, cfg_.features);
  const auto assoc = refine::associate(pass.subgraphs.subgraphs, pass.proposals.size());

  std::vector<num::Tensor> objects, maps;
  for (const auto& p : pass.proposals) {
    objects.push_back(p.feature);
    pass.proposal_boxes.push_back(p.box);
  }
  for (const auto& s : pass.subgraphs.subgraphs) maps.push_back(s.feature);

  std::unique_ptr<refine::FactMemory> memory;
  if (use_kb) memory = std::make_unique<refine::FactMemory>(store_, vocab_, encoder_, cfg_.top_k);
  const auto& classes = labels_.classes;
  auto labeler = [&](const num::Tensor& o) {
    const auto t = graph::predict_object(o, head_);
    const auto probs = t.data();
    const auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    return best == 0 ? std::string() : classes[best];
  };
  pass.refined = refine::refine_loop(objects, maps, assoc, refine_, memory.get(), labeler);

  auto& pred = pass.predictions;
  for (const auto& o : pass.refined.objects) {
    pred.object_probs.push_back(graph::predict_object(o, head_, drop));
    pred.box_deltas.push_back(graph::box_deltas(o, head_));
  }
  for (const auto& c : pass.subgraphs.candidates)
    pred.relation_probs.push_back(graph::predict_relation(c.subj, c.obj, pass.subgraphs.subgraphs[c.subgraph],
                                                          pass.refined.objects, pass.refined.subgraphs[c.subgraph],
                                                          head_, drop));
  return pass;
}

imggen::SceneLayout Model::layout(const std::vector<num::Tensor>& objects, const std::vector<Box>& boxes,
                                  const Scene& scene) const {
  return imggen::layout_from_objects(objects, boxes, scene.width, scene.height, gan_);
}

imggen::SceneLayout Model::ground_truth_layout(const Scene& scene) const {
  std::vector<num::Tensor> objects;
  std::vector<Box> boxes;
  for (const auto& o : scene.objects) {
    objects.push_back(proposals::synth_features(o.box, o.label, cfg_.features));
    boxes.push_back(o.box);
  }
  return layout(objects, boxes, scene);
}

std::vector<std::vector<double>> values_of(const std::vector<num::Tensor>& ts) {
  std::vector<std::vector<double>> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

graph::SceneGraph Model::infer(const Scene& scene, bool use_kb) const {
  ScenePass pass = forward(scene, use_kb);
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < pass.proposal_boxes.size(); ++i)
    boxes.push_back(graph::apply_deltas(pass.proposal_boxes[i], pass.predictions.box_deltas[i].data()));
  return graph::assemble_graph(values_of(pass.predictions.object_probs), values_of(pass.predictions.relation_probs),
                               pass.subgraphs.candidates, boxes);
}

}  // namespace sgg
