#include "sgg/graphgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "sgg/error.hpp"
#include "sgg/num/ops.hpp"

namespace sgg::graph {

using num::Tensor;

HeadParams HeadParams::create(nn::ParamStore& store, const std::string& prefix, const HeadConfig& cfg, Rng& rng) {
  HeadParams p;
  p.node = nn::Linear::create(store, prefix + ".node", cfg.feature_dim, cfg.num_classes, rng);
  p.box = nn::Linear::create(store, prefix + ".box", cfg.feature_dim, 4, rng);
  // Start the regressor at identity deltas.
  for (auto& v : p.box.weight.mutable_data()) v *= 0.01;
  p.rel_reduce = nn::Conv2d::create(store, prefix + ".rel_reduce", cfg.feature_dim + 2, cfg.bottleneck, 1, 1, 0, rng);
  p.rel_out = nn::Linear::create(store, prefix + ".rel_out", cfg.bottleneck * cfg.ks * cfg.ks, cfg.num_predicates, rng);
  return p;
}

Tensor Dropout::operator()(const Tensor& x) const {
  if (rate <= 0.0 || rng == nullptr) return x;
  return nn::dropout(x, rate, *rng);
}

Tensor object_logits(const Tensor& object, const HeadParams& params, const Dropout& drop) {
  return params.node(drop(object));
}

Tensor predict_object(const Tensor& object, const HeadParams& params, const Dropout& drop) {
  return num::softmax(object_logits(object, params, drop), 0);
}

Tensor box_deltas(const Tensor& object, const HeadParams& params) { return params.box(object); }

Tensor correlate(const Tensor& object, const Tensor& subgraph_map) {
  if (subgraph_map.rank() != 3 || object.size() != subgraph_map.dim(0))
    throw DimensionError("correlate: object " + num::shape_string(object.shape()) + " vs map " +
                         num::shape_string(subgraph_map.shape()));
  return num::conv2d(subgraph_map, num::reshape(object, {1, object.size(), 1, 1}));
}

Tensor relation_logits(const Tensor& subj, const Tensor& obj, const Tensor& subgraph_map, const HeadParams& params,
                       const Dropout& drop) {
  Tensor input = num::concat({correlate(subj, subgraph_map), correlate(obj, subgraph_map), subgraph_map}, 0);
  Tensor reduced = num::relu(params.rel_reduce(drop(input)));
  return params.rel_out(num::reshape(reduced, {reduced.size()}));
}

Tensor predict_relation(const Tensor& subj, const Tensor& obj, const Tensor& subgraph_map, const HeadParams& params,
                        const Dropout& drop) {
  return num::softmax(relation_logits(subj, obj, subgraph_map, params, drop), 0);
}

Tensor predict_relation(std::size_t i, std::size_t j, const proposals::SubgraphProposal& subgraph,
                        const std::vector<Tensor>& objects, const Tensor& subgraph_map, const HeadParams& params,
                        const Dropout& drop) {
  const auto& m = subgraph.members;
  if (i == j) throw std::invalid_argument("predict_relation: subject and object must differ");
  if (!std::binary_search(m.begin(), m.end(), i) || !std::binary_search(m.begin(), m.end(), j))
    throw std::invalid_argument("predict_relation: subgraph does not contain objects " + std::to_string(i) + " and " +
                                std::to_string(j));
  return predict_relation(objects.at(i), objects.at(j), subgraph_map, params, drop);
}

std::array<double, 4> box_targets(const Box& p, const Box& t) {
  return {(t.center_x() - p.center_x()) / p.w, (t.center_y() - p.center_y()) / p.h, std::log(t.w / p.w),
          std::log(t.h / p.h)};
}

Box apply_deltas(const Box& p, std::span<const double> d) {
  if (d.size() != 4) throw DimensionError("apply_deltas: expected 4 deltas");
  const double cx = p.center_x() + d[0] * p.w;
  const double cy = p.center_y() + d[1] * p.h;
  const double w = p.w * std::exp(std::clamp(d[2], -4.0, 4.0));
  const double h = p.h * std::exp(std::clamp(d[3], -4.0, 4.0));
  return Box{cx - 0.5 * w, cy - 0.5 * h, w, h};
}

GroundTruthAssignment assign_ground_truth(const std::vector<Box>& proposal_boxes,
                                          const std::vector<proposals::CandidateTriple>& candidates,
                                          const Scene& scene, double iou_thresh) {
  if (scene.objects.empty()) throw std::invalid_argument("assign_ground_truth: scene '" + scene.id + "' has no ground truth");
  GroundTruthAssignment a;
  for (const Box& b : proposal_boxes) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < scene.objects.size(); ++g) {
      const double v = iou(b, scene.objects[g].box);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best_iou >= iou_thresh) {
      a.matched_object.push_back(best);
      a.object_labels.push_back(scene.objects[static_cast<std::size_t>(best)].label);
      a.box_targets.push_back(box_targets(b, scene.objects[static_cast<std::size_t>(best)].box));
    } else {
      a.matched_object.push_back(-1);
      a.object_labels.push_back(0);
      a.box_targets.push_back(std::nullopt);
    }
  }
  for (const auto& c : candidates) {
    int label = 0;
    const int gs = a.matched_object.at(c.subj), go = a.matched_object.at(c.obj);
    if (gs >= 0 && go >= 0 && gs != go) {
      for (const auto& r : scene.relations) {
        if (r.subj == static_cast<std::size_t>(gs) && r.obj == static_cast<std::size_t>(go)) {
          label = r.predicate;
          break;
        }
      }
    }
    a.predicate_labels.push_back(label);
  }
  return a;
}

namespace {

// -log p[target], with p floored to keep the log finite.
Tensor nll(const Tensor& probs, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size())
    throw std::invalid_argument("target label out of range");
  Tensor p = num::slice(probs, 0, static_cast<std::size_t>(target), 1);
  return num::scale(num::log(num::clamp(p, 1e-300, 2.0)), -1.0);
}

Tensor mean_of(const std::vector<Tensor>& terms) {
  if (terms.empty()) return Tensor::scalar(0.0);
  return num::scale(num::sum(num::concat(terms, 0)), 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

LossBreakdown scene_graph_loss(const GraphPredictions& pred, const GroundTruthAssignment& gt,
                               const LossWeights& weights) {
  if (gt.object_labels.empty()) throw std::invalid_argument("scene_graph_loss: no ground truth");
  if (pred.object_probs.size() != gt.object_labels.size() ||
      pred.relation_probs.size() != gt.predicate_labels.size() || pred.box_deltas.size() != gt.box_targets.size())
    throw std::invalid_argument("scene_graph_loss: predictions and ground truth differ in size");
  if (weights.pred < 0 || weights.obj < 0 || weights.reg < 0)
    throw std::invalid_argument("scene_graph_loss: loss weights must be non-negative");

  std::vector<Tensor> obj_terms, pred_terms, reg_terms;
  for (std::size_t i = 0; i < gt.object_labels.size(); ++i) obj_terms.push_back(nll(pred.object_probs[i], gt.object_labels[i]));
  for (std::size_t c = 0; c < gt.predicate_labels.size(); ++c)
    pred_terms.push_back(nll(pred.relation_probs[c], gt.predicate_labels[c]));
  for (std::size_t i = 0; i < gt.box_targets.size(); ++i) {
    if (gt.object_labels[i] < 1 || !gt.box_targets[i]) continue;
    const auto& t = *gt.box_targets[i];
    Tensor target = Tensor::vector({t[0], t[1], t[2], t[3]});
    reg_terms.push_back(num::sum(num::smooth_l1(num::sub(pred.box_deltas[i], target))));
  }

  LossBreakdown out;
  out.obj = mean_of(obj_terms);
  out.pred = mean_of(pred_terms);
  out.reg = mean_of(reg_terms);
  Tensor total = num::add(num::scale(out.pred, weights.pred), num::scale(out.obj, weights.obj));
  if (weights.reg > 0.0 && !reg_terms.empty()) total = num::add(total, num::scale(out.reg, weights.reg));
  out.total = total;
  return out;
}

SceneGraph assemble_graph(const std::vector<std::vector<double>>& object_dists,
                          const std::vector<std::vector<double>>& relation_dists,
                          const std::vector<proposals::CandidateTriple>& candidates, const std::vector<Box>& boxes) {
  if (object_dists.size() != boxes.size() || relation_dists.size() != candidates.size())
    throw std::invalid_argument("assemble_graph: inconsistent index sets");
  SceneGraph g;
  std::vector<long> node_of(object_dists.size(), -1);
  for (std::size_t i = 0; i < object_dists.size(); ++i) {
    const auto& d = object_dists[i];
    const auto best = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
    if (best == 0) continue;
    node_of[i] = static_cast<long>(g.nodes.size());
    g.nodes.push_back(GraphNode{boxes[i], d, static_cast<int>(best), d[best], i});
  }
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const long s = node_of.at(candidates[c].subj), o = node_of.at(candidates[c].obj);
    if (s < 0 || o < 0) continue;
    g.edges.push_back(GraphEdge{static_cast<std::size_t>(s), static_cast<std::size_t>(o), relation_dists[c]});
  }
  return g;
}

std::vector<Triplet> graph_triplets(const SceneGraph& graph, bool top1) {
  std::vector<Triplet> out;
  for (const auto& e : graph.edges) {
    const GraphNode& s = graph.nodes.at(e.subj);
    const GraphNode& o = graph.nodes.at(e.obj);
    auto emit = [&](std::size_t p) {
      out.push_back(Triplet{s.label, static_cast<int>(p), o.label, s.box, o.box, s.score * e.dist[p] * o.score});
    };
    if (top1) {
      if (e.dist.size() < 2) continue;
      const auto best = static_cast<std::size_t>(std::max_element(e.dist.begin() + 1, e.dist.end()) - e.dist.begin());
      emit(best);
    } else {
      for (std::size_t p = 1; p < e.dist.size(); ++p) emit(p);
    }
  }
  return out;
}

std::vector<Triplet> scene_triplets(const Scene& scene) {
  std::vector<Triplet> out;
  for (const auto& r : scene.relations) {
    const auto& s = scene.objects.at(r.subj);
    const auto& o = scene.objects.at(r.obj);
    out.push_back(Triplet{s.label, r.predicate, o.label, s.box, o.box, 1.0});
  }
  return out;
}

GraphRecord make_record(const std::string& id, const SceneGraph& graph, bool top1) {
  GraphRecord rec;
  rec.id = id;
  for (const auto& n : graph.nodes) rec.nodes.push_back(GraphNode{n.box, {}, n.label, n.score, n.proposal});
  for (const auto& e : graph.edges) {
    SceneGraph single{graph.nodes, {e}};
    for (auto& t : graph_triplets(single, top1)) {
      rec.triplets.push_back(t);
      rec.endpoints.emplace_back(e.subj, e.obj);
    }
  }
  return rec;
}

GraphRecord make_record(const Scene& scene) {
  GraphRecord rec;
  rec.id = scene.id;
  for (std::size_t i = 0; i < scene.objects.size(); ++i)
    rec.nodes.push_back(GraphNode{scene.objects[i].box, {}, scene.objects[i].label, 1.0, i});
  rec.triplets = scene_triplets(scene);
  for (const auto& r : scene.relations) rec.endpoints.emplace_back(r.subj, r.obj);
  return rec;
}

using nlohmann::json;

std::string record_to_json_line(const GraphRecord& rec, const LabelSet& labels) {
  json j;
  j["id"] = rec.id;
  j["nodes"] = json::array();
  for (const auto& n : rec.nodes)
    j["nodes"].push_back(
        {{"box", {n.box.x, n.box.y, n.box.w, n.box.h}}, {"label", labels.classes.at(n.label)}, {"score", n.score}});
  j["edges"] = json::array();
  for (std::size_t t = 0; t < rec.triplets.size(); ++t)
    j["edges"].push_back({{"subj", rec.endpoints[t].first},
                          {"obj", rec.endpoints[t].second},
                          {"predicate", labels.predicates.at(rec.triplets[t].predicate)},
                          {"score", rec.triplets[t].score}});
  return j.dump();
}

GraphRecord record_from_json_line(const std::string& line, const LabelSet& labels, std::size_t line_no) {
  try {
    const json j = json::parse(line);
    GraphRecord rec;
    rec.id = j.value("id", std::to_string(line_no));
    for (const auto& n : j.at("nodes")) {
      const auto& b = n.at("box");
      if (!b.is_array() || b.size() != 4) throw DataError("node box must be [x, y, w, h]");
      GraphNode node;
      node.box = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      node.label = labels.class_index(n.at("label").get<std::string>());
      node.score = n.value("score", 1.0);
      node.proposal = rec.nodes.size();
      rec.nodes.push_back(node);
    }
    for (const auto& e : j.at("edges")) {
      const auto s = e.at("subj").get<std::size_t>(), o = e.at("obj").get<std::size_t>();
      if (s >= rec.nodes.size() || o >= rec.nodes.size() || s == o) throw DataError("edge endpoints invalid");
      rec.triplets.push_back(Triplet{rec.nodes[s].label, labels.predicate_index(e.at("predicate").get<std::string>()),
                                     rec.nodes[o].label, rec.nodes[s].box, rec.nodes[o].box, e.value("score", 1.0)});
      rec.endpoints.emplace_back(s, o);
    }
    return rec;
  } catch (const DataError& e) {
    throw DataError("graph line " + std::to_string(line_no) + ": " + e.what());
  } catch (const json::exception& e) {
    throw DataError("graph line " + std::to_string(line_no) + ": " + e.what());
  }
}

void write_records(const std::filesystem::path& path, const std::vector<GraphRecord>& recs, const LabelSet& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : recs) out << record_to_json_line(r, labels) << '\n';
}

std::vector<GraphRecord> read_records(const std::filesystem::path& path, const LabelSet& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<GraphRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(record_from_json_line(line, labels, line_no));
  }
  return out;
}

}  // namespace sgg::graph
