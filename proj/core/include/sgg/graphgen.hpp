#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sgg/nn.hpp"
#include "sgg/proposals.hpp"
#include "sgg/scene.hpp"

namespace sgg::graph {

struct HeadConfig {
  std::size_t feature_dim = 32;    // D
  std::size_t ks = 5;              // subgraph map side
  std::size_t num_classes = 7;     // object categories including background
  std::size_t num_predicates = 5;  // predicates including no-relation
  std::size_t bottleneck = 16;     // f_rel 1x1 reduction width (D / 2 by default)
};

struct HeadParams {
  nn::Linear node;        // f_node
  nn::Linear box;         // box-delta regressor
  nn::Conv2d rel_reduce;  // f_rel 1x1 bottleneck
  nn::Linear rel_out;     // f_rel classifier over the flattened bottleneck

  static HeadParams create(nn::ParamStore& store, const std::string& prefix, const HeadConfig& cfg, Rng& rng);
};

// Inverted dropout applied to head inputs during training only.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
  num::Tensor operator()(const num::Tensor& x) const;
};

num::Tensor object_logits(const num::Tensor& object, const HeadParams& params, const Dropout& drop = {});
// V_i = softmax(f_node(o-tilde_i)) over classes including background.
num::Tensor predict_object(const num::Tensor& object, const HeadParams& params, const Dropout& drop = {});
num::Tensor box_deltas(const num::Tensor& object, const HeadParams& params);

// o (x) s: 1x1 convolution of the map [D x Ks x Ks] with the object vector as
// a single D-channel kernel, giving [1 x Ks x Ks].
num::Tensor correlate(const num::Tensor& object, const num::Tensor& subgraph_map);

// P_ij = softmax(f_rel([o_i (x) s_k ; o_j (x) s_k ; s_k])).
num::Tensor relation_logits(const num::Tensor& subj, const num::Tensor& obj, const num::Tensor& subgraph_map,
                            const HeadParams& params, const Dropout& drop = {});
num::Tensor predict_relation(const num::Tensor& subj, const num::Tensor& obj, const num::Tensor& subgraph_map,
                             const HeadParams& params, const Dropout& drop = {});
// Checked variant: throws std::invalid_argument unless both endpoints are
// members of the subgraph and distinct.
num::Tensor predict_relation(std::size_t i, std::size_t j, const proposals::SubgraphProposal& subgraph,
                             const std::vector<num::Tensor>& objects, const num::Tensor& subgraph_map,
                             const HeadParams& params, const Dropout& drop = {});

// Centre/size deltas (dx, dy, log dw, log dh) normalized by the proposal box.
std::array<double, 4> box_targets(const Box& proposal, const Box& target);
Box apply_deltas(const Box& proposal, std::span<const double> deltas);

struct LossWeights {
  double pred = 2.0;
  double obj = 1.0;  // the object-classification weight (also called lambda_cls)
  double reg = 0.5;
};

// Training targets: a proposal takes the class of the ground-truth object
// with highest IoU when that IoU >= threshold, else background (u = 0).
struct GroundTruthAssignment {
  std::vector<int> object_labels;
  std::vector<int> matched_object;  // ground-truth index or -1
  std::vector<std::optional<std::array<double, 4>>> box_targets;
  std::vector<int> predicate_labels;  // per candidate; 0 = no relation
};

GroundTruthAssignment assign_ground_truth(const std::vector<Box>& proposal_boxes,
                                          const std::vector<proposals::CandidateTriple>& candidates,
                                          const Scene& scene, double iou_thresh = 0.5);

struct GraphPredictions {
  std::vector<num::Tensor> object_probs;    // per proposal
  std::vector<num::Tensor> box_deltas;      // per proposal, [4]
  std::vector<num::Tensor> relation_probs;  // per candidate
};

struct LossBreakdown {
  num::Tensor total;
  num::Tensor pred;  // mean softmax cross-entropy over candidates
  num::Tensor obj;   // mean softmax cross-entropy over proposals
  num::Tensor reg;   // mean smooth-L1 over foreground proposals (0 when none)
};

// L = lambda_pred L_pred + lambda_obj L_obj + lambda_reg 1[u >= 1] L_reg.
LossBreakdown scene_graph_loss(const GraphPredictions& pred, const GroundTruthAssignment& gt,
                               const LossWeights& weights);

struct GraphNode {
  Box box;
  std::vector<double> dist;
  int label = 0;
  double score = 0.0;
  std::size_t proposal = 0;
};

struct GraphEdge {
  std::size_t subj = 0;  // node index
  std::size_t obj = 0;
  std::vector<double> dist;
};

struct SceneGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
};

// Scored <subject, predicate, object> with localization.
struct Triplet {
  int subj_label = 0;
  int predicate = 0;
  int obj_label = 0;
  Box subj_box;
  Box obj_box;
  double score = 0.0;
};

// Keeps full distributions; nodes whose top-1 class is background are
// dropped along with their edges.
SceneGraph assemble_graph(const std::vector<std::vector<double>>& object_dists,
                          const std::vector<std::vector<double>>& relation_dists,
                          const std::vector<proposals::CandidateTriple>& candidates, const std::vector<Box>& boxes);

// Scored triplets in edge order. top1: one triplet per edge with its best
// non-background predicate; otherwise one per non-background predicate.
// Score = subject score x predicate probability x object score.
std::vector<Triplet> graph_triplets(const SceneGraph& graph, bool top1);

// Ground truth as triplets with unit score.
std::vector<Triplet> scene_triplets(const Scene& scene);

// JSONL graph records: {"id", "nodes": [{box, label, score}], "edges": [{subj, obj, predicate, score}]}.
struct GraphRecord {
  std::string id;
  std::vector<GraphNode> nodes;  // dist left empty
  std::vector<Triplet> triplets;
  std::vector<std::pair<std::size_t, std::size_t>> endpoints;  // node indices per triplet
};

GraphRecord make_record(const std::string& id, const SceneGraph& graph, bool top1);
GraphRecord make_record(const Scene& scene);
std::string record_to_json_line(const GraphRecord& rec, const LabelSet& labels);
GraphRecord record_from_json_line(const std::string& line, const LabelSet& labels, std::size_t line_no);
void write_records(const std::filesystem::path& path, const std::vector<GraphRecord>& recs, const LabelSet& labels);
std::vector<GraphRecord> read_records(const std::filesystem::path& path, const LabelSet& labels);

}  // namespace sgg::graph
