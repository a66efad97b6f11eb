#include "sgg/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sgg/num/ops.hpp"
#include "sgg/rng.hpp"

namespace sgg::proposals {

num::Tensor synth_features(const Box& box, int class_id, const FeatureConfig& cfg) {
  require_valid(box, "synth_features");
  const std::size_t D = cfg.dim;
  const double geo[4] = {box.center_x() / cfg.canvas_w, box.center_y() / cfg.canvas_h, box.w / cfg.canvas_w,
                         box.h / cfg.canvas_h};

  Rng base_rng(derive_seed({cfg.seed, 0xba5eULL, static_cast<std::uint64_t>(static_cast<std::int64_t>(class_id))}));
  Rng geo_rng(derive_seed({cfg.seed, 0x6e0ULL}));
  std::vector<double> v(D);
  for (std::size_t d = 0; d < D; ++d) {
    double phase = geo_rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (double g : geo) phase += 3.0 * geo_rng.normal() * g;
    v[d] = base_rng.normal() + 0.5 * std::sin(phase);
  }
  return num::Tensor::vector(std::move(v));
}

std::vector<ObjectProposal> stub_proposals(const Scene& scene, const ProposalConfig& pcfg,
                                           const FeatureConfig& fcfg) {
  const std::size_t gt = scene.objects.size();
  const std::size_t n = pcfg.count == 0 ? gt : pcfg.count;
  if (n < 2) throw std::invalid_argument("stub_proposals: need at least 2 proposals, got " + std::to_string(n));
  if (gt == 0) throw std::invalid_argument("stub_proposals: scene '" + scene.id + "' has no objects");

  Rng rng(derive_seed({pcfg.seed, fnv1a64(scene.id)}));
  std::vector<ObjectProposal> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SceneObject& src = scene.objects[i % gt];
    Box b = src.box;
    if (pcfg.jitter > 0.0) {
      const double j = pcfg.jitter;
      b.x += j * src.box.w * rng.normal();
      b.y += j * src.box.h * rng.normal();
      b.w *= std::exp(j * rng.normal());
      b.h *= std::exp(j * rng.normal());
    }
    ObjectProposal p;
    p.box = b;
    p.label = src.label;
    p.source = i % gt;
    p.score = iou(b, src.box);
    p.feature = synth_features(b, src.label, fcfg);
    out.push_back(std::move(p));
  }
  return out;
}

PairClustering cluster_pairs(const std::vector<Box>& boxes, const std::vector<double>& scores, double nms_thresh) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("cluster_pairs: boxes/scores size mismatch");
  PairClustering c;
  const std::size_t n = boxes.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      c.pairs.emplace_back(i, j);
      c.pair_boxes.push_back(union_box(boxes[i], boxes[j]));
      c.pair_scores.push_back(scores[i] * scores[j]);
    }
  const std::size_t m = c.pairs.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return c.pair_scores[a] > c.pair_scores[b]; });

  constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);
  c.cluster_of_pair.assign(m, kUnassigned);
  for (std::size_t oi = 0; oi < m; ++oi) {
    const std::size_t p = order[oi];
    if (c.cluster_of_pair[p] != kUnassigned) continue;
    const std::size_t cluster = c.survivor_pair.size();
    c.survivor_pair.push_back(p);
    c.cluster_of_pair[p] = cluster;
    for (std::size_t oj = oi + 1; oj < m; ++oj) {
      const std::size_t q = order[oj];
      if (c.cluster_of_pair[q] != kUnassigned) continue;
      if (iou(c.pair_boxes[p], c.pair_boxes[q]) > nms_thresh) c.cluster_of_pair[q] = cluster;
    }
  }
  return c;
}

SubgraphSet build_subgraphs(const std::vector<ObjectProposal>& objects, double nms_thresh, std::size_t ks,
                            const FeatureConfig& fcfg) {
  if (objects.empty()) throw std::invalid_argument("build_subgraphs: empty object list");
  if (objects.size() < 2) throw std::invalid_argument("build_subgraphs: need at least 2 objects");
  std::vector<Box> boxes;
  std::vector<double> scores;
  for (const auto& o : objects) {
    boxes.push_back(o.box);
    scores.push_back(o.score);
  }
  const PairClustering pc = cluster_pairs(boxes, scores, nms_thresh);

  SubgraphSet out;
  std::vector<std::set<std::size_t>> members(pc.survivor_pair.size());
  for (std::size_t p = 0; p < pc.pairs.size(); ++p) {
    members[pc.cluster_of_pair[p]].insert(pc.pairs[p].first);
    members[pc.cluster_of_pair[p]].insert(pc.pairs[p].second);
  }
  for (std::size_t k = 0; k < members.size(); ++k) {
    SubgraphProposal sg;
    sg.members.assign(members[k].begin(), members[k].end());
    sg.box = boxes[sg.members[0]];
    for (auto i : sg.members) sg.box = union_box(sg.box, boxes[i]);
    sg.score = pc.pair_scores[pc.survivor_pair[k]];
    sg.feature = num::broadcast_spatial(synth_features(sg.box, kRegionClass, fcfg), ks, ks);
    out.subgraphs.push_back(std::move(sg));
  }
  // Ordered pairs in (subj, obj) lexicographic order.
  const std::size_t n = objects.size();
  std::size_t p = 0;
  std::vector<std::vector<std::size_t>> pair_cluster(n, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++p) pair_cluster[i][j] = pair_cluster[j][i] = pc.cluster_of_pair[p];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) out.candidates.push_back({i, j, pair_cluster[i][j]});
  return out;
}

}  // namespace sgg::proposals
