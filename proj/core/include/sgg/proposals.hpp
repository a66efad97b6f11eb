#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sgg/box.hpp"
#include "sgg/num/tensor.hpp"
#include "sgg/scene.hpp"

namespace sgg::proposals {

// Controls the deterministic stand-in for pooled CNN features.
struct FeatureConfig {
  std::size_t dim = 32;  // D
  double canvas_w = 64.0;
  double canvas_h = 64.0;
  std::uint64_t seed = 7;
};

// Class id used for subgraph (union-region) features.
inline constexpr int kRegionClass = -1;

// Per-class seeded base vector plus a smooth sinusoidal encoding of the
// normalized box geometry (centre, size). Pure function of its arguments.
num::Tensor synth_features(const Box& box, int class_id, const FeatureConfig& cfg);

struct ObjectProposal {
  Box box;
  num::Tensor feature;  // [D]
  double score = 1.0;   // in [0, 1]
  std::optional<int> label;
  std::size_t source = 0;  // index of the ground-truth object it was drawn from
};

struct ProposalConfig {
  std::size_t count = 0;  // 0 means one proposal per ground-truth object
  double jitter = 0.0;    // relative box perturbation scale
  std::uint64_t seed = 11;
};

// Stand-in for a region proposal network: ground-truth boxes (cycled when
// more proposals than objects are requested), optionally jittered. Throws
// std::invalid_argument when fewer than two proposals would result.
std::vector<ObjectProposal> stub_proposals(const Scene& scene, const ProposalConfig& pcfg,
                                           const FeatureConfig& fcfg);

struct SubgraphProposal {
  Box box;                           // union of all member boxes
  num::Tensor feature;               // [D x Ks x Ks]
  std::vector<std::size_t> members;  // sorted object indices, size >= 2
  double score = 0.0;
};

// Ordered relation candidate <subj, obj, subgraph>, subj != obj, both members.
struct CandidateTriple {
  std::size_t subj = 0;
  std::size_t obj = 0;
  std::size_t subgraph = 0;
};

struct SubgraphSet {
  std::vector<SubgraphProposal> subgraphs;
  std::vector<CandidateTriple> candidates;
};

// Pure geometry part of subgraph construction. For every unordered pair
// (i < j) in lexicographic order a union box with score s_i * s_j is formed;
// greedy NMS in descending score (ties: lower pair index) assigns each
// suppressed pair to the survivor that suppressed it. Returns, per pair, the
// index of its cluster; clusters are numbered in survivor order.
struct PairClustering {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> cluster_of_pair;
  std::vector<std::size_t> survivor_pair;  // representative pair per cluster
  std::vector<double> pair_scores;
  std::vector<Box> pair_boxes;
};
PairClustering cluster_pairs(const std::vector<Box>& boxes, const std::vector<double>& scores, double nms_thresh);

// Union boxes, score products and NMS clustering; features initialized from
// synth_features over each subgraph box, tiled to D x Ks x Ks.
SubgraphSet build_subgraphs(const std::vector<ObjectProposal>& objects, double nms_thresh, std::size_t ks,
                            const FeatureConfig& fcfg);

// N (N - 1): number of ordered pairs before clustering.
inline std::size_t ordered_pair_count(std::size_t n) { return n < 2 ? 0 : n * (n - 1); }

}  // namespace sgg::proposals
