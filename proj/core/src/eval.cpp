#include "sgg/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>

#include "sgg/error.hpp"

namespace sgg::eval {

const char* mode_name(Mode m) { return m == Mode::kPhrDet ? "PhrDet" : "SGGen"; }

bool match_triplet(const graph::Triplet& pred, const graph::Triplet& gt, Mode mode, double iou_thresh) {
  if (pred.subj_label != gt.subj_label || pred.predicate != gt.predicate || pred.obj_label != gt.obj_label)
    return false;
  if (mode == Mode::kPhrDet)
    return iou(union_box(pred.subj_box, pred.obj_box), union_box(gt.subj_box, gt.obj_box)) >= iou_thresh;
  return iou(pred.subj_box, gt.subj_box) >= iou_thresh && iou(pred.obj_box, gt.obj_box) >= iou_thresh;
}

std::vector<std::size_t> top_k(const std::vector<graph::Triplet>& preds, std::size_t k) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  if (order.size() > k) order.resize(k);
  return order;
}

namespace {

// Kuhn's augmenting-path bipartite matching; returns the matching size.
std::size_t max_matching(const std::vector<std::vector<std::size_t>>& adj, std::size_t right) {
  std::vector<long> owner(right, -1);
  std::vector<char> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t u) {
    for (auto v : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      if (owner[v] < 0 || augment(static_cast<std::size_t>(owner[v]))) {
        owner[v] = static_cast<long>(u);
        return true;
      }
    }
    return false;
  };
  std::size_t size = 0;
  for (std::size_t u = 0; u < adj.size(); ++u) {
    seen.assign(right, 0);
    if (augment(u)) ++size;
  }
  return size;
}

}  // namespace

ImageRecall recall_at_k(const std::vector<graph::Triplet>& preds, const std::vector<graph::Triplet>& gts,
                        std::size_t k, Mode mode, double iou_thresh, Matching matching) {
  ImageRecall r;
  r.gt = gts.size();
  if (gts.empty()) return r;
  const auto top = top_k(preds, k);
  if (matching == Matching::kGreedy) {
    std::vector<char> used(gts.size(), 0);
    for (auto p : top)
      for (std::size_t g = 0; g < gts.size(); ++g)
        if (!used[g] && match_triplet(preds[p], gts[g], mode, iou_thresh)) {
          used[g] = 1;
          ++r.hits;
          break;
        }
  } else {
    std::vector<std::vector<std::size_t>> adj(top.size());
    for (std::size_t a = 0; a < top.size(); ++a)
      for (std::size_t g = 0; g < gts.size(); ++g)
        if (match_triplet(preds[top[a]], gts[g], mode, iou_thresh)) adj[a].push_back(g);
    r.hits = max_matching(adj, gts.size());
  }
  r.recall = static_cast<double>(r.hits) / static_cast<double>(r.gt);
  return r;
}

EvalResult evaluate(const std::vector<graph::GraphRecord>& preds, const std::vector<graph::GraphRecord>& gts,
                    const EvalOptions& opts) {
  std::map<std::string, const graph::GraphRecord*> by_id;
  for (const auto& p : preds) by_id[p.id] = &p;
  EvalResult res;
  res.images = gts.size();
  for (const auto& g : gts) {
    if (!by_id.count(g.id)) throw DataError("no prediction for image '" + g.id + "'");
    if (g.triplets.empty()) ++res.empty_gt_images;
  }
  for (Mode mode : {Mode::kPhrDet, Mode::kSgGen})
    for (auto k : opts.ks) {
      auto& rows = res.per_image[mode][k];
      std::size_t hits = 0, total = 0;
      double sum = 0.0;
      for (const auto& g : gts) {
        auto r = recall_at_k(by_id[g.id]->triplets, g.triplets, k, mode, opts.iou_thresh, opts.matching);
        hits += r.hits;
        total += r.gt;
        sum += r.recall;
        rows.push_back(r);
      }
      double value = 1.0;
      if (opts.macro) {
        if (!gts.empty()) value = sum / static_cast<double>(gts.size());
      } else if (total > 0) {
        value = static_cast<double>(hits) / static_cast<double>(total);
      }
      res.recall[mode][k] = value;
    }
  return res;
}

std::string format_report(const EvalResult& result, const EvalOptions& opts) {
  std::ostringstream o;
  o.precision(6);
  o << "images: " << result.images << "\n";
  o << "empty_gt_images: " << result.empty_gt_images << "\n";
  o << "averaging: " << (opts.macro ? "macro" : "micro") << "\n";
  o << "matching: " << (opts.matching == Matching::kOptimal ? "optimal" : "greedy") << "\n";
  o << "iou_thresh: " << opts.iou_thresh << "\n";
  for (const auto& [mode, row] : result.recall)
    for (const auto& [k, v] : row) o << mode_name(mode) << ".R@" << k << ": " << v << "\n";
  return o.str();
}

std::string format_csv(const EvalResult& result) {
  std::ostringstream o;
  o << "mode,K,recall\n";
  for (const auto& [mode, row] : result.recall)
    for (const auto& [k, v] : row) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      o << mode_name(mode) << "," << k << "," << buf << "\n";
    }
  return o.str();
}

}  // namespace sgg::eval
