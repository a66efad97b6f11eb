#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "oracle.hpp"
#include "sgg/box.hpp"
#include "sgg/eval.hpp"

namespace oracle {

inline bool labels_match(const sgg::graph::Triplet& p, const sgg::graph::Triplet& g) {
  return p.subj_label == g.subj_label && p.predicate == g.predicate && p.obj_label == g.obj_label;
}

inline bool hit(const sgg::graph::Triplet& p, const sgg::graph::Triplet& g, sgg::eval::Mode mode, double thresh) {
  if (!labels_match(p, g)) return false;
  if (mode == sgg::eval::Mode::kPhrDet)
    return sgg::iou(sgg::union_box(p.subj_box, p.obj_box), sgg::union_box(g.subj_box, g.obj_box)) >= thresh;
  return sgg::iou(p.subj_box, g.subj_box) >= thresh && sgg::iou(p.obj_box, g.obj_box) >= thresh;
}

// Stable sort by descending score keeps lower indices first among ties.
inline std::vector<std::size_t> ranked(const std::vector<sgg::graph::Triplet>& preds, std::size_t k) {
  std::vector<std::size_t> idx(preds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

// Maximum one-to-one hits over every assignment of ground truth to top-K predictions.
inline std::size_t exhaustive_hits(const std::vector<sgg::graph::Triplet>& preds,
                                   const std::vector<sgg::graph::Triplet>& gts, std::size_t k, sgg::eval::Mode mode,
                                   double thresh = 0.5) {
  const auto top = ranked(preds, k);
  std::vector<bool> used(top.size(), false);
  std::size_t best = 0;
  auto rec = [&](auto&& self, std::size_t g, std::size_t hits) -> void {
    if (g == gts.size()) {
      best = std::max(best, hits);
      return;
    }
    self(self, g + 1, hits);
    for (std::size_t j = 0; j < top.size(); ++j)
      if (!used[j] && hit(preds[top[j]], gts[g], mode, thresh)) {
        used[j] = true;
        self(self, g + 1, hits + 1);
        used[j] = false;
      }
  };
  rec(rec, 0, 0);
  return best;
}

// Small label and box alphabets so that labels collide and boxes overlap.
struct MetricInstance {
  std::vector<sgg::graph::Triplet> preds;
  std::vector<sgg::graph::Triplet> gts;
};

inline MetricInstance random_instance(Gen& g, std::size_t max_gt = 5, std::size_t max_pred = 12) {
  auto box = [&] {
    const double x = static_cast<double>(g.size(0, 3)) * 8.0, y = static_cast<double>(g.size(0, 3)) * 8.0;
    return sgg::Box{x + g.uniform(-2, 2), y + g.uniform(-2, 2), 10 + g.uniform(-3, 3), 10 + g.uniform(-3, 3)};
  };
  auto triplet = [&] {
    sgg::graph::Triplet t;
    t.subj_label = static_cast<int>(g.size(1, 2));
    t.predicate = static_cast<int>(g.size(1, 2));
    t.obj_label = static_cast<int>(g.size(1, 2));
    t.subj_box = box();
    t.obj_box = box();
    t.score = static_cast<double>(g.size(0, 4)) * 0.25;
    return t;
  };
  MetricInstance m;
  const std::size_t ng = g.size(0, max_gt), np = g.size(0, max_pred);
  for (std::size_t i = 0; i < ng; ++i) m.gts.push_back(triplet());
  for (std::size_t i = 0; i < np; ++i) {
    // Half of the predictions perturb a ground-truth triplet.
    if (ng > 0 && g.size(0, 1) == 1) {
      auto t = m.gts[g.size(0, ng - 1)];
      t.subj_box.x += g.uniform(-3, 3);
      t.obj_box.y += g.uniform(-3, 3);
      t.score = static_cast<double>(g.size(0, 4)) * 0.25;
      m.preds.push_back(t);
    } else {
      m.preds.push_back(triplet());
    }
  }
  return m;
}

}  // namespace oracle
