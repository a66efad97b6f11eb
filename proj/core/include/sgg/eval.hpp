#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sgg/graphgen.hpp"

namespace sgg::eval {

enum class Mode { kPhrDet, kSgGen };
const char* mode_name(Mode m);

// All three labels must agree. PhrDet: IoU of the subject/object union boxes
// >= thresh. SGGen: subject IoU >= thresh and object IoU >= thresh.
bool match_triplet(const graph::Triplet& pred, const graph::Triplet& gt, Mode mode, double iou_thresh = 0.5);

enum class Matching {
  kOptimal,  // maximum one-to-one assignment between top-K predictions and ground truth
  kGreedy,   // predictions in rank order each take the first unmatched ground truth they match
};

// Indices of the top-K predictions by score, ties by lower index.
std::vector<std::size_t> top_k(const std::vector<graph::Triplet>& preds, std::size_t k);

struct ImageRecall {
  std::size_t hits = 0;
  std::size_t gt = 0;
  double recall = 1.0;  // 1.0 for empty ground truth
};

ImageRecall recall_at_k(const std::vector<graph::Triplet>& preds, const std::vector<graph::Triplet>& gts,
                        std::size_t k, Mode mode, double iou_thresh = 0.5, Matching matching = Matching::kOptimal);

struct EvalOptions {
  std::vector<std::size_t> ks{50, 100};
  double iou_thresh = 0.5;
  Matching matching = Matching::kOptimal;
  bool macro = true;  // per-image mean; false pools hits over all ground truth
};

struct EvalResult {
  // recall[mode][K]
  std::map<Mode, std::map<std::size_t, double>> recall;
  std::map<Mode, std::map<std::size_t, std::vector<ImageRecall>>> per_image;
  std::size_t images = 0;
  std::size_t empty_gt_images = 0;
};

// Predictions and ground truth paired by image id; every ground-truth id must
// have a prediction record (DataError otherwise).
EvalResult evaluate(const std::vector<graph::GraphRecord>& preds, const std::vector<graph::GraphRecord>& gts,
                    const EvalOptions& opts);

// "key: value" lines, e.g. "PhrDet.R@50: 1".
std::string format_report(const EvalResult& result, const EvalOptions& opts);
// mode,K,recall rows.
std::string format_csv(const EvalResult& result);

}  // namespace sgg::eval
