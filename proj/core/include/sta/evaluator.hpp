#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sta/errors.hpp"
#include "sta/head.hpp"

// Top-5 mean average precision over four match criteria (N, N+V, N+TTC, All).
//
// Protocol, fixed here and pinned exactly by the exhaustive oracle tests:
//  - global prediction order: score desc, then image_id asc, then position in
//    the image's prediction list asc;
//  - per ground truth, the candidate set is the <=5 best-ordered predictions
//    of the same image with IoU >= iou_threshold (class-agnostic);
//  - each ground truth matches the first candidate satisfying the criterion,
//    independently of other ground truths (one prediction may therefore match
//    several ground truths; it counts one true-positive unit per match);
//  - an unmatched prediction is ignored when it lies in the candidate set of
//    some matched ground truth, otherwise it is a false positive;
//  - per noun class, precision after an event is matched/(matched + false
//    positives) and recall is matched/num_gt, both in global order; AP is the
//    all-point interpolated area; mAP averages classes that appear in the
//    ground truth.
//
// Matching per ground truth instead of 1-1 greedy consumption is what makes
// criterion nesting (All <= N+V <= N and All <= N+TTC <= N) hold on every
// input: a stricter criterion can only move a ground truth's match later in
// the order or drop it, and can only grow the false-positive set.
namespace sta {

struct MatchCriterion {
  std::string name = "N";
  bool require_verb = false;
  bool require_ttc = false;
  double iou_threshold = 0.5;
  double ttc_tolerance = 0.25;
};

// The four standard criteria in nesting order: N, N+V, N+TTC, All.
std::vector<MatchCriterion> standard_criteria(double iou_threshold = 0.5,
                                              double ttc_tolerance = 0.25);

bool match_instance(const STAPrediction& pred, const GroundTruthInstance& gt,
                    const MatchCriterion& crit);

struct ImagePredictions {
  std::string image_id;
  std::vector<STAPrediction> preds;
};

struct ImageGroundTruth {
  std::string image_id;
  std::vector<GroundTruthInstance> gts;
};

struct ClassAP {
  int noun = 0;
  std::size_t num_gt = 0;
  double ap = 0.0;
};

struct CriterionReport {
  std::string name;
  double map = 0.0;
  std::vector<ClassAP> per_class;  // ascending noun id, classes present in gt
  std::size_t tp = 0;              // matched ground-truth instances
  std::size_t fp = 0;              // false-positive predictions
  std::size_t ignored = 0;         // exempted predictions
  std::size_t missed = 0;          // unmatched ground-truth instances
};

struct EvalReport {
  std::vector<CriterionReport> criteria;
  std::size_t num_images = 0;
  std::size_t num_predictions = 0;
  std::size_t num_gt = 0;
};

// Duplicate image ids within either grouped input are rejected.
EvalReport evaluate(const std::vector<ImagePredictions>& preds,
                    const std::vector<ImageGroundTruth>& gts,
                    const std::vector<MatchCriterion>& criteria);

// Flat JSON arrays of per-instance records, grouped by image_id in file
// order. Predictions: {image_id, box:[x1,y1,x2,y2], noun_probs, verb_probs,
// ttc, score}; ground truth: {image_id, box, noun, verb, ttc}.
std::vector<ImagePredictions> parse_predictions_json(const std::string& text);
std::vector<ImageGroundTruth> parse_ground_truth_json(const std::string& text);
std::vector<ImagePredictions> load_predictions(const std::string& path);
std::vector<ImageGroundTruth> load_ground_truth(const std::string& path);

std::string predictions_to_json(const std::vector<ImagePredictions>& preds);
std::string ground_truth_to_json(const std::vector<ImageGroundTruth>& gts);
std::string report_to_json(const EvalReport& report);

}  // namespace sta
