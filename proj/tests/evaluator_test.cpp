#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "sta/evaluator.hpp"

using sta::GroundTruthInstance;
using sta::ImageGroundTruth;
using sta::ImagePredictions;
using sta::MatchCriterion;
using sta::STAPrediction;

namespace {

STAPrediction mk_pred(sta::Box box, int noun, int verb, double ttc, double score,
                      std::size_t nouns = 3, std::size_t verbs = 2) {
  STAPrediction p;
  p.box = box;
  p.noun_probs.assign(nouns, 0.1 / double(nouns - 1));
  p.noun_probs[std::size_t(noun)] = 0.9;
  p.verb_probs.assign(verbs, 0.1 / double(verbs - 1));
  p.verb_probs[std::size_t(verb)] = 0.9;
  p.ttc = ttc;
  p.score = score;
  return p;
}

GroundTruthInstance mk_gt(sta::Box box, int noun, int verb, double ttc) {
  return {box, noun, verb, ttc};
}

// ---- independent oracle -----------------------------------------------
// Re-derives the whole metric from the written protocol with none of the
// library code: own IoU, own ordering, own candidate sets, own PR replay.

double oiou(const sta::Box& a, const sta::Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

int oargmax(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < int(v.size()); ++i)
    if (v[std::size_t(i)] > v[std::size_t(best)]) best = i;
  return best;
}

struct OracleCrit {
  double map = 0;
  std::map<int, double> class_ap;
  std::size_t tp = 0, fp = 0, ignored = 0, missed = 0;
};

OracleCrit oracle_eval(const std::vector<ImagePredictions>& preds,
                       const std::vector<ImageGroundTruth>& gts, bool use_verb, bool use_ttc,
                       double iou_thr, double ttc_tol) {
  struct Flat {
    const STAPrediction* p;
    std::string image;
    std::size_t idx;
  };
  std::vector<Flat> flat;
  for (const auto& g : preds)
    for (std::size_t j = 0; j < g.preds.size(); ++j) flat.push_back({&g.preds[j], g.image_id, j});
  std::sort(flat.begin(), flat.end(), [](const Flat& a, const Flat& b) {
    if (a.p->score != b.p->score) return a.p->score > b.p->score;
    if (a.image != b.image) return a.image < b.image;
    return a.idx < b.idx;
  });

  auto satisfies = [&](const STAPrediction& p, const GroundTruthInstance& g) {
    if (oiou(p.box, g.box) < iou_thr) return false;
    if (oargmax(p.noun_probs) != g.noun) return false;
    if (use_verb && oargmax(p.verb_probs) != g.verb) return false;
    if (use_ttc && std::abs(p.ttc - g.ttc) > ttc_tol) return false;
    return true;
  };

  // per gt: candidate list = first <=5 same-image entries with IoU >= thr,
  // match = first candidate satisfying the criterion
  std::vector<std::size_t> match_count(flat.size(), 0);
  std::vector<bool> exempt(flat.size(), false);
  OracleCrit out;
  std::map<int, std::size_t> num_gt;
  for (const auto& g : gts) {
    for (const auto& inst : g.gts) {
      num_gt[inst.noun]++;
      std::vector<std::size_t> cand;
      for (std::size_t r = 0; r < flat.size() && cand.size() < 5; ++r)
        if (flat[r].image == g.image_id && oiou(flat[r].p->box, inst.box) >= iou_thr)
          cand.push_back(r);
      std::size_t match = flat.size();
      for (std::size_t r : cand)
        if (satisfies(*flat[r].p, inst)) {
          match = r;
          break;
        }
      if (match == flat.size()) {
        out.missed++;
        continue;
      }
      match_count[match]++;
      out.tp++;
      for (std::size_t r : cand) exempt[r] = true;
    }
  }

  // replay the event stream per class
  struct Pt {
    double r, p;
  };
  std::map<int, std::vector<Pt>> pts;
  std::map<int, std::size_t> tp_run, fp_run;
  for (std::size_t r = 0; r < flat.size(); ++r) {
    const int cls = oargmax(flat[r].p->noun_probs);
    if (match_count[r] > 0) {
      tp_run[cls] += match_count[r];
      pts[cls].push_back({double(tp_run[cls]) / double(num_gt.at(cls)),
                          double(tp_run[cls]) / double(tp_run[cls] + fp_run[cls])});
    } else if (exempt[r]) {
      out.ignored++;
    } else {
      out.fp++;
      fp_run[cls]++;
    }
  }

  double ap_sum = 0;
  for (const auto& [cls, n] : num_gt) {
    double ap = 0;
    const auto it = pts.find(cls);
    if (it != pts.end()) {
      const auto& v = it->second;
      double prev = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        double env = v[i].p;
        for (std::size_t j = i + 1; j < v.size(); ++j) env = std::max(env, v[j].p);
        ap += (v[i].r - prev) * env;
        prev = v[i].r;
      }
    }
    out.class_ap[cls] = ap;
    ap_sum += ap;
  }
  out.map = num_gt.empty() ? 0.0 : ap_sum / double(num_gt.size());
  return out;
}

// random scene builder shared by the oracle and property tests
struct Scene {
  std::vector<ImagePredictions> preds;
  std::vector<ImageGroundTruth> gts;
};

Scene random_scene(std::mt19937_64& gen, bool two_images = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scene scene;
  const int images = two_images ? 2 : 1;
  int pred_budget = 8;
  for (int im = 0; im < images; ++im) {
    const std::string id = "img" + std::to_string(im);
    ImageGroundTruth gt_group{id, {}};
    ImagePredictions pred_group{id, {}};
    const int n_gt = int(u(gen) * 5.99) / images;  // <=5 per scene
    for (int i = 0; i < n_gt; ++i) {
      const double cx = 0.2 + 0.6 * u(gen), cy = 0.2 + 0.6 * u(gen);
      const double w = 0.1 + 0.2 * u(gen), h = 0.1 + 0.2 * u(gen);
      gt_group.gts.push_back(mk_gt({cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2},
                                   int(u(gen) * 2.99), int(u(gen) * 1.99), 0.5 + 2 * u(gen)));
    }
    const int n_pred = std::min(pred_budget, int(u(gen) * 8.99) / images);
    pred_budget -= n_pred;
    for (int i = 0; i < n_pred; ++i) {
      sta::Box box;
      double ttc;
      int noun, verb;
      if (!gt_group.gts.empty() && u(gen) < 0.7) {
        // perturbed copy of a random gt; perturbation straddles the IoU gate
        const auto& g = gt_group.gts[std::size_t(u(gen) * double(gt_group.gts.size()) * 0.999)];
        const double jit = 0.15 * u(gen);
        box = {g.box.x1 + jit * (u(gen) - 0.5), g.box.y1 + jit * (u(gen) - 0.5),
               g.box.x2 + jit * (u(gen) - 0.5), g.box.y2 + jit * (u(gen) - 0.5)};
        noun = u(gen) < 0.8 ? g.noun : int(u(gen) * 2.99);
        verb = u(gen) < 0.7 ? g.verb : int(u(gen) * 1.99);
        ttc = g.ttc + 0.6 * (u(gen) - 0.5);
      } else {
        box = {u(gen) * 0.4, u(gen) * 0.4, 0.5 + u(gen) * 0.4, 0.5 + u(gen) * 0.4};
        noun = int(u(gen) * 2.99);
        verb = int(u(gen) * 1.99);
        ttc = 0.5 + 2 * u(gen);
      }
      pred_group.preds.push_back(mk_pred(box, noun, verb, ttc, u(gen)));
    }
    scene.preds.push_back(std::move(pred_group));
    scene.gts.push_back(std::move(gt_group));
  }
  return scene;
}

}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("criterion matching and its boundaries") {
  const auto crits = sta::standard_criteria();
  REQUIRE(crits.size() == 4);
  const GroundTruthInstance gt = mk_gt({0.2, 0.2, 0.6, 0.6}, 1, 0, 1.0);

  const STAPrediction exact = mk_pred({0.2, 0.2, 0.6, 0.6}, 1, 0, 1.0, 0.9);
  for (const auto& c : crits) CHECK(sta::match_instance(exact, gt, c));

  // IoU exactly 0.49 fails, exactly 0.50 passes
  const GroundTruthInstance unit_gt = mk_gt({0.0, 0.0, 1.0, 1.0}, 1, 0, 1.0);
  const STAPrediction iou49 = mk_pred({0.0, 0.0, 1.0, 0.49}, 1, 0, 1.0, 0.9);
  const STAPrediction iou50 = mk_pred({0.0, 0.0, 1.0, 0.5}, 1, 0, 1.0, 0.9);
  CHECK_FALSE(sta::match_instance(iou49, unit_gt, crits[0]));
  CHECK(sta::match_instance(iou50, unit_gt, crits[0]));

  // ttc error exactly at the tolerance is inclusive
  const STAPrediction ttc_edge = mk_pred({0.2, 0.2, 0.6, 0.6}, 1, 0, 1.25, 0.9);
  const STAPrediction ttc_far = mk_pred({0.2, 0.2, 0.6, 0.6}, 1, 0, 1.2500001, 0.9);
  CHECK(sta::match_instance(ttc_edge, gt, crits[2]));
  CHECK_FALSE(sta::match_instance(ttc_far, gt, crits[2]));
  CHECK(sta::match_instance(ttc_far, gt, crits[0]));  // N ignores ttc

  // verb only matters when the criterion says so
  const STAPrediction bad_verb = mk_pred({0.2, 0.2, 0.6, 0.6}, 1, 1, 1.0, 0.9);
  CHECK(sta::match_instance(bad_verb, gt, crits[0]));
  CHECK_FALSE(sta::match_instance(bad_verb, gt, crits[1]));
  CHECK(sta::match_instance(bad_verb, gt, crits[2]));
  CHECK_FALSE(sta::match_instance(bad_verb, gt, crits[3]));

  const STAPrediction bad_noun = mk_pred({0.2, 0.2, 0.6, 0.6}, 0, 0, 1.0, 0.9);
  for (const auto& c : crits) CHECK_FALSE(sta::match_instance(bad_noun, gt, c));
}

TEST_CASE("perfect predictions score one, empty predictions score zero") {
  std::vector<ImageGroundTruth> gts = {
      {"a", {mk_gt({0.1, 0.1, 0.3, 0.3}, 0, 0, 1.0), mk_gt({0.5, 0.5, 0.8, 0.9}, 1, 1, 2.0)}},
      {"b", {mk_gt({0.2, 0.3, 0.5, 0.6}, 2, 0, 0.7)}}};
  std::vector<ImagePredictions> preds;
  for (const auto& g : gts) {
    ImagePredictions group{g.image_id, {}};
    double score = 0.9;
    for (const auto& inst : g.gts) {
      group.preds.push_back(mk_pred(inst.box, inst.noun, inst.verb, inst.ttc, score));
      score -= 0.1;
    }
    preds.push_back(std::move(group));
  }

  const auto report = sta::evaluate(preds, gts, sta::standard_criteria());
  REQUIRE(report.criteria.size() == 4);
  for (const auto& c : report.criteria) {
    CHECK(c.map == 1.0);
    CHECK(c.tp == 3);
    CHECK(c.fp == 0);
    CHECK(c.missed == 0);
  }

  std::vector<ImagePredictions> none = {{"a", {}}, {"b", {}}};
  const auto empty = sta::evaluate(none, gts, sta::standard_criteria());
  for (const auto& c : empty.criteria) {
    CHECK(c.map == 0.0);
    CHECK(c.missed == 3);
    CHECK(c.tp == 0);
  }
  CHECK(empty.num_gt == 3);
}

TEST_CASE("hand-worked scene: one duplicate, one junk prediction") {
  // class 0: matched at rank 1, duplicate ignored; class 1: junk FP ranked
  // above the true positive halves its precision
  std::vector<ImageGroundTruth> gts = {
      {"a", {mk_gt({0.1, 0.1, 0.3, 0.3}, 0, 0, 1.0), mk_gt({0.6, 0.6, 0.8, 0.8}, 1, 1, 2.0)}}};
  std::vector<ImagePredictions> preds = {
      {"a",
       {mk_pred({0.1, 0.1, 0.3, 0.3}, 0, 0, 1.0, 0.9),
        mk_pred({0.11, 0.1, 0.31, 0.3}, 0, 0, 1.0, 0.8),   // duplicate of gt 0
        mk_pred({0.4, 0.1, 0.5, 0.2}, 1, 1, 2.0, 0.85),    // junk, zero IoU with gt 1
        mk_pred({0.6, 0.6, 0.8, 0.8}, 1, 1, 2.0, 0.7)}}};

  const auto report = sta::evaluate(preds, gts, sta::standard_criteria());
  for (const auto& c : report.criteria) {
    CHECK(c.tp == 2);
    CHECK(c.fp == 1);
    CHECK(c.ignored == 1);
    CHECK(c.missed == 0);
    REQUIRE(c.per_class.size() == 2);
    CHECK(c.per_class[0].noun == 0);
    CHECK(c.per_class[0].ap == 1.0);
    CHECK(c.per_class[1].noun == 1);
    CHECK(c.per_class[1].ap == 0.5);
    CHECK(c.map == 0.75);
  }
}

TEST_CASE("at most five overlapping predictions are exempt per ground truth") {
  std::vector<ImageGroundTruth> gts = {{"a", {mk_gt({0.3, 0.3, 0.7, 0.7}, 0, 0, 1.0)}}};
  ImagePredictions group{"a", {}};
  for (int i = 0; i < 7; ++i) {
    // all overlap the gt heavily; only the first matches (others wrong noun
    // would change class streams, keep same noun so they are pure duplicates)
    group.preds.push_back(
        mk_pred({0.3 + 0.001 * i, 0.3, 0.7, 0.7}, 0, 0, 1.0, 0.9 - 0.1 * double(i)));
  }
  const auto report = sta::evaluate({group}, gts, sta::standard_criteria());
  for (const auto& c : report.criteria) {
    CHECK(c.tp == 1);
    CHECK(c.ignored == 4);  // ranks 2..5 sit in the candidate set
    CHECK(c.fp == 2);       // ranks 6..7 fall outside the top five
    CHECK(c.map == 1.0);    // trailing FPs at full recall do not lower AP
  }

  // a same-noun zero-overlap prediction above the match halves the precision
  ImagePredictions flipped = group;
  flipped.preds.push_back(mk_pred({0.0, 0.0, 0.1, 0.1}, 0, 0, 1.0, 0.99));
  const auto worse = sta::evaluate({flipped}, gts, sta::standard_criteria());
  CHECK(worse.criteria[0].map == 0.5);
}

TEST_CASE("candidates of unmatched ground truths are not exempt") {
  // one gt whose overlapping predictions all carry the wrong noun: they must
  // count as false positives, not ignored
  std::vector<ImageGroundTruth> gts = {
      {"a", {mk_gt({0.3, 0.3, 0.7, 0.7}, 0, 0, 1.0)}},
      {"b", {mk_gt({0.2, 0.2, 0.5, 0.5}, 1, 0, 1.0)}}};
  std::vector<ImagePredictions> preds = {
      {"a", {mk_pred({0.3, 0.3, 0.7, 0.7}, 1, 0, 1.0, 0.9)}},
      {"b", {mk_pred({0.2, 0.2, 0.5, 0.5}, 1, 0, 1.0, 0.8)}}};

  const auto report = sta::evaluate(preds, gts, sta::standard_criteria());
  const auto& c = report.criteria[0];
  CHECK(c.tp == 1);       // image b matches
  CHECK(c.fp == 1);       // image a's wrong-noun overlap is a plain FP
  CHECK(c.ignored == 0);
  CHECK(c.missed == 1);
  // class 1 stream: FP at 0.9 then TP at 0.8 -> AP 1/2; class 0 has no tp
  CHECK(c.per_class[0].ap == 0.0);
  CHECK(c.per_class[1].ap == 0.5);
}

TEST_CASE("predictions cannot match ground truth of another image") {
  std::vector<ImageGroundTruth> gts = {{"a", {mk_gt({0.3, 0.3, 0.7, 0.7}, 0, 0, 1.0)}},
                                       {"b", {}}};
  std::vector<ImagePredictions> preds = {{"a", {}},
                                         {"b", {mk_pred({0.3, 0.3, 0.7, 0.7}, 0, 0, 1.0, 0.9)}}};
  const auto report = sta::evaluate(preds, gts, sta::standard_criteria());
  CHECK(report.criteria[0].tp == 0);
  CHECK(report.criteria[0].missed == 1);
  CHECK(report.criteria[0].fp == 1);
  CHECK(report.criteria[0].map == 0.0);
}

TEST_CASE("duplicate image ids are rejected") {
  std::vector<ImageGroundTruth> gts = {{"a", {}}, {"a", {}}};
  CHECK_THROWS_AS(sta::evaluate({}, gts, sta::standard_criteria()), sta::ValidationError);
  std::vector<ImagePredictions> preds = {{"x", {}}, {"x", {}}};
  CHECK_THROWS_AS(sta::evaluate(preds, {}, sta::standard_criteria()), sta::ValidationError);

  auto crits = sta::standard_criteria();
  crits[2].iou_threshold = 0.4;
  CHECK_THROWS_AS(sta::evaluate({}, {}, crits), sta::ConfigError);
}

TEST_CASE("one prediction may satisfy two ground truths") {
  // two same-class gts sharing most of their area; the top prediction is the
  // first satisfying candidate of both
  std::vector<ImageGroundTruth> gts = {
      {"a", {mk_gt({0.30, 0.30, 0.70, 0.70}, 0, 0, 1.0),
             mk_gt({0.32, 0.30, 0.72, 0.70}, 0, 0, 1.0)}}};
  std::vector<ImagePredictions> preds = {{"a", {mk_pred({0.31, 0.30, 0.71, 0.70}, 0, 0, 1.0, 0.9)}}};
  const auto report = sta::evaluate(preds, gts, sta::standard_criteria());
  const auto& c = report.criteria[0];
  CHECK(c.tp == 2);
  CHECK(c.missed == 0);
  CHECK(c.fp == 0);
  CHECK(c.map == 1.0);  // one event carrying both matches at precision 1

  const auto oracle = oracle_eval(preds, gts, false, false, 0.5, 0.25);
  CHECK(oracle.tp == 2);
  CHECK(oracle.map == c.map);
}

TEST_CASE("evaluation is invariant to prediction order and score scaling") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 20; ++trial) {
    Scene scene = random_scene(gen, trial % 3 == 0);
    const auto base = sta::evaluate(scene.preds, scene.gts, sta::standard_criteria());

    Scene shuffled = scene;
    for (auto& g : shuffled.preds) std::shuffle(g.preds.begin(), g.preds.end(), gen);
    const auto after = sta::evaluate(shuffled.preds, shuffled.gts, sta::standard_criteria());
    for (std::size_t i = 0; i < base.criteria.size(); ++i) {
      CHECK(after.criteria[i].map == base.criteria[i].map);
      CHECK(after.criteria[i].tp == base.criteria[i].tp);
      CHECK(after.criteria[i].fp == base.criteria[i].fp);
    }

    Scene scaled = scene;
    for (auto& g : scaled.preds)
      for (auto& p : g.preds) p.score *= 3.75;
    const auto scaled_report = sta::evaluate(scaled.preds, scaled.gts, sta::standard_criteria());
    for (std::size_t i = 0; i < base.criteria.size(); ++i)
      CHECK(scaled_report.criteria[i].map == base.criteria[i].map);
  }
}

TEST_CASE("a trailing zero-overlap prediction never raises any map") {
  std::mt19937_64 gen(555);
  for (int trial = 0; trial < 30; ++trial) {
    Scene scene = random_scene(gen);
    const auto before = sta::evaluate(scene.preds, scene.gts, sta::standard_criteria());

    double lowest = 1.0;
    for (const auto& g : scene.preds)
      for (const auto& p : g.preds) lowest = std::min(lowest, p.score);
    scene.preds[0].preds.push_back(
        mk_pred({0.95, 0.95, 0.99, 0.99}, trial % 3, 0, 1.0, lowest - 0.1));
    const auto after = sta::evaluate(scene.preds, scene.gts, sta::standard_criteria());
    for (std::size_t i = 0; i < before.criteria.size(); ++i)
      CHECK(after.criteria[i].map <= before.criteria[i].map);
  }
}

TEST_CASE("criterion nesting holds on random scenes") {
  std::mt19937_64 gen(777);
  for (int trial = 0; trial < 200; ++trial) {
    Scene scene = random_scene(gen, trial % 4 == 0);
    const auto report = sta::evaluate(scene.preds, scene.gts, sta::standard_criteria());
    const double n = report.criteria[0].map, nv = report.criteria[1].map,
                 nt = report.criteria[2].map, all = report.criteria[3].map;
    CHECK(all <= nv);
    CHECK(all <= nt);
    CHECK(nv <= n);
    CHECK(nt <= n);
  }
}

TEST_CASE("evaluate equals the exhaustive oracle on random small scenes") {
  std::mt19937_64 gen(31337);
  const auto crits = sta::standard_criteria();
  for (int trial = 0; trial < 300; ++trial) {
    Scene scene = random_scene(gen, trial % 5 == 0);
    const auto report = sta::evaluate(scene.preds, scene.gts, crits);
    for (std::size_t i = 0; i < crits.size(); ++i) {
      const auto oracle = oracle_eval(scene.preds, scene.gts, crits[i].require_verb,
                                      crits[i].require_ttc, 0.5, 0.25);
      INFO("trial ", trial, " criterion ", crits[i].name);
      CHECK(report.criteria[i].map == oracle.map);
      CHECK(report.criteria[i].tp == oracle.tp);
      CHECK(report.criteria[i].fp == oracle.fp);
      CHECK(report.criteria[i].ignored == oracle.ignored);
      CHECK(report.criteria[i].missed == oracle.missed);
      for (const auto& entry : report.criteria[i].per_class)
        CHECK(entry.ap == oracle.class_ap.at(entry.noun));
    }
  }
}

TEST_CASE("json files group by image and round-trip through the evaluator") {
  const std::string pred_text = R"([
    {"image_id":"b","box":[0.2,0.2,0.5,0.5],"noun_probs":[0.1,0.8,0.1],"verb_probs":[0.9,0.1],"ttc":1.0,"score":0.8},
    {"image_id":"a","box":[0.3,0.3,0.7,0.7],"noun_probs":[0.7,0.2,0.1],"verb_probs":[0.2,0.8],"ttc":2.0,"score":0.9},
    {"image_id":"b","box":[0.1,0.1,0.2,0.2],"noun_probs":[0.1,0.1,0.8],"verb_probs":[0.9,0.1],"ttc":0.5,"score":0.3}
  ])";
  const auto preds = sta::parse_predictions_json(pred_text);
  REQUIRE(preds.size() == 2);
  CHECK(preds[0].image_id == "b");
  CHECK(preds[0].preds.size() == 2);
  CHECK(preds[1].image_id == "a");
  CHECK(preds[0].preds[0].score == 0.8);
  CHECK(preds[0].preds[1].score == 0.3);  // file order within the image kept

  const std::string gt_text = R"([
    {"image_id":"a","box":[0.3,0.3,0.7,0.7],"noun":0,"verb":1,"ttc":2.0},
    {"image_id":"b","box":[0.2,0.2,0.5,0.5],"noun":1,"verb":0,"ttc":1.0}
  ])";
  const auto gts = sta::parse_ground_truth_json(gt_text);
  REQUIRE(gts.size() == 2);

  const auto report = sta::evaluate(preds, gts, sta::standard_criteria());
  CHECK(report.criteria[3].tp == 2);
  CHECK(report.criteria[3].map == 1.0);
  CHECK(report.num_images == 2);
  CHECK(report.num_predictions == 3);

  // serialize and re-parse both files: identical evaluation
  const auto preds2 = sta::parse_predictions_json(sta::predictions_to_json(preds));
  const auto gts2 = sta::parse_ground_truth_json(sta::ground_truth_to_json(gts));
  const auto report2 = sta::evaluate(preds2, gts2, sta::standard_criteria());
  for (std::size_t i = 0; i < report.criteria.size(); ++i)
    CHECK(report2.criteria[i].map == report.criteria[i].map);

  // report json carries the versioned schema
  const std::string rj = sta::report_to_json(report);
  CHECK(rj.find("\"format_version\": 1") != std::string::npos);
  CHECK(rj.find("\"N+TTC\"") != std::string::npos);
  CHECK(rj.find("\"per_class\"") != std::string::npos);

  CHECK_THROWS_AS(sta::parse_predictions_json("{}"), sta::ValidationError);
  CHECK_THROWS_AS(sta::parse_predictions_json("[{\"image_id\":\"a\",\"box\":[0,1]}]"),
                  sta::ValidationError);
  CHECK_THROWS_AS(sta::parse_ground_truth_json("nope"), sta::ValidationError);
}

}  // TEST_SUITE
