#include "sta/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sta {

namespace {

std::size_t argmax_index(const std::vector<double>& v) {
  return std::size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ValidationError(std::string(what) + " is not finite");
}

struct Entry {
  const STAPrediction* pred;
  const std::string* image_id;
  std::size_t image;      // index into the grouped prediction list
  std::size_t input_idx;  // position within the image's list
  int noun = 0;
};

bool order_before(const Entry& a, const Entry& b) {
  if (a.pred->score != b.pred->score) return a.pred->score > b.pred->score;
  if (*a.image_id != *b.image_id) return *a.image_id < *b.image_id;
  return a.input_idx < b.input_idx;
}

}  // namespace

std::vector<MatchCriterion> standard_criteria(double iou_threshold, double ttc_tolerance) {
  std::vector<MatchCriterion> crits(4);
  crits[0].name = "N";
  crits[1].name = "N+V";
  crits[1].require_verb = true;
  crits[2].name = "N+TTC";
  crits[2].require_ttc = true;
  crits[3].name = "All";
  crits[3].require_verb = true;
  crits[3].require_ttc = true;
  for (auto& c : crits) {
    c.iou_threshold = iou_threshold;
    c.ttc_tolerance = ttc_tolerance;
  }
  return crits;
}

bool match_instance(const STAPrediction& pred, const GroundTruthInstance& gt,
                    const MatchCriterion& crit) {
  if (box_iou(pred.box, gt.box) < crit.iou_threshold) return false;
  if (int(argmax_index(pred.noun_probs)) != gt.noun) return false;
  if (crit.require_verb && int(argmax_index(pred.verb_probs)) != gt.verb) return false;
  if (crit.require_ttc && std::abs(pred.ttc - gt.ttc) > crit.ttc_tolerance) return false;
  return true;
}

EvalReport evaluate(const std::vector<ImagePredictions>& preds,
                    const std::vector<ImageGroundTruth>& gts,
                    const std::vector<MatchCriterion>& criteria) {
  for (std::size_t i = 1; i < criteria.size(); ++i)
    if (criteria[i].iou_threshold != criteria[0].iou_threshold)
      throw ConfigError("criteria must share one IoU threshold per evaluation run");

  std::set<std::string> seen;
  for (const auto& g : preds)
    if (!seen.insert(g.image_id).second)
      throw ValidationError("duplicate image id in predictions: " + g.image_id);
  std::set<std::string> images = seen;
  seen.clear();
  for (const auto& g : gts) {
    if (!seen.insert(g.image_id).second)
      throw ValidationError("duplicate image id in ground truth: " + g.image_id);
    images.insert(g.image_id);
  }

  // flatten predictions and fix the global order
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < preds[i].preds.size(); ++j) {
      const STAPrediction& p = preds[i].preds[j];
      if (p.noun_probs.empty() || p.verb_probs.empty())
        throw ValidationError("prediction without class distributions in image " +
                              preds[i].image_id);
      check_finite(p.score, "prediction score");
      check_finite(p.ttc, "prediction ttc");
      entries.push_back({&p, &preds[i].image_id, i, j, int(argmax_index(p.noun_probs))});
    }
  }
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return order_before(entries[a], entries[b]); });
  std::vector<std::size_t> rank_of(entries.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank_of[order[r]] = r;

  // per-image entry lists in global order
  std::map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t r = 0; r < order.size(); ++r)
    by_image[*entries[order[r]].image_id].push_back(order[r]);

  // flatten ground truth and validate
  struct GtRef {
    const GroundTruthInstance* gt;
    const std::string* image_id;
    std::vector<std::size_t> cand;  // entry indices, best first, <= 5
  };
  std::vector<GtRef> gtrefs;
  std::size_t total_gt = 0;
  std::map<int, std::size_t> gt_per_class;
  const double iou_thr = criteria.empty() ? 0.5 : criteria.front().iou_threshold;
  for (const auto& g : gts) {
    for (const auto& inst : g.gts) {
      if (inst.noun < 0 || inst.verb < 0) throw ValidationError("ground-truth class ids must be >= 0");
      check_finite(inst.ttc, "ground-truth ttc");
      GtRef ref{&inst, &g.image_id, {}};
      auto it = by_image.find(g.image_id);
      if (it != by_image.end()) {
        for (std::size_t e : it->second) {
          if (ref.cand.size() == 5) break;
          if (box_iou(entries[e].pred->box, inst.box) >= iou_thr) ref.cand.push_back(e);
        }
      }
      gtrefs.push_back(std::move(ref));
      ++total_gt;
      gt_per_class[inst.noun]++;
    }
  }

  EvalReport report;
  report.num_images = images.size();
  report.num_predictions = entries.size();
  report.num_gt = total_gt;

  for (const auto& crit : criteria) {
    std::vector<std::size_t> matches_of(entries.size(), 0);
    std::vector<bool> exempt(entries.size(), false);
    std::size_t matched_gt = 0;
    for (auto& ref : gtrefs) {
      std::size_t match = entries.size();
      for (std::size_t e : ref.cand) {
        if (match_instance(*entries[e].pred, *ref.gt, crit)) {
          match = e;
          break;
        }
      }
      if (match == entries.size()) continue;
      matches_of[match]++;
      ++matched_gt;
      for (std::size_t e : ref.cand) exempt[e] = true;
    }

    CriterionReport cr;
    cr.name = crit.name;
    cr.tp = matched_gt;
    cr.missed = total_gt - matched_gt;

    // per-class event streams in global order
    struct Point {
      double recall, precision;
    };
    std::map<int, std::vector<Point>> points;
    std::map<int, std::size_t> tp_count, fp_count;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const std::size_t e = order[r];
      const int cls = entries[e].noun;
      if (matches_of[e] > 0) {
        const auto n_c = gt_per_class.at(cls);  // matches imply gt of this class
        tp_count[cls] += matches_of[e];
        points[cls].push_back({double(tp_count[cls]) / double(n_c),
                               double(tp_count[cls]) / double(tp_count[cls] + fp_count[cls])});
      } else if (exempt[e]) {
        cr.ignored++;
      } else {
        cr.fp++;
        fp_count[cls]++;
      }
    }

    double ap_sum = 0;
    for (const auto& [cls, n_c] : gt_per_class) {
      ClassAP entry;
      entry.noun = cls;
      entry.num_gt = n_c;
      auto it = points.find(cls);
      if (it != points.end()) {
        auto& pts = it->second;
        // all-point interpolation: running max of precision from the right
        for (std::size_t i = pts.size(); i-- > 1;)
          pts[i - 1].precision = std::max(pts[i - 1].precision, pts[i].precision);
        double prev_recall = 0;
        for (const auto& pt : pts) {
          entry.ap += (pt.recall - prev_recall) * pt.precision;
          prev_recall = pt.recall;
        }
      }
      ap_sum += entry.ap;
      cr.per_class.push_back(entry);
    }
    cr.map = gt_per_class.empty() ? 0.0 : ap_sum / double(gt_per_class.size());
    report.criteria.push_back(std::move(cr));
  }
  return report;
}

namespace {

Box parse_box(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw ValidationError("box must be [x1, y1, x2, y2]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

nlohmann::json parse_array(const std::string& text, const char* what) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array())
    throw ValidationError(std::string(what) + " must be a JSON array");
  return j;
}

std::string file_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<ImagePredictions> parse_predictions_json(const std::string& text) {
  const nlohmann::json arr = parse_array(text, "prediction file");
  std::vector<ImagePredictions> out;
  std::map<std::string, std::size_t> index;
  for (const auto& e : arr) {
    if (!e.is_object()) throw ValidationError("prediction entries must be objects");
    const std::string id = e.at("image_id").get<std::string>();
    auto [it, fresh] = index.try_emplace(id, out.size());
    if (fresh) out.push_back({id, {}});
    STAPrediction p;
    p.box = parse_box(e.at("box"));
    p.noun_probs = e.at("noun_probs").get<std::vector<double>>();
    p.verb_probs = e.at("verb_probs").get<std::vector<double>>();
    p.ttc = e.at("ttc").get<double>();
    p.score = e.at("score").get<double>();
    out[it->second].preds.push_back(std::move(p));
  }
  return out;
}

std::vector<ImageGroundTruth> parse_ground_truth_json(const std::string& text) {
  const nlohmann::json arr = parse_array(text, "ground-truth file");
  std::vector<ImageGroundTruth> out;
  std::map<std::string, std::size_t> index;
  for (const auto& e : arr) {
    if (!e.is_object()) throw ValidationError("ground-truth entries must be objects");
    const std::string id = e.at("image_id").get<std::string>();
    auto [it, fresh] = index.try_emplace(id, out.size());
    if (fresh) out.push_back({id, {}});
    GroundTruthInstance g;
    g.box = parse_box(e.at("box"));
    g.noun = e.at("noun").get<int>();
    g.verb = e.at("verb").get<int>();
    g.ttc = e.at("ttc").get<double>();
    out[it->second].gts.push_back(g);
  }
  return out;
}

std::vector<ImagePredictions> load_predictions(const std::string& path) {
  return parse_predictions_json(file_text(path));
}

std::vector<ImageGroundTruth> load_ground_truth(const std::string& path) {
  return parse_ground_truth_json(file_text(path));
}

std::string predictions_to_json(const std::vector<ImagePredictions>& preds) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : preds)
    for (const auto& p : g.preds)
      arr.push_back({{"image_id", g.image_id},
                     {"box", {p.box.x1, p.box.y1, p.box.x2, p.box.y2}},
                     {"noun_probs", p.noun_probs},
                     {"verb_probs", p.verb_probs},
                     {"ttc", p.ttc},
                     {"score", p.score}});
  return arr.dump(2);
}

std::string ground_truth_to_json(const std::vector<ImageGroundTruth>& gts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : gts)
    for (const auto& inst : g.gts)
      arr.push_back({{"image_id", g.image_id},
                     {"box", {inst.box.x1, inst.box.y1, inst.box.x2, inst.box.y2}},
                     {"noun", inst.noun},
                     {"verb", inst.verb},
                     {"ttc", inst.ttc}});
  return arr.dump(2);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["num_images"] = report.num_images;
  j["num_predictions"] = report.num_predictions;
  j["num_gt"] = report.num_gt;
  auto& crits = j["criteria"] = nlohmann::json::array();
  for (const auto& c : report.criteria) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["map"] = c.map;
    cj["tp"] = c.tp;
    cj["fp"] = c.fp;
    cj["ignored"] = c.ignored;
    cj["missed"] = c.missed;
    auto& pc = cj["per_class"] = nlohmann::json::array();
    for (const auto& e : c.per_class)
      pc.push_back({{"noun", e.noun}, {"num_gt", e.num_gt}, {"ap", e.ap}});
    crits.push_back(std::move(cj));
  }
  return j.dump(2);
}

}  // namespace sta
