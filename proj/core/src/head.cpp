#include "sta/head.hpp"

#include <algorithm>
#include <cmath>

namespace sta {

namespace {

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double sigmoid_d(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_d(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

std::vector<double> softmax_d(const double* z, std::size_t n) {
  double m = z[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
  std::vector<double> p(n);
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::exp(z[i] - m);
    s += p[i];
  }
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<DecodedCell> decode_level(const std::vector<double>& raw, std::size_t h,
                                      std::size_t w, std::size_t level, const HeadConfig& cfg) {
  const std::size_t ch = cfg.channels();
  std::vector<DecodedCell> out;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double* cell = raw.data() + (r * w + c) * ch;
      const double score = sigmoid_d(cell[0]);
      if (score < cfg.score_threshold) continue;
      DecodedCell d;
      d.level = level;
      d.row = r;
      d.col = c;
      d.score = score;
      const double cx = (double(c) + 0.5 + std::tanh(kBoxGain * cell[1])) / double(w);
      const double cy = (double(r) + 0.5 + std::tanh(kBoxGain * cell[2])) / double(h);
      const double bw = kBoxSizeCap * sigmoid_d(kBoxGain * cell[3]) / double(w);
      const double bh = kBoxSizeCap * sigmoid_d(kBoxGain * cell[4]) / double(h);
      d.box.x1 = clampd(cx - 0.5 * bw, 0.0, 1.0 - 1e-4);
      d.box.x2 = clampd(cx + 0.5 * bw, d.box.x1 + 1e-4, 1.0);
      d.box.y1 = clampd(cy - 0.5 * bh, 0.0, 1.0 - 1e-4);
      d.box.y2 = clampd(cy + 0.5 * bh, d.box.y1 + 1e-4, 1.0);
      d.ttc = softplus_d(cell[5]) + cfg.ttc_eps;
      d.noun_probs = softmax_d(cell + 6, cfg.num_nouns);
      d.verb_probs = softmax_d(cell + 6 + cfg.num_nouns, cfg.num_verbs);
      out.push_back(std::move(d));
    }
  return out;
}

void sort_candidates(std::vector<DecodedCell>& cells) {
  std::sort(cells.begin(), cells.end(), [](const DecodedCell& a, const DecodedCell& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.level != b.level) return a.level < b.level;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
}

std::vector<DecodedCell> nms_keep(const std::vector<DecodedCell>& sorted, double iou_threshold,
                                  std::size_t max_detections) {
  std::vector<DecodedCell> kept;
  for (const auto& cand : sorted) {
    if (kept.size() == max_detections) break;
    bool suppressed = false;
    for (const auto& k : kept)
      if (box_iou(cand.box, k.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

std::vector<STAPrediction> strip_provenance(const std::vector<DecodedCell>& cells) {
  std::vector<STAPrediction> out;
  out.reserve(cells.size());
  for (const auto& c : cells) {
    STAPrediction p;
    p.box = c.box;
    p.noun_probs = c.noun_probs;
    p.verb_probs = c.verb_probs;
    p.ttc = c.ttc;
    p.score = c.score;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace sta
