#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sta/fusion.hpp"
#include "sta/params.hpp"
#include "sta/tensor.hpp"

// Dense anchor-free prediction head over the fused pyramid, plus its training
// loss. Raw per-cell channels, in order:
//   [0] objectness logit   [1..4] tx ty tw th   [5] ttc raw
//   [6 .. 6+N_n) noun logits   [6+N_n .. 6+N_n+N_v) verb logits
// Box decode at cell (row, col) of an h x w level, bounded so the center
// stays within one cell of its anchor and the size below kBoxSizeCap cells
// (unbounded offsets let the box drift out of the IoU loss basin for good;
// the gain shortens the raw-unit travel the optimizer has to cover):
//   cx = (col + 0.5 + tanh(g tx)) / w,      cy = (row + 0.5 + tanh(g ty)) / h
//   bw = kBoxSizeCap sigmoid(g tw) / w,     bh = kBoxSizeCap sigmoid(g th) / h
namespace sta {

inline constexpr double kBoxSizeCap = 2.0;
inline constexpr double kBoxGain = 3.0;

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

double box_iou(const Box& a, const Box& b);

struct STAPrediction {
  Box box;
  std::vector<double> noun_probs;
  std::vector<double> verb_probs;
  double ttc = 0;
  double score = 0;
};

struct GroundTruthInstance {
  Box box;
  int noun = 0;
  int verb = 0;
  double ttc = 0;
};

struct HeadConfig {
  std::size_t num_nouns = 6;
  std::size_t num_verbs = 4;
  std::size_t pyramid_levels = 3;
  double score_threshold = 0.05;
  double nms_iou = 0.5;  // candidates overlapping a kept box more than this are dropped
  std::size_t max_detections = 20;
  double lambda_box = 1.0;
  double lambda_noun = 1.0;
  double lambda_verb = 1.0;
  double lambda_ttc = 1.0;
  double ttc_eps = 1e-3;

  std::size_t channels() const { return 6 + num_nouns + num_verbs; }
};

// A decoded cell before NMS; (level, row, col) doubles as the score tie-break.
struct DecodedCell {
  std::size_t level = 0, row = 0, col = 0;
  double score = 0;
  Box box;
  std::vector<double> noun_probs;
  std::vector<double> verb_probs;
  double ttc = 0;
};

// Scalar decode of one raw level map (h*w*channels doubles, row-major cells).
// Applies the score threshold; boxes are clamped into the unit square with a
// minimum side of 1e-4 so the type invariants always hold.
std::vector<DecodedCell> decode_level(const std::vector<double>& raw, std::size_t h,
                                      std::size_t w, std::size_t level, const HeadConfig& cfg);

// Score descending, ties by (level, row, col): a strict total order.
void sort_candidates(std::vector<DecodedCell>& cells);

// Greedy class-agnostic NMS over sorted candidates, then truncation.
std::vector<DecodedCell> nms_keep(const std::vector<DecodedCell>& sorted, double iou_threshold,
                                  std::size_t max_detections);

std::vector<STAPrediction> strip_provenance(const std::vector<DecodedCell>& cells);

template <typename S>
class PredictionHead {
public:
  PredictionHead(ParamStore<S>& store, const HeadConfig& cfg, std::size_t d,
                 const std::string& prefix = "head", bool zero_init = false)
      : cfg_(cfg),
        out_(store, prefix + ".out", d, cfg.channels(),
             zero_init ? Init::Zeros : Init::XavierUniform) {}

  // One shared linear map per cell, all levels; stays on the gradient tape.
  std::vector<Tensor<S>> raw_maps(const FeaturePyramid<S>& pyr) const {
    if (pyr.levels.size() != cfg_.pyramid_levels)
      throw DimensionError("pyramid has " + std::to_string(pyr.levels.size()) +
                           " levels, head expects " + std::to_string(cfg_.pyramid_levels));
    std::vector<Tensor<S>> maps;
    maps.reserve(pyr.levels.size());
    for (const auto& level : pyr.levels) {
      const std::size_t h = level.extent(0), w = level.extent(1), d = level.extent(2);
      Tensor<S> raw = out_(reshape(level, {h * w, d}));
      maps.push_back(reshape(raw, {h, w, cfg_.channels()}));
    }
    return maps;
  }

  std::vector<STAPrediction> predict(const FeaturePyramid<S>& pyr) const {
    return predictions_from_raw(raw_maps(pyr), cfg_);
  }

  const HeadConfig& config() const { return cfg_; }

private:
  HeadConfig cfg_;
  LinearLayer<S> out_;
};

template <typename S>
std::vector<STAPrediction> predictions_from_raw(const std::vector<Tensor<S>>& raw_maps,
                                                const HeadConfig& cfg) {
  if (raw_maps.size() != cfg.pyramid_levels)
    throw DimensionError("got " + std::to_string(raw_maps.size()) + " raw maps, config says " +
                         std::to_string(cfg.pyramid_levels));
  std::vector<DecodedCell> cells;
  for (std::size_t l = 0; l < raw_maps.size(); ++l) {
    const auto& m = raw_maps[l];
    if (m.extent(2) != cfg.channels())
      throw DimensionError("raw map has " + std::to_string(m.extent(2)) + " channels, expected " +
                           std::to_string(cfg.channels()));
    std::vector<double> raw(m.data().begin(), m.data().end());
    auto decoded = decode_level(raw, m.extent(0), m.extent(1), l, cfg);
    cells.insert(cells.end(), decoded.begin(), decoded.end());
  }
  sort_candidates(cells);
  return strip_provenance(nms_keep(cells, cfg.nms_iou, cfg.max_detections));
}

template <typename S>
struct StaLossParts {
  Tensor<S> total, objectness, box, noun, verb, ttc;
};

namespace detail {

// log(sum(exp(z))) with the max folded in as a constant; the gradient is the
// exact softmax either way.
template <typename S>
Tensor<S> logsumexp(const Tensor<S>& z) {
  double m = z.data()[0];
  for (S v : z.data()) m = std::max(m, double(v));
  return add_scalar(log(sum(exp(add_scalar(z, static_cast<S>(-m))))), static_cast<S>(m));
}

template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, std::size_t cls) {
  return sub(logsumexp(logits), gather(logits, 0, {cls}));
}

}  // namespace detail

// BCE on objectness is averaged over every cell of every level; the box,
// class, and time terms are summed over assigned cells (one per target per
// level, first target wins a contested cell).
template <typename S>
StaLossParts<S> sta_loss(const std::vector<Tensor<S>>& raw_maps,
                         const std::vector<GroundTruthInstance>& targets, const HeadConfig& cfg) {
  for (const auto& gt : targets) {
    if (!(gt.box.x2 > gt.box.x1) || !(gt.box.y2 > gt.box.y1))
      throw ValidationError("degenerate target box");
    if (gt.box.x1 < 0 || gt.box.y1 < 0 || gt.box.x2 > 1 || gt.box.y2 > 1)
      throw ValidationError("target box leaves the unit square");
    if (!(gt.ttc > 0)) throw ValidationError("time to contact must be positive");
    if (gt.noun < 0 || std::size_t(gt.noun) >= cfg.num_nouns)
      throw ValidationError("noun id " + std::to_string(gt.noun) + " out of range");
    if (gt.verb < 0 || std::size_t(gt.verb) >= cfg.num_verbs)
      throw ValidationError("verb id " + std::to_string(gt.verb) + " out of range");
  }

  if (raw_maps.empty()) throw ContractError("loss needs at least one raw map");

  const std::size_t nn = cfg.num_nouns, nv = cfg.num_verbs;
  StaLossParts<S> parts;
  parts.box = Tensor<S>::zeros({1});
  parts.noun = Tensor<S>::zeros({1});
  parts.verb = Tensor<S>::zeros({1});
  parts.ttc = Tensor<S>::zeros({1});

  Tensor<S> bce_sum = Tensor<S>::zeros({1});
  std::size_t total_cells = 0;

  for (std::size_t l = 0; l < raw_maps.size(); ++l) {
    const auto& m = raw_maps[l];
    if (m.extent(2) != cfg.channels())
      throw DimensionError("raw map has " + std::to_string(m.extent(2)) + " channels, expected " +
                           std::to_string(cfg.channels()));
    const std::size_t h = m.extent(0), w = m.extent(1);
    total_cells += h * w;
    Tensor<S> flat = reshape(m, {h * w, cfg.channels()});
    Tensor<S> z = slice(flat, 1, 0, 1);  // [h*w, 1]

    // center-cell assignment at this level
    std::vector<S> ydata(h * w, S(0));
    std::vector<std::pair<std::size_t, std::size_t>> assigned;  // (cell, target)
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const auto& gt = targets[k];
      const double cx = 0.5 * (gt.box.x1 + gt.box.x2);
      const double cy = 0.5 * (gt.box.y1 + gt.box.y2);
      const std::size_t col = std::min<std::size_t>(w - 1, std::size_t(cx * double(w)));
      const std::size_t row = std::min<std::size_t>(h - 1, std::size_t(cy * double(h)));
      const std::size_t cell = row * w + col;
      if (ydata[cell] != S(0)) continue;
      ydata[cell] = S(1);
      assigned.emplace_back(cell, k);
    }
    Tensor<S> y = Tensor<S>::from_data({h * w, 1}, ydata);
    bce_sum = add(bce_sum, sum(sub(softplus(z), mul(y, z))));

    for (const auto& [cell, k] : assigned) {
      const auto& gt = targets[k];
      const std::size_t row = cell / w, col = cell % w;
      Tensor<S> cr = gather(flat, 0, {cell});  // [1, C]
      auto ch = [&](std::size_t c0, std::size_t len) {
        return reshape(slice(cr, 1, c0, len), {len});
      };
      // tanh(x) spelled as 2 sigmoid(2x) - 1 to stay inside the op set
      auto tanh_t = [](Tensor<S> x) {
        return add_scalar(mul_scalar(sigmoid(mul_scalar(x, S(2))), S(2)), S(-1));
      };
      const S g = static_cast<S>(kBoxGain);
      Tensor<S> cxp = mul_scalar(
          add_scalar(tanh_t(mul_scalar(ch(1, 1), g)), static_cast<S>(col + 0.5)),
          static_cast<S>(1.0 / double(w)));
      Tensor<S> cyp = mul_scalar(
          add_scalar(tanh_t(mul_scalar(ch(2, 1), g)), static_cast<S>(row + 0.5)),
          static_cast<S>(1.0 / double(h)));
      Tensor<S> bw =
          mul_scalar(sigmoid(mul_scalar(ch(3, 1), g)), static_cast<S>(kBoxSizeCap / double(w)));
      Tensor<S> bh =
          mul_scalar(sigmoid(mul_scalar(ch(4, 1), g)), static_cast<S>(kBoxSizeCap / double(h)));
      Tensor<S> half = Tensor<S>::scalar(S(0.5));
      Tensor<S> x1 = sub(cxp, mul(half, bw)), x2 = add(cxp, mul(half, bw));
      Tensor<S> y1 = sub(cyp, mul(half, bh)), y2 = add(cyp, mul(half, bh));

      Tensor<S> zero = Tensor<S>::zeros({1});
      Tensor<S> iw = maximum(sub(minimum(x2, Tensor<S>::scalar(S(gt.box.x2))),
                                 maximum(x1, Tensor<S>::scalar(S(gt.box.x1)))),
                             zero);
      Tensor<S> ih = maximum(sub(minimum(y2, Tensor<S>::scalar(S(gt.box.y2))),
                                 maximum(y1, Tensor<S>::scalar(S(gt.box.y1)))),
                             zero);
      Tensor<S> inter = mul(iw, ih);
      Tensor<S> area_p = mul(sub(x2, x1), sub(y2, y1));
      const double area_g = (gt.box.x2 - gt.box.x1) * (gt.box.y2 - gt.box.y1);
      Tensor<S> uni = sub(add_scalar(area_p, static_cast<S>(area_g)), inter);
      // distance-IoU: the center-distance penalty over the enclosing diagonal
      // stays smooth and nonzero when the boxes barely overlap, where plain
      // 1-IoU goes flat and Adam stalls
      Tensor<S> ew = sub(maximum(x2, Tensor<S>::scalar(S(gt.box.x2))),
                         minimum(x1, Tensor<S>::scalar(S(gt.box.x1))));
      Tensor<S> eh = sub(maximum(y2, Tensor<S>::scalar(S(gt.box.y2))),
                         minimum(y1, Tensor<S>::scalar(S(gt.box.y1))));
      Tensor<S> diag2 = add(mul(ew, ew), mul(eh, eh));
      const double gcx = 0.5 * (gt.box.x1 + gt.box.x2);
      const double gcy = 0.5 * (gt.box.y1 + gt.box.y2);
      Tensor<S> ox = add_scalar(cxp, static_cast<S>(-gcx));
      Tensor<S> oy = add_scalar(cyp, static_cast<S>(-gcy));
      Tensor<S> dist2 = add(mul(ox, ox), mul(oy, oy));
      Tensor<S> diou = sub(div(inter, uni), div(dist2, diag2));
      parts.box = add(parts.box, sub(Tensor<S>::scalar(S(1)), diou));

      parts.noun = add(parts.noun, detail::cross_entropy(ch(6, nn), std::size_t(gt.noun)));
      parts.verb = add(parts.verb, detail::cross_entropy(ch(6 + nn, nv), std::size_t(gt.verb)));

      Tensor<S> ttc_pred = add_scalar(softplus(ch(5, 1)), static_cast<S>(cfg.ttc_eps));
      Tensor<S> diff = add_scalar(log(ttc_pred), static_cast<S>(-std::log(gt.ttc)));
      parts.ttc = add(parts.ttc, smooth_l1(diff));
    }
  }

  parts.objectness = mul_scalar(bce_sum, static_cast<S>(1.0 / double(total_cells)));
  parts.total = add(parts.objectness,
                    add(mul_scalar(parts.box, static_cast<S>(cfg.lambda_box)),
                        add(mul_scalar(parts.noun, static_cast<S>(cfg.lambda_noun)),
                            add(mul_scalar(parts.verb, static_cast<S>(cfg.lambda_verb)),
                                mul_scalar(parts.ttc, static_cast<S>(cfg.lambda_ttc))))));
  return parts;
}

}  // namespace sta
