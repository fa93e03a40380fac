#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sta/errors.hpp"
#include "sta/head.hpp"

// Geometric interaction-hotspot predictor: hand tracks are extrapolated at
// constant velocity to the anticipation horizon, Gaussian kernels are placed
// at the extrapolated hand endpoints and at the last observed object centers,
// and the kernel sum is rasterized and max-normalized. Prediction scores are
// then damped by an affine gate on the hotspot value at their box centers.
namespace sta {

struct TrackPoint {
  double x = 0;
  double y = 0;
  bool present = false;
};

struct FrameTracks {
  std::vector<TrackPoint> hands;
  std::vector<TrackPoint> objects;
};

// Track identity is positional: hands[j] refers to the same hand in every
// frame, with absence encoded by the present flag (null in the JSON form).
struct HandObjectTracks {
  std::vector<FrameTracks> frames;
};

struct HotspotConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  double sigma = 0.1;          // kernel width in normalized units
  double horizon = 1.0;        // extrapolation steps past the last observation
  double object_weight = 0.5;  // kernel amplitude for objects (hands get 1)
  double gamma = 0.5;          // affine floor of the score gate
};

struct Hotspot {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> map;  // row-major, values in [0,1]

  double at(std::size_t row, std::size_t col) const { return map[row * width + col]; }
  // Bilinear sample at normalized (x, y), border-clamped past cell centers.
  double sample(double x, double y) const;
};

Hotspot predict_hotspot(const HandObjectTracks& tracks, const HotspotConfig& cfg);

// s' = s * (gamma + (1-gamma) * H(center)); output re-sorted by new score,
// equal scores keeping their original order. Boxes, classes and ttc pass
// through untouched.
std::vector<STAPrediction> reweigh_scores(const std::vector<STAPrediction>& preds,
                                          const Hotspot& hotspot, double gamma);

HandObjectTracks parse_tracks_json(const std::string& text);
HandObjectTracks load_tracks(const std::string& path);
std::string tracks_to_json(const HandObjectTracks& tracks);

}  // namespace sta
