#include "sta/hotspot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sta {

namespace {

struct Kernel {
  double x, y, amp;
};

void check_point(const TrackPoint& p, const char* kind, std::size_t frame) {
  if (!p.present) return;
  if (p.x < 0 || p.x > 1 || p.y < 0 || p.y > 1)
    throw ValidationError(std::string(kind) + " coordinate (" + std::to_string(p.x) + ", " +
                          std::to_string(p.y) + ") in frame " + std::to_string(frame) +
                          " lies outside [0,1]");
}

}  // namespace

double Hotspot::sample(double x, double y) const {
  double gx = x * double(width) - 0.5;
  double gy = y * double(height) - 0.5;
  gx = std::clamp(gx, 0.0, double(width - 1));
  gy = std::clamp(gy, 0.0, double(height - 1));
  const std::size_t x0 = std::size_t(gx);
  const std::size_t y0 = std::size_t(gy);
  const std::size_t x1 = std::min(x0 + 1, width - 1);
  const std::size_t y1 = std::min(y0 + 1, height - 1);
  const double fx = gx - double(x0);
  const double fy = gy - double(y0);
  const double top = at(y0, x0) + fx * (at(y0, x1) - at(y0, x0));
  const double bot = at(y1, x0) + fx * (at(y1, x1) - at(y1, x0));
  return top + fy * (bot - top);
}

Hotspot predict_hotspot(const HandObjectTracks& tracks, const HotspotConfig& cfg) {
  if (cfg.height == 0 || cfg.width == 0) throw ConfigError("hotspot raster must be non-empty");
  if (cfg.sigma <= 0) throw ConfigError("hotspot kernel width must be positive");

  std::size_t num_hands = 0, num_objects = 0;
  for (std::size_t f = 0; f < tracks.frames.size(); ++f) {
    const auto& fr = tracks.frames[f];
    for (const auto& p : fr.hands) check_point(p, "hand", f);
    for (const auto& p : fr.objects) check_point(p, "object", f);
    num_hands = std::max(num_hands, fr.hands.size());
    num_objects = std::max(num_objects, fr.objects.size());
  }

  std::vector<Kernel> kernels;
  for (std::size_t j = 0; j < num_hands; ++j) {
    // last two observed positions of this hand, in frame order
    bool has_last = false, has_prev = false;
    TrackPoint last{}, prev{};
    for (const auto& fr : tracks.frames) {
      if (j >= fr.hands.size() || !fr.hands[j].present) continue;
      prev = last;
      has_prev = has_last;
      last = fr.hands[j];
      has_last = true;
    }
    if (!has_last) continue;
    double ex = last.x, ey = last.y;
    if (has_prev) {
      ex += cfg.horizon * (last.x - prev.x);
      ey += cfg.horizon * (last.y - prev.y);
    }
    kernels.push_back({ex, ey, 1.0});
  }
  for (std::size_t j = 0; j < num_objects; ++j) {
    bool seen = false;
    TrackPoint last{};
    for (const auto& fr : tracks.frames) {
      if (j >= fr.objects.size() || !fr.objects[j].present) continue;
      last = fr.objects[j];
      seen = true;
    }
    if (seen) kernels.push_back({last.x, last.y, cfg.object_weight});
  }

  Hotspot hs;
  hs.height = cfg.height;
  hs.width = cfg.width;
  hs.map.assign(cfg.height * cfg.width, 1.0);
  if (kernels.empty()) return hs;

  const double inv2s2 = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  double peak = 0;
  for (std::size_t r = 0; r < cfg.height; ++r) {
    const double cy = (double(r) + 0.5) / double(cfg.height);
    for (std::size_t c = 0; c < cfg.width; ++c) {
      const double cx = (double(c) + 0.5) / double(cfg.width);
      double v = 0;
      for (const auto& k : kernels) {
        const double dx = cx - k.x, dy = cy - k.y;
        v += k.amp * std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
      hs.map[r * cfg.width + c] = v;
      peak = std::max(peak, v);
    }
  }
  if (peak <= 0) throw NumericError("hotspot rasterization produced no mass");
  for (auto& v : hs.map) v /= peak;
  return hs;
}

std::vector<STAPrediction> reweigh_scores(const std::vector<STAPrediction>& preds,
                                          const Hotspot& hotspot, double gamma) {
  std::vector<STAPrediction> out = preds;
  for (auto& p : out) {
    const double cx = 0.5 * (p.box.x1 + p.box.x2);
    const double cy = 0.5 * (p.box.y1 + p.box.y2);
    p.score *= gamma + (1.0 - gamma) * hotspot.sample(cx, cy);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const STAPrediction& a, const STAPrediction& b) { return a.score > b.score; });
  return out;
}

HandObjectTracks parse_tracks_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("frames") || !j["frames"].is_array())
    throw ValidationError("tracks document must be an object with a frames array");

  auto parse_points = [](const nlohmann::json& arr) {
    std::vector<TrackPoint> pts;
    for (const auto& e : arr) {
      TrackPoint p;
      if (e.is_null()) {
        pts.push_back(p);
        continue;
      }
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ValidationError("track entries must be [x, y] pairs or null");
      p.x = e[0].get<double>();
      p.y = e[1].get<double>();
      p.present = true;
      pts.push_back(p);
    }
    return pts;
  };

  HandObjectTracks tracks;
  for (const auto& fj : j["frames"]) {
    if (!fj.is_object()) throw ValidationError("each frame must be an object");
    FrameTracks fr;
    if (fj.contains("hands")) fr.hands = parse_points(fj["hands"]);
    if (fj.contains("objects")) fr.objects = parse_points(fj["objects"]);
    tracks.frames.push_back(std::move(fr));
  }
  return tracks;
}

HandObjectTracks load_tracks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_tracks_json(ss.str());
}

std::string tracks_to_json(const HandObjectTracks& tracks) {
  nlohmann::json j;
  auto& frames = j["frames"] = nlohmann::json::array();
  auto dump_points = [](const std::vector<TrackPoint>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pts) {
      if (p.present)
        arr.push_back({p.x, p.y});
      else
        arr.push_back(nullptr);
    }
    return arr;
  };
  for (const auto& fr : tracks.frames)
    frames.push_back({{"hands", dump_points(fr.hands)}, {"objects", dump_points(fr.objects)}});
  return j.dump();
}

}  // namespace sta
