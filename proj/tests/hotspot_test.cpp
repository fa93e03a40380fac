#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "sta/hotspot.hpp"

using sta::FrameTracks;
using sta::HandObjectTracks;
using sta::Hotspot;
using sta::HotspotConfig;
using sta::TrackPoint;

namespace {

TrackPoint pt(double x, double y) { return {x, y, true}; }
TrackPoint gone() { return {}; }

struct RefKernel {
  double x, y, amp;
};

// independent rasterizer: place kernels by hand, sum, divide by max
std::vector<double> ref_raster(const std::vector<RefKernel>& kernels, std::size_t h,
                               std::size_t w, double sigma) {
  std::vector<double> map(h * w, 1.0);
  if (kernels.empty()) return map;
  double mx = 0;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double cy = (double(r) + 0.5) / double(h);
      const double cx = (double(c) + 0.5) / double(w);
      double v = 0;
      for (const auto& k : kernels)
        v += k.amp * std::exp(-((cx - k.x) * (cx - k.x) + (cy - k.y) * (cy - k.y)) /
                              (2 * sigma * sigma));
      map[r * w + c] = v;
      mx = std::max(mx, v);
    }
  for (auto& v : map) v /= mx;
  return map;
}

void check_map(const Hotspot& hs, const std::vector<double>& ref, double tol) {
  REQUIRE(hs.map.size() == ref.size());
  double worst = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(hs.map[i] - ref[i]));
  CHECK(worst < tol);
}

sta::STAPrediction pred_at(double cx, double cy, double score, double ttc = 1.0) {
  sta::STAPrediction p;
  p.box = {cx - 0.05, cy - 0.05, cx + 0.05, cy + 0.05};
  p.noun_probs = {1.0};
  p.verb_probs = {1.0};
  p.ttc = ttc;
  p.score = score;
  return p;
}

}  // namespace

TEST_SUITE("hotspot") {

TEST_CASE("no tracks gives an all-ones map") {
  HotspotConfig cfg;
  const Hotspot empty = sta::predict_hotspot({}, cfg);
  CHECK(empty.map == std::vector<double>(256, 1.0));

  HandObjectTracks absent;
  absent.frames.resize(4);
  absent.frames[1].hands = {gone(), gone()};
  absent.frames[2].objects = {gone()};
  const Hotspot hs = sta::predict_hotspot(absent, cfg);
  CHECK(hs.map == std::vector<double>(256, 1.0));
}

TEST_CASE("static centered hand peaks at the center and is symmetric") {
  HandObjectTracks tracks;
  tracks.frames.resize(3);
  for (auto& fr : tracks.frames) fr.hands = {pt(0.5, 0.5)};

  HotspotConfig odd;
  odd.height = 15;
  odd.width = 15;
  const Hotspot hs = sta::predict_hotspot(tracks, odd);
  const auto arg = std::max_element(hs.map.begin(), hs.map.end()) - hs.map.begin();
  CHECK(arg == 7 * 15 + 7);
  CHECK(hs.map[std::size_t(arg)] == 1.0);

  HotspotConfig cfg;
  const Hotspot sq = sta::predict_hotspot(tracks, cfg);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) {
      CHECK(std::abs(sq.at(r, c) - sq.at(c, r)) < 1e-12);          // x<->y reflection
      CHECK(std::abs(sq.at(r, c) - sq.at(r, 15 - c)) < 1e-12);     // mirror in x
      CHECK(sq.at(r, c) >= 0.0);
      CHECK(sq.at(r, c) <= 1.0);
    }
}

TEST_CASE("moving hand extrapolates one step and matches the scalar oracle") {
  HandObjectTracks tracks;
  tracks.frames.resize(2);
  tracks.frames[0].hands = {pt(0.2, 0.5)};
  tracks.frames[1].hands = {pt(0.4, 0.5)};

  HotspotConfig cfg;
  const Hotspot hs = sta::predict_hotspot(tracks, cfg);
  check_map(hs, ref_raster({{0.6, 0.5, 1.0}}, 16, 16, cfg.sigma), 1e-9);
}

TEST_CASE("velocity comes from the last two observed positions across gaps") {
  HandObjectTracks gappy;
  gappy.frames.resize(4);
  gappy.frames[0].hands = {pt(0.2, 0.5)};
  gappy.frames[1].hands = {gone()};
  gappy.frames[2].hands = {pt(0.4, 0.5)};
  gappy.frames[3].hands = {gone()};

  HandObjectTracks dense;
  dense.frames.resize(2);
  dense.frames[0].hands = {pt(0.2, 0.5)};
  dense.frames[1].hands = {pt(0.4, 0.5)};

  HotspotConfig cfg;
  const Hotspot a = sta::predict_hotspot(gappy, cfg);
  const Hotspot b = sta::predict_hotspot(dense, cfg);
  CHECK(a.map == b.map);
}

TEST_CASE("a single observation stays put") {
  HandObjectTracks tracks;
  tracks.frames.resize(3);
  tracks.frames[1].hands = {pt(0.3, 0.7)};

  HotspotConfig cfg;
  const Hotspot hs = sta::predict_hotspot(tracks, cfg);
  check_map(hs, ref_raster({{0.3, 0.7, 1.0}}, 16, 16, cfg.sigma), 1e-9);
}

TEST_CASE("objects contribute at half weight from their last position") {
  HandObjectTracks tracks;
  tracks.frames.resize(2);
  tracks.frames[0].objects = {pt(0.3, 0.3)};
  tracks.frames[1].hands = {pt(0.7, 0.7)};
  tracks.frames[1].objects = {pt(0.32, 0.3)};

  HotspotConfig cfg;
  const Hotspot hs = sta::predict_hotspot(tracks, cfg);
  check_map(hs, ref_raster({{0.7, 0.7, 1.0}, {0.32, 0.3, 0.5}}, 16, 16, cfg.sigma), 1e-9);
  // hand kernel dominates the object kernel
  CHECK(hs.sample(0.7, 0.7) > hs.sample(0.32, 0.3));
}

TEST_CASE("several hands and objects match the oracle") {
  HandObjectTracks tracks;
  tracks.frames.resize(3);
  tracks.frames[0].hands = {pt(0.1, 0.1), pt(0.9, 0.2)};
  tracks.frames[1].hands = {pt(0.2, 0.2), gone()};
  tracks.frames[2].hands = {pt(0.3, 0.3), pt(0.8, 0.4)};
  tracks.frames[2].objects = {pt(0.5, 0.9)};

  // hand 0: (0.2,0.2)->(0.3,0.3) => (0.4,0.4); hand 1: (0.9,0.2)->(0.8,0.4) => (0.7,0.6)
  HotspotConfig cfg;
  const Hotspot hs = sta::predict_hotspot(tracks, cfg);
  check_map(hs,
            ref_raster({{0.4, 0.4, 1.0}, {0.7, 0.6, 1.0}, {0.5, 0.9, 0.5}}, 16, 16, cfg.sigma),
            1e-9);
}

TEST_CASE("flipping track x coordinates flips the raster") {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HandObjectTracks tracks;
  tracks.frames.resize(4);
  for (auto& fr : tracks.frames) {
    for (int j = 0; j < 2; ++j)
      fr.hands.push_back(u(gen) < 0.8 ? pt(u(gen), u(gen)) : gone());
    fr.objects.push_back(u(gen) < 0.8 ? pt(u(gen), u(gen)) : gone());
  }
  HandObjectTracks flipped = tracks;
  for (auto& fr : flipped.frames) {
    for (auto& p : fr.hands)
      if (p.present) p.x = 1.0 - p.x;
    for (auto& p : fr.objects)
      if (p.present) p.x = 1.0 - p.x;
  }

  HotspotConfig cfg;
  const Hotspot a = sta::predict_hotspot(tracks, cfg);
  const Hotspot b = sta::predict_hotspot(flipped, cfg);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c)
      CHECK(std::abs(a.at(r, c) - b.at(r, 15 - c)) < 1e-9);
}

TEST_CASE("out-of-range coordinates are rejected") {
  HandObjectTracks tracks;
  tracks.frames.resize(1);
  tracks.frames[0].hands = {pt(1.2, 0.5)};
  CHECK_THROWS_AS(sta::predict_hotspot(tracks, {}), sta::ValidationError);
  tracks.frames[0].hands = {pt(0.5, -0.01)};
  CHECK_THROWS_AS(sta::predict_hotspot(tracks, {}), sta::ValidationError);
  tracks.frames[0].hands.clear();
  tracks.frames[0].objects = {pt(0.5, 1.01)};
  CHECK_THROWS_AS(sta::predict_hotspot(tracks, {}), sta::ValidationError);

  HotspotConfig bad;
  bad.width = 0;
  CHECK_THROWS_AS(sta::predict_hotspot({}, bad), sta::ConfigError);
  bad = {};
  bad.sigma = 0.0;
  CHECK_THROWS_AS(sta::predict_hotspot({}, bad), sta::ConfigError);
}

TEST_CASE("bilinear sampling agrees with hand arithmetic") {
  Hotspot hs;
  hs.height = 2;
  hs.width = 2;
  hs.map = {0.0, 1.0, 0.5, 0.25};

  CHECK(hs.sample(0.25, 0.25) == 0.0);  // exact cell centers
  CHECK(hs.sample(0.75, 0.25) == 1.0);
  CHECK(hs.sample(0.5, 0.5) == doctest::Approx(0.4375).epsilon(1e-12));  // mean of all four
  CHECK(hs.sample(0.0, 0.0) == 0.0);    // clamped into the corner cell
  CHECK(hs.sample(1.0, 1.0) == 0.25);
  CHECK(hs.sample(0.5, 0.25) == doctest::Approx(0.5).epsilon(1e-12));    // midpoint of top row
}

TEST_CASE("gamma one and uniform maps leave scores alone") {
  Hotspot uniform;
  uniform.height = 4;
  uniform.width = 4;
  uniform.map.assign(16, 1.0);

  Hotspot bumpy = uniform;
  bumpy.map[5] = 0.2;
  bumpy.map[10] = 0.7;

  const std::vector<sta::STAPrediction> preds = {pred_at(0.3, 0.3, 0.9, 1.5),
                                                 pred_at(0.6, 0.6, 0.4, 2.5)};
  const auto same_gamma = sta::reweigh_scores(preds, bumpy, 1.0);
  REQUIRE(same_gamma.size() == 2);
  CHECK(same_gamma[0].score == 0.9);
  CHECK(same_gamma[1].score == 0.4);
  CHECK(same_gamma[0].ttc == 1.5);

  for (double gamma : {0.0, 0.3, 0.5}) {
    const auto same_map = sta::reweigh_scores(preds, uniform, gamma);
    CHECK(same_map[0].score == 0.9);
    CHECK(same_map[1].score == 0.4);
  }
}

TEST_CASE("re-weighting flips the ranking in the worked example") {
  Hotspot hs;
  hs.height = 1;
  hs.width = 2;
  hs.map = {0.1, 1.0};

  // center x=0.1 samples the left cell (0.1), x=0.9 the right cell (1.0)
  const std::vector<sta::STAPrediction> preds = {pred_at(0.1, 0.5, 0.8, 1.0),
                                                 pred_at(0.9, 0.5, 0.6, 2.0)};
  const auto out = sta::reweigh_scores(preds, hs, 0.5);
  REQUIRE(out.size() == 2);
  CHECK(out[0].score == doctest::Approx(0.60).epsilon(1e-12));
  CHECK(out[0].ttc == 2.0);
  CHECK(out[1].score == doctest::Approx(0.44).epsilon(1e-12));
  CHECK(out[1].ttc == 1.0);
  // geometry and classes pass through untouched
  CHECK(out[1].box.x1 == preds[0].box.x1);
  CHECK(out[1].noun_probs == preds[0].noun_probs);
}

TEST_CASE("re-weighted score is monotone in the hotspot value") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const double gamma = u(gen);
    const double score = 0.1 + 0.9 * u(gen);
    double h1 = u(gen), h2 = u(gen);
    if (h1 > h2) std::swap(h1, h2);

    Hotspot a, b;
    a.height = a.width = b.height = b.width = 1;
    a.map = {h1};
    b.map = {h2};
    const std::vector<sta::STAPrediction> preds = {pred_at(0.5, 0.5, score)};
    const double s1 = sta::reweigh_scores(preds, a, gamma)[0].score;
    const double s2 = sta::reweigh_scores(preds, b, gamma)[0].score;
    CHECK(s1 <= s2);
    CHECK(s1 > 0.0);
    CHECK(s1 <= score);
    CHECK(s2 <= score);
  }
}

TEST_CASE("equal re-weighted scores keep their original order") {
  Hotspot uniform;
  uniform.height = uniform.width = 1;
  uniform.map = {1.0};
  const std::vector<sta::STAPrediction> preds = {
      pred_at(0.2, 0.2, 0.5, 1.0), pred_at(0.8, 0.8, 0.5, 2.0), pred_at(0.5, 0.5, 0.5, 3.0)};
  const auto out = sta::reweigh_scores(preds, uniform, 0.3);
  REQUIRE(out.size() == 3);
  CHECK(out[0].ttc == 1.0);
  CHECK(out[1].ttc == 2.0);
  CHECK(out[2].ttc == 3.0);
}

TEST_CASE("tracks survive a json round trip") {
  HandObjectTracks tracks;
  tracks.frames.resize(2);
  tracks.frames[0].hands = {pt(0.25, 0.5), gone()};
  tracks.frames[0].objects = {pt(0.125, 0.75)};
  tracks.frames[1].hands = {pt(0.375, 0.5), pt(0.875, 0.0625)};

  const std::string text = sta::tracks_to_json(tracks);
  const HandObjectTracks back = sta::parse_tracks_json(text);
  REQUIRE(back.frames.size() == 2);
  CHECK(back.frames[0].hands[0].x == 0.25);
  CHECK(back.frames[0].hands[0].present);
  CHECK_FALSE(back.frames[0].hands[1].present);
  CHECK(back.frames[0].objects[0].y == 0.75);
  CHECK(back.frames[1].hands[1].x == 0.875);

  const Hotspot a = sta::predict_hotspot(tracks, {});
  const Hotspot b = sta::predict_hotspot(back, {});
  CHECK(a.map == b.map);

  const std::string path = "tracks_roundtrip.json";
  {
    std::ofstream out(path);
    out << text;
  }
  const HandObjectTracks from_file = sta::load_tracks(path);
  std::remove(path.c_str());
  CHECK(sta::predict_hotspot(from_file, {}).map == a.map);

  CHECK_THROWS_AS(sta::parse_tracks_json("not json"), sta::ValidationError);
  CHECK_THROWS_AS(sta::parse_tracks_json("{\"frames\": 3}"), sta::ValidationError);
  CHECK_THROWS_AS(sta::parse_tracks_json("{\"frames\": [{\"hands\": [[0.1]]}]}"),
                  sta::ValidationError);
}

}  // TEST_SUITE
