#include "sta/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "sta/rng.hpp"
#include "sta/tensor_io.hpp"

namespace sta {

namespace {

struct Color {
  float r, g, b;
};

// look-alike pairs across scenes: nouns 0/2/4 are reds, 1/3/5 are blues
constexpr std::array<Color, 6> kNounColors = {{{1.00f, 0.15f, 0.10f},
                                               {0.10f, 0.20f, 1.00f},
                                               {0.80f, 0.25f, 0.10f},
                                               {0.10f, 0.45f, 0.85f},
                                               {0.92f, 0.10f, 0.32f},
                                               {0.30f, 0.10f, 0.90f}}};
constexpr std::array<Color, 3> kSceneTint = {{{0.16f, 0.16f, 0.16f},
                                              {0.26f, 0.20f, 0.12f},
                                              {0.12f, 0.22f, 0.18f}}};
const std::array<std::array<const char*, 3>, 3> kSceneWords = {{{"sink", "kettle", "rinse"},
                                                                {"board", "knife", "chop"},
                                                                {"stove", "pan", "stir"}}};
constexpr std::array<const char*, 4> kFillers = {"the", "a", "then", "now"};
constexpr std::array<std::array<double, 2>, 4> kVerbDir = {{{0, 0}, {1, 0}, {0, 1}, {-1, 0}}};

void fill_rect(std::vector<float>& px, std::size_t size, const Box& box, Color c) {
  for (std::size_t y = 0; y < size; ++y) {
    const double cy = (double(y) + 0.5) / double(size);
    if (cy < box.y1 || cy > box.y2) continue;
    for (std::size_t x = 0; x < size; ++x) {
      const double cx = (double(x) + 0.5) / double(size);
      if (cx < box.x1 || cx > box.x2) continue;
      float* p = &px[(y * size + x) * 3];
      p[0] = c.r;
      p[1] = c.g;
      p[2] = c.b;
    }
  }
}

bool rects_apart(const Box& a, const Box& b, double margin) {
  return a.x2 + margin < b.x1 || b.x2 + margin < a.x1 || a.y2 + margin < b.y1 ||
         b.y2 + margin < a.y1;
}

}  // namespace

std::vector<SyntheticScenario> generate_dataset(const DatasetSpec& spec) {
  if (spec.num_nouns > 6 || spec.num_nouns < 2 || spec.num_nouns % 2 != 0)
    throw ConfigError("noun vocabulary must be 2, 4 or 6 (two colors per scene)");
  if (spec.num_verbs > 4 || spec.num_verbs < 1)
    throw ConfigError("verb vocabulary must be between 1 and 4 motion patterns");
  if (spec.frames < 2) throw ConfigError("need at least two frames to plant motion");
  if (spec.frame_size < 16) throw ConfigError("frame edge must be at least 16 pixels");

  const std::size_t scenes = spec.num_nouns / 2;
  Rng master(spec.seed);
  std::vector<SyntheticScenario> out;
  out.reserve(spec.num_scenarios);

  for (std::size_t i = 0; i < spec.num_scenarios; ++i) {
    Rng rng = master.fork("scn" + std::to_string(i));
    SyntheticScenario s;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "scn%04zu", i);
    s.image_id = idbuf;

    // round-robin over nouns keeps class frequencies balanced by construction
    const int noun = int(i % spec.num_nouns);
    const int scene = noun / 2;
    s.scene_id = scene;

    int verb = 0;
    if (spec.num_verbs > 1) {
      if (rng.uniform() < 0.6) {
        const std::size_t offset = rng.uniform() < 0.5 ? 0 : 1;
        verb = int((std::size_t(scene) + offset) % spec.num_verbs);
      } else {
        verb = int(rng.uniform_int(spec.num_verbs));
      }
    }

    const double t_end = double(spec.frames - 1);
    const auto dir = kVerbDir[std::size_t(verb)];
    double d_end = 0, bw = 0, bh = 0, tx = 0, ty = 0, hx_end = 0, hy_end = 0;
    // The hand ends up at a uniformly random bearing from the target no matter
    // which way it moved, so a single frame never gives the verb away; only
    // the motion across frames does. Only the last two hand positions have to
    // sit inside the frame (motion stays observable; earlier frames may show
    // the hand entering from outside); demanding the whole path in-frame would
    // squeeze the end position into a verb-dependent band and leak again.
    double ax = 0, ay = 0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      d_end = rng.uniform(0.12, 0.28);
      bw = rng.uniform(0.15, 0.25);
      bh = rng.uniform(0.15, 0.25);
      const double theta = rng.uniform(0.0, 6.283185307179586);
      ax = std::cos(theta);
      ay = std::sin(theta);
      tx = rng.uniform(0.2, 0.8);
      ty = rng.uniform(0.2, 0.8);
      hx_end = tx - ax * d_end;
      hy_end = ty - ay * d_end;
      const double hx_prev = hx_end - dir[0] * kHandSpeed;
      const double hy_prev = hy_end - dir[1] * kHandSpeed;
      const bool ok = tx - bw / 2 >= 0.03 && tx + bw / 2 <= 0.97 && ty - bh / 2 >= 0.03 &&
                      ty + bh / 2 <= 0.97 && hx_end >= 0.06 && hx_end <= 0.94 && hy_end >= 0.06 &&
                      hy_end <= 0.94 && hx_prev >= 0.06 && hx_prev <= 0.94 && hy_prev >= 0.06 &&
                      hy_prev <= 0.94;
      if (ok) break;
    }
    const double hx0 = hx_end - dir[0] * kHandSpeed * t_end;
    const double hy0 = hy_end - dir[1] * kHandSpeed * t_end;

    const Box target{tx - bw / 2, ty - bh / 2, tx + bw / 2, ty + bh / 2};
    s.gt.push_back({target, noun, verb, d_end / kHandSpeed});

    // distractors: the scene's partner color, planted clear of the hand's whole
    // path (plus one extrapolated step) so they sit off the hotspot
    struct Planted {
      Box box;
      int noun;
    };
    std::vector<Planted> rects = {{target, noun}};
    const int partner = scene * 2 + (noun % 2 == 0 ? 1 : 0);
    const std::size_t n_distract = rng.uniform_int(3);
    for (std::size_t d = 0; d < n_distract; ++d) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double dw = rng.uniform(0.15, 0.25), dh = rng.uniform(0.15, 0.25);
        const double dx = rng.uniform(0.03 + dw / 2, 0.97 - dw / 2);
        const double dy = rng.uniform(0.03 + dh / 2, 0.97 - dh / 2);
        bool near_path = false;
        for (std::size_t f = 0; f <= spec.frames; ++f) {
          const double px = hx0 + dir[0] * kHandSpeed * double(f);
          const double py = hy0 + dir[1] * kHandSpeed * double(f);
          if (std::hypot(dx - px, dy - py) < 0.30) near_path = true;
        }
        if (near_path) continue;
        const Box cand{dx - dw / 2, dy - dh / 2, dx + dw / 2, dy + dh / 2};
        bool clear = true;
        for (const auto& r : rects)
          if (!rects_apart(cand, r.box, 0.02)) clear = false;
        if (!clear) continue;
        rects.push_back({cand, partner});
        break;
      }
    }

    // rasterize frames: tinted noisy background, rectangles, moving hand
    const std::size_t sz = spec.frame_size;
    std::vector<float> video(spec.frames * sz * sz * 3);
    const Color tint = kSceneTint[std::size_t(scene)];
    for (std::size_t f = 0; f < spec.frames; ++f) {
      std::vector<float> frame(sz * sz * 3);
      for (std::size_t p = 0; p < sz * sz; ++p) {
        frame[p * 3 + 0] = tint.r + float(rng.uniform(-0.02, 0.02));
        frame[p * 3 + 1] = tint.g + float(rng.uniform(-0.02, 0.02));
        frame[p * 3 + 2] = tint.b + float(rng.uniform(-0.02, 0.02));
      }
      for (auto it = rects.rbegin(); it != rects.rend(); ++it)
        fill_rect(frame, sz, it->box, kNounColors[std::size_t(it->noun)]);
      const double hx = hx0 + dir[0] * kHandSpeed * double(f);
      const double hy = hy0 + dir[1] * kHandSpeed * double(f);
      const double hr = 2.5 / double(sz);
      fill_rect(frame, sz, {hx - hr, hy - hr, hx + hr, hy + hr}, {1.0f, 1.0f, 1.0f});
      for (auto& v : frame) v = std::clamp(v, 0.0f, 1.0f);
      std::copy(frame.begin(), frame.end(), video.begin() + std::ptrdiff_t(f * sz * sz * 3));

      FrameTracks ft;
      // out-of-frame positions carry no observation, so no coordinates either
      const bool in_frame = hx >= 0.0 && hx <= 1.0 && hy >= 0.0 && hy <= 1.0;
      ft.hands.push_back(in_frame ? TrackPoint{hx, hy, true} : TrackPoint{});
      for (const auto& r : rects)
        ft.objects.push_back({(r.box.x1 + r.box.x2) / 2, (r.box.y1 + r.box.y2) / 2, true});
      s.tracks.frames.push_back(std::move(ft));
    }
    s.video = TensorF::from_data({spec.frames, sz, sz, 3}, std::move(video));

    const std::vector<float>& vdata = s.video.data();
    std::vector<float> last(vdata.end() - std::ptrdiff_t(sz * sz * 3), vdata.end());
    const TensorF last_frame = TensorF::from_data({sz, sz, 3}, std::move(last));
    s.image = bilinear_resize(last_frame, 2 * sz, 2 * sz).detach();

    const auto& words = kSceneWords[std::size_t(scene)];
    s.narration = {words[0], words[1], words[2], kFillers[rng.uniform_int(4)]};
    out.push_back(std::move(s));
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<SyntheticScenario>& scenarios) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out.write("STDS", 4);
  const std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint32_t count = std::uint32_t(scenarios.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& s : scenarios) {
    nlohmann::json m;
    m["image_id"] = s.image_id;
    m["scene_id"] = s.scene_id;
    m["narration"] = s.narration;
    auto& gts = m["gt"] = nlohmann::json::array();
    for (const auto& g : s.gt)
      gts.push_back({{"box", {g.box.x1, g.box.y1, g.box.x2, g.box.y2}},
                     {"noun", g.noun},
                     {"verb", g.verb},
                     {"ttc", g.ttc}});
    m["tracks"] = nlohmann::json::parse(tracks_to_json(s.tracks));
    const std::string text = m.dump();
    const std::uint32_t len = std::uint32_t(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), std::streamsize(text.size()));
    write_tensor(out, s.video);
    write_tensor(out, s.image);
  }
  if (!out) throw ValidationError("failed writing " + path);
}

std::vector<SyntheticScenario> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "STDS")
    throw ValidationError(path + " is not a scenario dataset");
  std::uint32_t version = 0, count = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || version != 1) throw ValidationError(path + " has an unsupported dataset version");

  std::vector<SyntheticScenario> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    in.read(text.data(), std::streamsize(len));
    if (!in) throw ValidationError(path + " is truncated");
    const nlohmann::json m = nlohmann::json::parse(text, nullptr, false);
    if (m.is_discarded()) throw ValidationError(path + " has an unreadable scenario manifest");

    SyntheticScenario s;
    s.image_id = m.at("image_id").get<std::string>();
    s.scene_id = m.at("scene_id").get<int>();
    s.narration = m.at("narration").get<std::vector<std::string>>();
    for (const auto& g : m.at("gt")) {
      const auto& b = g.at("box");
      s.gt.push_back({{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                       b[3].get<double>()},
                      g.at("noun").get<int>(),
                      g.at("verb").get<int>(),
                      g.at("ttc").get<double>()});
    }
    s.tracks = parse_tracks_json(m.at("tracks").dump());
    s.video = read_tensor_f32(in);
    s.image = read_tensor_f32(in);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sta
