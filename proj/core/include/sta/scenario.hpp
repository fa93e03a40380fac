#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sta/errors.hpp"
#include "sta/head.hpp"
#include "sta/hotspot.hpp"
#include "sta/tensor.hpp"

// Synthetic desk-scale scenarios: a short clip of colored rectangles on a
// scene-tinted background with a moving hand dot. The hand's motion direction
// encodes the verb (so the verb cannot be read off a single frame), the
// target rectangle's color encodes the noun, and time-to-contact is the
// hand-to-target distance at the last frame over the nominal hand speed.
// Colors come in cross-scene look-alike pairs and each scene affords exactly
// two nouns, which gives the affordance retrieval real signal; distractor
// rectangles are planted far from the hand so hotspot gating has false
// positives to demote.
namespace sta {

struct SyntheticScenario {
  std::string image_id;
  int scene_id = 0;
  TensorF video;  // [frames, size, size, 3]
  TensorF image;  // [2*size, 2*size, 3], upsampled last frame
  HandObjectTracks tracks;
  std::vector<GroundTruthInstance> gt;
  std::vector<std::string> narration;
};

struct DatasetSpec {
  std::size_t num_scenarios = 16;
  std::size_t num_nouns = 6;  // even, at most 6 (two per scene)
  std::size_t num_verbs = 4;  // static, +x, +y, -x
  std::size_t frames = 4;
  std::size_t frame_size = 32;
  std::uint64_t seed = 0;
};

inline constexpr double kHandSpeed = 0.16;  // normalized units per frame

std::vector<SyntheticScenario> generate_dataset(const DatasetSpec& spec);

void save_dataset(const std::string& path, const std::vector<SyntheticScenario>& scenarios);
std::vector<SyntheticScenario> load_dataset(const std::string& path);

}  // namespace sta
