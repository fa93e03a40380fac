#pragma once

#include <cstdint>
#include <string>

#include "sta/affordance.hpp"
#include "sta/encoders.hpp"
#include "sta/errors.hpp"
#include "sta/fusion.hpp"
#include "sta/head.hpp"
#include "sta/hotspot.hpp"

namespace sta {

// One switchboard for the whole pipeline. The ablation ladder rows are plain
// presets over this struct, so configurations differ only in the switches
// they are meant to differ in:
//   A  image encoder only
//   B  + video, temporal mean pooling, elementwise sum fusion
//   C  + frame-guided pooling (single head)
//   D  + dual image-video attention (single head)
//   E  multi-head attention everywhere
// plus E+AFF / E+HOT which reuse E's weights and toggle the enhancements.
struct PipelineConfig {
  std::string preset = "E";
  EncoderConfig image;
  VideoEncoderConfig video;
  FusionConfig fusion;
  HeadConfig head;
  AffordanceConfig affordance;
  HotspotConfig hotspot;
  bool affordance_enabled = false;
  bool hotspot_enabled = false;
  std::uint64_t param_seed = 1;
};

PipelineConfig preset_config(const std::string& name);

std::string config_to_json(const PipelineConfig& cfg);
// Accepts partial documents: a "preset" key selects the baseline, any other
// present key overrides that baseline field by field.
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::string& path);

}  // namespace sta
