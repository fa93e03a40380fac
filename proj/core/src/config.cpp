#include "sta/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sta {

namespace {

// desk-scale defaults shared by every ladder row
void apply_toy_dims(PipelineConfig& cfg) {
  cfg.image.image_size = 64;
  cfg.image.patch = 8;
  cfg.image.dim = 24;
  cfg.image.heads = 4;
  cfg.image.layers = 1;
  cfg.image.ffn_mult = 2;
  cfg.video.frames = 4;
  cfg.video.frame_size = 32;
  cfg.video.patch = 8;
  cfg.video.dim = 24;
  cfg.video.heads = 4;
  cfg.video.layers = 1;
  cfg.video.ffn_mult = 2;
  cfg.fusion.heads = 4;
  // per-frame key embeddings let the pooling resolve motion order; the mean
  // baseline has no parameters, so row B stays order-blind as intended
  cfg.fusion.temporal_pos_embed = true;
  cfg.fusion.pyramid_levels = 3;
  cfg.head.num_nouns = 6;
  cfg.head.num_verbs = 4;
  cfg.head.pyramid_levels = 3;
}

std::string trainable_name(Trainable t) {
  switch (t) {
    case Trainable::All: return "all";
    case Trainable::LastBlock: return "last_block";
    default: return "frozen";
  }
}

Trainable trainable_from(const std::string& s) {
  if (s == "all") return Trainable::All;
  if (s == "last_block") return Trainable::LastBlock;
  if (s == "frozen") return Trainable::Frozen;
  throw ConfigError("unknown trainable mode: " + s);
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig preset_config(const std::string& name) {
  PipelineConfig cfg;
  cfg.preset = name;
  apply_toy_dims(cfg);
  if (name == "A") {
    cfg.fusion.use_video = false;
    cfg.fusion.use_multi_head = false;
  } else if (name == "B") {
    cfg.fusion.use_video = true;
    cfg.fusion.pooling = PoolKind::Mean;
    cfg.fusion.fusion = FuseKind::Sum;
    cfg.fusion.use_multi_head = false;
  } else if (name == "C") {
    cfg.fusion.use_video = true;
    cfg.fusion.pooling = PoolKind::FrameGuided;
    cfg.fusion.fusion = FuseKind::Sum;
    cfg.fusion.use_multi_head = false;
  } else if (name == "D") {
    cfg.fusion.use_video = true;
    cfg.fusion.pooling = PoolKind::FrameGuided;
    cfg.fusion.fusion = FuseKind::Dual;
    cfg.fusion.use_multi_head = false;
  } else if (name == "E" || name == "E+AFF" || name == "E+HOT") {
    cfg.fusion.use_video = true;
    cfg.fusion.pooling = PoolKind::FrameGuided;
    cfg.fusion.fusion = FuseKind::Dual;
    cfg.fusion.use_multi_head = true;
    cfg.affordance_enabled = name == "E+AFF";
    cfg.hotspot_enabled = name == "E+HOT";
  } else {
    throw ConfigError("unknown preset: " + name + " (use A, B, C, D, E, E+AFF or E+HOT)");
  }
  return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["preset"] = cfg.preset;
  j["param_seed"] = cfg.param_seed;
  j["image"] = {{"image_size", cfg.image.image_size}, {"patch", cfg.image.patch},
                {"dim", cfg.image.dim},               {"heads", cfg.image.heads},
                {"layers", cfg.image.layers},         {"ffn_mult", cfg.image.ffn_mult},
                {"trainable", trainable_name(cfg.image.trainable)}};
  j["video"] = {{"frames", cfg.video.frames},  {"frame_size", cfg.video.frame_size},
                {"patch", cfg.video.patch},    {"dim", cfg.video.dim},
                {"heads", cfg.video.heads},    {"layers", cfg.video.layers},
                {"ffn_mult", cfg.video.ffn_mult},
                {"trainable", trainable_name(cfg.video.trainable)}};
  j["fusion"] = {{"use_video", cfg.fusion.use_video},
                 {"pooling", cfg.fusion.pooling == PoolKind::FrameGuided ? "frame_guided" : "mean"},
                 {"fusion", cfg.fusion.fusion == FuseKind::Dual ? "dual" : "sum"},
                 {"use_multi_head", cfg.fusion.use_multi_head},
                 {"heads", cfg.fusion.heads},
                 {"temporal_pos_embed", cfg.fusion.temporal_pos_embed},
                 {"pyramid_levels", cfg.fusion.pyramid_levels}};
  j["head"] = {{"num_nouns", cfg.head.num_nouns},
               {"num_verbs", cfg.head.num_verbs},
               {"pyramid_levels", cfg.head.pyramid_levels},
               {"score_threshold", cfg.head.score_threshold},
               {"nms_iou", cfg.head.nms_iou},
               {"max_detections", cfg.head.max_detections},
               {"lambda_box", cfg.head.lambda_box},
               {"lambda_noun", cfg.head.lambda_noun},
               {"lambda_verb", cfg.head.lambda_verb},
               {"lambda_ttc", cfg.head.lambda_ttc},
               {"ttc_eps", cfg.head.ttc_eps}};
  j["affordance"] = {{"enabled", cfg.affordance_enabled}, {"num_zones", cfg.affordance.num_zones},
                     {"top_k", cfg.affordance.top_k},     {"beta", cfg.affordance.beta},
                     {"tau", cfg.affordance.tau},         {"lambda", cfg.affordance.lambda},
                     {"bow_dim", cfg.affordance.bow_dim}, {"kmeans_iters", cfg.affordance.kmeans_iters},
                     {"seed", cfg.affordance.seed}};
  j["hotspot"] = {{"enabled", cfg.hotspot_enabled},
                  {"height", cfg.hotspot.height},
                  {"width", cfg.hotspot.width},
                  {"sigma", cfg.hotspot.sigma},
                  {"horizon", cfg.hotspot.horizon},
                  {"object_weight", cfg.hotspot.object_weight},
                  {"gamma", cfg.hotspot.gamma}};
  return j.dump(2);
}

PipelineConfig config_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ConfigError("configuration must be a JSON object");

  PipelineConfig cfg = preset_config(j.value("preset", std::string("E")));
  maybe(j, "param_seed", cfg.param_seed);
  if (j.contains("image")) {
    const auto& e = j.at("image");
    maybe(e, "image_size", cfg.image.image_size);
    maybe(e, "patch", cfg.image.patch);
    maybe(e, "dim", cfg.image.dim);
    maybe(e, "heads", cfg.image.heads);
    maybe(e, "layers", cfg.image.layers);
    maybe(e, "ffn_mult", cfg.image.ffn_mult);
    if (e.contains("trainable")) cfg.image.trainable = trainable_from(e.at("trainable"));
  }
  if (j.contains("video")) {
    const auto& e = j.at("video");
    maybe(e, "frames", cfg.video.frames);
    maybe(e, "frame_size", cfg.video.frame_size);
    maybe(e, "patch", cfg.video.patch);
    maybe(e, "dim", cfg.video.dim);
    maybe(e, "heads", cfg.video.heads);
    maybe(e, "layers", cfg.video.layers);
    maybe(e, "ffn_mult", cfg.video.ffn_mult);
    if (e.contains("trainable")) cfg.video.trainable = trainable_from(e.at("trainable"));
  }
  if (j.contains("fusion")) {
    const auto& e = j.at("fusion");
    maybe(e, "use_video", cfg.fusion.use_video);
    if (e.contains("pooling")) {
      const std::string p = e.at("pooling");
      if (p == "frame_guided")
        cfg.fusion.pooling = PoolKind::FrameGuided;
      else if (p == "mean")
        cfg.fusion.pooling = PoolKind::Mean;
      else
        throw ConfigError("unknown pooling kind: " + p);
    }
    if (e.contains("fusion")) {
      const std::string f = e.at("fusion");
      if (f == "dual")
        cfg.fusion.fusion = FuseKind::Dual;
      else if (f == "sum")
        cfg.fusion.fusion = FuseKind::Sum;
      else
        throw ConfigError("unknown fusion kind: " + f);
    }
    maybe(e, "use_multi_head", cfg.fusion.use_multi_head);
    maybe(e, "heads", cfg.fusion.heads);
    maybe(e, "temporal_pos_embed", cfg.fusion.temporal_pos_embed);
    maybe(e, "pyramid_levels", cfg.fusion.pyramid_levels);
  }
  if (j.contains("head")) {
    const auto& e = j.at("head");
    maybe(e, "num_nouns", cfg.head.num_nouns);
    maybe(e, "num_verbs", cfg.head.num_verbs);
    maybe(e, "pyramid_levels", cfg.head.pyramid_levels);
    maybe(e, "score_threshold", cfg.head.score_threshold);
    maybe(e, "nms_iou", cfg.head.nms_iou);
    maybe(e, "max_detections", cfg.head.max_detections);
    maybe(e, "lambda_box", cfg.head.lambda_box);
    maybe(e, "lambda_noun", cfg.head.lambda_noun);
    maybe(e, "lambda_verb", cfg.head.lambda_verb);
    maybe(e, "lambda_ttc", cfg.head.lambda_ttc);
    maybe(e, "ttc_eps", cfg.head.ttc_eps);
  }
  if (j.contains("affordance")) {
    const auto& e = j.at("affordance");
    maybe(e, "enabled", cfg.affordance_enabled);
    maybe(e, "num_zones", cfg.affordance.num_zones);
    maybe(e, "top_k", cfg.affordance.top_k);
    maybe(e, "beta", cfg.affordance.beta);
    maybe(e, "tau", cfg.affordance.tau);
    maybe(e, "lambda", cfg.affordance.lambda);
    maybe(e, "bow_dim", cfg.affordance.bow_dim);
    maybe(e, "kmeans_iters", cfg.affordance.kmeans_iters);
    maybe(e, "seed", cfg.affordance.seed);
  }
  if (j.contains("hotspot")) {
    const auto& e = j.at("hotspot");
    maybe(e, "enabled", cfg.hotspot_enabled);
    maybe(e, "height", cfg.hotspot.height);
    maybe(e, "width", cfg.hotspot.width);
    maybe(e, "sigma", cfg.hotspot.sigma);
    maybe(e, "horizon", cfg.hotspot.horizon);
    maybe(e, "object_weight", cfg.hotspot.object_weight);
    maybe(e, "gamma", cfg.hotspot.gamma);
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace sta
