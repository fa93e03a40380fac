#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sta/attention.hpp"
#include "sta/encoders.hpp"

// Fusion of image and video token sets: temporal pooling of the video grid
// onto the last frame, paired cross-attentions between the two modalities,
// class-token fusion by addition, and a multi-scale pyramid with a
// level-shared 3x3 convolution.
namespace sta {

enum class PoolKind { Mean, FrameGuided };
enum class FuseKind { Sum, Dual };

struct FusionConfig {
  bool use_video = true;         // false: image-only pathway (ladder row A)
  PoolKind pooling = PoolKind::FrameGuided;
  FuseKind fusion = FuseKind::Dual;
  bool use_multi_head = true;    // false clamps fusion attention to one head
  std::size_t heads = 4;
  bool temporal_pos_embed = false;
  std::size_t pyramid_levels = 3;
};

template <typename S>
struct PooledVideoTokens {
  Tensor<S> tokens;       // [H_v, W_v, d]
  Tensor<S> class_token;  // [d]
};

template <typename S>
struct RefinedTokens {
  Tensor<S> image;        // [H, W, d]
  Tensor<S> video;        // [H_v, W_v, d]; undefined on the image-only path
  Tensor<S> class_image;  // [d]
  Tensor<S> class_video;  // [d]
  Tensor<S> class_fused;  // [d] == class_image + class_video
};

template <typename S>
struct FeaturePyramid {
  std::vector<Tensor<S>> levels;  // strictly decreasing resolution, [h_l, w_l, d]
};

// Residual cross-attention that compresses t*H_v*W_v video tokens onto the
// last-frame grid: queries are [class; last-frame tokens], keys/values are
// [class; all tokens]. An optional per-frame embedding is added to the
// key/value tokens; without it the block cannot tell the frames apart.
template <typename S>
class FrameGuidedPool {
public:
  FrameGuidedPool(ParamStore<S>& store, const std::string& prefix, std::size_t d,
                  std::size_t heads, std::size_t frames, bool temporal_pos_embed,
                  bool zero_out_proj = false)
      : block_(store, prefix, d, heads, zero_out_proj), d_(d) {
    if (temporal_pos_embed)
      tpos_ = store.add(prefix + ".tpos", {frames, d}, Init::XavierUniform);
  }

  PooledVideoTokens<S> operator()(const TokenSet3D<S>& video, AttnProbe<S>* probe = nullptr) const {
    const std::size_t t = video.tokens.extent(0);
    const std::size_t hv = video.tokens.extent(1), wv = video.tokens.extent(2);
    const std::size_t s = hv * wv;
    Tensor<S> all = reshape(video.tokens, {t * s, d_});
    Tensor<S> cls = reshape(video.class_token, {1, d_});
    Tensor<S> q_in = concat<S>({cls, slice(all, 0, (t - 1) * s, s)}, 0);
    Tensor<S> kv_tokens = all;
    if (tpos_.defined()) {
      if (tpos_.extent(0) != t)
        throw ConfigError("temporal embedding built for " + std::to_string(tpos_.extent(0)) +
                          " frames, got " + std::to_string(t));
      std::vector<Tensor<S>> rows;
      rows.reserve(t);
      for (std::size_t f = 0; f < t; ++f)
        rows.push_back(add_rows(slice(all, 0, f * s, s), reshape(slice(tpos_, 0, f, 1), {d_})));
      kv_tokens = concat(rows, 0);
    }
    Tensor<S> kv_in = concat<S>({cls, kv_tokens}, 0);
    Tensor<S> out = block_(q_in, kv_in, probe);
    PooledVideoTokens<S> pooled;
    pooled.class_token = reshape(slice(out, 0, 0, 1), {d_});
    pooled.tokens = reshape(slice(out, 0, 1, s), {hv, wv, d_});
    return pooled;
  }

private:
  ResidualCrossAttention<S> block_;
  Tensor<S> tpos_;
  std::size_t d_;
};

// Parameter-free baseline: plain temporal mean.
template <typename S>
PooledVideoTokens<S> mean_pool(const TokenSet3D<S>& video) {
  const std::size_t t = video.tokens.extent(0);
  PooledVideoTokens<S> pooled;
  pooled.tokens = mul_scalar(sum_axis(video.tokens, 0), S(1) / static_cast<S>(t));
  pooled.class_token = video.class_token;
  return pooled;
}

// Two independent residual cross-attentions: image tokens query the pooled
// video tokens and vice versa. Class tokens ride along as the first row of
// each side; the refined class tokens are summed into the fused one.
template <typename S>
class DualAttention {
public:
  DualAttention(ParamStore<S>& store, const std::string& prefix, std::size_t d, std::size_t heads,
                bool zero_out_proj = false)
      : img_branch_(store, prefix + ".img", d, heads, zero_out_proj),
        vid_branch_(store, prefix + ".vid", d, heads, zero_out_proj),
        d_(d) {}

  RefinedTokens<S> operator()(const TokenSet2D<S>& image, const PooledVideoTokens<S>& pooled,
                              AttnProbe<S>* probe = nullptr) const {
    if (image.tokens.extent(2) != d_ || pooled.tokens.extent(2) != d_)
      throw DimensionError("token widths " + shape_str(image.tokens.shape()) + " / " +
                           shape_str(pooled.tokens.shape()) + " do not match block width " +
                           std::to_string(d_));
    const std::size_t h = image.tokens.extent(0), w = image.tokens.extent(1);
    const std::size_t hv = pooled.tokens.extent(0), wv = pooled.tokens.extent(1);
    Tensor<S> img_rows =
        concat<S>({reshape(image.class_token, {1, d_}), reshape(image.tokens, {h * w, d_})}, 0);
    Tensor<S> vid_rows =
        concat<S>({reshape(pooled.class_token, {1, d_}), reshape(pooled.tokens, {hv * wv, d_})}, 0);
    Tensor<S> a = img_branch_(img_rows, vid_rows, probe);
    Tensor<S> b = vid_branch_(vid_rows, img_rows, probe);
    RefinedTokens<S> out;
    out.class_image = reshape(slice(a, 0, 0, 1), {d_});
    out.image = reshape(slice(a, 0, 1, h * w), {h, w, d_});
    out.class_video = reshape(slice(b, 0, 0, 1), {d_});
    out.video = reshape(slice(b, 0, 1, hv * wv), {hv, wv, d_});
    out.class_fused = add(out.class_image, out.class_video);
    return out;
  }

private:
  ResidualCrossAttention<S> img_branch_, vid_branch_;
  std::size_t d_;
};

// Both grids resized to each level of an image-grid pyramid, summed and
// passed through one convolution shared across levels.
template <typename S>
class PyramidFuser {
public:
  PyramidFuser(ParamStore<S>& store, const std::string& prefix, std::size_t d,
               std::size_t levels)
      : conv_w_(store.add(prefix + ".conv.w", {3, 3, d, d}, Init::XavierUniform)),
        conv_b_(store.add(prefix + ".conv.b", {d}, Init::Zeros)),
        levels_(levels) {}

  FeaturePyramid<S> operator()(const RefinedTokens<S>& refined) const {
    const std::size_t h = refined.image.extent(0), w = refined.image.extent(1);
    FeaturePyramid<S> pyr;
    for (std::size_t l = 0; l < levels_; ++l) {
      const std::size_t hl = std::max<std::size_t>(1, h >> l);
      const std::size_t wl = std::max<std::size_t>(1, w >> l);
      Tensor<S> m = bilinear_resize(refined.image, hl, wl);
      if (refined.video.defined()) m = add(m, bilinear_resize(refined.video, hl, wl));
      pyr.levels.push_back(conv2d_3x3(m, conv_w_, conv_b_));
    }
    return pyr;
  }

private:
  Tensor<S> conv_w_, conv_b_;
  std::size_t levels_;
};

// Wires the configured ablation variant end to end:
//   A: image only            B: mean pool + sum     C: frame-guided + sum
//   D: + dual attention (1 head)                    E: multi-head everywhere
template <typename S>
class FusionStack {
public:
  FusionStack(ParamStore<S>& store, const FusionConfig& cfg, std::size_t image_dim,
              std::size_t video_dim, std::size_t frames, const std::string& prefix = "fus",
              bool zero_out_proj = false)
      : cfg_(cfg), d_(image_dim) {
    const std::size_t heads = cfg.use_multi_head ? cfg.heads : 1;
    if (cfg.use_video) {
      if (cfg.pooling == PoolKind::FrameGuided)
        pool_.emplace(store, prefix + ".pool", video_dim, heads, frames, cfg.temporal_pos_embed,
                      zero_out_proj);
      if (video_dim != image_dim)
        adapter_ = LinearLayer<S>(store, prefix + ".adapt", video_dim, image_dim);
      has_adapter_ = video_dim != image_dim;
      if (cfg.fusion == FuseKind::Dual)
        dual_.emplace(store, prefix + ".dual", image_dim, heads, zero_out_proj);
    }
    pyramid_.emplace(store, prefix + ".pyr", image_dim, cfg.pyramid_levels);
  }

  RefinedTokens<S> refine(const TokenSet2D<S>& image, const TokenSet3D<S>* video,
                          AttnProbe<S>* probe = nullptr) const {
    if (!cfg_.use_video) {
      RefinedTokens<S> r;
      r.image = image.tokens;
      r.class_image = image.class_token;
      r.class_video = Tensor<S>::zeros({d_});
      r.class_fused = add(r.class_image, r.class_video);
      return r;
    }
    if (!video) throw ContractError("config expects a video token set");
    PooledVideoTokens<S> pooled =
        cfg_.pooling == PoolKind::FrameGuided ? (*pool_)(*video, probe) : mean_pool(*video);
    if (has_adapter_) {
      const std::size_t hv = pooled.tokens.extent(0), wv = pooled.tokens.extent(1);
      const std::size_t dv = pooled.tokens.extent(2);
      pooled.tokens = reshape(adapter_(reshape(pooled.tokens, {hv * wv, dv})), {hv, wv, d_});
      pooled.class_token = reshape(adapter_(reshape(pooled.class_token, {1, dv})), {d_});
    }
    if (cfg_.fusion == FuseKind::Dual) return (*dual_)(image, pooled, probe);
    RefinedTokens<S> r;
    r.image = image.tokens;
    r.video = pooled.tokens;
    r.class_image = image.class_token;
    r.class_video = pooled.class_token;
    r.class_fused = add(r.class_image, r.class_video);
    return r;
  }

  FeaturePyramid<S> pyramid(const RefinedTokens<S>& refined) const { return (*pyramid_)(refined); }

  std::pair<RefinedTokens<S>, FeaturePyramid<S>> operator()(const TokenSet2D<S>& image,
                                                            const TokenSet3D<S>* video,
                                                            AttnProbe<S>* probe = nullptr) const {
    RefinedTokens<S> r = refine(image, video, probe);
    return {r, pyramid(r)};
  }

  const FusionConfig& config() const { return cfg_; }

private:
  FusionConfig cfg_;
  std::size_t d_;
  std::optional<FrameGuidedPool<S>> pool_;
  LinearLayer<S> adapter_;
  bool has_adapter_ = false;
  std::optional<DualAttention<S>> dual_;
  std::optional<PyramidFuser<S>> pyramid_;
};

}  // namespace sta
