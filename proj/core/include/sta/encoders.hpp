#pragma once

#include <string>
#include <vector>

#include "sta/attention.hpp"
#include "sta/params.hpp"
#include "sta/tensor.hpp"

// Small trainable stand-ins for the image and video backbones. They keep the
// real token contract: a spatial (or spatio-temporal) token grid plus one
// class token, at a shared embedding width.
namespace sta {

enum class Trainable { All, LastBlock, Frozen };

struct EncoderConfig {
  std::size_t image_size = 64;  // square input edge
  std::size_t patch = 8;
  std::size_t dim = 32;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn_mult = 2;
  Trainable trainable = Trainable::All;
};

struct VideoEncoderConfig {
  std::size_t frames = 4;
  std::size_t frame_size = 32;  // square frame edge
  std::size_t patch = 8;
  std::size_t dim = 32;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn_mult = 2;
  Trainable trainable = Trainable::All;
};

template <typename S>
struct TokenSet2D {
  Tensor<S> tokens;       // [H, W, d]
  Tensor<S> class_token;  // [d]
};

template <typename S>
struct TokenSet3D {
  Tensor<S> tokens;       // [t, H_v, W_v, d]
  Tensor<S> class_token;  // [d]
};

template <typename S>
void apply_trainable(ParamStore<S>& store, const std::string& prefix, Trainable mode,
                     std::size_t layers) {
  switch (mode) {
    case Trainable::All:
      return;
    case Trainable::Frozen:
      store.set_trainable_prefix(prefix + ".", false);
      return;
    case Trainable::LastBlock:
      store.set_trainable_prefix(prefix + ".", false);
      if (layers > 0)
        store.set_trainable_prefix(prefix + ".blk" + std::to_string(layers - 1) + ".", true);
      store.set_trainable_prefix(prefix + ".final_ln.", true);
      return;
  }
}

// [h, w, 3] -> [ (h/p)*(w/p), p*p*3 ] rows in grid row-major order
template <typename S>
Tensor<S> patchify(const Tensor<S>& pixels, std::size_t p) {
  const std::size_t h = pixels.extent(0), w = pixels.extent(1);
  const std::size_t gh = h / p, gw = w / p;
  Tensor<S> x = reshape(pixels, {gh, p, gw, p, 3});
  x = permute(x, {0, 2, 1, 3, 4});
  return reshape(x, {gh * gw, p * p * 3});
}

template <typename S>
class ImageEncoder {
public:
  ImageEncoder(ParamStore<S>& store, const EncoderConfig& cfg, const std::string& prefix = "img")
      : cfg_(cfg), prefix_(prefix) {
    if (cfg.patch == 0 || cfg.image_size % cfg.patch != 0)
      throw ConfigError("image size " + std::to_string(cfg.image_size) +
                        " not divisible by patch " + std::to_string(cfg.patch));
    grid_ = cfg.image_size / cfg.patch;
    patch_ = LinearLayer<S>(store, prefix + ".patch", cfg.patch * cfg.patch * 3, cfg.dim);
    pos_ = store.add(prefix + ".pos", {grid_ * grid_, cfg.dim}, Init::XavierUniform);
    cls_ = store.add(prefix + ".cls", {1, cfg.dim}, Init::XavierUniform);
    for (std::size_t i = 0; i < cfg.layers; ++i)
      blocks_.emplace_back(store, prefix + ".blk" + std::to_string(i), cfg.dim, cfg.heads,
                           cfg.ffn_mult);
    final_ln_ = LayerNormLayer<S>(store, prefix + ".final_ln", cfg.dim);
    apply_trainable(store, prefix, cfg.trainable, cfg.layers);
  }

  TokenSet2D<S> operator()(const Tensor<S>& pixels, AttnProbe<S>* probe = nullptr) const {
    if (pixels.rank() != 3 || pixels.extent(0) != cfg_.image_size ||
        pixels.extent(1) != cfg_.image_size || pixels.extent(2) != 3)
      throw DimensionError("image " + shape_str(pixels.shape()) + " does not match configured [" +
                           std::to_string(cfg_.image_size) + ", " +
                           std::to_string(cfg_.image_size) + ", 3]");
    const std::size_t n = grid_ * grid_;
    Tensor<S> x = add(patch_(patchify(pixels, cfg_.patch)), pos_);
    x = concat<S>({cls_, x}, 0);
    for (const auto& blk : blocks_) x = blk(x, probe);
    x = final_ln_(x);
    TokenSet2D<S> out;
    out.class_token = reshape(slice(x, 0, 0, 1), {cfg_.dim});
    out.tokens = reshape(slice(x, 0, 1, n), {grid_, grid_, cfg_.dim});
    return out;
  }

  std::size_t grid() const { return grid_; }
  const EncoderConfig& config() const { return cfg_; }

private:
  EncoderConfig cfg_;
  std::string prefix_;
  std::size_t grid_ = 0;
  LinearLayer<S> patch_;
  Tensor<S> pos_, cls_;
  std::vector<TransformerBlock<S>> blocks_;
  LayerNormLayer<S> final_ln_;
};

// Divided space-time attention: per block, temporal self-attention across
// frames at each spatial index, spatial self-attention within each frame
// (class token joins every frame and the refined copies are averaged), then a
// shared MLP. The temporal positional embedding starts at zero so a freshly
// initialized encoder is exactly time-translation symmetric on static input.
template <typename S>
class VideoEncoder {
public:
  VideoEncoder(ParamStore<S>& store, const VideoEncoderConfig& cfg,
               const std::string& prefix = "vid")
      : cfg_(cfg), prefix_(prefix) {
    if (cfg.patch == 0 || cfg.frame_size % cfg.patch != 0)
      throw ConfigError("frame size " + std::to_string(cfg.frame_size) +
                        " not divisible by patch " + std::to_string(cfg.patch));
    if (cfg.frames < 1) throw ConfigError("video needs at least one frame");
    grid_ = cfg.frame_size / cfg.patch;
    const std::size_t s = grid_ * grid_;
    patch_ = LinearLayer<S>(store, prefix + ".patch", cfg.patch * cfg.patch * 3, cfg.dim);
    pos_space_ = store.add(prefix + ".pos_space", {s, cfg.dim}, Init::XavierUniform);
    // frames must be distinguishable from the first step or motion cues stay
    // invisible until this embedding drifts away from a constant
    pos_time_ = store.add(prefix + ".pos_time", {cfg.frames, cfg.dim}, Init::XavierUniform);
    cls_ = store.add(prefix + ".cls", {1, cfg.dim}, Init::XavierUniform);
    for (std::size_t i = 0; i < cfg.layers; ++i) {
      const std::string bp = prefix + ".blk" + std::to_string(i);
      blocks_.push_back(Block{
          LayerNormLayer<S>(store, bp + ".tln", cfg.dim),
          MultiHeadAttention<S>(store, bp + ".tattn", cfg.dim, cfg.heads),
          LayerNormLayer<S>(store, bp + ".sln", cfg.dim),
          MultiHeadAttention<S>(store, bp + ".sattn", cfg.dim, cfg.heads),
          LayerNormLayer<S>(store, bp + ".ln2", cfg.dim),
          LinearLayer<S>(store, bp + ".fc1", cfg.dim, cfg.dim * cfg.ffn_mult),
          LinearLayer<S>(store, bp + ".fc2", cfg.dim * cfg.ffn_mult, cfg.dim),
      });
    }
    final_ln_ = LayerNormLayer<S>(store, prefix + ".final_ln", cfg.dim);
    apply_trainable(store, prefix, cfg.trainable, cfg.layers);
  }

  TokenSet3D<S> operator()(const Tensor<S>& frames, AttnProbe<S>* probe = nullptr) const {
    const std::size_t t = cfg_.frames;
    if (frames.rank() != 4 || frames.extent(0) != t || frames.extent(1) != cfg_.frame_size ||
        frames.extent(2) != cfg_.frame_size || frames.extent(3) != 3)
      throw DimensionError("video " + shape_str(frames.shape()) + " does not match configured [" +
                           std::to_string(t) + ", " + std::to_string(cfg_.frame_size) + ", " +
                           std::to_string(cfg_.frame_size) + ", 3]");
    const std::size_t s = grid_ * grid_;
    // patch rows come out as frame-major: row f*s + spatial_index
    Tensor<S> flat = reshape(frames, {t, grid_, cfg_.patch, grid_, cfg_.patch, 3});
    flat = permute(flat, {0, 1, 3, 2, 4, 5});
    flat = reshape(flat, {t * s, cfg_.patch * cfg_.patch * 3});
    Tensor<S> x = patch_(flat);

    std::vector<Tensor<S>> pos_rows;
    for (std::size_t f = 0; f < t; ++f)
      pos_rows.push_back(add_rows(pos_space_, reshape(slice(pos_time_, 0, f, 1), {cfg_.dim})));
    x = add(x, concat(pos_rows, 0));

    Tensor<S> cls = cls_;
    for (const auto& blk : blocks_) {
      // temporal stage over each spatial column
      std::vector<Tensor<S>> cols;
      cols.reserve(s);
      for (std::size_t sp = 0; sp < s; ++sp) {
        std::vector<std::size_t> idx(t);
        for (std::size_t f = 0; f < t; ++f) idx[f] = f * s + sp;
        Tensor<S> col = gather(x, 0, idx);
        Tensor<S> coln = blk.tln(col);
        cols.push_back(add(col, blk.tattn(coln, coln, probe)));
      }
      x = reshape(permute(reshape(concat(cols, 0), {s, t, cfg_.dim}), {1, 0, 2}), {t * s, cfg_.dim});

      // spatial stage per frame; class token rides along in each frame
      std::vector<Tensor<S>> frames_out;
      frames_out.reserve(t);
      Tensor<S> cls_acc;
      for (std::size_t f = 0; f < t; ++f) {
        Tensor<S> xf = slice(x, 0, f * s, s);
        Tensor<S> inp = concat<S>({cls, xf}, 0);
        Tensor<S> inpn = blk.sln(inp);
        Tensor<S> y = add(inp, blk.sattn(inpn, inpn, probe));
        Tensor<S> cf = slice(y, 0, 0, 1);
        cls_acc = f == 0 ? cf : add(cls_acc, cf);
        frames_out.push_back(slice(y, 0, 1, s));
      }
      x = concat(frames_out, 0);
      cls = mul_scalar(cls_acc, S(1) / static_cast<S>(t));

      // shared MLP over class + all tokens
      Tensor<S> all = concat<S>({cls, x}, 0);
      all = add(all, blk.fc2(relu(blk.fc1(blk.ln2(all)))));
      cls = slice(all, 0, 0, 1);
      x = slice(all, 0, 1, t * s);
    }

    Tensor<S> all = final_ln_(concat<S>({cls, x}, 0));
    TokenSet3D<S> out;
    out.class_token = reshape(slice(all, 0, 0, 1), {cfg_.dim});
    out.tokens = reshape(slice(all, 0, 1, t * s), {t, grid_, grid_, cfg_.dim});
    return out;
  }

  std::size_t grid() const { return grid_; }
  const VideoEncoderConfig& config() const { return cfg_; }

private:
  struct Block {
    LayerNormLayer<S> tln;
    MultiHeadAttention<S> tattn;
    LayerNormLayer<S> sln;
    MultiHeadAttention<S> sattn;
    LayerNormLayer<S> ln2;
    LinearLayer<S> fc1, fc2;
  };

  VideoEncoderConfig cfg_;
  std::string prefix_;
  std::size_t grid_ = 0;
  LinearLayer<S> patch_;
  Tensor<S> pos_space_, pos_time_, cls_;
  std::vector<Block> blocks_;
  LayerNormLayer<S> final_ln_;
};

}  // namespace sta
