#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sta/params.hpp"
#include "sta/tensor.hpp"

// Multi-head scaled dot-product attention and the residual blocks built from
// it. Everything is expressed over [tokens, d] matrices; callers flatten
// grids before attending.
namespace sta {

// Captures per-row sums of every softmaxed attention matrix that a forward
// pass produces (one entry per head per attention site).
template <typename S>
struct AttnProbe {
  std::vector<std::vector<S>> row_sums;
};

template <typename S>
class LinearLayer {
public:
  LinearLayer() = default;
  LinearLayer(ParamStore<S>& store, const std::string& prefix, std::size_t in, std::size_t out,
              Init weight_init = Init::XavierUniform)
      : w_(store.add(prefix + ".w", {in, out}, weight_init)),
        b_(store.add(prefix + ".b", {out}, Init::Zeros)) {}

  Tensor<S> operator()(const Tensor<S>& x) const { return linear(x, w_, b_); }
  const Tensor<S>& weight() const { return w_; }
  const Tensor<S>& bias() const { return b_; }

private:
  Tensor<S> w_, b_;
};

template <typename S>
class LayerNormLayer {
public:
  LayerNormLayer() = default;
  LayerNormLayer(ParamStore<S>& store, const std::string& prefix, std::size_t d)
      : g_(store.add(prefix + ".g", {d}, Init::Identity)),
        b_(store.add(prefix + ".b", {d}, Init::Zeros)) {}

  Tensor<S> operator()(const Tensor<S>& x) const { return layer_norm(x, g_, b_); }

private:
  Tensor<S> g_, b_;
};

template <typename S>
class MultiHeadAttention {
public:
  MultiHeadAttention() = default;
  // zero_out_proj forces the output projection to zeros so the enclosing
  // residual block starts as (or can be tested as) an exact identity.
  MultiHeadAttention(ParamStore<S>& store, const std::string& prefix, std::size_t d,
                     std::size_t heads, bool zero_out_proj = false)
      : d_(d), heads_(heads) {
    if (heads == 0 || d % heads != 0)
      throw ConfigError("attention width " + std::to_string(d) + " is not divisible by " +
                        std::to_string(heads) + " heads");
    q_ = LinearLayer<S>(store, prefix + ".q", d, d);
    k_ = LinearLayer<S>(store, prefix + ".k", d, d);
    v_ = LinearLayer<S>(store, prefix + ".v", d, d);
    o_ = LinearLayer<S>(store, prefix + ".o", d, d,
                        zero_out_proj ? Init::Zeros : Init::XavierUniform);
  }

  // q_in: [n_q, d], kv_in: [n_kv, d] -> [n_q, d]
  Tensor<S> operator()(const Tensor<S>& q_in, const Tensor<S>& kv_in,
                       AttnProbe<S>* probe = nullptr) const {
    if (q_in.rank() != 2 || kv_in.rank() != 2 || q_in.extent(1) != d_ || kv_in.extent(1) != d_)
      throw DimensionError("attention inputs " + shape_str(q_in.shape()) + " / " +
                           shape_str(kv_in.shape()) + " do not match width " + std::to_string(d_));
    const std::size_t dh = d_ / heads_;
    const S scale = static_cast<S>(1.0 / std::sqrt(double(dh)));
    Tensor<S> q = q_(q_in), k = k_(kv_in), v = v_(kv_in);
    std::vector<Tensor<S>> head_outs;
    head_outs.reserve(heads_);
    for (std::size_t h = 0; h < heads_; ++h) {
      Tensor<S> qh = slice(q, 1, h * dh, dh);
      Tensor<S> kh = slice(k, 1, h * dh, dh);
      Tensor<S> vh = slice(v, 1, h * dh, dh);
      Tensor<S> attn = softmax(mul_scalar(matmul(qh, transpose(kh)), scale), 1);
      if (probe) {
        const std::size_t rows = attn.extent(0), cols = attn.extent(1);
        std::vector<S> sums(rows, S(0));
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) sums[r] += attn.data()[r * cols + c];
        probe->row_sums.push_back(std::move(sums));
      }
      head_outs.push_back(matmul(attn, vh));
    }
    Tensor<S> merged = heads_ == 1 ? head_outs[0] : concat(head_outs, 1);
    return o_(merged);
  }

  std::size_t width() const { return d_; }
  std::size_t heads() const { return heads_; }

private:
  std::size_t d_ = 0, heads_ = 0;
  LinearLayer<S> q_, k_, v_, o_;
};

// Pre-norm residual cross-attention: out = x_q + MHA(LN_q(x_q), LN_kv(x_kv)).
template <typename S>
class ResidualCrossAttention {
public:
  ResidualCrossAttention() = default;
  ResidualCrossAttention(ParamStore<S>& store, const std::string& prefix, std::size_t d,
                         std::size_t heads, bool zero_out_proj = false)
      : ln_q_(store, prefix + ".lnq", d),
        ln_kv_(store, prefix + ".lnkv", d),
        attn_(store, prefix + ".attn", d, heads, zero_out_proj) {}

  Tensor<S> operator()(const Tensor<S>& x_q, const Tensor<S>& x_kv,
                       AttnProbe<S>* probe = nullptr) const {
    return add(x_q, attn_(ln_q_(x_q), ln_kv_(x_kv), probe));
  }

private:
  LayerNormLayer<S> ln_q_, ln_kv_;
  MultiHeadAttention<S> attn_;
};

// Standard pre-norm encoder block: self-attention then a relu MLP, both
// residual.
template <typename S>
class TransformerBlock {
public:
  TransformerBlock() = default;
  TransformerBlock(ParamStore<S>& store, const std::string& prefix, std::size_t d,
                   std::size_t heads, std::size_t ffn_mult)
      : ln1_(store, prefix + ".ln1", d),
        attn_(store, prefix + ".attn", d, heads),
        ln2_(store, prefix + ".ln2", d),
        fc1_(store, prefix + ".fc1", d, d * ffn_mult),
        fc2_(store, prefix + ".fc2", d * ffn_mult, d) {}

  Tensor<S> operator()(const Tensor<S>& x, AttnProbe<S>* probe = nullptr) const {
    Tensor<S> xn = ln1_(x);
    Tensor<S> h = add(x, attn_(xn, xn, probe));
    return add(h, fc2_(relu(fc1_(ln2_(h)))));
  }

private:
  LayerNormLayer<S> ln1_, ln2_;
  MultiHeadAttention<S> attn_;
  LinearLayer<S> fc1_, fc2_;
};

}  // namespace sta
