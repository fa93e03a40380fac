#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sta/rng.hpp"
#include "sta/tensor.hpp"

namespace sta {

enum class Init { XavierUniform, Zeros, Identity };

// Named parameter registry. Iteration order is registration order, which also
// fixes checkpoint layout and optimizer update order. Initialization is a pure
// function of (store seed, parameter name), so adding parameters for one
// config variant never shifts the values of another's.
template <typename S>
class ParamStore {
public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  // Tensors are shared handles, so the returned copies alias the stored
  // parameter; returning by value keeps callers safe across registry growth.
  Tensor<S> add(const std::string& name, Shape shape, Init init) {
    if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
    Tensor<S> t = make_init(name, shape, init);
    t.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, t});
    return t;
  }

  Tensor<S> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return entries_[it->second].tensor;
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return entries_.size(); }
  const std::string& name_at(std::size_t i) const { return entries_[i].name; }
  Tensor<S>& tensor_at(std::size_t i) { return entries_[i].tensor; }
  const Tensor<S>& tensor_at(std::size_t i) const { return entries_[i].tensor; }

  std::uint64_t seed() const { return seed_; }

  void zero_grads() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

  // Marks every parameter whose name starts with `prefix`.
  void set_trainable_prefix(const std::string& prefix, bool trainable) {
    for (auto& e : entries_)
      if (e.name.rfind(prefix, 0) == 0) e.tensor.set_requires_grad(trainable);
  }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
  }

private:
  struct Entry {
    std::string name;
    Tensor<S> tensor;
  };

  Tensor<S> make_init(const std::string& name, Shape shape, Init init) {
    const std::size_t n = shape_numel(shape);
    switch (init) {
      case Init::Zeros:
        return Tensor<S>::zeros(std::move(shape));
      case Init::Identity: {
        // identity transform: ones for gain vectors, eye for square matrices
        if (shape.size() == 1) return Tensor<S>::full(std::move(shape), S(1));
        if (shape.size() != 2 || shape[0] != shape[1])
          throw ContractError("identity init needs a vector or square matrix, got " +
                              shape_str(shape) + " for " + name);
        std::vector<S> d(n, S(0));
        for (std::size_t i = 0; i < shape[0]; ++i) d[i * shape[0] + i] = S(1);
        return Tensor<S>::from_data(std::move(shape), std::move(d));
      }
      case Init::XavierUniform: {
        double fan_in = 0, fan_out = 0;
        if (shape.size() == 2) {
          fan_in = double(shape[0]);
          fan_out = double(shape[1]);
        } else if (shape.size() == 4) {
          // conv kernel [kh,kw,ci,co]
          fan_in = double(shape[0] * shape[1] * shape[2]);
          fan_out = double(shape[0] * shape[1] * shape[3]);
        } else {
          fan_in = fan_out = double(n);
        }
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        Rng rng(mix_seed(seed_ ^ fnv1a(name)));
        std::vector<S> d(n);
        for (auto& v : d) v = static_cast<S>(rng.uniform(-a, a));
        return Tensor<S>::from_data(std::move(shape), std::move(d));
      }
    }
    throw ContractError("unhandled init spec");
  }

  std::uint64_t seed_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Adam with bias correction; steps only parameters that require grad.
template <typename S>
class Adam {
public:
  explicit Adam(S lr = S(1e-3), S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(S lr) { lr_ = lr; }

  void step(ParamStore<S>& store) {
    ++t_;
    const double bc1 = 1.0 - std::pow(double(beta1_), double(t_));
    const double bc2 = 1.0 - std::pow(double(beta2_), double(t_));
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& p = store.tensor_at(i);
      if (!p.requires_grad() || !p.has_grad()) continue;
      auto& state = state_[store.name_at(i)];
      if (state.m.empty()) {
        state.m.assign(p.numel(), S(0));
        state.v.assign(p.numel(), S(0));
      }
      const auto& g = p.grad();
      auto& x = p.mutable_data();
      for (std::size_t j = 0; j < x.size(); ++j) {
        state.m[j] = beta1_ * state.m[j] + (S(1) - beta1_) * g[j];
        state.v[j] = beta2_ * state.v[j] + (S(1) - beta2_) * g[j] * g[j];
        const S mhat = static_cast<S>(state.m[j] / bc1);
        const S vhat = static_cast<S>(state.v[j] / bc2);
        x[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

private:
  struct Moments {
    std::vector<S> m, v;
  };
  S lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

// Checkpoint archive: "STCK" magic, u32 manifest length, JSON manifest
// (format version, config text, parameter names and shapes), then one
// binary tensor record per parameter in store order.
void save_checkpoint(const std::string& path, const ParamStore<float>& store,
                     const std::string& config_json);
// Loads values into an already-constructed store; names and shapes must
// match the archive exactly. Returns the embedded config text.
std::string load_checkpoint(const std::string& path, ParamStore<float>& store);
// Reads just the embedded config text.
std::string read_checkpoint_config(const std::string& path);

}  // namespace sta
