#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oracles/finite_diff.hpp"
#include "sta/tensor.hpp"

// One finite-difference check per differentiable tensor op. Each check fixes
// a random projection mask up front and computes loss = sum(out * mask), so
// per-element gradients are nontrivial while the probed function stays the
// same across perturbations. Inputs of kinked ops (relu, min/max, huber, div,
// log) are kept away from their kinks; a central difference straddling a kink
// measures the kink, not the derivative.
namespace checks {

using sta::Shape;
using sta::TensorD;

struct OpCheck {
  std::string name;
  std::function<oracle::GradCheckReport(std::uint64_t)> run;
};

inline TensorD rand_t(sta::Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
  return oracle::random_tensor(rng, std::move(s), lo, hi);
}

// magnitudes in [gap, hi], sign random
inline TensorD rand_gap(sta::Rng& rng, Shape s, double gap, double hi) {
  std::vector<double> d(sta::shape_numel(s));
  for (auto& v : d) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(gap, hi);
  return TensorD::from_data(std::move(s), std::move(d));
}

inline TensorD project(const TensorD& out, const TensorD& mask) { return sum(mul(out, mask)); }

inline const std::vector<OpCheck>& op_grad_checks() {
  static const std::vector<OpCheck> all = [] {
    std::vector<OpCheck> v;
    auto add_check = [&v](std::string name, auto fn) { v.push_back({std::move(name), fn}); };

    add_check("matmul", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {4, 5}).set_requires_grad(true);
      TensorD b = rand_t(rng, {5, 6}).set_requires_grad(true);
      TensorD m = rand_t(rng, {4, 6});
      return oracle::grad_check({&a, &b}, [&] { return project(matmul(a, b), m); });
    });
    add_check("linear", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD x = rand_t(rng, {3, 5}).set_requires_grad(true);
      TensorD w = rand_t(rng, {5, 4}).set_requires_grad(true);
      TensorD b = rand_t(rng, {4}).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&x, &w, &b}, [&] { return project(linear(x, w, b), m); });
    });
    add_check("add_rows", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD x = rand_t(rng, {4, 3}).set_requires_grad(true);
      TensorD b = rand_t(rng, {3}).set_requires_grad(true);
      TensorD m = rand_t(rng, {4, 3});
      return oracle::grad_check({&x, &b}, [&] { return project(add_rows(x, b), m); });
    });
    add_check("add", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD b = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a, &b}, [&] { return project(add(a, b), m); });
    });
    add_check("sub", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD b = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a, &b}, [&] { return project(sub(a, b), m); });
    });
    add_check("mul", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD b = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a, &b}, [&] { return project(mul(a, b), m); });
    });
    add_check("div", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD b = rand_gap(rng, {3, 4}, 0.5, 2.0).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a, &b}, [&] { return project(div(a, b), m); });
    });
    add_check("minimum", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {4, 4}).set_requires_grad(true);
      // keep a clear margin so the probe never crosses the selection boundary
      std::vector<double> bd = a.data();
      sta::Rng jitter = rng.fork("margin");
      for (auto& x : bd) x += (jitter.uniform() < 0.5 ? -1.0 : 1.0) * jitter.uniform(0.01, 0.5);
      TensorD b = TensorD::from_data({4, 4}, std::move(bd)).set_requires_grad(true);
      TensorD m = rand_t(rng, {4, 4});
      return oracle::grad_check({&a, &b}, [&] { return project(minimum(a, b), m); });
    });
    add_check("maximum", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {4, 4}).set_requires_grad(true);
      std::vector<double> bd = a.data();
      sta::Rng jitter = rng.fork("margin");
      for (auto& x : bd) x += (jitter.uniform() < 0.5 ? -1.0 : 1.0) * jitter.uniform(0.01, 0.5);
      TensorD b = TensorD::from_data({4, 4}, std::move(bd)).set_requires_grad(true);
      TensorD m = rand_t(rng, {4, 4});
      return oracle::grad_check({&a, &b}, [&] { return project(maximum(a, b), m); });
    });
    add_check("add_scalar", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a}, [&] { return project(add_scalar(a, 0.7), m); });
    });
    add_check("mul_scalar", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a}, [&] { return project(mul_scalar(a, -1.3), m); });
    });
    add_check("exp", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a}, [&] { return project(exp(a), m); });
    });
    add_check("log", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}, 0.5, 2.0).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a}, [&] { return project(log(a), m); });
    });
    add_check("sigmoid", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}, -3.0, 3.0).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a}, [&] { return project(sigmoid(a), m); });
    });
    add_check("softplus", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}, -3.0, 3.0).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a}, [&] { return project(softplus(a), m); });
    });
    add_check("relu", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_gap(rng, {3, 4}, 0.01, 1.0).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a}, [&] { return project(relu(a), m); });
    });
    add_check("smooth_l1", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}, -0.9, 0.9).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 4});
      return oracle::grad_check({&a}, [&] { return project(smooth_l1(a), m); });
    });
    add_check("reshape", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      TensorD m = rand_t(rng, {2, 6});
      return oracle::grad_check({&a}, [&] { return project(reshape(a, {2, 6}), m); });
    });
    add_check("transpose", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 5}).set_requires_grad(true);
      TensorD m = rand_t(rng, {5, 3});
      return oracle::grad_check({&a}, [&] { return project(transpose(a), m); });
    });
    add_check("permute", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {2, 3, 4}).set_requires_grad(true);
      TensorD m = rand_t(rng, {4, 2, 3});
      return oracle::grad_check({&a}, [&] { return project(permute(a, {2, 0, 1}), m); });
    });
    add_check("slice", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 6}).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 3});
      return oracle::grad_check({&a}, [&] { return project(slice(a, 1, 2, 3), m); });
    });
    add_check("concat", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {2, 3}).set_requires_grad(true);
      TensorD b = rand_t(rng, {4, 3}).set_requires_grad(true);
      TensorD m = rand_t(rng, {6, 3});
      return oracle::grad_check({&a, &b}, [&] { return project(sta::concat<double>({a, b}, 0), m); });
    });
    add_check("gather", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {5, 3}).set_requires_grad(true);
      const std::vector<std::size_t> idx{4, 0, 2, 0};
      TensorD m = rand_t(rng, {4, 3});
      return oracle::grad_check({&a}, [&] { return project(gather(a, 0, idx), m); });
    });
    add_check("sum", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      return oracle::grad_check({&a}, [&] { return mul_scalar(sum(a), 1.7); });
    });
    add_check("mean", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4}).set_requires_grad(true);
      return oracle::grad_check({&a}, [&] { return mul_scalar(mean(a), -2.1); });
    });
    add_check("sum_axis", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4, 2}).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 2});
      return oracle::grad_check({&a}, [&] { return project(sum_axis(a, 1), m); });
    });
    add_check("softmax", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 7}, -2.0, 2.0).set_requires_grad(true);
      TensorD m = rand_t(rng, {3, 7});
      return oracle::grad_check({&a}, [&] { return project(softmax(a, 1), m); });
    });
    add_check("layer_norm", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD x = rand_t(rng, {2, 4, 8}).set_requires_grad(true);
      TensorD g = rand_t(rng, {8}, 0.5, 1.5).set_requires_grad(true);
      TensorD b = rand_t(rng, {8}).set_requires_grad(true);
      TensorD m = rand_t(rng, {2, 4, 8});
      return oracle::grad_check({&x, &g, &b}, [&] { return project(layer_norm(x, g, b), m); });
    });
    add_check("bilinear_resize", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD a = rand_t(rng, {3, 4, 2}).set_requires_grad(true);
      TensorD m = rand_t(rng, {5, 3, 2});
      return oracle::grad_check({&a}, [&] { return project(bilinear_resize(a, 5, 3), m); });
    });
    add_check("conv2d_3x3", [](std::uint64_t seed) {
      sta::Rng rng(seed);
      TensorD x = rand_t(rng, {5, 5, 2}).set_requires_grad(true);
      TensorD w = rand_t(rng, {3, 3, 2, 3}).set_requires_grad(true);
      TensorD b = rand_t(rng, {3}).set_requires_grad(true);
      TensorD m = rand_t(rng, {5, 5, 3});
      return oracle::grad_check({&x, &w, &b}, [&] { return project(conv2d_3x3(x, w, b), m); });
    });
    return v;
  }();
  return all;
}

}  // namespace checks
