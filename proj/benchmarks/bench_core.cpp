#include <benchmark/benchmark.h>

#include "sta/pipeline.hpp"
#include "sta/rng.hpp"
#include "sta/tensor.hpp"

namespace {

sta::TensorF rand_f(sta::Rng& rng, sta::Shape s) {
  std::vector<float> d(sta::shape_numel(s));
  for (auto& v : d) v = float(rng.uniform(-1.0, 1.0));
  return sta::TensorF::from_data(std::move(s), std::move(d));
}

void BM_matmul(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0));
  sta::Rng rng(1);
  sta::TensorF a = rand_f(rng, {n, n});
  sta::TensorF b = rand_f(rng, {n, n});
  for (auto _ : state) {
    sta::TensorF c = matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(n * n * n));
}
BENCHMARK(BM_matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_softmax(benchmark::State& state) {
  sta::Rng rng(2);
  sta::TensorF x = rand_f(rng, {64, 256});
  for (auto _ : state) {
    sta::TensorF y = softmax(x, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_softmax);

void BM_conv3x3(benchmark::State& state) {
  sta::Rng rng(3);
  sta::TensorF x = rand_f(rng, {8, 8, 32});
  sta::TensorF w = rand_f(rng, {3, 3, 32, 32});
  sta::TensorF b = rand_f(rng, {32});
  for (auto _ : state) {
    sta::TensorF y = conv2d_3x3(x, w, b);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_conv3x3);

void BM_attention_forward_backward(benchmark::State& state) {
  sta::Rng rng(4);
  for (auto _ : state) {
    sta::TensorF q = rand_f(rng, {65, 32}).set_requires_grad(true);
    sta::TensorF k = rand_f(rng, {65, 32});
    sta::TensorF v = rand_f(rng, {65, 32});
    sta::TensorF attn = softmax(mul_scalar(matmul(q, transpose(k)), 0.176777f), 1);
    sta::TensorF loss = sum(matmul(attn, v));
    backward(loss);
    benchmark::DoNotOptimize(q.grad().data());
  }
}
BENCHMARK(BM_attention_forward_backward);

std::vector<sta::SyntheticScenario> bench_data(std::size_t n) {
  sta::DatasetSpec spec;
  spec.num_scenarios = n;
  spec.seed = 9;
  return sta::generate_dataset(spec);
}

void BM_generate_scenario(benchmark::State& state) {
  sta::DatasetSpec spec;
  spec.num_scenarios = 4;
  spec.seed = 9;
  for (auto _ : state) {
    auto data = sta::generate_dataset(spec);
    benchmark::DoNotOptimize(data.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * 4);
}
BENCHMARK(BM_generate_scenario);

void BM_pipeline_forward(benchmark::State& state) {
  auto data = bench_data(1);
  auto model = sta::build_model(sta::preset_config("E"));
  for (auto _ : state) {
    auto preds = sta::run_pipeline(model, data[0]);
    benchmark::DoNotOptimize(preds.data());
  }
}
BENCHMARK(BM_pipeline_forward);

void BM_train_step(benchmark::State& state) {
  auto data = bench_data(8);
  auto model = sta::build_model(sta::preset_config("E"));
  for (auto _ : state) {
    sta::TrainConfig t;
    t.steps = 1;
    t.batch = 4;
    t.seed = 1;
    auto log = sta::train_toy(model, data, t);
    benchmark::DoNotOptimize(log.losses.data());
  }
}
BENCHMARK(BM_train_step);

void BM_evaluate(benchmark::State& state) {
  auto data = bench_data(16);
  auto model = sta::build_model(sta::preset_config("E"));
  auto preds = sta::predict_dataset(model, data);
  auto gts = sta::dataset_ground_truth(data);
  auto crits = sta::standard_criteria();
  for (auto _ : state) {
    auto rep = sta::evaluate(preds, gts, crits);
    benchmark::DoNotOptimize(rep.criteria.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * 16);
}
BENCHMARK(BM_evaluate);

void BM_kmeans(benchmark::State& state) {
  sta::Rng rng(6);
  std::vector<std::vector<double>> pts(128, std::vector<double>(24));
  for (auto& p : pts)
    for (auto& v : p) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    auto res = sta::kmeans_assign(pts, 8, 50, 7);
    benchmark::DoNotOptimize(res.assignment.data());
  }
}
BENCHMARK(BM_kmeans);

void BM_hotspot_raster(benchmark::State& state) {
  auto data = bench_data(1);
  sta::HotspotConfig cfg;
  for (auto _ : state) {
    auto hs = sta::predict_hotspot(data[0].tracks, cfg);
    benchmark::DoNotOptimize(hs.map.data());
  }
}
BENCHMARK(BM_hotspot_raster);

}  // namespace

BENCHMARK_MAIN();
