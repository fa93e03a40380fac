#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sta/affordance.hpp"
#include "sta/config.hpp"
#include "sta/encoders.hpp"
#include "sta/errors.hpp"
#include "sta/evaluator.hpp"
#include "sta/fusion.hpp"
#include "sta/head.hpp"
#include "sta/hotspot.hpp"
#include "sta/params.hpp"
#include "sta/scenario.hpp"

namespace sta {

// A constructed model: parameter store plus the modules wired onto it.
// Movable, not copyable (modules share parameter nodes with the store).
struct PipelineModel {
  PipelineConfig cfg;
  ParamStore<float> store{0};
  std::optional<ImageEncoder<float>> image_enc;
  std::optional<VideoEncoder<float>> video_enc;
  std::optional<FusionStack<float>> fusion;
  std::optional<PredictionHead<float>> head;
};

PipelineModel build_model(const PipelineConfig& cfg);

void save_model(const std::string& path, const PipelineModel& model);
// Rebuilds the model from the checkpoint's embedded configuration; parameter
// names and shapes must match the archive.
PipelineModel load_model(const std::string& path);

// Intermediate stage outputs, captured on request for inspection dumps.
struct StageTrace {
  TokenSet2D<float> image;
  std::optional<TokenSet3D<float>> video;
  RefinedTokens<float> refined;
  FeaturePyramid<float> pyramid;
  std::vector<TensorF> raw_maps;
  std::optional<AffordanceDistribution> affordance;
  std::optional<Hotspot> hotspot;
};

// Encoders -> pooling -> fusion -> pyramid -> head, without decoding.
std::vector<TensorF> forward_raw(const PipelineModel& model, const SyntheticScenario& scenario,
                                 StageTrace* trace = nullptr);

// Full inference path: decode + NMS, then affordance refinement and hotspot
// re-weighting when the configuration enables them.
std::vector<STAPrediction> run_pipeline(const PipelineModel& model,
                                        const SyntheticScenario& scenario,
                                        const AffordanceDatabase* db = nullptr,
                                        StageTrace* trace = nullptr);

// Fused class token as a plain vector; the embedding that keys affordances.
std::vector<double> scenario_embedding(const PipelineModel& model,
                                       const SyntheticScenario& scenario);

std::vector<AffordanceSample> make_affordance_samples(const PipelineModel& model,
                                                      const std::vector<SyntheticScenario>& data);

std::vector<ImagePredictions> predict_dataset(const PipelineModel& model,
                                              const std::vector<SyntheticScenario>& data,
                                              const AffordanceDatabase* db = nullptr);
std::vector<ImageGroundTruth> dataset_ground_truth(const std::vector<SyntheticScenario>& data);

struct TrainConfig {
  std::size_t steps = 200;
  std::size_t batch = 4;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::vector<double> losses;  // one entry per step
};

// Seeded minibatch Adam on the detection loss; aborts with a numeric error
// if the loss stops being finite.
TrainLog train_toy(PipelineModel& model, const std::vector<SyntheticScenario>& data,
                   const TrainConfig& tcfg);

inline constexpr std::array<const char*, 4> kCriterionNames = {"N", "N+V", "N+TTC", "All"};

struct AblationRow {
  std::string name;
  std::array<double, 4> map_mean{};  // N, N+V, N+TTC, All
  std::array<double, 4> map_sd{};
};

struct AblationConfig {
  std::size_t train_scenarios = 48;
  std::size_t eval_scenarios = 24;
  std::uint64_t data_seed = 11;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  TrainConfig train{260, 4, 1e-3, 0};
};

// Trains rows A..E per seed on the train split and evaluates on the held-out
// split; E+AFF and E+HOT reuse each seed's trained E weights with the
// respective enhancement enabled.
std::vector<AblationRow> run_ablation_ladder(const AblationConfig& cfg);

std::string ablation_to_json(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace sta
