#include "sta/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "sta/rng.hpp"

namespace sta {

PipelineModel build_model(const PipelineConfig& cfg) {
  if (cfg.fusion.pyramid_levels != cfg.head.pyramid_levels)
    throw ConfigError("fusion emits " + std::to_string(cfg.fusion.pyramid_levels) +
                      " pyramid levels, head expects " + std::to_string(cfg.head.pyramid_levels));
  PipelineModel m;
  m.cfg = cfg;
  m.store = ParamStore<float>(cfg.param_seed);
  m.image_enc.emplace(m.store, cfg.image, "img");
  if (cfg.fusion.use_video) m.video_enc.emplace(m.store, cfg.video, "vid");
  m.fusion.emplace(m.store, cfg.fusion, cfg.image.dim, cfg.video.dim, cfg.video.frames, "fus");
  // zero-init head: every cell starts at score 0.5, a one-cell centered box,
  // and uniform classes, so the box offsets begin inside the loss basin
  m.head.emplace(m.store, cfg.head, cfg.image.dim, "head", true);
  return m;
}

void save_model(const std::string& path, const PipelineModel& model) {
  save_checkpoint(path, model.store, config_to_json(model.cfg));
}

PipelineModel load_model(const std::string& path) {
  PipelineConfig cfg = config_from_json(read_checkpoint_config(path));
  PipelineModel model = build_model(cfg);
  load_checkpoint(path, model.store);
  return model;
}

std::vector<TensorF> forward_raw(const PipelineModel& model, const SyntheticScenario& scenario,
                                 StageTrace* trace) {
  StageTrace local;
  StageTrace& t = trace ? *trace : local;
  t.image = (*model.image_enc)(scenario.image);
  const TokenSet3D<float>* video = nullptr;
  if (model.cfg.fusion.use_video) {
    t.video = (*model.video_enc)(scenario.video);
    video = &*t.video;
  }
  t.refined = model.fusion->refine(t.image, video);
  t.pyramid = model.fusion->pyramid(t.refined);
  t.raw_maps = model.head->raw_maps(t.pyramid);
  return t.raw_maps;
}

std::vector<STAPrediction> run_pipeline(const PipelineModel& model,
                                        const SyntheticScenario& scenario,
                                        const AffordanceDatabase* db, StageTrace* trace) {
  StageTrace local;
  StageTrace& t = trace ? *trace : local;
  forward_raw(model, scenario, &t);
  std::vector<STAPrediction> preds = predictions_from_raw(t.raw_maps, model.cfg.head);

  if (model.cfg.affordance_enabled) {
    if (!db) throw ConfigError("affordance refinement is enabled but no database was given");
    const auto& fused = t.refined.class_fused.data();
    std::vector<double> embedding(fused.begin(), fused.end());
    std::vector<double> bow = bow_vector(scenario.narration, model.cfg.affordance.bow_dim);
    AffordanceDistribution dist =
        query_affordances(embedding, bow, *db, model.cfg.affordance);
    refine_predictions(preds, dist, model.cfg.affordance.lambda);
    t.affordance = std::move(dist);
  }

  if (model.cfg.hotspot_enabled) {
    Hotspot hs = predict_hotspot(scenario.tracks, model.cfg.hotspot);
    preds = reweigh_scores(preds, hs, model.cfg.hotspot.gamma);
    t.hotspot = std::move(hs);
  }
  return preds;
}

std::vector<double> scenario_embedding(const PipelineModel& model,
                                       const SyntheticScenario& scenario) {
  StageTrace t;
  forward_raw(model, scenario, &t);
  const auto& fused = t.refined.class_fused.data();
  return std::vector<double>(fused.begin(), fused.end());
}

std::vector<AffordanceSample> make_affordance_samples(const PipelineModel& model,
                                                      const std::vector<SyntheticScenario>& data) {
  std::vector<AffordanceSample> samples;
  for (const auto& scn : data) {
    std::vector<double> embedding = scenario_embedding(model, scn);
    for (const auto& gt : scn.gt) {
      AffordanceSample s;
      s.embedding = embedding;
      s.noun = gt.noun;
      s.verb = gt.verb;
      s.narration = scn.narration;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::vector<ImagePredictions> predict_dataset(const PipelineModel& model,
                                              const std::vector<SyntheticScenario>& data,
                                              const AffordanceDatabase* db) {
  std::vector<ImagePredictions> out;
  out.reserve(data.size());
  for (const auto& scn : data)
    out.push_back({scn.image_id, run_pipeline(model, scn, db)});
  return out;
}

std::vector<ImageGroundTruth> dataset_ground_truth(const std::vector<SyntheticScenario>& data) {
  std::vector<ImageGroundTruth> out;
  out.reserve(data.size());
  for (const auto& scn : data) out.push_back({scn.image_id, scn.gt});
  return out;
}

namespace {

void shuffle_indices(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
}

}  // namespace

TrainLog train_toy(PipelineModel& model, const std::vector<SyntheticScenario>& data,
                   const TrainConfig& tcfg) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (tcfg.steps == 0) throw ConfigError("step count must be positive");
  if (!(tcfg.lr > 0)) throw ConfigError("learning rate must be positive");
  const std::size_t batch = std::max<std::size_t>(1, std::min(tcfg.batch, data.size()));

  Adam<float> opt(static_cast<float>(tcfg.lr));
  Rng rng = Rng(tcfg.seed).fork("shuffle");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle before the first draw

  TrainLog log;
  log.losses.reserve(tcfg.steps);
  for (std::size_t step = 0; step < tcfg.steps; ++step) {
    TensorF loss_sum = TensorF::zeros({1});
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        shuffle_indices(order, rng);
        cursor = 0;
      }
      const SyntheticScenario& scn = data[order[cursor++]];
      std::vector<TensorF> raw = forward_raw(model, scn);
      StaLossParts<float> parts = sta_loss(raw, scn.gt, model.cfg.head);
      loss_sum = add(loss_sum, parts.total);
    }
    TensorF loss = mul_scalar(loss_sum, 1.0f / static_cast<float>(batch));
    const double value = loss.data()[0];
    if (!std::isfinite(value))
      throw NumericError("training loss is not finite at step " + std::to_string(step) +
                         "; lower the learning rate or reseed");
    log.losses.push_back(value);

    model.store.zero_grads();
    backward(loss);
    opt.step(model.store);
  }
  return log;
}

namespace {

std::array<double, 4> criterion_maps(const EvalReport& report) {
  std::array<double, 4> out{};
  if (report.criteria.size() != kCriterionNames.size())
    throw ContractError("expected one report entry per standard criterion");
  for (std::size_t i = 0; i < kCriterionNames.size(); ++i) {
    if (report.criteria[i].name != kCriterionNames[i])
      throw ContractError("criterion order changed under the ladder's feet");
    out[i] = report.criteria[i].map;
  }
  return out;
}

AblationRow summarize(const std::string& name,
                      const std::vector<std::array<double, 4>>& runs) {
  AblationRow row;
  row.name = name;
  const double n = static_cast<double>(runs.size());
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0;
    for (const auto& r : runs) mean += r[c];
    mean /= n;
    double var = 0;
    for (const auto& r : runs) var += (r[c] - mean) * (r[c] - mean);
    row.map_mean[c] = mean;
    row.map_sd[c] = std::sqrt(var / n);
  }
  return row;
}

}  // namespace

std::vector<AblationRow> run_ablation_ladder(const AblationConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("ablation needs at least one seed");
  if (cfg.train_scenarios == 0 || cfg.eval_scenarios == 0)
    throw ConfigError("both splits need scenarios");

  DatasetSpec dspec;
  dspec.num_scenarios = cfg.train_scenarios + cfg.eval_scenarios;
  dspec.seed = cfg.data_seed;
  std::vector<SyntheticScenario> all = generate_dataset(dspec);
  std::vector<SyntheticScenario> train(all.begin(),
                                       all.begin() + static_cast<std::ptrdiff_t>(cfg.train_scenarios));
  std::vector<SyntheticScenario> held(all.begin() + static_cast<std::ptrdiff_t>(cfg.train_scenarios),
                                      all.end());
  std::vector<ImageGroundTruth> gts = dataset_ground_truth(held);
  std::vector<MatchCriterion> crits = standard_criteria();

  const std::vector<std::string> rows = {"A", "B", "C", "D", "E", "E+AFF", "E+HOT"};
  std::map<std::string, std::vector<std::array<double, 4>>> runs;

  for (std::uint64_t seed : cfg.seeds) {
    for (const char* name : {"A", "B", "C", "D", "E"}) {
      PipelineConfig pcfg = preset_config(name);
      pcfg.param_seed = seed;
      PipelineModel model = build_model(pcfg);
      TrainConfig tcfg = cfg.train;
      tcfg.seed = seed;
      train_toy(model, train, tcfg);
      runs[name].push_back(criterion_maps(evaluate(predict_dataset(model, held), gts, crits)));

      if (std::string_view(name) == "E") {
        // enhancement rows share the trained weights, only the flags differ
        std::vector<AffordanceSample> samples = make_affordance_samples(model, train);
        AffordanceDatabase db =
            build_database(samples, pcfg.head.num_nouns, pcfg.head.num_verbs, pcfg.affordance);
        model.cfg.affordance_enabled = true;
        runs["E+AFF"].push_back(
            criterion_maps(evaluate(predict_dataset(model, held, &db), gts, crits)));
        model.cfg.affordance_enabled = false;
        model.cfg.hotspot_enabled = true;
        runs["E+HOT"].push_back(
            criterion_maps(evaluate(predict_dataset(model, held), gts, crits)));
        model.cfg.hotspot_enabled = false;
      }
    }
  }

  std::vector<AblationRow> out;
  for (const auto& name : rows) out.push_back(summarize(name, runs.at(name)));
  return out;
}

std::string ablation_to_json(const std::vector<AblationRow>& rows) {
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["criteria"] = kCriterionNames;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json jr;
    jr["name"] = row.name;
    for (std::size_t c = 0; c < kCriterionNames.size(); ++c) {
      jr["map"][kCriterionNames[c]] = {{"mean", row.map_mean[c]}, {"sd", row.map_sd[c]}};
    }
    jrows.push_back(std::move(jr));
  }
  doc["rows"] = std::move(jrows);
  return doc.dump(2) + "\n";
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char buf[64];
  os << "config";
  for (const char* name : kCriterionNames) {
    std::snprintf(buf, sizeof buf, "  %-16s", name);
    os << buf;
  }
  os << '\n';
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%-6s", row.name.c_str());
    os << buf;
    for (std::size_t c = 0; c < kCriterionNames.size(); ++c) {
      std::snprintf(buf, sizeof buf, "  %.4f +- %.4f", row.map_mean[c], row.map_sd[c]);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace sta
