#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sta/pipeline.hpp"
#include "sta/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sta::ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw sta::ValidationError("short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sta::ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw sta::ValidationError("cannot create output directory " + dir);
  return p;
}

std::string samples_to_json(const std::vector<sta::AffordanceSample>& samples) {
  json arr = json::array();
  for (const auto& s : samples) {
    json e;
    e["embedding"] = s.embedding;
    e["noun"] = s.noun;
    e["verb"] = s.verb;
    e["narration"] = s.narration;
    arr.push_back(std::move(e));
  }
  return arr.dump(2) + "\n";
}

std::vector<sta::AffordanceSample> parse_samples_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array())
    throw sta::ValidationError("samples document must be a JSON array");
  std::vector<sta::AffordanceSample> samples;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("embedding") || !e.contains("noun") || !e.contains("verb"))
      throw sta::ValidationError("each sample needs embedding, noun and verb fields");
    sta::AffordanceSample s;
    s.embedding = e["embedding"].get<std::vector<double>>();
    s.noun = e["noun"].get<int>();
    s.verb = e["verb"].get<int>();
    if (e.contains("narration")) s.narration = e["narration"].get<std::vector<std::string>>();
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_tensor_f32(const fs::path& path, const sta::TensorF& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sta::ValidationError("cannot write " + path.string());
  sta::write_tensor(out, t);
  if (!out) throw sta::ValidationError("short write to " + path.string());
}

struct GenDataArgs {
  std::size_t scenarios = 24;
  sta::DatasetSpec spec;
};

void cmd_gen_data(const GenDataArgs& a, std::uint64_t seed, const std::string& out) {
  auto dir = ensure_dir(out);
  sta::DatasetSpec spec = a.spec;
  spec.num_scenarios = a.scenarios;
  spec.seed = seed;
  auto data = sta::generate_dataset(spec);
  sta::save_dataset((dir / "dataset.stds").string(), data);
  write_text(dir / "ground_truth.json",
             sta::ground_truth_to_json(sta::dataset_ground_truth(data)));
  std::printf("wrote %zu scenarios to %s\n", data.size(), (dir / "dataset.stds").c_str());
}

struct TrainArgs {
  std::string data;
  std::string config;
  sta::TrainConfig train;
};

void cmd_train_toy(const TrainArgs& a, std::uint64_t seed, const std::string& out) {
  auto dir = ensure_dir(out);
  auto data = sta::load_dataset(a.data);
  sta::PipelineConfig cfg =
      a.config.empty() ? sta::preset_config("E") : sta::load_config(a.config);
  auto model = sta::build_model(cfg);
  sta::TrainConfig tcfg = a.train;
  tcfg.seed = seed;
  auto log = sta::train_toy(model, data, tcfg);
  sta::save_model((dir / "model.stck").string(), model);
  json jl;
  jl["format_version"] = 1;
  jl["steps"] = log.losses.size();
  jl["losses"] = log.losses;
  write_text(dir / "train_log.json", jl.dump(2) + "\n");
  std::printf("trained %zu steps, loss %.4f -> %.4f, model at %s\n", log.losses.size(),
              log.losses.front(), log.losses.back(), (dir / "model.stck").c_str());
}

struct InferArgs {
  std::string model;
  std::string data;
  std::string aff;
  bool emit_samples = false;
};

void cmd_infer(const InferArgs& a, const std::string& out) {
  auto dir = ensure_dir(out);
  auto model = sta::load_model(a.model);
  auto data = sta::load_dataset(a.data);
  sta::AffordanceDatabase db;
  const sta::AffordanceDatabase* dbp = nullptr;
  if (!a.aff.empty()) {
    db = sta::load_affordance_db(a.aff);
    dbp = &db;
    model.cfg.affordance_enabled = true;
  }
  auto preds = sta::predict_dataset(model, data, dbp);
  write_text(dir / "predictions.json", sta::predictions_to_json(preds));
  std::size_t total = 0;
  for (const auto& p : preds) total += p.preds.size();
  std::printf("wrote %zu predictions over %zu scenarios to %s\n", total, preds.size(),
              (dir / "predictions.json").c_str());
  if (a.emit_samples) {
    auto samples = sta::make_affordance_samples(model, data);
    write_text(dir / "samples.json", samples_to_json(samples));
    std::printf("wrote %zu affordance samples to %s\n", samples.size(),
                (dir / "samples.json").c_str());
  }
}

struct BuildAffArgs {
  std::string in;
  std::string out_db = "db.aff";
  std::size_t nouns = 6;
  std::size_t verbs = 4;
  sta::AffordanceConfig cfg;
};

void cmd_build_affordances(const BuildAffArgs& a) {
  auto samples = parse_samples_json(read_text(a.in));
  auto db = sta::build_database(samples, a.nouns, a.verbs, a.cfg);
  sta::save_affordance_db(a.out_db, db);
  std::printf("built %zu zones from %zu samples into %s\n", db.zones.size(), samples.size(),
              a.out_db.c_str());
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string out = "report.json";
  double iou = 0.5;
  double ttc_tol = 0.25;
};

void cmd_eval(const EvalArgs& a) {
  auto preds = sta::parse_predictions_json(read_text(a.pred));
  auto gts = sta::parse_ground_truth_json(read_text(a.gt));
  auto report = sta::evaluate(preds, gts, sta::standard_criteria(a.iou, a.ttc_tol));
  write_text(a.out, sta::report_to_json(report));
  for (const auto& c : report.criteria) std::printf("%-6s mAP %.4f\n", c.name.c_str(), c.map);
  std::printf("report at %s\n", a.out.c_str());
}

struct AblateArgs {
  sta::AblationConfig cfg;
};

void cmd_ablate(const AblateArgs& a, const std::string& out) {
  auto dir = ensure_dir(out);
  auto rows = sta::run_ablation_ladder(a.cfg);
  write_text(dir / "ablation.json", sta::ablation_to_json(rows));
  std::fputs(sta::ablation_table(rows).c_str(), stdout);
  std::printf("table at %s\n", (dir / "ablation.json").c_str());
}

struct DumpArgs {
  std::string model;
  std::string data;
  std::size_t index = 0;
};

void cmd_dump_stages(const DumpArgs& a, const std::string& out) {
  auto dir = ensure_dir((fs::path(out) / "stages").string());
  auto model = sta::load_model(a.model);
  auto data = sta::load_dataset(a.data);
  if (a.index >= data.size())
    throw sta::ValidationError("scenario index " + std::to_string(a.index) +
                               " out of range (dataset has " + std::to_string(data.size()) +
                               " scenarios)");
  const auto& scenario = data[a.index];

  sta::AffordanceDatabase db;
  const sta::AffordanceDatabase* dbp = nullptr;
  if (model.cfg.affordance_enabled) {
    throw sta::ValidationError(
        "stage dumps of affordance-enabled checkpoints are not supported; re-save with the "
        "enhancement off or dump the raw model");
  }
  sta::StageTrace trace;
  auto preds = sta::run_pipeline(model, scenario, dbp, &trace);

  save_tensor_f32(dir / "image_tokens.stat", trace.image.tokens);
  save_tensor_f32(dir / "image_class.stat", trace.image.class_token);
  if (trace.video) {
    save_tensor_f32(dir / "video_tokens.stat", trace.video->tokens);
    save_tensor_f32(dir / "video_class.stat", trace.video->class_token);
  }
  save_tensor_f32(dir / "refined_image.stat", trace.refined.image);
  save_tensor_f32(dir / "class_fused.stat", trace.refined.class_fused);
  for (std::size_t l = 0; l < trace.pyramid.levels.size(); ++l)
    save_tensor_f32(dir / ("pyramid_" + std::to_string(l) + ".stat"), trace.pyramid.levels[l]);
  for (std::size_t l = 0; l < trace.raw_maps.size(); ++l)
    save_tensor_f32(dir / ("raw_" + std::to_string(l) + ".stat"), trace.raw_maps[l]);
  if (trace.hotspot) {
    std::vector<float> m(trace.hotspot->map.begin(), trace.hotspot->map.end());
    save_tensor_f32(dir / "hotspot.stat",
                    sta::TensorF::from_data({trace.hotspot->height, trace.hotspot->width},
                                            std::move(m)));
  }
  std::vector<sta::ImagePredictions> wrapped{{scenario.image_id, preds}};
  write_text(dir / "predictions.json", sta::predictions_to_json(wrapped));
  std::printf("dumped %zu stage files to %s\n",
              std::size_t(std::distance(fs::directory_iterator(dir), fs::directory_iterator{})),
              dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"short-term anticipation toolkit: synthetic data, training, inference, evaluation"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = ".";
  app.add_option("--seed", seed, "seed for anything stochastic in the command");
  app.add_option("--config", config_path, "pipeline config file (json, may name a preset)");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();

  std::function<void()> action;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic scenario dataset");
  gen->fallthrough();
  auto gen_args = std::make_shared<GenDataArgs>();
  gen->add_option("--scenarios", gen_args->scenarios, "number of scenarios")
      ->capture_default_str();
  gen->add_option("--nouns", gen_args->spec.num_nouns, "noun vocabulary size")
      ->capture_default_str();
  gen->add_option("--verbs", gen_args->spec.num_verbs, "verb vocabulary size")
      ->capture_default_str();
  gen->add_option("--frames", gen_args->spec.frames, "frames per clip")->capture_default_str();
  gen->add_option("--frame-size", gen_args->spec.frame_size, "clip frame edge in pixels")
      ->capture_default_str();
  gen->callback([&, gen_args] { action = [&, gen_args] { cmd_gen_data(*gen_args, seed, out_dir); }; });

  auto* train = app.add_subcommand("train-toy", "train a model on a generated dataset");
  train->fallthrough();
  auto train_args = std::make_shared<TrainArgs>();
  train->add_option("--data", train_args->data, "dataset file")->required();
  train->add_option("--steps", train_args->train.steps, "optimizer steps")->capture_default_str();
  train->add_option("--batch", train_args->train.batch, "minibatch size")->capture_default_str();
  train->add_option("--lr", train_args->train.lr, "learning rate")->capture_default_str();
  train->callback([&, train_args] {
    action = [&, train_args] {
      train_args->config = config_path;
      cmd_train_toy(*train_args, seed, out_dir);
    };
  });

  auto* infer = app.add_subcommand("infer", "run a checkpoint over a dataset");
  infer->fallthrough();
  auto infer_args = std::make_shared<InferArgs>();
  infer->add_option("--model", infer_args->model, "checkpoint file")->required();
  infer->add_option("--data", infer_args->data, "dataset file")->required();
  infer->add_option("--aff", infer_args->aff, "affordance database; enables refinement");
  infer->add_flag("--emit-samples", infer_args->emit_samples,
                  "also write affordance samples (embedding + labels) for database building");
  infer->callback([&, infer_args] { action = [&, infer_args] { cmd_infer(*infer_args, out_dir); }; });

  auto* aff = app.add_subcommand("build-affordances", "cluster samples into an affordance database");
  aff->fallthrough();
  auto aff_args = std::make_shared<BuildAffArgs>();
  aff->add_option("--in", aff_args->in, "samples json")->required();
  aff->add_option("--out", aff_args->out_db, "database file")->capture_default_str();
  aff->add_option("--zones", aff_args->cfg.num_zones, "number of k-means zones")
      ->capture_default_str();
  aff->add_option("--nouns", aff_args->nouns, "noun vocabulary size")->capture_default_str();
  aff->add_option("--verbs", aff_args->verbs, "verb vocabulary size")->capture_default_str();
  aff->callback([&, aff_args] {
    action = [&, aff_args] {
      if (app.count("--seed")) aff_args->cfg.seed = seed;
      cmd_build_affordances(*aff_args);
    };
  });

  auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
  ev->fallthrough();
  auto ev_args = std::make_shared<EvalArgs>();
  ev->add_option("--pred", ev_args->pred, "predictions json")->required();
  ev->add_option("--gt", ev_args->gt, "ground truth json")->required();
  ev->add_option("--out", ev_args->out, "report file")->capture_default_str();
  ev->add_option("--iou", ev_args->iou, "IoU threshold")->capture_default_str();
  ev->add_option("--ttc-tol", ev_args->ttc_tol, "time-to-contact tolerance")
      ->capture_default_str();
  ev->callback([&, ev_args] { action = [&, ev_args] { cmd_eval(*ev_args); }; });

  auto* abl = app.add_subcommand("ablate", "train and evaluate the component ladder");
  abl->fallthrough();
  auto abl_args = std::make_shared<AblateArgs>();
  abl->add_option("--train-scenarios", abl_args->cfg.train_scenarios, "training split size")
      ->capture_default_str();
  abl->add_option("--eval-scenarios", abl_args->cfg.eval_scenarios, "held-out split size")
      ->capture_default_str();
  abl->add_option("--steps", abl_args->cfg.train.steps, "optimizer steps per row")
      ->capture_default_str();
  abl->add_option("--batch", abl_args->cfg.train.batch, "minibatch size")->capture_default_str();
  abl->add_option("--lr", abl_args->cfg.train.lr, "learning rate")->capture_default_str();
  abl->add_option("--seeds", abl_args->cfg.seeds, "training seeds")
      ->delimiter(',')
      ->capture_default_str();
  abl->callback([&, abl_args] {
    action = [&, abl_args] {
      if (app.count("--seed")) abl_args->cfg.data_seed = seed;
      cmd_ablate(*abl_args, out_dir);
    };
  });

  auto* dump = app.add_subcommand("dump-stages", "write intermediate stage tensors for one scenario");
  dump->fallthrough();
  auto dump_args = std::make_shared<DumpArgs>();
  dump->add_option("--model", dump_args->model, "checkpoint file")->required();
  dump->add_option("--data", dump_args->data, "dataset file")->required();
  dump->add_option("--index", dump_args->index, "scenario index")->capture_default_str();
  dump->callback([&, dump_args] { action = [&, dump_args] { cmd_dump_stages(*dump_args, out_dir); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sta::kExitOk : sta::kExitValidation;
  }

  try {
    action();
  } catch (const sta::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return sta::kExitNumeric;
  } catch (const sta::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return sta::kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return sta::kExitValidation;
  }
  return sta::kExitOk;
}
