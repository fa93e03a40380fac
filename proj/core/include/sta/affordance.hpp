#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sta/errors.hpp"
#include "sta/head.hpp"

// Environment-affordance memory: k-means zones over video embeddings, top-K
// retrieval blending visual and narration similarity, and log-linear
// refinement of predicted class distributions. Everything here is plain
// double-precision scalar code; nothing participates in the gradient tape.
namespace sta {

struct AffordanceSample {
  std::vector<double> embedding;
  int noun = 0;
  int verb = 0;
  std::vector<std::string> narration;
};

struct ZoneRecord {
  std::vector<double> embedding;      // unit norm
  std::vector<std::int64_t> noun_counts;
  std::vector<std::int64_t> verb_counts;
  std::vector<double> narration_bow;  // unit norm or all-zero
  int zone_id = 0;
};

struct AffordanceDistribution {
  std::vector<double> noun_probs;
  std::vector<double> verb_probs;
  std::vector<int> support_zone_ids;
  std::vector<double> weights;
};

struct AffordanceConfig {
  std::size_t num_zones = 8;
  std::size_t top_k = 5;
  double beta = 0.5;    // visual vs narrative similarity blend
  double tau = 0.1;     // softmax temperature over zone similarities
  double lambda = 0.5;  // model vs affordance mixing strength
  std::size_t bow_dim = 64;
  std::size_t kmeans_iters = 50;
  std::uint64_t seed = 7;
};

struct AffordanceDatabase {
  std::vector<ZoneRecord> zones;
  std::size_t dim = 0;
  std::size_t bow_dim = 0;
  std::size_t num_nouns = 0;
  std::size_t num_verbs = 0;
};

// Hashed bag-of-words over narration tokens, unit-normalized (all-zero for an
// empty narration).
std::vector<double> bow_vector(const std::vector<std::string>& tokens, std::size_t dim);

struct KmeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignment;
};

// Plain seeded k-means; this exact procedure (partial Fisher-Yates init from
// mt19937_64(seed), squared-Euclidean assignment with lowest-index ties,
// empty clusters reseeded to the farthest point, early stop on a fixed
// assignment) is the determinism contract the oracle tests pin down.
KmeansResult kmeans_assign(const std::vector<std::vector<double>>& points, std::size_t k,
                           std::size_t iters, std::uint64_t seed);

AffordanceDatabase build_database(const std::vector<AffordanceSample>& samples,
                                  std::size_t num_nouns, std::size_t num_verbs,
                                  const AffordanceConfig& cfg);

AffordanceDistribution query_affordances(const std::vector<double>& query_embedding,
                                         const std::vector<double>& query_bow,
                                         const AffordanceDatabase& db,
                                         const AffordanceConfig& cfg);

// p'(c) ∝ model(c)^(1-λ) · (aff(c)+1e-8)^λ; λ=0 returns model_probs verbatim.
std::vector<double> refine_probs(const std::vector<double>& model_probs,
                                 const std::vector<double>& aff_probs, double lambda);

// Refinement applied to each prediction's class distributions in place;
// scores and ordering are untouched.
void refine_predictions(std::vector<STAPrediction>& preds, const AffordanceDistribution& aff,
                        double lambda);

void save_affordance_db(const std::string& path, const AffordanceDatabase& db);
AffordanceDatabase load_affordance_db(const std::string& path);

}  // namespace sta
