#include "sta/affordance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "sta/rng.hpp"
#include "sta/tensor_io.hpp"

namespace sta {

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> normalized(std::vector<double> v) {
  const double n = norm2(v);
  if (n < 1e-12) return v;
  for (auto& x : v) x /= n;
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = norm2(a), nb = norm2(b);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (na * nb);
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<double> bow_vector(const std::vector<std::string>& tokens, std::size_t dim) {
  std::vector<double> bow(dim, 0.0);
  for (const auto& tok : tokens) bow[fnv1a(tok) % dim] += 1.0;
  return normalized(std::move(bow));
}

KmeansResult kmeans_assign(const std::vector<std::vector<double>>& points, std::size_t k,
                           std::size_t iters, std::uint64_t seed) {
  const std::size_t n = points.size();
  if (k == 0 || k > n)
    throw ConfigError("cannot form " + std::to_string(k) + " zones from " + std::to_string(n) +
                      " samples");

  std::mt19937_64 gen(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + std::size_t(gen() % std::uint64_t(n - i));
    std::swap(idx[i], idx[j]);
  }
  KmeansResult res;
  for (std::size_t i = 0; i < k; ++i) res.centroids.push_back(points[idx[i]]);
  res.assignment.assign(n, 0);

  std::vector<std::size_t> prev(n, k);  // impossible value forces one update
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t best = 0;
      double best_d = sq_dist(points[p], res.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(points[p], res.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      res.assignment[p] = best;
    }
    if (res.assignment == prev) break;
    prev = res.assignment;

    std::vector<std::vector<double>> sums(k, std::vector<double>(points[0].size(), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t p = 0; p < n; ++p) {
      counts[res.assignment[p]]++;
      auto& s = sums[res.assignment[p]];
      for (std::size_t j = 0; j < s.size(); ++j) s[j] += points[p][j];
    }
    std::vector<bool> reseeded(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < sums[c].size(); ++j) sums[c][j] /= double(counts[c]);
        res.centroids[c] = sums[c];
      } else {
        // farthest point from its current centroid, lowest index on ties,
        // each reseed consuming a distinct point
        std::size_t far = n;
        double far_d = -1.0;
        for (std::size_t p = 0; p < n; ++p) {
          if (reseeded[p]) continue;
          const double d = sq_dist(points[p], res.centroids[res.assignment[p]]);
          if (d > far_d) {
            far_d = d;
            far = p;
          }
        }
        reseeded[far] = true;
        res.centroids[c] = points[far];
      }
    }
  }
  return res;
}

AffordanceDatabase build_database(const std::vector<AffordanceSample>& samples,
                                  std::size_t num_nouns, std::size_t num_verbs,
                                  const AffordanceConfig& cfg) {
  if (samples.empty()) throw ConfigError("affordance database needs at least one sample");
  if (cfg.num_zones > samples.size())
    throw ConfigError("cannot form " + std::to_string(cfg.num_zones) + " zones from " +
                      std::to_string(samples.size()) + " samples");
  const std::size_t dim = samples[0].embedding.size();
  std::vector<std::vector<double>> points;
  points.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.embedding.size() != dim)
      throw DimensionError("embedding width " + std::to_string(s.embedding.size()) +
                           " does not match " + std::to_string(dim));
    if (norm2(s.embedding) < 1e-12) throw ValidationError("zero embedding cannot be normalized");
    if (s.noun < 0 || std::size_t(s.noun) >= num_nouns)
      throw ValidationError("noun id " + std::to_string(s.noun) + " out of range");
    if (s.verb < 0 || std::size_t(s.verb) >= num_verbs)
      throw ValidationError("verb id " + std::to_string(s.verb) + " out of range");
    points.push_back(normalized(s.embedding));
  }

  const KmeansResult km = kmeans_assign(points, cfg.num_zones, cfg.kmeans_iters, cfg.seed);

  AffordanceDatabase db;
  db.dim = dim;
  db.bow_dim = cfg.bow_dim;
  db.num_nouns = num_nouns;
  db.num_verbs = num_verbs;
  for (std::size_t c = 0; c < cfg.num_zones; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t p = 0; p < samples.size(); ++p)
      if (km.assignment[p] == c) members.push_back(p);
    if (members.empty()) continue;

    ZoneRecord z;
    z.zone_id = int(c);
    z.noun_counts.assign(num_nouns, 0);
    z.verb_counts.assign(num_verbs, 0);
    z.embedding = normalized(km.centroids[c]);
    if (norm2(z.embedding) < 1e-12) z.embedding = points[members[0]];
    std::vector<double> bow_mean(cfg.bow_dim, 0.0);
    for (std::size_t p : members) {
      z.noun_counts[std::size_t(samples[p].noun)]++;
      z.verb_counts[std::size_t(samples[p].verb)]++;
      const auto bow = bow_vector(samples[p].narration, cfg.bow_dim);
      for (std::size_t j = 0; j < cfg.bow_dim; ++j) bow_mean[j] += bow[j];
    }
    for (auto& v : bow_mean) v /= double(members.size());
    z.narration_bow = normalized(std::move(bow_mean));
    db.zones.push_back(std::move(z));
  }
  return db;
}

AffordanceDistribution query_affordances(const std::vector<double>& query_embedding,
                                         const std::vector<double>& query_bow,
                                         const AffordanceDatabase& db,
                                         const AffordanceConfig& cfg) {
  if (db.zones.empty()) throw ValidationError("affordance database is empty");
  if (query_embedding.size() != db.dim)
    throw DimensionError("query width " + std::to_string(query_embedding.size()) +
                         " does not match database width " + std::to_string(db.dim));
  if (!query_bow.empty() && query_bow.size() != db.bow_dim)
    throw DimensionError("query bag-of-words width " + std::to_string(query_bow.size()) +
                         " does not match database width " + std::to_string(db.bow_dim));

  const bool has_narration = norm2(query_bow) >= 1e-12;
  const double beta = has_narration ? cfg.beta : 1.0;

  std::vector<std::pair<double, std::size_t>> scored;  // (similarity, zone list index)
  scored.reserve(db.zones.size());
  for (std::size_t i = 0; i < db.zones.size(); ++i) {
    const auto& z = db.zones[i];
    double s = beta * cosine(query_embedding, z.embedding);
    if (has_narration) s += (1.0 - beta) * cosine(query_bow, z.narration_bow);
    scored.emplace_back(s, i);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return db.zones[a.second].zone_id < db.zones[b.second].zone_id;
  });
  const std::size_t k = std::min(cfg.top_k, scored.size());

  double smax = scored[0].first;
  std::vector<double> w(k);
  double wsum = 0;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp((scored[i].first - smax) / cfg.tau);
    wsum += w[i];
  }
  for (auto& x : w) x /= wsum;

  AffordanceDistribution out;
  out.weights = w;
  for (std::size_t i = 0; i < k; ++i)
    out.support_zone_ids.push_back(db.zones[scored[i].second].zone_id);

  auto mix = [&](auto counts_of, std::size_t vocab) {
    std::vector<double> probs(vocab, 0.0);
    double total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& counts = counts_of(db.zones[scored[i].second]);
      for (std::size_t j = 0; j < vocab; ++j) {
        const double v = w[i] * double(counts[j]);
        probs[j] += v;
        total += v;
      }
    }
    if (total <= 0.0) {
      std::fill(probs.begin(), probs.end(), 1.0 / double(vocab));
      return probs;
    }
    for (auto& p : probs) p /= total;
    return probs;
  };
  out.noun_probs = mix([](const ZoneRecord& z) -> const auto& { return z.noun_counts; },
                       db.num_nouns);
  out.verb_probs = mix([](const ZoneRecord& z) -> const auto& { return z.verb_counts; },
                       db.num_verbs);
  return out;
}

std::vector<double> refine_probs(const std::vector<double>& model_probs,
                                 const std::vector<double>& aff_probs, double lambda) {
  if (model_probs.size() != aff_probs.size())
    throw DimensionError("distribution lengths " + std::to_string(model_probs.size()) + " / " +
                         std::to_string(aff_probs.size()) + " differ");
  if (lambda < 0.0 || lambda > 1.0)
    throw ValidationError("mixing strength must lie in [0, 1]");
  if (lambda == 0.0) return model_probs;

  std::vector<double> out(model_probs.size());
  double sum = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::pow(model_probs[i], 1.0 - lambda) * std::pow(aff_probs[i] + 1e-8, lambda);
    sum += out[i];
  }
  if (sum <= 0.0) throw NumericError("refinement collapsed to an all-zero distribution");
  for (auto& p : out) p /= sum;
  return out;
}

void refine_predictions(std::vector<STAPrediction>& preds, const AffordanceDistribution& aff,
                        double lambda) {
  for (auto& p : preds) {
    p.noun_probs = refine_probs(p.noun_probs, aff.noun_probs, lambda);
    p.verb_probs = refine_probs(p.verb_probs, aff.verb_probs, lambda);
  }
}

void save_affordance_db(const std::string& path, const AffordanceDatabase& db) {
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["dim"] = db.dim;
  manifest["bow_dim"] = db.bow_dim;
  manifest["num_nouns"] = db.num_nouns;
  manifest["num_verbs"] = db.num_verbs;
  auto& zones = manifest["zones"] = nlohmann::json::array();
  for (const auto& z : db.zones)
    zones.push_back({{"zone_id", z.zone_id},
                     {"noun_counts", z.noun_counts},
                     {"verb_counts", z.verb_counts}});
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out.write("AFDB", 4);
  const std::uint32_t len = std::uint32_t(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), std::streamsize(text.size()));

  const std::size_t nz = db.zones.size();
  std::vector<double> emb(nz * db.dim), bows(nz * db.bow_dim);
  for (std::size_t i = 0; i < nz; ++i) {
    std::copy(db.zones[i].embedding.begin(), db.zones[i].embedding.end(),
              emb.begin() + std::ptrdiff_t(i * db.dim));
    std::copy(db.zones[i].narration_bow.begin(), db.zones[i].narration_bow.end(),
              bows.begin() + std::ptrdiff_t(i * db.bow_dim));
  }
  write_tensor(out, TensorD::from_data({nz, db.dim}, std::move(emb)));
  write_tensor(out, TensorD::from_data({nz, db.bow_dim}, std::move(bows)));
  if (!out) throw ValidationError("failed writing " + path);
}

AffordanceDatabase load_affordance_db(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "AFDB")
    throw ValidationError(path + " is not an affordance database");
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), std::streamsize(len));
  if (!in) throw ValidationError(path + " is truncated");
  nlohmann::json manifest = nlohmann::json::parse(text, nullptr, false);
  if (manifest.is_discarded() || manifest.value("format_version", 0) != 1)
    throw ValidationError(path + " has an unreadable manifest");

  AffordanceDatabase db;
  db.dim = manifest.at("dim").get<std::size_t>();
  db.bow_dim = manifest.at("bow_dim").get<std::size_t>();
  db.num_nouns = manifest.at("num_nouns").get<std::size_t>();
  db.num_verbs = manifest.at("num_verbs").get<std::size_t>();

  const TensorD emb = read_tensor_f64(in);
  const TensorD bows = read_tensor_f64(in);
  const auto& zlist = manifest.at("zones");
  if (emb.extent(0) != zlist.size() || bows.extent(0) != zlist.size() ||
      emb.extent(1) != db.dim || bows.extent(1) != db.bow_dim)
    throw ValidationError(path + " tensor shapes disagree with the manifest");

  for (std::size_t i = 0; i < zlist.size(); ++i) {
    ZoneRecord z;
    z.zone_id = zlist[i].at("zone_id").get<int>();
    z.noun_counts = zlist[i].at("noun_counts").get<std::vector<std::int64_t>>();
    z.verb_counts = zlist[i].at("verb_counts").get<std::vector<std::int64_t>>();
    if (z.noun_counts.size() != db.num_nouns || z.verb_counts.size() != db.num_verbs)
      throw ValidationError(path + " count histograms disagree with the vocab sizes");
    z.embedding.assign(emb.data().begin() + std::ptrdiff_t(i * db.dim),
                       emb.data().begin() + std::ptrdiff_t((i + 1) * db.dim));
    z.narration_bow.assign(bows.data().begin() + std::ptrdiff_t(i * db.bow_dim),
                           bows.data().begin() + std::ptrdiff_t((i + 1) * db.bow_dim));
    db.zones.push_back(std::move(z));
  }
  return db;
}

}  // namespace sta
