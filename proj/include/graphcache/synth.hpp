#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphcache/corpus.hpp"
#include "graphcache/rng.hpp"

namespace graphcache {

// Parameters of the synthetic relation-extraction corpus. Relations are a
// deterministic function of a latent topic and the entity-type pair, flipped
// to a random other label with probability noise_rate.
struct SynthSpec {
  int n_train = 2000;
  int n_dev = 400;
  int n_test = 400;
  int n_topics_true = 5;
  int n_type_labels = 4;
  int n_relations = 10;  // excluding the negative label
  int context_len = 10;
  double noise_rate = 0.1;
  double entity_pool_split = 0.5;  // test-only entity-name fraction

  void validate() const {
    if (n_train <= 0 || n_dev <= 0 || n_test <= 0)
      throw DataError("split sizes must be positive");
    if (n_topics_true <= 0 || n_type_labels <= 0 || context_len <= 0)
      throw DataError("counts must be positive");
    if (n_relations < 0) throw DataError("n_relations must be >= 0");
    if (noise_rate < 0.0 || noise_rate > 1.0)
      throw DataError("noise_rate must be in [0,1]");
    if (entity_pool_split <= 0.0 || entity_pool_split >= 1.0)
      throw DataError("entity_pool_split must be in (0,1)");
    long long cells = static_cast<long long>(n_topics_true) * n_type_labels *
                      n_type_labels;
    if (n_relations + 1 > cells)
      throw DataError(
          "n_relations+1 exceeds n_topics_true * n_type_labels^2; the "
          "relation table cannot cover all labels");
  }
};

// The factors each instance was generated from, kept for analysis and tests.
struct PlantedFactors {
  int topic = 0;
  int subj_type = 0;
  int obj_type = 0;
  std::string clean_relation;
  bool flipped = false;
};

struct SynthResult {
  SynthSpec spec;
  std::uint64_t seed = 0;
  Dataset train, dev, test;
  std::vector<PlantedFactors> train_factors, dev_factors, test_factors;
  // relation_table[(z * T + ts) * T + to] -> label string
  std::vector<std::string> relation_table;
  std::vector<std::string> label_set;  // negative first, then r1..rn

  const std::string& relation_for(int z, int ts, int to) const {
    int t = spec.n_type_labels;
    return relation_table[static_cast<std::size_t>((z * t + ts) * t + to)];
  }
};

namespace detail {

// Per-topic word inventories are disjoint; a small shared inventory supplies
// topic-neutral filler. Filler stays light so every topic's frequency head
// remains its own words.
constexpr int kTopicWords = 40;
constexpr int kCommonWords = 30;
constexpr double kCommonRate = 0.1;
constexpr int kNamesPerType = 50;

inline std::string topic_word(int z, int j) {
  return "t" + std::to_string(z) + "w" + std::to_string(j);
}
inline std::string common_word(int j) { return "c" + std::to_string(j); }

// Entity names are partitioned by type, the way names predict types in real
// corpora; test-only names live in a pool disjoint from the shared one.
inline std::string entity_name(int type, int i, bool fresh) {
  return (fresh ? "u" : "e") + std::to_string(type) + "_" + std::to_string(i);
}

// Zipf-like weights over a topic's word inventory, heaviest first.
inline std::vector<double> zipf_weights(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) w[static_cast<std::size_t>(j)] = 1.0 / (j + 1);
  return w;
}

}  // namespace detail

inline SynthResult generate_synthetic(const SynthSpec& spec,
                                      std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);

  SynthResult out;
  out.spec = spec;
  out.seed = seed;

  const int Z = spec.n_topics_true;
  const int T = spec.n_type_labels;
  const int R = spec.n_relations;
  const int L = R + 1;

  out.label_set.push_back("no_relation");
  for (int r = 1; r <= R; ++r) out.label_set.push_back("r" + std::to_string(r));

  // Relation lookup table: a seeded shuffle guarantees every label owns at
  // least one (topic, type, type) cell; remaining cells draw uniformly.
  const std::size_t cells = static_cast<std::size_t>(Z) * T * T;
  std::vector<std::size_t> order(cells);
  for (std::size_t i = 0; i < cells; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> table(cells, 0);
  for (std::size_t i = 0; i < cells; ++i) {
    table[order[i]] = (i < static_cast<std::size_t>(L))
                          ? static_cast<int>(i)
                          : static_cast<int>(rng.uniform_int(L));
  }
  out.relation_table.reserve(cells);
  for (std::size_t i = 0; i < cells; ++i)
    out.relation_table.push_back(out.label_set[static_cast<std::size_t>(table[i])]);

  const auto zipf = detail::zipf_weights(detail::kTopicWords);
  double zipf_total = 0.0;
  for (double w : zipf) zipf_total += w;

  auto draw_context = [&](int z) {
    if (rng.bernoulli(detail::kCommonRate))
      return detail::common_word(static_cast<int>(rng.uniform_int(detail::kCommonWords)));
    return detail::topic_word(z, static_cast<int>(rng.sample_discrete(zipf, zipf_total)));
  };

  auto make_split = [&](int n, bool test_split, Dataset& ds,
                        std::vector<PlantedFactors>& factors) {
    ds.instances.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      PlantedFactors pf;
      pf.topic = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(Z)));
      pf.subj_type = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(T)));
      pf.obj_type = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(T)));
      pf.clean_relation = out.relation_for(pf.topic, pf.subj_type, pf.obj_type);

      Instance inst;
      inst.id = i;
      inst.relation = pf.clean_relation;
      if (spec.noise_rate > 0.0 && L > 1 && rng.bernoulli(spec.noise_rate)) {
        // uniform over the other labels
        int cur_idx = 0;
        for (int l = 0; l < L; ++l)
          if (out.label_set[static_cast<std::size_t>(l)] == pf.clean_relation) cur_idx = l;
        int alt = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(L - 1)));
        if (alt >= cur_idx) ++alt;
        inst.relation = out.label_set[static_cast<std::size_t>(alt)];
        pf.flipped = true;
      }
      inst.subj_type = "T" + std::to_string(pf.subj_type);
      inst.obj_type = "T" + std::to_string(pf.obj_type);

      auto pick_name = [&](int type) {
        bool fresh = test_split && rng.bernoulli(spec.entity_pool_split);
        return detail::entity_name(
            type, static_cast<int>(rng.uniform_int(detail::kNamesPerType)), fresh);
      };
      std::string subj_name = pick_name(pf.subj_type);
      std::string obj_name = pick_name(pf.obj_type);

      const int len = spec.context_len + 2;
      int subj_pos = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(len)));
      int obj_pos = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(len - 1)));
      if (obj_pos >= subj_pos) ++obj_pos;

      inst.tokens.resize(static_cast<std::size_t>(len));
      for (int pos = 0; pos < len; ++pos) {
        if (pos == subj_pos) {
          inst.tokens[static_cast<std::size_t>(pos)] = subj_name;
        } else if (pos == obj_pos) {
          inst.tokens[static_cast<std::size_t>(pos)] = obj_name;
        } else {
          inst.tokens[static_cast<std::size_t>(pos)] = draw_context(pf.topic);
        }
      }
      inst.subj_start = subj_pos;
      inst.subj_end = subj_pos + 1;
      inst.obj_start = obj_pos;
      inst.obj_end = obj_pos + 1;

      ds.instances.push_back(std::move(inst));
      factors.push_back(std::move(pf));
    }
    finalize_dataset(ds);
  };

  make_split(spec.n_train, false, out.train, out.train_factors);
  make_split(spec.n_dev, false, out.dev, out.dev_factors);
  make_split(spec.n_test, true, out.test, out.test_factors);
  return out;
}

// JSON sidecar describing how a synthetic corpus was generated.
inline nlohmann::ordered_json synth_manifest(const SynthResult& r) {
  nlohmann::ordered_json j;
  j["spec"] = {{"n_train", r.spec.n_train},
               {"n_dev", r.spec.n_dev},
               {"n_test", r.spec.n_test},
               {"n_topics_true", r.spec.n_topics_true},
               {"n_type_labels", r.spec.n_type_labels},
               {"n_relations", r.spec.n_relations},
               {"context_len", r.spec.context_len},
               {"noise_rate", r.spec.noise_rate},
               {"entity_pool_split", r.spec.entity_pool_split}};
  j["seed"] = r.seed;
  j["labels"] = r.label_set;
  nlohmann::ordered_json tbl = nlohmann::ordered_json::array();
  for (int z = 0; z < r.spec.n_topics_true; ++z)
    for (int ts = 0; ts < r.spec.n_type_labels; ++ts)
      for (int to = 0; to < r.spec.n_type_labels; ++to)
        tbl.push_back({{"topic", z},
                       {"subj_type", ts},
                       {"obj_type", to},
                       {"relation", r.relation_for(z, ts, to)}});
  j["relation_table"] = tbl;
  return j;
}

inline void write_synth_manifest(const SynthResult& r,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << synth_manifest(r).dump(2) << '\n';
}

}  // namespace graphcache
