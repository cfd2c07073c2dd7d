#pragma once

#include <algorithm>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "graphcache/cache.hpp"
#include "graphcache/corpus.hpp"
#include "graphcache/encoder.hpp"
#include "graphcache/fusion.hpp"
#include "graphcache/hetgraph.hpp"
#include "graphcache/metrics.hpp"
#include "graphcache/model.hpp"
#include "graphcache/synth.hpp"
#include "graphcache/topics.hpp"

namespace graphcache {

enum class AttentionScope { Connected, All };

struct TrainConfig {
  int K = 50;
  int P = 2;
  int d = 64;
  int d_e = 32;
  int d_h = 128;
  int batch_size = 16;
  int epochs = 30;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  std::string negative_label;  // empty = keep the dataset's detected label
  bool use_topics = true;
  bool use_types = true;
  AttentionScope attention_scope = AttentionScope::Connected;
  int resync_interval = 0;  // 0 = never hard-recompute the caches
  double lda_alpha = -1.0;  // < 0 means the 50/K default
  double lda_beta = 0.01;
  int lda_iters = 200;
  int min_count = 1;
  bool assert_mode = false;  // verify cache/oracle equality every step

  double effective_alpha() const {
    return lda_alpha < 0.0 ? 50.0 / static_cast<double>(K) : lda_alpha;
  }

  void validate() const {
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    if (epochs < 0) throw DataError("epochs must be >= 0");
    if (d < 1 || d_e < 1 || d_h < 1) throw DataError("dimensions must be >= 1");
    if (use_topics && (P < 1 || K < P))
      throw DataError("need K >= P >= 1 when topics are enabled");
    if (learning_rate <= 0.0) throw DataError("learning_rate must be > 0");
    if (resync_interval < 0) throw DataError("resync_interval must be >= 0");
  }
};

// Property-cache lookup surface shared by training-time and checkpoint-time
// evaluation: topic id / type key -> dense property index.
struct PropertyLookup {
  bool typed = false;
  std::unordered_map<int, int> topic_to_prop;
  std::unordered_map<std::string, int> type_to_prop;
  std::vector<std::pair<int, int>> all_topics;  // (topic id, prop), ascending

  static PropertyLookup from_properties(const std::vector<PropertyId>& props) {
    PropertyLookup lk;
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (props[i].kind == PropertyKind::Topic) {
        lk.topic_to_prop.emplace(props[i].topic, static_cast<int>(i));
        lk.all_topics.emplace_back(props[i].topic, static_cast<int>(i));
      } else {
        lk.type_to_prop.emplace(props[i].key, static_cast<int>(i));
        lk.typed = true;
      }
    }
    return lk;
  }
};

namespace detail {

inline std::vector<std::vector<std::string>> dataset_docs(const Dataset& ds) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(ds.size());
  for (const auto& inst : ds.instances) docs.push_back(inst.tokens);
  return docs;
}

}  // namespace detail

// -------------------------------------------------------------------------
// One training step, forward. Pure: reads the cache state but never mutates
// it. Property means follow the update rule virtually, which keeps the same
// function reusable for finite-difference checks.
// -------------------------------------------------------------------------

struct SentenceForward {
  std::vector<int> topic_props;  // property indices fed to attention
  TopicReprs topic_reprs;        // (topic id, h_p), same order
  AttentionTrace attn;           // valid when topic_reprs is non-empty
  int entity_prop = -1;
  Vec h_topic, h_entity;
  HeadTrace head;
  CrossEntropy ce;
  int gold = -1;
};

struct StepForwardResult {
  std::vector<int> sids;
  std::vector<Vec> h_s;
  std::vector<int> used_props;  // ascending
  std::unordered_map<int, Vec> prop_mean;              // m_p per used prop
  std::unordered_map<int, Vec> prop_repr;              // FFN(m_p)
  std::unordered_map<int, std::vector<int>> prop_slots;  // in-batch neighbors
  std::vector<SentenceForward> sents;
  double loss = 0.0;  // mean cross-entropy over the batch
};

inline StepForwardResult step_forward(const ModelParams& model,
                                      const HeteroGraph& g,
                                      const CacheState& state,
                                      const Dataset& ds,
                                      const std::vector<int>& batch_ids,
                                      const Vocabulary& vocab,
                                      const TrainConfig& cfg) {
  StepForwardResult fw;
  fw.sids = batch_ids;
  fw.h_s.resize(batch_ids.size());
  for (std::size_t i = 0; i < batch_ids.size(); ++i)
    fw.h_s[i] = encode(ds.instances[static_cast<std::size_t>(batch_ids[i])],
                       model.enc, vocab);

  for (std::size_t slot = 0; slot < batch_ids.size(); ++slot)
    for (int p : g.properties_of_sentence(batch_ids[slot]))
      fw.prop_slots[p].push_back(static_cast<int>(slot));

  // Topic properties come first in the dense index, ascending topic id.
  std::vector<std::pair<int, int>> all_topics;  // (topic id, prop)
  for (std::size_t i = 0; i < g.properties.size(); ++i) {
    if (g.properties[i].kind != PropertyKind::Topic) break;
    all_topics.emplace_back(g.properties[i].topic, static_cast<int>(i));
  }

  for (const auto& [p, slots] : fw.prop_slots) fw.used_props.push_back(p);
  if (cfg.use_topics && cfg.attention_scope == AttentionScope::All) {
    for (const auto& [topic, prop] : all_topics)
      if (!fw.prop_slots.count(prop)) fw.used_props.push_back(prop);
  }
  std::sort(fw.used_props.begin(), fw.used_props.end());

  // m_p = hat_h[p] + sum over in-batch neighbors of (h_s - M[s]) / |N(p)|;
  // untouched properties keep their stored mean.
  for (int p : fw.used_props) {
    Vec m(state.hat_h.row(static_cast<std::size_t>(p)),
          state.hat_h.row(static_cast<std::size_t>(p)) + state.hat_h.cols);
    auto it = fw.prop_slots.find(p);
    if (it != fw.prop_slots.end()) {
      const double inv_deg = 1.0 / static_cast<double>(g.degree(p));
      for (int slot : it->second) {
        const double* mem = state.memory.row(
            static_cast<std::size_t>(batch_ids[static_cast<std::size_t>(slot)]));
        const Vec& h = fw.h_s[static_cast<std::size_t>(slot)];
        for (std::size_t j = 0; j < m.size(); ++j)
          m[j] += (h[j] - mem[j]) * inv_deg;
      }
    }
    Vec repr = matvec(model.ffn.W, m);
    for (std::size_t j = 0; j < repr.size(); ++j) repr[j] += model.ffn.b[j];
    fw.prop_mean.emplace(p, std::move(m));
    fw.prop_repr.emplace(p, std::move(repr));
  }

  fw.sents.resize(batch_ids.size());
  double total_loss = 0.0;
  for (std::size_t slot = 0; slot < batch_ids.size(); ++slot) {
    const int sid = batch_ids[slot];
    const Instance& inst = ds.instances[static_cast<std::size_t>(sid)];
    SentenceForward& sf = fw.sents[slot];

    if (cfg.use_topics && g.P > 0) {
      if (cfg.attention_scope == AttentionScope::All) {
        for (const auto& [topic, prop] : all_topics) {
          sf.topic_props.push_back(prop);
          sf.topic_reprs.emplace_back(topic, fw.prop_repr.at(prop));
        }
      } else {
        const auto& props = g.properties_of_sentence(sid);
        for (int i = 0; i < g.P; ++i) {
          int prop = props[static_cast<std::size_t>(i)];
          sf.topic_props.push_back(prop);
          sf.topic_reprs.emplace_back(
              g.properties[static_cast<std::size_t>(prop)].topic,
              fw.prop_repr.at(prop));
        }
      }
    }
    if (!sf.topic_reprs.empty()) {
      sf.attn = topic_attention_traced(fw.h_s[slot], sf.topic_reprs, model.attn);
      sf.h_topic = sf.attn.output;
    } else {
      sf.h_topic = Vec(static_cast<std::size_t>(cfg.d), 0.0);
    }

    sf.entity_prop = (cfg.use_types && g.typed) ? g.type_prop_of_sentence(sid) : -1;
    sf.h_entity = sf.entity_prop >= 0 ? fw.prop_repr.at(sf.entity_prop)
                                      : Vec(static_cast<std::size_t>(cfg.d), 0.0);

    sf.head = classify_traced(fw.h_s[slot], sf.h_topic, sf.h_entity, model.head);
    sf.gold = ds.label_index(inst.relation);
    if (sf.gold < 0)
      throw DataError("unknown label in data: " + inst.relation);
    sf.ce = cross_entropy(sf.head.logits, sf.gold);
    total_loss += sf.ce.loss;
  }
  fw.loss = total_loss / static_cast<double>(batch_ids.size());
  return fw;
}

// -------------------------------------------------------------------------
// One training step, backward. The stored cache mean and memory rows are
// constants for step-t differentiation; gradients reach in-batch sentence
// representations through the head, the attention query, and the cache path.
// -------------------------------------------------------------------------

inline void step_backward(const ModelParams& model, const HeteroGraph& g,
                          const TrainConfig& cfg, const StepForwardResult& fw,
                          const Dataset& ds, const Vocabulary& vocab,
                          ModelGrads& grads) {
  const std::size_t batch_n = fw.sids.size();
  const double inv_b = 1.0 / static_cast<double>(batch_n);
  std::vector<Vec> d_h_s(batch_n, Vec(static_cast<std::size_t>(cfg.d), 0.0));
  std::unordered_map<int, Vec> d_h_p;
  for (int p : fw.used_props)
    d_h_p.emplace(p, Vec(static_cast<std::size_t>(cfg.d), 0.0));

  // Accumulate in ascending instance-id order.
  std::vector<std::size_t> order(batch_n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fw.sids[a] < fw.sids[b];
  });

  for (std::size_t slot : order) {
    const SentenceForward& sf = fw.sents[slot];
    Vec d_logits(sf.ce.grad.size());
    for (std::size_t i = 0; i < d_logits.size(); ++i)
      d_logits[i] = sf.ce.grad[i] * inv_b;

    Vec d_h_topic(static_cast<std::size_t>(cfg.d), 0.0);
    Vec d_h_entity(static_cast<std::size_t>(cfg.d), 0.0);
    classify_backward(sf.head, model.head, d_logits, grads.head, d_h_s[slot],
                      d_h_topic, d_h_entity);

    if (!sf.topic_reprs.empty()) {
      std::vector<Vec> d_topic(sf.topic_reprs.size(),
                               Vec(static_cast<std::size_t>(cfg.d), 0.0));
      attention_backward(fw.h_s[slot], sf.topic_reprs, model.attn, sf.attn,
                         d_h_topic, grads.attn, d_h_s[slot], d_topic);
      for (std::size_t j = 0; j < sf.topic_props.size(); ++j) {
        Vec& acc = d_h_p.at(sf.topic_props[j]);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d_topic[j][i];
      }
    }
    if (sf.entity_prop >= 0) {
      Vec& acc = d_h_p.at(sf.entity_prop);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d_h_entity[i];
    }
  }

  // FFN backward per property, then the cache path back to the batch.
  for (int p : fw.used_props) {
    const Vec& dp = d_h_p.at(p);
    const Vec& mean = fw.prop_mean.at(p);
    add_outer(grads.ffn.W, dp, mean);
    for (std::size_t i = 0; i < dp.size(); ++i) grads.ffn.b[i] += dp[i];
    auto it = fw.prop_slots.find(p);
    if (it == fw.prop_slots.end()) continue;
    Vec d_mean = matvec_t(model.ffn.W, dp);
    const double inv_deg = 1.0 / static_cast<double>(g.degree(p));
    for (int slot : it->second)
      axpy(d_h_s[static_cast<std::size_t>(slot)], inv_deg, d_mean);
  }

  for (std::size_t slot : order) {
    const Instance& inst =
        ds.instances[static_cast<std::size_t>(fw.sids[slot])];
    encoder_backward(inst, model.enc, vocab, d_h_s[slot], grads.enc);
  }
}

// -------------------------------------------------------------------------
// Inference over any split against a trained cache. Topics resolve through
// fold-in assignments; topics or type pairs with no cache in the trained
// graph fall back to the exact zero vector.
// -------------------------------------------------------------------------

inline Vec infer_logits(const ModelParams& model, const PropertyLookup& lookup,
                        const CacheState& state, const Instance& inst,
                        const std::vector<int>* assigned_topics,
                        const Vocabulary& vocab, const TrainConfig& cfg) {
  Vec h_s = encode(inst, model.enc, vocab);

  TopicReprs topic_reprs;
  if (cfg.use_topics && assigned_topics) {
    if (cfg.attention_scope == AttentionScope::All) {
      for (const auto& [topic, prop] : lookup.all_topics)
        topic_reprs.emplace_back(topic, property_repr(state, prop, model.ffn));
    } else {
      for (int t : *assigned_topics) {
        int prop = -1;
        auto it = lookup.topic_to_prop.find(t);
        if (it != lookup.topic_to_prop.end()) prop = it->second;
        if (prop >= 0)
          topic_reprs.emplace_back(t, property_repr(state, prop, model.ffn));
      }
    }
  }
  Vec h_topic = topic_reprs.empty()
                    ? Vec(static_cast<std::size_t>(cfg.d), 0.0)
                    : topic_attention(h_s, topic_reprs, model.attn).first;

  Vec h_entity(static_cast<std::size_t>(cfg.d), 0.0);
  if (cfg.use_types && lookup.typed) {
    if (auto key = entity_type_key(inst)) {
      auto it = lookup.type_to_prop.find(*key);
      if (it != lookup.type_to_prop.end())
        h_entity = property_repr(state, it->second, model.ffn);
    }
  }
  return classify(h_s, h_topic, h_entity, model.head);
}

inline std::vector<std::string> predict_labels(
    const ModelParams& model, const PropertyLookup& lookup,
    const CacheState& state, const Dataset& data,
    const TopicAssignment* assignment, const Vocabulary& vocab,
    const TrainConfig& cfg, const std::vector<std::string>& labels) {
  std::vector<std::string> preds;
  preds.reserve(data.size());
  for (const auto& inst : data.instances) {
    const std::vector<int>* topics = nullptr;
    if (assignment)
      topics = &assignment->topics[static_cast<std::size_t>(inst.id)];
    Vec logits = infer_logits(model, lookup, state, inst, topics, vocab, cfg);
    preds.push_back(labels[static_cast<std::size_t>(argmax_label(logits))]);
  }
  return preds;
}

inline MetricsReport evaluate_dataset(
    const ModelParams& model, const PropertyLookup& lookup,
    const CacheState& state, const Dataset& data,
    const TopicAssignment* assignment, const Vocabulary& vocab,
    const TrainConfig& cfg, const std::vector<std::string>& labels,
    const std::string& negative_label) {
  for (const auto& inst : data.instances)
    if (!std::binary_search(labels.begin(), labels.end(), inst.relation))
      throw DataError("unknown label in data: " + inst.relation);
  std::vector<std::string> gold;
  gold.reserve(data.size());
  for (const auto& inst : data.instances) gold.push_back(inst.relation);
  auto preds = predict_labels(model, lookup, state, data, assignment, vocab,
                              cfg, labels);
  return compute_metrics(gold, preds, negative_label);
}

// Keeps test instances whose subject and object strings both never occur as
// an entity string in train. Ids are re-densified.
inline Dataset filter_unseen(const Dataset& train, const Dataset& test) {
  std::unordered_set<std::string> seen;
  for (const auto& inst : train.instances) {
    seen.insert(inst.subj_text());
    seen.insert(inst.obj_text());
  }
  Dataset out;
  out.labels = test.labels;
  out.negative_label = test.negative_label;
  out.has_types = true;
  for (const auto& inst : test.instances) {
    if (seen.count(inst.subj_text()) || seen.count(inst.obj_text())) continue;
    Instance copy = inst;
    copy.id = static_cast<int>(out.instances.size());
    out.has_types = out.has_types && copy.has_types();
    out.instances.push_back(std::move(copy));
  }
  if (out.instances.empty()) out.has_types = test.has_types;
  return out;
}

// -------------------------------------------------------------------------
// Full training run: Alg-style loop of sample / encode / cache update /
// fuse / commit / backprop, with per-epoch dev evaluation and best-dev
// checkpoint selection. Deterministic given the seed.
// -------------------------------------------------------------------------

struct TrainResult {
  TrainConfig config;
  ModelParams model;   // best-dev parameters
  CacheState state;    // cache state at the best-dev snapshot
  TopicModel topics;   // fitted model (K = 0 when topics are disabled)
  Vocabulary vocab;
  HeteroGraph graph;
  std::vector<std::string> labels;
  std::string negative_label;
  int best_epoch = 0;
  MetricsReport test_metrics;
  nlohmann::ordered_json manifest;
};

namespace detail {

inline nlohmann::ordered_json config_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["K"] = c.K;
  j["P"] = c.P;
  j["d"] = c.d;
  j["d_e"] = c.d_e;
  j["d_h"] = c.d_h;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["seed"] = c.seed;
  j["negative_label"] = c.negative_label;
  j["use_topics"] = c.use_topics;
  j["use_types"] = c.use_types;
  j["attention_scope"] =
      c.attention_scope == AttentionScope::Connected ? "connected" : "all";
  j["resync_interval"] = c.resync_interval;
  j["lda_alpha"] = c.effective_alpha();
  j["lda_beta"] = c.lda_beta;
  j["lda_iters"] = c.lda_iters;
  j["min_count"] = c.min_count;
  return j;
}

inline nlohmann::ordered_json metrics_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["accuracy"] = m.accuracy;
  j["n"] = m.n;
  return j;
}

constexpr std::uint64_t kShuffleStream = 0x5bd1e995u;
constexpr std::uint64_t kDevAssignStream = 1;
constexpr std::uint64_t kTestAssignStream = 2;

}  // namespace detail

inline TrainResult train(const TrainConfig& cfg_in, const Dataset& train_ds,
                         const Dataset& dev_ds, const Dataset& test_ds,
                         const TopicModel* pretrained = nullptr,
                         std::ostream* log = nullptr) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  if (train_ds.instances.empty()) throw DataError("empty dataset");
  if (cfg.use_types && !train_ds.has_types)
    throw DataError("entity-type caches need typed data; rerun without types");

  TrainResult out;
  out.labels = train_ds.labels;
  out.negative_label = cfg.negative_label.empty()
                           ? train_ds.negative_label
                           : detail::pick_negative(out.labels, cfg.negative_label);
  out.vocab = build_vocab(train_ds, cfg.min_count);

  TopicAssignment train_assign;  // P = 0 when topics are off
  TopicAssignment dev_assign, test_assign;
  if (cfg.use_topics) {
    auto docs = detail::dataset_docs(train_ds);
    if (pretrained) {
      if (pretrained->vocab_size != out.vocab.size())
        throw DataError("topic model vocabulary does not match the dataset");
      if (pretrained->K < cfg.P)
        throw DataError("topic model has fewer topics than P");
      out.topics = *pretrained;
      cfg.K = out.topics.K;
    } else {
      out.topics = fit_lda(docs, out.vocab, cfg.K, cfg.effective_alpha(),
                           cfg.lda_beta, cfg.lda_iters, cfg.seed);
    }
    train_assign = assign_topics(out.topics, docs, out.vocab, cfg.P, cfg.seed);
    dev_assign = assign_topics(out.topics, detail::dataset_docs(dev_ds),
                               out.vocab, cfg.P,
                               mix_seed(cfg.seed + detail::kDevAssignStream));
    test_assign = assign_topics(out.topics, detail::dataset_docs(test_ds),
                                out.vocab, cfg.P,
                                mix_seed(cfg.seed + detail::kTestAssignStream));
  }

  out.graph = build_graph(train_ds, train_assign, cfg.use_types);
  const PropertyLookup lookup = PropertyLookup::from_properties(out.graph.properties);

  ModelParams model = init_model(out.vocab.size(), static_cast<int>(out.labels.size()),
                                 cfg.d_e, cfg.d, cfg.d_h, cfg.seed);
  CacheState state = init_state(out.graph, cfg.d);
  ModelGrads grads = zero_grads(model);

  ModelParams best_model = model;
  CacheState best_state = state;
  double best_f1 = -1.0;
  int best_epoch = 0;

  nlohmann::ordered_json epoch_log = nlohmann::ordered_json::array();
  Rng order_rng(mix_seed(cfg.seed ^ detail::kShuffleStream));
  std::vector<int> order(train_ds.size());
  std::iota(order.begin(), order.end(), 0);

  std::uint64_t step_count = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(),
                                       start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<int> batch_ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));

      StepForwardResult fw = step_forward(model, out.graph, state, train_ds,
                                          batch_ids, out.vocab, cfg);
      BatchReps reps;
      reps.reserve(batch_ids.size());
      for (std::size_t i = 0; i < batch_ids.size(); ++i)
        reps.emplace_back(batch_ids[i], &fw.h_s[i]);

      updater_step(state, out.graph, reps);
      commit_memory(state, reps);
      ++step_count;

      if (cfg.assert_mode) {
        Matrix oracle = oracle_means(out.graph, state.memory);
        if (max_abs_diff(state.hat_h, oracle) > 1e-5)
          throw InvariantError("cache drifted from the exact neighborhood means");
      }
      if (cfg.resync_interval > 0 &&
          step_count % static_cast<std::uint64_t>(cfg.resync_interval) == 0)
        state.hat_h = oracle_means(out.graph, state.memory);

      grads.zero();
      step_backward(model, out.graph, cfg, fw, train_ds, out.vocab, grads);
      sgd_update(model, grads, cfg.learning_rate);

      epoch_loss += fw.loss;
      ++n_batches;
    }

    MetricsReport dev = evaluate_dataset(model, lookup, state, dev_ds,
                                         cfg.use_topics ? &dev_assign : nullptr,
                                         out.vocab, cfg, out.labels,
                                         out.negative_label);
    nlohmann::ordered_json e;
    e["epoch"] = epoch;
    e["train_loss"] = epoch_loss / static_cast<double>(std::max<std::size_t>(n_batches, 1));
    e["dev"] = detail::metrics_json(dev);
    epoch_log.push_back(e);
    if (log)
      *log << "epoch " << epoch << "  loss "
           << epoch_loss / static_cast<double>(std::max<std::size_t>(n_batches, 1))
           << "  dev_f1 " << dev.f1 << "  dev_acc " << dev.accuracy << '\n';

    if (dev.f1 > best_f1) {
      best_f1 = dev.f1;
      best_epoch = epoch;
      best_model = model;
      best_state = state;
    }
  }

  out.config = cfg;
  out.model = std::move(best_model);
  out.state = std::move(best_state);
  out.best_epoch = best_epoch;
  out.test_metrics = evaluate_dataset(out.model, lookup, out.state, test_ds,
                                      cfg.use_topics ? &test_assign : nullptr,
                                      out.vocab, cfg, out.labels,
                                      out.negative_label);

  nlohmann::ordered_json man;
  man["config"] = detail::config_json(cfg);
  man["data"] = {
      {"train", {{"hash", hex64(dataset_fingerprint(train_ds))}, {"n", train_ds.size()}}},
      {"dev", {{"hash", hex64(dataset_fingerprint(dev_ds))}, {"n", dev_ds.size()}}},
      {"test", {{"hash", hex64(dataset_fingerprint(test_ds))}, {"n", test_ds.size()}}}};
  man["labels"] = out.labels;
  man["negative_label"] = out.negative_label;
  man["vocab"] = out.vocab.words;
  nlohmann::ordered_json props = nlohmann::ordered_json::array();
  for (const auto& p : out.graph.properties) {
    if (p.kind == PropertyKind::Topic)
      props.push_back({{"kind", "topic"}, {"topic", p.topic}});
    else
      props.push_back({{"kind", "type_pair"}, {"key", p.key}});
  }
  man["properties"] = props;
  man["epochs"] = epoch_log;
  man["best_epoch"] = best_epoch;
  man["test"] = detail::metrics_json(out.test_metrics);
  out.manifest = std::move(man);
  return out;
}

// -------------------------------------------------------------------------
// Finite-difference verification of the full step loss against the analytic
// gradients, over every parameter group.
// -------------------------------------------------------------------------

inline double grad_check(const ModelParams& model_in, const HeteroGraph& g,
                         const CacheState& state, const Dataset& ds,
                         const std::vector<int>& batch_ids,
                         const Vocabulary& vocab, const TrainConfig& cfg,
                         double epsilon) {
  if (epsilon <= 0.0) throw DataError("epsilon must be > 0");
  ModelParams model = model_in;
  ModelGrads grads = zero_grads(model);
  StepForwardResult fw =
      step_forward(model, g, state, ds, batch_ids, vocab, cfg);
  step_backward(model, g, cfg, fw, ds, vocab, grads);

  auto loss_at = [&]() {
    return step_forward(model, g, state, ds, batch_ids, vocab, cfg).loss;
  };

  double max_rel = 0.0;
  auto check_span = [&](double* params, const double* analytic, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const double saved = params[i];
      params[i] = saved + epsilon;
      const double lp = loss_at();
      params[i] = saved - epsilon;
      const double lm = loss_at();
      params[i] = saved;
      const double fd = (lp - lm) / (2.0 * epsilon);
      const double diff = std::abs(analytic[i] - fd);
      // central differences on a double-precision loss cannot resolve below
      // ~1e-11; agreement within 1e-9 counts as exact for near-zero gradients
      if (diff <= 1e-9) continue;
      max_rel = std::max(max_rel, diff / (std::abs(analytic[i]) + 1e-8));
    }
  };

  check_span(model.enc.word_emb.a.data(), grads.enc.word_emb.a.data(),
             model.enc.word_emb.a.size());
  check_span(model.enc.marker.a.data(), grads.enc.marker.a.data(),
             model.enc.marker.a.size());
  check_span(model.enc.W.a.data(), grads.enc.W.a.data(), model.enc.W.a.size());
  check_span(model.enc.b.data(), grads.enc.b.data(), model.enc.b.size());
  check_span(model.ffn.W.a.data(), grads.ffn.W.a.data(), model.ffn.W.a.size());
  check_span(model.ffn.b.data(), grads.ffn.b.data(), model.ffn.b.size());
  check_span(model.attn.Wq.a.data(), grads.attn.Wq.a.data(), model.attn.Wq.a.size());
  check_span(model.attn.Wk.a.data(), grads.attn.Wk.a.data(), model.attn.Wk.a.size());
  check_span(model.attn.Wv.a.data(), grads.attn.Wv.a.data(), model.attn.Wv.a.size());
  check_span(model.head.W1.a.data(), grads.head.W1.a.data(), model.head.W1.a.size());
  check_span(model.head.b1.data(), grads.head.b1.data(), model.head.b1.size());
  check_span(model.head.W2.a.data(), grads.head.W2.a.data(), model.head.W2.a.size());
  check_span(model.head.b2.data(), grads.head.b2.data(), model.head.b2.size());
  return max_rel;
}

// A seeded tiny configuration for end-to-end gradient verification: small
// synthetic corpus, random topic assignment, random cache state.
inline double grad_check_random_config(std::uint64_t seed, double epsilon) {
  Rng rng(mix_seed(seed));

  SynthSpec spec;
  spec.n_train = 10 + static_cast<int>(rng.uniform_int(8));
  spec.n_dev = 4;
  spec.n_test = 4;
  spec.n_topics_true = 2 + static_cast<int>(rng.uniform_int(2));
  spec.n_type_labels = 2;
  spec.n_relations = 2 + static_cast<int>(rng.uniform_int(3));
  spec.context_len = 4 + static_cast<int>(rng.uniform_int(4));
  SynthResult r = generate_synthetic(spec, seed);

  TrainConfig cfg;
  cfg.K = 3 + static_cast<int>(rng.uniform_int(2));
  cfg.P = 1 + static_cast<int>(rng.uniform_int(2));
  cfg.d = 3 + static_cast<int>(rng.uniform_int(3));
  cfg.d_e = 2 + static_cast<int>(rng.uniform_int(2));
  cfg.d_h = 4 + static_cast<int>(rng.uniform_int(3));
  cfg.batch_size = 4;
  cfg.seed = seed;
  cfg.attention_scope =
      seed % 3 == 0 ? AttentionScope::All : AttentionScope::Connected;

  Vocabulary vocab = build_vocab(r.train, 1);
  TopicAssignment assign;
  assign.P = cfg.P;
  assign.topics.resize(r.train.size());
  for (auto& topics : assign.topics) {
    std::vector<int> pool(static_cast<std::size_t>(cfg.K));
    std::iota(pool.begin(), pool.end(), 0);
    rng.shuffle(pool);
    topics.assign(pool.begin(), pool.begin() + cfg.P);
  }
  HeteroGraph g = build_graph(r.train, assign, true);

  ModelParams model = init_model(vocab.size(), static_cast<int>(r.train.labels.size()),
                                 cfg.d_e, cfg.d, cfg.d_h, seed);
  CacheState state = init_state(g, cfg.d);
  state.hat_h.fill_uniform(rng, -0.5, 0.5);
  state.memory.fill_uniform(rng, -0.5, 0.5);

  std::vector<int> ids(r.train.size());
  std::iota(ids.begin(), ids.end(), 0);
  rng.shuffle(ids);
  ids.resize(static_cast<std::size_t>(cfg.batch_size));
  return grad_check(model, g, state, r.train, ids, vocab, cfg, epsilon);
}

}  // namespace graphcache
