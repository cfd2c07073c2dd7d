#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>

#include "graphcache/bench.hpp"
#include "graphcache/trainer.hpp"
#include "helpers.hpp"

using namespace graphcache;

namespace {

SynthResult small_synth(std::uint64_t seed, int n_train = 120, int n_dev = 30,
                        int n_test = 30) {
  SynthSpec spec;
  spec.n_train = n_train;
  spec.n_dev = n_dev;
  spec.n_test = n_test;
  spec.n_topics_true = 3;
  spec.n_type_labels = 2;
  spec.n_relations = 3;
  spec.context_len = 6;
  return generate_synthetic(spec, seed);
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.K = 3;
  cfg.P = 2;
  cfg.d = 4;
  cfg.d_e = 3;
  cfg.d_h = 5;
  cfg.batch_size = 4;
  cfg.epochs = 2;
  cfg.learning_rate = 0.1;
  cfg.lda_alpha = 0.5;
  cfg.lda_iters = 30;
  return cfg;
}

struct TinyWorld {
  Dataset ds;
  Vocabulary vocab;
  HeteroGraph graph;
  ModelParams model;
  CacheState state;
  TrainConfig cfg;
};

TinyWorld make_world(std::uint64_t seed, bool typed = true) {
  TinyWorld w;
  w.cfg = tiny_config();
  w.cfg.seed = seed;
  SynthResult r = small_synth(seed, 12, 4, 4);
  w.ds = r.train;
  w.vocab = build_vocab(w.ds, 1);

  TopicAssignment a;
  a.P = 2;
  for (std::size_t i = 0; i < w.ds.size(); ++i)
    a.topics.push_back({static_cast<int>(i % 3), static_cast<int>((i + 1) % 3)});
  w.graph = build_graph(w.ds, a, typed);
  w.cfg.use_types = typed;

  w.model = init_model(w.vocab.size(), static_cast<int>(w.ds.labels.size()),
                       w.cfg.d_e, w.cfg.d, w.cfg.d_h, seed);
  w.state = init_state(w.graph, w.cfg.d);
  Rng rng(mix_seed(seed + 17));
  w.state.hat_h.fill_uniform(rng, -0.5, 0.5);
  w.state.memory.fill_uniform(rng, -0.5, 0.5);
  return w;
}

}  // namespace

TEST_CASE("micro-F1 hand confusion example") {
  std::vector<std::string> gold = {"r1", "r1", "r2", "neg"};
  std::vector<std::string> pred = {"r1", "r2", "r2", "r1"};
  MetricsReport m = compute_metrics(gold, pred, "neg");
  CHECK(m.precision == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(m.recall == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(m.f1 - 4.0 / 7.0) <= 1e-12);
  CHECK(m.accuracy == Catch::Approx(0.5));
}

TEST_CASE("all-negative predictions score zero") {
  std::vector<std::string> gold = {"r1", "neg", "r2"};
  std::vector<std::string> pred = {"neg", "neg", "neg"};
  MetricsReport m = compute_metrics(gold, pred, "neg");
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
}

TEST_CASE("perfect predictions score one") {
  std::vector<std::string> gold = {"r1", "neg", "r2", "r1"};
  MetricsReport m = compute_metrics(gold, gold, "neg");
  CHECK(m.f1 == 1.0);
  CHECK(m.accuracy == 1.0);
}

TEST_CASE("harmonic-mean identity holds on fuzzed reports") {
  Rng rng(5);
  std::vector<std::string> labels = {"neg", "a", "b", "c"};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(30);
    std::vector<std::string> gold, pred;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(labels[rng.uniform_int(4)]);
      pred.push_back(labels[rng.uniform_int(4)]);
    }
    MetricsReport m = compute_metrics(gold, pred, "neg");
    CHECK(std::abs(m.f1 * (m.precision + m.recall) - 2.0 * m.precision * m.recall) <= 1e-12);
  }
}

TEST_CASE("filter_unseen removes every instance when test equals train") {
  SynthResult r = small_synth(3);
  Dataset filtered = filter_unseen(r.train, r.train);
  CHECK(filtered.instances.empty());
}

TEST_CASE("filter_unseen keeps everything when entities are fresh") {
  SynthResult r = small_synth(4);
  Dataset fresh = r.test;
  for (auto& inst : fresh.instances) {
    inst.tokens[static_cast<std::size_t>(inst.subj_start)] = "brand_new_subj";
    inst.tokens[static_cast<std::size_t>(inst.obj_start)] = "brand_new_obj";
  }
  Dataset filtered = filter_unseen(r.train, fresh);
  CHECK(filtered.size() == fresh.size());
  for (std::size_t i = 0; i < filtered.size(); ++i)
    CHECK(filtered.instances[i].id == static_cast<int>(i));
}

TEST_CASE("filtered size tracks the square of the pool split") {
  SynthSpec spec;
  spec.n_train = 800;
  spec.n_dev = 20;
  spec.n_test = 400;
  spec.entity_pool_split = 0.5;

  std::size_t kept = 0, total = 0;
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    SynthResult r = generate_synthetic(spec, seed);
    kept += filter_unseen(r.train, r.test).size();
    total += r.test.size();
  }
  const double ratio = static_cast<double>(kept) / static_cast<double>(total);
  CHECK(ratio >= 0.25 * 0.9);
  CHECK(ratio <= 0.25 * 1.1);
}

TEST_CASE("full-step analytic gradients match finite differences") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    TinyWorld w = make_world(seed);
    std::vector<int> batch = {0, 3, 5, 9};
    double err = grad_check(w.model, w.graph, w.state, w.ds, batch, w.vocab,
                            w.cfg, 1e-5);
    INFO("seed " << seed);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("gradient check covers the all-topics attention scope") {
  TinyWorld w = make_world(6);
  w.cfg.attention_scope = AttentionScope::All;
  double err = grad_check(w.model, w.graph, w.state, w.ds, {1, 2, 4}, w.vocab,
                          w.cfg, 1e-5);
  CHECK(err <= 1e-4);
}

TEST_CASE("gradient check on an untyped graph") {
  TinyWorld w = make_world(7, /*typed=*/false);
  double err = grad_check(w.model, w.graph, w.state, w.ds, {0, 1, 2}, w.vocab,
                          w.cfg, 1e-5);
  CHECK(err <= 1e-4);
}

TEST_CASE("finite-difference error is truncation dominated") {
  TinyWorld w = make_world(8);
  std::vector<int> batch = {2, 4, 6};
  double coarse = grad_check(w.model, w.graph, w.state, w.ds, batch, w.vocab,
                             w.cfg, 1e-3);
  double fine = grad_check(w.model, w.graph, w.state, w.ds, batch, w.vocab,
                           w.cfg, 1e-5);
  CHECK(fine < coarse);
}

TEST_CASE("gradients vanish where the loss is already flat") {
  TinyWorld w = make_world(9);
  // a batch of sentences sharing one gold label, with that label's bias
  // pushed far up: every sentence's loss saturates at zero
  std::vector<int> batch;
  const std::string& shared = w.ds.instances[0].relation;
  for (const auto& inst : w.ds.instances)
    if (inst.relation == shared && batch.size() < 3) batch.push_back(inst.id);
  REQUIRE(batch.size() >= 2);
  w.model.head.b2[static_cast<std::size_t>(w.ds.label_index(shared))] += 200.0;
  StepForwardResult fw =
      step_forward(w.model, w.graph, w.state, w.ds, batch, w.vocab, w.cfg);
  ModelGrads grads = zero_grads(w.model);
  step_backward(w.model, w.graph, w.cfg, fw, w.ds, w.vocab, grads);

  double max_abs = 0.0;
  for (double v : grads.enc.word_emb.a) max_abs = std::max(max_abs, std::abs(v));
  for (double v : grads.head.W1.a) max_abs = std::max(max_abs, std::abs(v));
  for (double v : grads.attn.Wq.a) max_abs = std::max(max_abs, std::abs(v));
  CHECK(fw.loss <= 1e-8);
  CHECK(max_abs <= 1e-8);
}

TEST_CASE("zero epochs returns the initialized checkpoint") {
  SynthResult r = small_synth(10);
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  TrainResult out = train(cfg, r.train, r.dev, r.test);

  ModelParams fresh = init_model(out.vocab.size(),
                                 static_cast<int>(out.labels.size()), cfg.d_e,
                                 cfg.d, cfg.d_h, cfg.seed);
  CHECK(out.model.enc.word_emb == fresh.enc.word_emb);
  CHECK(out.model.head.W1 == fresh.head.W1);
  CHECK(out.best_epoch == 0);
  for (double v : out.state.hat_h.a) CHECK(v == 0.0);
}

TEST_CASE("training is bit-deterministic in the seed") {
  SynthResult r = small_synth(11);
  TrainConfig cfg = tiny_config();
  cfg.seed = 77;

  TrainResult a = train(cfg, r.train, r.dev, r.test);
  TrainResult b = train(cfg, r.train, r.dev, r.test);

  auto dir = std::filesystem::temp_directory_path() / "graphcache_tests";
  std::filesystem::create_directories(dir);
  save_checkpoint(to_checkpoint(a.model, a.state), (dir / "a.ck").string());
  save_checkpoint(to_checkpoint(b.model, b.state), (dir / "b.ck").string());
  CHECK(hash_file((dir / "a.ck").string()) == hash_file((dir / "b.ck").string()));
  CHECK(a.manifest.dump() == b.manifest.dump());

  TrainConfig other = cfg;
  other.seed = 78;
  TrainResult c = train(other, r.train, r.dev, r.test);
  CHECK_FALSE(a.model.enc.word_emb == c.model.enc.word_emb);
}

TEST_CASE("assert mode verifies the cache against the oracle every step") {
  SynthResult r = small_synth(12);
  TrainConfig cfg = tiny_config();
  cfg.assert_mode = true;
  cfg.epochs = 2;
  CHECK_NOTHROW(train(cfg, r.train, r.dev, r.test));
}

TEST_CASE("resync interval leaves results equivalent") {
  SynthResult r = small_synth(18);
  TrainConfig cfg = tiny_config();
  TrainResult plain = train(cfg, r.train, r.dev, r.test);
  cfg.resync_interval = 3;
  TrainResult resynced = train(cfg, r.train, r.dev, r.test);
  CHECK(max_abs_diff(plain.state.hat_h, resynced.state.hat_h) <= 1e-6);
}

TEST_CASE("types flag requires typed data") {
  SynthResult r = small_synth(13);
  for (auto& inst : r.train.instances) inst.obj_type.clear();
  finalize_dataset(r.train);
  REQUIRE_FALSE(r.train.has_types);
  TrainConfig cfg = tiny_config();
  cfg.use_types = true;
  CHECK_THROWS_AS(train(cfg, r.train, r.dev, r.test), DataError);
}

TEST_CASE("disabling both cache kinds reduces to backbone plus head") {
  SynthResult r = small_synth(14);
  TrainConfig cfg = tiny_config();
  cfg.use_topics = false;
  cfg.use_types = false;
  cfg.epochs = 1;
  TrainResult out = train(cfg, r.train, r.dev, r.test);
  REQUIRE(out.graph.n_props() == 0);

  PropertyLookup lookup = PropertyLookup::from_properties(out.graph.properties);
  const Instance& inst = r.test.instances[0];
  Vec logits = infer_logits(out.model, lookup, out.state, inst, nullptr,
                            out.vocab, out.config);
  Vec h = encode(inst, out.model.enc, out.vocab);
  Vec zeros(static_cast<std::size_t>(cfg.d), 0.0);
  Vec direct = classify(h, zeros, zeros, out.model.head);
  CHECK(logits == direct);
}

TEST_CASE("evaluation rejects labels outside the model's set") {
  SynthResult r = small_synth(15);
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  TrainResult out = train(cfg, r.train, r.dev, r.test);

  Dataset alien = r.test;
  alien.instances[0].relation = "never_seen_label";
  PropertyLookup lookup = PropertyLookup::from_properties(out.graph.properties);
  CHECK_THROWS_AS(evaluate_dataset(out.model, lookup, out.state, alien, nullptr,
                                   out.vocab, out.config, out.labels,
                                   out.negative_label),
                  DataError);
}

TEST_CASE("model checkpoints round-trip exactly") {
  TinyWorld w = make_world(16);
  auto dir = std::filesystem::temp_directory_path() / "graphcache_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "model.ck").string();
  save_checkpoint(to_checkpoint(w.model, w.state), path);

  ModelParams m;
  CacheState st;
  from_checkpoint(load_checkpoint(path), m, st);
  CHECK(m.enc.word_emb == w.model.enc.word_emb);
  CHECK(m.enc.marker == w.model.enc.marker);
  CHECK(m.ffn.W == w.model.ffn.W);
  CHECK(m.attn.Wk == w.model.attn.Wk);
  CHECK(m.head.W2 == w.model.head.W2);
  CHECK(m.head.b2 == w.model.head.b2);
  CHECK(st.hat_h == w.state.hat_h);
  CHECK(st.memory == w.state.memory);
  CHECK(m.enc.d_e == w.model.enc.d_e);
  CHECK(m.enc.d == w.model.enc.d);
}

TEST_CASE("bench counts edges exactly") {
  BenchConfig cfg;
  cfg.batch_size = 8;
  cfg.P = 2;
  cfg.K = 5;
  cfg.d = 4;
  cfg.warmup_steps = 2;
  cfg.measured_steps_cached = 5;
  cfg.measured_steps_full = 3;
  cfg.repetitions = 3;

  auto rows = bench(cfg, {50, 100});
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    if (row.mode == "cached")
      CHECK(row.edge_touches_per_step == static_cast<std::uint64_t>(8 * 3));
    else
      CHECK(row.edge_touches_per_step == static_cast<std::uint64_t>(row.n * 3));
    CHECK(row.n_edges == row.n * 3);
    CHECK(row.mean_step_seconds > 0.0);
  }
  CHECK_THROWS_AS(bench(cfg, {100, 50}), DataError);

  std::string csv = bench_csv(rows);
  CHECK(csv.find("n,mode,mean_step_seconds") == 0);
  CHECK(csv.find("cached") != std::string::npos);
  CHECK(csv.find("full") != std::string::npos);
}

TEST_CASE("a short training run beats label frequency on clean data") {
  SynthSpec spec;
  spec.n_train = 300;
  spec.n_dev = 60;
  spec.n_test = 60;
  spec.n_topics_true = 2;
  spec.n_type_labels = 2;
  spec.n_relations = 2;
  spec.context_len = 6;
  spec.noise_rate = 0.0;
  SynthResult r = generate_synthetic(spec, 21);

  TrainConfig cfg;
  cfg.K = 2;
  cfg.P = 1;
  cfg.d = 12;
  cfg.d_e = 8;
  cfg.d_h = 24;
  cfg.batch_size = 8;
  cfg.epochs = 20;
  cfg.learning_rate = 0.3;
  cfg.lda_alpha = 0.5;
  cfg.lda_iters = 60;
  cfg.seed = 1;
  TrainResult out = train(cfg, r.train, r.dev, r.test);

  std::map<std::string, std::size_t> counts;
  for (const auto& inst : r.test.instances) ++counts[inst.relation];
  std::size_t majority = 0;
  for (const auto& [label, c] : counts) majority = std::max(majority, c);
  const double baseline =
      static_cast<double>(majority) / static_cast<double>(r.test.size());

  CHECK(out.test_metrics.accuracy > baseline);
  CHECK(out.manifest["epochs"].size() == 20);
  CHECK(out.manifest.contains("best_epoch"));
}
