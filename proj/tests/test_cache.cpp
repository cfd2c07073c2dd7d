#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "graphcache/cache.hpp"
#include "graphcache/hetgraph.hpp"

using namespace graphcache;

namespace {

Instance make_instance(int id, const std::string& st = "",
                       const std::string& ot = "") {
  Instance inst;
  inst.id = id;
  inst.tokens = {"s", "x", "o"};
  inst.subj_start = 0;
  inst.subj_end = 1;
  inst.obj_start = 2;
  inst.obj_end = 3;
  inst.subj_type = st;
  inst.obj_type = ot;
  inst.relation = "r";
  return inst;
}

// n untyped sentences, each assigned P random distinct topics out of K
HeteroGraph random_graph(std::size_t n, int K, int P, Rng& rng) {
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i)
    ds.instances.push_back(make_instance(static_cast<int>(i)));
  finalize_dataset(ds);
  TopicAssignment a;
  a.P = P;
  a.topics.resize(n);
  for (auto& topics : a.topics) {
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < P)
      chosen.insert(static_cast<int>(rng.uniform_int(static_cast<std::size_t>(K))));
    topics.assign(chosen.begin(), chosen.end());
  }
  return build_graph(ds, a);
}

std::vector<Vec> random_reps(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<Vec> reps(n, Vec(d));
  for (auto& r : reps)
    for (auto& v : r) v = rng.uniform(-2.0, 2.0);
  return reps;
}

}  // namespace

TEST_CASE("initial state is all zero") {
  Rng rng(1);
  HeteroGraph g = random_graph(12, 4, 2, rng);
  CacheState st = init_state(g, 3);
  REQUIRE(st.memory.rows == 12);
  REQUIRE(st.hat_h.rows == g.n_props());
  for (double v : st.hat_h.a) CHECK(v == 0.0);
  for (double v : st.memory.a) CHECK(v == 0.0);

  Matrix oracle = oracle_means(g, st.memory);
  CHECK(max_abs_diff(st.hat_h, oracle) == 0.0);
}

TEST_CASE("first update from zero state is the plain mean") {
  // two sentences sharing one topic cache
  Dataset ds;
  ds.instances.push_back(make_instance(0));
  ds.instances.push_back(make_instance(1));
  finalize_dataset(ds);
  TopicAssignment a;
  a.P = 1;
  a.topics = {{0}, {0}};
  HeteroGraph g = build_graph(ds, a);

  CacheState st = init_state(g, 2);
  Vec h0 = {2.0, 0.0};
  Vec h1 = {0.0, 4.0};
  BatchReps batch = {{0, &h0}, {1, &h1}};
  StepTouch touch = updater_step(st, g, batch);
  CHECK(st.hat_h(0, 0) == 1.0);
  CHECK(st.hat_h(0, 1) == 2.0);
  CHECK(touch.touched == std::vector<int>{0});
  CHECK(touch.edge_touches == 2);
}

TEST_CASE("properties disjoint from the batch are bitwise untouched") {
  Rng rng(2);
  HeteroGraph g = random_graph(10, 5, 1, rng);
  CacheState st = init_state(g, 4);
  auto reps = random_reps(10, 4, rng);

  // one earlier step so hat_h is nonzero
  BatchReps warm;
  for (int i = 0; i < 10; ++i) warm.emplace_back(i, &reps[static_cast<std::size_t>(i)]);
  updater_step(st, g, warm);
  commit_memory(st, warm);

  Vec h_new(4, 0.5);
  BatchReps batch = {{3, &h_new}};
  Matrix before = st.hat_h;
  StepTouch touch = updater_step(st, g, batch);

  std::set<int> touched(touch.touched.begin(), touch.touched.end());
  CHECK(touched == std::set<int>(g.properties_of_sentence(3).begin(),
                                 g.properties_of_sentence(3).end()));
  for (std::size_t p = 0; p < g.n_props(); ++p) {
    if (touched.count(static_cast<int>(p))) continue;
    for (std::size_t j = 0; j < st.hat_h.cols; ++j)
      CHECK(st.hat_h(p, j) == before(p, j));
  }
}

TEST_CASE("duplicate batch ids are rejected") {
  Rng rng(3);
  HeteroGraph g = random_graph(5, 3, 1, rng);
  CacheState st = init_state(g, 2);
  Vec h(2, 1.0);
  BatchReps batch = {{1, &h}, {1, &h}};
  CHECK_THROWS_AS(updater_step(st, g, batch), InvariantError);
}

TEST_CASE("commit overwrites exactly the batch rows") {
  Rng rng(4);
  HeteroGraph g = random_graph(6, 3, 1, rng);
  CacheState st = init_state(g, 3);
  auto reps = random_reps(6, 3, rng);
  BatchReps warm;
  for (int i = 0; i < 6; ++i) warm.emplace_back(i, &reps[static_cast<std::size_t>(i)]);
  updater_step(st, g, warm);
  commit_memory(st, warm);

  Vec h_new = {9.0, 8.0, 7.0};
  BatchReps batch = {{2, &h_new}};
  updater_step(st, g, batch);
  Matrix before = st.memory;
  commit_memory(st, batch);
  for (std::size_t s = 0; s < 6; ++s)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(st.memory(s, j) == (s == 2 ? h_new[j] : before(s, j)));

  Vec oob(3, 0.0);
  BatchReps bad = {{77, &oob}};
  CHECK_THROWS_AS(commit_memory(st, bad), DataError);
}

TEST_CASE("repeating a step with unchanged representations is a no-op") {
  Rng rng(5);
  HeteroGraph g = random_graph(8, 4, 2, rng);
  CacheState st = init_state(g, 3);
  auto reps = random_reps(8, 3, rng);
  BatchReps batch;
  for (int i = 2; i < 6; ++i) batch.emplace_back(i, &reps[static_cast<std::size_t>(i)]);

  updater_step(st, g, batch);
  commit_memory(st, batch);
  Matrix after_first = st.hat_h;

  updater_step(st, g, batch);  // h_s - M[s] == 0 for every batch row
  commit_memory(st, batch);
  CHECK(st.hat_h == after_first);
}

TEST_CASE("incremental updates track the oracle over 200 random steps") {
  Rng rng(6);
  HeteroGraph g = random_graph(500, 20, 2, rng);
  CacheState st = init_state(g, 8);

  for (int step = 0; step < 200; ++step) {
    std::set<int> ids;
    while (ids.size() < 16)
      ids.insert(static_cast<int>(rng.uniform_int(500)));
    auto reps = random_reps(16, 8, rng);
    BatchReps batch;
    std::size_t slot = 0;
    for (int sid : ids) batch.emplace_back(sid, &reps[slot++]);

    StepTouch touch = updater_step(st, g, batch);
    commit_memory(st, batch);

    std::uint64_t expected_touches = 0;
    for (int sid : ids)
      expected_touches += g.properties_of_sentence(sid).size();
    CHECK(touch.edge_touches == expected_touches);

    std::uint64_t oracle_touches = 0;
    Matrix oracle = oracle_means(g, st.memory, &oracle_touches);
    CHECK(oracle_touches == g.n_edges);
    REQUIRE(max_abs_diff(st.hat_h, oracle) <= 1e-5);
  }
}

TEST_CASE("property_repr applies the linear map") {
  Rng rng(7);
  HeteroGraph g = random_graph(4, 2, 1, rng);
  CacheState st = init_state(g, 2);

  FfnParams identity;
  identity.W = Matrix(2, 2);
  identity.W(0, 0) = identity.W(1, 1) = 1.0;
  identity.b = {0.0, 0.0};

  st.hat_h(0, 0) = 0.25;
  st.hat_h(0, 1) = -0.5;
  Vec h = property_repr(st, 0, identity);
  CHECK(h == Vec{0.25, -0.5});

  FfnParams bias_only;
  bias_only.W = Matrix(2, 2);
  bias_only.b = {0.4, -0.1};
  st.hat_h(1, 0) = 0.0;
  st.hat_h(1, 1) = 0.0;
  CHECK(property_repr(st, 1, bias_only) == Vec{0.4, -0.1});

  // d=2 hand arithmetic with a full matrix
  FfnParams f;
  f.W = Matrix(2, 2);
  f.W(0, 0) = 0.5;
  f.W(0, 1) = -1.0;
  f.W(1, 0) = 2.0;
  f.W(1, 1) = 0.25;
  f.b = {0.1, -0.2};
  Vec out = property_repr(st, 0, f);
  CHECK(out[0] == Catch::Approx(0.5 * 0.25 + (-1.0) * (-0.5) + 0.1));
  CHECK(out[1] == Catch::Approx(2.0 * 0.25 + 0.25 * (-0.5) - 0.2));
}

TEST_CASE("oracle means: degenerate cases and reordered summation") {
  Rng rng(8);
  HeteroGraph g = random_graph(30, 6, 2, rng);

  Matrix zero_memory(30, 5);
  Matrix means = oracle_means(g, zero_memory);
  for (double v : means.a) CHECK(v == 0.0);

  Matrix memory(30, 5);
  memory.fill_uniform(rng, -3.0, 3.0);
  means = oracle_means(g, memory);

  // single-neighbor property returns its row verbatim
  for (std::size_t p = 0; p < g.n_props(); ++p) {
    if (g.degree(static_cast<int>(p)) != 1) continue;
    int s = g.neighbors_of_property(static_cast<int>(p))[0];
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(means(p, j) == memory(static_cast<std::size_t>(s), j));
  }

  // descending-order accumulation agrees to 1e-12
  for (std::size_t p = 0; p < g.n_props(); ++p) {
    const auto& sents = g.neighbors_of_property(static_cast<int>(p));
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (auto it = sents.rbegin(); it != sents.rend(); ++it)
        acc += memory(static_cast<std::size_t>(*it), j);
      acc /= static_cast<double>(sents.size());
      CHECK(std::abs(acc - means(p, j)) <= 1e-12);
    }
  }
}
