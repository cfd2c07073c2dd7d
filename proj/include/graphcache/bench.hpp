#pragma once

#include <chrono>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "graphcache/cache.hpp"
#include "graphcache/hetgraph.hpp"
#include "graphcache/synth.hpp"

namespace graphcache {

// Per-step cost of the incremental updater versus a full recomputation of
// every property mean, across dataset sizes. Edge touches carry the
// complexity claim exactly; wall times carry the trend.
struct BenchRow {
  std::size_t n = 0;
  std::string mode;  // "cached" or "full"
  double mean_step_seconds = 0.0;
  std::uint64_t edge_touches_per_step = 0;
  std::size_t n_edges = 0;
};

struct BenchConfig {
  int batch_size = 16;
  int P = 2;
  int K = 20;
  int d = 64;
  std::uint64_t seed = 0;
  int warmup_steps = 500;  // settles caches and the TLB before timing
  int measured_steps_cached = 5000;
  int measured_steps_full = 100;
  int repetitions = 9;  // chunks; the median chunk mean is reported
};

namespace detail {

// P distinct topics per sentence, uniform over K. Structure stands in for a
// fitted assignment; the costs under test do not depend on topic quality.
inline TopicAssignment random_assignment(std::size_t n, int K, int P, Rng& rng) {
  TopicAssignment a;
  a.P = P;
  a.topics.resize(n);
  std::vector<int> pool(static_cast<std::size_t>(K));
  std::iota(pool.begin(), pool.end(), 0);
  for (auto& topics : a.topics) {
    for (int i = 0; i < P; ++i) {
      std::size_t j = static_cast<std::size_t>(i) +
                      rng.uniform_int(static_cast<std::size_t>(K - i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
      topics.push_back(pool[static_cast<std::size_t>(i)]);
    }
  }
  return a;
}

inline std::vector<int> distinct_batch(std::size_t n, int b, Rng& rng) {
  std::unordered_set<int> picked;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(b));
  while (out.size() < static_cast<std::size_t>(b)) {
    int sid = static_cast<int>(rng.uniform_int(n));
    if (picked.insert(sid).second) out.push_back(sid);
  }
  return out;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline std::vector<BenchRow> bench(const BenchConfig& cfg,
                                   const std::vector<std::size_t>& sizes) {
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1]) throw DataError("sizes must be ascending");

  std::vector<BenchRow> rows;
  for (std::size_t n : sizes) {
    SynthSpec sp;
    sp.n_train = static_cast<int>(n);
    sp.n_dev = 8;
    sp.n_test = 8;
    sp.context_len = 6;
    SynthResult data = generate_synthetic(sp, cfg.seed);

    Rng rng(mix_seed(cfg.seed + n));
    TopicAssignment assign =
        detail::random_assignment(n, cfg.K, cfg.P, rng);
    HeteroGraph g = build_graph(data.train, assign, true);

    // One representation set reused across steps; values do not affect cost.
    Matrix reps(static_cast<std::size_t>(cfg.batch_size),
                static_cast<std::size_t>(cfg.d));
    reps.fill_uniform(rng, -1.0, 1.0);
    std::vector<Vec> rep_vecs(static_cast<std::size_t>(cfg.batch_size));
    for (int i = 0; i < cfg.batch_size; ++i)
      rep_vecs[static_cast<std::size_t>(i)] =
          Vec(reps.row(static_cast<std::size_t>(i)),
              reps.row(static_cast<std::size_t>(i)) + reps.cols);

    for (const bool cached : {true, false}) {
      CacheState state = init_state(g, cfg.d);
      const int measured =
          cached ? cfg.measured_steps_cached : cfg.measured_steps_full;

      // Pre-draw batches so RNG cost stays outside the timed region.
      const int total_steps = cfg.warmup_steps + measured * cfg.repetitions;
      std::vector<std::vector<int>> batches(static_cast<std::size_t>(total_steps));
      for (auto& b : batches)
        b = detail::distinct_batch(n, cfg.batch_size, rng);

      std::uint64_t touches = 0;
      auto run_step = [&](const std::vector<int>& ids) {
        BatchReps batch;
        batch.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
          batch.emplace_back(ids[i], &rep_vecs[i]);
        if (cached) {
          StepTouch st = updater_step(state, g, batch);
          commit_memory(state, batch);
          touches = st.edge_touches;
        } else {
          commit_memory(state, batch);
          std::uint64_t t = 0;
          state.hat_h = oracle_means(g, state.memory, &t);
          touches = t;
        }
      };

      std::size_t next = 0;
      for (int i = 0; i < cfg.warmup_steps; ++i) run_step(batches[next++]);

      std::vector<double> chunk_means;
      for (int r = 0; r < cfg.repetitions; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < measured; ++i) run_step(batches[next++]);
        auto t1 = std::chrono::steady_clock::now();
        chunk_means.push_back(
            std::chrono::duration<double>(t1 - t0).count() / measured);
      }

      BenchRow row;
      row.n = n;
      row.mode = cached ? "cached" : "full";
      row.mean_step_seconds = detail::median(chunk_means);
      row.edge_touches_per_step = touches;
      row.n_edges = g.n_edges;
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "n,mode,mean_step_seconds,edge_touches_per_step,n_edges\n";
  for (const auto& r : rows)
    out << r.n << ',' << r.mode << ',' << r.mean_step_seconds << ','
        << r.edge_touches_per_step << ',' << r.n_edges << '\n';
  return out.str();
}

}  // namespace graphcache
