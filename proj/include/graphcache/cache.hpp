#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "graphcache/hetgraph.hpp"
#include "graphcache/linalg.hpp"

namespace graphcache {

// SGC-style feed-forward: a single linear map applied to a cache mean.
struct FfnParams {
  Matrix W;  // d x d
  Vec b;     // d
};

struct FfnGrads {
  Matrix W;
  Vec b;
};

// Fan-scaled uniform bound; keeps activations usable when inputs are small.
inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline FfnParams init_ffn(int d, Rng& rng) {
  FfnParams p;
  p.W = Matrix(static_cast<std::size_t>(d), static_cast<std::size_t>(d));
  p.b = Vec(static_cast<std::size_t>(d), 0.0);
  const double bound = glorot_bound(p.W.cols, p.W.rows);
  p.W.fill_uniform(rng, -bound, bound);
  return p;
}

// Running per-property means plus the memory table of last-written sentence
// representations. Starts all-zero; after every (update; commit) pair, hat_h
// row p equals the mean of memory rows over the property's neighbors.
struct CacheState {
  Matrix hat_h;   // |V_P| x d
  Matrix memory;  // N x d
};

inline CacheState init_state(const HeteroGraph& g, int d) {
  CacheState st;
  st.hat_h = Matrix(g.n_props(), static_cast<std::size_t>(d));
  st.memory = Matrix(g.n_sentences, static_cast<std::size_t>(d));
  return st;
}

using BatchReps = std::vector<std::pair<int, const Vec*>>;

struct StepTouch {
  std::vector<int> touched;        // properties whose hat_h changed, sorted
  std::uint64_t edge_touches = 0;  // exactly sum of batch sentence degrees
};

// Incremental refresh: for every property adjacent to a batch sentence,
// hat_h[p] += (h_s - memory[s]) / |N(p)|. Must run before commit_memory for
// the same batch; cost is proportional to the batch's edge count only.
inline StepTouch updater_step(CacheState& state, const HeteroGraph& g,
                              const BatchReps& batch) {
  std::unordered_set<int> seen;
  for (const auto& [sid, h] : batch) {
    if (!seen.insert(sid).second)
      throw InvariantError("duplicate sentence id in batch: " +
                           std::to_string(sid));
  }

  StepTouch result;
  std::unordered_set<int> touched;
  for (const auto& [sid, h] : batch) {
    const double* mem = state.memory.row(static_cast<std::size_t>(sid));
    for (int p : g.properties_of_sentence(sid)) {
      const double inv_deg = 1.0 / static_cast<double>(g.degree(p));
      double* hp = state.hat_h.row(static_cast<std::size_t>(p));
      for (std::size_t j = 0; j < state.hat_h.cols; ++j)
        hp[j] += ((*h)[j] - mem[j]) * inv_deg;
      touched.insert(p);
      ++result.edge_touches;
    }
  }
  result.touched.assign(touched.begin(), touched.end());
  std::sort(result.touched.begin(), result.touched.end());
  return result;
}

// Overwrites the memory rows of the batch with the new representations.
inline void commit_memory(CacheState& state, const BatchReps& batch) {
  for (const auto& [sid, h] : batch) {
    if (sid < 0 || static_cast<std::size_t>(sid) >= state.memory.rows)
      throw DataError("sentence id out of range: " + std::to_string(sid));
    double* mem = state.memory.row(static_cast<std::size_t>(sid));
    for (std::size_t j = 0; j < state.memory.cols; ++j) mem[j] = (*h)[j];
  }
}

// h_p = W_f * hat_h[p] + b_f
inline Vec property_repr(const CacheState& state, int p, const FfnParams& ffn) {
  Vec h = matvec(ffn.W, std::span<const double>(
                            state.hat_h.row(static_cast<std::size_t>(p)),
                            state.hat_h.cols));
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += ffn.b[i];
  return h;
}

// Full recomputation of every property mean over the current memory table,
// accumulated in ascending sentence-id order. This is the reference the
// incremental updater must match; it touches every edge.
inline Matrix oracle_means(const HeteroGraph& g, const Matrix& memory,
                           std::uint64_t* edge_touches = nullptr) {
  Matrix means(g.n_props(), memory.cols);
  std::uint64_t touches = 0;
  for (std::size_t p = 0; p < g.n_props(); ++p) {
    const auto& sents = g.prop_to_sents[p];
    double* row = means.row(p);
    for (int sid : sents) {
      const double* mem = memory.row(static_cast<std::size_t>(sid));
      for (std::size_t j = 0; j < memory.cols; ++j) row[j] += mem[j];
      ++touches;
    }
    const double inv_deg = 1.0 / static_cast<double>(sents.size());
    for (std::size_t j = 0; j < memory.cols; ++j) row[j] *= inv_deg;
  }
  if (edge_touches) *edge_touches = touches;
  return means;
}

}  // namespace graphcache
