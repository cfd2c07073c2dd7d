#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "graphcache/corpus.hpp"
#include "graphcache/topics.hpp"

namespace gc_test {

inline graphcache::Vocabulary vocab_from_words(
    const std::vector<std::string>& words) {
  graphcache::Vocabulary v;
  v.words.push_back("<unk>");
  for (const auto& w : words) {
    v.index.emplace(w, static_cast<int>(v.words.size()));
    v.words.push_back(w);
  }
  return v;
}

// Recovers the planted topic id from a synthetic context word "t<z>w<j>",
// or -1 for entity names and shared filler.
inline int planted_topic_of(const std::string& w) {
  if (w.size() < 4 || w[0] != 't') return -1;
  std::size_t wpos = w.find('w', 1);
  if (wpos == std::string::npos || wpos == 1 || wpos + 1 >= w.size()) return -1;
  for (std::size_t i = 1; i < wpos; ++i)
    if (!std::isdigit(static_cast<unsigned char>(w[i]))) return -1;
  for (std::size_t i = wpos + 1; i < w.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(w[i]))) return -1;
  return std::stoi(w.substr(1, wpos - 1));
}

// Greedy one-to-one matching of learned topics to planted topics by
// top-10-word overlap. Returns (purity over matched topics, per-learned-topic
// matched overlap counts).
struct PurityResult {
  double purity = 0.0;
  std::vector<int> matched_planted;  // per learned topic, -1 if unmatched
  std::vector<int> matched_overlap;
};

inline PurityResult matched_purity(const graphcache::TopicModel& m,
                                   const graphcache::Vocabulary& vocab,
                                   int n_planted) {
  const int K = m.K;
  std::vector<std::vector<int>> overlap(
      static_cast<std::size_t>(K), std::vector<int>(static_cast<std::size_t>(n_planted), 0));
  for (int k = 0; k < K; ++k) {
    for (const auto& w : graphcache::top_words(m, vocab, k, 10)) {
      int z = planted_topic_of(w);
      if (z >= 0 && z < n_planted)
        ++overlap[static_cast<std::size_t>(k)][static_cast<std::size_t>(z)];
    }
  }
  PurityResult res;
  res.matched_planted.assign(static_cast<std::size_t>(K), -1);
  res.matched_overlap.assign(static_cast<std::size_t>(K), 0);
  std::vector<bool> used_k(static_cast<std::size_t>(K), false);
  std::vector<bool> used_z(static_cast<std::size_t>(n_planted), false);
  const int n_match = std::min(K, n_planted);
  int total = 0;
  for (int step = 0; step < n_match; ++step) {
    int best_k = -1, best_z = -1, best = -1;
    for (int k = 0; k < K; ++k) {
      if (used_k[static_cast<std::size_t>(k)]) continue;
      for (int z = 0; z < n_planted; ++z) {
        if (used_z[static_cast<std::size_t>(z)]) continue;
        if (overlap[static_cast<std::size_t>(k)][static_cast<std::size_t>(z)] > best) {
          best = overlap[static_cast<std::size_t>(k)][static_cast<std::size_t>(z)];
          best_k = k;
          best_z = z;
        }
      }
    }
    used_k[static_cast<std::size_t>(best_k)] = true;
    used_z[static_cast<std::size_t>(best_z)] = true;
    res.matched_planted[static_cast<std::size_t>(best_k)] = best_z;
    res.matched_overlap[static_cast<std::size_t>(best_k)] = best;
    total += best;
  }
  res.purity = static_cast<double>(total) / (10.0 * n_match);
  return res;
}

}  // namespace gc_test
