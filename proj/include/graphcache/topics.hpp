#pragma once

#include <algorithm>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "graphcache/corpus.hpp"
#include "graphcache/linalg.hpp"
#include "graphcache/rng.hpp"

namespace graphcache {

// Topic model fitted by collapsed Gibbs sampling. phi is K x |V|,
// row-stochastic with beta smoothing, so every entry is positive.
struct TopicModel {
  int K = 0;
  std::size_t vocab_size = 0;
  double alpha = 0.0;
  double beta = 0.0;
  int iters = 0;
  std::uint64_t seed = 0;
  Matrix phi;  // K x |V|
};

// Per-sentence list of exactly P distinct topic ids, most probable first.
struct TopicAssignment {
  int P = 0;
  std::vector<std::vector<int>> topics;
};

constexpr int kFoldInSweeps = 20;

namespace detail {

// Words in the top 0.5% of corpus frequency are dropped from the Gibbs
// counts (they stay in the encoder vocabulary). Floor semantics: tiny
// corpora exclude nothing.
inline std::vector<bool> stopword_mask(
    const std::vector<std::vector<int>>& docs, std::size_t vocab_size) {
  std::vector<std::size_t> freq(vocab_size, 0);
  for (const auto& doc : docs)
    for (int w : doc)
      if (w != Vocabulary::kUnk) ++freq[static_cast<std::size_t>(w)];

  std::vector<int> present;
  for (std::size_t w = 1; w < vocab_size; ++w)
    if (freq[w] > 0) present.push_back(static_cast<int>(w));

  std::size_t n_stop =
      static_cast<std::size_t>(0.005 * static_cast<double>(present.size()));
  std::vector<bool> mask(vocab_size, false);
  if (n_stop == 0) return mask;

  // Vocabulary ids are ordered by descending corpus frequency already, but
  // the fit corpus may differ, so rank within these docs.
  std::sort(present.begin(), present.end(), [&](int a, int b) {
    std::size_t fa = freq[static_cast<std::size_t>(a)];
    std::size_t fb = freq[static_cast<std::size_t>(b)];
    if (fa != fb) return fa > fb;
    return a < b;
  });
  for (std::size_t i = 0; i < n_stop && i < present.size(); ++i)
    mask[static_cast<std::size_t>(present[i])] = true;
  return mask;
}

inline std::vector<std::vector<int>> docs_to_ids(
    const std::vector<std::vector<std::string>>& docs, const Vocabulary& vocab) {
  std::vector<std::vector<int>> ids(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    ids[d].reserve(docs[d].size());
    for (const auto& tok : docs[d]) ids[d].push_back(vocab.lookup(tok));
  }
  return ids;
}

}  // namespace detail

inline TopicModel fit_lda(const std::vector<std::vector<std::string>>& docs,
                          const Vocabulary& vocab, int K, double alpha,
                          double beta, int iters, std::uint64_t seed) {
  if (K < 1) throw DataError("K must be >= 1");
  if (iters < 1) throw DataError("iters must be >= 1");
  if (docs.empty()) throw DataError("no documents");

  const std::size_t V = vocab.size();
  const std::size_t D = docs.size();
  auto ids = detail::docs_to_ids(docs, vocab);
  auto excluded = detail::stopword_mask(ids, V);

  // Flatten modeled tokens: skip UNK and stopwords.
  std::vector<std::vector<int>> tokens(D);
  std::size_t total = 0;
  for (std::size_t d = 0; d < D; ++d) {
    for (int w : ids[d]) {
      if (w == Vocabulary::kUnk || excluded[static_cast<std::size_t>(w)]) continue;
      tokens[d].push_back(w);
      ++total;
    }
  }
  if (total == 0) throw DataError("no informative tokens");

  Rng rng(seed);
  const std::size_t Ku = static_cast<std::size_t>(K);
  std::vector<std::size_t> n_wk(V * Ku, 0);   // word-topic counts
  std::vector<std::size_t> n_k(Ku, 0);        // topic totals
  std::vector<std::size_t> n_dk(D * Ku, 0);   // doc-topic counts
  std::vector<std::vector<int>> z(D);

  for (std::size_t d = 0; d < D; ++d) {
    z[d].resize(tokens[d].size());
    for (std::size_t i = 0; i < tokens[d].size(); ++i) {
      int k = static_cast<int>(rng.uniform_int(Ku));
      z[d][i] = k;
      ++n_wk[static_cast<std::size_t>(tokens[d][i]) * Ku + static_cast<std::size_t>(k)];
      ++n_k[static_cast<std::size_t>(k)];
      ++n_dk[d * Ku + static_cast<std::size_t>(k)];
    }
  }

  const double betaV = beta * static_cast<double>(V);
  std::vector<double> weights(Ku);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t i = 0; i < tokens[d].size(); ++i) {
        const std::size_t w = static_cast<std::size_t>(tokens[d][i]);
        const std::size_t old_k = static_cast<std::size_t>(z[d][i]);
        --n_wk[w * Ku + old_k];
        --n_k[old_k];
        --n_dk[d * Ku + old_k];

        double sum = 0.0;
        for (std::size_t k = 0; k < Ku; ++k) {
          double p = (static_cast<double>(n_wk[w * Ku + k]) + beta) /
                     (static_cast<double>(n_k[k]) + betaV) *
                     (static_cast<double>(n_dk[d * Ku + k]) + alpha);
          weights[k] = p;
          sum += p;
        }
        const std::size_t new_k = rng.sample_discrete(weights, sum);
        z[d][i] = static_cast<int>(new_k);
        ++n_wk[w * Ku + new_k];
        ++n_k[new_k];
        ++n_dk[d * Ku + new_k];
      }
    }
  }

  TopicModel m;
  m.K = K;
  m.vocab_size = V;
  m.alpha = alpha;
  m.beta = beta;
  m.iters = iters;
  m.seed = seed;
  m.phi = Matrix(Ku, V);
  for (std::size_t k = 0; k < Ku; ++k) {
    const double denom = static_cast<double>(n_k[k]) + betaV;
    for (std::size_t w = 0; w < V; ++w)
      m.phi(k, w) = (static_cast<double>(n_wk[w * Ku + k]) + beta) / denom;
  }
  return m;
}

// Fold-in inference for a held-out document: a short Gibbs pass with phi
// frozen. Empty or all-unknown documents fall back to the uniform vector.
inline Vec doc_topic_distribution(const TopicModel& model,
                                  const std::vector<std::string>& doc,
                                  const Vocabulary& vocab, std::uint64_t seed,
                                  int sweeps = kFoldInSweeps) {
  const std::size_t Ku = static_cast<std::size_t>(model.K);
  std::vector<int> tokens;
  for (const auto& tok : doc) {
    int w = vocab.lookup(tok);
    if (w != Vocabulary::kUnk) tokens.push_back(w);
  }
  if (tokens.empty()) return Vec(Ku, 1.0 / static_cast<double>(model.K));

  Rng rng(seed);
  std::vector<int> z(tokens.size());
  std::vector<double> n_dk(Ku, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    int k = static_cast<int>(rng.uniform_int(Ku));
    z[i] = k;
    n_dk[static_cast<std::size_t>(k)] += 1.0;
  }

  std::vector<double> weights(Ku);
  for (int it = 0; it < sweeps; ++it) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::size_t w = static_cast<std::size_t>(tokens[i]);
      n_dk[static_cast<std::size_t>(z[i])] -= 1.0;
      double sum = 0.0;
      for (std::size_t k = 0; k < Ku; ++k) {
        double p = model.phi(k, w) * (n_dk[k] + model.alpha);
        weights[k] = p;
        sum += p;
      }
      const std::size_t new_k = rng.sample_discrete(weights, sum);
      z[i] = static_cast<int>(new_k);
      n_dk[new_k] += 1.0;
    }
  }

  Vec dist(Ku);
  const double denom = static_cast<double>(tokens.size()) +
                       static_cast<double>(model.K) * model.alpha;
  for (std::size_t k = 0; k < Ku; ++k)
    dist[k] = (n_dk[k] + model.alpha) / denom;
  return dist;
}

// P distinct topic ids by descending probability; ties break toward the
// smaller topic id.
inline std::vector<int> assign_top_p(const Vec& dist, int P) {
  const int K = static_cast<int>(dist.size());
  if (P < 1 || P > K) throw DataError("P must satisfy 1 <= P <= K");
  std::vector<int> order(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) order[static_cast<std::size_t>(k)] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double pa = dist[static_cast<std::size_t>(a)];
    double pb = dist[static_cast<std::size_t>(b)];
    if (pa != pb) return pa > pb;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(P));
  return order;
}

inline std::vector<std::string> top_words(const TopicModel& model,
                                          const Vocabulary& vocab, int topic,
                                          int n) {
  if (topic < 0 || topic >= model.K) throw DataError("topic id out of range");
  const std::size_t V = model.vocab_size;
  std::vector<int> order(V);
  for (std::size_t w = 0; w < V; ++w) order[w] = static_cast<int>(w);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double pa = model.phi(static_cast<std::size_t>(topic), static_cast<std::size_t>(a));
    double pb = model.phi(static_cast<std::size_t>(topic), static_cast<std::size_t>(b));
    if (pa != pb) return pa > pb;
    return vocab.words[static_cast<std::size_t>(a)] < vocab.words[static_cast<std::size_t>(b)];
  });
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(std::max(n, 0)), V);
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back(vocab.words[static_cast<std::size_t>(order[i])]);
  return out;
}

// Fold-in assignments for a whole split; per-document seed is seed ^ doc id.
inline TopicAssignment assign_topics(const TopicModel& model,
                                     const std::vector<std::vector<std::string>>& docs,
                                     const Vocabulary& vocab, int P,
                                     std::uint64_t seed) {
  TopicAssignment a;
  a.P = P;
  a.topics.resize(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    Vec dist = doc_topic_distribution(model, docs[d], vocab,
                                      seed ^ static_cast<std::uint64_t>(d));
    a.topics[d] = assign_top_p(dist, P);
  }
  return a;
}

// Binary model file: "LDA1", then K, |V| (u64), alpha, beta (f64),
// iters, seed (u64), all little-endian, then phi row-major as f64.
inline void save_lda(const TopicModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  auto put_f64 = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(bits);
  };
  out.write("LDA1", 4);
  put_u64(static_cast<std::uint64_t>(m.K));
  put_u64(static_cast<std::uint64_t>(m.vocab_size));
  put_f64(m.alpha);
  put_f64(m.beta);
  put_u64(static_cast<std::uint64_t>(m.iters));
  put_u64(m.seed);
  for (double v : m.phi.a) put_f64(v);
}

inline TopicModel load_lda(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  auto get_u64 = [&]() {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw DataError("truncated model file: " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  auto get_f64 = [&]() {
    std::uint64_t bits = get_u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  };
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LDA1", 4) != 0)
    throw DataError("not a topic model file: " + path);
  TopicModel m;
  m.K = static_cast<int>(get_u64());
  m.vocab_size = get_u64();
  m.alpha = get_f64();
  m.beta = get_f64();
  m.iters = static_cast<int>(get_u64());
  m.seed = get_u64();
  m.phi = Matrix(static_cast<std::size_t>(m.K), m.vocab_size);
  for (double& v : m.phi.a) v = get_f64();
  return m;
}

}  // namespace graphcache
