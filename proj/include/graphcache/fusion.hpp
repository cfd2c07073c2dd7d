#pragma once

#include <cmath>
#include <vector>

#include "graphcache/cache.hpp"
#include "graphcache/linalg.hpp"

namespace graphcache {

// Single-head scaled dot-product attention projections.
struct AttentionParams {
  Matrix Wq, Wk, Wv;  // each d x d
};

struct AttentionGrads {
  Matrix Wq, Wk, Wv;
};

// Two-layer relu perceptron over [h_s | h_topic | h_entity].
struct HeadParams {
  Matrix W1;  // d_h x 3d
  Vec b1;     // d_h
  Matrix W2;  // |labels| x d_h
  Vec b2;     // |labels|
};

struct HeadGrads {
  Matrix W1;
  Vec b1;
  Matrix W2;
  Vec b2;
};

inline AttentionParams init_attention(int d, Rng& rng) {
  AttentionParams p;
  p.Wq = Matrix(static_cast<std::size_t>(d), static_cast<std::size_t>(d));
  p.Wk = Matrix(static_cast<std::size_t>(d), static_cast<std::size_t>(d));
  p.Wv = Matrix(static_cast<std::size_t>(d), static_cast<std::size_t>(d));
  const double bound = glorot_bound(static_cast<std::size_t>(d),
                                    static_cast<std::size_t>(d));
  p.Wq.fill_uniform(rng, -bound, bound);
  p.Wk.fill_uniform(rng, -bound, bound);
  p.Wv.fill_uniform(rng, -bound, bound);
  return p;
}

inline HeadParams init_head(int d, int d_h, int n_labels, Rng& rng) {
  HeadParams p;
  p.W1 = Matrix(static_cast<std::size_t>(d_h), static_cast<std::size_t>(3 * d));
  p.b1 = Vec(static_cast<std::size_t>(d_h), 0.0);
  p.W2 = Matrix(static_cast<std::size_t>(n_labels), static_cast<std::size_t>(d_h));
  p.b2 = Vec(static_cast<std::size_t>(n_labels), 0.0);
  const double b1w = glorot_bound(p.W1.cols, p.W1.rows);
  const double b2w = glorot_bound(p.W2.cols, p.W2.rows);
  p.W1.fill_uniform(rng, -b1w, b1w);
  p.W2.fill_uniform(rng, -b2w, b2w);
  return p;
}

inline Vec softmax(const Vec& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

using TopicReprs = std::vector<std::pair<int, Vec>>;  // (topic id, h_p)

struct AttentionTrace {
  Vec q;
  std::vector<Vec> k, v;
  Vec weights;
  Vec output;
};

// weights_j = softmax(q . k_j / sqrt(d)),  output = sum_j weights_j v_j
inline AttentionTrace topic_attention_traced(const Vec& h_s,
                                             const TopicReprs& topic_reprs,
                                             const AttentionParams& p) {
  if (topic_reprs.empty())
    throw InvariantError("attention over an empty topic set");
  AttentionTrace tr;
  tr.q = matvec(p.Wq, h_s);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h_s.size()));
  Vec logits(topic_reprs.size());
  tr.k.resize(topic_reprs.size());
  tr.v.resize(topic_reprs.size());
  for (std::size_t j = 0; j < topic_reprs.size(); ++j) {
    tr.k[j] = matvec(p.Wk, topic_reprs[j].second);
    tr.v[j] = matvec(p.Wv, topic_reprs[j].second);
    logits[j] = dot(tr.q, tr.k[j]) * scale;
  }
  tr.weights = softmax(logits);
  tr.output = Vec(h_s.size(), 0.0);
  for (std::size_t j = 0; j < topic_reprs.size(); ++j)
    axpy(tr.output, tr.weights[j], tr.v[j]);
  return tr;
}

inline std::pair<Vec, Vec> topic_attention(const Vec& h_s,
                                           const TopicReprs& topic_reprs,
                                           const AttentionParams& p) {
  AttentionTrace tr = topic_attention_traced(h_s, topic_reprs, p);
  return {std::move(tr.output), std::move(tr.weights)};
}

// Backward through the traced attention. Adds projection gradients to `g`,
// the query-path gradient to d_h_s, and per-topic gradients to d_topic.
inline void attention_backward(const Vec& h_s, const TopicReprs& topic_reprs,
                               const AttentionParams& p,
                               const AttentionTrace& tr, const Vec& d_out,
                               AttentionGrads& g, Vec& d_h_s,
                               std::vector<Vec>& d_topic) {
  const std::size_t n = topic_reprs.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(h_s.size()));

  Vec d_weights(n);
  for (std::size_t j = 0; j < n; ++j) d_weights[j] = dot(d_out, tr.v[j]);
  double wsum = 0.0;
  for (std::size_t j = 0; j < n; ++j) wsum += tr.weights[j] * d_weights[j];
  Vec d_logits(n);
  for (std::size_t j = 0; j < n; ++j)
    d_logits[j] = tr.weights[j] * (d_weights[j] - wsum);

  Vec d_q(h_s.size(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    // value path
    Vec d_v(tr.v[j].size());
    for (std::size_t i = 0; i < d_v.size(); ++i)
      d_v[i] = tr.weights[j] * d_out[i];
    add_outer(g.Wv, d_v, topic_reprs[j].second);
    Vec d_hp = matvec_t(p.Wv, d_v);
    // key path
    Vec d_k(tr.k[j].size());
    for (std::size_t i = 0; i < d_k.size(); ++i)
      d_k[i] = d_logits[j] * scale * tr.q[i];
    add_outer(g.Wk, d_k, topic_reprs[j].second);
    Vec d_hp_k = matvec_t(p.Wk, d_k);
    for (std::size_t i = 0; i < d_hp.size(); ++i) d_hp[i] += d_hp_k[i];
    for (std::size_t i = 0; i < d_hp.size(); ++i) d_topic[j][i] += d_hp[i];

    axpy(d_q, d_logits[j] * scale, tr.k[j]);
  }
  add_outer(g.Wq, d_q, h_s);
  Vec d_h = matvec_t(p.Wq, d_q);
  for (std::size_t i = 0; i < d_h_s.size(); ++i) d_h_s[i] += d_h[i];
}

struct HeadTrace {
  Vec concat;  // 3d
  Vec hidden;  // relu(W1 concat + b1)
  Vec logits;
};

inline HeadTrace classify_traced(const Vec& h_s, const Vec& h_topic,
                                 const Vec& h_entity, const HeadParams& p) {
  HeadTrace tr;
  tr.concat.reserve(h_s.size() * 3);
  tr.concat.insert(tr.concat.end(), h_s.begin(), h_s.end());
  tr.concat.insert(tr.concat.end(), h_topic.begin(), h_topic.end());
  tr.concat.insert(tr.concat.end(), h_entity.begin(), h_entity.end());
  if (tr.concat.size() != p.W1.cols)
    throw InvariantError("head input width mismatch");
  tr.hidden = matvec(p.W1, tr.concat);
  for (std::size_t i = 0; i < tr.hidden.size(); ++i)
    tr.hidden[i] = std::max(0.0, tr.hidden[i] + p.b1[i]);
  tr.logits = matvec(p.W2, tr.hidden);
  for (std::size_t i = 0; i < tr.logits.size(); ++i) tr.logits[i] += p.b2[i];
  return tr;
}

inline Vec classify(const Vec& h_s, const Vec& h_topic, const Vec& h_entity,
                    const HeadParams& p) {
  return classify_traced(h_s, h_topic, h_entity, p).logits;
}

inline int argmax_label(const Vec& logits) {
  int best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[static_cast<std::size_t>(best)])
      best = static_cast<int>(i);
  return best;
}

// Splits d_concat back into the three fused inputs via out parameters.
inline void classify_backward(const HeadTrace& tr, const HeadParams& p,
                              const Vec& d_logits, HeadGrads& g, Vec& d_h_s,
                              Vec& d_h_topic, Vec& d_h_entity) {
  for (std::size_t i = 0; i < d_logits.size(); ++i) g.b2[i] += d_logits[i];
  add_outer(g.W2, d_logits, tr.hidden);
  Vec d_hidden = matvec_t(p.W2, d_logits);
  for (std::size_t i = 0; i < d_hidden.size(); ++i)
    if (tr.hidden[i] <= 0.0) d_hidden[i] = 0.0;
  for (std::size_t i = 0; i < d_hidden.size(); ++i) g.b1[i] += d_hidden[i];
  add_outer(g.W1, d_hidden, tr.concat);
  Vec d_concat = matvec_t(p.W1, d_hidden);
  const std::size_t d = d_concat.size() / 3;
  for (std::size_t i = 0; i < d; ++i) {
    d_h_s[i] += d_concat[i];
    d_h_topic[i] += d_concat[d + i];
    d_h_entity[i] += d_concat[2 * d + i];
  }
}

struct CrossEntropy {
  double loss = 0.0;
  Vec grad;  // wrt logits: softmax - onehot(gold)
};

// loss = logsumexp(logits) - logits[gold], stabilized by max subtraction
inline CrossEntropy cross_entropy(const Vec& logits, int gold) {
  if (gold < 0 || static_cast<std::size_t>(gold) >= logits.size())
    throw InvariantError("gold label index out of range");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  CrossEntropy ce;
  ce.loss = std::log(sum) + mx - logits[static_cast<std::size_t>(gold)];
  ce.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i)
    ce.grad[i] = std::exp(logits[i] - mx) / sum;
  ce.grad[static_cast<std::size_t>(gold)] -= 1.0;
  return ce;
}

// FFN-transformed cache of the sentence's type-pair property; the exact zero
// vector when the graph is untyped.
inline Vec entity_repr(const HeteroGraph& g, const CacheState& state,
                       const FfnParams& ffn, int s) {
  const int p = g.type_prop_of_sentence(s);
  if (p < 0) return Vec(state.hat_h.cols, 0.0);
  return property_repr(state, p, ffn);
}

}  // namespace graphcache
