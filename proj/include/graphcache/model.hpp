#pragma once

#include "graphcache/cache.hpp"
#include "graphcache/checkpoint.hpp"
#include "graphcache/encoder.hpp"
#include "graphcache/fusion.hpp"

namespace graphcache {

struct ModelParams {
  EncoderParams enc;
  FfnParams ffn;
  AttentionParams attn;
  HeadParams head;
};

struct ModelGrads {
  EncoderGrads enc;
  FfnGrads ffn;
  AttentionGrads attn;
  HeadGrads head;

  void zero() {
    enc.word_emb.fill(0.0);
    enc.marker.fill(0.0);
    enc.W.fill(0.0);
    std::fill(enc.b.begin(), enc.b.end(), 0.0);
    ffn.W.fill(0.0);
    std::fill(ffn.b.begin(), ffn.b.end(), 0.0);
    attn.Wq.fill(0.0);
    attn.Wk.fill(0.0);
    attn.Wv.fill(0.0);
    head.W1.fill(0.0);
    std::fill(head.b1.begin(), head.b1.end(), 0.0);
    head.W2.fill(0.0);
    std::fill(head.b2.begin(), head.b2.end(), 0.0);
  }
};

// Seeded parameter init; fill order is fixed so a seed pins every weight.
inline ModelParams init_model(std::size_t vocab_size, int n_labels, int d_e,
                              int d, int d_h, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams m;
  m.enc = init_encoder(vocab_size, d_e, d, rng);
  m.ffn = init_ffn(d, rng);
  m.attn = init_attention(d, rng);
  m.head = init_head(d, d_h, n_labels, rng);
  return m;
}

inline ModelGrads zero_grads(const ModelParams& m) {
  ModelGrads g;
  g.enc = zero_encoder_grads(m.enc);
  g.ffn.W = Matrix(m.ffn.W.rows, m.ffn.W.cols);
  g.ffn.b = Vec(m.ffn.b.size(), 0.0);
  g.attn.Wq = Matrix(m.attn.Wq.rows, m.attn.Wq.cols);
  g.attn.Wk = Matrix(m.attn.Wk.rows, m.attn.Wk.cols);
  g.attn.Wv = Matrix(m.attn.Wv.rows, m.attn.Wv.cols);
  g.head.W1 = Matrix(m.head.W1.rows, m.head.W1.cols);
  g.head.b1 = Vec(m.head.b1.size(), 0.0);
  g.head.W2 = Matrix(m.head.W2.rows, m.head.W2.cols);
  g.head.b2 = Vec(m.head.b2.size(), 0.0);
  return g;
}

// Plain stochastic gradient descent.
inline void sgd_update(ModelParams& m, const ModelGrads& g, double lr) {
  auto step_mat = [lr](Matrix& p, const Matrix& gm) {
    for (std::size_t i = 0; i < p.a.size(); ++i) p.a[i] -= lr * gm.a[i];
  };
  auto step_vec = [lr](Vec& p, const Vec& gv) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * gv[i];
  };
  step_mat(m.enc.word_emb, g.enc.word_emb);
  step_mat(m.enc.marker, g.enc.marker);
  step_mat(m.enc.W, g.enc.W);
  step_vec(m.enc.b, g.enc.b);
  step_mat(m.ffn.W, g.ffn.W);
  step_vec(m.ffn.b, g.ffn.b);
  step_mat(m.attn.Wq, g.attn.Wq);
  step_mat(m.attn.Wk, g.attn.Wk);
  step_mat(m.attn.Wv, g.attn.Wv);
  step_mat(m.head.W1, g.head.W1);
  step_vec(m.head.b1, g.head.b1);
  step_mat(m.head.W2, g.head.W2);
  step_vec(m.head.b2, g.head.b2);
}

inline Checkpoint to_checkpoint(const ModelParams& m, const CacheState& st) {
  Checkpoint ck;
  ck.add("enc.word_emb", m.enc.word_emb);
  ck.add("enc.marker", m.enc.marker);
  ck.add("enc.W", m.enc.W);
  ck.add("enc.b", m.enc.b);
  ck.add("ffn.W", m.ffn.W);
  ck.add("ffn.b", m.ffn.b);
  ck.add("attn.Wq", m.attn.Wq);
  ck.add("attn.Wk", m.attn.Wk);
  ck.add("attn.Wv", m.attn.Wv);
  ck.add("head.W1", m.head.W1);
  ck.add("head.b1", m.head.b1);
  ck.add("head.W2", m.head.W2);
  ck.add("head.b2", m.head.b2);
  ck.add("cache.hat_h", st.hat_h);
  ck.add("cache.memory", st.memory);
  return ck;
}

inline void from_checkpoint(const Checkpoint& ck, ModelParams& m,
                            CacheState& st) {
  m.enc.word_emb = ck.matrix("enc.word_emb");
  m.enc.marker = ck.matrix("enc.marker");
  m.enc.W = ck.matrix("enc.W");
  m.enc.b = ck.vec("enc.b");
  m.enc.d_e = static_cast<int>(m.enc.word_emb.cols);
  m.enc.d = static_cast<int>(m.enc.W.rows);
  m.ffn.W = ck.matrix("ffn.W");
  m.ffn.b = ck.vec("ffn.b");
  m.attn.Wq = ck.matrix("attn.Wq");
  m.attn.Wk = ck.matrix("attn.Wk");
  m.attn.Wv = ck.matrix("attn.Wv");
  m.head.W1 = ck.matrix("head.W1");
  m.head.b1 = ck.vec("head.b1");
  m.head.W2 = ck.matrix("head.W2");
  m.head.b2 = ck.vec("head.b2");
  st.hat_h = ck.matrix("cache.hat_h");
  st.memory = ck.matrix("cache.memory");
}

}  // namespace graphcache
