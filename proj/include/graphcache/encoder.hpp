#pragma once

#include <future>
#include <vector>

#include "graphcache/corpus.hpp"
#include "graphcache/linalg.hpp"

namespace graphcache {

// Marker rows: subject start/end, object start/end.
enum : std::size_t { kSubjStart = 0, kSubjEnd = 1, kObjStart = 2, kObjEnd = 3 };

// Small trainable sentence encoder: mean-pooled word embeddings with additive
// span-boundary markers, subject/object span pooling, one tanh projection.
struct EncoderParams {
  int d_e = 32;
  int d = 64;
  Matrix word_emb;  // |V| x d_e
  Matrix marker;    // 4 x d_e
  Matrix W;         // d x 3*d_e
  Vec b;            // d
};

struct EncoderGrads {
  Matrix word_emb;
  Matrix marker;
  Matrix W;
  Vec b;
};

inline EncoderParams init_encoder(std::size_t vocab_size, int d_e, int d,
                                  Rng& rng) {
  EncoderParams p;
  p.d_e = d_e;
  p.d = d;
  p.word_emb = Matrix(vocab_size, static_cast<std::size_t>(d_e));
  p.marker = Matrix(4, static_cast<std::size_t>(d_e));
  p.W = Matrix(static_cast<std::size_t>(d), static_cast<std::size_t>(3 * d_e));
  p.b = Vec(static_cast<std::size_t>(d), 0.0);
  p.word_emb.fill_uniform(rng, -0.1, 0.1);
  p.marker.fill_uniform(rng, -0.1, 0.1);
  p.W.fill_uniform(rng, -0.1, 0.1);
  for (auto& x : p.b) x = rng.uniform(-0.1, 0.1);
  return p;
}

inline EncoderGrads zero_encoder_grads(const EncoderParams& p) {
  EncoderGrads g;
  g.word_emb = Matrix(p.word_emb.rows, p.word_emb.cols);
  g.marker = Matrix(4, static_cast<std::size_t>(p.d_e));
  g.W = Matrix(p.W.rows, p.W.cols);
  g.b = Vec(p.b.size(), 0.0);
  return g;
}

namespace detail {

// Pooled feature [token mean with boundary markers | subj mean | obj mean].
inline Vec encoder_feature(const Instance& inst, const EncoderParams& p,
                           const Vocabulary& vocab) {
  if (inst.tokens.empty())
    throw DataError("instance " + std::to_string(inst.id) + ": no tokens");
  const std::size_t de = static_cast<std::size_t>(p.d_e);
  Vec f(3 * de, 0.0);
  const double inv_n = 1.0 / static_cast<double>(inst.tokens.size());
  for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
    const double* e = p.word_emb.row(
        static_cast<std::size_t>(vocab.lookup(inst.tokens[i])));
    for (std::size_t j = 0; j < de; ++j) f[j] += e[j] * inv_n;
  }
  // Boundary markers are additive, so after mean pooling each contributes
  // its embedding once, scaled by 1/n.
  auto add_marker = [&](std::size_t m) {
    const double* e = p.marker.row(m);
    for (std::size_t j = 0; j < de; ++j) f[j] += e[j] * inv_n;
  };
  add_marker(kSubjStart);
  add_marker(kSubjEnd);
  add_marker(kObjStart);
  add_marker(kObjEnd);

  const double inv_subj = 1.0 / static_cast<double>(inst.subj_end - inst.subj_start);
  for (int i = inst.subj_start; i < inst.subj_end; ++i) {
    const double* e = p.word_emb.row(static_cast<std::size_t>(
        vocab.lookup(inst.tokens[static_cast<std::size_t>(i)])));
    for (std::size_t j = 0; j < de; ++j) f[de + j] += e[j] * inv_subj;
  }
  const double inv_obj = 1.0 / static_cast<double>(inst.obj_end - inst.obj_start);
  for (int i = inst.obj_start; i < inst.obj_end; ++i) {
    const double* e = p.word_emb.row(static_cast<std::size_t>(
        vocab.lookup(inst.tokens[static_cast<std::size_t>(i)])));
    for (std::size_t j = 0; j < de; ++j) f[2 * de + j] += e[j] * inv_obj;
  }
  return f;
}

}  // namespace detail

inline Vec encode(const Instance& inst, const EncoderParams& p,
                  const Vocabulary& vocab) {
  Vec h = matvec(p.W, detail::encoder_feature(inst, p, vocab));
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i] + p.b[i]);
  return h;
}

// Element-wise encode, order preserving. n_threads > 1 splits the batch into
// contiguous chunks; every instance still writes its own slot, so the output
// is bit-identical to the sequential path.
inline std::vector<Vec> encode_batch(const std::vector<const Instance*>& batch,
                                     const EncoderParams& p,
                                     const Vocabulary& vocab,
                                     int n_threads = 1) {
  std::vector<Vec> out(batch.size());
  if (n_threads <= 1 || batch.size() < 2) {
    for (std::size_t i = 0; i < batch.size(); ++i)
      out[i] = encode(*batch[i], p, vocab);
    return out;
  }
  const std::size_t chunks = std::min<std::size_t>(
      static_cast<std::size_t>(n_threads), batch.size());
  std::vector<std::future<void>> futs;
  for (std::size_t c = 0; c < chunks; ++c) {
    futs.push_back(std::async(std::launch::async, [&, c]() {
      for (std::size_t i = c; i < batch.size(); i += chunks)
        out[i] = encode(*batch[i], p, vocab);
    }));
  }
  for (auto& f : futs) f.get();
  return out;
}

// Analytic gradients of encode; accumulates into `g`. Recomputes the forward
// internals, so callers only keep the upstream vector.
inline void encoder_backward(const Instance& inst, const EncoderParams& p,
                             const Vocabulary& vocab,
                             const Vec& upstream, EncoderGrads& g) {
  if (upstream.size() != static_cast<std::size_t>(p.d))
    throw InvariantError("upstream gradient has wrong width");
  const std::size_t de = static_cast<std::size_t>(p.d_e);
  Vec f = detail::encoder_feature(inst, p, vocab);
  Vec u = matvec(p.W, f);
  Vec du(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double h = std::tanh(u[i] + p.b[i]);
    du[i] = upstream[i] * (1.0 - h * h);
  }
  for (std::size_t i = 0; i < du.size(); ++i) g.b[i] += du[i];
  add_outer(g.W, du, f);
  Vec df = matvec_t(p.W, du);

  const double inv_n = 1.0 / static_cast<double>(inst.tokens.size());
  for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
    double* e = g.word_emb.row(
        static_cast<std::size_t>(vocab.lookup(inst.tokens[i])));
    for (std::size_t j = 0; j < de; ++j) e[j] += df[j] * inv_n;
  }
  auto marker_grad = [&](std::size_t m) {
    double* e = g.marker.row(m);
    for (std::size_t j = 0; j < de; ++j) e[j] += df[j] * inv_n;
  };
  marker_grad(kSubjStart);
  marker_grad(kSubjEnd);
  marker_grad(kObjStart);
  marker_grad(kObjEnd);

  const double inv_subj = 1.0 / static_cast<double>(inst.subj_end - inst.subj_start);
  for (int i = inst.subj_start; i < inst.subj_end; ++i) {
    double* e = g.word_emb.row(static_cast<std::size_t>(
        vocab.lookup(inst.tokens[static_cast<std::size_t>(i)])));
    for (std::size_t j = 0; j < de; ++j) e[j] += df[de + j] * inv_subj;
  }
  const double inv_obj = 1.0 / static_cast<double>(inst.obj_end - inst.obj_start);
  for (int i = inst.obj_start; i < inst.obj_end; ++i) {
    double* e = g.word_emb.row(static_cast<std::size_t>(
        vocab.lookup(inst.tokens[static_cast<std::size_t>(i)])));
    for (std::size_t j = 0; j < de; ++j) e[j] += df[2 * de + j] * inv_obj;
  }
}

}  // namespace graphcache
