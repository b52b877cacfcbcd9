#pragma once

// Recurrent cell primitives: a vanilla tanh RNN step (reference cell), the
// LSTM step used by both encoder and decoder, and a plain affine layer.
// Forward steps return explicit caches; backward steps consume them and
// accumulate parameter gradients additively, which keeps backpropagation
// through time order-independent and testable one step at a time.

#include <cstddef>

#include "tgsm/linalg.hpp"

namespace tgsm {

// ---------------------------------------------------------------------------
// vanilla RNN: h_t = tanh(W_in x_t + W_rec h_{t-1} + b)
// ---------------------------------------------------------------------------

struct RnnParams {
  Matrix w_in;   // H x E
  Matrix w_rec;  // H x H
  Vector b;      // H
};

inline Vector rnn_forward_step(const RnnParams& p, const Vector& x,
                               const Vector& h_prev) {
  Vector pre = matvec(p.w_in, x);
  const Vector rec = matvec(p.w_rec, h_prev);
  if (pre.size() != rec.size() || pre.size() != p.b.size()) {
    throw std::invalid_argument("rnn_forward_step: inconsistent parameter shapes");
  }
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += rec[i] + p.b[i];
  return activate(pre, Activation::Tanh);
}

using RnnGrads = RnnParams;

struct RnnInputGrads {
  Vector dx;
  Vector dh_prev;
};

// Given upstream dh and the step's forward output h, accumulates parameter
// gradients into `acc` and returns input gradients.
inline RnnInputGrads rnn_backward_step(const RnnParams& p, const Vector& x,
                                       const Vector& h_prev, const Vector& h,
                                       const Vector& dh, RnnGrads& acc) {
  if (dh.size() != h.size() || h.size() != p.b.size()) {
    throw std::invalid_argument("rnn_backward_step: gradient length mismatch");
  }
  Vector d_pre(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    d_pre[i] = dh[i] * (1.0 - h[i] * h[i]);
  }
  add_outer(acc.w_in, d_pre, x);
  add_outer(acc.w_rec, d_pre, h_prev);
  axpy(1.0, d_pre, acc.b);
  RnnInputGrads out;
  out.dx = Vector(x.size(), 0.0);
  out.dh_prev = Vector(h_prev.size(), 0.0);
  add_matvec_transposed(p.w_in, d_pre, out.dx);
  add_matvec_transposed(p.w_rec, d_pre, out.dh_prev);
  return out;
}

// ---------------------------------------------------------------------------
// LSTM cell
// ---------------------------------------------------------------------------

// Each gate has one weight matrix over the concatenated [h_{t-1}; x_t],
// shape H x (H+E), plus a bias of length H.
struct LstmParams {
  Matrix w_forget, w_input, w_cand, w_output;
  Vector b_forget, b_input, b_cand, b_output;

  std::size_t hidden_size() const { return w_forget.rows(); }
  std::size_t input_size() const { return w_forget.cols() - w_forget.rows(); }
};

using LstmGrads = LstmParams;  // same shapes, used as an accumulator

inline LstmParams make_lstm_params(std::size_t hidden, std::size_t input) {
  LstmParams p;
  const std::size_t cols = hidden + input;
  p.w_forget = Matrix(hidden, cols);
  p.w_input = Matrix(hidden, cols);
  p.w_cand = Matrix(hidden, cols);
  p.w_output = Matrix(hidden, cols);
  p.b_forget = Vector(hidden, 0.0);
  p.b_input = Vector(hidden, 0.0);
  p.b_cand = Vector(hidden, 0.0);
  p.b_output = Vector(hidden, 0.0);
  return p;
}

struct LstmState {
  Vector h, c;
};

inline LstmState make_lstm_state(std::size_t hidden) {
  return {Vector(hidden, 0.0), Vector(hidden, 0.0)};
}

// forward intermediates needed by the backward pass
struct LstmStepCache {
  Vector z;           // [h_{t-1}; x_t]
  Vector f, i, o;     // gate activations (sigmoid)
  Vector c_bar;       // candidate (tanh)
  Vector c_prev;
  Vector c_new;
  Vector c_new_tanh;
};

// f = sig(W_f z + b_f), i = sig(W_i z + b_i), c~ = tanh(W_c z + b_c),
// c = f*c_prev + i*c~, o = sig(W_o z + b_o), h = o*tanh(c)
inline LstmState lstm_forward_step(const LstmParams& p, const Vector& x,
                                   const LstmState& prev,
                                   LstmStepCache* cache = nullptr) {
  const std::size_t hidden = p.hidden_size();
  if (x.size() != p.input_size()) {
    throw std::invalid_argument("lstm_forward_step: input length " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(p.input_size()));
  }
  if (prev.h.size() != hidden || prev.c.size() != hidden) {
    throw std::invalid_argument("lstm_forward_step: state length mismatch");
  }

  Vector z;
  z.reserve(hidden + x.size());
  z.insert(z.end(), prev.h.begin(), prev.h.end());
  z.insert(z.end(), x.begin(), x.end());

  auto gate = [&](const Matrix& w, const Vector& b, Activation kind) {
    Vector a = matvec(w, z);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return activate(a, kind);
  };

  const Vector f = gate(p.w_forget, p.b_forget, Activation::Sigmoid);
  const Vector i = gate(p.w_input, p.b_input, Activation::Sigmoid);
  const Vector c_bar = gate(p.w_cand, p.b_cand, Activation::Tanh);
  const Vector o = gate(p.w_output, p.b_output, Activation::Sigmoid);

  LstmState next = make_lstm_state(hidden);
  Vector c_tanh(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    next.c[k] = f[k] * prev.c[k] + i[k] * c_bar[k];
    c_tanh[k] = std::tanh(next.c[k]);
    next.h[k] = o[k] * c_tanh[k];
  }

  if (cache) {
    cache->z = std::move(z);
    cache->f = f;
    cache->i = i;
    cache->o = o;
    cache->c_bar = c_bar;
    cache->c_prev = prev.c;
    cache->c_new = next.c;
    cache->c_new_tanh = std::move(c_tanh);
  }
  return next;
}

struct LstmInputGrads {
  Vector dx;
  Vector dh_prev;
  Vector dc_prev;
};

// Given upstream dh (w.r.t. h_t) and dc (w.r.t. c_t), accumulates parameter
// gradients into `acc` and returns gradients w.r.t. the step inputs.
inline LstmInputGrads lstm_backward_step(const LstmParams& p,
                                         const LstmStepCache& cache,
                                         const Vector& dh, const Vector& dc,
                                         LstmGrads& acc) {
  const std::size_t hidden = p.hidden_size();
  const std::size_t input = p.input_size();
  if (dh.size() != hidden || dc.size() != hidden) {
    throw std::invalid_argument("lstm_backward_step: upstream gradient length mismatch");
  }
  if (cache.z.size() != hidden + input) {
    throw std::invalid_argument("lstm_backward_step: cache does not match params");
  }

  Vector d_o(hidden), d_c_total(hidden), d_f(hidden), d_i(hidden),
      d_c_bar(hidden);
  LstmInputGrads out;
  out.dc_prev = Vector(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    const double th = cache.c_new_tanh[k];
    d_o[k] = dh[k] * th;
    d_c_total[k] = dc[k] + dh[k] * cache.o[k] * (1.0 - th * th);
    d_f[k] = d_c_total[k] * cache.c_prev[k];
    d_i[k] = d_c_total[k] * cache.c_bar[k];
    d_c_bar[k] = d_c_total[k] * cache.i[k];
    out.dc_prev[k] = d_c_total[k] * cache.f[k];
  }

  // through the gate nonlinearities to pre-activations
  Vector da_f(hidden), da_i(hidden), da_o(hidden), da_c(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    da_f[k] = d_f[k] * cache.f[k] * (1.0 - cache.f[k]);
    da_i[k] = d_i[k] * cache.i[k] * (1.0 - cache.i[k]);
    da_o[k] = d_o[k] * cache.o[k] * (1.0 - cache.o[k]);
    da_c[k] = d_c_bar[k] * (1.0 - cache.c_bar[k] * cache.c_bar[k]);
  }

  add_outer(acc.w_forget, da_f, cache.z);
  add_outer(acc.w_input, da_i, cache.z);
  add_outer(acc.w_cand, da_c, cache.z);
  add_outer(acc.w_output, da_o, cache.z);
  axpy(1.0, da_f, acc.b_forget);
  axpy(1.0, da_i, acc.b_input);
  axpy(1.0, da_c, acc.b_cand);
  axpy(1.0, da_o, acc.b_output);

  Vector dz(hidden + input, 0.0);
  add_matvec_transposed(p.w_forget, da_f, dz);
  add_matvec_transposed(p.w_input, da_i, dz);
  add_matvec_transposed(p.w_cand, da_c, dz);
  add_matvec_transposed(p.w_output, da_o, dz);

  out.dh_prev.assign(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(hidden));
  out.dx.assign(dz.begin() + static_cast<std::ptrdiff_t>(hidden), dz.end());
  return out;
}

// ---------------------------------------------------------------------------
// affine layer: y = W x + b
// ---------------------------------------------------------------------------

struct AffineParams {
  Matrix w;  // out x in
  Vector b;  // out
};

using AffineGrads = AffineParams;

inline AffineParams make_affine_params(std::size_t out, std::size_t in) {
  return {Matrix(out, in), Vector(out, 0.0)};
}

inline Vector affine_forward(const AffineParams& p, const Vector& x) {
  Vector y = matvec(p.w, x);
  if (y.size() != p.b.size()) {
    throw std::invalid_argument("affine_forward: bias length mismatch");
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += p.b[i];
  return y;
}

// accumulates dW, db into `acc`; returns dx
inline Vector affine_backward(const AffineParams& p, const Vector& x,
                              const Vector& dy, AffineGrads& acc) {
  if (dy.size() != p.w.rows()) {
    throw std::invalid_argument("affine_backward: upstream gradient length mismatch");
  }
  add_outer(acc.w, dy, x);
  axpy(1.0, dy, acc.b);
  Vector dx(x.size(), 0.0);
  add_matvec_transposed(p.w, dy, dx);
  return dx;
}

}  // namespace tgsm
