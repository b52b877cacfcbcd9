#pragma once

// Additive attention over the encoder output stack: tanh-scored importance
// per source position, softmax-normalized weights, and the weighted-sum
// context vector, with an analytic backward pass.

#include <cstddef>

#include "tgsm/linalg.hpp"

namespace tgsm {

struct AttentionParams {
  Matrix w_enc;  // A x H_enc, projects an encoder output row
  Matrix w_dec;  // A x H_dec, projects the decoder hidden state
  Vector bias;   // A
  Vector v;      // A, scoring vector
};

using AttentionGrads = AttentionParams;

inline AttentionParams make_attention_params(std::size_t attn, std::size_t h_enc,
                                             std::size_t h_dec) {
  return {Matrix(attn, h_enc), Matrix(attn, h_dec), Vector(attn, 0.0),
          Vector(attn, 0.0)};
}

struct AttentionOutput {
  Vector scores;   // T
  Vector weights;  // T, probability distribution over source positions
  Vector context;  // H_enc
  Matrix tanh_out; // T x A, cached for the backward pass
};

// score_i = v . tanh(W_enc e_i + W_dec h + bias); weights = softmax(scores);
// context = sum_i weights_i * e_i
inline AttentionOutput attention_forward(const AttentionParams& p,
                                         const Matrix& enc_outputs,
                                         const Vector& dec_hidden) {
  if (enc_outputs.empty()) {
    throw std::invalid_argument("attention_forward: empty source encoding");
  }
  const std::size_t steps = enc_outputs.rows();
  const std::size_t h_enc = enc_outputs.cols();
  const std::size_t attn = p.v.size();
  if (p.w_enc.cols() != h_enc || p.w_dec.cols() != dec_hidden.size() ||
      p.w_enc.rows() != attn || p.w_dec.rows() != attn ||
      p.bias.size() != attn) {
    throw std::invalid_argument("attention_forward: parameter shape mismatch");
  }

  Vector dec_proj = matvec(p.w_dec, dec_hidden);
  for (std::size_t a = 0; a < attn; ++a) dec_proj[a] += p.bias[a];

  AttentionOutput out;
  out.scores = Vector(steps);
  out.tanh_out = Matrix(steps, attn);
  for (std::size_t t = 0; t < steps; ++t) {
    Vector u = matvec(p.w_enc, enc_outputs.row_copy(t));
    double score = 0.0;
    for (std::size_t a = 0; a < attn; ++a) {
      const double th = std::tanh(u[a] + dec_proj[a]);
      out.tanh_out(t, a) = th;
      score += p.v[a] * th;
    }
    out.scores[t] = score;
  }
  out.weights = softmax(out.scores);
  out.context = Vector(h_enc, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    axpy(out.weights[t], enc_outputs.row_copy(t), out.context);
  }
  return out;
}

// Backward through the context sum, the softmax, the tanh scores, and both
// projections. d_weights_extra (may be empty) is an additional upstream
// gradient on the attention weights themselves. Parameter gradients go
// into `acc`; d_enc_outputs and d_dec_hidden are accumulated into.
inline void attention_backward(const AttentionParams& p,
                               const Matrix& enc_outputs,
                               const Vector& dec_hidden,
                               const AttentionOutput& out,
                               const Vector& d_context,
                               const Vector& d_weights_extra,
                               AttentionGrads& acc, Matrix& d_enc_outputs,
                               Vector& d_dec_hidden) {
  const std::size_t steps = enc_outputs.rows();
  const std::size_t h_enc = enc_outputs.cols();
  const std::size_t attn = p.v.size();
  if (d_context.size() != h_enc) {
    throw std::invalid_argument("attention_backward: d_context length mismatch");
  }
  if (!d_weights_extra.empty() && d_weights_extra.size() != steps) {
    throw std::invalid_argument("attention_backward: d_weights_extra length mismatch");
  }
  if (d_enc_outputs.rows() != steps || d_enc_outputs.cols() != h_enc ||
      d_dec_hidden.size() != dec_hidden.size()) {
    throw std::invalid_argument("attention_backward: accumulator shape mismatch");
  }

  // gradient on the weights: from the context sum plus any direct term
  Vector d_weights(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* e = enc_outputs.row_ptr(t);
    double acc_w = 0.0;
    for (std::size_t j = 0; j < h_enc; ++j) acc_w += e[j] * d_context[j];
    d_weights[t] = acc_w + (d_weights_extra.empty() ? 0.0 : d_weights_extra[t]);
    // context sum also feeds the encoder rows directly
    double* de = d_enc_outputs.row_ptr(t);
    for (std::size_t j = 0; j < h_enc; ++j) {
      de[j] += out.weights[t] * d_context[j];
    }
  }

  // softmax jacobian: ds_t = w_t * (dw_t - sum_j w_j dw_j)
  double dot = 0.0;
  for (std::size_t t = 0; t < steps; ++t) dot += out.weights[t] * d_weights[t];
  Vector d_scores(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    d_scores[t] = out.weights[t] * (d_weights[t] - dot);
  }

  Vector dt(attn);
  for (std::size_t t = 0; t < steps; ++t) {
    const double ds = d_scores[t];
    if (ds == 0.0) continue;
    for (std::size_t a = 0; a < attn; ++a) {
      const double th = out.tanh_out(t, a);
      acc.v[a] += ds * th;
      dt[a] = ds * p.v[a] * (1.0 - th * th);
    }
    const Vector e_row = enc_outputs.row_copy(t);
    add_outer(acc.w_enc, dt, e_row);
    add_outer(acc.w_dec, dt, dec_hidden);
    axpy(1.0, dt, acc.bias);
    double* de = d_enc_outputs.row_ptr(t);
    for (std::size_t a = 0; a < attn; ++a) {
      const double dta = dt[a];
      const double* w_row = p.w_enc.row_ptr(a);
      for (std::size_t j = 0; j < h_enc; ++j) de[j] += dta * w_row[j];
    }
    add_matvec_transposed(p.w_dec, dt, d_dec_hidden);
  }
}

}  // namespace tgsm
