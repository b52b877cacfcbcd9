#pragma once

// The full encoder-decoder model: embedding lookup, encoder LSTM, decoder
// LSTM with additive attention, and a two-layer vocabulary head, plus the
// teacher-forced sequence loss and the exact end-to-end backward pass.
//
// Decoder wiring: the decoder starts from the encoder's final (h, c) with
// <sos> as its first input. Attention is computed from the decoder hidden
// state after the LSTM update, and the context feeds only the output head.
// Sources carry no <eos>; targets always end with one.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tgsm/attention.hpp"
#include "tgsm/embedding.hpp"
#include "tgsm/linalg.hpp"
#include "tgsm/lstm.hpp"
#include "tgsm/text.hpp"

namespace tgsm {

struct ModelConfig {
  std::size_t hidden = 128;
  std::size_t attn_dim = 128;
  std::size_t head_dim = 128;
  double init_half_range = 0.05;
};

struct ModelParams {
  EmbeddingTable embeddings;
  LstmParams encoder;
  LstmParams decoder;
  AttentionParams attention;
  AffineParams head1;  // (hidden + hidden) -> head_dim, tanh
  AffineParams head2;  // head_dim -> V, linear into softmax

  std::size_t vocab_size() const { return embeddings.matrix.rows(); }
  std::size_t emb_dim() const { return embeddings.dim; }
  std::size_t hidden_size() const { return encoder.hidden_size(); }
  std::size_t attn_size() const { return attention.v.size(); }
  std::size_t head_size() const { return head1.w.rows(); }
};

struct ModelGrads {
  Matrix embeddings;  // V x E when embeddings are trainable, empty otherwise
  LstmGrads encoder;
  LstmGrads decoder;
  AttentionGrads attention;
  AffineGrads head1;
  AffineGrads head2;
};

inline ModelGrads make_zero_grads(const ModelParams& p) {
  ModelGrads g;
  if (p.embeddings.trainable) {
    g.embeddings = Matrix(p.vocab_size(), p.emb_dim());
  }
  g.encoder = make_lstm_params(p.hidden_size(), p.emb_dim());
  g.decoder = make_lstm_params(p.hidden_size(), p.emb_dim());
  g.attention = make_attention_params(p.attn_size(), p.hidden_size(), p.hidden_size());
  g.head1 = make_affine_params(p.head_size(), 2 * p.hidden_size());
  g.head2 = make_affine_params(p.vocab_size(), p.head_size());
  return g;
}

// Weights uniform in [-init_half_range, +init_half_range], biases zero,
// embeddings taken as given. Draw order is fixed, so a seed pins the model.
inline ModelParams init_model(const Vocab& vocab, EmbeddingTable embeddings,
                              const ModelConfig& config, Rng& rng) {
  if (embeddings.matrix.rows() != vocab.size()) {
    throw std::invalid_argument("init_model: embedding rows != vocab size");
  }
  if (config.hidden == 0 || config.attn_dim == 0 || config.head_dim == 0) {
    throw std::invalid_argument("init_model: dimensions must be positive");
  }
  const std::size_t hidden = config.hidden;
  const std::size_t emb = embeddings.dim;
  const double r = config.init_half_range;

  ModelParams p;
  p.embeddings = std::move(embeddings);

  auto init_lstm = [&](LstmParams& cell) {
    cell = make_lstm_params(hidden, emb);
    cell.w_forget = seeded_uniform(rng, hidden, hidden + emb, r);
    cell.w_input = seeded_uniform(rng, hidden, hidden + emb, r);
    cell.w_cand = seeded_uniform(rng, hidden, hidden + emb, r);
    cell.w_output = seeded_uniform(rng, hidden, hidden + emb, r);
  };
  init_lstm(p.encoder);
  init_lstm(p.decoder);

  p.attention = make_attention_params(config.attn_dim, hidden, hidden);
  p.attention.w_enc = seeded_uniform(rng, config.attn_dim, hidden, r);
  p.attention.w_dec = seeded_uniform(rng, config.attn_dim, hidden, r);
  fill_uniform(rng, p.attention.v, r);

  p.head1 = make_affine_params(config.head_dim, 2 * hidden);
  p.head1.w = seeded_uniform(rng, config.head_dim, 2 * hidden, r);
  p.head2 = make_affine_params(vocab.size(), config.head_dim);
  p.head2.w = seeded_uniform(rng, vocab.size(), config.head_dim, r);
  return p;
}

namespace detail {

inline void check_token_range(const std::vector<TokenId>& ids,
                              std::size_t vocab_size, const char* what) {
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw std::out_of_range(std::string(what) + ": token id " +
                              std::to_string(id) + " out of range [0," +
                              std::to_string(vocab_size) + ")");
    }
  }
}

}  // namespace detail

struct EncodeResult {
  Matrix outputs;  // T x H, row t = encoder hidden state h_t
  LstmState final_state;
  std::vector<LstmStepCache> caches;
};

// Runs the encoder LSTM left to right from a zero initial state.
inline EncodeResult encode_sequence(const ModelParams& p,
                                    const std::vector<TokenId>& source) {
  if (source.empty()) {
    throw std::invalid_argument("encode_sequence: empty source");
  }
  detail::check_token_range(source, p.vocab_size(), "encode_sequence");
  const std::size_t hidden = p.hidden_size();

  EncodeResult result;
  result.outputs = Matrix(source.size(), hidden);
  result.caches.resize(source.size());
  LstmState state = make_lstm_state(hidden);
  for (std::size_t t = 0; t < source.size(); ++t) {
    const Vector x = p.embeddings.matrix.row_copy(static_cast<std::size_t>(source[t]));
    state = lstm_forward_step(p.encoder, x, state, &result.caches[t]);
    double* row = result.outputs.row_ptr(t);
    for (std::size_t k = 0; k < hidden; ++k) row[k] = state.h[k];
  }
  result.final_state = std::move(state);
  return result;
}

struct DecodeStepCache {
  TokenId input_id = 0;
  LstmStepCache lstm;
  LstmState state;  // decoder state after this step
  AttentionOutput attn;
  Vector head1_in;   // [h_t; context]
  Vector head1_act;  // tanh output of the first head layer
  Vector dist;       // probability distribution over the vocabulary
};

// One decoder step: embed the previous token, advance the decoder LSTM,
// attend over the encoder outputs, and map [h; context] through the
// two-layer head into a vocabulary distribution.
inline DecodeStepCache decode_step(const ModelParams& p,
                                   const Matrix& enc_outputs,
                                   const LstmState& prev_state,
                                   TokenId prev_id) {
  if (prev_id < 0 || static_cast<std::size_t>(prev_id) >= p.vocab_size()) {
    throw std::out_of_range("decode_step: token id out of range");
  }
  DecodeStepCache cache;
  cache.input_id = prev_id;
  const Vector x = p.embeddings.matrix.row_copy(static_cast<std::size_t>(prev_id));
  cache.state = lstm_forward_step(p.decoder, x, prev_state, &cache.lstm);
  cache.attn = attention_forward(p.attention, enc_outputs, cache.state.h);

  cache.head1_in.reserve(cache.state.h.size() + cache.attn.context.size());
  cache.head1_in.insert(cache.head1_in.end(), cache.state.h.begin(),
                        cache.state.h.end());
  cache.head1_in.insert(cache.head1_in.end(), cache.attn.context.begin(),
                        cache.attn.context.end());
  cache.head1_act = activate(affine_forward(p.head1, cache.head1_in), Activation::Tanh);
  cache.dist = softmax(affine_forward(p.head2, cache.head1_act));
  return cache;
}

struct ForwardTrace {
  EncodeResult enc;
  std::vector<DecodeStepCache> steps;
  std::vector<double> step_losses;
};

// Teacher-forced loss: sum over target positions of -log p(target_t),
// feeding <sos> then the gold tokens. The target must end with <eos>.
inline std::pair<double, ForwardTrace> sequence_loss(
    const ModelParams& p, const std::vector<TokenId>& source,
    const std::vector<TokenId>& target) {
  if (target.empty() || target.back() != Vocab::kEos) {
    throw std::invalid_argument("sequence_loss: target must end with <eos>");
  }
  detail::check_token_range(target, p.vocab_size(), "sequence_loss");

  ForwardTrace trace;
  trace.enc = encode_sequence(p, source);
  trace.steps.reserve(target.size());
  trace.step_losses.reserve(target.size());

  double total = 0.0;
  LstmState state = trace.enc.final_state;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const TokenId prev = (t == 0) ? Vocab::kSos : target[t - 1];
    trace.steps.push_back(decode_step(p, trace.enc.outputs, state, prev));
    state = trace.steps.back().state;
    const double prob = trace.steps.back().dist[static_cast<std::size_t>(target[t])];
    const double loss = -std::log(prob);
    trace.step_losses.push_back(loss);
    total += loss;
  }
  return {total, std::move(trace)};
}

// Exact gradients of the summed loss w.r.t. every trainable tensor, by
// reverse-order backpropagation through the head, attention, decoder, and
// encoder. Encoder outputs collect gradient from every decoder step's
// attention before the encoder itself is walked backwards.
inline ModelGrads model_backward(const ModelParams& p, const ForwardTrace& trace,
                                 const std::vector<TokenId>& source,
                                 const std::vector<TokenId>& target) {
  if (trace.steps.size() != target.size() ||
      trace.enc.outputs.rows() != source.size()) {
    throw std::invalid_argument("model_backward: trace does not match inputs");
  }
  const std::size_t hidden = p.hidden_size();
  ModelGrads grads = make_zero_grads(p);

  Matrix d_enc_outputs(source.size(), hidden);
  Vector dh_carry(hidden, 0.0);
  Vector dc_carry(hidden, 0.0);

  for (std::size_t t = target.size(); t-- > 0;) {
    const DecodeStepCache& step = trace.steps[t];

    // fused softmax + cross-entropy: d_logits = p - onehot(target)
    Vector d_logits = step.dist;
    d_logits[static_cast<std::size_t>(target[t])] -= 1.0;

    Vector d_act = affine_backward(p.head2, step.head1_act, d_logits, grads.head2);
    for (std::size_t i = 0; i < d_act.size(); ++i) {
      d_act[i] *= 1.0 - step.head1_act[i] * step.head1_act[i];
    }
    const Vector d_head_in = affine_backward(p.head1, step.head1_in, d_act, grads.head1);

    Vector dh(d_head_in.begin(), d_head_in.begin() + static_cast<std::ptrdiff_t>(hidden));
    const Vector d_context(d_head_in.begin() + static_cast<std::ptrdiff_t>(hidden),
                           d_head_in.end());
    axpy(1.0, dh_carry, dh);

    attention_backward(p.attention, trace.enc.outputs, step.state.h, step.attn,
                       d_context, {}, grads.attention, d_enc_outputs, dh);

    const LstmInputGrads in_grads =
        lstm_backward_step(p.decoder, step.lstm, dh, dc_carry, grads.decoder);
    if (p.embeddings.trainable) {
      double* row = grads.embeddings.row_ptr(static_cast<std::size_t>(step.input_id));
      for (std::size_t j = 0; j < in_grads.dx.size(); ++j) row[j] += in_grads.dx[j];
    }
    dh_carry = in_grads.dh_prev;
    dc_carry = in_grads.dc_prev;
  }

  // the decoder's initial state is the encoder's final state
  for (std::size_t t = source.size(); t-- > 0;) {
    Vector dh = Vector(d_enc_outputs.row_ptr(t), d_enc_outputs.row_ptr(t) + hidden);
    axpy(1.0, dh_carry, dh);
    const LstmInputGrads in_grads =
        lstm_backward_step(p.encoder, trace.enc.caches[t], dh, dc_carry, grads.encoder);
    if (p.embeddings.trainable) {
      double* row = grads.embeddings.row_ptr(static_cast<std::size_t>(source[t]));
      for (std::size_t j = 0; j < in_grads.dx.size(); ++j) row[j] += in_grads.dx[j];
    }
    dh_carry = in_grads.dh_prev;
    dc_carry = in_grads.dc_prev;
  }
  return grads;
}

// Every trainable tensor with its checkpoint name, in a fixed order shared
// by the optimizer, the gradient clipper, the checkpoint format, and the
// gradient checker.
inline std::vector<std::pair<std::string, Matrix*>> named_matrices(ModelParams& p) {
  std::vector<std::pair<std::string, Matrix*>> out = {
      {"embedding.weight", &p.embeddings.matrix},
      {"encoder.w_forget", &p.encoder.w_forget},
      {"encoder.w_input", &p.encoder.w_input},
      {"encoder.w_cand", &p.encoder.w_cand},
      {"encoder.w_output", &p.encoder.w_output},
      {"decoder.w_forget", &p.decoder.w_forget},
      {"decoder.w_input", &p.decoder.w_input},
      {"decoder.w_cand", &p.decoder.w_cand},
      {"decoder.w_output", &p.decoder.w_output},
      {"attention.w_enc", &p.attention.w_enc},
      {"attention.w_dec", &p.attention.w_dec},
      {"head1.w", &p.head1.w},
      {"head2.w", &p.head2.w},
  };
  return out;
}

inline std::vector<std::pair<std::string, Vector*>> named_vectors(ModelParams& p) {
  return {
      {"encoder.b_forget", &p.encoder.b_forget},
      {"encoder.b_input", &p.encoder.b_input},
      {"encoder.b_cand", &p.encoder.b_cand},
      {"encoder.b_output", &p.encoder.b_output},
      {"decoder.b_forget", &p.decoder.b_forget},
      {"decoder.b_input", &p.decoder.b_input},
      {"decoder.b_cand", &p.decoder.b_cand},
      {"decoder.b_output", &p.decoder.b_output},
      {"attention.bias", &p.attention.bias},
      {"attention.v", &p.attention.v},
      {"head1.b", &p.head1.b},
      {"head2.b", &p.head2.b},
  };
}

inline std::vector<std::pair<std::string, const Matrix*>> named_matrices(
    const ModelParams& p) {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : named_matrices(const_cast<ModelParams&>(p))) {
    out.emplace_back(name, m);
  }
  return out;
}

inline std::vector<std::pair<std::string, const Vector*>> named_vectors(
    const ModelParams& p) {
  std::vector<std::pair<std::string, const Vector*>> out;
  for (auto& [name, v] : named_vectors(const_cast<ModelParams&>(p))) {
    out.emplace_back(name, v);
  }
  return out;
}

// Gradient tensors under the same names. The embedding entry is present
// only when the table is trainable.
inline std::vector<std::pair<std::string, Matrix*>> named_matrices(ModelGrads& g,
                                                                   bool trainable_emb) {
  std::vector<std::pair<std::string, Matrix*>> out;
  if (trainable_emb) out.emplace_back("embedding.weight", &g.embeddings);
  out.insert(out.end(), {
      {"encoder.w_forget", &g.encoder.w_forget},
      {"encoder.w_input", &g.encoder.w_input},
      {"encoder.w_cand", &g.encoder.w_cand},
      {"encoder.w_output", &g.encoder.w_output},
      {"decoder.w_forget", &g.decoder.w_forget},
      {"decoder.w_input", &g.decoder.w_input},
      {"decoder.w_cand", &g.decoder.w_cand},
      {"decoder.w_output", &g.decoder.w_output},
      {"attention.w_enc", &g.attention.w_enc},
      {"attention.w_dec", &g.attention.w_dec},
      {"head1.w", &g.head1.w},
      {"head2.w", &g.head2.w},
  });
  return out;
}

inline std::vector<std::pair<std::string, Vector*>> named_vectors(ModelGrads& g) {
  return {
      {"encoder.b_forget", &g.encoder.b_forget},
      {"encoder.b_input", &g.encoder.b_input},
      {"encoder.b_cand", &g.encoder.b_cand},
      {"encoder.b_output", &g.encoder.b_output},
      {"decoder.b_forget", &g.decoder.b_forget},
      {"decoder.b_input", &g.decoder.b_input},
      {"decoder.b_cand", &g.decoder.b_cand},
      {"decoder.b_output", &g.decoder.b_output},
      {"attention.bias", &g.attention.bias},
      {"attention.v", &g.attention.v},
      {"head1.b", &g.head1.b},
      {"head2.b", &g.head2.b},
  };
}

// merges b into a (same shapes)
inline void add_grads(ModelGrads& a, const ModelGrads& b, bool trainable_emb) {
  auto add_matrix = [](Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
  };
  auto add_lstm = [&](LstmGrads& dst, const LstmGrads& src) {
    add_matrix(dst.w_forget, src.w_forget);
    add_matrix(dst.w_input, src.w_input);
    add_matrix(dst.w_cand, src.w_cand);
    add_matrix(dst.w_output, src.w_output);
    axpy(1.0, src.b_forget, dst.b_forget);
    axpy(1.0, src.b_input, dst.b_input);
    axpy(1.0, src.b_cand, dst.b_cand);
    axpy(1.0, src.b_output, dst.b_output);
  };
  if (trainable_emb) add_matrix(a.embeddings, b.embeddings);
  add_lstm(a.encoder, b.encoder);
  add_lstm(a.decoder, b.decoder);
  add_matrix(a.attention.w_enc, b.attention.w_enc);
  add_matrix(a.attention.w_dec, b.attention.w_dec);
  axpy(1.0, b.attention.bias, a.attention.bias);
  axpy(1.0, b.attention.v, a.attention.v);
  add_matrix(a.head1.w, b.head1.w);
  axpy(1.0, b.head1.b, a.head1.b);
  add_matrix(a.head2.w, b.head2.w);
  axpy(1.0, b.head2.b, a.head2.b);
}

}  // namespace tgsm
