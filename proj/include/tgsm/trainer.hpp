#pragma once

// Training loop and persistence: batched gradient accumulation with global
// norm clipping and plain SGD, the versioned binary checkpoint format, and
// the finite-difference gradient checker.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tgsm/embedding.hpp"
#include "tgsm/model.hpp"
#include "tgsm/text.hpp"

namespace tgsm {

struct TrainConfig {
  std::size_t hidden = 128;
  std::size_t emb_dim = 300;
  std::size_t attn_dim = 128;
  std::size_t head_dim = 128;
  std::size_t epochs = 40;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t min_freq = 1;
  std::size_t max_decode_len = 20;
  bool embeddings_trainable = false;
  std::size_t train_count = 0;  // 0 = derive from the corpus size
  std::size_t workers = 1;
  double init_half_range = 0.05;

  void validate() const {
    if (hidden == 0 || emb_dim == 0 || attn_dim == 0 || head_dim == 0 ||
        batch_size == 0 || min_freq == 0 || max_decode_len == 0 || workers == 0) {
      throw std::invalid_argument("TrainConfig: counts must be >= 1");
    }
    if (learning_rate <= 0.0) {
      throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    }
    if (clip_norm <= 0.0) {
      throw std::invalid_argument("TrainConfig: clip_norm must be positive");
    }
    if (init_half_range <= 0.0) {
      throw std::invalid_argument("TrainConfig: init_half_range must be positive");
    }
  }
};

// 1700 for a 2000-document corpus, ceil(0.85 N) otherwise
inline std::size_t resolve_train_count(const TrainConfig& config,
                                       std::size_t corpus_size) {
  if (config.train_count != 0) return config.train_count;
  if (corpus_size == 2000) return 1700;
  return (corpus_size * 85 + 99) / 100;
}

struct EpochReport {
  std::size_t epoch = 0;
  double loss_per_token = 0.0;
  double seconds = 0.0;
  std::size_t examples = 0;
};

struct EncodedPair {
  std::vector<TokenId> source;
  std::vector<TokenId> target;  // ends with <eos>
};

inline std::vector<EncodedPair> encode_corpus(const Corpus& corpus,
                                              const Vocab& vocab) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    out.push_back({encode_ids(pair.source_tokens, vocab, false),
                   encode_ids(pair.summary_tokens, vocab, true)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

// theta <- theta - lr * g, skipping the embedding table when frozen
inline void sgd_update(ModelParams& params, const ModelGrads& grads, double lr) {
  auto step_matrix = [lr](Matrix& theta, const Matrix& g) {
    if (!theta.same_shape(g)) {
      throw std::invalid_argument("sgd_update: gradient shape mismatch");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta.data()[i] -= lr * g.data()[i];
    }
  };
  auto step_vector = [lr](Vector& theta, const Vector& g) {
    if (theta.size() != g.size()) {
      throw std::invalid_argument("sgd_update: gradient length mismatch");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g[i];
  };
  auto step_lstm = [&](LstmParams& cell, const LstmGrads& g) {
    step_matrix(cell.w_forget, g.w_forget);
    step_matrix(cell.w_input, g.w_input);
    step_matrix(cell.w_cand, g.w_cand);
    step_matrix(cell.w_output, g.w_output);
    step_vector(cell.b_forget, g.b_forget);
    step_vector(cell.b_input, g.b_input);
    step_vector(cell.b_cand, g.b_cand);
    step_vector(cell.b_output, g.b_output);
  };
  if (params.embeddings.trainable) {
    step_matrix(params.embeddings.matrix, grads.embeddings);
  }
  step_lstm(params.encoder, grads.encoder);
  step_lstm(params.decoder, grads.decoder);
  step_matrix(params.attention.w_enc, grads.attention.w_enc);
  step_matrix(params.attention.w_dec, grads.attention.w_dec);
  step_vector(params.attention.bias, grads.attention.bias);
  step_vector(params.attention.v, grads.attention.v);
  step_matrix(params.head1.w, grads.head1.w);
  step_vector(params.head1.b, grads.head1.b);
  step_matrix(params.head2.w, grads.head2.w);
  step_vector(params.head2.b, grads.head2.b);
}

inline std::vector<std::span<double>> grad_spans(ModelGrads& grads,
                                                 bool trainable_emb) {
  std::vector<std::span<double>> spans;
  for (auto& [name, m] : named_matrices(grads, trainable_emb)) {
    spans.push_back(m->flat());
  }
  for (auto& [name, v] : named_vectors(grads)) {
    spans.push_back(std::span<double>(*v));
  }
  return spans;
}

// called after each parameter update with the post-clip gradient norm
using UpdateObserver = std::function<void(std::size_t batch_index, double grad_norm)>;

namespace detail {

struct BatchResult {
  ModelGrads grads;
  double loss = 0.0;
  std::size_t tokens = 0;
};

// forward+backward over examples[begin, end), gradients summed
inline BatchResult accumulate_range(const ModelParams& params,
                                    const std::vector<EncodedPair>& examples,
                                    const std::vector<std::size_t>& order,
                                    std::size_t begin, std::size_t end) {
  BatchResult result;
  result.grads = make_zero_grads(params);
  for (std::size_t i = begin; i < end; ++i) {
    const EncodedPair& example = examples[order[i]];
    try {
      auto [loss, trace] = sequence_loss(params, example.source, example.target);
      ModelGrads g = model_backward(params, trace, example.source, example.target);
      add_grads(result.grads, g, params.embeddings.trainable);
      result.loss += loss;
      result.tokens += example.target.size();
    } catch (const std::exception& e) {
      throw std::runtime_error("example " + std::to_string(order[i]) + ": " +
                               e.what());
    }
  }
  return result;
}

}  // namespace detail

// One pass over the examples in a seeded-shuffled order. Per batch: sum the
// per-sequence gradients, normalize by the batch's total target tokens,
// clip by global norm, and apply one SGD step. Multi-worker mode splits
// each batch across threads; gradients merge in worker order, so bitwise
// determinism holds per (seed, workers) setting, and the single-worker
// contract matches a plain sequential loop.
inline EpochReport train_epoch(ModelParams& params,
                               const std::vector<EncodedPair>& examples,
                               const TrainConfig& config, Rng& rng,
                               std::size_t epoch_index = 0,
                               const UpdateObserver& observer = nullptr) {
  if (examples.empty()) {
    throw std::invalid_argument("train_epoch: empty corpus");
  }
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  double epoch_loss = 0.0;
  std::size_t epoch_tokens = 0;
  std::size_t batch_index = 0;
  for (std::size_t begin = 0; begin < order.size();
       begin += config.batch_size, ++batch_index) {
    const std::size_t end = std::min(begin + config.batch_size, order.size());

    detail::BatchResult batch;
    if (config.workers <= 1 || end - begin == 1) {
      batch = detail::accumulate_range(params, examples, order, begin, end);
    } else {
      const std::size_t n = end - begin;
      const std::size_t workers = std::min(config.workers, n);
      const std::size_t chunk = (n + workers - 1) / workers;
      std::vector<detail::BatchResult> results(workers);
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> threads;
      for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w]() {
          const std::size_t lo = begin + w * chunk;
          const std::size_t hi = std::min(lo + chunk, end);
          try {
            if (lo < hi) {
              results[w] = detail::accumulate_range(params, examples, order, lo, hi);
            } else {
              results[w].grads = make_zero_grads(params);
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : threads) t.join();
      for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
      }
      batch = std::move(results[0]);
      for (std::size_t w = 1; w < workers; ++w) {
        add_grads(batch.grads, results[w].grads, params.embeddings.trainable);
        batch.loss += results[w].loss;
        batch.tokens += results[w].tokens;
      }
    }

    const double inv_tokens = 1.0 / static_cast<double>(batch.tokens);
    auto spans = grad_spans(batch.grads, params.embeddings.trainable);
    for (auto& span : spans) {
      for (double& g : span) g *= inv_tokens;
    }
    clip_global_norm(spans, config.clip_norm);
    if (observer) {
      double sq = 0.0;
      for (const auto& span : spans) {
        for (double g : span) sq += g * g;
      }
      observer(batch_index, std::sqrt(sq));
    }
    sgd_update(params, batch.grads, config.learning_rate);

    epoch_loss += batch.loss;
    epoch_tokens += batch.tokens;
  }

  EpochReport report;
  report.epoch = epoch_index;
  report.loss_per_token = epoch_loss / static_cast<double>(epoch_tokens);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.examples = examples.size();
  return report;
}

struct TrainResult {
  ModelParams params;
  Vocab vocab;
  std::vector<EpochReport> reports;
  Corpus held_out;  // the test portion of the split; empty when not split
};

using EpochCallback = std::function<void(const EpochReport&)>;

// Full pipeline: vocabulary (unless supplied), embeddings (random without a
// vectors file), model init, train/test split, then config.epochs passes.
inline TrainResult train(const Corpus& corpus, const TrainConfig& config,
                         const Vocab* vocab_in = nullptr,
                         const std::string* vec_path = nullptr,
                         const EpochCallback& on_epoch = nullptr) {
  config.validate();
  if (corpus.empty()) {
    throw std::invalid_argument("train: empty corpus");
  }

  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const FormatError& e) {
      throw FormatError(std::string(name) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(name) + ": " + e.what());
    }
  };

  TrainResult result;
  result.vocab = vocab_in
                     ? *vocab_in
                     : stage("build-vocab", [&]() {
                         return build_vocab(corpus, config.min_freq);
                       });

  Rng rng(config.seed);
  EmbeddingTable table = stage("embeddings", [&]() {
    std::unordered_map<std::string, Vector> parsed;
    if (vec_path) {
      std::unordered_set<std::string> wanted(result.vocab.tokens().begin(),
                                             result.vocab.tokens().end());
      VecFileData data = parse_vec_file(*vec_path, wanted);
      if (data.dim != config.emb_dim) {
        throw FormatError("vectors file has dim " + std::to_string(data.dim) +
                          ", config expects " + std::to_string(config.emb_dim));
      }
      parsed = std::move(data.vectors);
    }
    EmbeddingTable t = build_embedding_matrix(result.vocab, parsed,
                                              config.emb_dim, rng,
                                              config.init_half_range);
    t.trainable = config.embeddings_trainable;
    return t;
  });

  result.params = stage("init-model", [&]() {
    ModelConfig mc{config.hidden, config.attn_dim, config.head_dim,
                   config.init_half_range};
    return init_model(result.vocab, std::move(table), mc, rng);
  });

  const std::size_t train_count = resolve_train_count(config, corpus.size());
  if (train_count > corpus.size()) {
    throw std::invalid_argument("train: train_count " + std::to_string(train_count) +
                                " exceeds corpus size " +
                                std::to_string(corpus.size()));
  }
  // train_count == size means no held-out portion
  Corpus train_part;
  if (train_count < corpus.size()) {
    auto [tr, te] = stage("split", [&]() {
      return split_corpus(corpus, train_count, config.seed);
    });
    train_part = std::move(tr);
    result.held_out = std::move(te);
  } else {
    train_part = corpus;
  }

  const std::vector<EncodedPair> examples = encode_corpus(train_part, result.vocab);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    result.reports.push_back(stage("train-epoch", [&]() {
      return train_epoch(result.params, examples, config, rng, epoch);
    }));
    if (on_epoch) on_epoch(result.reports.back());
  }
  return result;
}

// ---------------------------------------------------------------------------
// checkpoint format
//
// magic "TGSM" | version u32 LE | dims V,E,H,A,H_head as u64 LE | config
// echo: u32 LE byte length + UTF-8 key=value lines | tensor blocks, each:
// name length u32 LE, name bytes, ndim u32 LE, dims u64 LE, payload f64 LE
// row-major. Epoch index and final train loss travel in the config echo.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'T', 'G', 'S', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}
  void u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b, 4);
  }
  void u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const char* data, std::size_t n) {
    out_.write(data, static_cast<std::streamsize>(n));
  }

private:
  std::ostream& out_;
};

class ByteReader {
public:
  ByteReader(std::istream& in, std::string name)
      : in_(in), name_(std::move(name)) {}

  std::size_t offset() const { return offset_; }

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(name_ + ": truncated checkpoint at offset " +
                        std::to_string(offset_));
    }
    offset_ += n;
  }
  std::uint32_t u32() {
    char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }
  std::uint64_t u64() {
    char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void fail(const std::string& why, std::size_t at) const {
    throw FormatError(name_ + ": " + why + " at offset " + std::to_string(at));
  }

private:
  std::istream& in_;
  std::string name_;
  std::size_t offset_ = 0;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline std::map<std::string, std::string> config_echo(const TrainConfig& c) {
  return {
      {"hidden", std::to_string(c.hidden)},
      {"emb_dim", std::to_string(c.emb_dim)},
      {"attn_dim", std::to_string(c.attn_dim)},
      {"head_dim", std::to_string(c.head_dim)},
      {"epochs", std::to_string(c.epochs)},
      {"learning_rate", detail::format_double(c.learning_rate)},
      {"batch_size", std::to_string(c.batch_size)},
      {"clip_norm", detail::format_double(c.clip_norm)},
      {"seed", std::to_string(c.seed)},
      {"min_freq", std::to_string(c.min_freq)},
      {"max_decode_len", std::to_string(c.max_decode_len)},
      {"embeddings_trainable", c.embeddings_trainable ? "1" : "0"},
      {"train_count", std::to_string(c.train_count)},
      {"workers", std::to_string(c.workers)},
      {"init_half_range", detail::format_double(c.init_half_range)},
  };
}

inline void checkpoint_save(const ModelParams& params, const TrainConfig& config,
                            const std::string& path, std::size_t epoch,
                            double final_train_loss) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open checkpoint for writing: " + path);
  }
  detail::ByteWriter w(out);
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(params.vocab_size());
  w.u64(params.emb_dim());
  w.u64(params.hidden_size());
  w.u64(params.attn_size());
  w.u64(params.head_size());

  std::map<std::string, std::string> echo = config_echo(config);
  echo["epoch"] = std::to_string(epoch);
  echo["final_train_loss"] = detail::format_double(final_train_loss);
  echo["coverage"] = detail::format_double(params.embeddings.coverage);
  std::string echo_text;
  for (const auto& [key, value] : echo) {
    echo_text += key + "=" + value + "\n";
  }
  w.u32(static_cast<std::uint32_t>(echo_text.size()));
  w.bytes(echo_text.data(), echo_text.size());

  for (const auto& [name, m] : named_matrices(params)) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(2);
    w.u64(m->rows());
    w.u64(m->cols());
    for (double v : m->data()) w.f64(v);
  }
  for (const auto& [name, v] : named_vectors(params)) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(1);
    w.u64(v->size());
    for (double x : *v) w.f64(x);
  }
  if (!out) {
    throw FormatError("write failure on checkpoint: " + path);
  }
}

struct CheckpointData {
  ModelParams params;
  std::map<std::string, std::string> config;
  std::size_t epoch = 0;
  double final_train_loss = 0.0;
};

inline CheckpointData checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open checkpoint file " + path);
  }
  detail::ByteReader r(in, path);

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    r.fail("bad magic", 0);
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version), 4);
  }
  const std::uint64_t vocab = r.u64();
  const std::uint64_t emb = r.u64();
  const std::uint64_t hidden = r.u64();
  const std::uint64_t attn = r.u64();
  const std::uint64_t head = r.u64();
  if (vocab == 0 || emb == 0 || hidden == 0 || attn == 0 || head == 0) {
    r.fail("zero dimension in header", 8);
  }

  CheckpointData data;
  const std::size_t echo_offset = r.offset();
  const std::uint32_t echo_len = r.u32();
  if (echo_len > (1u << 20)) {
    r.fail("implausible config echo length", echo_offset);
  }
  std::string echo_text(echo_len, '\0');
  r.bytes(echo_text.data(), echo_len);
  std::istringstream echo_in(echo_text);
  std::string line;
  while (std::getline(echo_in, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    data.config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  try {
    if (auto it = data.config.find("epoch"); it != data.config.end()) {
      data.epoch = std::stoull(it->second);
    }
    if (auto it = data.config.find("final_train_loss"); it != data.config.end()) {
      data.final_train_loss = std::stod(it->second);
    }
  } catch (const std::exception&) {
    r.fail("unparseable config echo value", echo_offset);
  }

  // skeleton with the header's shapes; blocks must cover it exactly
  ModelParams& p = data.params;
  p.embeddings.dim = emb;
  p.embeddings.matrix = Matrix(vocab, emb);
  if (auto it = data.config.find("embeddings_trainable"); it != data.config.end()) {
    p.embeddings.trainable = (it->second == "1");
  }
  try {
    if (auto it = data.config.find("coverage"); it != data.config.end()) {
      p.embeddings.coverage = std::stod(it->second);
    }
  } catch (const std::exception&) {
    throw FormatError(path + ": unparseable coverage value in config echo");
  }
  p.encoder = make_lstm_params(hidden, emb);
  p.decoder = make_lstm_params(hidden, emb);
  p.attention = make_attention_params(attn, hidden, hidden);
  p.head1 = make_affine_params(head, 2 * hidden);
  p.head2 = make_affine_params(vocab, head);

  std::map<std::string, Matrix*> matrix_slots;
  for (auto& [name, m] : named_matrices(p)) matrix_slots[name] = m;
  std::map<std::string, Vector*> vector_slots;
  for (auto& [name, v] : named_vectors(p)) vector_slots[name] = v;
  std::map<std::string, bool> seen;

  while (!r.at_eof()) {
    const std::size_t block_start = r.offset();
    const std::uint32_t name_len = r.u32();
    if (name_len == 0 || name_len > 256) {
      r.fail("implausible tensor name length", block_start);
    }
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    const std::uint32_t ndim = r.u32();
    if (seen.count(name)) {
      r.fail("duplicate tensor \"" + name + "\"", block_start);
    }
    if (ndim == 2) {
      auto it = matrix_slots.find(name);
      if (it == matrix_slots.end()) {
        r.fail("unknown tensor \"" + name + "\"", block_start);
      }
      const std::uint64_t rows = r.u64();
      const std::uint64_t cols = r.u64();
      if (rows != it->second->rows() || cols != it->second->cols()) {
        r.fail("tensor \"" + name + "\" has shape " + shape_str(rows, cols) +
                   ", header implies " +
                   shape_str(it->second->rows(), it->second->cols()),
               block_start);
      }
      for (double& v : it->second->data()) v = r.f64();
    } else if (ndim == 1) {
      auto it = vector_slots.find(name);
      if (it == vector_slots.end()) {
        r.fail("unknown tensor \"" + name + "\"", block_start);
      }
      const std::uint64_t len = r.u64();
      if (len != it->second->size()) {
        r.fail("tensor \"" + name + "\" has length " + std::to_string(len) +
                   ", header implies " + std::to_string(it->second->size()),
               block_start);
      }
      for (double& v : *it->second) v = r.f64();
    } else {
      r.fail("tensor \"" + name + "\" has unsupported rank " +
                 std::to_string(ndim),
             block_start);
    }
    seen[name] = true;
  }

  for (const auto& [name, m] : matrix_slots) {
    if (!seen.count(name)) {
      throw FormatError(path + ": missing tensor \"" + name + "\"");
    }
  }
  for (const auto& [name, v] : vector_slots) {
    if (!seen.count(name)) {
      throw FormatError(path + ": missing tensor \"" + name + "\"");
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

struct GradCheckDims {
  std::size_t real_tokens = 3;  // vocab size 7 with the reserved four
  std::size_t emb_dim = 4;
  std::size_t hidden = 3;
  std::size_t attn_dim = 3;
  std::size_t head_dim = 3;
  std::size_t source_len = 3;
  std::size_t target_len = 3;  // includes the final <eos>
};

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double worst() const {
    double w = 0.0;
    for (const auto& g : groups) w = std::max(w, g.max_rel_err);
    return w;
  }
  bool passed(double threshold = 1e-6) const { return worst() < threshold; }
};

namespace detail {

// relative error of a gradient group:
// max_i|a_i - n_i| / max(max_i|a_i| + max_i|n_i|, 1e-8)
struct GroupErrorAccumulator {
  double diff = 0.0, a_max = 0.0, n_max = 0.0;
  void add(double analytic, double numeric) {
    diff = std::max(diff, std::abs(analytic - numeric));
    a_max = std::max(a_max, std::abs(analytic));
    n_max = std::max(n_max, std::abs(numeric));
  }
  double value() const { return diff / std::max(a_max + n_max, 1e-8); }
};

}  // namespace detail

// Builds a random tiny model (trainable embeddings, every tensor random —
// attention tensors on a wider range so its softmax is far from uniform and
// all gradient groups sit well above the finite-difference noise floor) and
// one random (source, target) pair, then compares model_backward against
// central differences (eps=1e-5) on every entry of every trainable group.
// `corrupt` lets tests mutate the analytic gradients before comparison.
inline GradCheckReport gradient_check(
    const GradCheckDims& dims, std::uint64_t seed,
    const std::function<void(ModelGrads&)>& corrupt = nullptr) {
  Corpus corpus;
  DocumentPair pair;
  for (std::size_t i = 0; i < dims.real_tokens; ++i) {
    pair.source_tokens.push_back("w" + std::to_string(i));
    for (std::size_t r = 0; r < dims.real_tokens - i; ++r) {
      pair.summary_tokens.push_back("w" + std::to_string(i));
    }
  }
  corpus.pairs.push_back(pair);
  Vocab vocab = build_vocab(corpus);

  Rng rng(seed);
  const double base_range = 1.5;
  const double attn_range = 3.0;
  EmbeddingTable table = build_embedding_matrix(vocab, {}, dims.emb_dim, rng,
                                                base_range);
  table.trainable = true;
  ModelConfig mc{dims.hidden, dims.attn_dim, dims.head_dim, base_range};
  ModelParams params = init_model(vocab, std::move(table), mc, rng);
  for (auto& [name, v] : named_vectors(params)) fill_uniform(rng, *v, base_range);
  for (double& v : params.attention.w_enc.data()) v = rng.uniform(-attn_range, attn_range);
  for (double& v : params.attention.w_dec.data()) v = rng.uniform(-attn_range, attn_range);
  fill_uniform(rng, params.attention.v, attn_range);
  fill_uniform(rng, params.attention.bias, attn_range);

  const TokenId first_real = 4;
  const TokenId real_count = static_cast<TokenId>(vocab.size()) - first_real;
  std::vector<TokenId> source, target;
  for (std::size_t t = 0; t < dims.source_len; ++t) {
    source.push_back(first_real + static_cast<TokenId>(rng.next_below(real_count)));
  }
  for (std::size_t u = 0; u + 1 < dims.target_len; ++u) {
    target.push_back(first_real + static_cast<TokenId>(rng.next_below(real_count)));
  }
  target.push_back(Vocab::kEos);

  auto loss = [&]() { return sequence_loss(params, source, target).first; };
  auto [base_loss, trace] = sequence_loss(params, source, target);
  (void)base_loss;
  ModelGrads grads = model_backward(params, trace, source, target);
  if (corrupt) corrupt(grads);

  const double eps = 1e-5;
  auto numeric_at = [&](double& slot) {
    const double saved = slot;
    slot = saved + eps;
    const double hi = loss();
    slot = saved - eps;
    const double lo = loss();
    slot = saved;
    return (hi - lo) / (2.0 * eps);
  };

  GradCheckReport report;
  auto pm = named_matrices(params);
  auto gm = named_matrices(grads, true);
  for (std::size_t i = 0; i < pm.size(); ++i) {
    detail::GroupErrorAccumulator acc;
    for (std::size_t j = 0; j < pm[i].second->size(); ++j) {
      acc.add(gm[i].second->data()[j], numeric_at(pm[i].second->data()[j]));
    }
    report.groups.push_back({pm[i].first, acc.value()});
  }
  auto pv = named_vectors(params);
  auto gv = named_vectors(grads);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    detail::GroupErrorAccumulator acc;
    for (std::size_t j = 0; j < pv[i].second->size(); ++j) {
      acc.add((*gv[i].second)[j], numeric_at((*pv[i].second)[j]));
    }
    report.groups.push_back({pv[i].first, acc.value()});
  }
  return report;
}

}  // namespace tgsm
