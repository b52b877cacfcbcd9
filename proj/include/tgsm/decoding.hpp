#pragma once

// Greedy inference and test-set evaluation for a trained model.

#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "tgsm/model.hpp"
#include "tgsm/text.hpp"

namespace tgsm {

enum class StopReason { Eos, MaxLen };

struct DecodeResult {
  std::vector<TokenId> ids;        // emitted tokens, <eos> excluded
  std::vector<double> probs;       // chosen probability at each step taken
  StopReason stop = StopReason::MaxLen;
  std::vector<Vector> attention;   // per-step weights over source positions
};

// Argmax decoding from the encoder's final state, feeding each selection
// back in. Ties pick the lowest id. Stops on <eos> or after max_len steps.
// No token is masked: <pad>/<sos>/<unk> can be emitted if they win.
inline DecodeResult greedy_decode(const ModelParams& params,
                                  const std::vector<TokenId>& source,
                                  std::size_t max_len) {
  const EncodeResult enc = encode_sequence(params, source);
  DecodeResult result;
  LstmState state = enc.final_state;
  TokenId prev = Vocab::kSos;
  for (std::size_t step = 0; step < max_len; ++step) {
    DecodeStepCache cache = decode_step(params, enc.outputs, state, prev);
    std::size_t best = 0;
    for (std::size_t id = 1; id < cache.dist.size(); ++id) {
      if (cache.dist[id] > cache.dist[best]) best = id;
    }
    result.probs.push_back(cache.dist[best]);
    result.attention.push_back(cache.attn.weights);
    if (static_cast<TokenId>(best) == Vocab::kEos) {
      result.stop = StopReason::Eos;
      return result;
    }
    result.ids.push_back(static_cast<TokenId>(best));
    prev = static_cast<TokenId>(best);
    state = cache.state;
  }
  result.stop = StopReason::MaxLen;
  return result;
}

// F1 over token multisets; both empty counts as 1, one empty as 0.
inline double unigram_f1(const std::vector<TokenId>& a,
                         const std::vector<TokenId>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::map<TokenId, std::size_t> counts;
  for (TokenId id : a) ++counts[id];
  std::size_t overlap = 0;
  for (TokenId id : b) {
    auto it = counts.find(id);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(a.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(b.size());
  return 2.0 * precision * recall / (precision + recall);
}

struct EvalReport {
  double nll_per_token = 0.0;  // teacher-forced, gold summaries
  double perplexity = 1.0;     // exp(nll_per_token)
  double exact_match = 0.0;    // greedy output == gold summary ids
  double mean_unigram_f1 = 0.0;
  std::size_t examples = 0;
};

// Teacher-forced NLL plus greedy-decode exact-match and unigram F1 against
// the gold headlines.
inline EvalReport evaluate(const ModelParams& params, const Corpus& test,
                           const Vocab& vocab, std::size_t max_len) {
  if (test.empty()) {
    throw std::invalid_argument("evaluate: empty test corpus");
  }
  EvalReport report;
  report.examples = test.size();
  double total_loss = 0.0;
  std::size_t total_tokens = 0;
  double f1_sum = 0.0;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < test.pairs.size(); ++i) {
    const DocumentPair& pair = test.pairs[i];
    try {
      const std::vector<TokenId> source = encode_ids(pair.source_tokens, vocab, false);
      const std::vector<TokenId> gold = encode_ids(pair.summary_tokens, vocab, false);
      std::vector<TokenId> target = gold;
      target.push_back(Vocab::kEos);

      total_loss += sequence_loss(params, source, target).first;
      total_tokens += target.size();

      const DecodeResult decoded = greedy_decode(params, source, max_len);
      if (decoded.ids == gold) ++exact;
      f1_sum += unigram_f1(decoded.ids, gold);
    } catch (const std::exception& e) {
      throw std::runtime_error("example " + std::to_string(i) + ": " + e.what());
    }
  }
  report.nll_per_token = total_loss / static_cast<double>(total_tokens);
  report.perplexity = std::exp(report.nll_per_token);
  report.exact_match = static_cast<double>(exact) / static_cast<double>(test.size());
  report.mean_unigram_f1 = f1_sum / static_cast<double>(test.size());
  return report;
}

}  // namespace tgsm
