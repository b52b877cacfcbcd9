#pragma once

// Command-line front end: vocabulary building, training, summarization,
// evaluation, and gradient checking. Exit codes: 0 success, 1 usage error,
// 2 data/format error, 3 failed gradient check.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tgsm/decoding.hpp"
#include "tgsm/trainer.hpp"

namespace tgsm::cli {

namespace detail {

inline Vocab load_vocab_checked(const std::string& path,
                                const ModelParams& params) {
  Vocab vocab = load_vocab(path);
  if (vocab.size() != params.vocab_size()) {
    throw FormatError("vocab file " + path + " has " +
                      std::to_string(vocab.size()) +
                      " tokens but the checkpoint expects " +
                      std::to_string(params.vocab_size()));
  }
  return vocab;
}

inline std::string read_all(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace detail

inline int run(int argc, const char* const* argv,
               std::ostream& out = std::cout, std::ostream& err = std::cerr,
               std::istream& in = std::cin) {
  CLI::App app{"tgsm - encoder-decoder headline summarizer"};
  app.require_subcommand(1);

  // build-vocab
  auto* build_cmd = app.add_subcommand("build-vocab", "build a vocabulary file from a corpus");
  std::string bv_corpus, bv_out;
  std::size_t bv_min_freq = 1;
  build_cmd->add_option("--corpus", bv_corpus, "JSON-Lines corpus file")->required();
  build_cmd->add_option("--out", bv_out, "vocabulary file to write")->required();
  build_cmd->add_option("--min-freq", bv_min_freq, "minimum token frequency");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  std::string tr_corpus, tr_vocab, tr_out, tr_vec;
  TrainConfig config;
  train_cmd->add_option("--corpus", tr_corpus, "JSON-Lines corpus file")->required();
  train_cmd->add_option("--vocab", tr_vocab, "vocabulary file")->required();
  train_cmd->add_option("--out", tr_out, "checkpoint file to write")->required();
  train_cmd->add_option("--embeddings", tr_vec, "pretrained .vec embeddings file");
  train_cmd->add_option("--epochs", config.epochs, "training epochs");
  train_cmd->add_option("--hidden", config.hidden, "hidden units");
  train_cmd->add_option("--emb-dim", config.emb_dim, "embedding dimension");
  train_cmd->add_option("--lr", config.learning_rate, "learning rate");
  train_cmd->add_option("--batch", config.batch_size, "batch size");
  train_cmd->add_option("--seed", config.seed, "random seed");
  train_cmd->add_option("--train-count", config.train_count,
                        "training docs (rest held out)");
  train_cmd->add_option("--clip", config.clip_norm, "gradient clip norm");
  train_cmd->add_option("--workers", config.workers, "data-parallel workers");
  train_cmd->add_flag("--trainable-embeddings", config.embeddings_trainable,
                      "update embeddings during training");

  // summarize
  auto* sum_cmd = app.add_subcommand("summarize", "greedy-decode a summary for a document");
  std::string sm_model, sm_vocab, sm_input;
  std::size_t sm_max_len = 20;
  sum_cmd->add_option("--model", sm_model, "checkpoint file")->required();
  sum_cmd->add_option("--vocab", sm_vocab, "vocabulary file")->required();
  sum_cmd->add_option("--input", sm_input, "input text file (default: stdin)");
  sum_cmd->add_option("--max-len", sm_max_len, "decode step limit");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a test corpus");
  std::string ev_model, ev_vocab, ev_corpus;
  std::size_t ev_max_len = 20;
  eval_cmd->add_option("--model", ev_model, "checkpoint file")->required();
  eval_cmd->add_option("--vocab", ev_vocab, "vocabulary file")->required();
  eval_cmd->add_option("--corpus", ev_corpus, "JSON-Lines test corpus")->required();
  eval_cmd->add_option("--max-len", ev_max_len, "decode step limit");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the backward pass");
  std::uint64_t gc_seed = 1;
  grad_cmd->add_option("--seed", gc_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (app.got_subcommand(build_cmd)) {
      const Corpus corpus = load_corpus(bv_corpus);
      const Vocab vocab = build_vocab(corpus, bv_min_freq);
      save_vocab(vocab, bv_out);
      nlohmann::json j = {{"vocab_size", vocab.size()}, {"out", bv_out}};
      out << j.dump() << "\n";
      return 0;
    }

    if (app.got_subcommand(train_cmd)) {
      const Corpus corpus = load_corpus(tr_corpus);
      const Vocab vocab = load_vocab(tr_vocab);
      const std::string* vec = tr_vec.empty() ? nullptr : &tr_vec;
      TrainResult result =
          train(corpus, config, &vocab, vec, [&](const EpochReport& report) {
            nlohmann::json j = {{"epoch", report.epoch},
                                {"loss_per_token", report.loss_per_token},
                                {"seconds", report.seconds},
                                {"examples", report.examples}};
            out << j.dump() << "\n" << std::flush;
          });
      const double final_loss =
          result.reports.empty() ? 0.0 : result.reports.back().loss_per_token;
      checkpoint_save(result.params, config, tr_out, config.epochs, final_loss);
      return 0;
    }

    if (app.got_subcommand(sum_cmd)) {
      CheckpointData ckpt = checkpoint_load(sm_model);
      const Vocab vocab = detail::load_vocab_checked(sm_vocab, ckpt.params);
      std::string text;
      if (sm_input.empty()) {
        text = detail::read_all(in);
      } else {
        std::ifstream file(sm_input, std::ios::binary);
        if (!file) {
          throw FormatError("cannot open input file " + sm_input);
        }
        text = detail::read_all(file);
      }
      const std::vector<std::string> tokens = tokenize(text);
      if (tokens.empty()) {
        throw FormatError("input text has no tokens");
      }
      const std::vector<TokenId> source = encode_ids(tokens, vocab, false);
      const DecodeResult decoded = greedy_decode(ckpt.params, source, sm_max_len);
      out << decode_ids(decoded.ids, vocab) << "\n";
      return 0;
    }

    if (app.got_subcommand(eval_cmd)) {
      CheckpointData ckpt = checkpoint_load(ev_model);
      const Vocab vocab = detail::load_vocab_checked(ev_vocab, ckpt.params);
      const Corpus corpus = load_corpus(ev_corpus);
      const EvalReport report = evaluate(ckpt.params, corpus, vocab, ev_max_len);
      nlohmann::json j = {{"nll_per_token", report.nll_per_token},
                          {"perplexity", report.perplexity},
                          {"exact_match", report.exact_match},
                          {"unigram_f1", report.mean_unigram_f1},
                          {"examples", report.examples}};
      out << j.dump() << "\n";
      return 0;
    }

    if (app.got_subcommand(grad_cmd)) {
      const GradCheckReport report = gradient_check(GradCheckDims{}, gc_seed);
      for (const auto& group : report.groups) {
        std::ostringstream line;
        line.precision(3);
        line << std::scientific << group.max_rel_err;
        out << group.name << " " << line.str()
            << (group.max_rel_err < 1e-6 ? " ok" : " FAIL") << "\n";
      }
      const bool passed = report.passed(1e-6);
      out << (passed ? "gradcheck PASS" : "gradcheck FAIL") << " worst="
          << report.worst() << "\n";
      return passed ? 0 : 3;
    }
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

inline int run(int argc, char** argv) {
  return run(argc, const_cast<const char* const*>(argv));
}

}  // namespace tgsm::cli
