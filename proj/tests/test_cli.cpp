#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "tgsm/cli.hpp"

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::vector<const char*> argv = {"tgsm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  std::istringstream in(stdin_text);
  const int code = tgsm::cli::run(static_cast<int>(argv.size()), argv.data(),
                                  out, err, in);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  return testing::TempDir() + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string tiny_corpus_path() {
  static const std::string path = [] {
    const std::string p = temp_path("cli_corpus.jsonl");
    write_file(p,
               R"({"text": "a b c d", "summary": "a b"})" "\n"
               R"({"text": "b c d a", "summary": "b c"})" "\n"
               R"({"text": "c d a b", "summary": "c d"})" "\n"
               R"({"text": "d a b c", "summary": "d a"})" "\n");
    return p;
  }();
  return path;
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  CliResult top = run_cli({"--help"});
  EXPECT_EQ(top.code, 0);
  EXPECT_NE(top.out.find("build-vocab"), std::string::npos);
  for (const char* sub : {"build-vocab", "train", "summarize", "eval", "gradcheck"}) {
    CliResult r = run_cli({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_FALSE(r.out.empty()) << sub;
  }
}

TEST(Cli, MissingRequiredFlagIsUsageError) {
  CliResult r = run_cli({"train", "--vocab", "v", "--out", "x"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--corpus"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) {
  CliResult r = run_cli({"gradcheck", "--bogus-flag", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, NoSubcommandIsUsageError) {
  CliResult r = run_cli({});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, MissingCorpusFileIsDataError) {
  CliResult r = run_cli({"build-vocab", "--corpus", temp_path("nope.jsonl"),
                         "--out", temp_path("v.txt")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Cli, BuildVocabWritesFile) {
  const std::string vocab_path = temp_path("cli_vocab.txt");
  CliResult r = run_cli({"build-vocab", "--corpus", tiny_corpus_path(),
                         "--out", vocab_path});
  EXPECT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["vocab_size"], 8);  // 4 reserved + a b c d

  std::ifstream in(vocab_path);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "<pad>");
}

TEST(Cli, TrainSummarizeEvalPipeline) {
  const std::string vocab_path = temp_path("cli_vocab2.txt");
  const std::string ckpt_path = temp_path("cli_model.tgsm");
  ASSERT_EQ(run_cli({"build-vocab", "--corpus", tiny_corpus_path(), "--out",
                     vocab_path}).code, 0);

  CliResult train = run_cli({"train", "--corpus", tiny_corpus_path(),
                             "--vocab", vocab_path, "--out", ckpt_path,
                             "--epochs", "2", "--hidden", "6", "--emb-dim", "5",
                             "--batch", "2", "--seed", "3", "--train-count", "3",
                             "--trainable-embeddings"});
  ASSERT_EQ(train.code, 0) << train.err;
  // one JSON object per epoch on stdout
  std::istringstream lines(train.out);
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("loss_per_token"));
    EXPECT_EQ(j["epoch"], epochs);
    ++epochs;
  }
  EXPECT_EQ(epochs, 2u);

  CliResult sum = run_cli({"summarize", "--model", ckpt_path, "--vocab",
                           vocab_path, "--max-len", "5"},
                          "a b c d\n");
  ASSERT_EQ(sum.code, 0) << sum.err;
  EXPECT_FALSE(sum.out.empty());
  EXPECT_EQ(sum.out.back(), '\n');

  const std::string input_path = temp_path("cli_input.txt");
  write_file(input_path, "b c d a");
  CliResult sum2 = run_cli({"summarize", "--model", ckpt_path, "--vocab",
                            vocab_path, "--input", input_path});
  EXPECT_EQ(sum2.code, 0) << sum2.err;

  CliResult eval = run_cli({"eval", "--model", ckpt_path, "--vocab", vocab_path,
                            "--corpus", tiny_corpus_path()});
  ASSERT_EQ(eval.code, 0) << eval.err;
  auto j = nlohmann::json::parse(eval.out);
  EXPECT_TRUE(j.contains("perplexity"));
  EXPECT_TRUE(j.contains("exact_match"));
  EXPECT_EQ(j["examples"], 4);

  std::remove(ckpt_path.c_str());
}

TEST(Cli, CorruptedCheckpointIsDataError) {
  const std::string vocab_path = temp_path("cli_vocab3.txt");
  ASSERT_EQ(run_cli({"build-vocab", "--corpus", tiny_corpus_path(), "--out",
                     vocab_path}).code, 0);
  const std::string bad_ckpt = temp_path("bad.tgsm");
  write_file(bad_ckpt, "XXXX not a checkpoint");
  CliResult r = run_cli({"summarize", "--model", bad_ckpt, "--vocab",
                         vocab_path},
                        "a b\n");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("magic"), std::string::npos);
}

TEST(Cli, BadVecHeaderIsDataError) {
  const std::string vocab_path = temp_path("cli_vocab4.txt");
  const std::string vec_path = temp_path("bad.vec");
  ASSERT_EQ(run_cli({"build-vocab", "--corpus", tiny_corpus_path(), "--out",
                     vocab_path}).code, 0);
  write_file(vec_path, "not a header\na 0.5\n");
  CliResult r = run_cli({"train", "--corpus", tiny_corpus_path(), "--vocab",
                         vocab_path, "--out", temp_path("x.tgsm"),
                         "--embeddings", vec_path, "--epochs", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("header"), std::string::npos);
}

TEST(Cli, GradcheckPassesAndReportsGroups) {
  CliResult r = run_cli({"gradcheck", "--seed", "7"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("gradcheck PASS"), std::string::npos);
  EXPECT_NE(r.out.find("encoder.w_forget"), std::string::npos);
  EXPECT_NE(r.out.find("embedding.weight"), std::string::npos);
}

TEST(Cli, TrainWithWorkersRuns) {
  const std::string vocab_path = temp_path("cli_vocab_w.txt");
  const std::string ckpt_path = temp_path("cli_model_w.tgsm");
  ASSERT_EQ(run_cli({"build-vocab", "--corpus", tiny_corpus_path(), "--out",
                     vocab_path}).code, 0);
  CliResult r = run_cli({"train", "--corpus", tiny_corpus_path(), "--vocab",
                         vocab_path, "--out", ckpt_path, "--epochs", "1",
                         "--hidden", "4", "--emb-dim", "4", "--batch", "4",
                         "--workers", "2"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(r.out.empty());
  std::remove(ckpt_path.c_str());
}

TEST(Cli, MismatchedVocabIsDataError) {
  // vocab with extra tokens does not match the trained checkpoint
  const std::string vocab_path = temp_path("cli_vocab5.txt");
  const std::string big_vocab = temp_path("cli_vocab5_big.txt");
  const std::string ckpt_path = temp_path("cli_model5.tgsm");
  ASSERT_EQ(run_cli({"build-vocab", "--corpus", tiny_corpus_path(), "--out",
                     vocab_path}).code, 0);
  ASSERT_EQ(run_cli({"train", "--corpus", tiny_corpus_path(), "--vocab",
                     vocab_path, "--out", ckpt_path, "--epochs", "0",
                     "--hidden", "4", "--emb-dim", "4"}).code, 0);
  write_file(big_vocab, "<pad>\n<sos>\n<eos>\n<unk>\na\nb\nc\nd\nextra\n");
  CliResult r = run_cli({"summarize", "--model", ckpt_path, "--vocab",
                         big_vocab},
                        "a b\n");
  EXPECT_EQ(r.code, 2);
  std::remove(ckpt_path.c_str());
}
