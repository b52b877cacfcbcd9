#include <gtest/gtest.h>

#include <sstream>

#include "tgsm/text.hpp"

using namespace tgsm;

namespace {

Corpus make_corpus(std::initializer_list<std::pair<std::string, std::string>> docs) {
  Corpus corpus;
  for (const auto& [text, summary] : docs) {
    corpus.pairs.push_back({tokenize(text), tokenize(summary)});
  }
  return corpus;
}

}  // namespace

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, TeluguWhitespaceSplit) {
  auto tokens = tokenize("టిక్ టాక్");
  ASSERT_EQ(tokens.size(), 2u);
  EXPECT_EQ(tokens[0], "టిక్");
  EXPECT_EQ(tokens[1], "టాక్");
}

TEST(Tokenize, TrailingPunctuationSplits) {
  auto tokens = tokenize("వెల్లడించింది.");
  ASSERT_EQ(tokens.size(), 2u);
  EXPECT_EQ(tokens[0], "వెల్లడించింది");
  EXPECT_EQ(tokens[1], ".");
}

TEST(Tokenize, LeadingAndTrailingPunctuation) {
  auto tokens = tokenize("\"abc,\" (def)...");
  std::vector<std::string> expected = {"\"", "abc", ",", "\"",
                                       "(",  "def", ")", ".", ".", "."};
  EXPECT_EQ(tokens, expected);
}

TEST(Tokenize, InteriorPunctuationKept) {
  auto tokens = tokenize("e-mail a.b.c");
  std::vector<std::string> expected = {"e-mail", "a.b.c"};
  EXPECT_EQ(tokens, expected);
}

TEST(Tokenize, NfcComposesCombiningMarks) {
  // Telugu vowel sign AI from its two-part decomposition
  auto tokens = tokenize("కై");
  ASSERT_EQ(tokens.size(), 1u);
  EXPECT_EQ(tokens[0], "కై");
  // Latin e + combining acute composes to U+00E9
  auto latin = tokenize("caf\x65\xCC\x81");
  ASSERT_EQ(latin.size(), 1u);
  EXPECT_EQ(latin[0], "caf\xC3\xA9");
}

TEST(Tokenize, NeverLowercases) {
  auto tokens = tokenize("AbC DEF");
  std::vector<std::string> expected = {"AbC", "DEF"};
  EXPECT_EQ(tokens, expected);
}

TEST(Tokenize, SplitsOnUnicodeWhitespace) {
  // tab, newline, and NBSP all separate tokens
  auto tokens = tokenize("a\tb\nc\xC2\xA0");
  std::vector<std::string> expected = {"a", "b", "c"};
  EXPECT_EQ(tokens, expected);
}

TEST(Tokenize, RejectsInvalidUtf8) {
  EXPECT_THROW(tokenize("abc\xFF\xFEqrs"), EncodingError);
  EXPECT_THROW(tokenize(std::string("\xC3")), EncodingError);  // truncated
}

TEST(Tokenize, Idempotent) {
  const std::vector<std::string> samples = {
      "టిక్ టాక్ యాప్ ను భారతీయులు అధికంగా వినియోగిస్తున్నారు.",
      "\"quoted,\" text... with (parens)",
      "a-b c.d 'e'",
      "   spaced   out   ",
  };
  for (const auto& s : samples) {
    auto once = tokenize(s);
    auto twice = tokenize(join_tokens(once));
    EXPECT_EQ(once, twice) << s;
  }
}

TEST(Vocab, ReservedLayout) {
  Vocab v;
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.token(Vocab::kPad), "<pad>");
  EXPECT_EQ(v.token(Vocab::kSos), "<sos>");
  EXPECT_EQ(v.token(Vocab::kEos), "<eos>");
  EXPECT_EQ(v.token(Vocab::kUnk), "<unk>");
  EXPECT_EQ(v.lookup("anything"), Vocab::kUnk);
}

TEST(BuildVocab, FrequencyThenLexicographicOrdering) {
  Corpus corpus = make_corpus({{"a b a", "a"}});
  Vocab v = build_vocab(corpus, 1);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.lookup("a"), 4);
  EXPECT_EQ(v.lookup("b"), 5);
}

TEST(BuildVocab, MinFreqPrunes) {
  Corpus corpus = make_corpus({{"a b a", "a"}});
  Vocab v = build_vocab(corpus, 2);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.lookup("a"), 4);
  EXPECT_EQ(v.lookup("b"), Vocab::kUnk);
}

TEST(BuildVocab, Deterministic) {
  Corpus corpus = make_corpus(
      {{"పచ్చి మిరప పచ్చి", "మిరప"}, {"క గ చ", "క గ"}, {"క క క", "గ"}});
  Vocab v1 = build_vocab(corpus);
  Vocab v2 = build_vocab(corpus);
  EXPECT_EQ(v1.tokens(), v2.tokens());
  // ties broken by code point order
  EXPECT_EQ(v1.lookup("క"), 4);   // freq 6
  EXPECT_EQ(v1.lookup("గ"), 5);   // freq 3
  EXPECT_EQ(v1.lookup("పచ్చి"), 6);  // freq 2, before మిరప by code point
  EXPECT_EQ(v1.lookup("మిరప"), 7);
  EXPECT_EQ(v1.lookup("చ"), 8);   // freq 1
}

TEST(BuildVocab, EmptyCorpusRejected) {
  Corpus corpus;
  EXPECT_THROW(build_vocab(corpus), std::invalid_argument);
}

TEST(BuildVocab, ReservedLiteralsIgnoredInCounting) {
  Corpus corpus = make_corpus({{"<unk> a <pad>", "a"}});
  Vocab v = build_vocab(corpus);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.lookup("a"), 4);
}

TEST(VocabBijection, TokenIdRoundTrip) {
  Corpus corpus = make_corpus({{"w x y z w x", "y z"}});
  Vocab v = build_vocab(corpus);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const TokenId id = static_cast<TokenId>(i);
    EXPECT_EQ(v.lookup(v.token(id)), id);
  }
}

TEST(EncodeIds, AppendsEosAndMapsUnknowns) {
  Corpus corpus = make_corpus({{"a b a", "a"}});
  Vocab v = build_vocab(corpus);
  EXPECT_EQ(encode_ids({"a"}, v, true), (std::vector<TokenId>{4, 2}));
  EXPECT_EQ(encode_ids({"zzz-unseen"}, v), (std::vector<TokenId>{3}));
  EXPECT_EQ(encode_ids({}, v, true), (std::vector<TokenId>{2}));
}

TEST(DecodeIds, DropsControlTokens) {
  Corpus corpus = make_corpus({{"a b a", "a"}});
  Vocab v = build_vocab(corpus);
  EXPECT_EQ(decode_ids({1, 4, 5, 2}, v), "a b");
  EXPECT_EQ(decode_ids({2}, v), "");
  EXPECT_THROW(decode_ids({99}, v), std::out_of_range);
}

TEST(EncodeDecode, RoundTripIsIdentityOnVocabTokens) {
  Corpus corpus = make_corpus({{"క గ చ ఙ ఛ జ", "క గ"}});
  Vocab v = build_vocab(corpus);
  Rng rng(404);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<std::string> tokens;
    const std::size_t n = rng.next_below(12);
    for (std::size_t i = 0; i < n; ++i) {
      tokens.push_back(v.token(static_cast<TokenId>(4 + rng.next_below(v.size() - 4))));
    }
    auto ids = encode_ids(tokens, v);
    EXPECT_EQ(decode_ids(ids, v), join_tokens(tokens));
  }
}

TEST(EncodeDecode, RoundTripThroughTokenizer) {
  const std::string text = "క గ చ క గ";
  Corpus corpus = make_corpus({{text, "క"}});
  Vocab v = build_vocab(corpus);
  auto ids = encode_ids(tokenize(text), v);
  EXPECT_EQ(decode_ids(ids, v), text);
}

TEST(LoadCorpus, ParsesJsonLines) {
  std::istringstream in(
      R"({"text": "టిక్ టాక్ యాప్", "summary": "టిక్ టాక్"})"
      "\n\n"
      R"({"text": "రెండో వార్త", "summary": "వార్త"})"
      "\n");
  Corpus corpus = load_corpus(in, "test");
  ASSERT_EQ(corpus.size(), 2u);
  EXPECT_EQ(corpus.pairs[0].source_tokens.size(), 3u);
  EXPECT_EQ(corpus.pairs[1].summary_tokens.size(), 1u);
}

TEST(LoadCorpus, MissingFieldNamesLine) {
  std::istringstream in(
      R"({"text": "a", "summary": "b"})"
      "\n"
      R"({"text": "only text"})"
      "\n");
  try {
    load_corpus(in, "corpus.jsonl");
    FAIL() << "expected schema error";
  } catch (const FormatError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("summary"), std::string::npos) << msg;
  }
}

TEST(LoadCorpus, MalformedJsonNamesLine) {
  std::istringstream in("{\"text\": \"a\", \"summary\": \"b\"}\n{not json\n");
  try {
    load_corpus(in, "corpus.jsonl");
    FAIL() << "expected parse error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadCorpus, EmptyFileGivesEmptyCorpus) {
  std::istringstream in("");
  EXPECT_TRUE(load_corpus(in, "empty").empty());
}

TEST(LoadCorpus, EmptyTextRejected) {
  std::istringstream in(R"({"text": "", "summary": "b"})" "\n");
  EXPECT_THROW(load_corpus(in, "x"), FormatError);
}

TEST(SplitCorpus, TwoThousandDocSplit) {
  Corpus corpus;
  for (int i = 0; i < 2000; ++i) {
    corpus.pairs.push_back({{"doc", std::to_string(i)}, {"s"}});
  }
  auto [train, test] = split_corpus(corpus, 1700, 7);
  EXPECT_EQ(train.size(), 1700u);
  EXPECT_EQ(test.size(), 300u);
}

TEST(SplitCorpus, SameSeedSameSplit) {
  Corpus corpus;
  for (int i = 0; i < 50; ++i) {
    corpus.pairs.push_back({{std::to_string(i)}, {"s"}});
  }
  auto [a_train, a_test] = split_corpus(corpus, 30, 99);
  auto [b_train, b_test] = split_corpus(corpus, 30, 99);
  for (std::size_t i = 0; i < a_train.size(); ++i) {
    EXPECT_EQ(a_train.pairs[i].source_tokens, b_train.pairs[i].source_tokens);
  }
  for (std::size_t i = 0; i < a_test.size(); ++i) {
    EXPECT_EQ(a_test.pairs[i].source_tokens, b_test.pairs[i].source_tokens);
  }
}

TEST(SplitCorpus, PartitionPropertyFuzz) {
  Rng rng(555);
  for (int iter = 0; iter < 100; ++iter) {
    const std::size_t n = 2 + rng.next_below(60);
    Corpus corpus;
    for (std::size_t i = 0; i < n; ++i) {
      corpus.pairs.push_back({{std::to_string(i)}, {"s"}});
    }
    const std::size_t train_count = 1 + rng.next_below(n - 1);
    auto [train, test] = split_corpus(corpus, train_count, rng.next_u64());
    EXPECT_EQ(train.size(), train_count);
    EXPECT_EQ(train.size() + test.size(), n);
    std::vector<bool> seen(n, false);
    auto mark = [&](const Corpus& c) {
      for (const auto& p : c.pairs) {
        const std::size_t idx = std::stoul(p.source_tokens[0]);
        EXPECT_FALSE(seen[idx]);  // disjoint
        seen[idx] = true;
      }
    };
    mark(train);
    mark(test);
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  }
}

TEST(SplitCorpus, RejectsOutOfRangeTrainCount) {
  Corpus corpus = make_corpus({{"a", "b"}, {"c", "d"}});
  EXPECT_THROW(split_corpus(corpus, 0, 1), std::invalid_argument);
  EXPECT_THROW(split_corpus(corpus, 2, 1), std::invalid_argument);
}

TEST(VocabFile, RoundTrip) {
  Corpus corpus = make_corpus({{"గ క గ", "క"}});
  Vocab v = build_vocab(corpus);
  std::stringstream buf;
  save_vocab(v, buf);
  EXPECT_EQ(buf.str(), "<pad>\n<sos>\n<eos>\n<unk>\nక\nగ\n");
  Vocab loaded = load_vocab(buf, "buf");
  EXPECT_EQ(loaded.tokens(), v.tokens());
}

TEST(VocabFile, RejectsBadReservedHeader) {
  std::istringstream in("<pad>\n<sos>\n<eos>\nwrong\nక\n");
  EXPECT_THROW(load_vocab(in, "v"), FormatError);
  std::istringstream short_file("<pad>\n");
  EXPECT_THROW(load_vocab(short_file, "v"), FormatError);
}

TEST(VocabFile, RejectsDuplicates) {
  std::istringstream in("<pad>\n<sos>\n<eos>\n<unk>\nక\nక\n");
  try {
    load_vocab(in, "v");
    FAIL() << "expected duplicate error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos);
  }
}
