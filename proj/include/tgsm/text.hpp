#pragma once

// Tokenization, vocabulary, and corpus handling. Unicode character data
// (NFC composition, White_Space, category P) comes from ICU; everything
// built on top of it is deterministic by construction.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <unicode/uchar.h>
#include <unicode/unorm2.h>
#include <unicode/ustring.h>
#include <unicode/utf16.h>
#include <unicode/utf8.h>

#include "json.hpp"
#include "tgsm/error.hpp"
#include "tgsm/linalg.hpp"

namespace tgsm {

using TokenId = std::int32_t;

namespace detail {

inline std::u16string utf8_to_utf16(const std::string& s) {
  if (s.empty()) return {};
  UErrorCode status = U_ZERO_ERROR;
  int32_t len16 = 0;
  u_strFromUTF8(nullptr, 0, &len16, s.data(), static_cast<int32_t>(s.size()),
                &status);
  if (status != U_BUFFER_OVERFLOW_ERROR && U_FAILURE(status)) {
    throw EncodingError("invalid UTF-8 input");
  }
  status = U_ZERO_ERROR;
  std::u16string out(static_cast<std::size_t>(len16), u'\0');
  u_strFromUTF8(out.data(), len16, nullptr, s.data(),
                static_cast<int32_t>(s.size()), &status);
  if (U_FAILURE(status)) {
    throw EncodingError("invalid UTF-8 input");
  }
  return out;
}

inline std::u16string nfc_normalize(const std::u16string& s) {
  if (s.empty()) return {};
  UErrorCode status = U_ZERO_ERROR;
  const UNormalizer2* nfc = unorm2_getNFCInstance(&status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU NFC normalizer unavailable");
  }
  const int32_t needed =
      unorm2_normalize(nfc, s.data(), static_cast<int32_t>(s.size()), nullptr,
                       0, &status);
  if (status != U_BUFFER_OVERFLOW_ERROR && U_FAILURE(status)) {
    throw EncodingError("NFC normalization failed");
  }
  status = U_ZERO_ERROR;
  std::u16string out(static_cast<std::size_t>(needed), u'\0');
  unorm2_normalize(nfc, s.data(), static_cast<int32_t>(s.size()), out.data(),
                   needed, &status);
  if (U_FAILURE(status)) {
    throw EncodingError("NFC normalization failed");
  }
  return out;
}

inline bool is_punct(UChar32 c) {
  switch (u_charType(c)) {
    case U_DASH_PUNCTUATION:
    case U_START_PUNCTUATION:
    case U_END_PUNCTUATION:
    case U_CONNECTOR_PUNCTUATION:
    case U_OTHER_PUNCTUATION:
    case U_INITIAL_PUNCTUATION:
    case U_FINAL_PUNCTUATION:
      return true;
    default:
      return false;
  }
}

inline void append_utf8(UChar32 c, std::string& out) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool err = false;
  U8_APPEND(buf, len, U8_MAX_LENGTH, c, err);
  if (err) {
    throw EncodingError("cannot encode code point");
  }
  out.append(buf, static_cast<std::size_t>(len));
}

inline std::string codepoints_to_utf8(const UChar32* cps, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) append_utf8(cps[i], out);
  return out;
}

}  // namespace detail

// NFC-normalizes, splits on Unicode whitespace, then peels leading and
// trailing punctuation (category P) off each word into single-character
// tokens. Case is never touched. Throws EncodingError on invalid UTF-8.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  if (text.empty()) return tokens;
  const std::u16string nfc = detail::nfc_normalize(detail::utf8_to_utf16(text));

  std::vector<UChar32> run;
  auto flush_run = [&]() {
    if (run.empty()) return;
    std::size_t lead = 0;
    std::size_t trail = run.size();
    while (lead < trail && detail::is_punct(run[lead])) ++lead;
    while (trail > lead && detail::is_punct(run[trail - 1])) --trail;
    for (std::size_t i = 0; i < lead; ++i) {
      tokens.push_back(detail::codepoints_to_utf8(&run[i], 1));
    }
    if (lead < trail) {
      tokens.push_back(detail::codepoints_to_utf8(&run[lead], trail - lead));
    }
    for (std::size_t i = trail; i < run.size(); ++i) {
      tokens.push_back(detail::codepoints_to_utf8(&run[i], 1));
    }
    run.clear();
  };

  const int32_t len = static_cast<int32_t>(nfc.size());
  for (int32_t i = 0; i < len;) {
    UChar32 c;
    U16_NEXT(nfc.data(), i, len, c);
    if (u_isUWhiteSpace(c)) {
      flush_run();
    } else {
      run.push_back(c);
    }
  }
  flush_run();
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// vocabulary
// ---------------------------------------------------------------------------

class Vocab {
public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kSos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;

  static const std::array<std::string, 4>& reserved_tokens() {
    static const std::array<std::string, 4> names = {"<pad>", "<sos>", "<eos>",
                                                     "<unk>"};
    return names;
  }

  Vocab() {
    for (const auto& name : reserved_tokens()) add_token(name);
  }

  // Appends a token at the next free id. Rejects duplicates.
  TokenId add_token(const std::string& token) {
    auto [it, inserted] =
        token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
    if (!inserted) {
      throw std::invalid_argument("Vocab: duplicate token \"" + token + "\"");
    }
    id_to_token_.push_back(token);
    return it->second;
  }

  // id for a token; unknown tokens map to <unk>
  TokenId lookup(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const {
    return token_to_id_.count(token) > 0;
  }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
      throw std::out_of_range("Vocab: id " + std::to_string(id) +
                              " out of range [0," +
                              std::to_string(id_to_token_.size()) + ")");
    }
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return id_to_token_.size(); }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// ---------------------------------------------------------------------------
// corpus
// ---------------------------------------------------------------------------

struct DocumentPair {
  std::vector<std::string> source_tokens;
  std::vector<std::string> summary_tokens;
};

struct Corpus {
  std::vector<DocumentPair> pairs;
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

// Frequency >= min_freq over source+summary tokens; ids ordered by
// descending frequency, ties broken by byte order (== code point order
// for UTF-8). Tokens spelled like a reserved literal are ignored.
inline Vocab build_vocab(const Corpus& corpus, std::size_t min_freq = 1) {
  if (corpus.empty()) {
    throw std::invalid_argument("build_vocab: empty corpus");
  }
  if (min_freq < 1) {
    throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  }
  std::unordered_map<std::string, std::size_t> freq;
  auto count = [&](const std::vector<std::string>& tokens) {
    const auto& reserved = Vocab::reserved_tokens();
    for (const auto& t : tokens) {
      if (std::find(reserved.begin(), reserved.end(), t) != reserved.end()) {
        continue;
      }
      ++freq[t];
    }
  };
  for (const auto& pair : corpus.pairs) {
    count(pair.source_tokens);
    count(pair.summary_tokens);
  }
  std::vector<std::pair<std::string, std::size_t>> admitted;
  admitted.reserve(freq.size());
  for (auto& [token, n] : freq) {
    if (n >= min_freq) admitted.emplace_back(token, n);
  }
  std::sort(admitted.begin(), admitted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab vocab;
  for (const auto& [token, n] : admitted) vocab.add_token(token);
  return vocab;
}

inline std::vector<TokenId> encode_ids(const std::vector<std::string>& tokens,
                                       const Vocab& vocab,
                                       bool append_eos = false) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size() + (append_eos ? 1 : 0));
  for (const auto& t : tokens) ids.push_back(vocab.lookup(t));
  if (append_eos) ids.push_back(Vocab::kEos);
  return ids;
}

// Drops <pad>/<sos>/<eos>; <unk> renders literally.
inline std::string decode_ids(const std::vector<TokenId>& ids,
                              const Vocab& vocab) {
  std::vector<std::string> tokens;
  for (TokenId id : ids) {
    if (id == Vocab::kPad || id == Vocab::kSos || id == Vocab::kEos) continue;
    tokens.push_back(vocab.token(id));  // throws on out-of-range ids
  }
  return join_tokens(tokens);
}

namespace detail {

inline bool blank_line(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r';
  });
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

// JSON-Lines, one {"text": ..., "summary": ...} object per line.
inline Corpus load_corpus(std::istream& in, const std::string& name) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::blank_line(line)) continue;
    const std::string where = name + " line " + std::to_string(line_no);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": malformed JSON: " + e.what());
    }
    if (!doc.is_object()) {
      throw FormatError(where + ": expected a JSON object");
    }
    DocumentPair pair;
    for (const char* field : {"text", "summary"}) {
      if (!doc.contains(field) || !doc[field].is_string()) {
        throw FormatError(where + ": missing string field \"" + field + "\"");
      }
    }
    pair.source_tokens = tokenize(doc["text"].get<std::string>());
    pair.summary_tokens = tokenize(doc["summary"].get<std::string>());
    if (pair.source_tokens.empty()) {
      throw FormatError(where + ": \"text\" has no tokens");
    }
    if (pair.summary_tokens.empty()) {
      throw FormatError(where + ": \"summary\" has no tokens");
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open corpus file " + path);
  }
  return load_corpus(in, path);
}

// Seeded shuffle, first train_count pairs to train, rest to test.
inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus,
                                              std::size_t train_count,
                                              std::uint64_t seed) {
  if (train_count == 0 || train_count >= corpus.size()) {
    throw std::invalid_argument(
        "split_corpus: train_count " + std::to_string(train_count) +
        " out of range (0, " + std::to_string(corpus.size()) + ")");
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  Corpus train, test;
  train.pairs.reserve(train_count);
  test.pairs.reserve(corpus.size() - train_count);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < train_count ? train : test).pairs.push_back(corpus.pairs[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// vocab file: one token per line, line number == id
// ---------------------------------------------------------------------------

inline void save_vocab(const Vocab& vocab, std::ostream& out) {
  for (const auto& token : vocab.tokens()) out << token << '\n';
}

inline void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open vocab file for writing: " + path);
  }
  save_vocab(vocab, out);
}

inline Vocab load_vocab(std::istream& in, const std::string& name) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    detail::strip_cr(line);
    lines.push_back(line);
  }
  const auto& reserved = Vocab::reserved_tokens();
  if (lines.size() < reserved.size()) {
    throw FormatError(name + ": vocab file must start with the four reserved tokens");
  }
  for (std::size_t i = 0; i < reserved.size(); ++i) {
    if (lines[i] != reserved[i]) {
      throw FormatError(name + " line " + std::to_string(i + 1) +
                        ": expected reserved token " + reserved[i]);
    }
  }
  Vocab vocab;
  for (std::size_t i = reserved.size(); i < lines.size(); ++i) {
    if (lines[i].empty()) {
      throw FormatError(name + " line " + std::to_string(i + 1) +
                        ": empty token");
    }
    try {
      vocab.add_token(lines[i]);
    } catch (const std::invalid_argument& e) {
      throw FormatError(name + " line " + std::to_string(i + 1) + ": " +
                        e.what());
    }
  }
  return vocab;
}

inline Vocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open vocab file " + path);
  }
  return load_vocab(in, path);
}

}  // namespace tgsm
