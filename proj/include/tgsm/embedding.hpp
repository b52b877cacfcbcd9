#pragma once

// Pretrained word-vector ingestion: stream a FastText-format .vec file,
// keep only the rows the vocabulary needs, and assemble the vocab-aligned
// embedding matrix.

#include <charconv>
#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "tgsm/error.hpp"
#include "tgsm/linalg.hpp"
#include "tgsm/text.hpp"

namespace tgsm {

struct VecFileData {
  std::unordered_map<std::string, Vector> vectors;
  std::size_t dim = 0;
};

namespace detail {

inline bool parse_count(std::string_view field, std::size_t& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

inline bool parse_double(std::string_view field, double& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

// next space-separated field; returns empty view at end of line
inline std::string_view next_field(std::string_view& rest) {
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  const std::size_t cut = rest.find(' ');
  std::string_view field = rest.substr(0, cut);
  rest.remove_prefix(cut == std::string_view::npos ? rest.size() : cut);
  return field;
}

}  // namespace detail

// Header line "<count> <dim>", then one "<token> <dim floats>" row per
// line. Rows whose token is not in `wanted` are discarded immediately,
// so memory stays at O(|wanted| * dim). First occurrence wins on
// duplicate tokens.
inline VecFileData parse_vec_file(std::istream& in, const std::string& name,
                                  const std::unordered_set<std::string>& wanted) {
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(name + " line 1: missing header");
  }
  detail::strip_cr(line);
  VecFileData data;
  std::size_t declared_count = 0;
  {
    std::string_view rest(line);
    const std::string_view count_field = detail::next_field(rest);
    const std::string_view dim_field = detail::next_field(rest);
    std::string_view trailing = detail::next_field(rest);
    if (!detail::parse_count(count_field, declared_count) ||
        !detail::parse_count(dim_field, data.dim) || data.dim == 0 ||
        !trailing.empty()) {
      throw FormatError(name + " line 1: malformed header \"" + line + "\"");
    }
  }

  std::size_t line_no = 1;
  Vector row(data.dim);
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    std::string_view rest(line);
    const std::string_view token = detail::next_field(rest);
    const bool keep =
        wanted.count(std::string(token)) > 0 &&
        data.vectors.count(std::string(token)) == 0;
    std::size_t seen = 0;
    for (std::string_view field = detail::next_field(rest); !field.empty();
         field = detail::next_field(rest)) {
      double value;
      if (!detail::parse_double(field, value)) {
        throw FormatError(name + " line " + std::to_string(line_no) +
                          ": unparseable float \"" + std::string(field) + "\"");
      }
      if (seen < data.dim) row[seen] = value;
      ++seen;
    }
    if (seen != data.dim) {
      throw FormatError(name + " line " + std::to_string(line_no) + ": expected " +
                        std::to_string(data.dim) + " floats, found " +
                        std::to_string(seen));
    }
    if (keep) {
      data.vectors.emplace(std::string(token), row);
    }
  }
  return data;
}

inline VecFileData parse_vec_file(const std::string& path,
                                  const std::unordered_set<std::string>& wanted) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open vectors file " + path);
  }
  return parse_vec_file(in, path, wanted);
}

struct EmbeddingTable {
  std::size_t dim = 0;
  Matrix matrix;           // V x dim, row i = embedding of vocab id i
  bool trainable = false;
  double coverage = 0.0;   // fraction of rows taken from the file
};

// Row per vocab id: file vector when present, otherwise seeded uniform in
// [-half_range, half_range]. The four reserved rows are always random —
// pretrained vocabularies do not contain them.
inline EmbeddingTable build_embedding_matrix(
    const Vocab& vocab, const std::unordered_map<std::string, Vector>& parsed,
    std::size_t dim, Rng& rng, double half_range = 0.05) {
  if (dim == 0) {
    throw std::invalid_argument("build_embedding_matrix: dim must be positive");
  }
  for (const auto& [token, vec] : parsed) {
    if (vec.size() != dim) {
      throw std::invalid_argument(
          "build_embedding_matrix: vector for \"" + token + "\" has dim " +
          std::to_string(vec.size()) + ", expected " + std::to_string(dim));
    }
  }
  EmbeddingTable table;
  table.dim = dim;
  table.matrix = Matrix(vocab.size(), dim);
  std::size_t found = 0;
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    const Vector* file_vec = nullptr;
    if (id >= Vocab::reserved_tokens().size()) {
      auto it = parsed.find(vocab.token(static_cast<TokenId>(id)));
      if (it != parsed.end()) file_vec = &it->second;
    }
    double* row = table.matrix.row_ptr(id);
    if (file_vec) {
      ++found;
      for (std::size_t j = 0; j < dim; ++j) row[j] = (*file_vec)[j];
    } else {
      for (std::size_t j = 0; j < dim; ++j) {
        row[j] = rng.uniform(-half_range, half_range);
      }
    }
  }
  table.coverage = static_cast<double>(found) / static_cast<double>(vocab.size());
  return table;
}

}  // namespace tgsm
