#include "mvan/text_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace mvan {

namespace {

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80 || c == '_'; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string_view raw = text.substr(i, j - i);
    i = j;

    if (starts_with_ci(raw, "http://") || starts_with_ci(raw, "https://") || starts_with_ci(raw, "www.")) {
      out.emplace_back(kUrlToken);
      continue;
    }
    if (raw.size() > 1 && raw[0] == '@' && is_word_byte(static_cast<unsigned char>(raw[1]))) {
      out.emplace_back(kUserToken);
      // Trailing "?" / "!" after a mention still carry meaning.
      for (char c : raw) {
        if (c == '?' || c == '!') out.emplace_back(1, c);
      }
      continue;
    }
    std::string word;
    for (char ch : raw) {
      const auto c = static_cast<unsigned char>(ch);
      if (is_word_byte(c)) {
        word += static_cast<char>(std::tolower(c));
      } else if (ch == '?' || ch == '!') {
        if (!word.empty()) out.push_back(std::move(word));
        word.clear();
        out.emplace_back(1, ch);
      }
    }
    if (!word.empty()) out.push_back(std::move(word));
  }
  return out;
}

Vocabulary::Vocabulary() {
  push(std::string(kPadToken));
  push(std::string(kUnknownToken));
}

void Vocabulary::push(std::string token) {
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
}

std::size_t Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknownIndex : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnknownToken) {
    throw std::invalid_argument("vocabulary token list must start with <pad>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw std::invalid_argument("duplicate vocabulary token: " + tokens[i]);
    v.push(std::move(tokens[i]));
  }
  return v;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t cap) {
  if (cap < 2) throw std::invalid_argument("vocabulary cap must be at least 2");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& tok : doc) {
      if (tok == kPadToken || tok == kUnknownToken) continue;
      ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already in lexicographic order; stable_sort keeps it for ties.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [tok, _] : ranked) {
    if (v.size() >= cap) break;
    v.push(tok);
  }
  return v;
}

EncodedText encode_tweet(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("encode_tweet: max_len must be at least 1");
  EncodedText e;
  e.indices.assign(max_len, kPadIndex);
  e.length = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < e.length; ++i) e.indices[i] = vocab.index_of(tokens[i]);
  return e;
}

EmbeddingTable load_embeddings(const std::optional<std::filesystem::path>& path, const Vocabulary& vocab,
                               std::size_t dim, Rng& init) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  EmbeddingTable table{Tensor::matrix(vocab.size(), dim), true};
  std::vector<bool> filled(vocab.size(), false);

  if (path) {
    std::ifstream in(*path);
    if (!in) throw EmbeddingFormatError("cannot open embeddings file " + path->string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream ls(line);
      std::vector<std::string> fields;
      for (std::string f; ls >> f;) fields.push_back(std::move(f));
      if (fields.empty()) continue;
      if (line_no == 1 && fields.size() == 2 &&
          std::all_of(fields[0].begin(), fields[0].end(), ::isdigit) &&
          std::all_of(fields[1].begin(), fields[1].end(), ::isdigit)) {
        if (std::stoul(fields[1]) != dim) {
          throw EmbeddingFormatError("embeddings header declares dimension " + fields[1] + ", expected " +
                                     std::to_string(dim));
        }
        continue;
      }
      if (fields.size() != dim + 1) {
        throw EmbeddingFormatError("embeddings line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(dim) + " values, found " + std::to_string(fields.size() - 1));
      }
      std::vector<double> values(dim);
      for (std::size_t k = 0; k < dim; ++k) {
        char* end = nullptr;
        values[k] = std::strtod(fields[k + 1].c_str(), &end);
        if (end == fields[k + 1].c_str() || *end != '\0' || !std::isfinite(values[k])) {
          throw EmbeddingFormatError("embeddings line " + std::to_string(line_no) + ": malformed value '" +
                                     fields[k + 1] + "'");
        }
      }
      if (!vocab.contains(fields[0])) continue;
      const std::size_t row = vocab.index_of(fields[0]);
      std::copy(values.begin(), values.end(), table.matrix.ptr() + row * dim);
      filled[row] = true;
    }
  }

  // Draw per row so a row's initial vector does not depend on which other
  // tokens the file covered.
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    if (r == kPadIndex || filled[r]) continue;
    Rng row_rng = init.substream(r);
    for (std::size_t k = 0; k < dim; ++k) table.matrix(r, k) = row_rng.uniform(-0.05, 0.05);
  }
  for (std::size_t k = 0; k < dim; ++k) table.matrix(kPadIndex, k) = 0.0;
  return table;
}

}  // namespace mvan
