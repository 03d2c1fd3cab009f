#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvan/rng.hpp"
#include "mvan/tensor.hpp"

namespace mvan {

inline constexpr std::size_t kPadIndex = 0;
inline constexpr std::size_t kUnknownIndex = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnknownToken = "<unk>";
inline constexpr std::string_view kUrlToken = "<url>";
inline constexpr std::string_view kUserToken = "<user>";
inline constexpr std::size_t kDefaultVocabCap = 250000;

/// Lowercases, maps URLs to <url> and @mentions to <user>, keeps hashtag text
/// without '#', emits '?' and '!' as standalone tokens and strips all other
/// punctuation. Bytes outside ASCII are kept as word characters.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  /// Index of `token`, or kUnknownIndex.
  std::size_t index_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Rebuilds a vocabulary from its token list (index order); entries 0 and 1
  /// must be the reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

 private:
  friend Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t cap);
  void push(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Ranks tokens by descending frequency with lexicographic tie-break; at most
/// `cap` entries including the two reserved ones.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t cap = kDefaultVocabCap);

struct EncodedText {
  std::vector<std::size_t> indices;  // exactly max_len entries
  std::size_t length = 0;            // min(token count, max_len)
};

EncodedText encode_tweet(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len);

struct EmbeddingTable {
  Tensor matrix;  // |V| x dim, row kPadIndex is zero
  bool trainable = true;

  std::size_t dim() const { return matrix.cols(); }
};

class EmbeddingFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads word2vec text format (an optional "count dim" header line, then
/// "token v1 ... v_dim" per line). Rows for tokens absent from the file are
/// uniform in [-0.05, 0.05] from `init`. With no path every non-pad row is
/// random.
EmbeddingTable load_embeddings(const std::optional<std::filesystem::path>& path, const Vocabulary& vocab,
                               std::size_t dim, Rng& init);

}  // namespace mvan
