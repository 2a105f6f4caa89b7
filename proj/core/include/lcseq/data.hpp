#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lcseq {

using TokenId = std::uint32_t;
using Sentence = std::vector<std::string>;
using TokenIds = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kReservedTokens = 4;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Number of Unicode code points in a UTF-8 token.
std::size_t utf8_length(std::string_view text);

std::vector<std::string> split_tokens(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

class Vocabulary {
 public:
  /// Reserved entries only.
  Vocabulary();
  /// Reserved entries followed by `tokens` in the given order.
  explicit Vocabulary(std::span<const std::string> tokens);

  std::size_t size() const noexcept { return surfaces_.size(); }
  /// Unknown surfaces map to kUnk.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& surface(TokenId id) const;
  /// Characters contributed to sentence length; 0 for PAD/BOS/EOS.
  std::size_t charlen(TokenId id) const;

  TokenIds encode(std::span<const std::string> tokens) const;
  /// Drops PAD/BOS/EOS.
  Sentence decode(std::span<const TokenId> ids) const;

  /// Non-reserved surfaces in id order.
  std::vector<std::string> content_tokens() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.surfaces_ == b.surfaces_; }

 private:
  void add(std::string surface, std::size_t chars);

  std::vector<std::string> surfaces_;
  std::vector<std::size_t> charlens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct Pair {
  Sentence source;
  Sentence summary;
  friend bool operator==(const Pair&, const Pair&) = default;
};

enum class Split { train, valid, test };

struct Corpus {
  std::vector<Pair> pairs;
  Split split = Split::train;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Keeps the `max_size - kReservedTokens` most frequent tokens (ties broken
/// lexicographically); everything else encodes to UNK.
Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size);

/// One pair per line: source tokens, a tab, summary tokens (space separated, UTF-8).
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path, Split split = Split::train);

// ---------------------------------------------------------------- synthetic task

/// Fixed lexicon of the synthetic summarization task. Each keyword class has
/// three synonyms of clearly different character lengths; fillers never
/// appear in summaries.
class SyntheticLexicon {
 public:
  static constexpr std::size_t kClasses = 40;
  static constexpr std::size_t kSynonyms = 3;
  static constexpr std::size_t kFillers = 60;

  static const SyntheticLexicon& instance();

  const std::string& synonym(std::size_t cls, std::size_t form) const { return synonyms_[cls][form]; }
  const std::string& filler(std::size_t i) const { return fillers_[i]; }
  /// Keyword class of a surface, or -1 for fillers and unknown tokens.
  int keyword_class(std::string_view surface) const;

 private:
  SyntheticLexicon();
  std::vector<std::vector<std::string>> synonyms_;
  std::vector<std::string> fillers_;
  std::unordered_map<std::string, int> class_of_;
};

struct SyntheticOptions {
  std::uint64_t seed = 1;
  std::size_t n_pairs = 1000;
  double skew = 0.5;
};

/// Synthetic compressible-text corpus: 3-6 keywords per source, each followed
/// by 1-4 fillers; the summary restates every keyword in order through one of
/// its synonyms. With probability `skew` the synonyms are chosen to land near
/// a concentrated, right-skewed length; otherwise they are uniform.
Corpus generate_synthetic(const SyntheticOptions& options);

/// Keyword classes of a sentence in order (fillers skipped).
std::vector<int> keyword_classes(std::span<const std::string> sentence);

/// Summary for `source` whose character length is closest to `target_chars`
/// (first such synonym assignment in enumeration order).
Sentence oracle_reference(std::span<const std::string> source, std::size_t target_chars);

/// Shortest and longest achievable summary lengths for `source`.
std::pair<std::size_t, std::size_t> feasible_lengths(std::span<const std::string> source);

/// Largest character-length gap between adjacent synonyms of any class.
std::size_t max_synonym_gap();

}  // namespace lcseq
