#include "lcseq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace lcseq {

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\r') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------- Vocabulary

namespace {
constexpr std::string_view kReservedSurfaces[kReservedTokens] = {"<pad>", "unk", "<s>", "</s>"};

bool is_reserved_surface(std::string_view s) {
  return std::find(std::begin(kReservedSurfaces), std::end(kReservedSurfaces), s) != std::end(kReservedSurfaces);
}
}  // namespace

Vocabulary::Vocabulary() {
  add(std::string(kReservedSurfaces[kPad]), 0);
  add(std::string(kReservedSurfaces[kUnk]), 3);
  add(std::string(kReservedSurfaces[kBos]), 0);
  add(std::string(kReservedSurfaces[kEos]), 0);
}

Vocabulary::Vocabulary(std::span<const std::string> tokens) : Vocabulary() {
  for (const auto& t : tokens) {
    if (t.empty() || t.find_first_of(" \t\n") != std::string::npos) {
      throw std::invalid_argument("vocabulary token must be non-empty without whitespace: '" + t + "'");
    }
    if (is_reserved_surface(t)) continue;
    if (index_.contains(t)) throw std::invalid_argument("duplicate vocabulary token '" + t + "'");
    add(t, utf8_length(t));
  }
}

void Vocabulary::add(std::string surface, std::size_t chars) {
  index_.emplace(surface, static_cast<TokenId>(surfaces_.size()));
  surfaces_.push_back(std::move(surface));
  charlens_.push_back(chars);
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

const std::string& Vocabulary::surface(TokenId id) const {
  if (id >= surfaces_.size()) throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  return surfaces_[id];
}

std::size_t Vocabulary::charlen(TokenId id) const {
  if (id >= charlens_.size()) throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  return charlens_[id];
}

TokenIds Vocabulary::encode(std::span<const std::string> tokens) const {
  TokenIds out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Sentence Vocabulary::decode(std::span<const TokenId> ids) const {
  Sentence out;
  for (TokenId id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    out.push_back(surface(id));
  }
  return out;
}

std::vector<std::string> Vocabulary::content_tokens() const {
  return {surfaces_.begin() + kReservedTokens, surfaces_.end()};
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size) {
  if (max_size < 5) throw std::invalid_argument("build_vocab: max_size must be at least 5");
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& p : corpus.pairs) {
    for (const auto& t : p.source) ++counts[t];
    for (const auto& t : p.summary) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [t, c] : counts) {
    if (!is_reserved_surface(t)) ranked.emplace_back(t, c);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kReservedTokens);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocabulary(tokens);
}

// ---------------------------------------------------------------- corpus files

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& p : corpus.pairs) {
    out << join_tokens(p.source) << '\t' << join_tokens(p.summary) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  Corpus corpus;
  corpus.split = split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
    if (tab == std::string::npos) throw FormatError(where() + ": missing tab-separated summary field");
    if (line.find('\t', tab + 1) != std::string::npos) throw FormatError(where() + ": more than two fields");
    Pair p{split_tokens(std::string_view(line).substr(0, tab)),
           split_tokens(std::string_view(line).substr(tab + 1))};
    if (p.source.empty()) throw FormatError(where() + ": empty source");
    if (p.summary.empty()) throw FormatError(where() + ": empty summary");
    corpus.pairs.push_back(std::move(p));
  }
  if (corpus.empty()) throw FormatError(path.string() + ": empty corpus file");
  return corpus;
}

// ---------------------------------------------------------------- synthetic lexicon

namespace {

constexpr std::string_view kConsonants = "bcdfghjklmnprstvwz";
constexpr std::string_view kVowels = "aeiou";

// Lexicon words come from raw mt19937 draws so the token set is identical on
// every standard library.
std::string pseudo_word(std::mt19937& gen, std::size_t length) {
  std::string w;
  const bool vowel_first = gen() % 2 == 0;
  for (std::size_t i = 0; i < length; ++i) {
    const bool vowel = (i % 2 == 0) == vowel_first;
    const auto& set = vowel ? kVowels : kConsonants;
    w += set[gen() % set.size()];
  }
  return w;
}

}  // namespace

const SyntheticLexicon& SyntheticLexicon::instance() {
  static const SyntheticLexicon lexicon;
  return lexicon;
}

SyntheticLexicon::SyntheticLexicon() {
  std::mt19937 gen(20190711u);
  std::unordered_set<std::string> used;
  for (auto s : kReservedSurfaces) used.emplace(s);
  auto fresh = [&](std::size_t length) {
    for (;;) {
      std::string w = pseudo_word(gen, length);
      if (used.insert(w).second) return w;
    }
  };
  synonyms_.resize(kClasses);
  for (std::size_t c = 0; c < kClasses; ++c) {
    const std::size_t short_len = 2 + gen() % 2;
    const std::size_t mid_len = 6 + gen() % 2;
    const std::size_t long_len = 11 + gen() % 3;
    synonyms_[c] = {fresh(short_len), fresh(mid_len), fresh(long_len)};
    for (const auto& s : synonyms_[c]) class_of_.emplace(s, static_cast<int>(c));
  }
  for (std::size_t i = 0; i < kFillers; ++i) fillers_.push_back(fresh(2 + gen() % 6));
}

int SyntheticLexicon::keyword_class(std::string_view surface) const {
  auto it = class_of_.find(std::string(surface));
  return it == class_of_.end() ? -1 : it->second;
}

std::vector<int> keyword_classes(std::span<const std::string> sentence) {
  const auto& lex = SyntheticLexicon::instance();
  std::vector<int> out;
  for (const auto& t : sentence) {
    const int c = lex.keyword_class(t);
    if (c >= 0) out.push_back(c);
  }
  return out;
}

namespace {

// Synonym-form assignments over `classes` whose total length is closest to
// `target`, each encoded as one form index per slot.
std::vector<std::vector<std::size_t>> closest_assignments(const std::vector<int>& classes, std::size_t target) {
  const auto& lex = SyntheticLexicon::instance();
  const std::size_t k = classes.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < k; ++i) combos *= SyntheticLexicon::kSynonyms;

  std::vector<std::vector<std::size_t>> best;
  std::size_t best_gap = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> forms(k);
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t rest = code;
    std::size_t total = 0;
    for (std::size_t s = k; s-- > 0;) {
      forms[s] = rest % SyntheticLexicon::kSynonyms;
      rest /= SyntheticLexicon::kSynonyms;
      total += utf8_length(lex.synonym(static_cast<std::size_t>(classes[s]), forms[s]));
    }
    const std::size_t gap = total > target ? total - target : target - total;
    if (gap < best_gap) {
      best_gap = gap;
      best.clear();
    }
    if (gap == best_gap) best.push_back(forms);
  }
  return best;
}

Sentence realize(const std::vector<int>& classes, const std::vector<std::size_t>& forms) {
  const auto& lex = SyntheticLexicon::instance();
  Sentence out;
  for (std::size_t s = 0; s < classes.size(); ++s) {
    out.push_back(lex.synonym(static_cast<std::size_t>(classes[s]), forms[s]));
  }
  return out;
}

}  // namespace

Sentence oracle_reference(std::span<const std::string> source, std::size_t target_chars) {
  const auto classes = keyword_classes(source);
  if (classes.empty()) return {};
  return realize(classes, closest_assignments(classes, target_chars).front());
}

std::pair<std::size_t, std::size_t> feasible_lengths(std::span<const std::string> source) {
  const auto& lex = SyntheticLexicon::instance();
  std::size_t lo = 0, hi = 0;
  for (int c : keyword_classes(source)) {
    std::size_t mn = std::numeric_limits<std::size_t>::max(), mx = 0;
    for (std::size_t f = 0; f < SyntheticLexicon::kSynonyms; ++f) {
      const std::size_t len = utf8_length(lex.synonym(static_cast<std::size_t>(c), f));
      mn = std::min(mn, len);
      mx = std::max(mx, len);
    }
    lo += mn;
    hi += mx;
  }
  return {lo, hi};
}

std::size_t max_synonym_gap() {
  const auto& lex = SyntheticLexicon::instance();
  std::size_t gap = 0;
  for (std::size_t c = 0; c < SyntheticLexicon::kClasses; ++c) {
    std::vector<std::size_t> lens;
    for (std::size_t f = 0; f < SyntheticLexicon::kSynonyms; ++f) lens.push_back(utf8_length(lex.synonym(c, f)));
    std::sort(lens.begin(), lens.end());
    for (std::size_t i = 1; i < lens.size(); ++i) gap = std::max(gap, lens[i] - lens[i - 1]);
  }
  return gap;
}

Corpus generate_synthetic(const SyntheticOptions& options) {
  if (options.skew < 0.0 || options.skew > 1.0) throw std::invalid_argument("skew must lie in [0, 1]");
  if (options.n_pairs == 0) throw std::invalid_argument("n_pairs must be at least 1");
  const auto& lex = SyntheticLexicon::instance();
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> keyword_count(3, 6);
  std::uniform_int_distribution<std::size_t> filler_count(1, 4);
  std::uniform_int_distribution<std::size_t> pick_filler(0, SyntheticLexicon::kFillers - 1);
  std::uniform_int_distribution<std::size_t> pick_form(0, SyntheticLexicon::kSynonyms - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::exponential_distribution<double> tail(1.0 / 4.0);
  constexpr double kModeChars = 22.0;

  Corpus corpus;
  corpus.pairs.reserve(options.n_pairs);
  std::vector<int> all_classes(SyntheticLexicon::kClasses);
  for (std::size_t c = 0; c < all_classes.size(); ++c) all_classes[c] = static_cast<int>(c);

  for (std::size_t n = 0; n < options.n_pairs; ++n) {
    const std::size_t k = keyword_count(rng);
    std::vector<int> classes;
    std::sample(all_classes.begin(), all_classes.end(), std::back_inserter(classes), k, rng);
    std::shuffle(classes.begin(), classes.end(), rng);

    Pair pair;
    for (int c : classes) {
      pair.source.push_back(lex.synonym(static_cast<std::size_t>(c), pick_form(rng)));
      const std::size_t fillers = filler_count(rng);
      for (std::size_t f = 0; f < fillers; ++f) pair.source.push_back(lex.filler(pick_filler(rng)));
    }

    std::vector<std::size_t> forms(k);
    if (coin(rng) < options.skew) {
      const auto target = static_cast<std::size_t>(std::lround(kModeChars + tail(rng)));
      auto candidates = closest_assignments(classes, target);
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      forms = candidates[pick(rng)];
    } else {
      for (auto& f : forms) f = pick_form(rng);
    }
    pair.summary = realize(classes, forms);
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

}  // namespace lcseq
