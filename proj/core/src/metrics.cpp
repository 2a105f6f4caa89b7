#include "lcseq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace lcseq {

namespace {

double f1(double matches, double cand_total, double ref_total) {
  if (matches <= 0.0 || cand_total <= 0.0 || ref_total <= 0.0) return 0.0;
  const double p = matches / cand_total;
  const double r = matches / ref_total;
  return 2.0 * p * r / (p + r);
}

std::map<std::vector<TokenId>, std::size_t> ngram_counts(std::span<const TokenId> s, std::size_t n) {
  std::map<std::vector<TokenId>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[std::vector<TokenId>(s.begin() + i, s.begin() + i + n)];
  return counts;
}

}  // namespace

double rouge_n(std::span<const TokenId> candidate, std::span<const TokenId> reference, int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("rouge_n supports n = 1 or 2");
  const auto un = static_cast<std::size_t>(n);
  if (candidate.size() < un || reference.size() < un) return 0.0;
  const auto cand = ngram_counts(candidate, un);
  const auto ref = ngram_counts(reference, un);
  std::size_t matches = 0;
  for (const auto& [gram, count] : cand) {
    if (auto it = ref.find(gram); it != ref.end()) matches += std::min(count, it->second);
  }
  return f1(static_cast<double>(matches), static_cast<double>(candidate.size() - un + 1),
            static_cast<double>(reference.size() - un + 1));
}

double rouge_l(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::vector<std::size_t> prev(reference.size() + 1, 0), cur(reference.size() + 1, 0);
  for (std::size_t i = 1; i <= candidate.size(); ++i) {
    for (std::size_t j = 1; j <= reference.size(); ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return f1(static_cast<double>(prev[reference.size()]), static_cast<double>(candidate.size()),
            static_cast<double>(reference.size()));
}

double reward(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  return rouge_n(candidate, reference, 1) + rouge_n(candidate, reference, 2) + rouge_l(candidate, reference);
}

double svar(std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("svar of an empty set");
  double total = 0.0;
  for (const auto& [produced, desired] : pairs) {
    const double d = static_cast<double>(produced) - static_cast<double>(desired);
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(pairs.size()));
}

void MetricsAccumulator::add(std::span<const TokenId> candidate, std::span<const TokenId> reference,
                             std::size_t produced_len, std::size_t desired_len) {
  r1_ += rouge_n(candidate, reference, 1);
  r2_ += rouge_n(candidate, reference, 2);
  rl_ += rouge_l(candidate, reference);
  lengths_.emplace_back(produced_len, desired_len);
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  r.n_examples = lengths_.size();
  if (lengths_.empty()) return r;
  const double n = static_cast<double>(lengths_.size());
  r.rouge1_f1 = r1_ / n;
  r.rouge2_f1 = r2_ / n;
  r.rougeL_f1 = rl_ / n;
  r.svar = svar(lengths_);
  return r;
}

}  // namespace lcseq
