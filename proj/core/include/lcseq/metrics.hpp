#pragma once

// ROUGE F1 scores, the RL reward, and the svar length-control metric.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lcseq/data.hpp"

namespace lcseq {

struct MetricsReport {
  double rouge1_f1 = 0.0;
  double rouge2_f1 = 0.0;
  double rougeL_f1 = 0.0;
  double svar = 0.0;
  std::size_t n_examples = 0;

  double mean_rouge() const { return (rouge1_f1 + rouge2_f1 + rougeL_f1) / 3.0; }
  double cumulative_rouge() const { return rouge1_f1 + rouge2_f1 + rougeL_f1; }
};

/// Clipped n-gram overlap F1 for n in {1, 2}. Zero when either side has no
/// n-grams or nothing matches.
double rouge_n(std::span<const TokenId> candidate, std::span<const TokenId> reference, int n);

/// Longest-common-subsequence F1.
double rouge_l(std::span<const TokenId> candidate, std::span<const TokenId> reference);

/// rouge_1 + rouge_2 + rouge_l, in [0, 3].
double reward(std::span<const TokenId> candidate, std::span<const TokenId> reference);

/// sqrt(mean((produced - desired)^2)) over (produced, desired) pairs.
double svar(std::span<const std::pair<std::size_t, std::size_t>> pairs);

/// Mean per-sentence F1 plus pooled svar.
class MetricsAccumulator {
 public:
  void add(std::span<const TokenId> candidate, std::span<const TokenId> reference, std::size_t produced_len,
           std::size_t desired_len);
  MetricsReport report() const;
  std::span<const std::pair<std::size_t, std::size_t>> lengths() const { return lengths_; }

 private:
  double r1_ = 0.0, r2_ = 0.0, rl_ = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> lengths_;
};

}  // namespace lcseq
