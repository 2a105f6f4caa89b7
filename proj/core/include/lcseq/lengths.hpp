#pragma once

// Character-level length accounting. Spaces between tokens are not counted.

#include <cstddef>
#include <span>
#include <vector>

#include "lcseq/data.hpp"

namespace lcseq {

/// Whole-length infusion keeps l_t fixed; remaining-length infusion counts down.
enum class LengthClass { none, whole, remaining };

/// Per-step length inputs: steps[t] is what the decoder sees while predicting token t.
struct LengthSchedule {
  LengthClass cls = LengthClass::none;
  std::vector<std::size_t> steps;
  /// Length left after the last scheduled token.
  std::size_t final_remaining = 0;
};

std::size_t charlen(std::span<const TokenId> tokens, const Vocabulary& vocab);

/// Length input for the step after emitting a token of `token_chars` characters.
/// Remaining lengths are clamped at zero.
std::size_t next_length(LengthClass cls, std::size_t current, std::size_t token_chars);

LengthSchedule schedule(LengthClass cls, std::size_t l1, std::span<const TokenId> emitted, const Vocabulary& vocab);

std::size_t length_error(std::size_t desired, std::span<const TokenId> produced, const Vocabulary& vocab);

inline std::size_t abs_diff(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

}  // namespace lcseq
