#include "lcseq/lengths.hpp"

namespace lcseq {

std::size_t charlen(std::span<const TokenId> tokens, const Vocabulary& vocab) {
  std::size_t total = 0;
  for (TokenId t : tokens) total += vocab.charlen(t);
  return total;
}

std::size_t next_length(LengthClass cls, std::size_t current, std::size_t token_chars) {
  if (cls != LengthClass::remaining) return current;
  return current > token_chars ? current - token_chars : 0;
}

LengthSchedule schedule(LengthClass cls, std::size_t l1, std::span<const TokenId> emitted, const Vocabulary& vocab) {
  LengthSchedule out;
  out.cls = cls;
  out.steps.reserve(emitted.size());
  std::size_t l = l1;
  for (TokenId t : emitted) {
    out.steps.push_back(l);
    l = next_length(cls, l, vocab.charlen(t));
  }
  out.final_remaining = l;
  return out;
}

std::size_t length_error(std::size_t desired, std::span<const TokenId> produced, const Vocabulary& vocab) {
  return abs_diff(desired, charlen(produced, vocab));
}

}  // namespace lcseq
