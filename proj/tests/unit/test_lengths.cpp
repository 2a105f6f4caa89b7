#include "doctest.h"

#include "lcseq/lengths.hpp"

using namespace lcseq;

namespace {

const Vocabulary& table_vocab() {
  static const Vocabulary v(std::vector<std::string>{"arsenal", "fear", "fears", "henry", "will", "leave", "'s",
                                                     "chief", "quits", "to", "worried", "about"});
  return v;
}

TokenIds ids(std::string_view text) {
  const auto tokens = split_tokens(text);
  return table_vocab().encode(tokens);
}

}  // namespace

TEST_SUITE("lengths") {

TEST_CASE("charlen") {
  CHECK(charlen(ids("arsenal fear henry will leave"), table_vocab()) == 25);
  CHECK(charlen(ids("arsenal fears henry henry"), table_vocab()) == 22);
  CHECK(charlen(TokenIds{}, table_vocab()) == 0);
  CHECK(charlen(ids("arsenal 's"), table_vocab()) == 9);
  CHECK(charlen(TokenIds{kBos, kEos, kPad}, table_vocab()) == 0);
  CHECK(charlen(TokenIds{kUnk}, table_vocab()) == 3);
  const TokenIds a = ids("arsenal chief"), b = ids("quits to leave");
  TokenIds ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  CHECK(charlen(ab, table_vocab()) == charlen(a, table_vocab()) + charlen(b, table_vocab()));
  CHECK_THROWS(charlen(TokenIds{999}, table_vocab()));
}

TEST_CASE("schedule") {
  const TokenIds y = ids("arsenal fear henry will leave");
  const auto wli = schedule(LengthClass::whole, 45, y, table_vocab());
  CHECK(wli.steps == std::vector<std::size_t>(y.size(), 45));

  const auto rli = schedule(LengthClass::remaining, 25, y, table_vocab());
  CHECK(rli.steps == std::vector<std::size_t>{25, 18, 14, 9, 5});
  CHECK(rli.final_remaining == 0);

  const auto clamp = schedule(LengthClass::remaining, 3, ids("arsenal fear"), table_vocab());
  CHECK(clamp.steps == std::vector<std::size_t>{3, 0});

  // Telescoping without clamping.
  const auto tele = schedule(LengthClass::remaining, 100, y, table_vocab());
  std::size_t used = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    CHECK(tele.steps[t] == 100 - used);
    used += table_vocab().charlen(y[t]);
  }
  CHECK(tele.final_remaining == 100 - used);
}

TEST_CASE("length_error") {
  CHECK(length_error(25, ids("arsenal fear henry will leave"), table_vocab()) == 0);
  CHECK(length_error(25, ids("arsenal fears henry henry"), table_vocab()) == 3);
  CHECK(abs_diff(45, 58) == 13);
}

}  // TEST_SUITE
