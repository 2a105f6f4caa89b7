#include "doctest.h"

#include <cmath>
#include <set>

#include "lcseq/rl.hpp"
#include "test_support.hpp"

using namespace lcseq;
using lcseq::testing::tiny_model;
using lcseq::testing::tiny_vocab;

namespace {

const TokenIds kSource{4, 9, 5, 13, 7};

SampleResult rewarded(double raw, double baseline, std::size_t d_e) {
  SampleResult s;
  s.reward_raw = raw;
  s.baseline_reward = baseline;
  s.length_error = d_e;
  return s;
}

/// Samples a non-empty multinomial sequence and attaches the given rewards.
SampleResult sampled(const Model& m, const Vocabulary& vocab, std::size_t l1, double shaped, double baseline,
                     std::uint64_t seed) {
  Rng rng(seed);
  SampleResult s;
  for (int tries = 0; tries < 100 && s.tokens.size() < 2; ++tries) {
    s = sample_sentence(m, vocab, kSource, l1, DecodeMode::multinomial, rng);
  }
  REQUIRE(s.tokens.size() >= 2);
  s.reward_raw = shaped;
  s.reward_shaped = shaped;
  s.baseline_reward = baseline;
  return s;
}

}  // namespace

TEST_SUITE("rl") {

TEST_CASE("streams") {
  Rng a = make_stream(1, 2, 3);
  Rng b = make_stream(1, 2, 3);
  CHECK(a() == b());
  std::set<std::uint64_t> firsts;
  for (std::uint64_t it = 0; it < 4; ++it) {
    for (std::uint64_t i = 0; i < 4; ++i) firsts.insert(make_stream(1, it, i)());
  }
  CHECK(firsts.size() == 16);
  CHECK(make_stream(1, 0, 0)() != make_stream(2, 0, 0)());
}

TEST_CASE("argmax and categorical draws") {
  CHECK(argmax(std::vector<double>{0.1, 0.7, 0.7, 0.2}) == 1);
  CHECK(argmax(std::vector<double>{-1.0}) == 0);
  const std::vector<double> lp{std::log(0.7), std::log(0.3)};
  Rng rng(5);
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) zeros += draw_categorical(lp, rng) == 0;
  CHECK(std::abs(zeros / 10000.0 - 0.7) < 0.02);
}

TEST_CASE("sample_target_length") {
  Rng rng(3);
  double total = 0.0;
  std::size_t lo = 1000, hi = 0;
  for (int i = 0; i < 100000; ++i) {
    const std::size_t l = sample_target_length(rng);
    lo = std::min(lo, l);
    hi = std::max(hi, l);
    total += static_cast<double>(l);
  }
  CHECK(lo == 20);
  CHECK(hi == 70);
  CHECK(std::abs(total / 100000.0 - 45.0) < 0.5);
  Rng x(9), y(9);
  for (int i = 0; i < 20; ++i) CHECK(sample_target_length(x, {10, 60}) == sample_target_length(y, {10, 60}));
  CHECK_THROWS_AS(sample_target_length(x, {5, 4}), std::invalid_argument);
}

TEST_CASE("sampling") {
  const Vocabulary vocab = tiny_vocab();
  const Model m = tiny_model(LcVariant::len_emb, 8, 4.0);
  Rng r1(1), r2(2);
  const auto g1 = sample_sentence(m, vocab, kSource, 30, DecodeMode::greedy, r1);
  const auto g2 = sample_sentence(m, vocab, kSource, 30, DecodeMode::greedy, r2);
  CHECK(g1.tokens == g2.tokens);
  CHECK(g1.step_logprobs.size() == g1.tokens.size());
  CHECK(g1.tokens.size() <= m.config.max_decode_tokens);
  CHECK(g1.produced_len == charlen(g1.content(), vocab));
  CHECK(g1.length_error == abs_diff(g1.produced_len, 30));
  CHECK(g1.desired_len == 30);

  Rng a(11), b(11);
  CHECK(sample_sentence(m, vocab, kSource, 30, DecodeMode::multinomial, a).tokens ==
        sample_sentence(m, vocab, kSource, 30, DecodeMode::multinomial, b).tokens);

  Model eos = tiny_model(LcVariant::none);
  std::fill(eos.params.out_w.mutable_values().begin(), eos.params.out_w.mutable_values().end(), 0.0);
  eos.params.out_b.mutable_values()[kEos] = 100.0;
  const auto e = sample_sentence(eos, vocab, kSource, 40, DecodeMode::greedy, r1);
  CHECK(e.tokens == TokenIds{kEos});
  CHECK(e.content().empty());
  CHECK(e.produced_len == 0);
  CHECK(e.length_error == 40);
}

TEST_CASE("MTS examples") {
  CHECK(mts_shape(3.0, 2.5, 10, 8) == 2.5);
  CHECK(mts_shape(2.0, 2.5, 10, 8) == 2.0);
  CHECK(mts_shape(3.0, 2.5, 8, 8) == 3.0);
}

TEST_CASE("MTS randomized properties") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> r(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> d(0, 30);
  for (int i = 0; i < 1000; ++i) {
    const double rs = r(rng), rg = r(rng);
    const std::size_t de = d(rng), th = d(rng);
    const double out = mts_shape(rs, rg, de, th);
    CHECK((out == rs || out == rg));
    if (de <= th || rs <= rg) CHECK(out == rs);
  }
}

TEST_CASE("MTS batch shaping") {
  std::vector<SampleResult> batch{rewarded(3.0, 2.5, 10), rewarded(3.0, 2.5, 2), rewarded(1.0, 2.5, 10)};
  mts_shape_batch(batch, 8);
  CHECK(*batch[0].reward_shaped == 2.5);
  CHECK(*batch[1].reward_shaped == 3.0);
  CHECK(*batch[2].reward_shaped == 1.0);
  mts_shape_batch(batch, 8, NeutralizeMode::zero);
  CHECK(*batch[0].reward_shaped == 0.0);
  CHECK(loss_coefficient(batch[1]) == -0.5);
  std::vector<SampleResult> missing(1);
  CHECK_THROWS_AS(mts_shape_batch(missing, 8), std::invalid_argument);
}

TEST_CASE("SCD") {
  std::vector<SampleResult> batch{rewarded(1, 0, 0), rewarded(1, 0, 2), rewarded(1, 0, 4), rewarded(1, 0, 6)};
  CHECK(mean_length_error(batch) == 3.0);
  CHECK(keep_probability(0.4, 3.0, 3.0) == 1.0);
  CHECK(keep_probability(0.4, 1.0, 3.0) == 1.0);
  CHECK(keep_probability(0.1, 13.0, 3.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(mean_length_error(std::span<const SampleResult>{}), std::invalid_argument);
  Rng rng(1);
  CHECK_THROWS_AS(scd_shape(batch, 0.0, rng), std::invalid_argument);

  // Samples at or below the mean are always kept; the rest only ever keep or neutralize.
  for (int trial = 0; trial < 200; ++trial) {
    scd_shape(batch, 0.4, rng);
    CHECK(*batch[0].reward_shaped == 1.0);
    CHECK(*batch[1].reward_shaped == 1.0);
    for (const auto& s : batch) CHECK((*s.reward_shaped == 1.0 || *s.reward_shaped == 0.0));
  }
  // SCD ignores the score condition: a sample below its baseline can still be neutralized.
  std::vector<SampleResult> low{rewarded(0.2, 1.0, 0), rewarded(0.2, 1.0, 100)};
  scd_shape(low, 5.0, rng);
  CHECK(*low[1].reward_shaped == 1.0);
  scd_shape(low, 5.0, rng, NeutralizeMode::zero);
  CHECK(*low[1].reward_shaped == 0.0);
}

TEST_CASE("SCD keep frequency") {
  Rng rng(23);
  for (double lambda : {0.1, 0.4, 0.8}) {
    for (std::size_t delta : {0u, 5u, 10u}) {
      std::vector<SampleResult> batch{rewarded(2.0, 1.0, 20 + delta), rewarded(2.0, 1.0, 20 - delta)};
      const double p = std::min(1.0, std::exp(-lambda * static_cast<double>(delta)));
      int kept = 0;
      for (int i = 0; i < 10000; ++i) {
        scd_shape(batch, lambda, rng);
        kept += *batch[0].reward_shaped == 2.0;
      }
      const double sd = std::sqrt(p * (1.0 - p) / 10000.0);
      INFO("lambda=" << lambda << " delta=" << delta);
      CHECK(std::abs(kept / 10000.0 - p) <= 3.0 * sd);
    }
  }
}

TEST_CASE("shapers parse and print") {
  CHECK(RewardShaper::parse("scst") == RewardShaper::scst());
  CHECK(RewardShaper::parse("mts:16") == RewardShaper::mts(16));
  CHECK(RewardShaper::parse("scd:0.8") == RewardShaper::scd(0.8));
  for (const auto& s : {RewardShaper::scst(), RewardShaper::mts(4), RewardShaper::scd(0.1)}) {
    CHECK(RewardShaper::parse(s.to_string()) == s);
  }
  CHECK_THROWS_AS(RewardShaper::parse("mts:-1"), std::invalid_argument);
  CHECK_THROWS_AS(RewardShaper::parse("scd:0"), std::invalid_argument);
  CHECK_THROWS_AS(RewardShaper::parse("ppo"), std::invalid_argument);
  CHECK(parse_neutralize_mode("zero") == NeutralizeMode::zero);
  CHECK_THROWS_AS(parse_neutralize_mode("drop"), std::invalid_argument);
}

TEST_CASE("scst_loss") {
  const Vocabulary vocab = tiny_vocab();
  Model m = tiny_model(LcVariant::len_mc, 8, 4.0);

  SUBCASE("zero advantage gives zero loss and gradient") {
    std::vector<SampleResult> batch{sampled(m, vocab, 30, 1.5, 1.5, 1), sampled(m, vocab, 40, 0.7, 0.7, 2)};
    ad::Tape tape;
    const ad::Var loss = scst_loss(tape, m, vocab, batch);
    CHECK(tape.item(loss) == 0.0);
    for (const auto& [name, g] : tape.backward(loss)) {
      for (double x : g) CHECK(x == 0.0);
    }
  }
  SUBCASE("a rewarded sample becomes more likely after one step") {
    const SampleResult s = sampled(m, vocab, 30, 2.0, 1.0, 3);
    const std::vector<SampleResult> batch{s};
    auto logp = [&] {
      ad::Tape tape;
      Graph g(tape, m);
      const auto enc = g.encode(s.source);
      const auto sched = schedule(length_class(m.config.variant), s.desired_len, s.tokens, vocab);
      return tape.item(g.sequence_logprob(enc, s.desired_len, s.tokens, sched.steps));
    };
    const double before = logp();
    ad::Tape tape;
    const auto grads = tape.backward(scst_loss(tape, m, vocab, batch));
    for (auto& [name, t] : m.params.named()) {
      auto it = grads.find(name);
      if (it == grads.end() || !t->requires_grad()) continue;
      auto v = t->mutable_values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= 1e-3 * it->second[i];
    }
    CHECK(logp() > before);
  }
  SUBCASE("errors") {
    ad::Tape tape;
    CHECK_THROWS_AS(scst_loss(tape, m, vocab, std::span<const SampleResult>{}), std::invalid_argument);
    SampleResult s = sampled(m, vocab, 30, 2.0, 1.0, 4);
    s.reward_shaped.reset();
    CHECK_THROWS_AS(scst_loss(tape, m, vocab, std::vector{s}), std::invalid_argument);
  }
}

TEST_CASE("scst_loss gradient matches finite differences") {
  const Vocabulary vocab = tiny_vocab();
  for (auto variant : lcseq::testing::kAllVariants) {
    INFO(to_string(variant));
    Model m = lcseq::testing::well_conditioned_model(variant);
    const std::vector<SampleResult> batch{sampled(m, vocab, 30, 2.0, 1.0, 5), sampled(m, vocab, 45, 0.5, 1.25, 6)};
    const auto params = lcseq::testing::trainable(m);
    const double err = ad::finite_difference_check([&](ad::Tape& t) { return scst_loss(t, m, vocab, batch); },
                                                   params, 1e-2, ad::Stencil::fourth_order);
    CHECK(err < 1e-4);
  }
}

}  // TEST_SUITE
