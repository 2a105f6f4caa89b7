#include "doctest.h"

#include <numeric>

#include "lcseq/seq2seq.hpp"
#include "test_support.hpp"

using namespace lcseq;
using lcseq::testing::tiny_model;
using lcseq::testing::tiny_vocab;

namespace {

std::vector<double> values(ad::Tape& tape, ad::Var v) {
  const auto s = tape.value(v);
  return {s.begin(), s.end()};
}

std::vector<double> first_step_logits(const Model& m, const TokenIds& src, std::size_t l1) {
  ad::Tape tape;
  Graph g(tape, m);
  const auto enc = g.encode(src);
  return values(tape, g.decode_step(enc, g.init_decoder(enc, l1), kBos).logits);
}

const TokenIds kSource{4, 9, 5, 13, 7};

}  // namespace

TEST_SUITE("seq2seq") {

TEST_CASE("variants and classes") {
  CHECK(length_class(LcVariant::none) == LengthClass::none);
  CHECK(length_class(LcVariant::len_init) == LengthClass::whole);
  CHECK(length_class(LcVariant::len_linit) == LengthClass::whole);
  CHECK(length_class(LcVariant::len_emb) == LengthClass::remaining);
  CHECK(length_class(LcVariant::len_mc) == LengthClass::remaining);
  for (auto v : lcseq::testing::kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  CHECK(parse_variant("lenmc") == LcVariant::len_mc);
  CHECK_THROWS_AS(parse_variant("LenXYZ"), std::invalid_argument);
}

TEST_CASE("only the active variant's extra parameters exist") {
  const auto init = ModelParams::initialize(lcseq::testing::tiny_config(LcVariant::len_init));
  CHECK(init.len_scale.has_value());
  CHECK_FALSE(init.len_gauss.has_value());
  const auto linit = ModelParams::initialize(lcseq::testing::tiny_config(LcVariant::len_linit));
  CHECK(linit.len_init_w.has_value());
  REQUIRE(linit.len_gauss.has_value());
  CHECK_FALSE(linit.len_gauss->requires_grad());
  const auto emb = ModelParams::initialize(lcseq::testing::tiny_config(LcVariant::len_emb));
  REQUIRE(emb.len_embed.has_value());
  CHECK(emb.len_embed->shape() == ad::Shape{64, 8});
  const auto none = ModelParams::initialize(lcseq::testing::tiny_config(LcVariant::none));
  CHECK(none.named().size() == 13);
}

TEST_CASE("encode") {
  const Model m = tiny_model(LcVariant::none);
  ad::Tape tape;
  Graph g(tape, m);
  const auto one = g.encode(TokenIds{5});
  REQUIRE(one.states.size() == 1);
  CHECK(tape.shape(one.states[0]) == ad::Shape{16});
  CHECK_THROWS_AS(g.encode(TokenIds{}), std::invalid_argument);
  CHECK_THROWS_AS(g.encode(TokenIds{5, 20}), std::out_of_range);

  const auto a = g.encode(kSource);
  const auto b = g.encode(kSource);
  for (std::size_t i = 0; i < kSource.size(); ++i) CHECK(values(tape, a.states[i]) == values(tape, b.states[i]));

  Model zero = tiny_model(LcVariant::none);
  for (auto& [name, t] : zero.params.named()) std::fill(t->mutable_values().begin(), t->mutable_values().end(), 0.0);
  ad::Tape t2;
  Graph gz(t2, zero);
  for (auto s : gz.encode(kSource).states) {
    for (double x : t2.value(s)) CHECK(x == 0.0);
  }
}

TEST_CASE("init_decoder") {
  const Model init = tiny_model(LcVariant::len_init);
  ad::Tape tape;
  Graph g(tape, init);
  const auto enc = g.encode(kSource);
  for (double x : tape.value(g.init_decoder(enc, 0).memory)) CHECK(x == 0.0);
  const auto m10 = values(tape, g.init_decoder(enc, 10).memory);
  const auto m20 = values(tape, g.init_decoder(enc, 20).memory);
  for (std::size_t i = 0; i < m10.size(); ++i) CHECK(m20[i] == doctest::Approx(2.0 * m10[i]).epsilon(1e-14));
  CHECK(values(tape, g.init_decoder(enc, 20).hidden) == values(tape, enc.final_bwd_hidden));

  const Model linit = tiny_model(LcVariant::len_linit);
  ad::Tape t2;
  Graph g2(t2, linit);
  const auto enc2 = g2.encode(kSource);
  for (double x : t2.value(g2.init_decoder(enc2, 0).memory)) CHECK(x == 0.0);

  const Model mc = tiny_model(LcVariant::len_mc);
  ad::Tape t3;
  Graph g3(t3, mc);
  const auto enc3 = g3.encode(kSource);
  CHECK(values(t3, g3.init_decoder(enc3, 30).memory) == values(t3, enc3.final_bwd_memory));
}

TEST_CASE("attention") {
  const Model m = tiny_model(LcVariant::none);
  ad::Tape tape;
  Graph g(tape, m);
  const auto one = g.encode(TokenIds{6});
  const auto a1 = g.attention(one.final_bwd_hidden, one);
  CHECK(values(tape, a1.weights) == std::vector<double>{1.0});
  CHECK(values(tape, a1.context) == values(tape, one.states[0]));

  const auto enc = g.encode(kSource);
  const auto w = values(tape, g.attention(enc.final_bwd_hidden, enc).weights);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double x : w) CHECK(x >= 0.0);

  Model flat = tiny_model(LcVariant::none);
  std::fill(flat.params.att_v.mutable_values().begin(), flat.params.att_v.mutable_values().end(), 0.0);
  ad::Tape t2;
  Graph g2(t2, flat);
  const auto enc2 = g2.encode(kSource);
  for (double x : t2.value(g2.attention(enc2.final_bwd_hidden, enc2).weights)) CHECK(x == doctest::Approx(0.2));
}

TEST_CASE("decode_step") {
  const Model emb = tiny_model(LcVariant::len_emb);
  ad::Tape tape;
  Graph g(tape, emb);
  const auto enc = g.encode(kSource);
  auto s10 = g.init_decoder(enc, 10);
  auto s50 = g.init_decoder(enc, 50);
  const auto o10 = g.decode_step(enc, s10, kBos);
  const auto o50 = g.decode_step(enc, s50, kBos);
  CHECK(values(tape, o10.logits) != values(tape, o50.logits));
  CHECK(o10.state.length == 10);
  double total = 0.0;
  for (double lp : tape.value(o10.logprobs)) total += std::exp(lp);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // Bucket index clamps at L - 1.
  auto far = s10;
  far.length = 500;
  auto edge = s10;
  edge.length = 63;
  CHECK(values(tape, g.decode_step(enc, far, kBos).logits) == values(tape, g.decode_step(enc, edge, kBos).logits));
  CHECK_THROWS_AS(g.decode_step(enc, s10, 20), std::out_of_range);
}

TEST_CASE("LenMC at zero length equals the base decoder") {
  const Model base = tiny_model(LcVariant::none);
  const Model mc = tiny_model(LcVariant::len_mc);
  ad::Tape tb, tm;
  Graph gb(tb, base), gm(tm, mc);
  const auto eb = gb.encode(kSource);
  const auto em = gm.encode(kSource);
  auto sb = gb.init_decoder(eb, 0);
  auto sm = gm.init_decoder(em, 0);
  TokenId prev = kBos;
  for (int t = 0; t < 4; ++t) {
    const auto ob = gb.decode_step(eb, sb, prev);
    const auto om = gm.decode_step(em, sm, prev);
    CHECK(values(tb, ob.logits) == values(tm, om.logits));
    sb = ob.state;
    sm = om.state;
    prev = static_cast<TokenId>(5 + t);
  }
}

TEST_CASE("None ignores the desired length") {
  const Model m = tiny_model(LcVariant::none);
  CHECK(first_step_logits(m, kSource, 10) == first_step_logits(m, kSource, 60));
}

TEST_CASE("WLI logits depend on the length only through the initial memory") {
  const Model m = tiny_model(LcVariant::len_linit);
  ad::Tape tape;
  Graph g(tape, m);
  const auto enc = g.encode(kSource);
  auto state = g.init_decoder(enc, 30);
  auto relabeled = state;
  relabeled.length = 5;
  CHECK(values(tape, g.decode_step(enc, state, kBos).logits) ==
        values(tape, g.decode_step(enc, relabeled, kBos).logits));
}

TEST_CASE("ml_loss") {
  const Vocabulary vocab = tiny_vocab();
  SUBCASE("certain model gives zero loss") {
    Model m = tiny_model(LcVariant::none);
    std::fill(m.params.out_w.mutable_values().begin(), m.params.out_w.mutable_values().end(), 0.0);
    m.params.out_b.mutable_values()[kEos] = 1000.0;
    const std::vector<TeacherForcedExample> batch{make_example(kSource, TokenIds{}, vocab, LcVariant::none)};
    ad::Tape tape;
    CHECK(tape.item(ml_loss(tape, m, batch)) == 0.0);
  }
  SUBCASE("uniform predictor") {
    Model m = tiny_model(LcVariant::len_emb);
    std::fill(m.params.out_w.mutable_values().begin(), m.params.out_w.mutable_values().end(), 0.0);
    std::fill(m.params.out_b.mutable_values().begin(), m.params.out_b.mutable_values().end(), 0.0);
    const std::vector<TeacherForcedExample> batch{
        make_example(kSource, TokenIds{5, 6}, vocab, LcVariant::len_emb),
        make_example(kSource, TokenIds{7, 8, 9, 10}, vocab, LcVariant::len_emb)};
    ad::Tape tape;
    CHECK(tape.item(ml_loss(tape, m, batch)) == doctest::Approx((3 + 5) * std::log(20.0) / 2).epsilon(1e-12));
  }
  SUBCASE("errors") {
    const Model m = tiny_model(LcVariant::len_mc);
    auto ex = make_example(kSource, TokenIds{5, 6}, vocab, LcVariant::len_mc);
    CHECK(ex.lengths.front() == vocab.charlen(5) + vocab.charlen(6));
    auto short_schedule = ex;
    short_schedule.lengths.pop_back();
    ad::Tape t1;
    CHECK_THROWS_AS(ml_loss(t1, m, std::vector{short_schedule}), std::invalid_argument);
    auto no_eos = ex;
    no_eos.reference.back() = 5;
    ad::Tape t2;
    CHECK_THROWS_AS(ml_loss(t2, m, std::vector{no_eos}), std::invalid_argument);
  }
}

TEST_CASE("ml_loss gradient matches finite differences") {
  const Vocabulary vocab = tiny_vocab();
  for (auto variant : lcseq::testing::kAllVariants) {
    INFO(to_string(variant));
    Model m = lcseq::testing::well_conditioned_model(variant);
    const std::vector<TeacherForcedExample> batch{make_example(kSource, TokenIds{5, 11, 6}, vocab, variant)};
    const auto params = lcseq::testing::trainable(m);
    const double err = ad::finite_difference_check([&](ad::Tape& t) { return ml_loss(t, m, batch); }, params,
                                                   1e-2, ad::Stencil::fourth_order);
    CHECK(err < 1e-4);
  }
}

}  // TEST_SUITE
