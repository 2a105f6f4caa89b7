#include "doctest.h"

#include <cmath>
#include <sstream>

#include "lcseq/evaluation.hpp"
#include "lcseq/train.hpp"
#include "test_support.hpp"

using namespace lcseq;
using lcseq::testing::tiny_model;

namespace {

struct SmallTask {
  Corpus train;
  Corpus valid;
  Vocabulary vocab;
};

SmallTask small_task(std::size_t n_train, std::size_t n_valid) {
  Corpus all = generate_synthetic({.seed = 5, .n_pairs = n_train + n_valid, .skew = 0.5});
  SmallTask t;
  t.train.pairs.assign(all.pairs.begin(), all.pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
  t.valid.pairs.assign(all.pairs.begin() + static_cast<std::ptrdiff_t>(n_train), all.pairs.end());
  t.valid.split = Split::valid;
  t.vocab = build_vocab(t.train, 1000);
  return t;
}

ModelConfig small_config(const Vocabulary& vocab, LcVariant variant, std::size_t dim = 8) {
  ModelConfig c;
  c.embed_dim = dim;
  c.hidden_dim = dim;
  c.vocab_size = vocab.size();
  c.variant = variant;
  c.max_decode_tokens = 10;
  c.rng_seed = 3;
  return c;
}

TrainConfig rl_config(std::size_t iterations) {
  TrainConfig c = TrainConfig::defaults(Phase::rl);
  c.lr = 1e-3;
  c.batch_size = 4;
  c.max_iterations = iterations;
  c.eval_every = 2;
  c.target_lengths = {10, 60};
  c.probe_lengths = {15, 35, 55};
  return c;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("config defaults and validation") {
  const auto ml = TrainConfig::defaults(Phase::ml);
  CHECK(ml.lr == 1e-3);
  CHECK(ml.batch_size == 64);
  CHECK(ml.anneal_every == 4);
  CHECK(ml.anneal_factor == 0.5);
  CHECK(ml.clip_lo == -10.0);
  CHECK(ml.clip_hi == 10.0);
  const auto rl = TrainConfig::defaults(Phase::rl);
  CHECK(rl.lr == 1e-5);
  CHECK(rl.eval_every == 2000);
  CHECK(parse_phase("rl") == Phase::rl);
  CHECK_THROWS_AS(parse_phase("mle"), std::invalid_argument);

  auto bad = ml;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ml;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ml;
  bad.clip_lo = 10.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("clip_gradients") {
  ad::GradientMap g{{"a", {15.0, -15.0, 3.5}}};
  clip_gradients(g);
  CHECK(g["a"] == std::vector<double>{10.0, -10.0, 3.5});
  clip_gradients(g, -1.0, 2.0);
  CHECK(g["a"] == std::vector<double>{2.0, -1.0, 2.0});
  CHECK_THROWS_AS(clip_gradients(g, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Model m = tiny_model(LcVariant::len_init);
    const ModelParams before = m.params;
    AdamState state;
    adam_step(m.params, {}, state, 1e-2);
    CHECK(m.params == before);
    CHECK(state.step == 1);
  }
  SUBCASE("first step moves each coordinate by lr against the gradient sign") {
    Model m = tiny_model(LcVariant::none);
    const ModelParams before = m.params;
    ad::GradientMap g;
    g["out.b"] = std::vector<double>(20, 0.0);
    for (std::size_t i = 0; i < 20; ++i) g["out.b"][i] = i % 2 ? 0.5 : -2.0;
    AdamState state;
    adam_step(m.params, g, state, 1e-3);
    for (std::size_t i = 0; i < 20; ++i) {
      const double delta = m.params.out_b.values()[i] - before.out_b.values()[i];
      CHECK(delta == doctest::Approx(i % 2 ? -1e-3 : 1e-3).epsilon(1e-6));
    }
    CHECK(m.params.embed == before.embed);
  }
  SUBCASE("fixed Gaussian vector is never updated") {
    Model m = tiny_model(LcVariant::len_mc);
    const ad::Tensor gauss = *m.params.len_gauss;
    AdamState state;
    for (int i = 0; i < 100; ++i) {
      ad::GradientMap g;
      for (const auto& [name, t] : m.params.named()) g[name] = std::vector<double>(t->size(), 1.0);
      adam_step(m.params, g, state, 1e-2);
    }
    CHECK(*m.params.len_gauss == gauss);
  }
  SUBCASE("shape mismatch") {
    Model m = tiny_model(LcVariant::none);
    AdamState state;
    CHECK_THROWS_AS(adam_step(m.params, {{"out.b", {1.0, 2.0}}}, state, 1e-3), ad::ShapeError);
  }
}

TEST_CASE("log records") {
  std::ostringstream sink;
  TrainLog log(&sink, "run=3");
  log.emit(LogRecord().add("phase", "ml").add("epoch", std::size_t{2}).add("loss", 0.25));
  CHECK(sink.str() == "run=3 phase=ml epoch=2 loss=0.25\n");
  CHECK(log.lines() == std::vector<std::string>{"run=3 phase=ml epoch=2 loss=0.25"});
}

TEST_CASE("ML overfits a tiny corpus") {
  const SmallTask task = small_task(10, 0);
  TrainConfig c = TrainConfig::defaults(Phase::ml);
  c.epochs = 200;
  c.lr = 3e-3;
  c.batch_size = 2;
  c.anneal_every = 50;
  const Model init = Model::create(small_config(task.vocab, LcVariant::len_emb, 32));
  const auto examples = [&] {
    std::vector<TeacherForcedExample> out;
    for (const auto& p : task.train.pairs) out.push_back(make_example(p, task.vocab, LcVariant::len_emb));
    return out;
  }();
  const double initial = mean_nll(init, examples);
  TrainLog log;
  const MlOutcome out = train_ml(c, task.train, Corpus{}, task.vocab, init, log);
  REQUIRE(out.epochs.size() == 200);
  CHECK(out.best_epoch == 200);
  CHECK(mean_nll(out.model, examples) < 0.1 * initial);
  CHECK(out.epochs[50].lr == doctest::Approx(1.5e-3));
}

TEST_CASE("ML determinism, selection, and errors") {
  const SmallTask task = small_task(40, 10);
  TrainConfig c = TrainConfig::defaults(Phase::ml);
  c.epochs = 3;
  c.batch_size = 8;
  const Model init = Model::create(small_config(task.vocab, LcVariant::len_linit));
  TrainLog a, b;
  const auto ra = train_ml(c, task.train, task.valid, task.vocab, init, a);
  const auto rb = train_ml(c, task.train, task.valid, task.vocab, init, b);
  CHECK(a.lines() == b.lines());
  CHECK(ra.model.params == rb.model.params);
  CHECK(a.lines().size() == 3);
  double best = 1e300;
  for (const auto& e : ra.epochs) best = std::min(best, *e.valid_loss);
  CHECK(*ra.epochs[ra.best_epoch - 1].valid_loss == best);

  CHECK_THROWS_AS(train_ml(c, Corpus{}, task.valid, task.vocab, init, a), std::invalid_argument);
  auto wrong = c;
  wrong.variant = LcVariant::len_mc;
  CHECK_THROWS_AS(train_ml(wrong, task.train, task.valid, task.vocab, init, a), std::invalid_argument);
  CHECK_THROWS_AS(train_ml(rl_config(1), task.train, task.valid, task.vocab, init, a), std::invalid_argument);
}

TEST_CASE("None ignores the length inputs") {
  const SmallTask task = small_task(12, 0);
  const Model m = Model::create(small_config(task.vocab, LcVariant::none));
  std::vector<TeacherForcedExample> examples, permuted;
  for (const auto& p : task.train.pairs) examples.push_back(make_example(p, task.vocab, LcVariant::none));
  permuted = examples;
  for (std::size_t i = 0; i < permuted.size(); ++i) {
    for (auto& l : permuted[i].lengths) l = (l * 7 + i * 13) % 90;
  }
  CHECK(mean_nll(m, examples) == mean_nll(m, permuted));
}

TEST_CASE("RL loop") {
  const SmallTask task = small_task(30, 6);
  const Model init = Model::create(small_config(task.vocab, LcVariant::len_init));

  SUBCASE("zero iterations return the input model") {
    TrainLog log;
    const auto out = train_rl(rl_config(0), task.train, task.valid, task.vocab, init, log);
    CHECK(out.model.params == init.params);
    CHECK(out.evals.empty());
  }
  SUBCASE("selection keeps the best validation point") {
    auto c = rl_config(6);
    c.shaper = RewardShaper::mts(4);
    TrainLog log;
    const auto out = train_rl(c, task.train, task.valid, task.vocab, init, log);
    REQUIRE(out.evals.size() == 3);
    CHECK(out.evals.back().iteration == 6);
    REQUIRE(out.best_iteration.has_value());
    double best = -1.0;
    for (const auto& e : out.evals) best = std::max(best, e.cumulative_rouge);
    const auto data = encode_corpus(task.valid, task.vocab);
    const Evaluation ev = evaluate(data, c.probe_lengths, greedy_decoder(out.model, task.vocab), task.vocab);
    CHECK(ev.overall.cumulative_rouge() == best);
    CHECK(log.lines().size() == 6);
  }
  SUBCASE("determinism") {
    auto c = rl_config(3);
    c.shaper = RewardShaper::scd(0.4);
    TrainLog a, b;
    const auto ra = train_rl(c, task.train, task.valid, task.vocab, init, a);
    const auto rb = train_rl(c, task.train, task.valid, task.vocab, init, b);
    CHECK(a.lines() == b.lines());
    CHECK(ra.model.params == rb.model.params);
  }
  SUBCASE("without validation data the final model is returned") {
    TrainLog log;
    const auto out = train_rl(rl_config(2), task.train, Corpus{}, task.vocab, init, log);
    CHECK(out.evals.empty());
    CHECK_FALSE(out.model.params == init.params);
  }
  SUBCASE("errors") {
    TrainLog log;
    auto c = rl_config(1);
    c.variant = LcVariant::len_emb;
    CHECK_THROWS_AS(train_rl(c, task.train, task.valid, task.vocab, init, log), std::invalid_argument);
    CHECK_THROWS_AS(train_rl(TrainConfig::defaults(Phase::ml), task.train, task.valid, task.vocab, init, log),
                    std::invalid_argument);
  }
}

}  // TEST_SUITE
