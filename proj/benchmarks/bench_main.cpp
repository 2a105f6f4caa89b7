#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "lcseq/autodiff.hpp"
#include "lcseq/experiment.hpp"
#include "lcseq/metrics.hpp"
#include "lcseq/rl.hpp"
#include "lcseq/seq2seq.hpp"

namespace {

using namespace lcseq;

ad::Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = u(rng);
  return ad::Tensor({rows, cols}, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ad::Tensor a = random_matrix(1, n, 1);
  const ad::Tensor b = random_matrix(n, 4 * n, 2);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var out = tape.matmul(tape.constant(a), tape.constant(b));
    benchmark::DoNotOptimize(tape.value(out).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(4 * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

struct Fixture {
  Vocabulary vocab;
  Model model;
  TokenIds source;
};

Fixture make_fixture(LcVariant variant) {
  const DataSplits data = synthetic_splits(3, 200, 1, 1);
  Vocabulary vocab = build_vocab(data.train, 400);
  ModelConfig config;
  config.vocab_size = vocab.size();
  config.variant = variant;
  TokenIds source = vocab.encode(data.train.pairs.front().source);
  return {std::move(vocab), Model::create(config), std::move(source)};
}

void BM_GreedyDecode(benchmark::State& state) {
  const Fixture f = make_fixture(static_cast<LcVariant>(state.range(0)));
  Rng rng(1);
  for (auto _ : state) {
    SampleResult r = sample_sentence(f.model, f.vocab, f.source, 40, DecodeMode::greedy, rng);
    benchmark::DoNotOptimize(r.tokens.data());
  }
}
BENCHMARK(BM_GreedyDecode)
    ->Arg(static_cast<int>(LcVariant::none))
    ->Arg(static_cast<int>(LcVariant::len_init))
    ->Arg(static_cast<int>(LcVariant::len_mc))
    ->Unit(benchmark::kMicrosecond);

void BM_MlLossBackward(benchmark::State& state) {
  const DataSplits data = synthetic_splits(3, 64, 1, 1);
  const Vocabulary vocab = build_vocab(data.train, 400);
  ModelConfig config;
  config.vocab_size = vocab.size();
  config.variant = LcVariant::len_emb;
  const Model model = Model::create(config);
  std::vector<TeacherForcedExample> batch;
  for (const auto& p : data.train.pairs) batch.push_back(make_example(p, vocab, config.variant));
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var loss = ml_loss(tape, model, batch);
    ad::GradientMap grads = tape.backward(loss);
    benchmark::DoNotOptimize(grads.size());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_MlLossBackward)->Unit(benchmark::kMillisecond);

void BM_Rouge(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<TokenId> tok(4, 60);
  const auto n = static_cast<std::size_t>(state.range(0));
  TokenIds cand(n), ref(n);
  for (auto& t : cand) t = tok(rng);
  for (auto& t : ref) t = tok(rng);
  for (auto _ : state) benchmark::DoNotOptimize(reward(cand, ref));
}
BENCHMARK(BM_Rouge)->Arg(10)->Arg(30);

}  // namespace

BENCHMARK_MAIN();
