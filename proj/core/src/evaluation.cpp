#include "lcseq/evaluation.hpp"

#include <cmath>
#include <stdexcept>

#include "lcseq/lengths.hpp"

namespace lcseq {

std::vector<EncodedPair> encode_corpus(const Corpus& corpus, const Vocabulary& vocab) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.pairs) out.push_back({vocab.encode(p.source), vocab.encode(p.summary)});
  return out;
}

Decoder greedy_decoder(const Model& model, const Vocabulary& vocab) {
  return [&model, &vocab](std::span<const TokenId> source, std::size_t desired) {
    ad::Tape tape;
    Graph graph(tape, model);
    const EncoderOutput enc = graph.encode(source);
    return decode(graph, enc, vocab, desired, DecodeMode::greedy, nullptr).content();
  };
}

Evaluation evaluate(std::span<const EncodedPair> data, std::span<const std::size_t> probes, const Decoder& decoder,
                    const Vocabulary& vocab) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty data");
  if (probes.empty()) throw std::invalid_argument("evaluate: no probe lengths");
  Evaluation out;
  MetricsAccumulator pooled;
  for (std::size_t probe : probes) {
    MetricsAccumulator acc;
    for (const auto& ex : data) {
      const TokenIds produced = decoder(ex.source, probe);
      const std::size_t len = charlen(produced, vocab);
      acc.add(produced, ex.reference, len, probe);
      pooled.add(produced, ex.reference, len, probe);
    }
    out.probes.push_back({probe, acc.report()});
  }
  out.overall = pooled.report();
  return out;
}

std::vector<std::size_t> rescale_probes(std::span<const std::size_t> probes, LengthRange band) {
  constexpr double kLo = 20.0, kHi = 70.0;
  std::vector<std::size_t> out;
  for (std::size_t p : probes) {
    const double frac = (static_cast<double>(p) - kLo) / (kHi - kLo);
    const double v = static_cast<double>(band.lo) + frac * static_cast<double>(band.hi - band.lo);
    out.push_back(static_cast<std::size_t>(std::lround(std::max(0.0, v))));
  }
  return out;
}

}  // namespace lcseq
