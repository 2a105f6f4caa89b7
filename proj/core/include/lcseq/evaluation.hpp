#pragma once

// Probe-length evaluation: decode every source at each desired length and
// score against the reference.

#include <functional>
#include <span>
#include <vector>

#include "lcseq/data.hpp"
#include "lcseq/metrics.hpp"
#include "lcseq/rl.hpp"
#include "lcseq/seq2seq.hpp"

namespace lcseq {

struct EncodedPair {
  TokenIds source;
  TokenIds reference;  // content tokens, no EOS
};

std::vector<EncodedPair> encode_corpus(const Corpus& corpus, const Vocabulary& vocab);

/// Produces content tokens (no EOS) for a source at a desired length.
using Decoder = std::function<TokenIds(std::span<const TokenId> source, std::size_t desired_len)>;

Decoder greedy_decoder(const Model& model, const Vocabulary& vocab);

struct ProbeMetrics {
  std::size_t probe = 0;
  MetricsReport metrics;
};

struct Evaluation {
  std::vector<ProbeMetrics> probes;
  /// ROUGE averaged over every (example, probe); svar pooled over all of them.
  MetricsReport overall;
};

Evaluation evaluate(std::span<const EncodedPair> data, std::span<const std::size_t> probes, const Decoder& decoder,
                    const Vocabulary& vocab);

/// Maps the 25/45/65 probe pattern from [20, 70] linearly onto `band`.
std::vector<std::size_t> rescale_probes(std::span<const std::size_t> probes, LengthRange band);

}  // namespace lcseq
