#pragma once

// Sampling, self-critical policy-gradient loss, and the length-aware reward
// shapers (threshold select and self-critical dropout).

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lcseq/autodiff.hpp"
#include "lcseq/data.hpp"
#include "lcseq/seq2seq.hpp"

namespace lcseq {

using Rng = std::mt19937_64;

/// Independent stream for element `index` of iteration `iteration`.
Rng make_stream(std::uint64_t seed, std::uint64_t iteration, std::uint64_t index);

enum class DecodeMode { greedy, multinomial };

struct SampleResult {
  TokenIds source;
  TokenIds tokens;  // EOS-terminated or truncated at max_decode_tokens
  std::vector<double> step_logprobs;
  std::size_t desired_len = 0;
  std::size_t produced_len = 0;
  std::size_t length_error = 0;
  std::optional<double> reward_raw;
  std::optional<double> reward_shaped;
  std::optional<double> baseline_reward;

  /// Emitted tokens without the trailing EOS.
  TokenIds content() const;
};

/// Decodes from an already-encoded source on `graph`'s tape. `rng` is only
/// consulted in multinomial mode.
SampleResult decode(Graph& graph, const EncoderOutput& enc, const Vocabulary& vocab, std::size_t l1,
                    DecodeMode mode, Rng* rng);

SampleResult sample_sentence(const Model& model, const Vocabulary& vocab, std::span<const TokenId> source,
                             std::size_t l1, DecodeMode mode, Rng& rng);

/// Index drawn from exp(logprobs) with one uniform variate.
std::size_t draw_categorical(std::span<const double> logprobs, Rng& rng);
/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> values);

struct LengthRange {
  std::size_t lo = 20;
  std::size_t hi = 70;
  friend bool operator==(const LengthRange&, const LengthRange&) = default;
};

/// Uniform integer in [range.lo, range.hi].
std::size_t sample_target_length(Rng& rng, LengthRange range = {});

struct RewardShaper {
  enum class Kind { scst, mts, scd };
  Kind kind = Kind::scst;
  std::size_t d_th = 8;
  double lambda = 0.4;

  static RewardShaper scst() { return {}; }
  static RewardShaper mts(std::size_t threshold) { return {Kind::mts, threshold, 0.4}; }
  static RewardShaper scd(double lam) { return {Kind::scd, 8, lam}; }

  void validate() const;
  /// "scst", "mts:<d_th>", "scd:<lambda>".
  std::string to_string() const;
  static RewardShaper parse(std::string_view text);
  std::string kind_name() const;
  std::string param_string() const;
  friend bool operator==(const RewardShaper&, const RewardShaper&) = default;
};

/// What a rejected reward becomes: the greedy baseline (zero advantage) or 0.
enum class NeutralizeMode { baseline, zero };
std::string_view to_string(NeutralizeMode mode);
NeutralizeMode parse_neutralize_mode(std::string_view text);

/// r_g when r_s > r_g and d_e > d_th, otherwise r_s.
double mts_shape(double r_s, double r_g, std::size_t d_e, std::size_t d_th);

/// Batch mean of the length errors.
double mean_length_error(std::span<const SampleResult> batch);
/// min(1, exp(-lambda * (d_e - mean_d_e))).
double keep_probability(double lambda, double d_e, double mean_d_e);

/// Sets reward_shaped on every sample. Requires reward_raw and baseline_reward.
void mts_shape_batch(std::span<SampleResult> batch, std::size_t d_th, NeutralizeMode mode = NeutralizeMode::baseline);
void scd_shape(std::span<SampleResult> batch, double lambda, Rng& rng, NeutralizeMode mode = NeutralizeMode::baseline);
void shape_rewards(std::span<SampleResult> batch, const RewardShaper& shaper, Rng& rng,
                   NeutralizeMode mode = NeutralizeMode::baseline);

/// baseline_reward - reward_shaped; the coefficient of the sample's log-likelihood.
double loss_coefficient(const SampleResult& sample);

/// (1/|batch|) * sum (r_baseline - r_shaped) * sum_t log p(y_t | y_<t, x, l_t),
/// replaying the frozen sampled tokens. Rewards are constants.
ad::Var scst_loss(ad::Tape& tape, const Model& model, const Vocabulary& vocab, std::span<const SampleResult> batch);

}  // namespace lcseq
