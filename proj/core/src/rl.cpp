#include "lcseq/rl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "lcseq/lengths.hpp"

namespace lcseq {

Rng make_stream(std::uint64_t seed, std::uint64_t iteration, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

TokenIds SampleResult::content() const {
  TokenIds out = tokens;
  if (!out.empty() && out.back() == kEos) out.pop_back();
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t draw_categorical(std::span<const double> logprobs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    const double p = std::exp(logprobs[i]);
    if (p > 0.0) last_positive = i;
    cumulative += p;
    if (u < cumulative) return i;
  }
  return last_positive;  // rounding left u beyond the final cumulative sum
}

SampleResult decode(Graph& graph, const EncoderOutput& enc, const Vocabulary& vocab, std::size_t l1,
                    DecodeMode mode, Rng* rng) {
  const Model& model = graph.model();
  if (mode == DecodeMode::multinomial && rng == nullptr) throw std::invalid_argument("multinomial decoding needs an rng");
  const LengthClass cls = length_class(model.config.variant);
  ad::Tape& tape = graph.tape();

  SampleResult out;
  out.desired_len = l1;
  DecoderState state = graph.init_decoder(enc, l1);
  TokenId prev = kBos;
  for (std::size_t t = 0; t < model.config.max_decode_tokens; ++t) {
    const StepOutput step = graph.decode_step(enc, state, prev);
    const auto logprobs = tape.value(step.logprobs);
    const auto token = static_cast<TokenId>(mode == DecodeMode::greedy ? argmax(logprobs)
                                                                       : draw_categorical(logprobs, *rng));
    out.tokens.push_back(token);
    out.step_logprobs.push_back(logprobs[token]);
    if (token == kEos) break;
    state = step.state;
    state.length = next_length(cls, state.length, vocab.charlen(token));
    prev = token;
  }
  out.produced_len = charlen(out.tokens, vocab);
  out.length_error = abs_diff(out.desired_len, out.produced_len);
  return out;
}

SampleResult sample_sentence(const Model& model, const Vocabulary& vocab, std::span<const TokenId> source,
                             std::size_t l1, DecodeMode mode, Rng& rng) {
  ad::Tape tape;
  Graph graph(tape, model);
  const EncoderOutput enc = graph.encode(source);
  SampleResult out = decode(graph, enc, vocab, l1, mode, &rng);
  out.source.assign(source.begin(), source.end());
  return out;
}

std::size_t sample_target_length(Rng& rng, LengthRange range) {
  if (range.lo > range.hi) throw std::invalid_argument("target length range is empty");
  std::uniform_int_distribution<std::size_t> dist(range.lo, range.hi);
  return dist(rng);
}

// ---------------------------------------------------------------- shapers

void RewardShaper::validate() const {
  if (kind == Kind::scd && !(lambda > 0.0)) throw std::invalid_argument("SCD lambda must be positive");
}

std::string RewardShaper::kind_name() const {
  switch (kind) {
    case Kind::scst: return "scst";
    case Kind::mts: return "mts";
    case Kind::scd: return "scd";
  }
  return "?";
}

namespace {
std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
}  // namespace

std::string RewardShaper::param_string() const {
  switch (kind) {
    case Kind::scst: return "";
    case Kind::mts: return "d_th=" + std::to_string(d_th);
    case Kind::scd: return "lambda=" + format_double(lambda);
  }
  return "";
}

std::string RewardShaper::to_string() const {
  switch (kind) {
    case Kind::scst: return "scst";
    case Kind::mts: return "mts:" + std::to_string(d_th);
    case Kind::scd: return "scd:" + format_double(lambda);
  }
  return "?";
}

RewardShaper RewardShaper::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  const std::string_view value = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  auto bad = [&] { return std::invalid_argument("invalid shaper '" + std::string(text) + "'"); };
  RewardShaper s;
  if (kind == "scst") {
    if (!value.empty()) throw bad();
    return s;
  }
  if (kind == "mts") {
    s.kind = Kind::mts;
    if (!value.empty()) {
      auto res = std::from_chars(value.data(), value.data() + value.size(), s.d_th);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) throw bad();
    }
    return s;
  }
  if (kind == "scd") {
    s.kind = Kind::scd;
    if (!value.empty()) {
      auto res = std::from_chars(value.data(), value.data() + value.size(), s.lambda);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) throw bad();
    }
    s.validate();
    return s;
  }
  throw bad();
}

std::string_view to_string(NeutralizeMode mode) { return mode == NeutralizeMode::zero ? "zero" : "baseline"; }

NeutralizeMode parse_neutralize_mode(std::string_view text) {
  if (text == "baseline") return NeutralizeMode::baseline;
  if (text == "zero") return NeutralizeMode::zero;
  throw std::invalid_argument("neutralize mode must be 'baseline' or 'zero'");
}

double mts_shape(double r_s, double r_g, std::size_t d_e, std::size_t d_th) {
  return (r_s > r_g && d_e > d_th) ? r_g : r_s;
}

double mean_length_error(std::span<const SampleResult> batch) {
  if (batch.empty()) throw std::invalid_argument("mean length error of an empty batch");
  double total = 0.0;
  for (const auto& s : batch) total += static_cast<double>(s.length_error);
  return total / static_cast<double>(batch.size());
}

double keep_probability(double lambda, double d_e, double mean_d_e) {
  return std::min(1.0, std::exp(-lambda * (d_e - mean_d_e)));
}

namespace {

void require_rewards(const SampleResult& s) {
  if (!s.reward_raw || !s.baseline_reward) throw std::invalid_argument("sample is missing its reward or baseline");
}

double neutral(const SampleResult& s, NeutralizeMode mode) {
  return mode == NeutralizeMode::zero ? 0.0 : *s.baseline_reward;
}

}  // namespace

void mts_shape_batch(std::span<SampleResult> batch, std::size_t d_th, NeutralizeMode mode) {
  for (auto& s : batch) {
    require_rewards(s);
    const bool rejected = *s.reward_raw > *s.baseline_reward && s.length_error > d_th;
    s.reward_shaped = rejected ? neutral(s, mode) : *s.reward_raw;
  }
}

void scd_shape(std::span<SampleResult> batch, double lambda, Rng& rng, NeutralizeMode mode) {
  if (!(lambda > 0.0)) throw std::invalid_argument("SCD lambda must be positive");
  const double mean = mean_length_error(batch);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& s : batch) {
    require_rewards(s);
    const double d_e = static_cast<double>(s.length_error);
    bool keep = true;
    if (d_e > mean) keep = unit(rng) < keep_probability(lambda, d_e, mean);
    s.reward_shaped = keep ? *s.reward_raw : neutral(s, mode);
  }
}

void shape_rewards(std::span<SampleResult> batch, const RewardShaper& shaper, Rng& rng, NeutralizeMode mode) {
  shaper.validate();
  switch (shaper.kind) {
    case RewardShaper::Kind::scst:
      for (auto& s : batch) {
        require_rewards(s);
        s.reward_shaped = s.reward_raw;
      }
      break;
    case RewardShaper::Kind::mts: mts_shape_batch(batch, shaper.d_th, mode); break;
    case RewardShaper::Kind::scd: scd_shape(batch, shaper.lambda, rng, mode); break;
  }
}

double loss_coefficient(const SampleResult& s) {
  if (!s.reward_shaped || !s.baseline_reward) throw std::invalid_argument("sample is missing shaped or baseline reward");
  return *s.baseline_reward - *s.reward_shaped;
}

ad::Var scst_loss(ad::Tape& tape, const Model& model, const Vocabulary& vocab, std::span<const SampleResult> batch) {
  if (batch.empty()) throw std::invalid_argument("scst_loss: empty batch");
  Graph graph(tape, model);
  const LengthClass cls = length_class(model.config.variant);
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<ad::Var> terms;
  for (const auto& s : batch) {
    const double coeff = loss_coefficient(s);
    if (s.tokens.empty()) throw std::invalid_argument("scst_loss: sample has no tokens");
    const EncoderOutput enc = graph.encode(s.source);
    const LengthSchedule sched = schedule(cls, s.desired_len, s.tokens, vocab);
    const ad::Var logp = graph.sequence_logprob(enc, s.desired_len, s.tokens, sched.steps);
    terms.push_back(tape.scalar_mul(logp, coeff * scale));
  }
  return terms.size() == 1 ? terms.front() : tape.sum(tape.concat(terms));
}

}  // namespace lcseq
