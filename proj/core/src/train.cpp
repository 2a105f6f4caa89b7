#include "lcseq/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "lcseq/evaluation.hpp"
#include "lcseq/metrics.hpp"

namespace lcseq {

std::string_view to_string(Phase phase) { return phase == Phase::ml ? "ml" : "rl"; }

Phase parse_phase(std::string_view text) {
  if (text == "ml") return Phase::ml;
  if (text == "rl") return Phase::rl;
  throw std::invalid_argument("phase must be 'ml' or 'rl'");
}

TrainConfig TrainConfig::defaults(Phase phase) {
  TrainConfig c;
  c.phase = phase;
  if (phase == Phase::rl) {
    c.lr = 1e-5;
    c.eval_every = 2000;
  }
  return c;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  if (!(clip_lo < clip_hi)) throw std::invalid_argument("clip bounds must satisfy lo < hi");
  if (anneal_every == 0) throw std::invalid_argument("anneal_every must be at least 1");
  if (eval_every == 0) throw std::invalid_argument("eval_every must be at least 1");
  if (target_lengths.lo > target_lengths.hi) throw std::invalid_argument("target length range is empty");
  if (phase == Phase::rl && probe_lengths.empty()) throw std::invalid_argument("rl phase needs probe lengths");
  shaper.validate();
}

// ---------------------------------------------------------------- optimizer

void clip_gradients(ad::GradientMap& grads, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clip bounds must satisfy lo < hi");
  for (auto& [name, g] : grads) {
    for (double& v : g) v = std::clamp(v, lo, hi);
  }
}

void adam_step(ModelParams& params, const ad::GradientMap& grads, AdamState& state, double lr) {
  for (const auto& [name, g] : grads) {
    const ad::Tensor& t = params.at(name);
    if (g.size() != t.size()) throw ad::ShapeError("gradient for " + name + " does not match parameter shape");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, tensor] : params.named()) {
    if (!tensor->requires_grad()) continue;
    auto values = tensor->mutable_values();
    auto& m = state.first[name];
    auto& v = state.second[name];
    if (m.empty()) {
      m.assign(values.size(), 0.0);
      v.assign(values.size(), 0.0);
    }
    const auto it = grads.find(name);
    const std::vector<double>* g = it == grads.end() ? nullptr : &it->second;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

// ---------------------------------------------------------------- logging

LogRecord& LogRecord::add(std::string_view key, std::string_view value) {
  if (!text_.empty()) text_ += ' ';
  text_.append(key);
  text_ += '=';
  text_.append(value);
  return *this;
}

LogRecord& LogRecord::add(std::string_view key, double value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 8);
  return add(key, std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
}

LogRecord& LogRecord::add(std::string_view key, std::size_t value) { return add(key, std::to_string(value)); }

void TrainLog::emit(const LogRecord& record) {
  lines_.push_back(prefix_.empty() ? record.str() : prefix_ + ' ' + record.str());
  if (sink_) *sink_ << lines_.back() << '\n' << std::flush;
}

// ---------------------------------------------------------------- ML

namespace {

std::vector<TeacherForcedExample> make_examples(const Corpus& corpus, const Vocabulary& vocab, LcVariant variant,
                                                std::size_t limit = 0) {
  std::vector<TeacherForcedExample> out;
  const std::size_t n = limit ? std::min(limit, corpus.size()) : corpus.size();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(make_example(corpus.pairs[i], vocab, variant));
  return out;
}

void check_variant(const TrainConfig& config, const Model& model) {
  if (config.variant && *config.variant != model.config.variant) {
    throw std::invalid_argument("checkpoint variant " + std::string(to_string(model.config.variant)) +
                                " does not match requested variant " + std::string(to_string(*config.variant)));
  }
}

}  // namespace

double mean_nll(const Model& model, std::span<const TeacherForcedExample> data) {
  if (data.empty()) throw std::invalid_argument("mean_nll: empty data");
  double total = 0.0;
  for (const auto& ex : data) {
    ad::Tape tape;
    Graph graph(tape, model);
    const EncoderOutput enc = graph.encode(ex.source);
    total -= tape.item(graph.sequence_logprob(enc, ex.lengths.front(), ex.reference, ex.lengths));
  }
  return total / static_cast<double>(data.size());
}

MlOutcome train_ml(const TrainConfig& config, const Corpus& train, const Corpus& valid, const Vocabulary& vocab,
                   Model model, TrainLog& log) {
  config.validate();
  if (config.phase != Phase::ml) throw std::invalid_argument("train_ml needs an ml-phase config");
  if (train.empty()) throw std::invalid_argument("train_ml: empty training corpus");
  check_variant(config, model);

  const LcVariant variant = model.config.variant;
  const auto examples = make_examples(train, vocab, variant);
  const auto valid_examples = valid.empty() ? std::vector<TeacherForcedExample>{}
                                            : make_examples(valid, vocab, variant, config.valid_limit);

  MlOutcome out;
  out.model = model;
  std::optional<double> best_valid;
  AdamState adam;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr =
        config.lr * std::pow(config.anneal_factor, static_cast<double>((epoch - 1) / config.anneal_every));
    Rng shuffle_rng = make_stream(config.seed, epoch, 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_nll = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      ad::GradientMap grads;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = examples[order[k]];
        ad::Tape tape;
        Graph graph(tape, model);
        const EncoderOutput enc = graph.encode(ex.source);
        const ad::Var logp = graph.sequence_logprob(enc, ex.lengths.front(), ex.reference, ex.lengths);
        epoch_nll -= tape.item(logp);
        tape.backward_into(tape.neg(logp), grads, scale);
      }
      clip_gradients(grads, config.clip_lo, config.clip_hi);
      adam_step(model.params, grads, adam, lr);
    }

    EpochStats stats{epoch, lr, epoch_nll / static_cast<double>(examples.size()), std::nullopt};
    if (!valid_examples.empty()) stats.valid_loss = mean_nll(model, valid_examples);
    out.epochs.push_back(stats);

    LogRecord rec;
    rec.add("phase", "ml").add("variant", to_string(variant)).add("epoch", epoch).add("lr", lr).add("train_loss",
                                                                                                  stats.train_loss);
    if (stats.valid_loss) rec.add("valid_loss", *stats.valid_loss);

    const bool better = !stats.valid_loss || !best_valid || *stats.valid_loss < *best_valid;
    if (better) {
      if (stats.valid_loss) best_valid = stats.valid_loss;
      out.model = model;
      out.best_epoch = epoch;
    }
    rec.add("best_epoch", out.best_epoch);
    log.emit(rec);
  }
  return out;
}

// ---------------------------------------------------------------- RL

RlOutcome train_rl(const TrainConfig& config, const Corpus& train, const Corpus& valid, const Vocabulary& vocab,
                   Model model, TrainLog& log) {
  config.validate();
  if (config.phase != Phase::rl) throw std::invalid_argument("train_rl needs an rl-phase config");
  if (train.empty()) throw std::invalid_argument("train_rl: empty training corpus");
  check_variant(config, model);

  const auto train_data = encode_corpus(train, vocab);
  std::vector<EncodedPair> valid_data = encode_corpus(valid, vocab);
  if (config.valid_limit && valid_data.size() > config.valid_limit) valid_data.resize(config.valid_limit);

  RlOutcome out;
  out.model = model;
  std::optional<double> best_score;
  AdamState adam;
  const double scale = 1.0 / static_cast<double>(config.batch_size);
  std::uniform_int_distribution<std::size_t> pick_source(0, train_data.size() - 1);

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    Rng batch_rng = make_stream(config.seed, it, config.batch_size);
    std::vector<SampleResult> batch;
    batch.reserve(config.batch_size);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const EncodedPair& ex = train_data[pick_source(batch_rng)];
      Rng rng = make_stream(config.seed, it, b);
      const std::size_t desired = sample_target_length(rng, config.target_lengths);
      ad::Tape tape;
      Graph graph(tape, model);
      const EncoderOutput enc = graph.encode(ex.source);
      const SampleResult greedy = decode(graph, enc, vocab, desired, DecodeMode::greedy, nullptr);
      SampleResult sample = decode(graph, enc, vocab, desired, DecodeMode::multinomial, &rng);
      sample.source = ex.source;
      sample.reward_raw = reward(sample.content(), ex.reference);
      sample.baseline_reward = reward(greedy.content(), ex.reference);
      batch.push_back(std::move(sample));
    }
    Rng shape_rng = make_stream(config.seed, it, config.batch_size + 1);
    shape_rewards(batch, config.shaper, shape_rng, config.neutralize);

    ad::GradientMap grads;
    std::size_t contributing = 0;
    double raw = 0.0, shaped = 0.0, base = 0.0, err = 0.0;
    for (const auto& s : batch) {
      raw += *s.reward_raw;
      shaped += *s.reward_shaped;
      base += *s.baseline_reward;
      err += static_cast<double>(s.length_error);
      // Zero-advantage samples contribute exactly zero gradient.
      if (loss_coefficient(s) == 0.0) continue;
      ++contributing;
      ad::Tape tape;
      tape.backward_into(scst_loss(tape, model, vocab, std::span(&s, 1)), grads, scale);
    }
    if (!grads.empty()) {
      clip_gradients(grads, config.clip_lo, config.clip_hi);
      adam_step(model.params, grads, adam, config.lr);
    }

    const double n = static_cast<double>(batch.size());
    LogRecord rec;
    rec.add("phase", "rl")
        .add("iteration", it)
        .add("shaper", config.shaper.to_string())
        .add("reward", raw / n)
        .add("shaped_reward", shaped / n)
        .add("baseline_reward", base / n)
        .add("length_error", err / n)
        .add("contributing", contributing);

    if (!valid_data.empty() && (it % config.eval_every == 0 || it == config.max_iterations)) {
      const Evaluation ev = evaluate(valid_data, config.probe_lengths, greedy_decoder(model, vocab), vocab);
      const EvalPoint point{it, ev.overall.cumulative_rouge(), ev.overall.svar};
      out.evals.push_back(point);
      if (!best_score || point.cumulative_rouge > *best_score) {
        best_score = point.cumulative_rouge;
        out.model = model;
        out.best_iteration = it;
      }
      rec.add("valid_cumulative_rouge", point.cumulative_rouge).add("valid_svar", point.svar);
    }
    log.emit(rec);
  }
  if (valid_data.empty()) out.model = model;
  return out;
}

}  // namespace lcseq
