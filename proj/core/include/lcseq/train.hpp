#pragma once

// Adam, gradient clipping, the maximum-likelihood loop, and the
// policy-gradient fine-tuning loop with validation-based model selection.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcseq/autodiff.hpp"
#include "lcseq/data.hpp"
#include "lcseq/rl.hpp"
#include "lcseq/seq2seq.hpp"

namespace lcseq {

enum class Phase { ml, rl };
std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view text);

struct TrainConfig {
  Phase phase = Phase::ml;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;             // ml
  std::size_t max_iterations = 6000;   // rl
  std::size_t anneal_every = 4;        // ml: epochs between learning-rate halvings
  double anneal_factor = 0.5;
  double clip_lo = -10.0;
  double clip_hi = 10.0;
  std::size_t eval_every = 2000;       // rl
  RewardShaper shaper;
  NeutralizeMode neutralize = NeutralizeMode::baseline;
  LengthRange target_lengths;          // rl desired-length sampling range
  std::vector<std::size_t> probe_lengths{25, 45, 65};  // rl validation probes
  std::size_t valid_limit = 0;         // 0 = whole validation set
  std::optional<LcVariant> variant;    // when set, the model must match
  std::uint64_t seed = 1;

  /// ml: lr 1e-3; rl: lr 1e-5, eval every 2000 iterations.
  static TrainConfig defaults(Phase phase);
  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::map<std::string, std::vector<double>, std::less<>> first;
  std::map<std::string, std::vector<double>, std::less<>> second;
};

/// Elementwise clamp into [lo, hi].
void clip_gradients(ad::GradientMap& grads, double lo = -10.0, double hi = 10.0);

/// Bias-corrected Adam update. Tensors without requires_grad are left alone;
/// trainable tensors missing from `grads` see a zero gradient.
void adam_step(ModelParams& params, const ad::GradientMap& grads, AdamState& state, double lr);

/// One structured log line: space-separated key=value fields.
class LogRecord {
 public:
  LogRecord& add(std::string_view key, std::string_view value);
  LogRecord& add(std::string_view key, double value);
  LogRecord& add(std::string_view key, std::size_t value);
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

class TrainLog {
 public:
  explicit TrainLog(std::ostream* sink = nullptr, std::string prefix = "")
      : sink_(sink), prefix_(std::move(prefix)) {}
  /// Records the line as `prefix fields` when a prefix is set.
  void emit(const LogRecord& record);
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::ostream* sink_;
  std::string prefix_;
  std::vector<std::string> lines_;
};

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> valid_loss;
};

struct MlOutcome {
  Model model;  // best validation loss, or the last epoch without validation data
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
};

struct EvalPoint {
  std::size_t iteration = 0;
  double cumulative_rouge = 0.0;  // R1 + R2 + RL
  double svar = 0.0;
};

struct RlOutcome {
  Model model;  // best cumulative validation ROUGE; the final model without validation data
  std::vector<EvalPoint> evals;
  std::optional<std::size_t> best_iteration;
};

/// Mean teacher-forced negative log-likelihood per example.
double mean_nll(const Model& model, std::span<const TeacherForcedExample> data);

MlOutcome train_ml(const TrainConfig& config, const Corpus& train, const Corpus& valid, const Vocabulary& vocab,
                   Model model, TrainLog& log);

RlOutcome train_rl(const TrainConfig& config, const Corpus& train, const Corpus& valid, const Vocabulary& vocab,
                   Model model, TrainLog& log);

}  // namespace lcseq
