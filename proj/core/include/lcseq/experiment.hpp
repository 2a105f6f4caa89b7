#pragma once

// Run reports, data splits, and the variant x shaper x seed sweep.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcseq/data.hpp"
#include "lcseq/evaluation.hpp"
#include "lcseq/seq2seq.hpp"
#include "lcseq/train.hpp"

namespace lcseq {

// ---------------------------------------------------------------- reports

/// One row per probe length plus one "overall" row.
struct ReportRow {
  std::string variant;
  std::string shaper;
  std::string param;
  std::string probe;  // probe length, or "overall"
  MetricsReport metrics;
};

inline constexpr std::string_view kReportHeader = "variant,shaper,param,probe,rouge1,rouge2,rougeL,mean_rouge,svar,n";

std::vector<ReportRow> report_rows(const Evaluation& eval, std::string_view variant, std::string_view shaper,
                                   std::string_view param);
void write_report(std::ostream& out, const std::vector<ReportRow>& rows);

/// Fixed six-decimal rendering used in every report column.
std::string format_metric(double value);

// ---------------------------------------------------------------- data

struct DataSplits {
  Corpus train;
  Corpus valid;
  Corpus test;
};

/// One synthetic corpus of n_train + n_valid + n_test pairs, split in order.
DataSplits synthetic_splits(std::uint64_t seed, std::size_t n_train, std::size_t n_valid, std::size_t n_test,
                            double skew = 0.5);

// ---------------------------------------------------------------- sweep

/// "ml" (no fine-tuning) or a reward shaper.
struct SweepShaper {
  std::optional<RewardShaper> shaper;

  static SweepShaper parse(std::string_view text);
  std::string name() const;   // "ml", "scst", "mts", "scd"
  std::string param() const;  // "", "d_th=4", "lambda=0.8"
  std::string to_string() const;
  friend bool operator==(const SweepShaper&, const SweepShaper&) = default;
};

/// Comma-separated shapers. Bare "mts"/"scd" entries expand over the grid
/// values when any are given; otherwise they keep their defaults.
std::vector<SweepShaper> expand_shapers(std::string_view list, const std::vector<std::size_t>& d_th_grid,
                                        const std::vector<double>& lambda_grid);

struct SweepSpec {
  std::vector<LcVariant> variants;
  std::vector<SweepShaper> shapers;
  std::vector<std::uint64_t> seeds;
  ModelConfig model;       // vocab_size, variant and rng_seed are set per run
  TrainConfig ml;
  TrainConfig rl;          // shaper, variant and seed are set per run
  std::vector<std::size_t> probes{15, 35, 55};
  std::size_t test_limit = 0;  // 0 = whole test split
  /// When set, ML checkpoints are stored and reused here, keyed by variant and seed.
  std::string cache_dir;

  void validate() const;
};

struct SweepRun {
  LcVariant variant = LcVariant::none;
  SweepShaper shaper;
  std::uint64_t seed = 0;
  Evaluation eval;
};

/// One scatter point: seed mean and sample standard deviation (0 for one seed).
struct SweepPoint {
  LcVariant variant = LcVariant::none;
  SweepShaper shaper;
  std::size_t seeds = 0;
  double svar_mean = 0.0;
  double svar_std = 0.0;
  double rouge_mean = 0.0;
  double rouge_std = 0.0;
};

struct SweepResult {
  std::vector<SweepRun> runs;
  std::vector<SweepPoint> points;  // variants x shapers, in input order
};

/// Raised when a child run fails; the message names the configuration.
class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kSweepHeader =
    "variant,shaper,param,seeds,svar_mean,svar_std,rouge_mean,rouge_std";

SweepResult run_sweep(const SweepSpec& spec, const DataSplits& data, const Vocabulary& vocab,
                      std::ostream* log = nullptr);
void write_sweep(std::ostream& out, const std::vector<SweepPoint>& points);
/// Per-run rows in the report layout, with the seed appended to the shaper column.
void write_sweep_runs(std::ostream& out, const std::vector<SweepRun>& runs);

/// ML model for one (variant, seed), loaded from `cache_dir` when an entry
/// with identical configs and vocabulary exists.
Model ml_model_for(const SweepSpec& spec, LcVariant variant, std::uint64_t seed, const DataSplits& data,
                   const Vocabulary& vocab, std::ostream* log);

}  // namespace lcseq
