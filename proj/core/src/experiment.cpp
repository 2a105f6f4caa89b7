#include "lcseq/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>

#include "lcseq/checkpoint.hpp"
#include "lcseq/config.hpp"

namespace lcseq {

// ---------------------------------------------------------------- reports

std::string format_metric(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::vector<ReportRow> report_rows(const Evaluation& eval, std::string_view variant, std::string_view shaper,
                                   std::string_view param) {
  std::vector<ReportRow> rows;
  for (const auto& p : eval.probes) {
    rows.push_back({std::string(variant), std::string(shaper), std::string(param), std::to_string(p.probe), p.metrics});
  }
  rows.push_back({std::string(variant), std::string(shaper), std::string(param), "overall", eval.overall});
  return rows;
}

void write_report(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << kReportHeader << '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << r.variant << ',' << r.shaper << ',' << r.param << ',' << r.probe << ',' << format_metric(m.rouge1_f1)
        << ',' << format_metric(m.rouge2_f1) << ',' << format_metric(m.rougeL_f1) << ','
        << format_metric(m.mean_rouge()) << ',' << format_metric(m.svar) << ',' << m.n_examples << '\n';
  }
}

// ---------------------------------------------------------------- data

DataSplits synthetic_splits(std::uint64_t seed, std::size_t n_train, std::size_t n_valid, std::size_t n_test,
                            double skew) {
  if (n_train == 0 || n_valid == 0 || n_test == 0) throw std::invalid_argument("every split needs at least one pair");
  Corpus all = generate_synthetic({seed, n_train + n_valid + n_test, skew});
  DataSplits out;
  auto take = [&](Corpus& c, Split split, std::size_t from, std::size_t n) {
    c.split = split;
    c.pairs.assign(all.pairs.begin() + static_cast<std::ptrdiff_t>(from),
                   all.pairs.begin() + static_cast<std::ptrdiff_t>(from + n));
  };
  take(out.train, Split::train, 0, n_train);
  take(out.valid, Split::valid, n_train, n_valid);
  take(out.test, Split::test, n_train + n_valid, n_test);
  return out;
}

// ---------------------------------------------------------------- sweep shapers

SweepShaper SweepShaper::parse(std::string_view text) {
  if (text == "ml") return {};
  return {RewardShaper::parse(text)};
}

std::string SweepShaper::name() const { return shaper ? shaper->kind_name() : "ml"; }
std::string SweepShaper::param() const { return shaper ? shaper->param_string() : ""; }
std::string SweepShaper::to_string() const { return shaper ? shaper->to_string() : "ml"; }

std::vector<SweepShaper> expand_shapers(std::string_view list, const std::vector<std::size_t>& d_th_grid,
                                        const std::vector<double>& lambda_grid) {
  std::vector<SweepShaper> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    std::string_view item = list.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) throw std::invalid_argument("empty entry in shaper list");
    if (item == "mts" && !d_th_grid.empty()) {
      for (auto d : d_th_grid) out.push_back({RewardShaper::mts(d)});
    } else if (item == "scd" && !lambda_grid.empty()) {
      for (auto l : lambda_grid) {
        RewardShaper s = RewardShaper::scd(l);
        s.validate();
        out.push_back({s});
      }
    } else {
      out.push_back(SweepShaper::parse(item));
    }
    start = end + 1;
  }
  return out;
}

// ---------------------------------------------------------------- sweep

void SweepSpec::validate() const {
  if (variants.empty()) throw std::invalid_argument("sweep needs at least one variant");
  if (shapers.empty()) throw std::invalid_argument("sweep needs at least one shaper");
  if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
  if (probes.empty()) throw std::invalid_argument("sweep needs probe lengths");
  if (ml.phase != Phase::ml || rl.phase != Phase::rl) throw std::invalid_argument("sweep configs have the wrong phase");
  ml.validate();
  rl.validate();
}

namespace {

ModelConfig run_model_config(const SweepSpec& spec, LcVariant variant, std::uint64_t seed, const Vocabulary& vocab) {
  ModelConfig c = spec.model;
  c.vocab_size = vocab.size();
  c.variant = variant;
  c.rng_seed = seed;
  return c;
}

TrainConfig run_ml_config(const SweepSpec& spec, LcVariant variant, std::uint64_t seed) {
  TrainConfig c = spec.ml;
  c.variant = variant;
  c.seed = seed;
  return c;
}

std::string run_label(LcVariant variant, const SweepShaper& shaper, std::uint64_t seed) {
  return "variant=" + std::string(to_string(variant)) + " shaper=" + shaper.to_string() + " seed=" + std::to_string(seed);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

Model ml_model_for(const SweepSpec& spec, LcVariant variant, std::uint64_t seed, const DataSplits& data,
                   const Vocabulary& vocab, std::ostream* log) {
  const ModelConfig mc = run_model_config(spec, variant, seed, vocab);
  const TrainConfig tc = run_ml_config(spec, variant, seed);
  const std::string provenance = to_json(tc);

  std::string path;
  if (!spec.cache_dir.empty()) {
    std::filesystem::create_directories(spec.cache_dir);
    path = (std::filesystem::path(spec.cache_dir) /
            ("ml_" + std::string(to_string(variant)) + "_seed" + std::to_string(seed) + ".lcsq"))
               .string();
    if (std::filesystem::exists(path)) {
      try {
        Checkpoint ck = load_checkpoint(path);
        if (ck.model.config == mc && ck.vocab == vocab && ck.provenance == provenance && ck.phase == Phase::ml) {
          if (log) *log << "cache hit " << path << '\n';
          return ck.model;
        }
      } catch (const std::exception& e) {
        if (log) *log << "ignoring unreadable cache entry " << path << ": " << e.what() << '\n';
      }
    }
  }

  TrainLog train_log(log, "variant=" + std::string(to_string(variant)) + " seed=" + std::to_string(seed));
  MlOutcome ml = train_ml(tc, data.train, data.valid, vocab, Model::create(mc), train_log);
  if (!path.empty()) save_checkpoint({ml.model, vocab, provenance, seed, Phase::ml}, path);
  return std::move(ml.model);
}

SweepResult run_sweep(const SweepSpec& spec, const DataSplits& data, const Vocabulary& vocab, std::ostream* log) {
  spec.validate();
  std::vector<EncodedPair> test = encode_corpus(data.test, vocab);
  if (spec.test_limit && test.size() > spec.test_limit) test.resize(spec.test_limit);

  SweepResult result;
  for (LcVariant variant : spec.variants) {
    for (std::uint64_t seed : spec.seeds) {
      std::optional<Model> ml;
      for (const SweepShaper& shaper : spec.shapers) {
        const std::string label = run_label(variant, shaper, seed);
        try {
          if (!ml) ml = ml_model_for(spec, variant, seed, data, vocab, log);
          Model model = *ml;
          if (shaper.shaper) {
            TrainConfig rc = spec.rl;
            rc.shaper = *shaper.shaper;
            rc.variant = variant;
            rc.seed = seed;
            TrainLog train_log(log, label);
            model = train_rl(rc, data.train, data.valid, vocab, std::move(model), train_log).model;
          }
          Evaluation ev = evaluate(test, spec.probes, greedy_decoder(model, vocab), vocab);
          if (log) {
            *log << label << " test_mean_rouge=" << format_metric(ev.overall.mean_rouge())
                 << " test_svar=" << format_metric(ev.overall.svar) << '\n';
          }
          result.runs.push_back({variant, shaper, seed, std::move(ev)});
        } catch (const std::exception& e) {
          throw SweepError("sweep run failed (" + label + "): " + e.what());
        }
      }
    }
  }

  for (LcVariant variant : spec.variants) {
    for (const SweepShaper& shaper : spec.shapers) {
      std::vector<double> svars, rouges;
      for (const auto& run : result.runs) {
        if (run.variant == variant && run.shaper == shaper) {
          svars.push_back(run.eval.overall.svar);
          rouges.push_back(run.eval.overall.mean_rouge());
        }
      }
      result.points.push_back(
          {variant, shaper, svars.size(), mean(svars), sample_std(svars), mean(rouges), sample_std(rouges)});
    }
  }
  return result;
}

void write_sweep(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << kSweepHeader << '\n';
  for (const auto& p : points) {
    out << to_string(p.variant) << ',' << p.shaper.name() << ',' << p.shaper.param() << ',' << p.seeds << ','
        << format_metric(p.svar_mean) << ',' << format_metric(p.svar_std) << ',' << format_metric(p.rouge_mean)
        << ',' << format_metric(p.rouge_std) << '\n';
  }
}

void write_sweep_runs(std::ostream& out, const std::vector<SweepRun>& runs) {
  std::vector<ReportRow> rows;
  for (const auto& run : runs) {
    auto r = report_rows(run.eval, to_string(run.variant), run.shaper.name() + "@seed" + std::to_string(run.seed),
                         run.shaper.param());
    rows.insert(rows.end(), r.begin(), r.end());
  }
  write_report(out, rows);
}

}  // namespace lcseq
