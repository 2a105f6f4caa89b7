#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "lcseq/checkpoint.hpp"
#include "lcseq/config.hpp"
#include "lcseq/experiment.hpp"
#include "lcseq/lengths.hpp"

namespace lcseq::cli {

namespace {

using Json = nlohmann::json;

constexpr std::size_t kDefaultVocab = 1000;
constexpr std::string_view kDefaultBand = "10,60";
const std::vector<std::size_t> kReferenceProbes{25, 45, 65};

bool given(const CLI::Option* opt) { return opt->count() > 0; }

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw UsageError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <typename T>
std::vector<T> parse_list(std::string_view text, std::string_view what) {
  std::vector<T> out;
  for (auto item : split(text, ',')) out.push_back(parse_number<T>(item, what));
  return out;
}

LengthRange parse_band(std::string_view text) {
  const auto v = parse_list<std::size_t>(text, "band");
  if (v.size() != 2 || v[0] > v[1]) throw UsageError("band must be 'lo,hi' with lo <= hi");
  return {v[0], v[1]};
}

LcVariant variant_flag(const std::string& text) {
  try {
    return parse_variant(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

RewardShaper shaper_flag(const std::string& text) {
  try {
    return RewardShaper::parse(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

class OutputFile {
 public:
  OutputFile(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
      if (!*file_) throw std::runtime_error("cannot write " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::uint64_t seed = 1;
  std::size_t n = 1000;
  double skew = 0.5;
  std::string out;
};

void add_gen_data(CLI::App& app, GenDataArgs& a) {
  app.add_option("--seed", a.seed, "Generator seed")->capture_default_str();
  app.add_option("--n", a.n, "Number of pairs")->capture_default_str();
  app.add_option("--skew", a.skew, "Fraction of summaries drawn near the short end of the length range")
      ->capture_default_str();
  app.add_option("--out", a.out, "Output corpus file (source<TAB>summary per line)")->required();
}

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  if (a.n == 0) throw UsageError("--n must be at least 1");
  if (!(a.skew >= 0.0 && a.skew <= 1.0)) throw UsageError("--skew must lie in [0, 1]");
  const Corpus corpus = generate_synthetic({a.seed, a.n, a.skew});
  save_corpus(corpus, a.out);
  out << "wrote " << corpus.size() << " pairs to " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string phase;
  std::string variant, shaper, neutralize, config, data, valid, out, init, log, band = std::string(kDefaultBand),
      probes;
  std::size_t d_th = 0, epochs = 0, iterations = 0, batch_size = 0, eval_every = 0, valid_limit = 0, embed_dim = 0,
              hidden_dim = 0, vocab_size = kDefaultVocab, max_decode = 0;
  double lambda = 0.0, lr = 0.0, length_scale = 0.0;
  std::uint64_t seed = 1;

  CLI::Option *o_variant, *o_shaper, *o_neutralize, *o_config, *o_init, *o_band, *o_probes, *o_d_th, *o_epochs,
      *o_iterations, *o_batch, *o_eval_every, *o_valid_limit, *o_embed, *o_hidden, *o_vocab, *o_max_decode,
      *o_lambda, *o_lr, *o_length_scale, *o_seed;
};

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--phase", a.phase, "Training phase")->required()->check(CLI::IsMember({"ml", "rl"}));
  a.o_variant = app.add_option("--variant", a.variant, "None, LenInit, LenLInit, LenEmb or LenMC");
  a.o_shaper = app.add_option("--shaper", a.shaper, "rl: scst, mts[:d_th] or scd[:lambda]");
  a.o_d_th = app.add_option("--d-th", a.d_th, "rl with mts: length-error threshold");
  a.o_lambda = app.add_option("--lambda", a.lambda, "rl with scd: dropout rate");
  a.o_neutralize = app.add_option("--neutralize", a.neutralize, "rl: rejected rewards become 'baseline' or 'zero'");
  a.o_config = app.add_option("--config", a.config, "JSON file with model and train blocks");
  app.add_option("--data", a.data, "Training corpus")->required();
  app.add_option("--valid", a.valid, "Validation corpus");
  app.add_option("--out", a.out, "Output checkpoint")->required();
  a.o_init = app.add_option("--init-checkpoint", a.init, "rl: checkpoint produced by the ml phase");
  app.add_option("--log", a.log, "Write the training log here instead of stdout");
  a.o_band = app.add_option("--band", a.band, "Task length band lo,hi for rl target lengths and probes")
                 ->capture_default_str();
  a.o_probes = app.add_option("--probes", a.probes, "rl: validation probe lengths, used as given");
  a.o_seed = app.add_option("--seed", a.seed, "Seed for initialization, shuffling and sampling")->capture_default_str();
  a.o_epochs = app.add_option("--epochs", a.epochs, "ml: number of epochs");
  a.o_iterations = app.add_option("--iterations", a.iterations, "rl: number of iterations");
  a.o_batch = app.add_option("--batch-size", a.batch_size, "Batch size");
  a.o_eval_every = app.add_option("--eval-every", a.eval_every, "rl: iterations between validation runs");
  a.o_valid_limit = app.add_option("--valid-limit", a.valid_limit, "Use at most this many validation pairs");
  a.o_lr = app.add_option("--lr", a.lr, "Initial learning rate");
  a.o_embed = app.add_option("--embed-dim", a.embed_dim, "ml: embedding width");
  a.o_hidden = app.add_option("--hidden-dim", a.hidden_dim, "ml: hidden width D");
  a.o_vocab = app.add_option("--vocab-size", a.vocab_size, "ml: vocabulary size including reserved tokens")
                  ->capture_default_str();
  a.o_max_decode = app.add_option("--max-decode", a.max_decode, "ml: maximum decoded tokens");
  a.o_length_scale = app.add_option("--length-scale", a.length_scale, "ml: multiplier on lengths fed to the model");
}

void check_train_flags(const TrainArgs& a, Phase phase, const TrainConfig& tc) {
  auto forbid = [&](const CLI::Option* o, std::string_view why) {
    if (given(o)) throw UsageError(o->get_name() + " " + std::string(why));
  };
  if (phase == Phase::ml) {
    constexpr std::string_view why = "only applies to --phase rl";
    for (const auto* o : {a.o_shaper, a.o_d_th, a.o_lambda, a.o_neutralize, a.o_init, a.o_iterations,
                          a.o_eval_every, a.o_probes})
      forbid(o, why);
  } else {
    if (!given(a.o_init)) throw UsageError("--phase rl requires --init-checkpoint");
    constexpr std::string_view why = "is fixed by the initial checkpoint";
    for (const auto* o : {a.o_embed, a.o_hidden, a.o_vocab, a.o_max_decode, a.o_length_scale}) forbid(o, why);
    forbid(a.o_epochs, "only applies to --phase ml");
    if (given(a.o_d_th) && tc.shaper.kind != RewardShaper::Kind::mts) throw UsageError("--d-th requires --shaper mts");
    if (given(a.o_lambda) && tc.shaper.kind != RewardShaper::Kind::scd) throw UsageError("--lambda requires --shaper scd");
  }
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const Phase phase = parse_phase(a.phase);
  const LengthRange band = parse_band(a.band);
  TrainConfig tc = TrainConfig::defaults(phase);
  tc.target_lengths = band;
  tc.probe_lengths = rescale_probes(kReferenceProbes, band);
  ModelConfig mc;

  if (given(a.o_config)) {
    apply_config_file(a.config, mc, tc);
    if (tc.phase != phase) throw UsageError("config file phase conflicts with --phase");
  }
  if (given(a.o_shaper)) tc.shaper = shaper_flag(a.shaper);
  check_train_flags(a, phase, tc);

  if (given(a.o_band)) {
    tc.target_lengths = band;
    tc.probe_lengths = rescale_probes(kReferenceProbes, band);
  }
  if (given(a.o_probes)) tc.probe_lengths = parse_list<std::size_t>(a.probes, "probe length");
  if (given(a.o_d_th)) tc.shaper.d_th = a.d_th;
  if (given(a.o_lambda)) tc.shaper.lambda = a.lambda;
  if (given(a.o_neutralize)) tc.neutralize = parse_neutralize_mode(a.neutralize);
  if (given(a.o_seed) || !given(a.o_config)) tc.seed = a.seed;
  if (given(a.o_epochs)) tc.epochs = a.epochs;
  if (given(a.o_iterations)) tc.max_iterations = a.iterations;
  if (given(a.o_batch)) tc.batch_size = a.batch_size;
  if (given(a.o_eval_every)) tc.eval_every = a.eval_every;
  if (given(a.o_valid_limit)) tc.valid_limit = a.valid_limit;
  if (given(a.o_lr)) tc.lr = a.lr;
  if (given(a.o_variant)) tc.variant = variant_flag(a.variant);
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const Corpus train = load_corpus(a.data, Split::train);
  const Corpus valid = a.valid.empty() ? Corpus{{}, Split::valid} : load_corpus(a.valid, Split::valid);
  OutputFile log_file(a.log, out);
  TrainLog log(&log_file.get());

  Checkpoint ck;
  ck.phase = phase;
  ck.seed = tc.seed;
  if (phase == Phase::ml) {
    if (given(a.o_embed)) mc.embed_dim = a.embed_dim;
    if (given(a.o_hidden)) mc.hidden_dim = a.hidden_dim;
    if (given(a.o_max_decode)) mc.max_decode_tokens = a.max_decode;
    if (given(a.o_length_scale)) mc.length_scale = a.length_scale;
    if (tc.variant) mc.variant = *tc.variant;
    if (!given(a.o_variant) && !given(a.o_config)) throw UsageError("--phase ml requires --variant");
    tc.variant = mc.variant;
    ck.vocab = build_vocab(train, a.vocab_size);
    mc.vocab_size = ck.vocab.size();
    mc.rng_seed = tc.seed;
    try {
      mc.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    log.emit(LogRecord().add("config_model", to_json(mc)).add("config_train", to_json(tc)));
    ck.model = train_ml(tc, train, valid, ck.vocab, Model::create(mc), log).model;
  } else {
    Checkpoint init = load_checkpoint(a.init);
    if (init.phase != Phase::ml) out << "note: initial checkpoint was already fine-tuned\n";
    if (!tc.variant) tc.variant = init.model.config.variant;
    ck.vocab = init.vocab;
    log.emit(LogRecord().add("config_model", to_json(init.model.config)).add("config_train", to_json(tc)));
    ck.model = train_rl(tc, train, valid, ck.vocab, std::move(init.model), log).model;
  }
  ck.provenance = to_json(tc);
  save_checkpoint(ck, a.out);
  out << "wrote checkpoint " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint, data, lengths, band = std::string(kDefaultBand), out;
  std::size_t limit = 0;
  bool force = false;
  CLI::Option* o_lengths;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--checkpoint", a.checkpoint, "Checkpoint to evaluate")->required();
  app.add_option("--data", a.data, "Test corpus")->required();
  a.o_lengths = app.add_option("--lengths", a.lengths,
                               "Probe lengths, used as given; default is 25,45,65 rescaled into --band");
  app.add_option("--band", a.band, "Task length band lo,hi")->capture_default_str();
  app.add_flag("--force", a.force, "Accept probe lengths outside the band");
  app.add_option("--limit", a.limit, "Evaluate at most this many pairs");
  app.add_option("--out", a.out, "Write the report here instead of stdout");
}

SweepShaper shaper_of(const Checkpoint& ck) {
  if (ck.phase == Phase::ml || ck.provenance.empty()) return {};
  TrainConfig tc;
  apply_json(ck.provenance, tc);
  return {tc.shaper};
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const LengthRange band = parse_band(a.band);
  std::vector<std::size_t> probes;
  if (given(a.o_lengths)) {
    probes = parse_list<std::size_t>(a.lengths, "probe length");
    for (auto p : probes) {
      if (!a.force && (p < band.lo || p > band.hi)) {
        throw UsageError("probe length " + std::to_string(p) + " is outside the band " + a.band +
                         "; pass --force to use it anyway");
      }
    }
  } else {
    probes = rescale_probes(kReferenceProbes, band);
  }
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  auto data = encode_corpus(load_corpus(a.data, Split::test), ck.vocab);
  if (a.limit && data.size() > a.limit) data.resize(a.limit);
  const Evaluation ev = evaluate(data, probes, greedy_decoder(ck.model, ck.vocab), ck.vocab);
  const SweepShaper shaper = shaper_of(ck);
  OutputFile report(a.out, out);
  write_report(report.get(), report_rows(ev, to_string(ck.model.config.variant), shaper.name(), shaper.param()));
  return kOk;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string checkpoint, source, band = std::string(kDefaultBand);
  std::size_t length = 0;
};

void add_generate(CLI::App& app, GenerateArgs& a) {
  app.add_option("--checkpoint", a.checkpoint, "Checkpoint to decode with")->required();
  app.add_option("--source", a.source, "Space-separated source tokens")->required();
  app.add_option("--length", a.length, "Desired summary length in characters")->required();
  app.add_option("--band", a.band, "Supported length band lo,hi")->capture_default_str();
}

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
  const LengthRange band = parse_band(a.band);
  const Sentence tokens = split_tokens(a.source);
  if (tokens.empty()) throw UsageError("--source has no tokens");
  if (a.length < band.lo || a.length > band.hi) {
    err << "warning: length " << a.length << " is outside the supported band " << a.band << '\n';
  }
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  std::size_t unknown = 0;
  for (const auto& t : tokens) unknown += ck.vocab.contains(t) ? 0 : 1;
  if (unknown) err << "warning: " << unknown << " source token(s) are not in the vocabulary\n";
  const TokenIds source = ck.vocab.encode(tokens);
  Rng unused(0);
  const SampleResult r = sample_sentence(ck.model, ck.vocab, source, a.length, DecodeMode::greedy, unused);
  const TokenIds content = r.content();
  out << join_tokens(ck.vocab.decode(content)) << " (" << charlen(content, ck.vocab) << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string variants, shapers, seeds = "1", out, runs_out, log, config, train, valid, test, cache_dir,
      band = std::string(kDefaultBand);
  std::vector<std::string> grid;
  std::uint64_t data_seed = 7;
  std::size_t n_train = 10000, n_valid = 1000, n_test = 1000, vocab_size = kDefaultVocab, epochs = 0, iterations = 0,
              batch_size = 0, eval_every = 0, valid_limit = 0, test_limit = 0, embed_dim = 0, hidden_dim = 0;
  double skew = 0.5, ml_lr = 0.0, rl_lr = 0.0;
  CLI::Option *o_epochs, *o_iterations, *o_batch, *o_eval_every, *o_valid_limit, *o_embed, *o_hidden, *o_ml_lr,
      *o_rl_lr, *o_config;
};

void add_sweep(CLI::App& app, SweepArgs& a) {
  app.add_option("--variants", a.variants, "Comma-separated variants")->required();
  app.add_option("--shapers", a.shapers, "Comma-separated shapers: ml, scst, mts[:d_th], scd[:lambda]")->required();
  app.add_option("--grid", a.grid, "Hyperparameter values, e.g. d_th=4,16 or lambda=0.1,0.8");
  app.add_option("--seeds", a.seeds, "Comma-separated seeds")->capture_default_str();
  app.add_option("--out", a.out, "Scatter table output")->required();
  app.add_option("--runs-out", a.runs_out, "Per-run report output");
  app.add_option("--log", a.log, "Training log output (default: discarded)");
  a.o_config = app.add_option("--config", a.config, "JSON file with model, ml and rl blocks");
  app.add_option("--train", a.train, "Training corpus (default: synthetic)");
  app.add_option("--valid", a.valid, "Validation corpus (default: synthetic)");
  app.add_option("--test", a.test, "Test corpus (default: synthetic)");
  app.add_option("--data-seed", a.data_seed, "Seed of the synthetic corpus")->capture_default_str();
  app.add_option("--n-train", a.n_train, "Synthetic training pairs")->capture_default_str();
  app.add_option("--n-valid", a.n_valid, "Synthetic validation pairs")->capture_default_str();
  app.add_option("--n-test", a.n_test, "Synthetic test pairs")->capture_default_str();
  app.add_option("--skew", a.skew, "Synthetic length skew")->capture_default_str();
  app.add_option("--vocab-size", a.vocab_size, "Vocabulary size including reserved tokens")->capture_default_str();
  app.add_option("--band", a.band, "Task length band lo,hi")->capture_default_str();
  app.add_option("--cache-dir", a.cache_dir, "Reuse ML checkpoints stored here");
  a.o_epochs = app.add_option("--epochs", a.epochs, "ML epochs");
  a.o_iterations = app.add_option("--iterations", a.iterations, "RL iterations");
  a.o_batch = app.add_option("--batch-size", a.batch_size, "Batch size for both phases");
  a.o_eval_every = app.add_option("--eval-every", a.eval_every, "RL iterations between validation runs");
  a.o_valid_limit = app.add_option("--valid-limit", a.valid_limit, "Validation pairs used for selection");
  app.add_option("--test-limit", a.test_limit, "Test pairs used for the report");
  a.o_embed = app.add_option("--embed-dim", a.embed_dim, "Embedding width");
  a.o_hidden = app.add_option("--hidden-dim", a.hidden_dim, "Hidden width D");
  a.o_ml_lr = app.add_option("--ml-lr", a.ml_lr, "ML learning rate");
  a.o_rl_lr = app.add_option("--rl-lr", a.rl_lr, "RL learning rate");
}

void apply_sweep_config(const std::string& path, SweepSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "model") apply_json(v.dump(), spec.model);
    else if (key == "ml") apply_json(v.dump(), spec.ml);
    else if (key == "rl") apply_json(v.dump(), spec.rl);
    else throw ConfigError(path + ": unknown top-level key '" + key + "'");
  }
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const LengthRange band = parse_band(a.band);
  std::vector<std::size_t> d_th_grid;
  std::vector<double> lambda_grid;
  for (const auto& g : a.grid) {
    for (auto entry : split(g, ';')) {
      const auto eq = entry.find('=');
      if (eq == std::string_view::npos) throw UsageError("grid entry '" + std::string(entry) + "' is not key=values");
      const auto key = entry.substr(0, eq);
      const auto values = entry.substr(eq + 1);
      if (key == "d_th") {
        auto v = parse_list<std::size_t>(values, "d_th");
        d_th_grid.insert(d_th_grid.end(), v.begin(), v.end());
      } else if (key == "lambda") {
        auto v = parse_list<double>(values, "lambda");
        lambda_grid.insert(lambda_grid.end(), v.begin(), v.end());
      } else {
        throw UsageError("unknown grid key '" + std::string(key) + "' (expected d_th or lambda)");
      }
    }
  }

  SweepSpec spec;
  for (auto v : split(a.variants, ',')) spec.variants.push_back(variant_flag(std::string(v)));
  try {
    spec.shapers = expand_shapers(a.shapers, d_th_grid, lambda_grid);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  spec.seeds = parse_list<std::uint64_t>(a.seeds, "seed");
  spec.ml = TrainConfig::defaults(Phase::ml);
  spec.rl = TrainConfig::defaults(Phase::rl);
  spec.rl.target_lengths = band;
  spec.rl.probe_lengths = rescale_probes(kReferenceProbes, band);
  spec.probes = spec.rl.probe_lengths;
  if (given(a.o_config)) apply_sweep_config(a.config, spec);
  if (given(a.o_embed)) spec.model.embed_dim = a.embed_dim;
  if (given(a.o_hidden)) spec.model.hidden_dim = a.hidden_dim;
  if (given(a.o_epochs)) spec.ml.epochs = a.epochs;
  if (given(a.o_iterations)) spec.rl.max_iterations = a.iterations;
  if (given(a.o_batch)) spec.ml.batch_size = spec.rl.batch_size = a.batch_size;
  if (given(a.o_eval_every)) spec.rl.eval_every = a.eval_every;
  if (given(a.o_valid_limit)) spec.ml.valid_limit = spec.rl.valid_limit = a.valid_limit;
  if (given(a.o_ml_lr)) spec.ml.lr = a.ml_lr;
  if (given(a.o_rl_lr)) spec.rl.lr = a.rl_lr;
  spec.test_limit = a.test_limit;
  spec.cache_dir = a.cache_dir;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  DataSplits data;
  const int files = !a.train.empty() + !a.valid.empty() + !a.test.empty();
  if (files == 3) {
    data = {load_corpus(a.train, Split::train), load_corpus(a.valid, Split::valid), load_corpus(a.test, Split::test)};
  } else if (files == 0) {
    data = synthetic_splits(a.data_seed, a.n_train, a.n_valid, a.n_test, a.skew);
  } else {
    throw UsageError("--train, --valid and --test must be given together");
  }
  const Vocabulary vocab = build_vocab(data.train, a.vocab_size);

  std::unique_ptr<std::ofstream> log;
  if (!a.log.empty()) {
    log = std::make_unique<std::ofstream>(a.log, std::ios::trunc);
    if (!*log) throw std::runtime_error("cannot write " + a.log);
  }
  const SweepResult result = run_sweep(spec, data, vocab, log.get());

  {
    OutputFile table(a.out, out);
    write_sweep(table.get(), result.points);
  }
  if (!a.runs_out.empty()) {
    OutputFile runs(a.runs_out, out);
    write_sweep_runs(runs.get(), result.runs);
  }
  out << "wrote " << result.points.size() << " configurations to " << a.out << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Length-controllable sequence-to-sequence summarization"};
  app.name("lcseq");
  app.require_subcommand(1);

  GenDataArgs gen_data;
  TrainArgs train;
  EvalArgs eval;
  SweepArgs sweep;
  GenerateArgs generate;
  auto* c_gen = app.add_subcommand("gen-data", "Write a synthetic corpus");
  auto* c_train = app.add_subcommand("train", "Train by maximum likelihood or fine-tune with RL");
  auto* c_eval = app.add_subcommand("eval", "Score a checkpoint at probe lengths");
  auto* c_sweep = app.add_subcommand("sweep", "Run a variant x shaper x seed grid");
  auto* c_generate = app.add_subcommand("generate", "Decode one source at a desired length");
  add_gen_data(*c_gen, gen_data);
  add_train(*c_train, train);
  add_eval(*c_eval, eval);
  add_sweep(*c_sweep, sweep);
  add_generate(*c_generate, generate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (c_gen->parsed()) return cmd_gen_data(gen_data, out);
    if (c_train->parsed()) return cmd_train(train, out);
    if (c_eval->parsed()) return cmd_eval(eval, out);
    if (c_sweep->parsed()) return cmd_sweep(sweep, out);
    if (c_generate->parsed()) return cmd_generate(generate, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace lcseq::cli
