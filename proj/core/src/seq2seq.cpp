#include "lcseq/seq2seq.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <stdexcept>

namespace lcseq {

LengthClass length_class(LcVariant variant) {
  switch (variant) {
    case LcVariant::len_init:
    case LcVariant::len_linit: return LengthClass::whole;
    case LcVariant::len_emb:
    case LcVariant::len_mc: return LengthClass::remaining;
    case LcVariant::none: break;
  }
  return LengthClass::none;
}

std::string_view to_string(LcVariant variant) {
  switch (variant) {
    case LcVariant::none: return "None";
    case LcVariant::len_init: return "LenInit";
    case LcVariant::len_linit: return "LenLInit";
    case LcVariant::len_emb: return "LenEmb";
    case LcVariant::len_mc: return "LenMC";
  }
  return "?";
}

LcVariant parse_variant(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "none" || lower == "seq2seq") return LcVariant::none;
  if (lower == "leninit") return LcVariant::len_init;
  if (lower == "lenlinit") return LcVariant::len_linit;
  if (lower == "lenemb") return LcVariant::len_emb;
  if (lower == "lenmc") return LcVariant::len_mc;
  throw std::invalid_argument("unknown variant '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (embed_dim == 0 || hidden_dim == 0) throw std::invalid_argument("model dimensions must be positive");
  if (vocab_size <= kReservedTokens) throw std::invalid_argument("vocab_size must exceed the reserved tokens");
  if (length_buckets == 0) throw std::invalid_argument("length_buckets must be at least 1");
  if (max_decode_tokens == 0) throw std::invalid_argument("max_decode_tokens must be at least 1");
  if (max_source_tokens == 0) throw std::invalid_argument("max_source_tokens must be at least 1");
  if (!(length_scale > 0.0)) throw std::invalid_argument("length_scale must be positive");
}

// ---------------------------------------------------------------- parameters

namespace {

constexpr double kInitRange = 0.08;

ad::Tensor uniform(std::mt19937_64& rng, ad::Shape shape) {
  std::uniform_real_distribution<double> dist(-kInitRange, kInitRange);
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = dist(rng);
  return ad::Tensor(std::move(shape), std::move(v), true);
}

LstmWeights lstm(std::mt19937_64& rng, std::size_t input, std::size_t hidden) {
  LstmWeights w{uniform(rng, {input + hidden, 4 * hidden}), ad::Tensor::zeros({4 * hidden}, true)};
  auto b = w.b.mutable_values();
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden), b.begin() + static_cast<std::ptrdiff_t>(2 * hidden), 1.0);
  return w;
}

}  // namespace

ModelParams ModelParams::initialize(const ModelConfig& c) {
  c.validate();
  const std::size_t d = c.hidden_dim;
  const std::size_t e = c.embed_dim;
  const std::size_t dec_input = e + (c.variant == LcVariant::len_emb ? d : 0);
  std::mt19937_64 rng(c.rng_seed);

  ModelParams p;
  p.embed = uniform(rng, {c.vocab_size, e});
  p.enc_fwd = lstm(rng, e, d);
  p.enc_bwd = lstm(rng, e, d);
  p.dec = lstm(rng, dec_input, d);
  p.att_dec = uniform(rng, {d, d});
  p.att_enc = uniform(rng, {2 * d, d});
  p.att_bias = ad::Tensor::zeros({d}, true);
  p.att_v = uniform(rng, {d});
  p.out_w = uniform(rng, {3 * d, c.vocab_size});
  p.out_b = ad::Tensor::zeros({c.vocab_size}, true);

  switch (c.variant) {
    case LcVariant::len_init: p.len_scale = uniform(rng, {d}); break;
    case LcVariant::len_linit: p.len_init_w = uniform(rng, {d, d}); break;
    case LcVariant::len_mc: p.len_mc_w = uniform(rng, {d, d}); break;
    case LcVariant::len_emb: p.len_embed = uniform(rng, {c.length_buckets, d}); break;
    case LcVariant::none: break;
  }
  if (c.variant == LcVariant::len_linit || c.variant == LcVariant::len_mc) {
    std::seed_seq seq{static_cast<std::uint32_t>(c.rng_seed), static_cast<std::uint32_t>(c.rng_seed >> 32),
                      std::uint32_t{0x6a09e667}};
    std::mt19937_64 gauss_rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(d);
    for (double& x : v) x = normal(gauss_rng);
    p.len_gauss = ad::Tensor({d}, std::move(v), false);
  }
  return p;
}

namespace {
template <class Self, class T>
auto named_impl(Self& self) {
  std::vector<std::pair<std::string, T*>> out{
      {"embed", &self.embed},
      {"enc_fwd.w", &self.enc_fwd.w},
      {"enc_fwd.b", &self.enc_fwd.b},
      {"enc_bwd.w", &self.enc_bwd.w},
      {"enc_bwd.b", &self.enc_bwd.b},
      {"dec.w", &self.dec.w},
      {"dec.b", &self.dec.b},
      {"att.dec", &self.att_dec},
      {"att.enc", &self.att_enc},
      {"att.bias", &self.att_bias},
      {"att.v", &self.att_v},
      {"out.w", &self.out_w},
      {"out.b", &self.out_b},
  };
  if (self.len_scale) out.emplace_back("len.scale", &*self.len_scale);
  if (self.len_gauss) out.emplace_back("len.gauss", &*self.len_gauss);
  if (self.len_init_w) out.emplace_back("len.init_w", &*self.len_init_w);
  if (self.len_mc_w) out.emplace_back("len.mc_w", &*self.len_mc_w);
  if (self.len_embed) out.emplace_back("len.embed", &*self.len_embed);
  return out;
}
}  // namespace

std::vector<std::pair<std::string, ad::Tensor*>> ModelParams::named() {
  return named_impl<ModelParams, ad::Tensor>(*this);
}

std::vector<std::pair<std::string, const ad::Tensor*>> ModelParams::named() const {
  return named_impl<const ModelParams, const ad::Tensor>(*this);
}

const ad::Tensor& ModelParams::at(std::string_view name) const {
  for (const auto& [n, t] : named()) {
    if (n == name) return *t;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

ad::Tensor& ModelParams::at(std::string_view name) {
  return const_cast<ad::Tensor&>(std::as_const(*this).at(name));
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  const auto na = a.named();
  const auto nb = b.named();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (na[i].first != nb[i].first || !(*na[i].second == *nb[i].second)) return false;
  }
  return true;
}

// ---------------------------------------------------------------- graph

ad::Var Graph::p(const ad::Tensor& t, const char* name) { return tape_.parameter(t, name); }

std::pair<ad::Var, ad::Var> Graph::lstm_cell(const LstmWeights& w, const char* name, ad::Var x, ad::Var h,
                                             ad::Var m) {
  const std::size_t d = model_.config.hidden_dim;
  const std::string base(name);
  const ad::Var wv = tape_.parameter(w.w, base + ".w");
  const ad::Var bv = tape_.parameter(w.b, base + ".b");
  const ad::Var z = tape_.add(tape_.matmul(tape_.concat({x, h}), wv), bv);
  const ad::Var in_gate = tape_.sigmoid(tape_.slice(z, 0, d));
  const ad::Var forget = tape_.sigmoid(tape_.slice(z, d, d));
  const ad::Var out_gate = tape_.sigmoid(tape_.slice(z, 2 * d, d));
  const ad::Var cand = tape_.tanh(tape_.slice(z, 3 * d, d));
  const ad::Var m_next = tape_.add(tape_.hadamard(forget, m), tape_.hadamard(in_gate, cand));
  const ad::Var h_next = tape_.hadamard(out_gate, tape_.tanh(m_next));
  return {h_next, m_next};
}

EncoderOutput Graph::encode(std::span<const TokenId> source) {
  const auto& cfg = model_.config;
  const auto& par = model_.params;
  if (source.empty()) throw std::invalid_argument("encode: empty source");
  if (source.size() > cfg.max_source_tokens) {
    throw std::invalid_argument("encode: source has " + std::to_string(source.size()) + " tokens, limit is " +
                                std::to_string(cfg.max_source_tokens));
  }
  for (TokenId t : source) {
    if (t >= cfg.vocab_size) throw std::out_of_range("encode: token id " + std::to_string(t) + " out of range");
  }
  const std::size_t n = source.size();
  const ad::Var embed = p(par.embed, "embed");
  std::vector<ad::Var> inputs;
  inputs.reserve(n);
  for (TokenId t : source) inputs.push_back(tape_.row(embed, t));

  const ad::Var zero = tape_.constant(ad::Tensor::zeros({cfg.hidden_dim}));
  std::vector<ad::Var> fwd(n), bwd(n);
  ad::Var h = zero, m = zero;
  for (std::size_t t = 0; t < n; ++t) {
    std::tie(h, m) = lstm_cell(par.enc_fwd, "enc_fwd", inputs[t], h, m);
    fwd[t] = h;
  }
  h = zero;
  m = zero;
  for (std::size_t t = n; t-- > 0;) {
    std::tie(h, m) = lstm_cell(par.enc_bwd, "enc_bwd", inputs[t], h, m);
    bwd[t] = h;
  }

  EncoderOutput out;
  out.states.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.states.push_back(tape_.concat({fwd[t], bwd[t]}));
  out.memory = tape_.stack_rows(out.states);
  out.keys = tape_.matmul(out.memory, p(par.att_enc, "att.enc"));
  out.final_bwd_hidden = h;
  out.final_bwd_memory = m;
  return out;
}

DecoderState Graph::init_decoder(const EncoderOutput& enc, std::size_t l1) {
  const auto& cfg = model_.config;
  const auto& par = model_.params;
  const double scaled = static_cast<double>(l1) * cfg.length_scale;
  DecoderState s;
  s.hidden = enc.final_bwd_hidden;
  s.length = l1;
  switch (cfg.variant) {
    case LcVariant::len_init:
      s.memory = tape_.scalar_mul(p(*par.len_scale, "len.scale"), scaled);
      break;
    case LcVariant::len_linit:
      s.memory = tape_.matmul(tape_.scalar_mul(p(*par.len_gauss, "len.gauss"), scaled),
                              p(*par.len_init_w, "len.init_w"));
      break;
    default:
      s.memory = enc.final_bwd_memory;
      break;
  }
  return s;
}

AttentionOutput Graph::attention(ad::Var decoder_hidden, const EncoderOutput& enc) {
  const auto& par = model_.params;
  if (enc.states.empty()) throw std::invalid_argument("attention: no encoder states");
  const ad::Var query = tape_.add(tape_.matmul(decoder_hidden, p(par.att_dec, "att.dec")), p(par.att_bias, "att.bias"));
  const ad::Var scores = tape_.matmul(tape_.tanh(tape_.add(enc.keys, query)), p(par.att_v, "att.v"));
  AttentionOutput out;
  out.weights = tape_.softmax(scores);
  out.context = tape_.matmul(out.weights, enc.memory);
  return out;
}

StepOutput Graph::decode_step(const EncoderOutput& enc, const DecoderState& state, TokenId prev) {
  const auto& cfg = model_.config;
  const auto& par = model_.params;
  if (prev >= cfg.vocab_size) throw std::out_of_range("decode_step: token id " + std::to_string(prev) + " out of range");

  ad::Var input = tape_.row(p(par.embed, "embed"), prev);
  ad::Var memory = state.memory;
  if (cfg.variant == LcVariant::len_emb) {
    const std::size_t bucket = std::min(state.length, cfg.length_buckets - 1);
    input = tape_.concat({input, tape_.row(p(*par.len_embed, "len.embed"), bucket)});
  } else if (cfg.variant == LcVariant::len_mc) {
    const double scaled = static_cast<double>(state.length) * cfg.length_scale;
    const ad::Var infusion =
        tape_.matmul(tape_.scalar_mul(p(*par.len_gauss, "len.gauss"), scaled), p(*par.len_mc_w, "len.mc_w"));
    memory = tape_.add(memory, infusion);
  }

  StepOutput out;
  std::tie(out.state.hidden, out.state.memory) = lstm_cell(par.dec, "dec", input, state.hidden, memory);
  out.state.t = state.t + 1;
  out.state.length = state.length;

  const AttentionOutput att = attention(out.state.hidden, enc);
  out.logits = tape_.add(tape_.matmul(tape_.concat({out.state.hidden, att.context}), p(par.out_w, "out.w")),
                         p(par.out_b, "out.b"));
  out.logprobs = tape_.log_softmax(out.logits);
  return out;
}

ad::Var Graph::sequence_logprob(const EncoderOutput& enc, std::size_t l1, std::span<const TokenId> target,
                                std::span<const std::size_t> lengths, std::vector<double>* step_logprobs) {
  if (target.empty()) throw std::invalid_argument("sequence_logprob: empty target");
  if (lengths.size() != target.size()) {
    throw std::invalid_argument("length schedule has " + std::to_string(lengths.size()) + " entries for " +
                                std::to_string(target.size()) + " target tokens");
  }
  DecoderState state = init_decoder(enc, l1);
  TokenId prev = kBos;
  std::vector<ad::Var> picked;
  picked.reserve(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) {
    state.length = lengths[t];
    StepOutput step = decode_step(enc, state, prev);
    if (target[t] >= model_.config.vocab_size) throw std::out_of_range("target token id out of range");
    picked.push_back(tape_.pick(step.logprobs, target[t]));
    if (step_logprobs) step_logprobs->push_back(tape_.item(picked.back()));
    state = step.state;
    prev = target[t];
  }
  return tape_.sum(tape_.concat(picked));
}

// ---------------------------------------------------------------- ML objective

TeacherForcedExample make_example(TokenIds source, TokenIds summary, const Vocabulary& vocab, LcVariant variant) {
  TeacherForcedExample ex;
  ex.source = std::move(source);
  const std::size_t l1 = charlen(summary, vocab);
  ex.reference = std::move(summary);
  ex.reference.push_back(kEos);
  ex.lengths = schedule(length_class(variant), l1, ex.reference, vocab).steps;
  return ex;
}

TeacherForcedExample make_example(const Pair& pair, const Vocabulary& vocab, LcVariant variant) {
  return make_example(vocab.encode(pair.source), vocab.encode(pair.summary), vocab, variant);
}

ad::Var ml_loss(ad::Tape& tape, const Model& model, std::span<const TeacherForcedExample> batch) {
  if (batch.empty()) throw std::invalid_argument("ml_loss: empty batch");
  Graph graph(tape, model);
  std::vector<ad::Var> terms;
  terms.reserve(batch.size());
  for (const auto& ex : batch) {
    if (ex.reference.empty() || ex.reference.back() != kEos) {
      throw std::invalid_argument("ml_loss: reference must be non-empty and end with EOS");
    }
    if (ex.lengths.size() != ex.reference.size()) {
      throw std::invalid_argument("ml_loss: length schedule does not match reference length");
    }
    const EncoderOutput enc = graph.encode(ex.source);
    terms.push_back(graph.sequence_logprob(enc, ex.lengths.front(), ex.reference, ex.lengths));
  }
  const ad::Var total = terms.size() == 1 ? terms.front() : tape.sum(tape.concat(terms));
  return tape.scalar_mul(total, -1.0 / static_cast<double>(batch.size()));
}

}  // namespace lcseq
