#pragma once

// BiLSTM encoder, additive attention, LSTM decoder, and the four
// length-infusion decoder variants.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lcseq/autodiff.hpp"
#include "lcseq/data.hpp"
#include "lcseq/lengths.hpp"

namespace lcseq {

enum class LcVariant { none, len_init, len_linit, len_emb, len_mc };

/// LenInit/LenLInit infuse the whole length; LenEmb/LenMC the remaining length.
LengthClass length_class(LcVariant variant);
std::string_view to_string(LcVariant variant);
/// Accepts "None", "LenInit", "LenLInit", "LenEmb", "LenMC" (case-insensitive).
LcVariant parse_variant(std::string_view text);

struct ModelConfig {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t vocab_size = 0;
  LcVariant variant = LcVariant::none;
  std::size_t length_buckets = 150;
  std::size_t max_decode_tokens = 20;
  std::size_t max_source_tokens = 200;
  /// Multiplier applied to raw character lengths before they enter the model.
  double length_scale = 1.0;
  std::uint64_t rng_seed = 1;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Fused LSTM weights: rows = [input ; hidden], columns = gates (i, f, o, g).
struct LstmWeights {
  ad::Tensor w;
  ad::Tensor b;
};

class ModelParams {
 public:
  /// Uniform(-0.08, 0.08) weights, zero biases (forget gate +1), and a
  /// standard-normal fixed vector for LenLInit/LenMC.
  static ModelParams initialize(const ModelConfig& config);

  ad::Tensor embed;  // V x E
  LstmWeights enc_fwd;
  LstmWeights enc_bwd;
  LstmWeights dec;
  ad::Tensor att_dec;   // D x A
  ad::Tensor att_enc;   // 2D x A
  ad::Tensor att_bias;  // A
  ad::Tensor att_v;     // A
  ad::Tensor out_w;     // 3D x V
  ad::Tensor out_b;     // V

  std::optional<ad::Tensor> len_scale;  // b_l, LenInit
  std::optional<ad::Tensor> len_gauss;  // fixed Gaussian vector, LenLInit/LenMC
  std::optional<ad::Tensor> len_init_w; // W_l, LenLInit
  std::optional<ad::Tensor> len_mc_w;   // W, LenMC
  std::optional<ad::Tensor> len_embed;  // L x D, LenEmb

  /// Every present tensor with its canonical name, in a fixed order.
  std::vector<std::pair<std::string, ad::Tensor*>> named();
  std::vector<std::pair<std::string, const ad::Tensor*>> named() const;
  const ad::Tensor& at(std::string_view name) const;
  ad::Tensor& at(std::string_view name);

  friend bool operator==(const ModelParams&, const ModelParams&);
};

struct Model {
  ModelConfig config;
  ModelParams params;

  static Model create(const ModelConfig& config) { return {config, ModelParams::initialize(config)}; }
};

struct EncoderOutput {
  std::vector<ad::Var> states;  // [fwd_t ; bwd_t], width 2D
  ad::Var memory;               // N x 2D
  ad::Var keys;                 // N x A, memory projected for attention
  ad::Var final_bwd_hidden;
  ad::Var final_bwd_memory;
};

struct DecoderState {
  ad::Var hidden;
  ad::Var memory;
  std::size_t t = 0;
  std::size_t length = 0;  // whole (WLI) or remaining (RLI) characters
};

struct AttentionOutput {
  ad::Var context;
  ad::Var weights;
};

struct StepOutput {
  DecoderState state;
  ad::Var logits;
  ad::Var logprobs;
};

/// A model bound to one tape. Parameters are registered lazily and shared
/// by every expression built through this object.
class Graph {
 public:
  Graph(ad::Tape& tape, const Model& model) : tape_(tape), model_(model) {}

  EncoderOutput encode(std::span<const TokenId> source);
  DecoderState init_decoder(const EncoderOutput& enc, std::size_t l1);
  AttentionOutput attention(ad::Var decoder_hidden, const EncoderOutput& enc);
  /// One decoder step from `prev`. The returned state keeps the input length;
  /// callers advance it with next_length().
  StepOutput decode_step(const EncoderOutput& enc, const DecoderState& state, TokenId prev);

  /// Sum over steps of log p(target_t | target_<t, source, lengths_t), teacher forced.
  ad::Var sequence_logprob(const EncoderOutput& enc, std::size_t l1, std::span<const TokenId> target,
                           std::span<const std::size_t> lengths, std::vector<double>* step_logprobs = nullptr);

  ad::Tape& tape() { return tape_; }
  const Model& model() const { return model_; }

 private:
  ad::Var p(const ad::Tensor& t, const char* name);
  std::pair<ad::Var, ad::Var> lstm_cell(const LstmWeights& w, const char* name, ad::Var x, ad::Var h, ad::Var m);

  ad::Tape& tape_;
  const Model& model_;
};

struct TeacherForcedExample {
  TokenIds source;
  TokenIds reference;                // ends with EOS
  std::vector<std::size_t> lengths;  // one length input per reference token
};

/// Builds the ML example for a corpus pair: l_1 = charlen(summary).
TeacherForcedExample make_example(const Pair& pair, const Vocabulary& vocab, LcVariant variant);
TeacherForcedExample make_example(TokenIds source, TokenIds summary, const Vocabulary& vocab, LcVariant variant);

/// -(1/|batch|) * sum of teacher-forced log-likelihoods.
ad::Var ml_loss(ad::Tape& tape, const Model& model, std::span<const TeacherForcedExample> batch);

}  // namespace lcseq
