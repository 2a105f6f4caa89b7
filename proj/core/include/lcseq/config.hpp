#pragma once

// JSON text for model and training configs. Parsing overlays the keys that
// are present onto an existing config, so file values can sit between
// built-in defaults and command-line flags.

#include <string>
#include <string_view>

#include "lcseq/seq2seq.hpp"
#include "lcseq/train.hpp"

namespace lcseq {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string to_json(const ModelConfig& config);
std::string to_json(const TrainConfig& config);

/// Unknown keys and mistyped values raise ConfigError.
void apply_json(std::string_view text, ModelConfig& config);
void apply_json(std::string_view text, TrainConfig& config);

/// A file holding {"model": {...}, "train": {...}}; either block may be absent.
void apply_config_file(const std::string& path, ModelConfig& model, TrainConfig& train);

}  // namespace lcseq
