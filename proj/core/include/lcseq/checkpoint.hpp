#pragma once

// "LCSQ1" checkpoint container: config block, vocabulary, named tensors,
// seed, and training-phase tag.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lcseq/data.hpp"
#include "lcseq/seq2seq.hpp"
#include "lcseq/train.hpp"

namespace lcseq {

inline constexpr std::string_view kCheckpointMagic = "LCSQ1";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  Model model;
  Vocabulary vocab;
  /// Effective training config as JSON; empty for an untrained model.
  std::string provenance;
  std::uint64_t seed = 0;
  Phase phase = Phase::ml;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.model.config == b.model.config && a.model.params == b.model.params && a.vocab == b.vocab &&
           a.provenance == b.provenance && a.seed == b.seed && a.phase == b.phase;
  }
};

std::string serialize(const Checkpoint& checkpoint);
/// Rejects other magic/version lines, truncation, trailing bytes, and tensors
/// whose names or shapes disagree with the stored model config.
Checkpoint deserialize(std::string_view bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lcseq
