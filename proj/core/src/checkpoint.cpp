#include "lcseq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lcseq/config.hpp"

namespace lcseq {

namespace {

using Json = nlohmann::ordered_json;

class Writer {
 public:
  void raw(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str32(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  void str64(std::string_view s) {
    u64(s.size());
    raw(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : in_(bytes) {}

  std::string_view raw(std::size_t n) {
    if (in_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(raw(1)[0]); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str32() { return std::string(raw(u32())); }
  std::string str64() { return std::string(raw(u64())); }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const Checkpoint& ck) {
  if (ck.vocab.size() != ck.model.config.vocab_size)
    throw CheckpointError("vocabulary size does not match the model config");
  Json block;
  block["model"] = Json::parse(to_json(ck.model.config));
  if (ck.provenance.empty()) {
    block["train"] = nullptr;
  } else {
    try {
      block["train"] = Json::parse(ck.provenance);
    } catch (const Json::parse_error&) {
      throw CheckpointError("checkpoint provenance is not valid JSON");
    }
  }

  Writer w;
  w.raw(kCheckpointMagic);
  w.raw("\n");
  w.str64(block.dump());

  const auto tokens = ck.vocab.content_tokens();
  w.u32(static_cast<std::uint32_t>(tokens.size()));
  for (const auto& t : tokens) w.str32(t);

  const auto named = ck.model.params.named();
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    w.str32(name);
    w.u8(tensor->requires_grad() ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(tensor->rank()));
    for (auto d : tensor->shape()) w.u64(d);
    for (double v : tensor->values()) w.f64(v);
  }
  w.u64(ck.seed);
  w.u8(ck.phase == Phase::ml ? 0 : 1);
  return w.take();
}

Checkpoint deserialize(std::string_view bytes) {
  Reader r(bytes);
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos || newline > 16) throw CheckpointError("not a checkpoint file");
  const auto header = r.raw(newline + 1).substr(0, newline);
  if (header != kCheckpointMagic) {
    if (header.starts_with("LCSQ"))
      throw CheckpointError("unsupported checkpoint version '" + std::string(header) + "'");
    throw CheckpointError("not a checkpoint file");
  }

  Checkpoint ck;
  Json block;
  try {
    block = Json::parse(r.str64());
  } catch (const Json::parse_error& e) {
    throw CheckpointError(std::string("corrupt config block: ") + e.what());
  }
  if (!block.is_object() || !block.contains("model")) throw CheckpointError("config block lacks a model section");
  try {
    apply_json(block["model"].dump(), ck.model.config);
    ck.model.config.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("corrupt model config: ") + e.what());
  }
  if (block.contains("train") && !block["train"].is_null()) ck.provenance = block["train"].dump();

  std::vector<std::string> tokens(r.u32());
  for (auto& t : tokens) t = r.str32();
  try {
    ck.vocab = Vocabulary(tokens);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt vocabulary: ") + e.what());
  }
  if (ck.vocab.size() != ck.model.config.vocab_size)
    throw CheckpointError("vocabulary size does not match the model config");

  ck.model.params = ModelParams::initialize(ck.model.config);
  auto named = ck.model.params.named();
  if (r.u32() != named.size()) throw CheckpointError("tensor count does not match the model config");
  for (auto& [expected, tensor] : named) {
    const std::string name = r.str32();
    if (name != expected) throw CheckpointError("expected tensor '" + expected + "', found '" + name + "'");
    const bool trainable = r.u8() != 0;
    ad::Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    if (shape != tensor->shape() || trainable != tensor->requires_grad())
      throw CheckpointError("tensor '" + name + "' has shape " + ad::to_string(shape) + ", expected " +
                            ad::to_string(tensor->shape()));
    auto values = tensor->mutable_values();
    for (double& v : values) v = r.f64();
    try {
      *tensor = ad::Tensor(tensor->shape(), std::vector<double>(values.begin(), values.end()), trainable);
    } catch (const std::exception& e) {
      throw CheckpointError("tensor '" + name + "': " + e.what());
    }
  }
  ck.seed = r.u64();
  const auto phase = r.u8();
  if (phase > 1) throw CheckpointError("unknown training phase tag");
  ck.phase = phase == 0 ? Phase::ml : Phase::rl;
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const std::string bytes = serialize(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize(buf.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

}  // namespace lcseq
