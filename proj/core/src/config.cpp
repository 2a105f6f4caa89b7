#include "lcseq/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lcseq {

using Json = nlohmann::ordered_json;

namespace {

Json parse_object(std::string_view text, std::string_view what) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  return j;
}

template <typename T>
T get(const Json& j, std::string_view key) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config key '" + std::string(key) + "' has the wrong type");
  }
}

std::size_t get_size(const Json& j, std::string_view key) {
  if (!j.is_number_unsigned()) throw ConfigError("config key '" + std::string(key) + "' must be a non-negative integer");
  return j.get<std::size_t>();
}

double get_double(const Json& j, std::string_view key) {
  if (!j.is_number()) throw ConfigError("config key '" + std::string(key) + "' must be a number");
  return j.get<double>();
}

template <typename Fn>
auto rethrow_as_config(std::string_view key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + std::string(key) + "': " + e.what());
  }
}

}  // namespace

std::string to_json(const ModelConfig& c) {
  Json j;
  j["embed_dim"] = c.embed_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["vocab_size"] = c.vocab_size;
  j["variant"] = std::string(to_string(c.variant));
  j["length_buckets"] = c.length_buckets;
  j["max_decode_tokens"] = c.max_decode_tokens;
  j["max_source_tokens"] = c.max_source_tokens;
  j["length_scale"] = c.length_scale;
  j["rng_seed"] = c.rng_seed;
  return j.dump();
}

std::string to_json(const TrainConfig& c) {
  Json j;
  j["phase"] = std::string(to_string(c.phase));
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["max_iterations"] = c.max_iterations;
  j["anneal_every"] = c.anneal_every;
  j["anneal_factor"] = c.anneal_factor;
  j["clip_lo"] = c.clip_lo;
  j["clip_hi"] = c.clip_hi;
  j["eval_every"] = c.eval_every;
  j["shaper"] = c.shaper.to_string();
  j["neutralize"] = std::string(to_string(c.neutralize));
  j["target_lengths"] = Json::array({c.target_lengths.lo, c.target_lengths.hi});
  j["probe_lengths"] = c.probe_lengths;
  j["valid_limit"] = c.valid_limit;
  j["variant"] = c.variant ? Json(std::string(to_string(*c.variant))) : Json(nullptr);
  j["seed"] = c.seed;
  return j.dump();
}

void apply_json(std::string_view text, ModelConfig& c) {
  const Json j = parse_object(text, "model config");
  for (const auto& [key, v] : j.items()) {
    if (key == "embed_dim") c.embed_dim = get_size(v, key);
    else if (key == "hidden_dim") c.hidden_dim = get_size(v, key);
    else if (key == "vocab_size") c.vocab_size = get_size(v, key);
    else if (key == "variant") c.variant = rethrow_as_config(key, [&] { return parse_variant(get<std::string>(v, key)); });
    else if (key == "length_buckets") c.length_buckets = get_size(v, key);
    else if (key == "max_decode_tokens") c.max_decode_tokens = get_size(v, key);
    else if (key == "max_source_tokens") c.max_source_tokens = get_size(v, key);
    else if (key == "length_scale") c.length_scale = get_double(v, key);
    else if (key == "rng_seed") c.rng_seed = get_size(v, key);
    else throw ConfigError("unknown model config key '" + key + "'");
  }
}

void apply_json(std::string_view text, TrainConfig& c) {
  const Json j = parse_object(text, "train config");
  for (const auto& [key, v] : j.items()) {
    if (key == "phase") c.phase = rethrow_as_config(key, [&] { return parse_phase(get<std::string>(v, key)); });
    else if (key == "lr") c.lr = get_double(v, key);
    else if (key == "batch_size") c.batch_size = get_size(v, key);
    else if (key == "epochs") c.epochs = get_size(v, key);
    else if (key == "max_iterations") c.max_iterations = get_size(v, key);
    else if (key == "anneal_every") c.anneal_every = get_size(v, key);
    else if (key == "anneal_factor") c.anneal_factor = get_double(v, key);
    else if (key == "clip_lo") c.clip_lo = get_double(v, key);
    else if (key == "clip_hi") c.clip_hi = get_double(v, key);
    else if (key == "eval_every") c.eval_every = get_size(v, key);
    else if (key == "shaper")
      c.shaper = rethrow_as_config(key, [&] { return RewardShaper::parse(get<std::string>(v, key)); });
    else if (key == "neutralize")
      c.neutralize = rethrow_as_config(key, [&] { return parse_neutralize_mode(get<std::string>(v, key)); });
    else if (key == "target_lengths") {
      if (!v.is_array() || v.size() != 2) throw ConfigError("config key 'target_lengths' must be [lo, hi]");
      c.target_lengths = {get_size(v[0], key), get_size(v[1], key)};
    } else if (key == "probe_lengths") {
      if (!v.is_array()) throw ConfigError("config key 'probe_lengths' must be an array");
      c.probe_lengths.clear();
      for (const auto& p : v) c.probe_lengths.push_back(get_size(p, key));
    } else if (key == "valid_limit") c.valid_limit = get_size(v, key);
    else if (key == "variant") {
      if (v.is_null()) c.variant.reset();
      else c.variant = rethrow_as_config(key, [&] { return parse_variant(get<std::string>(v, key)); });
    } else if (key == "seed") c.seed = get_size(v, key);
    else throw ConfigError("unknown train config key '" + key + "'");
  }
}

void apply_config_file(const std::string& path, ModelConfig& model, TrainConfig& train) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const Json j = parse_object(buf.str(), path);
  for (const auto& [key, v] : j.items()) {
    if (key == "model") apply_json(v.dump(), model);
    else if (key == "train") apply_json(v.dump(), train);
    else throw ConfigError(path + ": unknown top-level key '" + key + "'");
  }
}

}  // namespace lcseq
