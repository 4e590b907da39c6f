// Copyright 2026  The narctc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "narctc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "narctc/data.hpp"
#include "narctc/hash.hpp"

namespace narctc {
namespace {

enum class Kind { kSize, kReal, kOptionalReal, kBool, kText, kMode, kPrecision };

struct KeySpec {
  std::string_view key;
  Kind kind;
  std::string_view fallback;
};

constexpr KeySpec kKeys[] = {
    {"model.d_model", Kind::kSize, "64"},
    {"model.n_heads", Kind::kSize, "4"},
    {"model.d_ff", Kind::kSize, "256"},
    {"model.enc_layers", Kind::kSize, "2"},
    {"model.dec_layers", Kind::kSize, "2"},
    {"model.k", Kind::kSize, "2"},
    {"model.max_source_len", Kind::kSize, "128"},
    {"model.seed", Kind::kSize, "1"},
    {"model.split_positions", Kind::kBool, "true"},
    {"train.base_lr", Kind::kReal, "1e-4"},
    {"train.warmup", Kind::kSize, "8000"},
    {"train.total_steps", Kind::kSize, "100000"},
    {"train.batch_tokens", Kind::kSize, "4096"},
    {"train.beta1", Kind::kReal, "0.9"},
    {"train.beta2", Kind::kReal, "0.98"},
    {"train.eps", Kind::kReal, "1e-9"},
    {"train.clip_norm", Kind::kOptionalReal, "1"},
    {"train.checkpoint_every", Kind::kSize, "1000"},
    {"train.seed", Kind::kSize, "1"},
    {"train.precision", Kind::kPrecision, "float"},
    {"vocab.max_size", Kind::kSize, "32000"},
    {"vocab.min_freq", Kind::kSize, "1"},
    {"path.source", Kind::kText, ""},
    {"path.target", Kind::kText, ""},
    {"path.vocab", Kind::kText, ""},
    {"path.checkpoint", Kind::kText, ""},
    {"path.input", Kind::kText, ""},
    {"path.output", Kind::kText, ""},
    {"path.reference", Kind::kText, ""},
    {"path.log", Kind::kText, ""},
    {"path.report", Kind::kText, ""},
    {"decode.mode", Kind::kMode, "batched"},
    {"decode.batch_size", Kind::kSize, "32"},
    {"bench.warmup", Kind::kSize, "16"},
    {"bench.hardware", Kind::kText, ""},
    {"threads", Kind::kSize, "1"},
};

const KeySpec& spec_for(std::string_view key) {
  for (const auto& s : kKeys)
    if (s.key == key) return s;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::string canonical_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string canonicalize(const KeySpec& spec, std::string_view raw) {
  const std::string value = trim(raw);
  auto bad = [&](const char* what) {
    return ConfigError("config key " + std::string(spec.key) + " expects " + what + ", got '" +
                       value + "'");
  };
  switch (spec.kind) {
    case Kind::kSize: {
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty())
        throw bad("a non-negative integer");
      return std::to_string(v);
    }
    case Kind::kOptionalReal:
      if (value == "none" || value == "off") return "none";
      [[fallthrough]];
    case Kind::kReal: {
      double v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty() ||
          !std::isfinite(v))
        throw bad("a finite number");
      return canonical_real(v);
    }
    case Kind::kBool:
      if (value == "true" || value == "1" || value == "yes" || value == "on") return "true";
      if (value == "false" || value == "0" || value == "no" || value == "off") return "false";
      throw bad("true or false");
    case Kind::kMode:
      if (value == "latency" || value == "batched") return value;
      throw bad("latency or batched");
    case Kind::kPrecision:
      if (value == "float" || value == "double") return value;
      throw bad("float or double");
    case Kind::kText:
      return value;
  }
  return value;
}

}  // namespace

std::string to_string(ValueSource source) {
  switch (source) {
    case ValueSource::kDefault: return "default";
    case ValueSource::kFile: return "file";
    case ValueSource::kFlag: return "flag";
  }
  return "default";
}

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(number) + ": empty key");
    out[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return out;
}

RunConfig::RunConfig() {
  for (const auto& s : kKeys) values_[std::string(s.key)] = {canonicalize(s, s.fallback), ValueSource::kDefault};
}

void RunConfig::set(std::string_view key, std::string_view value, ValueSource source) {
  const KeySpec& spec = spec_for(key);
  auto& slot = values_.find(key)->second;
  if (static_cast<int>(source) < static_cast<int>(slot.source)) return;
  slot = {canonicalize(spec, value), source};
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  for (const auto& [k, v] : parse_config_file(path)) {
    try {
      set(k, v, ValueSource::kFile);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
}

bool RunConfig::has(std::string_view key) const { return values_.find(key) != values_.end(); }

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second.value;
}

ValueSource RunConfig::source(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second.source;
}

std::size_t RunConfig::get_size(std::string_view key) const { return std::stoull(get(key)); }

double RunConfig::get_real(std::string_view key) const {
  const std::string& v = get(key);
  double out = 0;
  std::from_chars(v.data(), v.data() + v.size(), out);
  return out;
}

bool RunConfig::get_bool(std::string_view key) const { return get(key) == "true"; }

std::optional<std::filesystem::path> RunConfig::get_path(std::string_view key) const {
  const std::string& v = get(key);
  if (v.empty()) return std::nullopt;
  return std::filesystem::path(v);
}

std::filesystem::path RunConfig::require_path(std::string_view key) const {
  auto p = get_path(key);
  if (!p) throw ConfigError("no value for " + std::string(key));
  return *p;
}

ModelConfig RunConfig::model_config(std::size_t vocab_size) const {
  ModelConfig c;
  c.d_model = get_size("model.d_model");
  c.n_heads = get_size("model.n_heads");
  c.d_ff = get_size("model.d_ff");
  c.enc_layers = get_size("model.enc_layers");
  c.dec_layers = get_size("model.dec_layers");
  c.split_factor = get_size("model.k");
  c.max_source_len = get_size("model.max_source_len");
  c.seed = get_size("model.seed");
  c.split_positions = get_bool("model.split_positions");
  c.vocab_size = vocab_size;
  c.validate();
  return c;
}

TrainingConfig RunConfig::training_config() const {
  TrainingConfig c;
  c.base_lr = get_real("train.base_lr");
  c.warmup_steps = get_size("train.warmup");
  c.total_steps = get_size("train.total_steps");
  c.batch_token_budget = get_size("train.batch_tokens");
  c.adam_beta1 = get_real("train.beta1");
  c.adam_beta2 = get_real("train.beta2");
  c.adam_eps = get_real("train.eps");
  if (get("train.clip_norm") == "none") {
    c.clip_norm.reset();
  } else {
    c.clip_norm = get_real("train.clip_norm");
  }
  c.checkpoint_every = get_size("train.checkpoint_every");
  c.seed = get_size("train.seed");
  c.validate();
  return c;
}

std::string RunConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : values_) {
    if (k.starts_with("model.") || k.starts_with("train.") || k.starts_with("vocab.")) {
      text += k + "=" + v.value + "\n";
    }
  }
  return hex_digest(fnv1a(text));
}

std::string RunConfig::describe() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v.value + "  # " + to_string(v.source) + "\n";
  return out;
}

}  // namespace narctc
