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

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "narctc/model.hpp"
#include "narctc/training.hpp"

namespace narctc {

enum class ValueSource { kDefault, kFile, kFlag };

std::string to_string(ValueSource source);

struct ConfigValue {
  std::string value;
  ValueSource source = ValueSource::kDefault;
};

// Environment variable naming the config file used when --config is absent.
inline constexpr const char* kConfigEnvVar = "NARCTC_CONFIG";

// Reads `key = value` lines; '#' starts a comment, blank lines are ignored.
// Throws IoError / ConfigError (with the line number).
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

// Every setting of a run, each one traceable to a default, the config file
// or a command-line flag. Values are stored in canonical text form so the
// hash does not depend on spelling ("1e-4" and "0.0001" agree).
class RunConfig {
 public:
  RunConfig();

  // Precedence is by source, not call order: a file value never replaces a
  // flag value.
  void set(std::string_view key, std::string_view value, ValueSource source);
  void apply_file(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  ValueSource source(std::string_view key) const;

  std::size_t get_size(std::string_view key) const;
  double get_real(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  // Empty values read as unset.
  std::optional<std::filesystem::path> get_path(std::string_view key) const;
  std::filesystem::path require_path(std::string_view key) const;

  ModelConfig model_config(std::size_t vocab_size) const;
  TrainingConfig training_config() const;

  // Digest of the model.*, train.* and vocab.* values, sorted by key.
  std::string hash() const;

  // One `key = value  # source` line per setting.
  std::string describe() const;

  const std::map<std::string, ConfigValue, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, ConfigValue, std::less<>> values_;
};

}  // namespace narctc
