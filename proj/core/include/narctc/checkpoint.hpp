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
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "narctc/model.hpp"
#include "narctc/training.hpp"

namespace narctc {

// On disk:
//
//   narctc-checkpoint 1
//   model.d_model = 64              <- ModelConfig, flat dotted keys
//   ...
//   vocab.hash = <16 hex digits>
//   config.hash = <16 hex digits>
//   train.step = <n>
//   blob.bytes = <n>
//   blob.fnv1a = <16 hex digits>
//   tensor <name> <d0>x<d1> <byte offset>   <- one line per array
//   end
//   <blob: little-endian float32 arrays at the listed offsets>
//
// Optimizer moments are stored as tensors named opt.m/<param> and
// opt.v/<param>. Writes go to a temporary file that is renamed into place.
struct CheckpointInfo {
  ModelConfig model;
  std::uint64_t vocab_hash = 0;
  std::string config_hash;
  std::size_t step = 0;
};

template <class T>
struct LoadedCheckpoint {
  Model<T> model;
  OptimizerState<T> optimizer;
  CheckpointInfo info;
};

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                     const OptimizerState<T>* optimizer, const CheckpointInfo& info);

// Validates every manifest entry against the model the header describes and
// the blob against its size and checksum. Throws CheckpointError.
template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path);

// Header only, without reading the blob.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

// ModelConfig <-> flat "model.*" keys, shared with the run configuration.
std::map<std::string, std::string> model_config_entries(const ModelConfig& c);
ModelConfig model_config_from_entries(const std::map<std::string, std::string>& entries);

}  // namespace narctc
