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

#include "narctc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "narctc/hash.hpp"

namespace narctc {
namespace {

constexpr std::string_view kMagic = "narctc-checkpoint 1";

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

void append_floats(std::string& blob, std::span<const float> values) {
  const std::size_t at = blob.size();
  blob.resize(at + values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(values[i]));
    std::memcpy(blob.data() + at + 4 * i, &bits, 4);
  }
}

std::vector<float> read_floats(const std::string& blob, std::size_t offset, std::size_t count) {
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, blob.data() + offset + 4 * i, 4);
    out[i] = std::bit_cast<float>(to_little_endian(bits));
  }
  return out;
}

template <class T>
std::vector<float> as_float(const Tensor<T>& t) {
  return std::vector<float>(t.values().begin(), t.values().end());
}

std::string shape_field(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw CheckpointError("bad value for " + key + ": '" + value + "'");
  }
}

struct ManifestEntry {
  std::string name;
  std::string shape;
  std::size_t offset = 0;
};

struct Header {
  std::map<std::string, std::string> fields;
  std::vector<ManifestEntry> manifest;
};

Header read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw CheckpointError(path.string() + " is not a narctc checkpoint");
  }
  Header h;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    if (line.starts_with("tensor ")) {
      std::istringstream fields(line.substr(7));
      ManifestEntry e;
      std::string offset;
      if (!(fields >> e.name >> e.shape >> offset)) {
        throw CheckpointError("malformed manifest line: " + line);
      }
      e.offset = parse_size("tensor offset", offset);
      h.manifest.push_back(std::move(e));
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw CheckpointError("malformed header line: " + line);
    h.fields[line.substr(0, eq)] = line.substr(eq + 3);
  }
  if (!ended) throw CheckpointError(path.string() + ": header is truncated");
  return h;
}

const std::string& field(const Header& h, const std::string& key) {
  auto it = h.fields.find(key);
  if (it == h.fields.end()) throw CheckpointError("checkpoint header lacks " + key);
  return it->second;
}

CheckpointInfo info_from_header(const Header& h) {
  CheckpointInfo info;
  std::map<std::string, std::string> model;
  for (const auto& [k, v] : h.fields)
    if (k.starts_with("model.")) model[k] = v;
  try {
    info.model = model_config_from_entries(model);
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint model config: ") + e.what());
  }
  const std::string& vocab_hash = field(h, "vocab.hash");
  try {
    std::size_t used = 0;
    info.vocab_hash = std::stoull(vocab_hash, &used, 16);
    if (used != vocab_hash.size()) throw std::invalid_argument(vocab_hash);
  } catch (const std::exception&) {
    throw CheckpointError("bad value for vocab.hash: '" + vocab_hash + "'");
  }
  info.config_hash = field(h, "config.hash");
  info.step = parse_size("train.step", field(h, "train.step"));
  return info;
}

}  // namespace

std::map<std::string, std::string> model_config_entries(const ModelConfig& c) {
  return {
      {"model.d_model", std::to_string(c.d_model)},
      {"model.n_heads", std::to_string(c.n_heads)},
      {"model.d_ff", std::to_string(c.d_ff)},
      {"model.enc_layers", std::to_string(c.enc_layers)},
      {"model.dec_layers", std::to_string(c.dec_layers)},
      {"model.k", std::to_string(c.split_factor)},
      {"model.vocab_size", std::to_string(c.vocab_size)},
      {"model.max_source_len", std::to_string(c.max_source_len)},
      {"model.seed", std::to_string(c.seed)},
      {"model.split_positions", c.split_positions ? "1" : "0"},
  };
}

ModelConfig model_config_from_entries(const std::map<std::string, std::string>& e) {
  auto get = [&](const std::string& key) -> std::size_t {
    auto it = e.find(key);
    if (it == e.end()) throw ConfigError("missing " + key);
    try {
      return std::stoull(it->second);
    } catch (const std::exception&) {
      throw ConfigError("bad value for " + key + ": '" + it->second + "'");
    }
  };
  ModelConfig c;
  c.d_model = get("model.d_model");
  c.n_heads = get("model.n_heads");
  c.d_ff = get("model.d_ff");
  c.enc_layers = get("model.enc_layers");
  c.dec_layers = get("model.dec_layers");
  c.split_factor = get("model.k");
  c.vocab_size = get("model.vocab_size");
  c.max_source_len = get("model.max_source_len");
  c.seed = get("model.seed");
  c.split_positions = get("model.split_positions") != 0;
  c.validate();
  return c;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                     const OptimizerState<T>* optimizer, const CheckpointInfo& info) {
  std::string blob;
  std::vector<ManifestEntry> manifest;
  auto add = [&](const std::string& name, const Tensor<T>& t) {
    manifest.push_back({name, shape_field(t.shape()), blob.size()});
    append_floats(blob, as_float(t));
  };
  for (const auto& p : model.parameters()) add(p.name, p.value);
  if (optimizer) {
    const auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) add("opt.m/" + params[i].name, optimizer->first_moment.at(i));
    for (std::size_t i = 0; i < params.size(); ++i) add("opt.v/" + params[i].name, optimizer->second_moment.at(i));
  }

  std::ostringstream header;
  header << kMagic << "\n";
  for (const auto& [k, v] : model_config_entries(model.config())) header << k << " = " << v << "\n";
  header << "vocab.hash = " << hex_digest(info.vocab_hash) << "\n"
         << "config.hash = " << (info.config_hash.empty() ? "none" : info.config_hash) << "\n"
         << "train.step = " << info.step << "\n"
         << "blob.bytes = " << blob.size() << "\n"
         << "blob.fnv1a = " << hex_digest(fnv1a(blob)) << "\n";
  for (const auto& e : manifest) header << "tensor " << e.name << " " << e.shape << " " << e.offset << "\n";
  header << "end\n";

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    const std::string h = header.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw CheckpointError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  return info_from_header(read_header(in, path));
}

template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  const Header header = read_header(in, path);
  CheckpointInfo info = info_from_header(header);

  const std::size_t bytes = parse_size("blob.bytes", field(header, "blob.bytes"));
  std::string blob(bytes, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    throw CheckpointError(path.string() + " is truncated: expected " + std::to_string(bytes) +
                          " data bytes, found " + std::to_string(in.gcount()));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError(path.string() + " has trailing bytes after its data");
  }
  if (hex_digest(fnv1a(blob)) != field(header, "blob.fnv1a")) {
    throw CheckpointError(path.string() + ": checksum mismatch");
  }

  LoadedCheckpoint<T> out{Model<T>(info.model), OptimizerState<T>{}, info};
  auto& params = out.model.parameters();
  std::map<std::string, const ManifestEntry*> by_name;
  for (const auto& e : header.manifest) by_name[e.name] = &e;

  auto load_into = [&](const std::string& name, Tensor<T>& dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks tensor " + name);
    const ManifestEntry& e = *it->second;
    if (e.shape != shape_field(dst.shape())) {
      throw CheckpointError("tensor " + name + " has shape " + e.shape + ", config expects " +
                            shape_field(dst.shape()));
    }
    if (e.offset + dst.size() * 4 > blob.size()) {
      throw CheckpointError("tensor " + name + " extends past the data blob");
    }
    const auto values = read_floats(blob, e.offset, dst.size());
    std::copy(values.begin(), values.end(), dst.values().begin());
  };

  for (auto& p : params) load_into(p.name, p.value);
  const bool has_optimizer = by_name.count("opt.m/" + params.front().name) > 0;
  std::size_t expected = params.size() * (has_optimizer ? 3 : 1);
  if (header.manifest.size() != expected) {
    throw CheckpointError("checkpoint manifest lists " + std::to_string(header.manifest.size()) +
                          " tensors, config implies " + std::to_string(expected));
  }
  out.optimizer = OptimizerState<T>::for_model(out.model);
  out.optimizer.step_count = info.step;
  if (has_optimizer) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      load_into("opt.m/" + params[i].name, out.optimizer.first_moment[i]);
      load_into("opt.v/" + params[i].name, out.optimizer.second_moment[i]);
    }
  }
  return out;
}

template void save_checkpoint<float>(const std::filesystem::path&, const Model<float>&,
                                     const OptimizerState<float>*, const CheckpointInfo&);
template void save_checkpoint<double>(const std::filesystem::path&, const Model<double>&,
                                      const OptimizerState<double>*, const CheckpointInfo&);
template LoadedCheckpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template LoadedCheckpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace narctc
