/*
 * Copyright 2026 The sardec Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sardec/soft_store.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

namespace sardec {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

void fnv_u64(std::uint64_t& h, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  fnv_bytes(h, b, 8);
}

template <class Params>
std::vector<std::pair<std::string, Tensor>> collect(const Params& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  p.for_each_array([&](const std::string& name, const Tensor& t) { out.emplace_back(name, t); });
  return out;
}

const Tensor& find_array(const Checkpoint& c, const std::string& name) {
  for (const auto& [n, t] : c.arrays) {
    if (n == name) return t;
  }
  throw ShapeError("checkpoint is missing array '" + name + "'");
}

json model_json(const ModelConfig& m) {
  return json{{"vocab_size", m.vocab_size}, {"dim", m.dim},       {"n_layers", m.n_layers},
              {"n_heads", m.n_heads},       {"hidden", m.hidden}, {"max_positions", m.max_positions}};
}

}  // namespace

const char* to_string(CheckpointKind kind) {
  return kind == CheckpointKind::weights ? "weights" : "soft";
}

std::string content_checksum(const std::vector<std::pair<std::string, Tensor>>& arrays) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, t] : arrays) {
    fnv_u64(h, name.size());
    fnv_bytes(h, name.data(), name.size());
    fnv_u64(h, t.shape.size());
    for (auto d : t.shape) fnv_u64(h, d);
    for (double v : t.data) fnv_u64(h, std::bit_cast<std::uint64_t>(v));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string weights_checksum(const ModelWeights& weights) {
  return content_checksum(collect(weights));
}

Checkpoint to_checkpoint(const ModelWeights& weights, std::map<std::string, std::string> lineage) {
  weights.validate();
  Checkpoint c;
  c.kind = CheckpointKind::weights;
  c.model = weights.config;
  c.lineage = std::move(lineage);
  c.arrays = collect(weights);
  return c;
}

Checkpoint to_checkpoint(const SoftParams& soft, const ModelConfig& model,
                         std::map<std::string, std::string> lineage) {
  soft.validate(model);
  Checkpoint c;
  c.kind = CheckpointKind::soft;
  c.model = model;
  c.mode = soft.mode;
  c.prompt_len = soft.prompt_len;
  c.n_masks = soft.n_masks;
  c.lineage = std::move(lineage);
  c.arrays = collect(soft);
  return c;
}

ModelWeights weights_from_checkpoint(const Checkpoint& c) {
  if (c.kind != CheckpointKind::weights) throw ShapeError("checkpoint does not hold model weights");
  ModelWeights w = ModelWeights::zeros(c.model);
  w.for_each_array([&](const std::string& name, Tensor& t) {
    const Tensor& src = find_array(c, name);
    if (src.shape != t.shape) throw ShapeError("array '" + name + "' has wrong shape");
    t = src;
  });
  w.validate();
  return w;
}

SoftParams soft_from_checkpoint(const Checkpoint& c, const ModelConfig& expected) {
  if (c.kind != CheckpointKind::soft) throw ShapeError("checkpoint does not hold soft parameters");
  if (c.model.dim != expected.dim || c.model.n_layers != expected.n_layers) {
    throw ShapeError("soft checkpoint was built for dim " + std::to_string(c.model.dim) + " x " +
                     std::to_string(c.model.n_layers) + " layers, weights have dim " +
                     std::to_string(expected.dim) + " x " + std::to_string(expected.n_layers));
  }
  SoftParams s = SoftParams::zeros(expected, c.mode, c.prompt_len, c.n_masks);
  s.for_each_array([&](const std::string& name, Tensor& t) {
    const Tensor& src = find_array(c, name);
    if (src.shape != t.shape) throw ShapeError("array '" + name + "' has wrong shape");
    t = src;
  });
  s.validate(expected);
  return s;
}

std::string serialize(const Checkpoint& c) {
  json j;
  j["format_version"] = c.format_version;
  j["kind"] = to_string(c.kind);
  const json dims = model_json(c.model);
  for (const auto& [k, v] : dims.items()) j[k] = v;
  if (c.kind == CheckpointKind::soft) {
    j["prompting_mode"] = to_string(c.mode);
    j["prompt_len"] = c.prompt_len;
    j["n_masks"] = c.n_masks;
  }
  j["lineage"] = json(c.lineage);
  json arrays = json::object();
  for (const auto& [name, t] : c.arrays) {
    for (double v : t.data) {
      if (!std::isfinite(v)) throw NumericError("array '" + name + "' is not finite");
    }
    arrays[name] = json{{"shape", t.shape}, {"data", t.data}};
  }
  j["arrays"] = std::move(arrays);
  j["checksum"] = content_checksum(c.arrays);
  return j.dump(1) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ChecksumError(std::string("corrupt checkpoint: ") + e.what());
  }
  try {
    Checkpoint c;
    c.format_version = j.at("format_version").get<int>();
    if (c.format_version != kCheckpointFormatVersion) {
      throw VersionError("checkpoint format_version " + std::to_string(c.format_version) +
                         ", expected " + std::to_string(kCheckpointFormatVersion));
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "weights") {
      c.kind = CheckpointKind::weights;
    } else if (kind == "soft") {
      c.kind = CheckpointKind::soft;
    } else {
      throw ShapeError("unknown checkpoint kind '" + kind + "'");
    }
    c.model.vocab_size = j.at("vocab_size").get<int>();
    c.model.dim = j.at("dim").get<int>();
    c.model.n_layers = j.at("n_layers").get<int>();
    c.model.n_heads = j.at("n_heads").get<int>();
    c.model.hidden = j.at("hidden").get<int>();
    c.model.max_positions = j.at("max_positions").get<int>();
    if (c.kind == CheckpointKind::soft) {
      c.mode = prompting_mode_from_string(j.at("prompting_mode").get<std::string>());
      c.prompt_len = j.at("prompt_len").get<int>();
      c.n_masks = j.at("n_masks").get<int>();
    }
    if (j.contains("lineage")) c.lineage = j["lineage"].get<std::map<std::string, std::string>>();
    for (const auto& [name, a] : j.at("arrays").items()) {
      Tensor t;
      t.shape = a.at("shape").get<std::vector<std::size_t>>();
      t.data = a.at("data").get<std::vector<double>>();
      if (t.data.size() != Tensor::element_count(t.shape)) {
        throw ShapeError("array '" + name + "' data length does not match its shape");
      }
      c.arrays.emplace_back(name, std::move(t));
    }
    if (content_checksum(c.arrays) != j.at("checksum").get<std::string>()) {
      throw ChecksumError("checkpoint checksum mismatch");
    }
    return c;
  } catch (const json::exception& e) {
    throw ChecksumError(std::string("corrupt checkpoint: ") + e.what());
  }
}

void save(const Checkpoint& ckpt, const std::string& path) {
  const std::string text = serialize(ckpt);
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp);
    os << text;
    os.flush();
    if (!os) throw IoError("failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move checkpoint into place at " + path + ": " + ec.message());
  }
}

Checkpoint load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace sardec
