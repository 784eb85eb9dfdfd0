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

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sardec/common.hpp"
#include "sardec/toy_lm.hpp"

namespace sardec {

inline constexpr int kCheckpointFormatVersion = 1;

enum class CheckpointKind { weights, soft };

const char* to_string(CheckpointKind kind);

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  CheckpointKind kind = CheckpointKind::weights;
  ModelConfig model;
  // Soft checkpoints only.
  PromptingMode mode = PromptingMode::mask_only;
  int prompt_len = 0;
  int n_masks = 0;
  // Free-form provenance: seeds, source files, config hashes.
  std::map<std::string, std::string> lineage;
  // Named row-major arrays in a fixed order.
  std::vector<std::pair<std::string, Tensor>> arrays;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint to_checkpoint(const ModelWeights& weights,
                         std::map<std::string, std::string> lineage = {});
Checkpoint to_checkpoint(const SoftParams& soft, const ModelConfig& model,
                         std::map<std::string, std::string> lineage = {});

// Throw ShapeError when required arrays are missing or mis-shaped.
ModelWeights weights_from_checkpoint(const Checkpoint& ckpt);
// `expected` is the config of the weights the soft params will run against.
SoftParams soft_from_checkpoint(const Checkpoint& ckpt, const ModelConfig& expected);

// FNV-1a 64 over every array's name, shape and IEEE-754 bytes, as 16 hex digits.
std::string content_checksum(const std::vector<std::pair<std::string, Tensor>>& arrays);
std::string weights_checksum(const ModelWeights& weights);

std::string serialize(const Checkpoint& ckpt);
// Throws VersionError, ChecksumError (including unparsable input) or ShapeError.
Checkpoint parse_checkpoint(std::string_view text);

// Written to a temporary file and renamed into place.
void save(const Checkpoint& ckpt, const std::string& path);
Checkpoint load(const std::string& path);

}  // namespace sardec
