// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include "triaug/common/keyvalue.hpp"
#include "triaug/data/dataset.hpp"
#include "triaug/loss/balanced_sphere.hpp"
#include "triaug/model/triaug_model.hpp"

namespace triaug::model {

inline constexpr const char* kCheckpointManifest = "checkpoint.txt";
inline constexpr const char* kCheckpointBlob = "checkpoint.bin";

/// Everything evaluation needs: the model, the training priors and mask, the
/// training seed, and free-form metadata (the harness stores its config
/// there).
struct Checkpoint {
  TriAugModel model;
  data::ClassPriors priors;
  loss::MaskM mask;
  std::uint64_t training_seed = 0;
  KeyValueDoc metadata;
};

/// Manifest `checkpoint.txt` lists `param.<i> = <name> <shape> <byte offset>`;
/// `checkpoint.bin` holds the arrays as little-endian float32, row-major.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

void write_model_config(const TriAugConfig& config, KeyValueDoc& doc, const std::string& prefix = "model.");
TriAugConfig read_model_config(const KeyValueDoc& doc, const std::string& prefix = "model.");

}  // namespace triaug::model
