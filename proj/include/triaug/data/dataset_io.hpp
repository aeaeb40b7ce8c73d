// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "triaug/common/keyvalue.hpp"
#include "triaug/data/dataset.hpp"

namespace triaug::data {

inline constexpr const char* kManifestFile = "manifest.txt";
inline constexpr const char* kSamplesFile = "samples.csv";

void write_spec(const DatasetSpec& spec, KeyValueDoc& doc, const std::string& prefix = "dataset.");
DatasetSpec read_spec(const KeyValueDoc& doc, const std::string& prefix = "dataset.");

/// Writes `<dir>/manifest.txt` (dataset parameters + seed) and `<dir>/samples.csv`:
///   dim,C_id,C_ood
///   group_id,y,y_star,x_0,...,x_{d-1}
/// Features are written as shortest round-trip float32 text.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace triaug::data
