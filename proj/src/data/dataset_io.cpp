// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/data/dataset_io.hpp"

#include <string>

#include "triaug/errors.hpp"

namespace triaug::data {

void write_spec(const DatasetSpec& spec, KeyValueDoc& doc, const std::string& prefix) {
  doc.set_int(prefix + "id_classes", spec.id_classes);
  doc.set_int(prefix + "ood_classes", spec.ood_classes);
  doc.set_int(prefix + "feature_dim", spec.feature_dim);
  doc.set(prefix + "imbalance_ratio", spec.imbalance_ratio);
  doc.set_int(prefix + "head_class_size", spec.head_class_size);
  doc.set_int(prefix + "ood_class_size", spec.ood_class_size);
  doc.set_int(prefix + "near_ood_classes", spec.near_ood_classes);
  doc.set(prefix + "cluster_separation", spec.cluster_separation);
  doc.set(prefix + "center_concentration", spec.center_concentration);
  doc.set(prefix + "intra_class_spread", spec.intra_class_spread);
  doc.set(prefix + "far_ood_distance", spec.far_ood_distance);
  doc.set(prefix + "benign_fraction", spec.benign_fraction);
  doc.set_int(prefix + "min_group_size", spec.min_group_size);
  doc.set_int(prefix + "max_group_size", spec.max_group_size);
  doc.set_int(prefix + "seed", spec.seed);
}

DatasetSpec read_spec(const KeyValueDoc& doc, const std::string& prefix) {
  DatasetSpec s;
  s.id_classes = doc.get_u64(prefix + "id_classes");
  s.ood_classes = doc.get_u64(prefix + "ood_classes");
  s.feature_dim = doc.get_u64(prefix + "feature_dim");
  s.imbalance_ratio = doc.get_double(prefix + "imbalance_ratio");
  s.head_class_size = doc.get_u64(prefix + "head_class_size");
  s.ood_class_size = doc.get_u64(prefix + "ood_class_size");
  s.near_ood_classes = doc.get_u64(prefix + "near_ood_classes");
  s.cluster_separation = doc.get_double(prefix + "cluster_separation");
  s.center_concentration = doc.get_double(prefix + "center_concentration");
  s.intra_class_spread = doc.get_double(prefix + "intra_class_spread");
  s.far_ood_distance = doc.get_double(prefix + "far_ood_distance");
  s.benign_fraction = doc.get_double(prefix + "benign_fraction");
  s.min_group_size = doc.get_u64(prefix + "min_group_size");
  s.max_group_size = doc.get_u64(prefix + "max_group_size");
  s.seed = doc.get_u64(prefix + "seed");
  return s;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  KeyValueDoc manifest;
  manifest.set("format", std::string("triaug-dataset-v1"));
  write_spec(dataset.spec, manifest);
  std::string mask;
  for (std::size_t c = 0; c < dataset.malignant.size(); ++c) {
    if (c) mask += ',';
    mask += dataset.malignant[c] ? '1' : '0';
  }
  manifest.set("malignant", mask);
  manifest.set_int("samples", dataset.samples.size());
  manifest.save(dir / kManifestFile);

  std::string text;
  text.reserve(dataset.samples.size() * (dataset.feature_dim() * 11 + 16));
  text += std::to_string(dataset.spec.feature_dim) + ',' + std::to_string(dataset.spec.id_classes) + ',' +
          std::to_string(dataset.spec.ood_classes) + '\n';
  for (const LabeledSample& s : dataset.samples) {
    text += std::to_string(s.group_id);
    text += ',';
    text += std::to_string(s.y);
    text += ',';
    text += std::to_string(static_cast<unsigned>(s.y_star));
    for (float v : s.x) {
      text += ',';
      text += format_float(v);
    }
    text += '\n';
  }
  write_text_file(dir / kSamplesFile, text);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const KeyValueDoc manifest = KeyValueDoc::load(dir / kManifestFile);
  Dataset ds;
  ds.spec = read_spec(manifest);
  ds.spec.validate();
  for (std::string_view bit : split_fields(manifest.get("malignant"), ',')) {
    ds.malignant.push_back(static_cast<std::uint8_t>(parse_u64(bit, "malignant flag")));
  }
  if (ds.malignant.size() != ds.spec.total_classes()) {
    throw IoError("manifest malignant mask length does not match the class count");
  }

  const std::string path = (dir / kSamplesFile).string();
  const std::string text = read_text_file(dir / kSamplesFile);
  const auto lines = split_fields(text, '\n');
  if (lines.empty()) throw IoError(path + ": empty samples file");
  const auto header = split_fields(lines[0], ',');
  if (header.size() != 3) throw IoError(path + ": header must be 'dim,C_id,C_ood'");
  const std::size_t dim = parse_u64(header[0], "dim");
  if (dim != ds.spec.feature_dim || parse_u64(header[1], "C_id") != ds.spec.id_classes ||
      parse_u64(header[2], "C_ood") != ds.spec.ood_classes) {
    throw IoError(path + ": header disagrees with the manifest");
  }
  const std::size_t total_classes = ds.spec.total_classes();
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split_fields(lines[ln], ',');
    if (fields.size() != dim + 3) {
      throw IoError(path + ":" + std::to_string(ln + 1) + ": expected " + std::to_string(dim + 3) +
                    " fields, found " + std::to_string(fields.size()));
    }
    LabeledSample s;
    s.group_id = static_cast<std::uint32_t>(parse_u64(fields[0], "group_id"));
    s.y = static_cast<std::uint32_t>(parse_u64(fields[1], "y"));
    s.y_star = static_cast<std::uint8_t>(parse_u64(fields[2], "y_star"));
    if (s.y >= total_classes) throw IoError(path + ":" + std::to_string(ln + 1) + ": class out of range");
    s.x.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) s.x[k] = parse_float(fields[k + 3], "feature");
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.size() != manifest.get_u64("samples")) {
    throw IoError(path + ": sample count disagrees with the manifest");
  }
  return ds;
}

}  // namespace triaug::data
