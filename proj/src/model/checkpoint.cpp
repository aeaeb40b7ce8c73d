// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "triaug/errors.hpp"

namespace triaug::model {

namespace {

std::string join_sizes(const std::vector<std::size_t>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(std::string_view text, char sep, std::string_view what) {
  std::vector<std::size_t> out;
  for (std::string_view f : split_fields(text, sep)) out.push_back(parse_u64(f, what));
  return out;
}

void put_f32(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float get_f32(std::string_view in, std::size_t offset) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_model_config(const TriAugConfig& config, KeyValueDoc& doc, const std::string& prefix) {
  doc.set_int(prefix + "embed_dim", config.embed_dim);
  doc.set(prefix + "hidden_sizes", join_sizes(config.hidden_sizes, ','));
  doc.set(prefix + "cosine_scale", config.cosine_scale);
  doc.set_int(prefix + "share_backbone", config.share_backbone ? 1 : 0);
  std::string states;
  for (std::size_t k = 0; k < kNumStates; ++k) {
    if (k) states += ',';
    states += to_string(config.states_enabled[k]);
  }
  doc.set(prefix + "states_enabled", states);
}

TriAugConfig read_model_config(const KeyValueDoc& doc, const std::string& prefix) {
  TriAugConfig c;
  c.embed_dim = doc.get_u64(prefix + "embed_dim");
  c.hidden_sizes = parse_sizes(doc.get(prefix + "hidden_sizes"), ',', "hidden size");
  c.cosine_scale = doc.get_double(prefix + "cosine_scale");
  c.share_backbone = doc.get_u64(prefix + "share_backbone") != 0;
  const auto states = split_fields(doc.get(prefix + "states_enabled"), ',');
  if (states.size() != kNumStates) throw IoError("states_enabled must list exactly 3 states");
  for (std::size_t k = 0; k < kNumStates; ++k) c.states_enabled[k] = parse_state_kind(states[k]);
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  const TriAugModel& model = checkpoint.model;
  KeyValueDoc doc;
  doc.set("format", std::string("triaug-checkpoint-v1"));
  write_model_config(model.config(), doc);
  doc.set_int("model.input_dim", model.input_dim());
  doc.set_int("model.num_classes", model.num_classes());
  doc.set("priors.counts", join_sizes(checkpoint.priors.counts, ','));
  std::vector<std::size_t> mask(checkpoint.mask.bits().begin(), checkpoint.mask.bits().end());
  doc.set("mask", join_sizes(mask, ','));
  doc.set_int("training.seed", checkpoint.training_seed);
  doc.set("blob", std::string(kCheckpointBlob));
  doc.set_int("params", model.parameters().size());

  std::string blob;
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const diff::Parameter& p = model.parameters()[i];
    doc.set("param." + std::to_string(i),
            p.name + ' ' + join_sizes(p.value.shape(), 'x') + ' ' + std::to_string(blob.size()));
    for (double v : p.value.values()) put_f32(blob, static_cast<float>(v));
  }
  for (const auto& [k, v] : checkpoint.metadata.entries()) doc.set("meta." + k, v);

  doc.save(dir / kCheckpointManifest);
  write_text_file(dir / kCheckpointBlob, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const KeyValueDoc doc = KeyValueDoc::load(dir / kCheckpointManifest);
  if (doc.get("format") != "triaug-checkpoint-v1") throw IoError("unsupported checkpoint format in " + dir.string());
  const TriAugConfig config = read_model_config(doc);
  const std::size_t input_dim = doc.get_u64("model.input_dim");
  const std::size_t num_classes = doc.get_u64("model.num_classes");
  const std::string blob = read_text_file(dir / doc.get("blob"));

  std::vector<diff::Parameter> params;
  const std::size_t count = doc.get_u64("params");
  for (std::size_t i = 0; i < count; ++i) {
    const auto fields = split_fields(doc.get("param." + std::to_string(i)), ' ');
    if (fields.size() != 3) throw IoError("malformed entry param." + std::to_string(i));
    const diff::Shape shape = parse_sizes(fields[1], 'x', "parameter shape");
    const std::size_t offset = parse_u64(fields[2], "parameter offset");
    diff::Tensor value(shape);
    if (offset + 4 * value.numel() > blob.size()) {
      throw IoError("parameter " + std::string(fields[0]) + " extends past the end of the blob");
    }
    for (std::size_t j = 0; j < value.numel(); ++j) value[j] = get_f32(blob, offset + 4 * j);
    params.push_back({std::string(fields[0]), std::move(value)});
  }

  std::vector<std::uint8_t> mask;
  for (std::size_t b : parse_sizes(doc.get("mask"), ',', "mask bit")) mask.push_back(b ? 1 : 0);

  KeyValueDoc metadata;
  for (const auto& [k, v] : doc.entries()) {
    if (k.starts_with("meta.")) metadata.set(k.substr(5), v);
  }
  return Checkpoint{TriAugModel(config, input_dim, num_classes, std::move(params)),
                    data::priors_from_counts(parse_sizes(doc.get("priors.counts"), ',', "prior count")),
                    loss::MaskM(std::move(mask)), doc.get_u64("training.seed"), std::move(metadata)};
}

}  // namespace triaug::model
