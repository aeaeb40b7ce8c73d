// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/harness/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "triaug/data/dataset_io.hpp"
#include "triaug/errors.hpp"

namespace triaug::harness {

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", 100.0 * v);
  return buf;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string states_text(const model::StateTriple& s) {
  std::string out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k) out += '|';
    out += model::to_string(s[k]);
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Positions of `view` split by origin. Reads every sample once.
void partition_by_origin(const data::SplitView& view, std::vector<std::size_t>& id, std::vector<std::size_t>& ood) {
  for (std::size_t i = 0; i < view.size(); ++i) {
    (view.dataset().is_ood(view[i]) ? ood : id).push_back(i);
  }
}

std::vector<double> row_scores(const diff::Tensor& z, const ood::MahalanobisModel& md) {
  std::vector<double> out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) out[r] = ood::mahalanobis_score(z.row(r), md);
  return out;
}

struct ScoreInputs {
  diff::Tensor x;
  diff::Tensor z;  // normalized clean embeddings
};

std::vector<double> score_rows(Scorer scorer, const model::TriAugModel& model, const ScoreInputs& in,
                               const ood::EmbeddingBank& bank, const ood::MahalanobisModel* md,
                               const ExperimentConfig& config, std::size_t k) {
  switch (scorer) {
    case Scorer::msp:
      return ood::msp_scores(model.average_logits(in.x));
    case Scorer::odin:
      return ood::odin_scores(model, in.x, {config.ood.odin_temperature, config.ood.odin_epsilon});
    case Scorer::mahalanobis:
      return row_scores(in.z, *md);
    case Scorer::knn:
      return ood::knn_scores(in.z, bank, k, config.ood.threads);
  }
  throw ConfigError("unknown scorer");
}

ExperimentConfig config_from_checkpoint(const model::Checkpoint& ckpt) {
  if (!ckpt.metadata.has("config")) throw ConfigError("checkpoint carries no experiment config");
  try {
    return config_from_json(nlohmann::json::parse(ckpt.metadata.get("config")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint config is malformed: ") + e.what());
  }
}

}  // namespace

std::string_view scorer_name(Scorer s) {
  switch (s) {
    case Scorer::msp:
      return "MSP";
    case Scorer::odin:
      return "ODIN";
    case Scorer::mahalanobis:
      return "MD";
    case Scorer::knn:
      return "KNN";
  }
  return "?";
}

Scorer parse_scorer(std::string_view text) {
  const std::string t = lower(text);
  if (t == "msp") return Scorer::msp;
  if (t == "odin") return Scorer::odin;
  if (t == "md" || t == "mahalanobis") return Scorer::mahalanobis;
  if (t == "knn") return Scorer::knn;
  throw ConfigError("unknown scorer '" + std::string(text) + "' (expected msp, odin, md, knn or all)");
}

std::vector<Scorer> parse_scorer_list(std::string_view text) {
  std::array<bool, kAllScorers.size()> on{};
  for (std::string_view field : split_fields(text, ',')) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    if (field.empty()) continue;
    if (lower(field) == "all") {
      on.fill(true);
    } else {
      on[static_cast<std::size_t>(parse_scorer(field))] = true;
    }
  }
  std::vector<Scorer> out;
  for (Scorer s : kAllScorers) {
    if (on[static_cast<std::size_t>(s)]) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("no scorer selected");
  return out;
}

const ScorerRow& EvalResult::row(Scorer s) const {
  for (const auto& r : rows) {
    if (r.scorer == s) return r;
  }
  throw ConfigError("scorer " + std::string(scorer_name(s)) + " was not evaluated");
}

TrainResult train_experiment(const ExperimentConfig& config, const data::Dataset& dataset, std::ostream& log,
                             data::AccessLog* access) {
  config.validate();
  if (dataset.spec.id_classes != config.dataset.id_classes) {
    throw ShapeError("dataset has " + std::to_string(dataset.spec.id_classes) + " ID classes, config expects " +
                     std::to_string(config.dataset.id_classes));
  }
  const data::Splits splits = data::split(dataset, kSplitRatios, dataset.spec.seed);
  const data::SplitView train = splits.view(dataset, data::Split::train, access);
  const std::size_t C = dataset.id_classes();
  data::ClassPriors priors = data::class_priors(train, C);
  std::vector<std::uint8_t> mask_bits = data::malignant_mask(dataset.spec);
  mask_bits.resize(C);
  loss::MaskM mask(std::move(mask_bits));

  const model::TriAugConfig model_cfg = config.effective_model();
  model::TriAugModel net(model_cfg, dataset.feature_dim(), C, model::init_seed(config.training.seed));

  log << "training " << config.name << " (" << states_text(model_cfg.states_enabled) << ") on " << train.size()
      << " samples, " << config.training.epochs << " epochs\n";
  auto epochs = model::fit(net, train, priors, mask, config.training, config.loss_options(),
                           [&](const model::EpochLog& e) {
                             log << "epoch " << e.epoch << "/" << config.training.epochs
                                 << "  L_S1=" << format_double(e.state[0]) << "  L_mix=" << format_double(e.state[1])
                                 << "  L_rmix=" << format_double(e.state[2]) << "  total=" << format_double(e.total)
                                 << "\n";
                           });

  KeyValueDoc meta;
  meta.set("name", config.name);
  meta.set("config_hash", config_hash(config));
  meta.set("config", canonical_text(config));
  return {model::Checkpoint{std::move(net), std::move(priors), std::move(mask), config.training.seed, std::move(meta)},
          std::move(epochs)};
}

EvalResult evaluate_experiment(const model::Checkpoint& checkpoint, const ExperimentConfig& config,
                               const data::Dataset& dataset, std::span<const Scorer> scorers, std::ostream& log) {
  config.validate();
  const model::TriAugModel& net = checkpoint.model;
  if (net.input_dim() != dataset.feature_dim()) {
    throw ShapeError("checkpoint input dim " + std::to_string(net.input_dim()) + " does not match dataset feature dim " +
                     std::to_string(dataset.feature_dim()));
  }
  if (net.num_classes() != dataset.id_classes()) {
    throw ShapeError("checkpoint has " + std::to_string(net.num_classes()) + " classes, dataset has " +
                     std::to_string(dataset.id_classes()) + " ID classes");
  }
  if (scorers.empty()) throw ConfigError("no scorer selected");

  EvalResult result;
  result.config_hash = config_hash(config);
  const data::Splits splits = data::split(dataset, kSplitRatios, dataset.spec.seed);
  const std::size_t C = dataset.id_classes();

  // Fit phase: train and validation splits only.
  const data::SplitView train = splits.view(dataset, data::Split::train, &result.access);
  const data::SplitView val = splits.view(dataset, data::Split::val, &result.access);
  result.bank = ood::build_bank(net, train);
  result.k = ood::clamp_k(config.ood.k, result.bank.size(), &result.k_clamped);
  if (result.k_clamped) {
    log << "warning: k=" << config.ood.k << " exceeds the bank size, using k=" << result.k << "\n";
  }
  const bool want_md = std::find(scorers.begin(), scorers.end(), Scorer::mahalanobis) != scorers.end();
  ood::MahalanobisModel md;
  if (want_md) md = ood::fit_mahalanobis(result.bank, C, config.ood.mahalanobis_shrinkage);

  ScoreInputs val_in;
  val_in.x = data::feature_matrix(val);
  val_in.z = ood::normalized_embeddings(net, val_in.x);
  result.ood_reads_before_test = result.access.total_ood_reads();

  // Test phase.
  const data::SplitView test = splits.view(dataset, data::Split::test, &result.access);
  std::vector<std::size_t> id_pos, ood_pos;
  partition_by_origin(test, id_pos, ood_pos);
  if (id_pos.empty() || ood_pos.empty()) throw DegenerateInputError("test split needs both ID and OOD samples");
  ScoreInputs id_in, ood_in;
  id_in.x = data::feature_matrix(test, id_pos);
  ood_in.x = data::feature_matrix(test, ood_pos);
  id_in.z = ood::normalized_embeddings(net, id_in.x);
  ood_in.z = ood::normalized_embeddings(net, ood_in.x);
  std::vector<std::size_t> truth(id_pos.size());
  for (std::size_t i = 0; i < id_pos.size(); ++i) truth[i] = test[id_pos[i]].y;
  const std::vector<std::size_t> id_pred = net.predict(id_in.x);
  const std::vector<std::size_t> ood_pred = net.predict(ood_in.x);
  result.id = metrics::classification_report(id_pred, truth, C);

  for (Scorer s : kAllScorers) {
    if (std::find(scorers.begin(), scorers.end(), s) == scorers.end()) continue;
    ScorerRow row;
    row.scorer = s;
    const auto val_scores = score_rows(s, net, val_in, result.bank, &md, config, result.k);
    row.tau = ood::calibrate_tau(val_scores, config.ood.tpr_target);
    const auto accepted = std::count_if(val_scores.begin(), val_scores.end(), [&](double v) { return v >= row.tau; });
    row.calibration_tpr = static_cast<double>(accepted) / static_cast<double>(val_scores.size());

    const auto id_scores = score_rows(s, net, id_in, result.bank, &md, config, result.k);
    const auto ood_scores = score_rows(s, net, ood_in, result.bank, &md, config, result.k);
    row.report = metrics::ood_report(id_scores, ood_scores, config.ood.tpr_target);
    row.report.id = result.id;
    row.scores.tau = row.tau;
    for (std::size_t i = 0; i < id_scores.size(); ++i) row.scores.add(id_scores[i], ood::Origin::id, id_pred[i], truth[i]);
    for (std::size_t i = 0; i < ood_scores.size(); ++i) {
      row.scores.add(ood_scores[i], ood::Origin::ood, ood_pred[i], std::nullopt);
    }
    log << scorer_name(s) << "  AUROC=" << pct(row.report.auroc) << "  FPR@95=" << pct(row.report.fpr_at_95)
        << "  tau=" << format_double(row.tau) << "  calib TPR=" << pct(row.calibration_tpr) << "\n";
    result.rows.push_back(std::move(row));
  }
  log << "ID macro F1=" << pct(result.id.f1) << "  recall=" << pct(result.id.recall)
      << "  precision=" << pct(result.id.precision) << "\n";
  return result;
}

std::string metric_fields(const metrics::ClassificationReport& id, const metrics::MetricReport& ood) {
  return pct(id.f1) + "," + pct(id.recall) + "," + pct(id.precision) + "," + pct(ood.auroc) + "," +
         pct(ood.fpr_at_95) + "," + pct(ood.aupr_in) + "," + pct(ood.aupr_out);
}

std::string eval_csv(const EvalResult& result) {
  std::string out = std::string("scorer,config_hash,") + kMetricColumns + ",tau,calibration_tpr\n";
  for (const auto& r : result.rows) {
    out += std::string(scorer_name(r.scorer)) + "," + result.config_hash + "," + metric_fields(result.id, r.report) +
           "," + format_double(r.tau) + "," + pct(r.calibration_tpr) + "\n";
  }
  return out;
}

KeyValueDoc metrics_document(const EvalResult& result) {
  KeyValueDoc doc;
  doc.set("config_hash", result.config_hash);
  doc.set_int("k", result.k);
  doc.set_int("bank.size", result.bank.size());
  doc.set("id.f1", result.id.f1);
  doc.set("id.recall", result.id.recall);
  doc.set("id.precision", result.id.precision);
  for (std::size_t c = 0; c < result.id.per_class.size(); ++c) {
    const auto& m = result.id.per_class[c];
    const std::string key = "id.class." + std::to_string(c) + ".";
    doc.set(key + "f1", m.f1);
    doc.set(key + "recall", m.recall);
    doc.set(key + "precision", m.precision);
    doc.set_int(key + "support", m.support);
  }
  for (const auto& r : result.rows) {
    const std::string key = lower(scorer_name(r.scorer)) + ".";
    doc.set(key + "auroc", r.report.auroc);
    doc.set(key + "fpr95", r.report.fpr_at_95);
    doc.set(key + "aupr_in", r.report.aupr_in);
    doc.set(key + "aupr_out", r.report.aupr_out);
    doc.set(key + "tau", r.tau);
    doc.set(key + "calibration_tpr", r.calibration_tpr);
  }
  return doc;
}

std::string scores_csv(const ood::ScoreReport& report) {
  std::string out = "origin,truth,predicted,score,decision\n";
  for (const auto& r : report.records) {
    out += r.origin == ood::Origin::id ? "id," : "ood,";
    out += (r.truth ? std::to_string(*r.truth) : std::string()) + ",";
    out += std::to_string(r.predicted) + "," + format_double(r.score) + ",";
    out += r.decision == ood::Origin::id ? "id\n" : "ood\n";
  }
  return out;
}

std::string train_log_csv(const model::StateTriple& states, std::span<const model::EpochLog> epochs) {
  std::string out = "epoch,steps,states,L_S1,L_mix,L_rmix,total\n";
  const std::string st = states_text(states);
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + std::to_string(e.steps) + "," + st + "," + format_double(e.state[0]) + "," +
           format_double(e.state[1]) + "," + format_double(e.state[2]) + "," + format_double(e.total) + "\n";
  }
  return out;
}

void save_run_record(const RunRecord& record, const fs::path& path) {
  KeyValueDoc doc;
  doc.set("name", record.config.name);
  doc.set("config_hash", config_hash(record.config));
  doc.set("config", canonical_text(record.config));
  doc.set("checkpoint", record.checkpoint_path.string());
  doc.set("bank", record.bank_path.string());
  doc.set("wall_clock_seconds", record.wall_clock_seconds);
  const KeyValueDoc metrics = metrics_document(record.eval);
  for (const auto& [k, v] : metrics.entries()) doc.set("metrics." + k, v);
  for (const auto& e : record.epochs) {
    const std::string key = "epoch." + std::to_string(e.epoch) + ".";
    doc.set(key + "L_S1", e.state[0]);
    doc.set(key + "L_mix", e.state[1]);
    doc.set(key + "L_rmix", e.state[2]);
    doc.set(key + "total", e.total);
  }
  doc.save(path);
}

data::Dataset cmd_gen_data(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  config.validate();
  data::Dataset dataset = data::generate(config.dataset);
  ensure_dir(out);
  data::save_dataset(dataset, out);

  auto sizes = data::class_sizes(config.dataset);
  sizes.resize(config.dataset.total_classes(), config.dataset.ood_class_size);
  const auto mal = data::malignant_mask(config.dataset);
  log << "class  kind  group      samples\n";
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    char line[64];
    std::snprintf(line, sizeof line, "%5zu  %-4s  %-9s  %7zu\n", c, c < config.dataset.id_classes ? "ID" : "OOD",
                  mal[c] ? "malignant" : "benign", sizes[c]);
    log << line;
  }
  log << "wrote " << dataset.samples.size() << " samples to " << out.string() << "\n";
  return dataset;
}

TrainResult cmd_train(const ExperimentConfig& config, const fs::path& data_dir, const fs::path& out,
                      std::ostream& log) {
  const data::Dataset dataset = data::load_dataset(data_dir);
  TrainResult result = train_experiment(config, dataset, log);
  ensure_dir(out);
  model::save_checkpoint(result.checkpoint, out);
  write_text_file(out / "train_log.csv", train_log_csv(config.effective_model().states_enabled, result.epochs));
  log << "checkpoint saved to " << out.string() << "\n";
  return result;
}

EvalResult cmd_eval(const fs::path& checkpoint_dir, const fs::path& data_dir, std::span<const Scorer> scorers,
                    const fs::path& out, std::ostream& log, const OodConfig* ood_override) {
  const auto t0 = std::chrono::steady_clock::now();
  const model::Checkpoint ckpt = model::load_checkpoint(checkpoint_dir);
  ExperimentConfig config = config_from_checkpoint(ckpt);
  if (ood_override) {
    config.ood = *ood_override;
    config.validate();
  }
  const data::Dataset dataset = data::load_dataset(data_dir);
  EvalResult result = evaluate_experiment(ckpt, config, dataset, scorers, log);

  ensure_dir(out);
  write_text_file(out / "eval.csv", eval_csv(result));
  metrics_document(result).save(out / "metrics.txt");
  ood::save_bank(result.bank, out / "bank.taeb");
  for (const auto& r : result.rows) {
    write_text_file(out / ("scores_" + lower(scorer_name(r.scorer)) + ".csv"), scores_csv(r.scores));
  }
  RunRecord record{config, checkpoint_dir, out / "bank.taeb", result, {}, seconds_since(t0)};
  save_run_record(record, out / "run.txt");
  return result;
}

std::string compare_csv(std::span<const CompareRow> rows) {
  std::string out = std::string("name,states,config_hash,") + kMetricColumns + "\n";
  for (const auto& r : rows) {
    out += r.name + "," + states_text(r.states) + "," + r.config_hash + "," + metric_fields(r.id, r.ood) + "\n";
  }
  return out;
}

std::vector<CompareRow> cmd_compare(std::span<const ExperimentConfig> configs, const fs::path& data_dir,
                                    const fs::path& out, std::ostream& log) {
  if (configs.empty()) throw ConfigError("compare needs at least one config");
  const std::string dataset_key = config_to_json(configs.front())["dataset"].dump();
  for (const auto& c : configs) {
    c.validate();
    if (config_to_json(c)["dataset"].dump() != dataset_key) {
      throw ConfigError("config '" + c.name + "' uses a different dataset than '" + configs.front().name + "'");
    }
  }
  ensure_dir(out);
  data::Dataset dataset;
  if (data_dir.empty()) {
    dataset = cmd_gen_data(configs.front(), out / "data", log);
  } else {
    dataset = data::load_dataset(data_dir);
  }

  std::vector<CompareRow> rows;
  write_text_file(out / kCompareFile, compare_csv(rows));
  for (const auto& config : configs) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path run_dir = out / "runs" / config.name;
    ensure_dir(run_dir);
    try {
      TrainResult trained = train_experiment(config, dataset, log);
      model::save_checkpoint(trained.checkpoint, run_dir);
      write_text_file(run_dir / "train_log.csv", train_log_csv(config.effective_model().states_enabled, trained.epochs));
      // evaluate what eval would load: float32 weights
      const model::Checkpoint saved = model::load_checkpoint(run_dir);
      EvalResult eval = evaluate_experiment(saved, config, dataset, kAllScorers, log);
      write_text_file(run_dir / "eval.csv", eval_csv(eval));
      metrics_document(eval).save(run_dir / "metrics.txt");
      ood::save_bank(eval.bank, run_dir / "bank.taeb");

      CompareRow row{config.name, eval.config_hash, config.effective_model().states_enabled, eval.id,
                     eval.row(Scorer::knn).report};
      rows.push_back(std::move(row));
      RunRecord record{config, run_dir, run_dir / "bank.taeb", std::move(eval), std::move(trained.epochs),
                       seconds_since(t0)};
      save_run_record(record, run_dir / "run.txt");
    } catch (const std::exception& e) {
      log << "run '" << config.name << "' failed: " << e.what() << "; " << rows.size() << " finished row(s) kept in "
          << (out / kCompareFile).string() << "\n";
      throw;
    }
    write_text_file(out / kCompareFile, compare_csv(rows));
  }
  return rows;
}

}  // namespace triaug::harness
