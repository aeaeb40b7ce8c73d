// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "triaug/errors.hpp"
#include "triaug/harness/config.hpp"
#include "triaug/harness/experiment.hpp"

namespace {

using namespace triaug;
using namespace triaug::harness;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Common {
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool config_required, bool many_configs) {
  auto* opt = cmd->add_option("--config", c.configs, many_configs ? "experiment config file(s), JSON" : "experiment config file, JSON");
  if (config_required) opt->required();
  if (!many_configs) opt->expected(1);
  cmd->add_option("--seed", c.seed, "seed (dataset seed for gen-data, training seed otherwise)");
  cmd->add_option("--out", c.out, "output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TriAug: long-tailed classification with OOD detection on synthetic data"};
  app.require_subcommand(1);

  Common gen, train, eval, cmp;
  std::string train_data, eval_data, eval_ckpt, cmp_data, scorers = "all";

  auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_common(gen_cmd, gen, true, false);

  auto* train_cmd = app.add_subcommand("train", "train a model and save a checkpoint");
  add_common(train_cmd, train, true, false);
  train_cmd->add_option("--data", train_data, "dataset directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "score ID and OOD test samples");
  add_common(eval_cmd, eval, false, false);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--scorers", scorers, "comma-separated subset of msp,odin,md,knn, or all");

  auto* cmp_cmd = app.add_subcommand("compare", "train and evaluate several configs on one dataset");
  add_common(cmp_cmd, cmp, true, true);
  cmp_cmd->add_option("--data", cmp_data, "dataset directory (generated under --out when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen_cmd) {
      ExperimentConfig config = load_config(gen.configs.front());
      if (gen.seed) config.dataset.seed = *gen.seed;
      cmd_gen_data(config, gen.out, std::cout);
    } else if (*train_cmd) {
      ExperimentConfig config = load_config(train.configs.front());
      if (train.seed) config.training.seed = *train.seed;
      cmd_train(config, train_data, train.out, std::cout);
    } else if (*eval_cmd) {
      const auto selected = parse_scorer_list(scorers);
      std::optional<OodConfig> ood;
      if (!eval.configs.empty()) ood = load_config(eval.configs.front()).ood;
      if (eval.seed) {
        // Evaluation is deterministic; the seed only has to agree with the checkpoint.
        const auto ckpt_seed = model::load_checkpoint(eval_ckpt).training_seed;
        if (ckpt_seed != *eval.seed) {
          throw ConfigError("--seed " + std::to_string(*eval.seed) + " does not match the checkpoint's training seed " +
                            std::to_string(ckpt_seed));
        }
      }
      const EvalResult result = cmd_eval(eval_ckpt, eval_data, selected, eval.out, std::cout, ood ? &*ood : nullptr);
      std::cout << eval_csv(result);
    } else if (*cmp_cmd) {
      std::vector<ExperimentConfig> configs;
      for (const auto& path : cmp.configs) {
        configs.push_back(load_config(path));
        if (cmp.seed) configs.back().training.seed = *cmp.seed;
      }
      const auto rows = cmd_compare(configs, cmp_data, cmp.out, std::cout);
      std::cout << compare_csv(rows);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOk;
}
