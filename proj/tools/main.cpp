#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dice: disentangled interest/conformity recommendation experiments"};
  app.require_subcommand(1);

  dice::cli::CommonOptions common;
  std::string ratings, model, bundle, out, checkpoint, reference;
  std::vector<std::string> variants, reports;
  std::string strategy, curriculum, discrepancy;
  bool no_conformity_task = false, per_user = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "Config file (INI-style sections)");
    cmd->add_option("--set", common.overrides,
                    "Override a config value: section.key=value")
        ->take_all();
  };

  CLI::App* prepare = app.add_subcommand(
      "prepare", "Binarize ratings and draw the intervened split");
  add_common(prepare);
  prepare->add_option("--ratings", ratings, "Delimited ratings file");
  prepare->add_option("--out", out, "Bundle output directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train a model on a prepared bundle");
  add_common(train);
  train->add_option("--model", model,
                    "dice | mf | ips | ips-c | ips-cn | ips-cnsr | bias-u | bias-i | "
                    "bias-ui | cause")
      ->required();
  train->add_option("--bundle", bundle, "Prepared bundle directory")->required();
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--strategy", strategy, "pnsm | random (ablation)");
  train->add_option("--curriculum", curriculum, "on | off (ablation)");
  train->add_flag("--no-conformity-task", no_conformity_task,
                  "Drop the conformity modeling task (ablation)");
  train->add_option("--discrepancy", discrepancy, "l1inv | l2inv | dcor");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  add_common(evaluate);
  evaluate->add_option("--model", model, "Model name (itempop needs no checkpoint)");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file");
  evaluate->add_option("--bundle", bundle, "Prepared bundle directory")->required();
  evaluate->add_option("--out", out, "Output directory")->required();
  evaluate->add_option("--variants", variants, "full,int,con (dice only)")
      ->delimiter(',');
  evaluate->add_flag("--per-user", per_user,
                     "Also write per-user metric rows for external tests");

  CLI::App* compare = app.add_subcommand("compare", "Consolidate metric reports");
  compare->add_option("reports", reports, "Two or more report_*.json files")
      ->required()
      ->expected(-2);
  compare->add_option("--reference", reference, "Reference model for relative deltas");
  compare->add_option("--out", out, "Output directory")->required();

  CLI::App* exp = app.add_subcommand("export-embeddings",
                                     "Write embedding CSV plus item metadata");
  exp->add_option("--checkpoint", checkpoint, "dice checkpoint")->required();
  exp->add_option("--bundle", bundle, "Prepared bundle directory")->required();
  exp->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      dice::cli::run_prepare(common, ratings, out);
    } else if (train->parsed()) {
      if (!strategy.empty()) common.overrides.push_back("sampler.strategy=" + strategy);
      if (!curriculum.empty()) {
        common.overrides.push_back("trainer.curriculum=" + curriculum);
      }
      if (no_conformity_task) common.overrides.push_back("trainer.conformity_task=off");
      if (!discrepancy.empty()) {
        common.overrides.push_back("trainer.discrepancy=" + discrepancy);
      }
      dice::cli::run_train(common, model, bundle, out);
    } else if (evaluate->parsed()) {
      dice::cli::run_evaluate(common, model, checkpoint, bundle, out, variants,
                              per_user);
    } else if (compare->parsed()) {
      dice::cli::run_compare(reports, reference, out);
    } else if (exp->parsed()) {
      dice::cli::run_export_embeddings(checkpoint, bundle, out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
