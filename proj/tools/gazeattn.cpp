#include <CLI11.hpp>
#include <iostream>

#include "gazeattn/commands.hpp"

int main(int argc, char** argv) {
  using namespace gazeattn;
  CLI::App app{"Stochastic gaze attention: train, evaluate, verify and compare"};
  app.require_subcommand(1);

  CommandOptions opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "experiment config file");
    sub->add_option("--seed", opt.seed, "override the config seed");
    sub->add_option("--out", opt.out, "output path");
    sub->add_flag("--quiet", opt.quiet, "suppress human-readable output");
  };

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint plus JSONL log");
  add_common(train);
  train->add_option("--data", opt.data, "training manifest (default: config [data] train or synthetic)");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval);
  eval->add_option("--checkpoint", opt.checkpoint, "checkpoint to evaluate")->required();
  eval->add_option("--data", opt.data, "dataset manifest (default: config test split)");
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  add_common(gradcheck);
  auto* synth = app.add_subcommand("synth", "write the synthetic train/test datasets");
  add_common(synth);
  auto* baselines = app.add_subcommand("baselines", "train and compare all six variants");
  add_common(baselines);
  auto* bench = app.add_subcommand("bench", "time forward, backward, optimizer step and batch kernels");
  add_common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (train->parsed()) return cmd_train(opt, std::cout, std::cerr);
  if (eval->parsed()) return cmd_eval(opt, std::cout, std::cerr);
  if (gradcheck->parsed()) return cmd_gradcheck(opt, std::cout, std::cerr);
  if (synth->parsed()) return cmd_synth(opt, std::cout, std::cerr);
  if (baselines->parsed()) return cmd_baselines(opt, std::cout, std::cerr);
  if (bench->parsed()) return cmd_bench(opt, std::cout, std::cerr);
  return kExitValidation;
}
