// Command-line front end for the outlier-aware mask-classification engine.
//
// Subcommands: gen, train, finetune, score, eval, analyze, gradcheck. Every
// command is driven by a key=value config file plus a master seed, writes
// its resolved config next to its outputs, and is byte-reproducible.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "rba/config.hpp"
#include "rba/errors.hpp"
#include "rba/pipeline.hpp"
#include "rba/training.hpp"

namespace {

rba::ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) return rba::ExperimentConfig::paper_mirror();
  return rba::load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rba: synthetic mask-classification OoD segmentation engine"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = 1;
  app.add_option("--config", config_path, "key=value experiment config (defaults when omitted)");
  app.add_option("--threads", threads, "worker cap; 1 runs the canonical serial order")
      ->check(CLI::PositiveNumber);

  std::string data_dir, out_dir, checkpoint_path, scores_dir;
  std::string split = "test_ood";
  bool pgm = false;

  CLI::App* gen = app.add_subcommand("gen", "generate a dataset of MSEG1 scenes");
  gen->add_option("--out", out_dir, "dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "closed-set training");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output directory")->required();

  CLI::App* finetune = app.add_subcommand("finetune", "outlier fine-tuning of a checkpoint");
  finetune->add_option("--checkpoint", checkpoint_path, "source checkpoint")->required();
  finetune->add_option("--data", data_dir, "dataset directory")->required();
  finetune->add_option("--out", out_dir, "output directory")->required();

  CLI::App* score = app.add_subcommand("score", "write SMAP1 score maps for a split");
  score->add_option("--checkpoint", checkpoint_path, "checkpoint")->required();
  score->add_option("--data", data_dir, "dataset directory")->required();
  score->add_option("--split", split, "dataset split (train|test|test_ood)");
  score->add_option("--out", out_dir, "output directory")->required();
  score->add_flag("--pgm", pgm, "also write normalized 16-bit PGM previews");

  CLI::App* eval = app.add_subcommand("eval", "pixel/component metrics for stored scores");
  eval->add_option("--scores", scores_dir, "scores directory")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--out", out_dir, "output directory")->required();

  CLI::App* analyze =
      app.add_subcommand("analyze", "query specialization, masking ablation, logit modes");
  analyze->add_option("--checkpoint", checkpoint_path, "checkpoint")->required();
  analyze->add_option("--data", data_dir, "dataset directory")->required();
  analyze->add_option("--out", out_dir, "output directory")->required();

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
  gradcheck->add_option("--out", out_dir, "optional report directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const rba::ExperimentConfig config = load_or_default(config_path);
    rba::PipelineOptions options;
    options.threads = threads;

    if (gen->parsed()) {
      rba::cmd_gen(config, out_dir);
    } else if (train->parsed()) {
      rba::cmd_train(config, data_dir, out_dir, options);
    } else if (finetune->parsed()) {
      rba::cmd_finetune(config, checkpoint_path, data_dir, out_dir, options);
    } else if (score->parsed()) {
      rba::cmd_score(config, checkpoint_path, data_dir, split, out_dir, pgm);
    } else if (eval->parsed()) {
      const rba::MetricsReport report = rba::cmd_eval(config, scores_dir, data_dir, out_dir);
      std::cout << rba::render_metrics_report(report);
    } else if (analyze->parsed()) {
      rba::cmd_analyze(config, checkpoint_path, data_dir, out_dir);
    } else if (gradcheck->parsed()) {
      const rba::GradcheckReport report = rba::cmd_gradcheck(config, out_dir);
      std::cout << rba::render_gradcheck(report);
      return report.pass ? 0 : 1;
    }
  } catch (const rba::EngineError& e) {
    std::cerr << "error: category=" << rba::to_string(e.category()) << " " << e.what() << "\n";
    return rba::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: category=internal " << e.what() << "\n";
    return 1;
  }
  return 0;
}
