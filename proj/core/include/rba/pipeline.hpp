#pragma once

#include <string>
#include <vector>

#include "rba/config.hpp"
#include "rba/report.hpp"
#include "rba/training.hpp"

namespace rba {

// Experiment orchestration behind the CLI subcommands. Every command is a
// pure function of its inputs and the config seed; rerunning with the same
// arguments reproduces every output byte. Each command writes the resolved
// config next to its outputs and never mutates its inputs.

struct PipelineOptions {
  int threads = 1;
};

// Dataset directory layout:
//   manifest.txt, config.resolved,
//   train/scene_NNNN.mseg, test/scene_NNNN.mseg, test_ood/scene_NNNN.mseg
// test_ood holds the held-out scenes with one pasted outlier each.
void cmd_gen(const ExperimentConfig& config, const std::string& out_dir);

void cmd_train(const ExperimentConfig& config, const std::string& data_dir,
               const std::string& out_dir, const PipelineOptions& options = {});

void cmd_finetune(const ExperimentConfig& config, const std::string& checkpoint_path,
                  const std::string& data_dir, const std::string& out_dir,
                  const PipelineOptions& options = {});

// Writes one SMAP1 file and one LMAP1 argmax-prediction file per scene of
// the chosen split, plus a manifest. With write_pgm, adds normalized PGM
// previews.
void cmd_score(const ExperimentConfig& config, const std::string& checkpoint_path,
               const std::string& data_dir, const std::string& split,
               const std::string& out_dir, bool write_pgm = false);

MetricsReport cmd_eval(const ExperimentConfig& config, const std::string& scores_dir,
                       const std::string& data_dir, const std::string& out_dir);

void cmd_analyze(const ExperimentConfig& config, const std::string& checkpoint_path,
                 const std::string& data_dir, const std::string& out_dir);

// Runs the finite-difference gradient check; returns the report and writes
// it under out_dir when non-empty.
GradcheckReport cmd_gradcheck(const ExperimentConfig& config, const std::string& out_dir);

// Shared helpers.
std::vector<Scene> load_split(const std::string& data_dir, const std::string& split);
std::string scene_file_name(int index);

// LMAP1 label-map file: "LMAP1" | u32 H | u32 W | u8[H*W] codes.
void write_label_map(const LabelMap& labels, const std::string& path);
LabelMap read_label_map(const std::string& path);

}  // namespace rba
