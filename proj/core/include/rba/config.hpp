#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rba/losses.hpp"
#include "rba/metrics.hpp"
#include "rba/model.hpp"
#include "rba/scene.hpp"
#include "rba/scoring.hpp"
#include "rba/training.hpp"

namespace rba {

// Experiment configuration: flat key=value text with dotted section keys,
// '#' comments. Unknown keys are rejected; every run writes the fully
// resolved document (defaults included) next to its outputs.
struct ExperimentConfig {
  std::uint64_t seed = 1;

  // data.*
  SceneConfig scene;
  int train_scenes = 200;
  int test_scenes = 50;
  int bank_size = 300;

  // model.*
  int embed_dim = 16;
  int num_queries = 8;

  // loss.*
  LossWeights loss_weights;

  // train.*
  long train_iterations = 3000;
  int batch_size = 8;
  double train_lr = 1e-3;
  double poly_power = 0.9;
  double weight_decay = 0.05;
  double clip_norm = 10.0;

  // finetune.*
  long finetune_iterations = 500;
  double finetune_lr = 1e-4;
  double alpha = 5.0;
  double p_out = 0.1;
  bool normalize_hinge = true;

  // eval.*
  ScoreFn score_fn = ScoreFn::kRbA;
  double conf_threshold = 0.98;
  double component_tau_min = 0.25;
  double component_tau_max = 0.75;
  double component_tau_step = 0.05;
  double tpr_target = 0.95;
  int kmeans_clusters = 4;
  int analysis_scenes = 25;

  static ExperimentConfig paper_mirror() { return {}; }

  ModelConfig model_config() const;
  TrainConfig train_config(int threads) const;
  TrainConfig finetune_config(int threads) const;
  ComponentEvalConfig component_config() const;

  // Canonical rendering with every key present; reparsing reproduces the
  // config exactly.
  std::string resolved() const;
  std::string config_hash() const;  // FNV-1a of the resolved text, hex
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Shared key=value document helpers (also used by manifests and reports).
std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text);
std::string kv_lookup(const std::vector<std::pair<std::string, std::string>>& doc,
                      const std::string& key);

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string hash_hex(const std::string& bytes);
std::string hash_file(const std::string& path);

}  // namespace rba
