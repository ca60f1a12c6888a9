#pragma once

#include <string>

#include "rba/model.hpp"
#include "rba/scene.hpp"

namespace rba {

// Per-pixel outlier scores. Convention: HIGHER = more anomalous for every
// scoring function, so downstream metrics need no per-function flags.
struct ScoreMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // row-major, height * width

  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }

  friend bool operator==(const ScoreMap&, const ScoreMap&) = default;
};

enum class ScoreFn { kRbA, kMsp, kEntropy, kMaxLogit, kEnergy };

const char* to_string(ScoreFn fn);
ScoreFn score_fn_from_string(const std::string& name);

// RbA(x) = -sum_k tanh(L_k(x)); range [-K, K], maximal when every known
// class rejects the pixel.
ScoreMap score_rba(const Tensor& logits);
// 1 - max softmax probability.
ScoreMap score_msp(const Tensor& logits);
// Shannon entropy of softmax(L).
ScoreMap score_entropy(const Tensor& logits);
// -max_k L_k.
ScoreMap score_maxlogit(const Tensor& logits);
// -log sum_k exp(L_k) (free energy).
ScoreMap score_energy(const Tensor& logits);

ScoreMap apply_score_fn(ScoreFn fn, const Tensor& logits);

// Forward pass followed by the selected scoring function. Void pixels carry
// scores; the evaluation layer excludes them using the scene labels.
ScoreMap score_scene(const ModelParams& params, const Scene& scene, ScoreFn fn);

// SMAP1 score-map file: "SMAP1" | u32 H | u32 W | f32[H*W] raw scores
// (little-endian). The raw file is authoritative.
void write_score_map(const ScoreMap& map, const std::string& path);
ScoreMap read_score_map(const std::string& path);

// 16-bit PGM, min-max normalized per map; for visual inspection only.
void write_score_pgm(const ScoreMap& map, const std::string& path);

}  // namespace rba
