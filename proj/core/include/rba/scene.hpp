#pragma once

#include <cstdint>
#include <vector>

#include "rba/tensor.hpp"

namespace rba {

// Label codes: 0..K-1 inlier classes, 254 outlier, 255 void/ignore.
inline constexpr std::uint8_t kOutlierCode = 254;
inline constexpr std::uint8_t kVoidCode = 255;

struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> codes;  // row-major, height * width

  std::uint8_t at(int y, int x) const { return codes[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int y, int x) { return codes[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return codes.size(); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct SceneConfig {
  int height = 28;
  int width = 28;
  int channels = 8;      // per-pixel feature width
  int num_classes = 4;   // inlier classes 0..K-1; class 0 is the background
  double noise_sigma = 0.1;
  int min_shapes = 6;
  int max_shapes = 10;
  int void_border = 1;   // frame ring labeled void

  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

// Per-pixel input features plus the ground-truth label map. Feature values
// are kept representable in 32-bit floats so container round-trips are
// bit-exact.
struct Scene {
  Tensor features;  // [channels, height, width]
  LabelMap labels;
  std::uint64_t seed = 0;
  SceneConfig meta;
};

// Content equality: dimensions, features, labels (seed/meta are bookkeeping).
bool same_content(const Scene& a, const Scene& b);

// `count` unit-norm rows in `channels` dimensions with pairwise angle
// >= 30 degrees, deterministic in `seed`. Throws kInvalid when the
// requested count cannot be packed (capacity grows with `channels`).
Tensor make_class_signatures(int channels, int count, std::uint64_t seed);

// Deterministic inlier-scene source. Signatures are drawn once per
// (config, master_seed); row K is held out for outliers and never appears
// in inlier scenes.
class SceneGenerator {
 public:
  SceneGenerator(SceneConfig config, std::uint64_t master_seed);

  const SceneConfig& config() const { return config_; }
  std::uint64_t master_seed() const { return master_seed_; }
  const Tensor& signatures() const { return signatures_; }  // [(K+1), channels]

  Scene generate(std::uint64_t index) const;

 private:
  SceneConfig config_;
  std::uint64_t master_seed_;
  Tensor signatures_;
};

struct OutlierTemplate {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> stencil;  // 1 = template pixel
};

// Fixed pool of outlier shape templates sharing the held-out signature.
// The bank never changes after construction.
struct OutlierBank {
  std::vector<OutlierTemplate> templates;
  Tensor signature;  // [channels]
  double noise_sigma = 0.0;

  std::size_t size() const { return templates.size(); }
};

OutlierBank build_outlier_bank(const SceneConfig& config, const Tensor& signatures,
                               int bank_size, std::uint64_t seed);

// With probability p_out (seeded draw) pastes one uniformly chosen template
// at a uniform position fully inside the frame: pasted pixels take the bank
// signature (+ noise) and label 254. Otherwise returns the scene unchanged.
Scene paste_outlier(const Scene& scene, const OutlierBank& bank, double p_out,
                    std::uint64_t seed);

}  // namespace rba
