#pragma once

#include <vector>

#include "rba/model.hpp"

namespace rba {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
  double clip_norm = 10.0;  // global gradient-norm clip; <= 0 disables
};

// Decoupled-weight-decay adaptive-moment optimizer over the parameter
// registry. When tuned_only is set, frozen parameters are left untouched:
// no update, no decay, no moment accumulation.
class AdamW {
 public:
  AdamW(const ModelParams& params, AdamWConfig config);

  // Applies one update with the given learning rate. `grads` must come
  // from the same registry layout.
  void step(ModelParams& params, const ModelParams& grads, double lr, bool tuned_only);

  const AdamWConfig& config() const { return config_; }
  long step_count() const { return step_count_; }

 private:
  AdamWConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long step_count_ = 0;
};

// Polynomial decay: lr0 * (1 - t/T)^power for t in [0, T).
double poly_lr(double lr0, long step, long total_steps, double power);

double global_grad_norm(const ModelParams& grads);

}  // namespace rba
