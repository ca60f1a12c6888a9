#include "rba/optimizer.hpp"

#include <cmath>

#include "rba/errors.hpp"

namespace rba {

AdamW::AdamW(const ModelParams& params, AdamWConfig config) : config_(config) {
  for (const auto& ref : param_registry(params)) {
    m_.emplace_back(ref.tensor->shape());
    v_.emplace_back(ref.tensor->shape());
  }
}

double global_grad_norm(const ModelParams& grads) {
  double sq = 0.0;
  for (const auto& ref : param_registry(grads)) {
    const Tensor& g = *ref.tensor;
    for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
  }
  return std::sqrt(sq);
}

void AdamW::step(ModelParams& params, const ModelParams& grads, double lr, bool tuned_only) {
  auto param_refs = param_registry(params);
  auto grad_refs = param_registry(grads);
  require(param_refs.size() == grad_refs.size(), ErrorCategory::kInvalid,
          "optimizer: registry size mismatch");

  double clip_scale = 1.0;
  if (config_.clip_norm > 0.0) {
    // Clip on the norm of the updated set only, so frozen parameters do not
    // dilute the fine-tuning clip.
    double sq = 0.0;
    for (std::size_t r = 0; r < grad_refs.size(); ++r) {
      if (tuned_only && !param_refs[r].tuned) continue;
      const Tensor& g = *grad_refs[r].tensor;
      for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) clip_scale = config_.clip_norm / norm;
  }

  ++step_count_;
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));

  for (std::size_t r = 0; r < param_refs.size(); ++r) {
    if (tuned_only && !param_refs[r].tuned) continue;
    Tensor& p = *param_refs[r].tensor;
    const Tensor& g_raw = *grad_refs[r].tensor;
    require(p.same_shape(g_raw), ErrorCategory::kInvalid, "optimizer: gradient shape mismatch");
    Tensor& m = m_[r];
    Tensor& v = v_[r];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = g_raw[i] * clip_scale;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * p[i]);
    }
  }
}

double poly_lr(double lr0, long step, long total_steps, double power) {
  if (total_steps <= 0) return lr0;
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * std::pow(std::max(frac, 0.0), power);
}

}  // namespace rba
