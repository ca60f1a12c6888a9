#include "rba/training.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <thread>

#include "rba/checkpoint.hpp"
#include "rba/errors.hpp"
#include "rba/prng.hpp"

namespace rba {

namespace {

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct SceneLoss {
  double total = 0.0, cls = 0.0, bce = 0.0, dice = 0.0, rba = 0.0;
  ModelParams grads;
};

// Forward + match + losses + backward for one (possibly pasted) scene.
SceneLoss scene_pass(const ModelParams& params, const Scene& scene,
                     const LossWeights& weights, bool with_hinge, double alpha,
                     bool normalize_hinge) {
  const ModelOutput out = forward(params, scene.features);
  const GtMaskSet gt = gt_masks_from_labels(scene.labels, params.config.num_classes);

  SceneLoss result;
  UpstreamGrads up = zero_upstream(out);
  if (!gt.masks.empty()) {
    const Tensor cost = pairwise_cost(out, gt, weights);
    const MatchResult match = hungarian(cost);
    const ClosedSetLoss closed = closed_set_loss(out, gt, match, weights);
    result.cls = closed.cls_term;
    result.bce = closed.bce_term;
    result.dice = closed.dice_term;
    result.total += closed.value;
    for (std::size_t i = 0; i < up.d_class_probs.size(); ++i)
      up.d_class_probs[i] += closed.d_class_probs[i];
    for (std::size_t i = 0; i < up.d_memberships.size(); ++i)
      up.d_memberships[i] += closed.d_memberships[i];
  }
  if (with_hinge) {
    const LogitLoss hinge = rba_hinge_loss(out.logits, scene.labels, alpha, normalize_hinge);
    result.rba = hinge.value;
    result.total += hinge.value;
    accumulate_logit_grads(out, hinge.d_logits, up);
  }
  result.grads = backward(params, out, up);
  return result;
}

TrainResult run_training(const TrainConfig& cfg, ModelParams params,
                         const std::vector<Scene>& dataset, const OutlierBank* bank) {
  require(!dataset.empty(), ErrorCategory::kInvalid, "training: empty dataset");
  require(cfg.iterations >= 0 && cfg.batch_size >= 1, ErrorCategory::kInvalid,
          "training: bad iteration/batch settings");
  const bool finetune = cfg.phase == TrainPhase::kFinetune;

  AdamWConfig opt_cfg = cfg.opt;
  AdamW optimizer(params, opt_cfg);
  Xoshiro256ss batch_rng(derive_stream(cfg.seed, "batches", 0));

  TrainResult result;
  result.log.reserve(static_cast<std::size_t>(cfg.iterations));
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<SceneLoss> slots(batch);

  for (long iter = 0; iter < cfg.iterations; ++iter) {
    const double lr = poly_lr(cfg.lr, iter, cfg.iterations, cfg.poly_power);

    // Batch indices are drawn serially so thread count never changes them.
    std::vector<std::size_t> indices(batch);
    for (std::size_t b = 0; b < batch; ++b)
      indices[b] = static_cast<std::size_t>(batch_rng.uniform_int(dataset.size()));

    parallel_for(batch, cfg.threads, [&](std::size_t b) {
      const Scene* scene = &dataset[indices[b]];
      Scene pasted;
      if (finetune) {
        pasted = paste_outlier(*scene, *bank, cfg.p_out,
                               derive_stream(cfg.seed, "paste",
                                             static_cast<std::uint64_t>(iter) * batch + b));
        scene = &pasted;
      }
      slots[b] = scene_pass(params, *scene, cfg.loss_weights, finetune, cfg.alpha,
                            cfg.normalize_hinge);
    });

    // Serial reduction in slot order keeps the sum bit-reproducible.
    ModelParams grads = zero_like(params);
    TrainLogEntry entry;
    entry.iteration = iter;
    entry.lr = lr;
    auto grad_refs = param_registry(grads);
    for (std::size_t b = 0; b < batch; ++b) {
      entry.total += slots[b].total;
      entry.cls += slots[b].cls;
      entry.bce += slots[b].bce;
      entry.dice += slots[b].dice;
      entry.rba += slots[b].rba;
      auto slot_refs = param_registry(slots[b].grads);
      for (std::size_t r = 0; r < grad_refs.size(); ++r) {
        Tensor& dst = *grad_refs[r].tensor;
        const Tensor& src = *slot_refs[r].tensor;
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
    const double inv_batch = 1.0 / static_cast<double>(batch);
    entry.total *= inv_batch;
    entry.cls *= inv_batch;
    entry.bce *= inv_batch;
    entry.dice *= inv_batch;
    entry.rba *= inv_batch;
    for (std::size_t r = 0; r < grad_refs.size(); ++r) {
      Tensor& dst = *grad_refs[r].tensor;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= inv_batch;
    }

    if (!std::isfinite(entry.total)) {
      fail(ErrorCategory::kNumeric,
           "training: non-finite loss at iteration " + std::to_string(iter));
    }

    optimizer.step(params, grads, lr, /*tuned_only=*/finetune);
    result.log.push_back(entry);
  }

  result.params = std::move(params);
  return result;
}

}  // namespace

std::string render_train_log(const std::vector<TrainLogEntry>& log) {
  std::ostringstream out;
  for (const auto& e : log) {
    out << "iter=" << e.iteration << " total=" << format_double(e.total)
        << " cls=" << format_double(e.cls) << " bce=" << format_double(e.bce)
        << " dice=" << format_double(e.dice) << " rba=" << format_double(e.rba)
        << " lr=" << format_double(e.lr) << "\n";
  }
  return out.str();
}

TrainResult train_closed_set(const TrainConfig& config, const ModelConfig& model_config,
                             const std::vector<Scene>& dataset) {
  require(config.phase == TrainPhase::kClosedSet, ErrorCategory::kInvalid,
          "train_closed_set: config phase mismatch");
  ModelParams params = init_params(model_config, derive_stream(config.seed, "init", 0));
  return run_training(config, std::move(params), dataset, nullptr);
}

TrainResult finetune_outlier(const TrainConfig& config, const ModelParams& source,
                             const std::vector<Scene>& dataset, const OutlierBank& bank) {
  require(config.phase == TrainPhase::kFinetune, ErrorCategory::kInvalid,
          "finetune_outlier: config phase mismatch");
  require(!bank.templates.empty(), ErrorCategory::kInvalid, "finetune_outlier: empty bank");

  // Snapshot the frozen set for the byte-level freeze contract.
  std::vector<std::pair<std::string, Tensor>> frozen_before;
  for (const auto& ref : param_registry(source))
    if (!ref.tuned) frozen_before.emplace_back(std::string(ref.name), *ref.tensor);

  TrainResult result = run_training(config, source, dataset, &bank);

  std::size_t cursor = 0;
  for (const auto& ref : param_registry(result.params)) {
    if (ref.tuned) continue;
    const auto& [name, before] = frozen_before[cursor++];
    require(name == ref.name && before == *ref.tensor, ErrorCategory::kInternal,
            "finetune_outlier: frozen parameter " + std::string(ref.name) + " changed");
  }
  return result;
}

GradcheckReport gradcheck(const GradcheckOptions& options) {
  // Tiny configuration; small enough that every coordinate is differenced
  // in well under the acceptance budget.
  SceneConfig scene_cfg;
  scene_cfg.height = 8;
  scene_cfg.width = 8;
  scene_cfg.channels = 4;
  scene_cfg.num_classes = 3;
  scene_cfg.noise_sigma = 0.1;
  scene_cfg.min_shapes = 2;
  scene_cfg.max_shapes = 3;
  scene_cfg.void_border = 1;

  ModelConfig model_cfg;
  model_cfg.in_channels = scene_cfg.channels;
  model_cfg.embed_dim = 8;
  model_cfg.num_queries = 4;
  model_cfg.num_classes = scene_cfg.num_classes;

  const SceneGenerator gen(scene_cfg, options.seed);
  const OutlierBank bank =
      build_outlier_bank(scene_cfg, gen.signatures(), 4, derive_stream(options.seed, "bank", 0));
  const Scene scene = paste_outlier(gen.generate(0), bank, 1.0,
                                    derive_stream(options.seed, "paste", 0));

  ModelParams params = init_params(model_cfg, derive_stream(options.seed, "init", 0));
  const LossWeights weights;
  const double alpha = 5.0;

  // The assignment is frozen at the base point: the analytic gradient
  // treats the discrete match as locally constant.
  const ModelOutput base_out = forward(params, scene.features);
  const GtMaskSet gt = gt_masks_from_labels(scene.labels, model_cfg.num_classes);
  require(!gt.masks.empty(), ErrorCategory::kInternal, "gradcheck: scene has no gt masks");
  const MatchResult match = hungarian(pairwise_cost(base_out, gt, weights));

  struct Eval {
    double value;
    double margin;
  };
  auto evaluate = [&](const ModelParams& p) -> Eval {
    const ModelOutput out = forward(p, scene.features);
    const ClosedSetLoss closed = closed_set_loss(out, gt, match, weights);
    const LogitLoss hinge = rba_hinge_loss(out.logits, scene.labels, alpha, true);
    return {closed.value + hinge.value,
            std::min({out.cache.relu_margin(), closed.kink_margin, hinge.kink_margin})};
  };

  // Analytic gradient at the base point.
  ModelParams grads;
  {
    const ClosedSetLoss closed = closed_set_loss(base_out, gt, match, weights);
    const LogitLoss hinge = rba_hinge_loss(base_out.logits, scene.labels, alpha, true);
    UpstreamGrads up = zero_upstream(base_out);
    for (std::size_t i = 0; i < up.d_class_probs.size(); ++i)
      up.d_class_probs[i] += closed.d_class_probs[i];
    for (std::size_t i = 0; i < up.d_memberships.size(); ++i)
      up.d_memberships[i] += closed.d_memberships[i];
    accumulate_logit_grads(base_out, hinge.d_logits, up);
    grads = backward(params, base_out, up);
  }
  if (options.perturb_gradient != 0.0) grads.cls_w[0] += options.perturb_gradient;

  GradcheckReport report;
  auto param_refs = param_registry(params);
  auto grad_refs = param_registry(grads);
  const double h = options.step;
  for (std::size_t r = 0; r < param_refs.size(); ++r) {
    Tensor& tensor = *param_refs[r].tensor;
    const Tensor& grad = *grad_refs[r].tensor;
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + h;
      const Eval plus = evaluate(params);
      tensor[i] = saved - h;
      const Eval minus = evaluate(params);
      tensor[i] = saved;
      if (std::min(plus.margin, minus.margin) < options.kink_exclusion) {
        ++report.skipped;
        continue;
      }
      const double fd = (plus.value - minus.value) / (2.0 * h);
      const double a = grad[i];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = std::string(param_refs[r].name);
        report.worst_index = i;
      }
    }
  }
  report.pass = report.max_rel_err < options.tolerance && report.checked > 0;
  return report;
}

std::string render_gradcheck(const GradcheckReport& report) {
  std::ostringstream out;
  out << (report.pass ? "PASS" : "FAIL") << " max_rel_err=" << format_double(report.max_rel_err)
      << " checked=" << report.checked << " skipped=" << report.skipped;
  if (!report.worst_param.empty())
    out << " worst=" << report.worst_param << "[" << report.worst_index << "]";
  out << "\n";
  return out.str();
}

}  // namespace rba
