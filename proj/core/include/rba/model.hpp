#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "rba/tensor.hpp"

namespace rba {

// Toy mask-classification network: pointwise pixel encoder with a 3x3
// mean-pool context step, learnable object queries, one decoder layer
// (cross-attention over pixels, self-attention over queries, FFN), a
// 3-layer mask MLP and a linear class head with a trailing no-object slot.
struct ModelConfig {
  int in_channels = 8;
  int embed_dim = 16;    // C_p, shared pixel/query width
  int num_queries = 8;   // N
  int num_classes = 4;   // K inlier classes; the class head has K+1 outputs

  int ffn_hidden() const { return 2 * embed_dim; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
  ModelConfig config;

  Tensor enc_w1, enc_b1;  // [C_p, C_in], [C_p]
  Tensor enc_w2, enc_b2;  // [C_p, C_p], [C_p]
  Tensor queries;         // [N, C_p]
  Tensor query_pos;       // [N, C_p]
  Tensor ffn_w1, ffn_b1;  // [F, C_p], [F]
  Tensor ffn_w2, ffn_b2;  // [C_p, F], [C_p]
  Tensor mask_w1, mask_b1;  // [C_p, C_p], [C_p]
  Tensor mask_w2, mask_b2;
  Tensor mask_w3, mask_b3;
  Tensor cls_w, cls_b;    // [K+1, C_p], [K+1]
};

// Fixed-order registry over the named parameters. `tuned` marks the
// restricted fine-tuning set: the mask MLP and the class head.
struct ParamRef {
  std::string_view name;
  Tensor* tensor;
  bool tuned;
};
struct ConstParamRef {
  std::string_view name;
  const Tensor* tensor;
  bool tuned;
};
std::vector<ParamRef> param_registry(ModelParams& params);
std::vector<ConstParamRef> param_registry(const ModelParams& params);
std::size_t total_param_count(const ModelParams& params);
std::size_t tuned_param_count(const ModelParams& params);

// Gaussian init: weights ~ N(0, 1/fan_in), queries and positional
// embeddings ~ N(0, 0.02^2), biases zero.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
ModelParams zero_like(const ModelParams& params);

struct ForwardCache {
  int height = 0, width = 0;
  std::vector<int> active_queries;  // decoder rows -> original query index
  Tensor input;                    // [C_in, HW]
  Tensor enc_z1;                   // [C_p, HW] stage-1 preactivation
  Tensor enc_pooled;               // [C_p, HW]
  Tensor enc_z2;                   // [C_p, HW] stage-2 preactivation
  Tensor feat;                     // F, [C_p, HW]
  Tensor attn;                     // [n, HW] rows sum to 1
  Tensor q_cross;                  // [n, C_p]
  Tensor self_attn;                // [n, n]
  Tensor q_self;                   // [n, C_p]
  Tensor ffn_z1;                   // [n, F]
  Tensor q_refined;                // [n, C_p]
  Tensor mlp_z1, mlp_z2;           // [n, C_p] preactivations
  Tensor q_mask;                   // Q_p, [n, C_p]
  Tensor mask_logits;              // [n, HW]

  // Smallest |preactivation| over all ReLU sites; finite-difference
  // gradient checks skip coordinates that sit on a kink.
  double relu_margin() const;
};

struct ModelOutput {
  Tensor class_probs;   // P, [n, K+1]; rows sum to 1, last column = no-object
  Tensor memberships;   // M, [n, H, W] in (0, 1)
  Tensor logits;        // L, [K, H, W] = sum_n P[n,k] * M[n]; no-object excluded
  ForwardCache cache;
};

ModelOutput forward(const ModelParams& params, const Tensor& features);

enum class MaskMode { kHard, kSoft };

// Evaluates a single query. Hard: every other query is removed before the
// decoder layer. Soft: the full decoder runs, then only keep_query's row
// feeds the heads. The output has a single query row either way.
ModelOutput forward_masked(const ModelParams& params, const Tensor& features,
                           int keep_query, MaskMode mode);

// Gradient of a scalar loss given its partials w.r.t. P and M.
struct UpstreamGrads {
  Tensor d_class_probs;  // [n, K+1]
  Tensor d_memberships;  // [n, H, W]
};

// Folds a gradient w.r.t. the aggregated logits L into (dP, dM) through
// L_k = sum_n P[n,k] * M[n], accumulating into `up`.
void accumulate_logit_grads(const ModelOutput& output, const Tensor& d_logits,
                            UpstreamGrads& up);
UpstreamGrads zero_upstream(const ModelOutput& output);

// Analytic reverse pass through the cached forward graph. Returns one
// gradient tensor per registered parameter (as a ModelParams container).
ModelParams backward(const ModelParams& params, const ModelOutput& output,
                     const UpstreamGrads& upstream);

// Recomputes L from P and M; forward output matches this within 1e-12.
Tensor aggregate_logits(const Tensor& class_probs, const Tensor& memberships);

}  // namespace rba
