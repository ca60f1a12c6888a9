#include "rba/model.hpp"

#include <cmath>
#include <string>

#include "rba/errors.hpp"
#include "rba/prng.hpp"

namespace rba {

namespace {

Tensor gaussian_tensor(std::vector<std::size_t> shape, double stddev, Xoshiro256ss& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.gaussian();
  return t;
}

// Sum over rows: [n, m] -> [m].
Tensor colsum(const Tensor& t) {
  const std::size_t n = t.dim(0), m = t.dim(1);
  Tensor out({m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += t.at(i, j);
  return out;
}

// Sum over columns: [n, m] -> [n].
Tensor rowsum(const Tensor& t) {
  const std::size_t n = t.dim(0), m = t.dim(1);
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += t.at(i, j);
    out[i] = acc;
  }
  return out;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  require(dst.same_shape(src), ErrorCategory::kInvalid, "add: shape mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void scale_inplace(Tensor& t, double s) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] *= s;
}

Tensor relu_backward(const Tensor& upstream, const Tensor& preact) {
  Tensor out(upstream.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = preact[i] > 0.0 ? upstream[i] : 0.0;
  return out;
}

// Row-wise softmax Jacobian product: given S = softmax(rows) and dS,
// returns dScores.
Tensor softmax_backward_rows(const Tensor& sm, const Tensor& d_sm) {
  const std::size_t n = sm.dim(0), m = sm.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < m; ++j) inner += d_sm.at(i, j) * sm.at(i, j);
    for (std::size_t j = 0; j < m; ++j)
      out.at(i, j) = sm.at(i, j) * (d_sm.at(i, j) - inner);
  }
  return out;
}

// y = x * W^T + b for row-major x [n, in], W [out, in], b [out].
Tensor affine_rows(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul_nt(x, w);
  const std::size_t n = y.dim(0), m = y.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) y.at(i, j) += b[j];
  return y;
}

// 3x3 mean pool over a [C, H*W] plane stack; windows are clipped at the
// frame and averaged over the pixels actually present.
Tensor mean_pool3(const Tensor& x, int height, int width) {
  const std::size_t C = x.dim(0);
  Tensor out(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    const double* src = x.data() + c * static_cast<std::size_t>(height) * width;
    double* dst = out.data() + c * static_cast<std::size_t>(height) * width;
    for (int y = 0; y < height; ++y) {
      const int y0 = std::max(0, y - 1), y1 = std::min(height - 1, y + 1);
      for (int x_ = 0; x_ < width; ++x_) {
        const int x0 = std::max(0, x_ - 1), x1 = std::min(width - 1, x_ + 1);
        double acc = 0.0;
        for (int v = y0; v <= y1; ++v)
          for (int u = x0; u <= x1; ++u) acc += src[v * width + u];
        dst[y * width + x_] = acc / ((y1 - y0 + 1) * (x1 - x0 + 1));
      }
    }
  }
  return out;
}

Tensor mean_pool3_backward(const Tensor& upstream, int height, int width) {
  const std::size_t C = upstream.dim(0);
  Tensor out(upstream.shape());
  for (std::size_t c = 0; c < C; ++c) {
    const double* src = upstream.data() + c * static_cast<std::size_t>(height) * width;
    double* dst = out.data() + c * static_cast<std::size_t>(height) * width;
    for (int y = 0; y < height; ++y) {
      const int y0 = std::max(0, y - 1), y1 = std::min(height - 1, y + 1);
      for (int x_ = 0; x_ < width; ++x_) {
        const int x0 = std::max(0, x_ - 1), x1 = std::min(width - 1, x_ + 1);
        const double share = src[y * width + x_] / ((y1 - y0 + 1) * (x1 - x0 + 1));
        for (int v = y0; v <= y1; ++v)
          for (int u = x0; u <= x1; ++u) dst[v * width + u] += share;
      }
    }
  }
  return out;
}

Tensor gather_rows(const Tensor& t, const std::vector<int>& rows) {
  const std::size_t m = t.dim(1);
  Tensor out({rows.size(), m});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < m; ++j)
      out.at(i, j) = t.at(static_cast<std::size_t>(rows[i]), j);
  return out;
}

struct HeadOutputs {
  Tensor cls_z, class_probs;
  Tensor mlp_z1, mlp_z2, q_mask, mask_logits, memberships_flat;
};

HeadOutputs run_heads(const ModelParams& p, const Tensor& q_refined, const Tensor& feat) {
  HeadOutputs h;
  h.cls_z = affine_rows(q_refined, p.cls_w, p.cls_b);
  h.class_probs = softmax(h.cls_z, 1);
  h.mlp_z1 = affine_rows(q_refined, p.mask_w1, p.mask_b1);
  h.mlp_z2 = affine_rows(relu(h.mlp_z1), p.mask_w2, p.mask_b2);
  h.q_mask = affine_rows(relu(h.mlp_z2), p.mask_w3, p.mask_b3);
  h.mask_logits = matmul(h.q_mask, feat);
  h.memberships_flat = sigmoid(h.mask_logits);
  return h;
}

ModelOutput forward_impl(const ModelParams& p, const Tensor& features,
                         const std::vector<int>& decoder_queries,
                         int keep_after_decoder /* -1 = all */) {
  const ModelConfig& cfg = p.config;
  require(features.rank() == 3, ErrorCategory::kInvalid, "forward: features must be [C, H, W]");
  require(features.dim(0) == static_cast<std::size_t>(cfg.in_channels), ErrorCategory::kMismatch,
          "forward: feature channel count does not match model config");
  const int H = static_cast<int>(features.dim(1));
  const int W = static_cast<int>(features.dim(2));
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));

  ForwardCache cache;
  cache.height = H;
  cache.width = W;
  cache.input = features.reshaped({static_cast<std::size_t>(cfg.in_channels), hw});

  // Pixel encoder: pointwise affine+ReLU, 3x3 mean-pool mixing, pointwise
  // affine+ReLU.
  cache.enc_z1 = matmul(p.enc_w1, cache.input);
  {
    const std::size_t C = cache.enc_z1.dim(0);
    for (std::size_t c = 0; c < C; ++c) {
      double* row = cache.enc_z1.data() + c * hw;
      for (std::size_t i = 0; i < hw; ++i) row[i] += p.enc_b1[c];
    }
  }
  cache.enc_pooled = mean_pool3(relu(cache.enc_z1), H, W);
  cache.enc_z2 = matmul(p.enc_w2, cache.enc_pooled);
  {
    const std::size_t C = cache.enc_z2.dim(0);
    for (std::size_t c = 0; c < C; ++c) {
      double* row = cache.enc_z2.data() + c * hw;
      for (std::size_t i = 0; i < hw; ++i) row[i] += p.enc_b2[c];
    }
  }
  cache.feat = relu(cache.enc_z2);
  ensure_finite(cache.feat, "forward: pixel encoder");

  // Decoder layer: cross-attention over pixels, self-attention over
  // queries, then the FFN, each with a residual connection.
  const Tensor q_act = gather_rows(p.queries, decoder_queries);
  const Tensor pos_act = gather_rows(p.query_pos, decoder_queries);

  Tensor u0 = q_act;
  add_inplace(u0, pos_act);
  Tensor scores = matmul(u0, cache.feat);
  scale_inplace(scores, scale);
  cache.attn = softmax(scores, 1);
  cache.q_cross = matmul_nt(cache.attn, cache.feat);
  add_inplace(cache.q_cross, q_act);

  Tensor u = cache.q_cross;
  add_inplace(u, pos_act);
  Tensor self_scores = matmul_nt(u, u);
  scale_inplace(self_scores, scale);
  cache.self_attn = softmax(self_scores, 1);
  cache.q_self = matmul(cache.self_attn, cache.q_cross);
  add_inplace(cache.q_self, cache.q_cross);

  cache.ffn_z1 = affine_rows(cache.q_self, p.ffn_w1, p.ffn_b1);
  cache.q_refined = affine_rows(relu(cache.ffn_z1), p.ffn_w2, p.ffn_b2);
  add_inplace(cache.q_refined, cache.q_self);
  ensure_finite(cache.q_refined, "forward: decoder layer");

  // Heads; under soft masking only the kept row feeds them.
  Tensor q_heads = cache.q_refined;
  cache.active_queries = decoder_queries;
  if (keep_after_decoder >= 0) {
    q_heads = gather_rows(cache.q_refined, {keep_after_decoder});
    cache.active_queries = {decoder_queries[static_cast<std::size_t>(keep_after_decoder)]};
  }
  HeadOutputs heads = run_heads(p, q_heads, cache.feat);
  ensure_finite(heads.memberships_flat, "forward: heads");
  cache.mlp_z1 = std::move(heads.mlp_z1);
  cache.mlp_z2 = std::move(heads.mlp_z2);
  cache.q_mask = std::move(heads.q_mask);
  cache.mask_logits = std::move(heads.mask_logits);

  ModelOutput out;
  out.class_probs = std::move(heads.class_probs);
  out.memberships =
      heads.memberships_flat.reshaped({q_heads.dim(0), static_cast<std::size_t>(H),
                                       static_cast<std::size_t>(W)});
  out.logits = aggregate_logits(out.class_probs, out.memberships);
  out.cache = std::move(cache);
  return out;
}

}  // namespace

double ForwardCache::relu_margin() const {
  double margin = std::numeric_limits<double>::infinity();
  for (const Tensor* z : {&enc_z1, &enc_z2, &ffn_z1, &mlp_z1, &mlp_z2}) {
    for (std::size_t i = 0; i < z->size(); ++i)
      margin = std::min(margin, std::abs((*z)[i]));
  }
  return margin;
}

std::vector<ParamRef> param_registry(ModelParams& p) {
  return {
      {"enc_w1", &p.enc_w1, false},   {"enc_b1", &p.enc_b1, false},
      {"enc_w2", &p.enc_w2, false},   {"enc_b2", &p.enc_b2, false},
      {"queries", &p.queries, false}, {"query_pos", &p.query_pos, false},
      {"ffn_w1", &p.ffn_w1, false},   {"ffn_b1", &p.ffn_b1, false},
      {"ffn_w2", &p.ffn_w2, false},   {"ffn_b2", &p.ffn_b2, false},
      {"mask_w1", &p.mask_w1, true},  {"mask_b1", &p.mask_b1, true},
      {"mask_w2", &p.mask_w2, true},  {"mask_b2", &p.mask_b2, true},
      {"mask_w3", &p.mask_w3, true},  {"mask_b3", &p.mask_b3, true},
      {"cls_w", &p.cls_w, true},      {"cls_b", &p.cls_b, true},
  };
}

std::vector<ConstParamRef> param_registry(const ModelParams& p) {
  std::vector<ConstParamRef> refs;
  for (const ParamRef& ref : param_registry(const_cast<ModelParams&>(p)))
    refs.push_back({ref.name, ref.tensor, ref.tuned});
  return refs;
}

std::size_t total_param_count(const ModelParams& p) {
  std::size_t n = 0;
  for (const auto& ref : param_registry(p)) n += ref.tensor->size();
  return n;
}

std::size_t tuned_param_count(const ModelParams& p) {
  std::size_t n = 0;
  for (const auto& ref : param_registry(p))
    if (ref.tuned) n += ref.tensor->size();
  return n;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  require(cfg.in_channels >= 1 && cfg.embed_dim >= 1 && cfg.num_queries >= 1 &&
              cfg.num_classes >= 1,
          ErrorCategory::kInvalid, "model: all dimensions must be >= 1");
  const std::size_t cin = static_cast<std::size_t>(cfg.in_channels);
  const std::size_t cp = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t n = static_cast<std::size_t>(cfg.num_queries);
  const std::size_t fh = static_cast<std::size_t>(cfg.ffn_hidden());
  const std::size_t kc = static_cast<std::size_t>(cfg.num_classes + 1);

  Xoshiro256ss rng(derive_stream(seed, "model_init", 0));
  auto weight = [&rng](std::vector<std::size_t> shape, std::size_t fan_in) {
    return gaussian_tensor(std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  };

  ModelParams p;
  p.config = cfg;
  p.enc_w1 = weight({cp, cin}, cin);
  p.enc_b1 = Tensor({cp});
  p.enc_w2 = weight({cp, cp}, cp);
  p.enc_b2 = Tensor({cp});
  p.queries = gaussian_tensor({n, cp}, 0.02, rng);
  p.query_pos = gaussian_tensor({n, cp}, 0.02, rng);
  p.ffn_w1 = weight({fh, cp}, cp);
  p.ffn_b1 = Tensor({fh});
  p.ffn_w2 = weight({cp, fh}, fh);
  p.ffn_b2 = Tensor({cp});
  p.mask_w1 = weight({cp, cp}, cp);
  p.mask_b1 = Tensor({cp});
  p.mask_w2 = weight({cp, cp}, cp);
  p.mask_b2 = Tensor({cp});
  p.mask_w3 = weight({cp, cp}, cp);
  p.mask_b3 = Tensor({cp});
  p.cls_w = weight({kc, cp}, cp);
  p.cls_b = Tensor({kc});
  return p;
}

ModelParams zero_like(const ModelParams& params) {
  ModelParams z;
  z.config = params.config;
  auto src = param_registry(params);
  auto dst = param_registry(z);
  for (std::size_t i = 0; i < src.size(); ++i)
    *dst[i].tensor = Tensor(src[i].tensor->shape());
  return z;
}

Tensor aggregate_logits(const Tensor& class_probs, const Tensor& memberships) {
  const std::size_t n = class_probs.dim(0);
  require(memberships.rank() == 3 && memberships.dim(0) == n, ErrorCategory::kInvalid,
          "aggregate: P and M row counts disagree");
  const std::size_t k = class_probs.dim(1) - 1;  // no-object column excluded
  const std::size_t hw = memberships.dim(1) * memberships.dim(2);
  Tensor logits({k, memberships.dim(1), memberships.dim(2)});
  for (std::size_t q = 0; q < n; ++q) {
    const double* m_row = memberships.data() + q * hw;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = class_probs.at(q, c);
      if (p == 0.0) continue;
      double* l_row = logits.data() + c * hw;
      for (std::size_t i = 0; i < hw; ++i) l_row[i] += p * m_row[i];
    }
  }
  return logits;
}

ModelOutput forward(const ModelParams& params, const Tensor& features) {
  std::vector<int> all(static_cast<std::size_t>(params.config.num_queries));
  for (int i = 0; i < params.config.num_queries; ++i) all[static_cast<std::size_t>(i)] = i;
  return forward_impl(params, features, all, -1);
}

ModelOutput forward_masked(const ModelParams& params, const Tensor& features,
                           int keep_query, MaskMode mode) {
  require(keep_query >= 0 && keep_query < params.config.num_queries, ErrorCategory::kInvalid,
          "forward_masked: query index out of range");
  if (mode == MaskMode::kHard) {
    return forward_impl(params, features, {keep_query}, -1);
  }
  std::vector<int> all(static_cast<std::size_t>(params.config.num_queries));
  for (int i = 0; i < params.config.num_queries; ++i) all[static_cast<std::size_t>(i)] = i;
  return forward_impl(params, features, all, keep_query);
}

UpstreamGrads zero_upstream(const ModelOutput& output) {
  UpstreamGrads up;
  up.d_class_probs = Tensor(output.class_probs.shape());
  up.d_memberships = Tensor(output.memberships.shape());
  return up;
}

void accumulate_logit_grads(const ModelOutput& output, const Tensor& d_logits,
                            UpstreamGrads& up) {
  const std::size_t n = output.class_probs.dim(0);
  const std::size_t k = output.class_probs.dim(1) - 1;
  const std::size_t hw = output.memberships.dim(1) * output.memberships.dim(2);
  require(d_logits.size() == k * hw, ErrorCategory::kInvalid,
          "logit grads: shape mismatch");
  for (std::size_t q = 0; q < n; ++q) {
    const double* m_row = output.memberships.data() + q * hw;
    double* dm_row = up.d_memberships.data() + q * hw;
    for (std::size_t c = 0; c < k; ++c) {
      const double* dl_row = d_logits.data() + c * hw;
      const double p = output.class_probs.at(q, c);
      double dp = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        dp += dl_row[i] * m_row[i];
        dm_row[i] += dl_row[i] * p;
      }
      up.d_class_probs.at(q, c) += dp;
    }
  }
}

ModelParams backward(const ModelParams& p, const ModelOutput& output,
                     const UpstreamGrads& upstream) {
  const ModelConfig& cfg = p.config;
  const ForwardCache& c = output.cache;
  const std::size_t n_active = c.active_queries.size();
  require(n_active == static_cast<std::size_t>(cfg.num_queries) &&
              c.q_refined.dim(0) == n_active && output.class_probs.dim(0) == n_active,
          ErrorCategory::kMismatch, "backward: cache does not hold a full forward pass");
  require(upstream.d_class_probs.same_shape(output.class_probs) &&
              upstream.d_memberships.same_shape(output.memberships),
          ErrorCategory::kInvalid, "backward: upstream gradient shapes disagree");
  const std::size_t hw = static_cast<std::size_t>(c.height) * c.width;
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));

  ModelParams g = zero_like(p);

  // Class head (softmax rows).
  const Tensor d_cls_z = softmax_backward_rows(output.class_probs, upstream.d_class_probs);
  g.cls_w = matmul_tn(d_cls_z, c.q_refined);
  g.cls_b = colsum(d_cls_z);
  Tensor d_q_refined = matmul(d_cls_z, p.cls_w);

  // Membership head (sigmoid of Q_p * F).
  Tensor d_mask_logits({n_active, hw});
  {
    const Tensor m_flat = output.memberships.reshaped({n_active, hw});
    for (std::size_t i = 0; i < d_mask_logits.size(); ++i) {
      const double m = m_flat[i];
      d_mask_logits[i] = upstream.d_memberships[i] * m * (1.0 - m);
    }
  }
  Tensor d_q_mask = matmul_nt(d_mask_logits, c.feat);
  Tensor d_feat = matmul_tn(c.q_mask, d_mask_logits);

  // Mask MLP.
  const Tensor mlp_h2 = relu(c.mlp_z2);
  const Tensor mlp_h1 = relu(c.mlp_z1);
  g.mask_w3 = matmul_tn(d_q_mask, mlp_h2);
  g.mask_b3 = colsum(d_q_mask);
  Tensor d_z2 = relu_backward(matmul(d_q_mask, p.mask_w3), c.mlp_z2);
  g.mask_w2 = matmul_tn(d_z2, mlp_h1);
  g.mask_b2 = colsum(d_z2);
  Tensor d_z1 = relu_backward(matmul(d_z2, p.mask_w2), c.mlp_z1);
  g.mask_w1 = matmul_tn(d_z1, c.q_refined);
  g.mask_b1 = colsum(d_z1);
  add_inplace(d_q_refined, matmul(d_z1, p.mask_w1));

  // FFN with residual.
  const Tensor ffn_h1 = relu(c.ffn_z1);
  g.ffn_w2 = matmul_tn(d_q_refined, ffn_h1);
  g.ffn_b2 = colsum(d_q_refined);
  Tensor d_ffn_z1 = relu_backward(matmul(d_q_refined, p.ffn_w2), c.ffn_z1);
  g.ffn_w1 = matmul_tn(d_ffn_z1, c.q_self);
  g.ffn_b1 = colsum(d_ffn_z1);
  Tensor d_q_self = d_q_refined;
  add_inplace(d_q_self, matmul(d_ffn_z1, p.ffn_w1));

  // Self-attention with residual; queries and keys carry the positional
  // embedding, values do not.
  const Tensor pos_act = gather_rows(p.query_pos, c.active_queries);
  Tensor u = c.q_cross;
  add_inplace(u, pos_act);
  Tensor d_q_cross = d_q_self;                              // residual
  add_inplace(d_q_cross, matmul_tn(c.self_attn, d_q_self)); // value path
  Tensor d_self_scores =
      softmax_backward_rows(c.self_attn, matmul_nt(d_q_self, c.q_cross));
  Tensor d_u = matmul(d_self_scores, u);
  add_inplace(d_u, matmul_tn(d_self_scores, u));
  scale_inplace(d_u, scale);
  add_inplace(d_q_cross, d_u);
  Tensor d_pos = d_u;

  // Cross-attention with residual.
  Tensor d_attn = matmul(d_q_cross, c.feat);
  add_inplace(d_feat, matmul_tn(d_q_cross, c.attn));
  Tensor d_scores = softmax_backward_rows(c.attn, d_attn);
  scale_inplace(d_scores, scale);
  Tensor u0 = gather_rows(p.queries, c.active_queries);
  add_inplace(u0, pos_act);
  Tensor d_u0 = matmul_nt(d_scores, c.feat);
  add_inplace(d_feat, matmul_tn(u0, d_scores));
  Tensor d_queries = d_q_cross;  // residual
  add_inplace(d_queries, d_u0);
  add_inplace(d_pos, d_u0);

  for (std::size_t i = 0; i < n_active; ++i) {
    const std::size_t q = static_cast<std::size_t>(c.active_queries[i]);
    for (std::size_t j = 0; j < d_queries.dim(1); ++j) {
      g.queries.at(q, j) += d_queries.at(i, j);
      g.query_pos.at(q, j) += d_pos.at(i, j);
    }
  }

  // Pixel encoder.
  Tensor d_enc_z2 = relu_backward(d_feat, c.enc_z2);
  g.enc_w2 = matmul_nt(d_enc_z2, c.enc_pooled);
  g.enc_b2 = rowsum(d_enc_z2);
  const Tensor d_pooled = matmul_tn(p.enc_w2, d_enc_z2);
  Tensor d_h1 = mean_pool3_backward(d_pooled, c.height, c.width);
  Tensor d_enc_z1 = relu_backward(d_h1, c.enc_z1);
  g.enc_w1 = matmul_nt(d_enc_z1, c.input);
  g.enc_b1 = rowsum(d_enc_z1);

  return g;
}

}  // namespace rba
