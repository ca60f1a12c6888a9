#include "rba/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rba/errors.hpp"
#include "rba/prng.hpp"

namespace rba {

namespace {

constexpr double kMinAngleDeg = 30.0;

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// Quantize through f32 so scenes survive the 32-bit container bit-exactly.
inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

struct ShapeSpec {
  bool ellipse = false;
  int cy = 0, cx = 0, hy = 1, hx = 1;
  std::uint8_t class_id = 0;
};

void paint_shape(LabelMap& labels, const ShapeSpec& s) {
  for (int y = s.cy - s.hy; y <= s.cy + s.hy; ++y) {
    if (y < 0 || y >= labels.height) continue;
    for (int x = s.cx - s.hx; x <= s.cx + s.hx; ++x) {
      if (x < 0 || x >= labels.width) continue;
      if (s.ellipse) {
        const double dy = static_cast<double>(y - s.cy) / s.hy;
        const double dx = static_cast<double>(x - s.cx) / s.hx;
        if (dy * dy + dx * dx > 1.0) continue;
      }
      labels.at(y, x) = s.class_id;
    }
  }
}

}  // namespace

bool same_content(const Scene& a, const Scene& b) {
  return a.features == b.features && a.labels == b.labels;
}

Tensor make_class_signatures(int channels, int count, std::uint64_t seed) {
  require(channels >= 2, ErrorCategory::kInvalid, "signatures: need channels >= 2");
  require(count >= 1, ErrorCategory::kInvalid, "signatures: need count >= 1");
  const double max_cos = std::cos(kMinAngleDeg * M_PI / 180.0);
  Xoshiro256ss rng(seed);
  Tensor sig({static_cast<std::size_t>(count), static_cast<std::size_t>(channels)});
  const std::size_t d = static_cast<std::size_t>(channels);
  std::vector<double> candidate(d);
  constexpr int kMaxAttempts = 20000;
  int attempts = 0;
  for (int row = 0; row < count; ++row) {
    while (true) {
      if (++attempts > kMaxAttempts) {
        fail(ErrorCategory::kInvalid,
             "signatures: cannot pack " + std::to_string(count) + " rows with pairwise angle >= 30 deg in " +
                 std::to_string(channels) + " channels");
      }
      double norm_sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        candidate[j] = rng.gaussian();
        norm_sq += candidate[j] * candidate[j];
      }
      if (norm_sq < 1e-12) continue;
      const double inv_norm = 1.0 / std::sqrt(norm_sq);
      for (std::size_t j = 0; j < d; ++j) candidate[j] *= inv_norm;
      bool separated = true;
      for (int prev = 0; prev < row; ++prev) {
        if (std::abs(dot(candidate.data(), sig.data() + static_cast<std::size_t>(prev) * d, d)) > max_cos) {
          separated = false;
          break;
        }
      }
      if (separated) break;
    }
    for (std::size_t j = 0; j < d; ++j) sig.at(static_cast<std::size_t>(row), j) = candidate[j];
  }
  return sig;
}

SceneGenerator::SceneGenerator(SceneConfig config, std::uint64_t master_seed)
    : config_(config), master_seed_(master_seed) {
  require(config_.height >= 8 && config_.width >= 8, ErrorCategory::kInvalid,
          "scene: height and width must be >= 8");
  require(config_.channels >= 2, ErrorCategory::kInvalid, "scene: channels must be >= 2");
  require(config_.num_classes >= 1, ErrorCategory::kInvalid, "scene: num_classes must be >= 1");
  require(config_.num_classes <= 253, ErrorCategory::kInvalid,
          "scene: class codes must stay below the outlier code");
  require(config_.min_shapes >= 0 && config_.max_shapes >= config_.min_shapes,
          ErrorCategory::kInvalid, "scene: bad shape count range");
  require(config_.noise_sigma >= 0.0, ErrorCategory::kInvalid, "scene: negative noise");
  require(config_.void_border >= 0 &&
              2 * config_.void_border < std::min(config_.height, config_.width),
          ErrorCategory::kInvalid, "scene: void border swallows the frame");
  // One extra row is reserved as the held-out outlier signature.
  signatures_ = make_class_signatures(config_.channels, config_.num_classes + 1,
                                      derive_stream(master_seed_, "signatures", 0));
}

Scene SceneGenerator::generate(std::uint64_t index) const {
  const SceneConfig& cfg = config_;
  const int H = cfg.height, W = cfg.width, C = cfg.channels, K = cfg.num_classes;

  Scene scene;
  scene.seed = derive_stream(master_seed_, "scene", index);
  scene.meta = cfg;
  scene.labels.height = H;
  scene.labels.width = W;
  scene.labels.codes.assign(static_cast<std::size_t>(H) * W, 0);

  Xoshiro256ss shapes_rng(derive_stream(scene.seed, "shapes", 0));
  Xoshiro256ss noise_rng(derive_stream(scene.seed, "noise", 0));

  // Shapes are painted back-to-front: later entries overwrite earlier ones.
  // The frontmost K-1 shapes carry a permutation of all non-background
  // classes so that every class ends up visible in almost every scene.
  if (K > 1 && cfg.max_shapes > 0) {
    const int span = cfg.max_shapes - cfg.min_shapes + 1;
    const int count =
        cfg.min_shapes + static_cast<int>(shapes_rng.uniform_int(static_cast<std::uint64_t>(span)));
    std::vector<std::uint8_t> cover(static_cast<std::size_t>(K - 1));
    std::iota(cover.begin(), cover.end(), static_cast<std::uint8_t>(1));
    shapes_rng.shuffle(cover.data(), cover.size());

    const int interior = std::min(H, W) - 2 * cfg.void_border;
    const int max_half = std::max(2, interior / 4);
    for (int s = 0; s < count; ++s) {
      ShapeSpec spec;
      spec.ellipse = (shapes_rng.next() & 1u) != 0;
      spec.hy = 2 + static_cast<int>(shapes_rng.uniform_int(static_cast<std::uint64_t>(max_half - 1)));
      spec.hx = 2 + static_cast<int>(shapes_rng.uniform_int(static_cast<std::uint64_t>(max_half - 1)));
      const int y_lo = cfg.void_border + spec.hy;
      const int y_hi = H - 1 - cfg.void_border - spec.hy;
      const int x_lo = cfg.void_border + spec.hx;
      const int x_hi = W - 1 - cfg.void_border - spec.hx;
      if (y_hi < y_lo || x_hi < x_lo) continue;
      spec.cy = y_lo + static_cast<int>(shapes_rng.uniform_int(static_cast<std::uint64_t>(y_hi - y_lo + 1)));
      spec.cx = x_lo + static_cast<int>(shapes_rng.uniform_int(static_cast<std::uint64_t>(x_hi - x_lo + 1)));
      const int front_rank = count - 1 - s;
      spec.class_id = front_rank < K - 1
                          ? cover[static_cast<std::size_t>(front_rank)]
                          : static_cast<std::uint8_t>(1 + shapes_rng.uniform_int(static_cast<std::uint64_t>(K - 1)));
      paint_shape(scene.labels, spec);
    }
  }

  // Features: class signature + iid Gaussian noise, quantized through f32.
  scene.features = Tensor({static_cast<std::size_t>(C), static_cast<std::size_t>(H),
                           static_cast<std::size_t>(W)});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (std::size_t p = 0; p < plane; ++p) {
    const std::uint8_t cls = scene.labels.codes[p];
    const double* sig = signatures_.data() + static_cast<std::size_t>(cls) * C;
    for (int c = 0; c < C; ++c) {
      const double noise = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * noise_rng.gaussian() : 0.0;
      scene.features[static_cast<std::size_t>(c) * plane + p] = to_f32(sig[c] + noise);
    }
  }

  // Void ring; the features underneath keep their class appearance.
  for (int b = 0; b < cfg.void_border; ++b) {
    for (int x = 0; x < W; ++x) {
      scene.labels.at(b, x) = kVoidCode;
      scene.labels.at(H - 1 - b, x) = kVoidCode;
    }
    for (int y = 0; y < H; ++y) {
      scene.labels.at(y, b) = kVoidCode;
      scene.labels.at(y, W - 1 - b) = kVoidCode;
    }
  }
  return scene;
}

OutlierBank build_outlier_bank(const SceneConfig& config, const Tensor& signatures,
                               int bank_size, std::uint64_t seed) {
  require(bank_size >= 1, ErrorCategory::kInvalid, "bank: size must be >= 1");
  require(signatures.rank() == 2 &&
              signatures.dim(0) == static_cast<std::size_t>(config.num_classes + 1),
          ErrorCategory::kInvalid, "bank: signature table must have K+1 rows");

  OutlierBank bank;
  bank.noise_sigma = config.noise_sigma;
  const std::size_t C = signatures.dim(1);
  bank.signature = Tensor({C});
  for (std::size_t j = 0; j < C; ++j)
    bank.signature[j] = signatures.at(static_cast<std::size_t>(config.num_classes), j);

  Xoshiro256ss rng(derive_stream(seed, "bank", 0));
  const int interior = std::min(config.height, config.width) - 2 * config.void_border;
  const int max_half = std::max(2, interior / 4);
  bank.templates.reserve(static_cast<std::size_t>(bank_size));
  for (int t = 0; t < bank_size; ++t) {
    const bool ellipse = (rng.next() & 1u) != 0;
    const int hy = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_half - 1)));
    const int hx = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_half - 1)));
    OutlierTemplate tpl;
    tpl.height = 2 * hy + 1;
    tpl.width = 2 * hx + 1;
    tpl.stencil.assign(static_cast<std::size_t>(tpl.height) * tpl.width, 0);
    for (int y = 0; y < tpl.height; ++y) {
      for (int x = 0; x < tpl.width; ++x) {
        bool inside = true;
        if (ellipse) {
          const double dy = static_cast<double>(y - hy) / hy;
          const double dx = static_cast<double>(x - hx) / hx;
          inside = dy * dy + dx * dx <= 1.0;
        }
        tpl.stencil[static_cast<std::size_t>(y) * tpl.width + x] = inside ? 1 : 0;
      }
    }
    bank.templates.push_back(std::move(tpl));
  }
  return bank;
}

Scene paste_outlier(const Scene& scene, const OutlierBank& bank, double p_out,
                    std::uint64_t seed) {
  require(!bank.templates.empty(), ErrorCategory::kInvalid, "paste: empty bank");
  require(p_out >= 0.0 && p_out <= 1.0, ErrorCategory::kInvalid, "paste: p_out outside [0, 1]");

  Xoshiro256ss rng(derive_stream(seed, "paste", 0));
  if (rng.uniform() >= p_out) return scene;

  const OutlierTemplate& tpl =
      bank.templates[static_cast<std::size_t>(rng.uniform_int(bank.templates.size()))];
  const int H = scene.labels.height, W = scene.labels.width;
  require(tpl.height <= H && tpl.width <= W, ErrorCategory::kInvalid,
          "paste: template larger than frame");

  const int y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(H - tpl.height + 1)));
  const int x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(W - tpl.width + 1)));

  Scene out = scene;
  const std::size_t C = out.features.dim(0);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int y = 0; y < tpl.height; ++y) {
    for (int x = 0; x < tpl.width; ++x) {
      if (!tpl.stencil[static_cast<std::size_t>(y) * tpl.width + x]) continue;
      const std::size_t p = static_cast<std::size_t>(y0 + y) * W + (x0 + x);
      out.labels.codes[p] = kOutlierCode;
      for (std::size_t c = 0; c < C; ++c) {
        const double noise = bank.noise_sigma > 0.0 ? bank.noise_sigma * rng.gaussian() : 0.0;
        out.features[c * plane + p] =
            static_cast<double>(static_cast<float>(bank.signature[c] + noise));
      }
    }
  }
  return out;
}

}  // namespace rba
