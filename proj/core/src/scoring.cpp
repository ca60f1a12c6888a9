#include "rba/scoring.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "rba/errors.hpp"

namespace rba {

namespace {

ScoreMap map_like(const Tensor& logits) {
  require(logits.rank() == 3 && logits.dim(0) >= 1, ErrorCategory::kInvalid,
          "score: logits must be [K, H, W] with K >= 1");
  ScoreMap map;
  map.height = static_cast<int>(logits.dim(1));
  map.width = static_cast<int>(logits.dim(2));
  map.values.assign(static_cast<std::size_t>(map.height) * map.width, 0.0);
  return map;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

}  // namespace

const char* to_string(ScoreFn fn) {
  switch (fn) {
    case ScoreFn::kRbA: return "rba";
    case ScoreFn::kMsp: return "msp";
    case ScoreFn::kEntropy: return "entropy";
    case ScoreFn::kMaxLogit: return "maxlogit";
    case ScoreFn::kEnergy: return "energy";
  }
  return "rba";
}

ScoreFn score_fn_from_string(const std::string& name) {
  if (name == "rba") return ScoreFn::kRbA;
  if (name == "msp") return ScoreFn::kMsp;
  if (name == "entropy") return ScoreFn::kEntropy;
  if (name == "maxlogit") return ScoreFn::kMaxLogit;
  if (name == "energy") return ScoreFn::kEnergy;
  fail(ErrorCategory::kConfig, "unknown scoring function: " + name);
}

ScoreMap score_rba(const Tensor& logits) {
  ScoreMap map = map_like(logits);
  const std::size_t k = logits.dim(0), hw = map.size();
  for (std::size_t p = 0; p < hw; ++p) {
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) acc -= std::tanh(logits[c * hw + p]);
    map.values[p] = acc;
  }
  return map;
}

ScoreMap score_msp(const Tensor& logits) {
  ScoreMap map = map_like(logits);
  const Tensor probs = softmax(logits, 0);
  const std::size_t k = logits.dim(0), hw = map.size();
  for (std::size_t p = 0; p < hw; ++p) {
    double best = probs[p];
    for (std::size_t c = 1; c < k; ++c) best = std::max(best, probs[c * hw + p]);
    map.values[p] = 1.0 - best;
  }
  return map;
}

ScoreMap score_entropy(const Tensor& logits) {
  ScoreMap map = map_like(logits);
  const Tensor probs = softmax(logits, 0);
  const std::size_t k = logits.dim(0), hw = map.size();
  for (std::size_t p = 0; p < hw; ++p) {
    double h = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double pr = probs[c * hw + p];
      if (pr > 0.0) h -= pr * std::log(pr);
    }
    map.values[p] = h;
  }
  return map;
}

ScoreMap score_maxlogit(const Tensor& logits) {
  ScoreMap map = map_like(logits);
  const std::size_t k = logits.dim(0), hw = map.size();
  for (std::size_t p = 0; p < hw; ++p) {
    double best = logits[p];
    for (std::size_t c = 1; c < k; ++c) best = std::max(best, logits[c * hw + p]);
    map.values[p] = -best;
  }
  return map;
}

ScoreMap score_energy(const Tensor& logits) {
  ScoreMap map = map_like(logits);
  const Tensor lse = logsumexp(logits, 0);
  for (std::size_t p = 0; p < map.size(); ++p) map.values[p] = -lse[p];
  return map;
}

ScoreMap apply_score_fn(ScoreFn fn, const Tensor& logits) {
  switch (fn) {
    case ScoreFn::kRbA: return score_rba(logits);
    case ScoreFn::kMsp: return score_msp(logits);
    case ScoreFn::kEntropy: return score_entropy(logits);
    case ScoreFn::kMaxLogit: return score_maxlogit(logits);
    case ScoreFn::kEnergy: return score_energy(logits);
  }
  fail(ErrorCategory::kInternal, "unreachable score function");
}

ScoreMap score_scene(const ModelParams& params, const Scene& scene, ScoreFn fn) {
  const ModelOutput out = forward(params, scene.features);
  return apply_score_fn(fn, out.logits);
}

void write_score_map(const ScoreMap& map, const std::string& path) {
  std::string buf;
  buf.reserve(13 + 4 * map.size());
  buf.append("SMAP1", 5);
  put_u32(buf, static_cast<std::uint32_t>(map.height));
  put_u32(buf, static_cast<std::uint32_t>(map.width));
  for (const double v : map.values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(buf, bits);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCategory::kIo, "smap1: cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), ErrorCategory::kIo, "smap1: write failed: " + path);
}

ScoreMap read_score_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::kIo, "smap1: cannot open: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(raw.size() >= 13, ErrorCategory::kFormat, "smap1: truncated file");
  require(raw.compare(0, 5, "SMAP1") == 0, ErrorCategory::kFormat, "smap1: bad magic");

  auto get_u32 = [&raw](std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[pos + i])) << (8 * i);
    return v;
  };
  ScoreMap map;
  map.height = static_cast<int>(get_u32(5));
  map.width = static_cast<int>(get_u32(9));
  require(map.height > 0 && map.width > 0, ErrorCategory::kFormat, "smap1: zero dimension");
  const std::size_t hw = static_cast<std::size_t>(map.height) * map.width;
  require(raw.size() == 13 + 4 * hw, ErrorCategory::kFormat,
          "smap1: payload size does not match header");
  map.values.resize(hw);
  for (std::size_t p = 0; p < hw; ++p) {
    const std::uint32_t bits = get_u32(13 + 4 * p);
    float f;
    std::memcpy(&f, &bits, 4);
    map.values[p] = static_cast<double>(f);
  }
  return map;
}

void write_score_pgm(const ScoreMap& map, const std::string& path) {
  double lo = map.values.empty() ? 0.0 : map.values[0];
  double hi = lo;
  for (const double v : map.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;

  std::string buf = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) +
                    "\n65535\n";
  for (const double v : map.values) {
    const double norm = (v - lo) / span;
    const std::uint16_t px = static_cast<std::uint16_t>(std::lround(norm * 65535.0));
    // PGM 16-bit samples are big-endian.
    buf.push_back(static_cast<char>((px >> 8) & 0xffu));
    buf.push_back(static_cast<char>(px & 0xffu));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCategory::kIo, "pgm: cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), ErrorCategory::kIo, "pgm: write failed: " + path);
}

}  // namespace rba
