#include "rba/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "rba/errors.hpp"

namespace rba {

namespace {

constexpr int kSchemaVersion = 1;

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

long parse_long(const std::string& s, const char* what) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCategory::kFormat,
          std::string("checkpoint: bad integer for ") + what + ": " + s);
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCategory::kFormat,
          "bad floating-point literal: " + s);
  return v;
}

std::string checkpoint_to_string(const ModelParams& params) {
  std::ostringstream out;
  out << "schema_version " << kSchemaVersion << "\n";
  out << "config " << params.config.in_channels << " " << params.config.embed_dim << " "
      << params.config.num_queries << " " << params.config.num_classes << "\n";
  for (const auto& ref : param_registry(params)) {
    out << "tensor " << ref.name;
    for (std::size_t d : ref.tensor->shape()) out << " " << d;
    out << "\n";
    const Tensor& t = *ref.tensor;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i) out << " ";
      out << format_double(t[i]);
    }
    out << "\n";
  }
  return out.str();
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCategory::kIo, "checkpoint: cannot open for writing: " + path);
  out << checkpoint_to_string(params);
  require(out.good(), ErrorCategory::kIo, "checkpoint: write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::kIo, "checkpoint: cannot open: " + path);

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCategory::kFormat,
          "checkpoint: empty file");
  {
    const auto toks = split_ws(line);
    require(toks.size() == 2 && toks[0] == "schema_version", ErrorCategory::kFormat,
            "checkpoint: missing schema_version header");
    const long version = parse_long(toks[1], "schema_version");
    require(version == kSchemaVersion, ErrorCategory::kMismatch,
            "checkpoint: unsupported schema_version " + toks[1]);
  }

  ModelConfig cfg;
  {
    require(static_cast<bool>(std::getline(in, line)), ErrorCategory::kFormat,
            "checkpoint: missing config record");
    const auto toks = split_ws(line);
    require(toks.size() == 5 && toks[0] == "config", ErrorCategory::kFormat,
            "checkpoint: malformed config record");
    cfg.in_channels = static_cast<int>(parse_long(toks[1], "in_channels"));
    cfg.embed_dim = static_cast<int>(parse_long(toks[2], "embed_dim"));
    cfg.num_queries = static_cast<int>(parse_long(toks[3], "num_queries"));
    cfg.num_classes = static_cast<int>(parse_long(toks[4], "num_classes"));
  }

  ModelParams params = init_params(cfg, 0);
  auto refs = param_registry(params);
  std::vector<bool> seen(refs.size(), false);

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto toks = split_ws(line);
    require(toks.size() >= 2 && toks[0] == "tensor", ErrorCategory::kFormat,
            "checkpoint: expected a tensor record, got: " + line);
    const std::string name = toks[1];
    std::size_t index = refs.size();
    for (std::size_t i = 0; i < refs.size(); ++i) {
      if (refs[i].name == name) {
        index = i;
        break;
      }
    }
    require(index < refs.size(), ErrorCategory::kFormat, "checkpoint: unknown tensor " + name);
    require(!seen[index], ErrorCategory::kFormat, "checkpoint: duplicate tensor " + name);
    seen[index] = true;

    std::vector<std::size_t> shape;
    for (std::size_t i = 2; i < toks.size(); ++i)
      shape.push_back(static_cast<std::size_t>(parse_long(toks[i], "shape")));
    require(shape == refs[index].tensor->shape(), ErrorCategory::kMismatch,
            "checkpoint: tensor " + name + " shape does not match the declared config");

    require(static_cast<bool>(std::getline(in, line)), ErrorCategory::kFormat,
            "checkpoint: missing values for tensor " + name);
    const auto vals = split_ws(line);
    Tensor& t = *refs[index].tensor;
    require(vals.size() == t.size(), ErrorCategory::kFormat,
            "checkpoint: value count mismatch for tensor " + name);
    for (std::size_t i = 0; i < vals.size(); ++i) t[i] = parse_double(vals[i]);
  }

  for (std::size_t i = 0; i < refs.size(); ++i)
    require(seen[i], ErrorCategory::kFormat,
            "checkpoint: missing tensor " + std::string(refs[i].name));
  return params;
}

}  // namespace rba
