#include "rba/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rba/checkpoint.hpp"
#include "rba/errors.hpp"

namespace rba {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long to_long(const std::string& key, const std::string& value) {
  long v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  require(res.ec == std::errc() && res.ptr == value.data() + value.size(),
          ErrorCategory::kConfig, "config: bad integer for " + key + ": " + value);
  return v;
}

int to_int(const std::string& key, const std::string& value) {
  return static_cast<int>(to_long(key, value));
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  require(res.ec == std::errc() && res.ptr == value.data() + value.size(),
          ErrorCategory::kConfig, "config: bad number for " + key + ": " + value);
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(ErrorCategory::kConfig, "config: bad boolean for " + key + ": " + value);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  require(res.ec == std::errc() && res.ptr == value.data() + value.size(),
          ErrorCategory::kConfig, "config: bad seed for " + key + ": " + value);
  return v;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> doc;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorCategory::kFormat,
            "kv document: missing '=' on line " + std::to_string(line_no));
    doc.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return doc;
}

std::string kv_lookup(const std::vector<std::pair<std::string, std::string>>& doc,
                      const std::string& key) {
  for (const auto& [k, v] : doc)
    if (k == key) return v;
  fail(ErrorCategory::kFormat, "kv document: missing key " + key);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(const std::string& bytes) {
  const std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) buf[15 - i] = digits[(h >> (4 * i)) & 0xf];
  buf[16] = '\0';
  return std::string(buf);
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::kIo, "hash: cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hash_hex(bytes);
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig cfg;
  cfg.in_channels = scene.channels;
  cfg.embed_dim = embed_dim;
  cfg.num_queries = num_queries;
  cfg.num_classes = scene.num_classes;
  return cfg;
}

TrainConfig ExperimentConfig::train_config(int threads) const {
  TrainConfig cfg;
  cfg.phase = TrainPhase::kClosedSet;
  cfg.iterations = train_iterations;
  cfg.batch_size = batch_size;
  cfg.seed = seed;
  cfg.loss_weights = loss_weights;
  cfg.lr = train_lr;
  cfg.poly_power = poly_power;
  cfg.opt.weight_decay = weight_decay;
  cfg.opt.clip_norm = clip_norm;
  cfg.threads = threads;
  return cfg;
}

TrainConfig ExperimentConfig::finetune_config(int threads) const {
  TrainConfig cfg = train_config(threads);
  cfg.phase = TrainPhase::kFinetune;
  cfg.iterations = finetune_iterations;
  cfg.lr = finetune_lr;
  cfg.alpha = alpha;
  cfg.p_out = p_out;
  cfg.normalize_hinge = normalize_hinge;
  return cfg;
}

ComponentEvalConfig ExperimentConfig::component_config() const {
  ComponentEvalConfig cfg;
  cfg.thresholds.clear();
  for (double tau = component_tau_min; tau <= component_tau_max + 1e-12;
       tau += component_tau_step)
    cfg.thresholds.push_back(tau);
  cfg.tpr_target = tpr_target;
  return cfg;
}

std::string ExperimentConfig::resolved() const {
  std::ostringstream out;
  out << "seed = " << seed << "\n";
  out << "data.height = " << scene.height << "\n";
  out << "data.width = " << scene.width << "\n";
  out << "data.channels = " << scene.channels << "\n";
  out << "data.classes = " << scene.num_classes << "\n";
  out << "data.noise_sigma = " << format_double(scene.noise_sigma) << "\n";
  out << "data.min_shapes = " << scene.min_shapes << "\n";
  out << "data.max_shapes = " << scene.max_shapes << "\n";
  out << "data.void_border = " << scene.void_border << "\n";
  out << "data.train_scenes = " << train_scenes << "\n";
  out << "data.test_scenes = " << test_scenes << "\n";
  out << "data.bank_size = " << bank_size << "\n";
  out << "model.embed_dim = " << embed_dim << "\n";
  out << "model.queries = " << num_queries << "\n";
  out << "loss.cls = " << format_double(loss_weights.cls) << "\n";
  out << "loss.bce = " << format_double(loss_weights.bce) << "\n";
  out << "loss.dice = " << format_double(loss_weights.dice) << "\n";
  out << "loss.no_object = " << format_double(loss_weights.no_object) << "\n";
  out << "train.iterations = " << train_iterations << "\n";
  out << "train.batch_size = " << batch_size << "\n";
  out << "train.lr = " << format_double(train_lr) << "\n";
  out << "train.poly_power = " << format_double(poly_power) << "\n";
  out << "train.weight_decay = " << format_double(weight_decay) << "\n";
  out << "train.clip_norm = " << format_double(clip_norm) << "\n";
  out << "finetune.iterations = " << finetune_iterations << "\n";
  out << "finetune.lr = " << format_double(finetune_lr) << "\n";
  out << "finetune.alpha = " << format_double(alpha) << "\n";
  out << "finetune.p_out = " << format_double(p_out) << "\n";
  out << "finetune.normalize_hinge = " << (normalize_hinge ? "true" : "false") << "\n";
  out << "eval.score_fn = " << to_string(score_fn) << "\n";
  out << "eval.conf_threshold = " << format_double(conf_threshold) << "\n";
  out << "eval.component_tau_min = " << format_double(component_tau_min) << "\n";
  out << "eval.component_tau_max = " << format_double(component_tau_max) << "\n";
  out << "eval.component_tau_step = " << format_double(component_tau_step) << "\n";
  out << "eval.tpr_target = " << format_double(tpr_target) << "\n";
  out << "eval.kmeans_k = " << kmeans_clusters << "\n";
  out << "eval.analysis_scenes = " << analysis_scenes << "\n";
  return out.str();
}

std::string ExperimentConfig::config_hash() const { return hash_hex(resolved()); }

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : parse_kv_text(text)) {
    if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "data.height") cfg.scene.height = to_int(key, value);
    else if (key == "data.width") cfg.scene.width = to_int(key, value);
    else if (key == "data.channels") cfg.scene.channels = to_int(key, value);
    else if (key == "data.classes") cfg.scene.num_classes = to_int(key, value);
    else if (key == "data.noise_sigma") cfg.scene.noise_sigma = to_double(key, value);
    else if (key == "data.min_shapes") cfg.scene.min_shapes = to_int(key, value);
    else if (key == "data.max_shapes") cfg.scene.max_shapes = to_int(key, value);
    else if (key == "data.void_border") cfg.scene.void_border = to_int(key, value);
    else if (key == "data.train_scenes") cfg.train_scenes = to_int(key, value);
    else if (key == "data.test_scenes") cfg.test_scenes = to_int(key, value);
    else if (key == "data.bank_size") cfg.bank_size = to_int(key, value);
    else if (key == "model.embed_dim") cfg.embed_dim = to_int(key, value);
    else if (key == "model.queries") cfg.num_queries = to_int(key, value);
    else if (key == "loss.cls") cfg.loss_weights.cls = to_double(key, value);
    else if (key == "loss.bce") cfg.loss_weights.bce = to_double(key, value);
    else if (key == "loss.dice") cfg.loss_weights.dice = to_double(key, value);
    else if (key == "loss.no_object") cfg.loss_weights.no_object = to_double(key, value);
    else if (key == "train.iterations") cfg.train_iterations = to_long(key, value);
    else if (key == "train.batch_size") cfg.batch_size = to_int(key, value);
    else if (key == "train.lr") cfg.train_lr = to_double(key, value);
    else if (key == "train.poly_power") cfg.poly_power = to_double(key, value);
    else if (key == "train.weight_decay") cfg.weight_decay = to_double(key, value);
    else if (key == "train.clip_norm") cfg.clip_norm = to_double(key, value);
    else if (key == "finetune.iterations") cfg.finetune_iterations = to_long(key, value);
    else if (key == "finetune.lr") cfg.finetune_lr = to_double(key, value);
    else if (key == "finetune.alpha") cfg.alpha = to_double(key, value);
    else if (key == "finetune.p_out") cfg.p_out = to_double(key, value);
    else if (key == "finetune.normalize_hinge") cfg.normalize_hinge = to_bool(key, value);
    else if (key == "eval.score_fn") cfg.score_fn = score_fn_from_string(value);
    else if (key == "eval.conf_threshold") cfg.conf_threshold = to_double(key, value);
    else if (key == "eval.component_tau_min") cfg.component_tau_min = to_double(key, value);
    else if (key == "eval.component_tau_max") cfg.component_tau_max = to_double(key, value);
    else if (key == "eval.component_tau_step") cfg.component_tau_step = to_double(key, value);
    else if (key == "eval.tpr_target") cfg.tpr_target = to_double(key, value);
    else if (key == "eval.kmeans_k") cfg.kmeans_clusters = to_int(key, value);
    else if (key == "eval.analysis_scenes") cfg.analysis_scenes = to_int(key, value);
    else fail(ErrorCategory::kConfig, "config: unknown key " + key);
  }
  require(cfg.p_out >= 0.0 && cfg.p_out <= 1.0, ErrorCategory::kConfig,
          "config: finetune.p_out must lie in [0, 1]");
  require(cfg.train_scenes >= 1 && cfg.test_scenes >= 1, ErrorCategory::kConfig,
          "config: scene counts must be >= 1");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::kIo, "config: cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

}  // namespace rba
