#include "rba/pipeline.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rba/analysis.hpp"
#include "rba/checkpoint.hpp"
#include "rba/errors.hpp"
#include "rba/prng.hpp"
#include "rba/scene_io.hpp"

namespace fs = std::filesystem;

namespace rba {

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  require(out.good(), ErrorCategory::kIo, "cannot open for writing: " + path);
  out << text;
  require(out.good(), ErrorCategory::kIo, "write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::kIo, "cannot open: " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void make_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  require(!ec, ErrorCategory::kIo, "cannot create directory: " + path);
}

void write_resolved_config(const ExperimentConfig& config, const std::string& out_dir) {
  write_text((fs::path(out_dir) / "config.resolved").string(), config.resolved());
}

int split_count(const std::string& data_dir, const std::string& split) {
  const auto manifest = parse_kv_text(read_text((fs::path(data_dir) / "manifest.txt").string()));
  return static_cast<int>(std::stol(kv_lookup(manifest, split + "_count")));
}

void check_dataset_config(const ExperimentConfig& config, const std::string& data_dir) {
  const auto manifest = parse_kv_text(read_text((fs::path(data_dir) / "manifest.txt").string()));
  require(kv_lookup(manifest, "config_hash") == config.config_hash(), ErrorCategory::kMismatch,
          "dataset was generated with a different configuration");
}

ModelParams load_checkpoint_for(const ExperimentConfig& config, const std::string& path) {
  ModelParams params = load_checkpoint(path);
  require(params.config == config.model_config(), ErrorCategory::kMismatch,
          "checkpoint model config does not match the experiment config");
  return params;
}

}  // namespace

std::string scene_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d.mseg", index);
  return buf;
}

std::vector<Scene> load_split(const std::string& data_dir, const std::string& split) {
  const int count = split_count(data_dir, split);
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    scenes.push_back(read_scene((fs::path(data_dir) / split / scene_file_name(i)).string()));
  return scenes;
}

void write_label_map(const LabelMap& labels, const std::string& path) {
  std::string buf;
  buf.append("LMAP1", 5);
  for (const std::uint32_t v :
       {static_cast<std::uint32_t>(labels.height), static_cast<std::uint32_t>(labels.width)})
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  buf.append(reinterpret_cast<const char*>(labels.codes.data()), labels.codes.size());
  write_text(path, buf);
}

LabelMap read_label_map(const std::string& path) {
  const std::string raw = read_text(path);
  require(raw.size() >= 13, ErrorCategory::kFormat, "lmap1: truncated file");
  require(raw.compare(0, 5, "LMAP1") == 0, ErrorCategory::kFormat, "lmap1: bad magic");
  auto get_u32 = [&raw](std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[pos + i])) << (8 * i);
    return v;
  };
  LabelMap labels;
  labels.height = static_cast<int>(get_u32(5));
  labels.width = static_cast<int>(get_u32(9));
  const std::size_t hw = static_cast<std::size_t>(labels.height) * labels.width;
  require(raw.size() == 13 + hw, ErrorCategory::kFormat, "lmap1: payload size mismatch");
  labels.codes.assign(raw.begin() + 13, raw.end());
  return labels;
}

void cmd_gen(const ExperimentConfig& config, const std::string& out_dir) {
  make_dir(out_dir);
  make_dir((fs::path(out_dir) / "train").string());
  make_dir((fs::path(out_dir) / "test").string());
  make_dir((fs::path(out_dir) / "test_ood").string());

  const SceneGenerator gen(config.scene, config.seed);
  const OutlierBank bank = build_outlier_bank(config.scene, gen.signatures(), config.bank_size,
                                              derive_stream(config.seed, "bank", 0));

  for (int i = 0; i < config.train_scenes; ++i) {
    const Scene scene = gen.generate(static_cast<std::uint64_t>(i));
    write_scene(scene, (fs::path(out_dir) / "train" / scene_file_name(i)).string());
  }
  for (int i = 0; i < config.test_scenes; ++i) {
    const Scene scene = gen.generate(static_cast<std::uint64_t>(config.train_scenes + i));
    write_scene(scene, (fs::path(out_dir) / "test" / scene_file_name(i)).string());
    const Scene pasted = paste_outlier(
        scene, bank, 1.0, derive_stream(config.seed, "test_paste", static_cast<std::uint64_t>(i)));
    write_scene(pasted, (fs::path(out_dir) / "test_ood" / scene_file_name(i)).string());
  }

  std::ostringstream manifest;
  manifest << "schema = rba.dataset.v1\n";
  manifest << "config_hash = " << config.config_hash() << "\n";
  manifest << "train_count = " << config.train_scenes << "\n";
  manifest << "test_count = " << config.test_scenes << "\n";
  manifest << "test_ood_count = " << config.test_scenes << "\n";
  write_text((fs::path(out_dir) / "manifest.txt").string(), manifest.str());
  write_resolved_config(config, out_dir);
}

void cmd_train(const ExperimentConfig& config, const std::string& data_dir,
               const std::string& out_dir, const PipelineOptions& options) {
  check_dataset_config(config, data_dir);
  const std::vector<Scene> dataset = load_split(data_dir, "train");
  const TrainResult result =
      train_closed_set(config.train_config(options.threads), config.model_config(), dataset);
  make_dir(out_dir);
  save_checkpoint(result.params, (fs::path(out_dir) / "checkpoint.txt").string());
  write_text((fs::path(out_dir) / "train_log.txt").string(), render_train_log(result.log));
  write_resolved_config(config, out_dir);
}

void cmd_finetune(const ExperimentConfig& config, const std::string& checkpoint_path,
                  const std::string& data_dir, const std::string& out_dir,
                  const PipelineOptions& options) {
  check_dataset_config(config, data_dir);
  const ModelParams source = load_checkpoint_for(config, checkpoint_path);
  const std::vector<Scene> dataset = load_split(data_dir, "train");
  const SceneGenerator gen(config.scene, config.seed);
  const OutlierBank bank = build_outlier_bank(config.scene, gen.signatures(), config.bank_size,
                                              derive_stream(config.seed, "bank", 0));
  const TrainResult result =
      finetune_outlier(config.finetune_config(options.threads), source, dataset, bank);
  make_dir(out_dir);
  save_checkpoint(result.params, (fs::path(out_dir) / "checkpoint.txt").string());
  write_text((fs::path(out_dir) / "finetune_log.txt").string(), render_train_log(result.log));
  write_resolved_config(config, out_dir);
}

void cmd_score(const ExperimentConfig& config, const std::string& checkpoint_path,
               const std::string& data_dir, const std::string& split,
               const std::string& out_dir, bool write_pgm) {
  check_dataset_config(config, data_dir);
  const ModelParams params = load_checkpoint_for(config, checkpoint_path);
  const std::vector<Scene> scenes = load_split(data_dir, split);
  make_dir(out_dir);

  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const ModelOutput out = forward(params, scenes[i].features);
    const ScoreMap map = apply_score_fn(config.score_fn, out.logits);
    char name[32];
    std::snprintf(name, sizeof(name), "score_%04zu.smap", i);
    write_score_map(map, (fs::path(out_dir) / name).string());
    if (write_pgm) {
      std::snprintf(name, sizeof(name), "score_%04zu.pgm", i);
      write_score_pgm(map, (fs::path(out_dir) / name).string());
    }
    const std::vector<std::uint8_t> pred = predict_labels(out.logits);
    LabelMap pred_map;
    pred_map.height = scenes[i].labels.height;
    pred_map.width = scenes[i].labels.width;
    pred_map.codes = pred;
    std::snprintf(name, sizeof(name), "pred_%04zu.lmap", i);
    write_label_map(pred_map, (fs::path(out_dir) / name).string());
  }

  std::ostringstream manifest;
  manifest << "schema = rba.scores.v1\n";
  manifest << "config_hash = " << config.config_hash() << "\n";
  manifest << "checkpoint_hash = " << hash_file(checkpoint_path) << "\n";
  manifest << "score_fn = " << to_string(config.score_fn) << "\n";
  manifest << "split = " << split << "\n";
  manifest << "count = " << scenes.size() << "\n";
  write_text((fs::path(out_dir) / "manifest.txt").string(), manifest.str());
  write_resolved_config(config, out_dir);
}

MetricsReport cmd_eval(const ExperimentConfig& config, const std::string& scores_dir,
                       const std::string& data_dir, const std::string& out_dir) {
  check_dataset_config(config, data_dir);
  const auto manifest =
      parse_kv_text(read_text((fs::path(scores_dir) / "manifest.txt").string()));
  require(kv_lookup(manifest, "config_hash") == config.config_hash(), ErrorCategory::kMismatch,
          "scores were produced with a different configuration");
  const std::string split = kv_lookup(manifest, "split");
  const int count = static_cast<int>(std::stol(kv_lookup(manifest, "count")));
  const std::vector<Scene> scenes = load_split(data_dir, split);
  require(static_cast<int>(scenes.size()) == count, ErrorCategory::kMismatch,
          "score manifest count does not match the dataset split");

  MetricsReport report;
  report.config_hash = config.config_hash();
  report.checkpoint_hash = kv_lookup(manifest, "checkpoint_hash");
  report.dataset_hash = hash_file((fs::path(data_dir) / "manifest.txt").string());
  report.score_fn = kv_lookup(manifest, "score_fn");

  PixelEvalSet pixel_set;
  std::vector<ScoreMap> maps;
  std::vector<LabelMap> labels;
  IouStats iou_stats;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "score_%04d.smap", i);
    ScoreMap map = read_score_map((fs::path(scores_dir) / name).string());
    std::snprintf(name, sizeof(name), "pred_%04d.lmap", i);
    const LabelMap pred = read_label_map((fs::path(scores_dir) / name).string());
    pixel_set.add(map, scenes[static_cast<std::size_t>(i)].labels);
    iou_stats.accumulate(pred.codes, scenes[static_cast<std::size_t>(i)].labels,
                         config.scene.num_classes);
    maps.push_back(std::move(map));
    labels.push_back(scenes[static_cast<std::size_t>(i)].labels);
  }

  report.ap = average_precision(pixel_set);
  report.auroc = auroc(pixel_set);
  report.fpr95 = fpr_at_tpr(pixel_set, config.tpr_target);
  report.iou = iou_report(iou_stats);
  report.components = component_metrics(maps, labels, config.component_config());

  make_dir(out_dir);
  write_text((fs::path(out_dir) / "metrics.txt").string(), render_metrics_report(report));
  write_text((fs::path(out_dir) / "iou.csv").string(), render_iou_csv(report.iou));
  if (report.components)
    write_text((fs::path(out_dir) / "components.csv").string(),
               render_component_csv(*report.components));
  write_resolved_config(config, out_dir);
  return report;
}

void cmd_analyze(const ExperimentConfig& config, const std::string& checkpoint_path,
                 const std::string& data_dir, const std::string& out_dir) {
  check_dataset_config(config, data_dir);
  const ModelParams params = load_checkpoint_for(config, checkpoint_path);
  const std::vector<Scene> test = load_split(data_dir, "test");
  std::vector<Scene> ood = load_split(data_dir, "test_ood");
  if (static_cast<int>(ood.size()) > config.analysis_scenes)
    ood.resize(static_cast<std::size_t>(config.analysis_scenes));

  make_dir(out_dir);

  const SpecializationResult spec =
      specialization_matrix(params, test, config.conf_threshold);
  {
    std::ostringstream csv;
    csv << "query";
    for (int c = 0; c < params.config.num_classes; ++c) csv << ",class_" << c;
    csv << "\n";
    for (int q = 0; q < params.config.num_queries; ++q) {
      csv << q;
      for (int c = 0; c < params.config.num_classes; ++c)
        csv << "," << static_cast<long>(spec.counts.at(static_cast<std::size_t>(q),
                                                       static_cast<std::size_t>(c)));
      csv << "\n";
    }
    write_text((fs::path(out_dir) / "specialization.csv").string(), csv.str());
  }

  const std::vector<MaskingAblationRow> ablation =
      masking_ablation(params, test, config.conf_threshold);
  {
    std::ostringstream csv;
    csv << "class,query,defined,iou_none,iou_hard,iou_soft\n";
    for (const auto& row : ablation) {
      csv << row.class_id << "," << row.query << "," << (row.defined ? 1 : 0) << ",";
      if (row.defined) {
        csv << format_double(row.iou_none) << "," << format_double(row.iou_hard) << ","
            << format_double(row.iou_soft);
      } else {
        csv << "undefined,undefined,undefined";
      }
      csv << "\n";
    }
    write_text((fs::path(out_dir) / "masking_ablation.csv").string(), csv.str());
  }

  const LogitModeReport modes = logit_mode_analysis(
      params, ood, config.kmeans_clusters, derive_stream(config.seed, "logit_modes", 0));
  {
    std::ostringstream doc;
    doc << "schema = rba.logit_modes.v1\n";
    doc << "config_hash = " << config.config_hash() << "\n";
    doc << "clusters = " << config.kmeans_clusters << "\n";
    doc << "total_pixels = " << modes.total_pixels << "\n";
    doc << "outlier_pixels = " << modes.outlier_pixels << "\n";
    doc << "lowest_maxlogit_cluster = " << modes.lowest_maxlogit_cluster << "\n";
    for (std::size_t c = 0; c < modes.sizes.size(); ++c) {
      doc << "cluster_" << c << ".size = " << modes.sizes[c] << "\n";
      doc << "cluster_" << c << ".outlier_share = " << format_double(modes.outlier_share[c])
          << "\n";
      doc << "cluster_" << c << ".mean_max_logit = " << format_double(modes.mean_max_logit[c])
          << "\n";
      doc << "cluster_" << c << ".centroid =";
      for (std::size_t j = 0; j < modes.centroids.dim(1); ++j)
        doc << " " << format_double(modes.centroids.at(c, j));
      doc << "\n";
    }
    write_text((fs::path(out_dir) / "logit_modes.txt").string(), doc.str());
  }
  write_resolved_config(config, out_dir);
}

GradcheckReport cmd_gradcheck(const ExperimentConfig& config, const std::string& out_dir) {
  GradcheckOptions options;
  options.seed = derive_stream(config.seed, "gradcheck", 0);
  const GradcheckReport report = gradcheck(options);
  if (!out_dir.empty()) {
    make_dir(out_dir);
    write_text((fs::path(out_dir) / "gradcheck.txt").string(), render_gradcheck(report));
    write_resolved_config(config, out_dir);
  }
  return report;
}

}  // namespace rba
