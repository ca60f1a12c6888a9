#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rba/metrics.hpp"

namespace rba {

// Pixel-level and component-level evaluation results plus provenance;
// every value is reproducible from the referenced artifacts.
struct MetricsReport {
  std::optional<double> ap;
  std::optional<double> auroc;
  std::optional<double> fpr95;
  IouReport iou;
  std::optional<ComponentReport> components;  // "SMIYC-style" stand-in formulas

  std::string config_hash;
  std::string checkpoint_hash;
  std::string dataset_hash;
  std::string score_fn;
};

// Structured-text rendering (key = value lines, fixed order); undefined
// metrics render as the literal "undefined".
std::string render_metrics_report(const MetricsReport& report);

// CSV tables: per-class IoU and per-threshold component stats.
std::string render_iou_csv(const IouReport& iou);
std::string render_component_csv(const ComponentReport& components);

std::string format_optional(const std::optional<double>& value);

}  // namespace rba
