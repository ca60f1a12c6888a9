#include "rba/report.hpp"

#include <cmath>
#include <sstream>

#include "rba/checkpoint.hpp"

namespace rba {

std::string format_optional(const std::optional<double>& value) {
  return value ? format_double(*value) : "undefined";
}

std::string render_metrics_report(const MetricsReport& r) {
  std::ostringstream out;
  out << "schema = rba.metrics.v1\n";
  out << "config_hash = " << r.config_hash << "\n";
  out << "checkpoint_hash = " << r.checkpoint_hash << "\n";
  out << "dataset_hash = " << r.dataset_hash << "\n";
  out << "score_fn = " << r.score_fn << "\n";
  out << "pixel.ap = " << format_optional(r.ap) << "\n";
  out << "pixel.auroc = " << format_optional(r.auroc) << "\n";
  out << "pixel.fpr95 = " << format_optional(r.fpr95) << "\n";
  const bool have_miou = !r.iou.per_class.empty() && std::isfinite(r.iou.mean);
  out << "closed_set.miou = " << (have_miou ? format_double(r.iou.mean) : "undefined") << "\n";
  for (std::size_t c = 0; c < r.iou.per_class.size(); ++c) {
    out << "closed_set.iou.class_" << c << " = ";
    if (r.iou.present[c]) out << format_double(r.iou.per_class[c]);
    else out << "undefined";
    out << "\n";
  }
  if (r.components) {
    out << "component.siou_gt = " << format_double(r.components->siou_gt) << "\n";
    out << "component.ppv = " << format_optional(r.components->ppv) << "\n";
    out << "component.mean_f1 = " << format_double(r.components->mean_f1) << "\n";
    out << "component.threshold = " << format_double(r.components->binarization_threshold)
        << "\n";
    out << "component.gt_count = " << r.components->gt_components << "\n";
    out << "component.pred_count = " << r.components->predicted_components << "\n";
  } else {
    out << "component.siou_gt = undefined\n";
    out << "component.ppv = undefined\n";
    out << "component.mean_f1 = undefined\n";
  }
  return out.str();
}

std::string render_iou_csv(const IouReport& iou) {
  std::ostringstream out;
  out << "class,iou,present\n";
  for (std::size_t c = 0; c < iou.per_class.size(); ++c) {
    out << c << ",";
    if (iou.present[c]) out << format_double(iou.per_class[c]);
    else out << "undefined";
    out << "," << (iou.present[c] ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string render_component_csv(const ComponentReport& components) {
  std::ostringstream out;
  out << "tau,tp,fn,fp,f1\n";
  for (const auto& s : components.per_threshold) {
    out << format_double(s.tau) << "," << s.tp << "," << s.fn << "," << s.fp << ","
        << format_double(s.f1) << "\n";
  }
  return out.str();
}

}  // namespace rba
