#pragma once

// Deployment replay of a MESS instance on raw prediction tensors.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mess/calibration_cache.hpp"
#include "mess/confidence.hpp"
#include "mess/cost_model.hpp"
#include "mess/instance.hpp"
#include "mess/metrics.hpp"
#include "mess/tensorio.hpp"

namespace mess {

struct ImageRecord {
  std::string id;
  std::size_t selected_exit = 0;        // position among the selected exits
  std::vector<double> image_confidence;  // one per exit that took a decision
  std::optional<double> miou;            // per-image mean IoU of the returned output
};

struct SimulationReport {
  InferenceSetting setting = InferenceSetting::input_dependent;
  std::size_t image_count = 0;
  std::vector<std::size_t> selected_points;
  std::vector<std::size_t> exit_counts;
  std::vector<double> exit_rates;
  double expected_workload = 0.0;
  std::optional<double> expected_latency;
  double cost = 0.0;        // in the instance's cost kind
  double accuracy = 0.0;    // dataset mIoU under the setting's accuracy rule
  double miou = 0.0;
  double pixel_accuracy = 0.0;
  std::vector<std::optional<double>> per_class_iou;
  std::vector<double> per_exit_miou;  // anytime: one per selected checkpoint
  ConfusionMatrix confusion;
  std::vector<ImageRecord> images;
};

struct SimulateOptions {
  unsigned threads = 0;
};

namespace detail {

struct ImageOutcome {
  ImageRecord record;
  std::vector<ConfusionMatrix> per_exit;  // anytime: every exit; otherwise only the finishing one
};

}  // namespace detail

/// Replays the instance image by image. On the calibration split the
/// figures equal evaluate_config on the cache built from the same files.
inline SimulationReport simulate(const MessInstance& instance, const DatasetManifest& manifest,
                                 const CostProfile& profile, const SimulateOptions& options = {}) {
  const auto& config = instance.config;
  check_config(config);
  if (manifest.exit_points != instance.placement.exit_points) {
    throw Error(ErrorCode::ManifestMismatch, "instance exit points differ from the manifest's");
  }
  for (const auto& e : config.exits) {
    const auto archs = manifest.archs_at(e.point);
    if (std::find(archs.begin(), archs.end(), e.arch.id()) == archs.end()) {
      throw Error(ErrorCode::ManifestMismatch, "manifest has no predictions for arch " + std::to_string(e.arch.id()) +
                                                   " at exit point " + std::to_string(e.point));
    }
  }

  const std::uint32_t m = manifest.class_count;
  const bool anytime = config.setting == InferenceSetting::anytime;
  const bool input_dep = config.setting == InferenceSetting::input_dependent;
  std::vector<detail::ImageOutcome> outcomes(manifest.images.size());

  parallel_for(manifest.images.size(), options.threads, [&](std::size_t i) {
    const auto gt = manifest.read_ground_truth(i);
    auto& out = outcomes[i];
    out.record.id = manifest.images[i].id;
    out.per_exit.assign(config.exits.size(), ConfusionMatrix(m));
    for (std::size_t k = 0; k < config.exits.size(); ++k) {
      const auto& e = config.exits[k];
      const auto pred = manifest.read_prediction(i, e.point, e.arch.id());
      const auto labels = argmax_labels(pred);
      const bool last = k + 1 == config.exits.size();
      bool finish = last || !input_dep;
      if (input_dep && !last) {
        const auto cmap = exit_confidence_map(pred, instance.estimator, e.thresholds.edge_enhancement,
                                              manifest.images[i].output_strides[e.point], instance.morphology);
        const double c = image_confidence(cmap, e.thresholds.th_pix);
        out.record.image_confidence.push_back(c);
        finish = exit_decision(c, e.thresholds.th_img, false) == ExitDecision::Exit;
      }
      if (finish || anytime) out.per_exit[k] = confusion_matrix(labels, gt, m);
      if (finish && !anytime) {
        out.record.selected_exit = k;
        break;
      }
    }
    if (anytime) out.record.selected_exit = config.exits.size() - 1;
  });

  SimulationReport report;
  report.setting = config.setting;
  report.image_count = manifest.images.size();
  for (const auto& e : config.exits) report.selected_points.push_back(e.point);
  const std::size_t accuracy_exit = 0;
  std::vector<ConfusionMatrix> per_exit(config.exits.size(), ConfusionMatrix(m));
  report.confusion = ConfusionMatrix(m);
  std::vector<std::size_t> finish;
  for (auto& o : outcomes) {
    finish.push_back(o.record.selected_exit);
    for (std::size_t k = 0; k < per_exit.size(); ++k) per_exit[k] += o.per_exit[k];
    const auto& returned = o.per_exit[o.record.selected_exit];
    if (returned.total() > 0) o.record.miou = mess::miou(returned);
    report.images.push_back(std::move(o.record));
  }

  Evaluation rates;
  if (input_dep) {
    rates_from_assignment(finish, config.exits.size(), rates);
    for (std::size_t i = 0; i < outcomes.size(); ++i) report.confusion += outcomes[i].per_exit[finish[i]];
  } else {
    rates.exit_rates.assign(config.exits.size(), 1.0);
    rates.exit_counts.assign(config.exits.size(), 0);
    rates.exit_counts.back() = manifest.images.size();
    report.confusion = per_exit[accuracy_exit];
  }
  report.exit_rates = rates.exit_rates;
  report.exit_counts = rates.exit_counts;
  if (anytime) {
    for (const auto& cm : per_exit) report.per_exit_miou.push_back(mess::miou(cm));
  } else {
    report.per_exit_miou.push_back(mess::miou(report.confusion));
  }

  auto cost_in = [&](CostKind kind) {
    return input_dep ? cost_of(config, profile, instance.placement, kind, rates.exit_rates)
                     : cost_of(config, profile, instance.placement, kind);
  };
  report.expected_workload = cost_in(CostKind::workload);
  if (profile.has_latency()) report.expected_latency = cost_in(CostKind::latency);
  report.cost = cost_in(instance.cost_kind);

  report.miou = mess::miou(report.confusion);
  report.accuracy = instance.exclude_background ? mess::miou(report.confusion, manifest.background_class) : report.miou;
  report.pixel_accuracy = pixel_accuracy(report.confusion, manifest.background_class);
  report.per_class_iou = per_class_iou(report.confusion);
  return report;
}

inline nlohmann::json report_to_json(const SimulationReport& r) {
  nlohmann::json j;
  j["schema"] = "mess.report/1";
  j["setting"] = to_string(r.setting);
  j["image_count"] = r.image_count;
  j["selected_points"] = r.selected_points;
  j["exit_counts"] = r.exit_counts;
  j["exit_rates"] = r.exit_rates;
  j["expected_workload_gflops"] = r.expected_workload;
  j["expected_latency_ms"] = r.expected_latency ? nlohmann::json(*r.expected_latency) : nlohmann::json(nullptr);
  j["cost"] = r.cost;
  j["accuracy"] = r.accuracy;
  j["miou"] = r.miou;
  j["pixel_accuracy"] = r.pixel_accuracy;
  j["per_class_iou"] = nlohmann::json::array();
  for (const auto& v : r.per_class_iou) j["per_class_iou"].push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  j["per_exit_miou"] = r.per_exit_miou;
  j["images"] = nlohmann::json::array();
  for (const auto& img : r.images) {
    j["images"].push_back({{"id", img.id},
                           {"selected_exit", img.selected_exit},
                           {"image_confidence", img.image_confidence},
                           {"miou", img.miou ? nlohmann::json(*img.miou) : nlohmann::json(nullptr)}});
  }
  return j;
}

}  // namespace mess
