#pragma once

// instance.json: a deployable MESS instance as produced by the search.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mess/calibration_cache.hpp"
#include "mess/config.hpp"
#include "mess/profiling.hpp"
#include "mess/search.hpp"
#include "mess/tensorio.hpp"

namespace mess {

struct MessInstance {
  MessConfig config;
  ExitPlacement placement;
  Estimator estimator = Estimator::top1;
  EdgeMorphology morphology = EdgeMorphology::dilate;
  CostKind cost_kind = CostKind::workload;
  bool exclude_background = false;

  friend bool operator==(const MessInstance&, const MessInstance&) = default;
};

inline std::string_view to_string(CostKind k) { return k == CostKind::workload ? "workload" : "latency"; }

inline CostKind parse_cost_kind(std::string_view s) {
  if (s == "workload") return CostKind::workload;
  if (s == "latency") return CostKind::latency;
  throw Error(ErrorCode::InvalidArgument, "unknown cost kind '" + std::string(s) + "'");
}

inline MessInstance instance_from_cache(const MessConfig& config, const CalibrationCache& cache, CostKind kind,
                                        bool exclude_background) {
  return {config, cache.placement(), cache.estimator(), cache.morphology(), kind, exclude_background};
}

inline nlohmann::json instance_to_json(const MessInstance& inst, const SearchResult* result = nullptr,
                                       const SearchObjective* objective = nullptr) {
  nlohmann::json j;
  j["schema"] = "mess.instance/1";
  j["setting"] = to_string(inst.config.setting);
  j["estimator"] = to_string(inst.estimator);
  j["edge_morphology"] = to_string(inst.morphology);
  j["cost_kind"] = to_string(inst.cost_kind);
  j["exclude_background"] = inst.exclude_background;
  j["exit_points"] = inst.placement.exit_points;
  j["exits"] = nlohmann::json::array();
  for (const auto& e : inst.config.exits) {
    nlohmann::json x;
    x["point"] = e.point;
    x["block"] = inst.placement[e.point];
    x["arch"] = e.arch.id();
    x["arch_desc"] = e.arch.describe();
    x["th_pix"] = e.thresholds.th_pix;
    x["th_img"] = e.thresholds.th_img;
    x["edge_enhancement"] = e.thresholds.edge_enhancement;
    j["exits"].push_back(x);
  }
  if (objective) {
    j["objective"] = {{"mode", to_string(objective->mode)},
                      {"bound", objective->threshold},
                      {"cost_kind", to_string(objective->cost_kind)}};
  }
  if (result) {
    j["feasible"] = result->feasible;
    j["binding_constraint"] = result->binding_constraint;
    j["predicted"] = {{"accuracy", result->evaluation.accuracy},
                      {"cost", result->evaluation.cost},
                      {"exit_rates", result->evaluation.exit_rates},
                      {"exit_counts", result->evaluation.exit_counts}};
    j["search"] = {{"candidates", result->candidates}, {"accuracy_evaluations", result->accuracy_evaluations}};
  }
  return j;
}

inline MessInstance instance_from_json(const nlohmann::json& j) {
  MessInstance inst;
  try {
    inst.config.setting = parse_setting(j.at("setting").get<std::string>());
    inst.estimator = parse_estimator(j.value("estimator", std::string("top1")));
    inst.morphology = parse_edge_morphology(j.value("edge_morphology", std::string("dilate")));
    inst.cost_kind = parse_cost_kind(j.value("cost_kind", std::string("workload")));
    inst.exclude_background = j.value("exclude_background", false);
    inst.placement.exit_points = j.at("exit_points").get<std::vector<int>>();
    inst.config.num_points = inst.placement.size();
    for (const auto& x : j.at("exits")) {
      SelectedExit e;
      e.point = x.at("point").get<std::size_t>();
      e.arch = ExitArch::from_id(x.at("arch").get<int>());
      e.thresholds.th_pix = x.value("th_pix", ExitThresholds{}.th_pix);
      e.thresholds.th_img = x.value("th_img", ExitThresholds{}.th_img);
      e.thresholds.edge_enhancement = x.value("edge_enhancement", false);
      inst.config.exits.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("instance: ") + e.what());
  }
  check_config(inst.config);
  return inst;
}

inline MessInstance load_instance(const std::filesystem::path& path) { return instance_from_json(read_json(path)); }

}  // namespace mess
