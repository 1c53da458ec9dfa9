#pragma once

// `mess` command-line front end. Exit status: 0 success, 1 error or usage,
// 2 search constraint infeasible (the best-violating instance is still
// written).

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mess/mess.hpp"

namespace mess::cli {

inline constexpr int kOk = 0;
inline constexpr int kError = 1;
inline constexpr int kInfeasible = 2;

namespace detail {

inline std::string join(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + "]";
}

inline std::vector<bool> parse_edge_modes(const std::string& s) {
  if (s == "off") return {false};
  if (s == "on") return {true};
  if (s == "both") return {false, true};
  throw Error(ErrorCode::InvalidArgument, "edge modes are off, on or both");
}

inline void write_confidence_map(const ConfidenceMap& cmap, const std::filesystem::path& path) {
  auto bytes = mess::detail::header(mess::detail::DType::f32, {cmap.rows, cmap.cols});
  std::vector<float> values(cmap.values.begin(), cmap.values.end());
  mess::detail::append_le(bytes, values);
  mess::detail::dump(path, bytes);
}

}  // namespace detail

struct ProfileArgs {
  std::string costs;
  std::size_t num_exits = 6;
};

struct CacheArgs {
  std::string manifest, costs, out;
  std::string estimator = "top1";
  std::string morphology = "dilate";
  std::vector<double> th_pix_grid = default_th_pix_grid();
  std::vector<int> archs;
};

struct SearchArgs {
  std::string setting = "input-dep";
  std::string objective = "min-cost";
  double bound = 0.0;
  std::string cache, manifest, costs, out = "instance.json";
  std::string estimator = "top1";
  std::string morphology = "dilate";
  std::string cost_kind = "workload";
  std::size_t max_exits = 4;
  std::vector<double> th_pix_grid = default_th_pix_grid();
  std::vector<double> th_img_grid = default_th_img_grid();
  std::string edge_modes = "off";
  bool exclude_background = false;
};

struct SimulateArgs {
  std::string instance, manifest, costs, report = "report.json";
};

struct LossArgs {
  std::string loss = "pfd";
  std::string manifest;
  double alpha = kDefaultAlpha;
  long long batch_index = 1;
  bool round_robin = false;
  bool reverse_kl = false;
  bool exclude_final = false;
  std::vector<int> archs;
  std::string out;
};

struct ConfidenceArgs {
  std::string pred;
  std::string estimator = "top1";
  double th_pix = 0.9;
  bool edge_enhance = false;
  int output_stride = 1;
  std::string morphology = "dilate";
  std::string out;
};

struct FixtureArgs {
  FixtureSpec spec;
  std::string out;
};

inline int run_profile(const ProfileArgs& a, std::ostream& out) {
  const auto profile = load_cost_profile(a.costs);
  const auto placement = place_exit_points(profile, a.num_exits);
  out << "K = " << detail::join(placement.exit_points) << "\n";
  const auto segments = segment_workloads(profile, placement);
  int prev = 0;
  for (std::size_t n = 0; n < placement.size(); ++n) {
    out << "exit " << n + 1 << ": blocks " << prev + 1 << ".." << placement[n] << "  segment " << segments[n]
        << " GFLOPs  cumulative " << profile.segment_cost(0, static_cast<std::size_t>(placement[n])) << " GFLOPs\n";
    prev = placement[n];
  }
  return kOk;
}

inline CalibrationCache build_cache(const std::string& manifest_path, const std::string& costs_path,
                                    const std::string& estimator, const std::string& morphology,
                                    const std::vector<double>& grid, const std::vector<int>& archs, unsigned threads) {
  const auto manifest = load_manifest(manifest_path);
  const auto profile = load_cost_profile(costs_path);
  ExitPlacement placement{manifest.exit_points};
  CacheOptions options;
  options.th_pix_grid = grid;
  options.estimator = parse_estimator(estimator);
  options.morphology = parse_edge_morphology(morphology);
  options.arch_filter = archs;
  options.threads = threads;
  return build_calibration_cache(manifest, placement, profile, options);
}

inline int run_cache(const CacheArgs& a, unsigned threads, std::ostream& out) {
  const auto cache = build_cache(a.manifest, a.costs, a.estimator, a.morphology, a.th_pix_grid, a.archs, threads);
  save_cache(cache, a.out);
  out << "cached " << cache.image_count() << " images x " << cache.slot_count() << " exit heads -> " << a.out << "\n";
  return kOk;
}

inline int run_search(const SearchArgs& a, unsigned threads, std::ostream& out) {
  CalibrationCache cache;
  if (!a.cache.empty()) {
    cache = load_cache(a.cache);
    if (!a.costs.empty()) cache.set_profile(load_cost_profile(a.costs));
  } else if (!a.manifest.empty() && !a.costs.empty()) {
    cache = build_cache(a.manifest, a.costs, a.estimator, a.morphology, a.th_pix_grid, {}, threads);
  } else {
    throw Error(ErrorCode::InvalidArgument, "search needs --cache or both --manifest and --costs");
  }
  SearchObjective objective{parse_search_mode(a.objective), a.bound, parse_cost_kind(a.cost_kind)};
  SearchLimits limits;
  limits.max_selected = a.max_exits;
  limits.th_pix_grid = a.cache.empty() ? std::vector<double>{} : a.th_pix_grid;
  if (!a.cache.empty()) {
    // Keep only grid values the cache holds when the default grid is used.
    std::vector<double> usable;
    for (double th : a.th_pix_grid)
      if (cache.th_pix_index(th)) usable.push_back(th);
    limits.th_pix_grid = usable.empty() ? cache.th_pix_grid() : usable;
  }
  limits.th_img_grid = a.th_img_grid;
  limits.edge_modes = detail::parse_edge_modes(a.edge_modes);
  limits.exclude_background = a.exclude_background;
  limits.threads = threads;

  const auto result = search(objective, cache, parse_setting(a.setting), limits);
  const auto instance = instance_from_cache(result.config, cache, objective.cost_kind, a.exclude_background);
  write_json(instance_to_json(instance, &result, &objective), a.out);

  out << (result.feasible ? "feasible" : "INFEASIBLE") << " " << to_string(objective.mode) << " "
      << to_string(result.config.setting) << ": accuracy " << result.evaluation.accuracy << " cost "
      << result.evaluation.cost << " exits";
  for (const auto& e : result.config.exits) out << " " << cache.placement()[e.point] << ":" << e.arch.id();
  out << "\n";
  if (!result.feasible) {
    out << "binding constraint: " << result.binding_constraint << "\n";
    return kInfeasible;
  }
  return kOk;
}

inline int run_simulate(const SimulateArgs& a, unsigned threads, std::ostream& out) {
  const auto instance = load_instance(a.instance);
  const auto manifest = load_manifest(a.manifest);
  const auto profile = load_cost_profile(a.costs);
  const auto report = simulate(instance, manifest, profile, SimulateOptions{threads});
  write_json(report_to_json(report), a.report);
  out << to_string(report.setting) << ": mIoU " << report.miou << " pAcc " << report.pixel_accuracy << " cost "
      << report.cost << " exit counts";
  for (auto c : report.exit_counts) out << " " << c;
  out << "\n";
  return kOk;
}

inline nlohmann::json loss_report_json(const LossReport& r) {
  nlohmann::json j;
  j["schema"] = "mess.loss/1";
  j["total"] = r.total;
  j["active_exit_set"] = r.active_exit_set;
  j["per_exit_terms"] = nlohmann::json::array();
  for (const auto& t : r.per_exit_terms) {
    j["per_exit_terms"].push_back({{"exit", t.exit_id}, {"ce", t.ce_term}, {"kl", t.kl_term}});
  }
  return j;
}

inline int run_eval_loss(const LossArgs& a, std::ostream& out) {
  const auto manifest = load_manifest(a.manifest);
  std::vector<LossSample> batch;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    LossSample s;
    s.gt = manifest.read_ground_truth(i);
    for (std::size_t n = 0; n < manifest.num_points(); ++n) {
      const int arch = n < a.archs.size() ? a.archs[n] : manifest.archs_at(n).front();
      s.exits.push_back(manifest.read_prediction(i, n, arch));
    }
    batch.push_back(std::move(s));
  }
  LossReport report;
  if (a.loss == "pretrain") {
    report = pretrain_loss(batch, a.batch_index, a.round_robin ? DropoutSchedule::round_robin : DropoutSchedule::divisors);
  } else if (a.loss == "pfd") {
    PfdOptions options;
    options.alpha = a.alpha;
    options.include_final_exit = !a.exclude_final;
    options.kl_direction = a.reverse_kl ? KlDirection::student_teacher : KlDirection::teacher_student;
    report = pfd_loss(batch, options);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown loss '" + a.loss + "'");
  }
  const auto j = loss_report_json(report);
  if (!a.out.empty()) write_json(j, a.out);
  out << j.dump(2) << "\n";
  return kOk;
}

inline int run_confidence(const ConfidenceArgs& a, std::ostream& out) {
  const auto pred = read_tensor(a.pred);
  const auto cmap = exit_confidence_map(pred, parse_estimator(a.estimator), a.edge_enhance, a.output_stride,
                                        parse_edge_morphology(a.morphology));
  out << "c_img = " << std::setprecision(17) << image_confidence(cmap, a.th_pix) << "\n";
  if (!a.out.empty()) detail::write_confidence_map(cmap, a.out);
  return kOk;
}

inline int run_gen_fixtures(const FixtureArgs& a, std::ostream& out) {
  const auto set = gen_synthetic_fixtures(a.spec, a.out);
  out << "wrote " << set.manifest.images.size() << " images x " << set.placement.size() << " exits to " << a.out
      << " (exit points " << detail::join(set.placement.exit_points) << ")\n";
  return kOk;
}

/// Parses argv and dispatches to one subcommand.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multi-exit segmentation network toolkit: exit placement, configuration search and deployment replay",
               "mess"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file mirroring the command-line flags");
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  ProfileArgs profile_args;
  auto* profile = app.add_subcommand("profile", "Place exit points on a backbone cost profile");
  profile->add_option("--costs", profile_args.costs, "costs.json")->required()->check(CLI::ExistingFile);
  profile->add_option("--num-exits", profile_args.num_exits, "Number of exits N")->required();

  CacheArgs cache_args;
  auto* cache = app.add_subcommand("cache", "Build the calibration cache used by search");
  cache->add_option("--manifest", cache_args.manifest, "Calibration manifest.json")->required();
  cache->add_option("--costs", cache_args.costs, "costs.json")->required();
  cache->add_option("--out", cache_args.out, "Output cache file")->required();
  cache->add_option("--estimator", cache_args.estimator, "top1 | entropy");
  cache->add_option("--edge-morphology", cache_args.morphology, "dilate | erode");
  cache->add_option("--th-pix-grid", cache_args.th_pix_grid, "Pixel-confidence thresholds to tabulate");
  cache->add_option("--archs", cache_args.archs, "Restrict to these architecture ids");

  SearchArgs search_args;
  auto* search_cmd = app.add_subcommand("search", "Find the optimal MESS instance for a setting and constraint");
  search_cmd->add_option("--setting", search_args.setting, "final-only | budgeted | anytime | input-dep");
  search_cmd->add_option("--objective", search_args.objective, "min-cost | max-acc");
  search_cmd->add_option("--bound", search_args.bound, "th_acc (min-cost) or th_cost (max-acc)")->required();
  search_cmd->add_option("--cache", search_args.cache, "Calibration cache from `mess cache`");
  search_cmd->add_option("--manifest", search_args.manifest, "Build the cache from this manifest instead");
  search_cmd->add_option("--costs", search_args.costs, "costs.json (overrides the cached profile)");
  search_cmd->add_option("--out", search_args.out, "instance.json to write");
  search_cmd->add_option("--estimator", search_args.estimator, "top1 | entropy (with --manifest)");
  search_cmd->add_option("--edge-morphology", search_args.morphology, "dilate | erode (with --manifest)");
  search_cmd->add_option("--cost-kind", search_args.cost_kind, "workload | latency");
  search_cmd->add_option("--max-exits", search_args.max_exits, "Cap on simultaneously selected exits");
  search_cmd->add_option("--th-pix-grid", search_args.th_pix_grid, "th_pix values to search");
  search_cmd->add_option("--th-img-grid", search_args.th_img_grid, "th_img values to search");
  search_cmd->add_option("--edge-modes", search_args.edge_modes, "off | on | both");
  search_cmd->add_flag("--exclude-background", search_args.exclude_background, "Drop background from mIoU");

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Replay an instance over a manifest");
  sim->add_option("--instance", sim_args.instance, "instance.json")->required();
  sim->add_option("--manifest", sim_args.manifest, "manifest.json")->required();
  sim->add_option("--costs", sim_args.costs, "costs.json")->required();
  sim->add_option("--report", sim_args.report, "report.json to write");

  LossArgs loss_args;
  auto* loss = app.add_subcommand("eval-loss", "Evaluate the pre-training or distillation loss on a manifest batch");
  loss->add_option("--loss", loss_args.loss, "pretrain | pfd")->required();
  loss->add_option("--manifest", loss_args.manifest, "manifest.json")->required();
  loss->add_option("--alpha", loss_args.alpha, "Distillation weight");
  loss->add_option("--batch-index", loss_args.batch_index, "Batch index j (>= 1)");
  loss->add_flag("--round-robin", loss_args.round_robin, "One early exit per batch instead of all divisors of j");
  loss->add_flag("--reverse-kl", loss_args.reverse_kl, "Use KL(y_i || y_N)");
  loss->add_flag("--exclude-final", loss_args.exclude_final, "Sum distillation terms over early exits only");
  loss->add_option("--archs", loss_args.archs, "Architecture id per exit point (default: first listed)");
  loss->add_option("--out", loss_args.out, "Write the report as JSON");

  ConfidenceArgs conf_args;
  auto* conf = app.add_subcommand("confidence", "Image confidence of one prediction tensor");
  conf->add_option("--pred", conf_args.pred, "Prediction .mt file")->required();
  conf->add_option("--estimator", conf_args.estimator, "top1 | entropy");
  conf->add_option("--th-pix", conf_args.th_pix, "Pixel-confidence threshold");
  conf->add_flag("--edge-enhance", conf_args.edge_enhance, "Median-smooth confidence along semantic edges");
  conf->add_option("--os", conf_args.output_stride, "Output stride of the exit");
  conf->add_option("--edge-morphology", conf_args.morphology, "dilate | erode");
  conf->add_option("--out", conf_args.out, "Write the (enhanced) confidence map as .mt");

  FixtureArgs fix_args;
  auto* fix = app.add_subcommand("gen-fixtures", "Generate a deterministic synthetic calibration set");
  fix->add_option("--seed", fix_args.spec.seed, "64-bit seed");
  fix->add_option("--split", fix_args.spec.split, "Image split (same network and costs for one seed)");
  fix->add_option("--out", fix_args.out, "Output directory")->required();
  fix->add_option("--images", fix_args.spec.images, "Image count");
  fix->add_option("--rows", fix_args.spec.rows, "Rows per image");
  fix->add_option("--cols", fix_args.spec.cols, "Columns per image");
  fix->add_option("--classes", fix_args.spec.classes, "Class count M");
  fix->add_option("--ladder", fix_args.spec.ladder, "Target pixel accuracy per exit, shallow to deep");
  fix->add_option("--correlation", fix_args.spec.correlation, "Confidence/correctness correlation in [0,1]");
  fix->add_option("--archs-per-exit", fix_args.spec.archs_per_exit, "Head variants per exit point");
  fix->add_option("--output-stride", fix_args.spec.output_stride, "Output stride recorded for every exit");
  fix->add_option("--easy-fraction", fix_args.spec.easy_fraction, "Share of easy images");
  fix->add_option("--blocks", fix_args.spec.blocks, "Backbone block count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kError;
  }

  try {
    if (*profile) return run_profile(profile_args, out);
    if (*cache) return run_cache(cache_args, threads, out);
    if (*search_cmd) return run_search(search_args, threads, out);
    if (*sim) return run_simulate(sim_args, threads, out);
    if (*loss) return run_eval_loss(loss_args, out);
    if (*conf) return run_confidence(conf_args, out);
    if (*fix) return run_gen_fixtures(fix_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}

}  // namespace mess::cli
