#pragma once

// Exhaustive configuration search over a calibration cache.
//
// Candidates are compared by a total order so that the result does not
// depend on enumeration order or thread count:
//
//   min-cost mode   cost asc, #exits asc, then the content key
//   max-acc mode    accuracy desc, cost asc, #exits asc, then the content key
//
// The content key compares selected point indices (shallower first),
// architecture ids, then each exit's (edge, th_pix, th_img), all
// lexicographically ascending.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mess/calibration_cache.hpp"
#include "mess/config.hpp"
#include "mess/error.hpp"

namespace mess {

/// Visits every combination of (None | available arch) per exit point except
/// the all-None one. Odometer order: point 0 is the most significant digit,
/// None precedes the architectures, which keep their listed order.
inline std::size_t enumerate_space(const std::vector<std::vector<ExitArch>>& availability,
                                   const std::function<void(const MessConfig&)>& visit) {
  const bool any = std::any_of(availability.begin(), availability.end(), [](const auto& v) { return !v.empty(); });
  if (!any) throw Error(ErrorCode::EmptySpace, "no exit architecture available at any point");
  const std::size_t points = availability.size();
  std::vector<std::size_t> digit(points, 0);
  std::size_t visited = 0;
  while (true) {
    std::size_t p = points;
    bool carry_out = true;
    while (p > 0) {
      --p;
      if (++digit[p] <= availability[p].size()) {
        carry_out = false;
        break;
      }
      digit[p] = 0;
    }
    if (carry_out) return visited;
    MessConfig config;
    config.num_points = points;
    for (std::size_t n = 0; n < points; ++n) {
      if (digit[n] > 0) config.exits.push_back({n, availability[n][digit[n] - 1], {}});
    }
    ++visited;
    visit(config);
  }
}

inline std::vector<MessConfig> enumerate_space(const std::vector<std::vector<ExitArch>>& availability) {
  std::vector<MessConfig> out;
  enumerate_space(availability, [&](const MessConfig& c) { out.push_back(c); });
  return out;
}

enum class SearchMode { min_cost_given_acc, max_acc_given_cost };

inline std::string_view to_string(SearchMode m) { return m == SearchMode::min_cost_given_acc ? "min-cost" : "max-acc"; }

inline SearchMode parse_search_mode(std::string_view s) {
  if (s == "min-cost" || s == "min_cost") return SearchMode::min_cost_given_acc;
  if (s == "max-acc" || s == "max_acc") return SearchMode::max_acc_given_cost;
  throw Error(ErrorCode::InvalidArgument, "unknown objective '" + std::string(s) + "'");
}

struct SearchObjective {
  SearchMode mode = SearchMode::min_cost_given_acc;
  double threshold = 0.0;  // th_acc in [0,1] or th_cost > 0
  CostKind cost_kind = CostKind::workload;
};

struct SearchLimits {
  std::size_t max_selected = 4;
  /// Subset of the cache's th_pix grid; empty uses the whole grid.
  std::vector<double> th_pix_grid;
  std::vector<double> th_img_grid = default_th_img_grid();
  std::vector<bool> edge_modes = {false};
  bool exclude_background = false;
  unsigned threads = 0;
};

struct SearchResult {
  bool feasible = false;
  MessConfig config;
  Evaluation evaluation;
  std::string binding_constraint;
  std::size_t candidates = 0;           // configurations enumerated
  std::size_t accuracy_evaluations = 0;  // candidates that reached the accuracy check
};

namespace detail {

inline bool content_less(const MessConfig& a, const MessConfig& b) {
  auto points = [](const MessConfig& c) {
    std::vector<std::size_t> v;
    for (const auto& e : c.exits) v.push_back(e.point);
    return v;
  };
  auto archs = [](const MessConfig& c) {
    std::vector<int> v;
    for (const auto& e : c.exits) v.push_back(e.arch.id());
    return v;
  };
  auto thresholds = [](const MessConfig& c) {
    std::vector<std::tuple<bool, double, double>> v;
    for (const auto& e : c.exits) v.emplace_back(e.thresholds.edge_enhancement, e.thresholds.th_pix, e.thresholds.th_img);
    return v;
  };
  if (points(a) != points(b)) return points(a) < points(b);
  if (archs(a) != archs(b)) return archs(a) < archs(b);
  return thresholds(a) < thresholds(b);
}

/// Key comparison that needs no accuracy: cost, exit count, content.
inline bool cost_key_less(double cost_a, const MessConfig& a, double cost_b, const MessConfig& b) {
  if (cost_a != cost_b) return cost_a < cost_b;
  if (a.exits.size() != b.exits.size()) return a.exits.size() < b.exits.size();
  return content_less(a, b);
}

struct Scored {
  MessConfig config;
  double cost = 0.0;
  std::optional<Evaluation> eval;
};

inline bool better(SearchMode mode, const Scored& a, const Scored& b) {
  if (mode == SearchMode::max_acc_given_cost && a.eval->accuracy != b.eval->accuracy) {
    return a.eval->accuracy > b.eval->accuracy;
  }
  return cost_key_less(a.cost, a.config, b.cost, b.config);
}

/// Ordering among constraint violators: closest to the bound first.
inline bool less_violating(SearchMode mode, const Scored& a, const Scored& b) {
  if (mode == SearchMode::min_cost_given_acc) {
    if (a.eval->accuracy != b.eval->accuracy) return a.eval->accuracy > b.eval->accuracy;
  }
  return cost_key_less(a.cost, a.config, b.cost, b.config);
}

struct WorkerState {
  std::optional<Scored> best;
  std::optional<Scored> violator;
  std::size_t candidates = 0;
  std::size_t accuracy_evaluations = 0;
};

inline bool setting_admits(InferenceSetting setting, const MessConfig& skeleton, std::size_t max_selected) {
  const std::size_t k = skeleton.exits.size();
  if (k > max_selected) return false;
  const bool has_final = skeleton.exits.back().point + 1 == skeleton.num_points;
  switch (setting) {
    case InferenceSetting::final_only: return k == 1 && has_final;
    case InferenceSetting::budgeted: return k == 1;
    case InferenceSetting::anytime: return has_final;
    case InferenceSetting::input_dependent: return true;
  }
  return false;
}

}  // namespace detail

/// Solves the min-cost (accuracy-constrained) or max-accuracy
/// (cost-constrained) problem exactly over the cache's configuration space.
/// Cost is always computed first; accuracy is only evaluated for candidates
/// that can still win.
inline SearchResult search(const SearchObjective& objective, const CalibrationCache& cache, InferenceSetting setting,
                           const SearchLimits& limits = {}) {
  if (!std::isfinite(objective.threshold)) throw Error(ErrorCode::InvalidArgument, "objective bound must be finite");
  if (objective.mode == SearchMode::max_acc_given_cost && !(objective.threshold > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "cost bound must be positive");
  }
  if (objective.mode == SearchMode::min_cost_given_acc && !(objective.threshold >= 0.0 && objective.threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "accuracy bound must lie in [0,1]");
  }
  if (limits.max_selected < 1) throw Error(ErrorCode::InvalidArgument, "max_selected must be >= 1");

  std::vector<std::size_t> pix_indices;
  const auto& pix_grid = limits.th_pix_grid.empty() ? cache.th_pix_grid() : limits.th_pix_grid;
  for (double th : pix_grid) {
    const auto g = cache.th_pix_index(th);
    if (!g) throw Error(ErrorCode::UnknownThreshold, "th_pix " + std::to_string(th) + " is not in the cache grid");
    pix_indices.push_back(*g);
  }
  if (setting == InferenceSetting::input_dependent &&
      (pix_indices.empty() || limits.th_img_grid.empty() || limits.edge_modes.empty())) {
    throw Error(ErrorCode::InvalidArgument, "empty threshold grid");
  }

  std::vector<std::vector<ExitArch>> availability;
  for (std::size_t n = 0; n < cache.num_points(); ++n) {
    std::vector<ExitArch> archs;
    for (int id : cache.archs_at(n)) archs.push_back(ExitArch::from_id(id));
    availability.push_back(std::move(archs));
  }
  std::vector<MessConfig> skeletons;
  enumerate_space(availability, [&](const MessConfig& c) {
    if (detail::setting_admits(setting, c, limits.max_selected)) skeletons.push_back(c);
  });
  for (auto& s : skeletons) s.setting = setting;

  const EvalOptions eval_options{objective.cost_kind, limits.exclude_background};
  const bool min_cost = objective.mode == SearchMode::min_cost_given_acc;
  const std::size_t per_exit_choices = limits.edge_modes.size() * pix_indices.size() * limits.th_img_grid.size();

  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(resolve_threads(limits.threads), std::max<std::size_t>(skeletons.size(), 1)));
  std::vector<detail::WorkerState> states(workers);

  auto consider = [&](detail::WorkerState& st, detail::Scored cand, const std::vector<ResolvedExit>& resolved) {
    ++st.candidates;
    if (min_cost) {
      if (st.best && !detail::cost_key_less(cand.cost, cand.config, st.best->cost, st.best->config)) return;
    } else if (cand.cost > objective.threshold) {
      if (!st.violator || detail::cost_key_less(cand.cost, cand.config, st.violator->cost, st.violator->config)) {
        st.violator = std::move(cand);
      }
      return;
    }
    ++st.accuracy_evaluations;
    cand.eval = evaluate_resolved(cand.config, resolved, cache, eval_options);
    const bool feasible = min_cost ? cand.eval->accuracy >= objective.threshold : true;
    if (feasible) {
      if (!st.best || detail::better(objective.mode, cand, *st.best)) st.best = std::move(cand);
    } else if (!st.best) {
      if (!st.violator || detail::less_violating(objective.mode, cand, *st.violator)) st.violator = std::move(cand);
    }
  };

  // Workers take skeletons round-robin; pruning only uses each worker's own
  // incumbent, so the reduced result is independent of the thread count.
  parallel_for(workers, workers, [&](std::size_t t) {
    auto& st = states[t];
    for (std::size_t s = t; s < skeletons.size(); s += workers) {
      MessConfig config = skeletons[s];
      if (setting != InferenceSetting::input_dependent || config.exits.size() == 1) {
        const auto resolved = resolve_config(config, cache);
        const std::vector<double> all(config.exits.size(), 1.0);
        detail::Scored cand{config, cost_of(config, cache.profile(), cache.placement(), objective.cost_kind, all), {}};
        consider(st, std::move(cand), resolved);
        continue;
      }

      // Cheapest outcome: every image leaves at the first selected exit.
      if (min_cost && st.best) {
        const auto& first = config.exits.front();
        const double bound =
            cache.profile().segment_cost(0, static_cast<std::size_t>(cache.placement()[first.point]), objective.cost_kind) +
            cache.profile().head_cost(cache.placement()[first.point], first.arch.id(), objective.cost_kind);
        if (bound > st.best->cost) continue;
      }

      const std::size_t deciding = config.exits.size() - 1;
      std::vector<std::size_t> choice(deciding, 0);
      for (std::size_t k = 0; k < deciding; ++k) {
        config.exits[k].thresholds = {cache.th_pix_grid()[pix_indices[0]], limits.th_img_grid[0], limits.edge_modes[0]};
      }
      auto resolved = resolve_config(config, cache);
      while (true) {
        for (std::size_t k = 0; k < deciding; ++k) {
          std::size_t c = choice[k];
          const std::size_t img_i = c % limits.th_img_grid.size();
          c /= limits.th_img_grid.size();
          const std::size_t pix_i = c % pix_indices.size();
          c /= pix_indices.size();
          const bool edge = limits.edge_modes[c];
          auto& th = config.exits[k].thresholds;
          th.edge_enhancement = edge;
          th.th_pix = cache.th_pix_grid()[pix_indices[pix_i]];
          th.th_img = limits.th_img_grid[img_i];
          resolved[k].edge = edge;
          resolved[k].th_pix_index = pix_indices[pix_i];
          resolved[k].th_img = th.th_img;
        }
        Evaluation rates;
        rates_from_assignment(exit_assignment(resolved, cache), resolved.size(), rates);
        detail::Scored cand{config, cost_of(config, cache.profile(), cache.placement(), objective.cost_kind, rates.exit_rates), {}};
        consider(st, std::move(cand), resolved);

        std::size_t k = deciding;
        while (k > 0) {
          --k;
          if (++choice[k] < per_exit_choices) break;
          choice[k] = 0;
          if (k == 0) goto next_skeleton;
        }
      }
    next_skeleton:;
    }
  });

  SearchResult result;
  std::optional<detail::Scored> best, violator;
  for (auto& st : states) {
    result.candidates += st.candidates;
    result.accuracy_evaluations += st.accuracy_evaluations;
    if (st.best && (!best || detail::better(objective.mode, *st.best, *best))) best = st.best;
  }
  if (best) {
    result.feasible = true;
    result.config = best->config;
    result.evaluation = *best->eval;
    return result;
  }
  for (auto& st : states) {
    if (!st.violator) continue;
    if (!st.violator->eval) st.violator->eval = evaluate_config(st.violator->config, cache, eval_options);
    if (!violator || detail::less_violating(objective.mode, *st.violator, *violator)) violator = st.violator;
  }
  if (!violator) throw Error(ErrorCode::EmptySpace, "no configuration admitted by the setting and limits");
  result.feasible = false;
  result.config = violator->config;
  result.evaluation = *violator->eval;
  result.binding_constraint = min_cost ? "accuracy >= " + std::to_string(objective.threshold)
                                       : std::string(objective.cost_kind == CostKind::workload ? "workload" : "latency") +
                                             " <= " + std::to_string(objective.threshold);
  return result;
}

}  // namespace mess
