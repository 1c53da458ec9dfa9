#pragma once

#include <optional>
#include <span>
#include <string>

#include "mess/config.hpp"
#include "mess/error.hpp"
#include "mess/profiling.hpp"
#include "mess/tensorio.hpp"

namespace mess {

/// Expected inference cost of a configuration.
///
///   final-only        cost(b_{1:K_N}) + head_N
///   budgeted          cost(b_{1:K_n}) + head_n
///   anytime           cost(b_{1:K_N}) + sum of selected heads
///   input-dependent   sum_k rate_k * (cost(b_{K_{k-1}:K_k}) + head_k)
///
/// For input-dependent configs `exit_rates[k]` is the fraction of samples
/// reaching the k-th selected exit; the first entry must be 1.
inline double cost_of(const MessConfig& config, const CostProfile& profile, const ExitPlacement& placement,
                      CostKind kind = CostKind::workload,
                      std::optional<std::span<const double>> exit_rates = std::nullopt) {
  check_config(config);
  if (config.num_points != placement.size()) {
    throw Error(ErrorCode::ConfigSettingMismatch, "config and placement disagree on the number of exit points");
  }
  auto block_of = [&](const SelectedExit& e) { return placement[e.point]; };
  auto head = [&](const SelectedExit& e) { return profile.head_cost(block_of(e), e.arch.id(), kind); };

  switch (config.setting) {
    case InferenceSetting::final_only:
    case InferenceSetting::budgeted: {
      const auto& e = config.exits.front();
      return profile.segment_cost(0, static_cast<std::size_t>(block_of(e)), kind) + head(e);
    }
    case InferenceSetting::anytime: {
      double c = profile.segment_cost(0, static_cast<std::size_t>(placement.exit_points.back()), kind);
      for (const auto& e : config.exits) c += head(e);
      return c;
    }
    case InferenceSetting::input_dependent: {
      if (!exit_rates) throw Error(ErrorCode::MissingExitRates, "input-dependent cost needs exit rates");
      const auto rates = *exit_rates;
      if (rates.size() != config.exits.size()) {
        throw Error(ErrorCode::MissingExitRates, "expected " + std::to_string(config.exits.size()) +
                                                     " exit rates, got " + std::to_string(rates.size()));
      }
      if (rates[0] != 1.0) throw Error(ErrorCode::InvalidArgument, "every sample reaches the first selected exit");
      double c = 0.0;
      std::size_t prev = 0;
      for (std::size_t k = 0; k < config.exits.size(); ++k) {
        const auto& e = config.exits[k];
        const auto block = static_cast<std::size_t>(block_of(e));
        c += rates[k] * (profile.segment_cost(prev, block, kind) + head(e));
        prev = block;
      }
      return c;
    }
  }
  return 0.0;
}

}  // namespace mess
