#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mess/error.hpp"
#include "mess/tensorio.hpp"

namespace mess {

/// Candidate exit points as 1-based block ordinals K_1 < ... < K_N.
struct ExitPlacement {
  std::vector<int> exit_points;

  std::size_t size() const { return exit_points.size(); }
  int operator[](std::size_t n) const { return exit_points[n]; }

  friend bool operator==(const ExitPlacement&, const ExitPlacement&) = default;
};

/// Places N exits so that exit n < N sits at the block whose cumulative
/// workload is nearest to n/N of the backbone total; the last exit sits at
/// the final block. Ties go to the shallower block.
inline ExitPlacement place_exit_points(const CostProfile& profile, std::size_t num_exits) {
  const std::size_t blocks = profile.block_count();
  if (num_exits < 1) throw Error(ErrorCode::InvalidArgument, "need at least one exit");
  if (num_exits > blocks) {
    throw Error(ErrorCode::TooManyExits,
                std::to_string(num_exits) + " exits requested for " + std::to_string(blocks) + " blocks");
  }

  std::vector<double> cumulative(blocks);
  double running = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    running += profile.blocks[b].gflops;
    cumulative[b] = running;
  }
  const double total = running;
  const auto n_exits = static_cast<double>(num_exits);

  ExitPlacement placement;
  for (std::size_t n = 1; n < num_exits; ++n) {
    // |N*cum - n*total| orders blocks exactly like |cum - n/N*total| without
    // the extra rounding of the division.
    std::size_t best = 0;
    double best_gap = std::abs(n_exits * cumulative[0] - static_cast<double>(n) * total);
    for (std::size_t b = 1; b < blocks; ++b) {
      const double gap = std::abs(n_exits * cumulative[b] - static_cast<double>(n) * total);
      if (gap < best_gap) {
        best_gap = gap;
        best = b;
      }
    }
    placement.exit_points.push_back(static_cast<int>(best + 1));
  }
  placement.exit_points.push_back(static_cast<int>(blocks));

  for (std::size_t n = 1; n < placement.size(); ++n) {
    if (placement[n] <= placement[n - 1]) {
      throw Error(ErrorCode::DuplicatePlacement,
                  "exits " + std::to_string(n) + " and " + std::to_string(n + 1) + " both resolve to block " +
                      std::to_string(placement[n]));
    }
  }
  return placement;
}

/// Workload of each backbone segment between consecutive exits,
/// cost(b_{K_{n-1}:K_n}) with K_0 = 0.
inline std::vector<double> segment_workloads(const CostProfile& profile, const ExitPlacement& placement,
                                             CostKind kind = CostKind::workload) {
  std::vector<double> out;
  std::size_t prev = 0;
  for (int k : placement.exit_points) {
    out.push_back(profile.segment_cost(prev, static_cast<std::size_t>(k), kind));
    prev = static_cast<std::size_t>(k);
  }
  return out;
}

}  // namespace mess
