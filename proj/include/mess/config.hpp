#pragma once

// Exit architectures, MESS instance configurations and inference settings.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mess/confidence.hpp"
#include "mess/error.hpp"

namespace mess {

enum class HeadType : std::uint8_t { FCN = 0, DLB = 1 };

/// One point of the per-exit architecture space: channel reduction
/// (/1,/2,/4,/8 as 0..3), extra blocks (0..3), rapid dilation increase and
/// the segmentation head. 64 values, identified by `id()` in 0..63.
struct ExitArch {
  std::uint8_t crm = 0;
  std::uint8_t num_blocks = 0;
  bool rdi = false;
  HeadType head = HeadType::FCN;

  static constexpr int kCount = 64;

  int id() const { return crm + 4 * num_blocks + 16 * (rdi ? 1 : 0) + 32 * static_cast<int>(head); }

  static ExitArch from_id(int id) {
    if (id < 0 || id >= kCount) throw Error(ErrorCode::UnknownArch, "architecture id " + std::to_string(id));
    ExitArch a;
    a.crm = static_cast<std::uint8_t>(id % 4);
    a.num_blocks = static_cast<std::uint8_t>((id / 4) % 4);
    a.rdi = ((id / 16) % 2) != 0;
    a.head = static_cast<HeadType>(id / 32);
    return a;
  }

  int channel_divisor() const { return 1 << crm; }

  std::string describe() const {
    return "crm/" + std::to_string(channel_divisor()) + " blocks=" + std::to_string(num_blocks) +
           (rdi ? " rdi" : "") + (head == HeadType::FCN ? " FCN" : " DLB");
  }

  friend bool operator==(const ExitArch&, const ExitArch&) = default;
};

inline std::vector<ExitArch> all_exit_archs() {
  std::vector<ExitArch> out;
  for (int id = 0; id < ExitArch::kCount; ++id) out.push_back(ExitArch::from_id(id));
  return out;
}

enum class InferenceSetting { final_only, budgeted, anytime, input_dependent };

inline std::string_view to_string(InferenceSetting s) {
  switch (s) {
    case InferenceSetting::final_only: return "final-only";
    case InferenceSetting::budgeted: return "budgeted";
    case InferenceSetting::anytime: return "anytime";
    case InferenceSetting::input_dependent: return "input-dep";
  }
  return "?";
}

inline InferenceSetting parse_setting(std::string_view s) {
  if (s == "final-only" || s == "final_only") return InferenceSetting::final_only;
  if (s == "budgeted") return InferenceSetting::budgeted;
  if (s == "anytime") return InferenceSetting::anytime;
  if (s == "input-dep" || s == "input_dependent" || s == "input-dependent") return InferenceSetting::input_dependent;
  throw Error(ErrorCode::InvalidArgument, "unknown inference setting '" + std::string(s) + "'");
}

struct SelectedExit {
  std::size_t point = 0;  // index into the exit placement, 0-based
  ExitArch arch;
  ExitThresholds thresholds;

  friend bool operator==(const SelectedExit&, const SelectedExit&) = default;
};

/// A MESS instance: the exits kept from the overprovisioned network, in
/// depth order. Points absent from `exits` take the None option.
struct MessConfig {
  InferenceSetting setting = InferenceSetting::input_dependent;
  std::size_t num_points = 0;
  std::vector<SelectedExit> exits;

  std::size_t selected_count() const { return exits.size(); }

  friend bool operator==(const MessConfig&, const MessConfig&) = default;
};

/// Throws ConfigSettingMismatch when the selection is not a valid instance
/// of its inference setting.
inline void check_config(const MessConfig& config) {
  if (config.exits.empty()) throw Error(ErrorCode::ConfigSettingMismatch, "no exit selected");
  for (std::size_t i = 0; i < config.exits.size(); ++i) {
    if (config.exits[i].point >= config.num_points) {
      throw Error(ErrorCode::ConfigSettingMismatch, "exit point index out of range");
    }
    if (i > 0 && config.exits[i].point <= config.exits[i - 1].point) {
      throw Error(ErrorCode::ConfigSettingMismatch, "selected exits must be strictly increasing in depth");
    }
  }
  const bool has_final = config.exits.back().point + 1 == config.num_points;
  switch (config.setting) {
    case InferenceSetting::final_only:
      if (config.exits.size() != 1 || !has_final) {
        throw Error(ErrorCode::ConfigSettingMismatch, "final-only selects exactly the last exit point");
      }
      break;
    case InferenceSetting::budgeted:
      if (config.exits.size() != 1) throw Error(ErrorCode::ConfigSettingMismatch, "budgeted selects exactly one exit");
      break;
    case InferenceSetting::anytime:
      if (!has_final) throw Error(ErrorCode::ConfigSettingMismatch, "anytime runs through the final exit");
      break;
    case InferenceSetting::input_dependent:
      break;
  }
}

}  // namespace mess
