#pragma once

#include "samarl/common.hpp"

#include <string>
#include <vector>

namespace samarl::harness {

struct TrajectoryRow {
  int tick = 0;
  std::string entity_kind;  // "auv" or "target"
  int entity_id = 0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  int assigned_target = -1;  // -1 for targets
  int scene_dominant = 0;
  double w = 0.0;

  bool operator==(const TrajectoryRow&) const = default;
};

inline constexpr const char* kTrajectoryHeader =
    "tick,entity_kind,entity_id,x,y,z,vx,vy,vz,assigned_target,scene_dominant,w";

/// Reals are written with 17 significant digits, so re-import is exact.
void export_trajectories(const std::vector<TrajectoryRow>& rows, const std::string& path);
std::vector<TrajectoryRow> import_trajectories(const std::string& path);

}  // namespace samarl::harness
