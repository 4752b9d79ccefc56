#include "samarl/harness/trajectory.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace samarl::harness {

void export_trajectories(const std::vector<TrajectoryRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << kTrajectoryHeader << '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g\n", r.tick,
                  r.entity_kind.c_str(), r.entity_id, r.position.x(), r.position.y(), r.position.z(), r.velocity.x(),
                  r.velocity.y(), r.velocity.z(), r.assigned_target, r.scene_dominant, r.w);
    out << buf;
  }
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<TrajectoryRow> import_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader) throw IoError("'" + path + "': unexpected header");
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 12) throw IoError("'" + path + "': malformed row '" + line + "'");
    TrajectoryRow r;
    r.tick = std::stoi(f[0]);
    r.entity_kind = f[1];
    r.entity_id = std::stoi(f[2]);
    for (int k = 0; k < 3; ++k) {
      r.position[k] = std::strtod(f[static_cast<std::size_t>(3 + k)].c_str(), nullptr);
      r.velocity[k] = std::strtod(f[static_cast<std::size_t>(6 + k)].c_str(), nullptr);
    }
    r.assigned_target = std::stoi(f[9]);
    r.scene_dominant = std::stoi(f[10]);
    r.w = std::strtod(f[11].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace samarl::harness
