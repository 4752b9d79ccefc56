#include "samarl/harness/metrics.hpp"

#include <cmath>

namespace samarl::harness {

int tracked_targets(std::span<const Vec3> auv_positions, std::span<const Vec3> target_positions,
                    const env::Assignment& assignment, double d_target) {
  require(assignment.size() == auv_positions.size(), "tracked_targets: assignment size mismatch");
  int tracked = 0;
  for (std::size_t t = 0; t < target_positions.size(); ++t) {
    for (std::size_t i = 0; i < auv_positions.size(); ++i) {
      if (assignment[i] == static_cast<int>(t) && (auv_positions[i] - target_positions[t]).norm() <= d_target) {
        ++tracked;
        break;
      }
    }
  }
  return tracked;
}

double tracking_accuracy(std::span<const Frame> trajectory, std::span<const env::Assignment> assignments,
                         double d_target) {
  require(!trajectory.empty(), "tracking_accuracy: empty trajectory");
  require(trajectory.size() == assignments.size(), "tracking_accuracy: one assignment per step required");
  double sum = 0.0;
  for (std::size_t s = 0; s < trajectory.size(); ++s) {
    const auto& f = trajectory[s];
    require(!f.target_positions.empty(), "tracking_accuracy: no targets");
    sum += static_cast<double>(tracked_targets(f.auv_positions, f.target_positions, assignments[s], d_target)) /
           static_cast<double>(f.target_positions.size());
  }
  return 100.0 * sum / static_cast<double>(trajectory.size());
}

MeanStd mean_std(std::span<const double> xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return out;
}

std::vector<double> moving_average(std::span<const double> xs, std::size_t window) {
  require(window >= 1, "moving_average: window must be >= 1");
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= window) acc -= xs[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

TrendFit linear_trend(std::span<const double> ys) {
  require(ys.size() >= 3, "linear_trend: need at least three points");
  const double n = static_cast<double>(ys.size());
  const double xbar = (n - 1.0) / 2.0;
  double ybar = 0.0;
  for (double y : ys) ybar += y;
  ybar /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double dx = static_cast<double>(i) - xbar;
    sxx += dx * dx;
    sxy += dx * (ys[i] - ybar);
  }
  TrendFit fit;
  fit.slope = sxy / sxx;
  double sse = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double r = ys[i] - ybar - fit.slope * (static_cast<double>(i) - xbar);
    sse += r * r;
  }
  fit.slope_se = std::sqrt(sse / (n - 2.0) / sxx);
  return fit;
}

}  // namespace samarl::harness
