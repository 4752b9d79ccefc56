#pragma once

#include "samarl/env/ocean_env.hpp"

#include <span>
#include <vector>

namespace samarl::harness {

/// Entity positions at one tick.
struct Frame {
  std::vector<Vec3> auv_positions;
  std::vector<Vec3> target_positions;
};

/// Number of targets with at least one assigned AUV within d_target.
int tracked_targets(std::span<const Vec3> auv_positions, std::span<const Vec3> target_positions,
                    const env::Assignment& assignment, double d_target);

/// 100 * mean over steps of (tracked targets / total targets).
/// Throws ContractViolation on an empty trajectory or mismatched history.
double tracking_accuracy(std::span<const Frame> trajectory, std::span<const env::Assignment> assignments,
                         double d_target);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> xs);

/// Trailing moving average with window `window` (shorter at the start).
std::vector<double> moving_average(std::span<const double> xs, std::size_t window);

struct TrendFit {
  double slope = 0.0;
  double slope_se = 0.0;
};

/// Least-squares slope of ys against their index, with its standard error.
TrendFit linear_trend(std::span<const double> ys);

}  // namespace samarl::harness
