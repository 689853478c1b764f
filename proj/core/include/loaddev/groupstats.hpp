#pragma once

#include <span>
#include <vector>

namespace loaddev::groupstats {

/// One bullet hole in target-local coordinates.  The length unit is a
/// dataset-level setting (millimetres by default); nothing here converts
/// units.
struct ImpactPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Dispersion summary of one shot group.
///
/// `degenerate` is set for single-shot groups, whose metrics are all zero by
/// construction; invalidation can shrink a group that far, and callers that
/// care should check the flag rather than trust a zero.
struct GroupSummary {
  ImpactPoint center;
  int n = 0;
  double mean_radius = 0.0;
  double extreme_spread = 0.0;
  std::vector<double> radii;  // per shot, input order
  bool degenerate = false;    // n < 2
};

/// Componentwise arithmetic mean of the group.  Throws ValidationError on an
/// empty list or non-finite coordinates.
ImpactPoint group_center(std::span<const ImpactPoint> points);

/// Average Euclidean distance from each shot to the group center.
double mean_radius(std::span<const ImpactPoint> points);

/// Maximum pairwise Euclidean distance; 0 for a single shot.
double extreme_spread(std::span<const ImpactPoint> points);

/// Distance from each shot to the group center, in input order.  The mean of
/// the result equals mean_radius(points).  This is the per-shot response
/// variable the linear models consume.
std::vector<double> radial_deviations(std::span<const ImpactPoint> points);

/// All of the above in one pass over the group.
GroupSummary summarize(std::span<const ImpactPoint> points);

}  // namespace loaddev::groupstats
