#include "loaddev/groupstats.hpp"

#include <cmath>

#include "loaddev/errors.hpp"

namespace loaddev::groupstats {

namespace {

void check_group(std::span<const ImpactPoint> points) {
  if (points.empty()) {
    throw ValidationError("empty group");
  }
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ValidationError("non-finite impact coordinate");
    }
  }
}

}  // namespace

ImpactPoint group_center(std::span<const ImpactPoint> points) {
  check_group(points);
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& p : points) {
    sx += p.x;
    sy += p.y;
  }
  const double n = static_cast<double>(points.size());
  return {sx / n, sy / n};
}

std::vector<double> radial_deviations(std::span<const ImpactPoint> points) {
  const ImpactPoint c = group_center(points);
  std::vector<double> radii;
  radii.reserve(points.size());
  for (const auto& p : points) {
    radii.push_back(std::hypot(p.x - c.x, p.y - c.y));
  }
  return radii;
}

double mean_radius(std::span<const ImpactPoint> points) {
  const auto radii = radial_deviations(points);
  double sum = 0.0;
  for (double r : radii) sum += r;
  return sum / static_cast<double>(radii.size());
}

double extreme_spread(std::span<const ImpactPoint> points) {
  check_group(points);
  double max_d = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = std::hypot(points[i].x - points[j].x, points[i].y - points[j].y);
      if (d > max_d) max_d = d;
    }
  }
  return max_d;
}

GroupSummary summarize(std::span<const ImpactPoint> points) {
  GroupSummary s;
  s.center = group_center(points);
  s.n = static_cast<int>(points.size());
  s.radii = radial_deviations(points);
  double sum = 0.0;
  for (double r : s.radii) sum += r;
  s.mean_radius = sum / static_cast<double>(s.n);
  s.extreme_spread = extreme_spread(points);
  s.degenerate = s.n < 2;
  return s;
}

}  // namespace loaddev::groupstats
