#pragma once

#include <cstddef>
#include <vector>

namespace sgcn::ink {

struct Point {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Stroke = std::vector<Point>;

/// Pen-down strokes in writing order. Timestamps and pressure are not kept;
/// point order is the only temporal signal.
struct Trajectory {
  std::vector<Stroke> strokes;

  /// Throws std::invalid_argument("empty trajectory...") when there are no
  /// strokes or a stroke has no points, and on non-finite coordinates.
  void validate() const;
  std::size_t num_points() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Default resampling step on the unit square; yields roughly 100 points for a
/// typical character.
inline constexpr double kDefaultInterval = 0.02;

/// Uniform scale and translation so the longest bounding-box side has length 1
/// and the character is centred at (0.5, 0.5). A single-point (or all
/// coincident) input maps to (0.5, 0.5).
Trajectory normalize(const Trajectory& traj);

/// Re-samples every stroke independently so that consecutive points are
/// exactly `interval` apart (straight-line distance), walking along the
/// polyline with linear interpolation. The first and last original points are
/// kept; the final gap of a stroke may be shorter than `interval`. A dot
/// (zero-length stroke) collapses to one point.
Trajectory resample(const Trajectory& traj, double interval = kDefaultInterval);

}  // namespace sgcn::ink
