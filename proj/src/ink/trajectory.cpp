#include "sgcn/ink/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sgcn::ink {

void Trajectory::validate() const {
  if (strokes.empty()) throw std::invalid_argument("empty trajectory: no strokes");
  for (std::size_t s = 0; s < strokes.size(); ++s) {
    if (strokes[s].empty()) {
      throw std::invalid_argument("empty trajectory: stroke " + std::to_string(s) +
                                  " has no points");
    }
    for (const Point& p : strokes[s]) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw std::invalid_argument("non-finite coordinate in stroke " + std::to_string(s));
      }
    }
  }
}

std::size_t Trajectory::num_points() const {
  std::size_t n = 0;
  for (const auto& s : strokes) n += s.size();
  return n;
}

Trajectory normalize(const Trajectory& traj) {
  traj.validate();
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  for (const auto& stroke : traj.strokes) {
    for (const Point& p : stroke) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  const double side = std::max(max_x - min_x, max_y - min_y);
  const double cx = 0.5 * (min_x + max_x);
  const double cy = 0.5 * (min_y + max_y);

  Trajectory out = traj;
  for (auto& stroke : out.strokes) {
    for (Point& p : stroke) {
      if (side > 0) {
        p.x = (p.x - cx) / side + 0.5;
        p.y = (p.y - cy) / side + 0.5;
      } else {
        p = {0.5, 0.5};
      }
    }
  }
  return out;
}

namespace {

// Points closer than this to the previous sample are treated as coincident.
constexpr double kCoincident = 1e-9;

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

Stroke resample_stroke(const Stroke& stroke, double interval) {
  Stroke out{stroke.front()};
  Point current = stroke.front();
  const double r2 = interval * interval;

  for (std::size_t seg = 0; seg + 1 < stroke.size(); ++seg) {
    Point a = stroke[seg];
    const Point b = stroke[seg + 1];
    // Invariant: every point of the walk so far lies strictly inside the
    // circle of radius `interval` around `current`.
    while (true) {
      const double vx = b.x - a.x;
      const double vy = b.y - a.y;
      const double vv = vx * vx + vy * vy;
      if (vv == 0) break;
      const double dx = a.x - current.x;
      const double dy = a.y - current.y;
      const double dv = dx * vx + dy * vy;
      const double c = dx * dx + dy * dy - r2;
      // f(t) = vv t^2 + 2 dv t + c has f(0) < 0, hence one positive root.
      const double t = (-dv + std::sqrt(std::max(0.0, dv * dv - vv * c))) / vv;
      if (t > 1.0) break;
      const Point next{a.x + t * vx, a.y + t * vy};
      out.push_back(next);
      current = next;
      a = next;
    }
  }

  const Point& last = stroke.back();
  if (distance(current, last) > kCoincident) {
    out.push_back(last);
  } else if (out.size() > 1) {
    out.back() = last;
  }
  return out;
}

}  // namespace

Trajectory resample(const Trajectory& traj, double interval) {
  if (!(interval > 0) || !std::isfinite(interval)) {
    throw std::invalid_argument("resample interval must be positive, got " +
                                std::to_string(interval));
  }
  traj.validate();
  Trajectory out;
  out.strokes.reserve(traj.strokes.size());
  for (const auto& stroke : traj.strokes) out.strokes.push_back(resample_stroke(stroke, interval));
  return out;
}

}  // namespace sgcn::ink
