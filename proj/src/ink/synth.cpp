#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sgcn/ink/dataset.hpp"
#include "sgcn/numcore/rng.hpp"

namespace sgcn::ink {
namespace {

constexpr double kPi = std::numbers::pi;

// Elliptic arc from angle a0 to a1 (radians, counter-clockwise positive).
Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1, int n) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double a = a0 + (a1 - a0) * i / n;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

Stroke line(Point a, Point b, int n) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    s.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
  }
  return s;
}

void append(Stroke& dst, const Stroke& src) {
  // Drop the joint point when it repeats the previous end.
  auto it = src.begin();
  if (!dst.empty() && !src.empty() && dst.back() == src.front()) ++it;
  dst.insert(dst.end(), it, src.end());
}

Trajectory make_template(std::size_t index) {
  Trajectory t;
  switch (index) {
    case 0:
      t.strokes.push_back(arc(0.5, 0.5, 0.22, 0.5, 0.5 * kPi, 2.45 * kPi, 32));
      break;
    case 1: {
      Stroke s = line({0.3, 0.8}, {0.5, 1.0}, 4);
      append(s, line({0.5, 1.0}, {0.5, 0.0}, 12));
      t.strokes.push_back(s);
      break;
    }
    case 2: {
      Stroke s = arc(0.5, 0.72, 0.3, 0.28, 0.85 * kPi, -0.25 * kPi, 16);
      append(s, line(s.back(), {0.18, 0.0}, 10));
      append(s, line({0.18, 0.0}, {0.8, 0.0}, 8));
      t.strokes.push_back(s);
      break;
    }
    case 3: {
      Stroke s = arc(0.48, 0.75, 0.26, 0.25, 0.8 * kPi, -0.5 * kPi, 16);
      append(s, arc(0.48, 0.25, 0.3, 0.25, 0.5 * kPi, -0.8 * kPi, 18));
      t.strokes.push_back(s);
      break;
    }
    case 4: {
      Stroke s = line({0.62, 1.0}, {0.12, 0.32}, 10);
      append(s, line({0.12, 0.32}, {0.8, 0.32}, 8));
      t.strokes.push_back(s);
      t.strokes.push_back(line({0.62, 0.62}, {0.62, 0.0}, 9));
      break;
    }
    case 5: {
      Stroke s = line({0.8, 1.0}, {0.28, 1.0}, 6);
      append(s, line({0.28, 1.0}, {0.22, 0.58}, 5));
      append(s, arc(0.48, 0.3, 0.28, 0.28, 0.75 * kPi, -0.8 * kPi, 20));
      t.strokes.push_back(s);
      break;
    }
    case 6: {
      Stroke s = arc(0.7, 0.42, 0.46, 0.58, 0.62 * kPi, 1.0 * kPi, 8);
      append(s, arc(0.5, 0.22, 0.22, 0.22, 1.0 * kPi, 3.0 * kPi, 26));
      t.strokes.push_back(s);
      break;
    }
    case 7: {
      Stroke s = line({0.12, 1.0}, {0.88, 1.0}, 8);
      append(s, line({0.88, 1.0}, {0.38, 0.0}, 12));
      t.strokes.push_back(s);
      break;
    }
    case 8: {
      Stroke s = arc(0.5, 0.76, 0.14, 0.24, 0.0, 1.5 * kPi, 18);
      append(s, arc(0.5, 0.26, 0.18, 0.26, 0.5 * kPi, -1.5 * kPi, 26));
      append(s, arc(0.5, 0.76, 0.14, 0.24, -0.5 * kPi, 0.0, 6));
      t.strokes.push_back(s);
      break;
    }
    case 9: {
      Stroke s = arc(0.48, 0.76, 0.22, 0.24, 0.0, 2.0 * kPi, 26);
      append(s, line(s.back(), {0.72, 0.0}, 12));
      t.strokes.push_back(s);
      break;
    }
    default:
      throw std::out_of_range("unknown class template " + std::to_string(index));
  }
  return t;
}

}  // namespace

std::size_t num_templates() { return 10; }

Trajectory digit_template(std::size_t index) { return make_template(index); }

Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.num_classes == 0 || spec.num_classes > num_templates()) {
    throw std::out_of_range("synth_dataset: no template for class count " +
                            std::to_string(spec.num_classes) + " (have " +
                            std::to_string(num_templates()) + ")");
  }
  if (spec.jitter < 0 || spec.rotation_range < 0 || !(spec.scale_min > 0) ||
      spec.scale_max < spec.scale_min) {
    throw std::invalid_argument("synth_dataset: invalid noise ranges");
  }

  std::vector<Trajectory> templates;
  Dataset ds;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    templates.push_back(make_template(c));
    ds.class_names.push_back(std::to_string(c));
  }

  const numcore::Rng root(seed);
  for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      numcore::Rng rng = root.split(i * spec.num_classes + c);
      const double angle =
          spec.rotation_range > 0 ? rng.uniform(-spec.rotation_range, spec.rotation_range) : 0.0;
      const double scale =
          spec.scale_max > spec.scale_min ? rng.uniform(spec.scale_min, spec.scale_max)
                                          : spec.scale_min;
      const double tx = rng.uniform(-2.0, 2.0);
      const double ty = rng.uniform(-2.0, 2.0);
      const double ca = std::cos(angle);
      const double sa = std::sin(angle);

      Sample sample;
      sample.label = static_cast<std::uint32_t>(c);
      sample.id = "synth-" + std::to_string(c) + "-" + std::to_string(i);
      for (const Stroke& stroke : templates[c].strokes) {
        Stroke out;
        out.reserve(stroke.size());
        for (Point p : stroke) {
          if (spec.jitter > 0) {
            p.x += rng.normal(0.0, spec.jitter);
            p.y += rng.normal(0.0, spec.jitter);
          }
          const double x = p.x - 0.5;
          const double y = p.y - 0.5;
          out.push_back({scale * (ca * x - sa * y) + tx, scale * (sa * x + ca * y) + ty});
        }
        sample.trajectory.strokes.push_back(std::move(out));
      }
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

}  // namespace sgcn::ink
